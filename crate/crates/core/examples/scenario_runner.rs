//! Runs one named scenario and writes its results directory.

use std::path::PathBuf;

use globalctl::scenarios::{list, run_and_persist, ScenarioConfig};

fn main() -> globalctl::Result<()> {
    let Some(name) = std::env::args().nth(1) else {
        for s in list() {
            println!("{:<22} {}", s.name, s.summary);
        }
        return Ok(());
    };
    let dir = PathBuf::from("results").join(&name);
    let out = run_and_persist(&name, &ScenarioConfig::default(), &dir)?;
    print!("{}", out.report);
    Ok(())
}
