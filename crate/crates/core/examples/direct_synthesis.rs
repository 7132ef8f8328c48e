//! Direct trajectory optimization of a ZXZ pulse; prints the pulse CSV.
//!
//! Usage: `direct_synthesis [duration_us] [seed]`.

use globalctl::models::{AtomGeometry, RydbergSystem};
use globalctl::optim::{direct_optimize, zxz_target, ControlModel, DirectOptions, DEFAULT_SUBSTEPS};

fn main() -> globalctl::Result<()> {
    let mut args = std::env::args().skip(1);
    let duration = args.next().and_then(|s| s.parse().ok()).unwrap_or(1.2);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let model = ControlModel::new(RydbergSystem::new(AtomGeometry::chain(3, 8.9)?)?, DEFAULT_SUBSTEPS)?;
    let opts = DirectOptions { duration, seed, ..Default::default() };
    let (pulse, _, report) = direct_optimize(&model, &zxz_target(3, 0.8)?, &opts, None)?;
    eprintln!(
        "fidelity {:.4}, valid {}, outer defects {:?}",
        report.final_fidelity, report.pulse_valid, report.defect_history
    );
    print!("{}", pulse.to_csv_string()?);
    Ok(())
}
