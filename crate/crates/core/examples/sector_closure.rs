//! Closures of particle-conserving chain controls and their ablations.

use globalctl::scenarios::sector_rows;

fn main() -> globalctl::Result<()> {
    for r in sector_rows()? {
        let dropped = if r.dropped.is_empty() { "-" } else { r.dropped.as_str() };
        println!("{:<24} drop {:<14} dim {:>4} / {}", r.family, dropped, r.dimension, r.full_dimension);
    }
    Ok(())
}
