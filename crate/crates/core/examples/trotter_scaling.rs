//! Product-formula error slopes on random anti-Hermitian pairs.

use globalctl::scenarios::trotter_rows;

fn main() -> globalctl::Result<()> {
    for r in trotter_rows(5, 1)? {
        println!("pair {}: linear {:+.3}, commutator {:+.3}", r.pair, r.linear_slope, r.commutator_slope);
    }
    Ok(())
}
