//! Which single extra X patterns make a uniformly driven chain universal.

use std::collections::BTreeSet;

use globalctl::closure::check_universality_qubit;

fn main() -> globalctl::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    for mask in 0u32..1 << n {
        let pattern: BTreeSet<usize> = (1..=n).filter(|j| mask >> (j - 1) & 1 == 1).collect();
        let v = check_universality_qubit(n, &pattern)?;
        println!(
            "{pattern:?}: dim {:>5} of {}, symmetric {}, {:?}",
            v.closure.dimension, v.closure.full_dimension, v.pattern_symmetric, v.closure.universality
        );
    }
    Ok(())
}
