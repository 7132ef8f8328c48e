//! Triple commutators of lattice controls against direct diagonal hops.

use globalctl::sector::{verify_nnn_identity, NNN_IDENTITIES};

fn main() -> globalctl::Result<()> {
    for id in NNN_IDENTITIES {
        let c = verify_nnn_identity(id.label, 3, 3)?;
        println!("{:<24} factor {:+.3} residual {:.1e} {}", c.label, c.proportionality, c.residual, c.passed);
    }
    Ok(())
}
