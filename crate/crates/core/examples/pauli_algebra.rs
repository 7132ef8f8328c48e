//! Pauli-sum arithmetic: commutators, text round trip, dense conversion.

use globalctl::pauli::PauliSum;

fn main() -> globalctl::Result<()> {
    let a = PauliSum::from_text("1.0 XII\n0.5 ZZI")?;
    let b = PauliSum::from_text("1.0 IZI\n-2.0 YIY")?;
    let c = a.commutator(&b)?;
    println!("[A, B] =\n{}", c.to_text());
    println!("reflected:\n{}", c.reflection_image().to_text());
    let back = PauliSum::from_dense(&c.to_dense()?, 3)?;
    println!("dense round trip error: {:.2e}", back.max_abs_diff(&c)?);
    Ok(())
}
