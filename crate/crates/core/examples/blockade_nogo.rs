//! PXP dynamics stay out of blockaded states; ZXZ reaches them.

use globalctl::scenarios::{pxp_max_blockaded, zxz_edge_flip_amplitude};

fn main() -> globalctl::Result<()> {
    for n in 4..=6 {
        println!(
            "N={n}: PXP max blockaded population {:.1e}, ZXZ edge flip amplitude {:.10}",
            pxp_max_blockaded(n, 10, n as u64)?,
            zxz_edge_flip_amplitude(n)?
        );
    }
    Ok(())
}
