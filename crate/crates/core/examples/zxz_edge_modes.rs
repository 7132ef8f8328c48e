//! Boundary and bulk magnetization under exact ZXZ evolution.

use globalctl::scenarios::{zxz_edge_observables, EDGE_TAUS};

fn main() -> globalctl::Result<()> {
    let n = 8;
    for (tau, o) in zxz_edge_observables(n, &EDGE_TAUS)? {
        let bulk: Vec<String> = o.z[1..n - 1].iter().map(|z| format!("{z:+.3}")).collect();
        println!("tau {tau:.1}: Z1 {:+.6} Z8 {:+.6} Z1Z8 {:+.6} bulk [{}]", o.z[0], o.z[n - 1], o.zz[0][n - 1], bulk.join(" "));
    }
    Ok(())
}
