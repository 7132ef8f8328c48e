//! The stored long pulse with and without decay and calibration errors.

use globalctl::models::{AtomGeometry, NoiseModel, RydbergSystem};
use globalctl::scenarios::{density_traces, long_pulse, windowed_boundary_divergence, DIVERGENCE_WINDOW_US};

fn main() -> globalctl::Result<()> {
    let sys = RydbergSystem::new(AtomGeometry::chain(3, 8.9)?)?;
    let trace = density_traces(&long_pulse()?, &sys, &NoiseModel::fitted(), 0.05)?;
    for (end, mean) in windowed_boundary_divergence(&trace, DIVERGENCE_WINDOW_US) {
        println!("window ending {end:.2} µs: boundary divergence {mean:.4}");
    }
    Ok(())
}
