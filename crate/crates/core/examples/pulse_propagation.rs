//! Propagating a constrained global pulse on a Rydberg chain.

use globalctl::models::{AtomGeometry, RydbergSystem};
use globalctl::propagation::{
    evolve, ground_state, observables_from_state, propagate_unitary, ConstraintProfile, ControlPulse, PropagateOptions,
};

fn main() -> globalctl::Result<()> {
    let sys = RydbergSystem::new(AtomGeometry::chain(3, 8.9)?)?;
    let t: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
    let omega: Vec<f64> = t.iter().map(|&s| 2.0 * (std::f64::consts::PI * s).sin().powi(2)).collect();
    let delta: Vec<f64> = t.iter().map(|&s| 4.0 * (s - 0.5)).collect();
    let pulse = ControlPulse::from_mhz(t, &omega, &delta)?;
    pulse.validate(&ConstraintProfile::default())?;
    let u = propagate_unitary(&pulse, &sys, &PropagateOptions::default())?;
    let o = observables_from_state(&evolve(&u, &ground_state(sys.dim()))?)?;
    println!("Rydberg densities after 1 µs: {:?}", o.n);
    print!("{}", pulse.to_csv_string()?);
    Ok(())
}
