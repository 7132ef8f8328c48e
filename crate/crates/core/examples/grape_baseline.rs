//! A few GRAPE runs on the 3-atom ZXZ target.

use globalctl::models::{AtomGeometry, RydbergSystem};
use globalctl::optim::{grape_study, zxz_target, ControlModel, GrapeOptions, GrapeProblem, DEFAULT_SUBSTEPS};
use globalctl::propagation::ConstraintProfile;

fn main() -> globalctl::Result<()> {
    let model = ControlModel::new(RydbergSystem::new(AtomGeometry::chain(3, 8.9)?)?, DEFAULT_SUBSTEPS)?;
    let problem = GrapeProblem::new(model, zxz_target(3, 0.8)?, ConstraintProfile::default(), 1.25, 26, 50, 0)?;
    let opts = GrapeOptions { iterations: 400, ..Default::default() };
    for r in [1e-6, 1e-8] {
        let s = grape_study(&problem, r, &opts, &[0, 1, 2, 3])?;
        println!("r={r:e}: median {:.4}, best {:.4}, fidelities {:?}", s.median, s.best, s.fidelities);
    }
    Ok(())
}
