use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use globalctl::closure::{check_universality_qubit_with, close, reflection_sector_check, Backend, ClosureBasis, DEFAULT_TOL};
use globalctl::models::{AtomGeometry, RydbergSystem, CHAIN_SPACING_UM};
use globalctl::optim::{
    best_index, direct_multistart, grape_study, tau_sweep, zxz_target, ControlModel, DirectOptions, GrapeOptions,
    GrapeProblem, OptimizationReport, DEFAULT_SUBSTEPS,
};
use globalctl::propagation::{ConstraintProfile, ControlPulse};
use globalctl::scenarios::{self, spinful_family_both_fields, ScenarioConfig};
use globalctl::sector::{build_hubbard_chain_controls, verify_nnn_identity, SectorKind, NNN_IDENTITIES};
use globalctl::{Error, Result};

#[derive(Parser)]
#[command(name = "globalctl", version, about = "Universality checks and pulse synthesis for globally driven atom arrays")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closure dimension and universality verdict.
    DlaCheck(DlaArgs),
    /// Nested-commutator identities on a square lattice.
    NnnVerify {
        #[arg(long, default_value_t = 3)]
        rows: usize,
        #[arg(long, default_value_t = 3)]
        cols: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize a global pulse for a ZXZ target.
    Synthesize(SynthArgs),
    /// Warm-started direct solves over a range of ZXZ angles.
    Sweep(SweepArgs),
    #[command(subcommand)]
    Scenario(ScenarioCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Pauli,
    Dense,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum SectorArg {
    Fermion,
    Boson,
    Spinful,
}

#[derive(clap::Args)]
struct DlaArgs {
    /// Qubit count of the uniformly driven chain.
    #[arg(long)]
    n: Option<usize>,
    /// 1-based sites carrying the extra X field, e.g. `1,3`.
    #[arg(long, value_delimiter = ',')]
    break_sites: Vec<usize>,
    #[arg(long, value_enum, default_value = "pauli")]
    backend: BackendArg,
    #[arg(long, value_enum)]
    sector: Option<SectorArg>,
    #[arg(long)]
    sites: Option<usize>,
    #[arg(long)]
    particles: Option<usize>,
    /// Control to remove before closing.
    #[arg(long)]
    drop: Vec<String>,
    /// Include the basis as Pauli text in the output.
    #[arg(long)]
    basis: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum MethodArg {
    Direct,
    Grape,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long, default_value = "zxz")]
    target: String,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 0.8)]
    tau: f64,
    /// Pulse duration in µs.
    #[arg(long = "T", default_value_t = 1.2)]
    duration: f64,
    #[arg(long, value_enum, default_value = "direct")]
    method: MethodArg,
    /// Hardware limits as JSON; defaults to the built-in profile.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    seeds: u64,
    /// GRAPE smoothness weight.
    #[arg(long, default_value_t = 1e-7)]
    r: f64,
    #[arg(long, default_value_t = CHAIN_SPACING_UM)]
    spacing: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SweepArgs {
    /// `start:stop:step`, inclusive of both ends.
    #[arg(long, default_value = "0.8:0.1:-0.1", allow_hyphen_values = true)]
    tau: String,
    #[arg(long = "T", default_value_t = 1.2)]
    duration: f64,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    seeds: u64,
    /// Directory for one pulse CSV per angle plus `sweep.json`.
    #[arg(long, default_value = "sweep")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ScenarioCmd {
    List,
    Run {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON overrides for the scenario configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn emit(value: &Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn basis_text(basis: &ClosureBasis) -> Option<Vec<String>> {
    match basis {
        ClosureBasis::Pauli(v) => Some(v.iter().map(|b| b.to_text()).collect()),
        ClosureBasis::Dense(_) => None,
    }
}

fn dla_check(a: &DlaArgs) -> Result<()> {
    if let Some(kind) = a.sector {
        let (sites, particles) = match (a.sites, a.particles) {
            (Some(s), Some(p)) => (s, p),
            _ => return Err(Error::InvalidArgument("--sector needs --sites and --particles".into())),
        };
        let fam = match kind {
            SectorArg::Fermion => build_hubbard_chain_controls(SectorKind::Fermion, sites, particles)?,
            SectorArg::Boson => build_hubbard_chain_controls(SectorKind::Boson, sites, particles)?,
            SectorArg::Spinful => spinful_family_both_fields(sites, particles)?,
        };
        let drops: Vec<&str> = a.drop.iter().map(String::as_str).collect();
        let fam = if drops.is_empty() { fam } else { fam.without(&drops)? };
        let r = close(&fam.generator_set()?, usize::MAX, DEFAULT_TOL)?;
        return emit(
            &json!({
                "family": fam.label, "controls": fam.names(), "dropped": a.drop,
                "dimension": r.dimension, "full_dimension": r.full_dimension,
                "verdict": r.universality, "converged": r.converged, "elapsed_secs": r.elapsed_secs,
            }),
            a.out.as_deref(),
        );
    }
    let n = a.n.ok_or_else(|| Error::InvalidArgument("need --n or --sector".into()))?;
    let pattern: BTreeSet<usize> = a.break_sites.iter().copied().collect();
    let backends: &[Backend] = match a.backend {
        BackendArg::Pauli => &[Backend::Pauli],
        BackendArg::Dense => &[Backend::Dense],
        BackendArg::Both => &[Backend::Pauli, Backend::Dense],
    };
    let mut results = Vec::new();
    for &b in backends {
        let v = check_universality_qubit_with(n, &pattern, b)?;
        let reflection = match (b, v.pattern_symmetric) {
            (Backend::Pauli, true) => Some(reflection_sector_check(&v.closure, n)?),
            _ => None,
        };
        let mut entry = json!({
            "backend": b, "dimension": v.closure.dimension, "full_dimension": v.closure.full_dimension,
            "verdict": v.closure.universality, "converged": v.closure.converged,
            "depth": v.closure.depth_reached, "elapsed_secs": v.closure.elapsed_secs,
            "reflection_closed": reflection,
        });
        if a.basis {
            entry["basis"] = json!(basis_text(&v.closure.basis));
        }
        results.push((v, entry));
    }
    let agree = results.windows(2).all(|w| w[0].0.closure.dimension == w[1].0.closure.dimension);
    emit(
        &json!({
            "n": n, "break_sites": pattern, "pattern_symmetric": results[0].0.pattern_symmetric,
            "backends_agree": agree, "results": results.into_iter().map(|r| r.1).collect::<Vec<_>>(),
        }),
        a.out.as_deref(),
    )
}

fn nnn_verify(rows: usize, cols: usize, out: Option<&Path>) -> Result<bool> {
    let checks = NNN_IDENTITIES.iter().map(|id| verify_nnn_identity(id.label, rows, cols)).collect::<Result<Vec<_>>>()?;
    let passed = checks.iter().all(|c| c.passed);
    emit(&json!({"rows": rows, "cols": cols, "passed": passed, "identities": checks}), out)?;
    Ok(passed)
}

fn load_profile(p: Option<&Path>) -> Result<ConstraintProfile> {
    p.map_or_else(|| Ok(ConstraintProfile::default()), ConstraintProfile::load)
}

fn chain_model(n: usize, spacing: f64) -> Result<ControlModel> {
    ControlModel::new(RydbergSystem::new(AtomGeometry::chain(n, spacing)?)?, DEFAULT_SUBSTEPS)
}

fn report_json(r: &OptimizationReport) -> Value {
    serde_json::to_value(r).unwrap_or(Value::Null)
}

fn synthesize(a: &SynthArgs) -> Result<bool> {
    if a.target != "zxz" {
        return Err(Error::InvalidArgument(format!("unknown target '{}', only 'zxz' is built in", a.target)));
    }
    let profile = load_profile(a.profile.as_deref())?;
    let model = chain_model(a.n, a.spacing)?;
    let target = zxz_target(a.n, a.tau)?;
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let provenance = json!({"software": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION")});
    let (pulse, body) = match a.method {
        MethodArg::Direct => {
            let opts = DirectOptions { duration: a.duration, profile: profile.clone(), ..Default::default() };
            let runs = direct_multistart(&model, &target, &opts, &seeds)?;
            let reports: Vec<OptimizationReport> = runs.iter().map(|r| r.2.clone()).collect();
            let best = best_index(&reports).ok_or_else(|| Error::ScenarioFailed {
                name: "synthesize".into(),
                reason: "no seed produced a valid pulse".into(),
            })?;
            let settings = json!({
                "q": opts.q, "r_accel": opts.r_accel, "dt": opts.dt, "feas_tol": opts.feas_tol,
                "max_outer": opts.max_outer, "inner_iterations": opts.inner.max_iter, "mu0": opts.mu0,
                "init": opts.init,
            });
            let body = json!({"best_seed": reports[best].seed, "settings": settings,
                "runs": reports.iter().map(report_json).collect::<Vec<_>>()});
            (runs[best].0.clone(), body)
        }
        MethodArg::Grape => {
            let knots = (a.duration / profile.dt_min).round() as usize + 1;
            let problem = GrapeProblem::new(model, target, profile.clone(), a.duration, knots, 50, 0)?;
            let gopts = GrapeOptions::default();
            let study = grape_study(&problem, a.r, &gopts, &seeds)?;
            let best = (0..study.reports.len())
                .max_by(|&x, &y| study.fidelities[x].total_cmp(&study.fidelities[y]))
                .unwrap_or(0);
            let seed = study.reports[best].seed;
            let (pulse, _) = globalctl::optim::grape_optimize(
                &GrapeProblem { r: a.r, ..problem.clone() },
                &GrapeOptions { seed, ..gopts.clone() },
            )?;
            let settings = json!({
                "r": a.r, "lambda": problem.lambda, "knots": knots, "states": problem.states.len(),
                "iterations": gopts.iterations, "learning_rate": gopts.learning_rate, "init_scale": gopts.init_scale,
            });
            let body = json!({"best_seed": seed, "median_fidelity": study.median, "settings": settings,
                "runs": study.reports.iter().map(report_json).collect::<Vec<_>>()});
            (pulse, body)
        }
    };
    let mut report = json!({
        "target": a.target, "n": a.n, "tau": a.tau, "duration_us": a.duration, "spacing_um": a.spacing,
        "profile": profile, "seeds": seeds, "provenance": provenance,
    });
    if let (Value::Object(m), Value::Object(b)) = (&mut report, body) {
        m.extend(b);
    }
    write_pulse(&pulse, a.out.as_deref())?;
    let best = report["runs"].as_array().and_then(|rs| {
        rs.iter().find(|r| r["seed"] == report["best_seed"]).map(|r| (r["final_fidelity"].clone(), r["pulse_valid"].clone()))
    });
    if let Some((f, v)) = best {
        eprintln!("best seed {}: fidelity {f}, valid {v}", report["best_seed"]);
    }
    match &a.report {
        Some(p) => emit(&report, Some(p))?,
        None if a.out.is_some() => emit(&report, None)?,
        None => {}
    }
    Ok(true)
}

fn write_pulse(pulse: &ControlPulse, out: Option<&Path>) -> Result<()> {
    let csv = pulse.to_csv_string()?;
    match out {
        Some(p) => std::fs::write(p, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

/// Parses `start:stop:step` into the inclusive list of values.
fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad number '{p}' in '{s}'"))))
        .collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(Error::InvalidArgument(format!("expected start:stop:step, got '{s}'")));
    };
    if step == 0.0 || (stop - start) * step < 0.0 {
        return Err(Error::InvalidArgument(format!("step {step} never reaches {stop} from {start}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9).collect())
}

fn sweep(a: &SweepArgs) -> Result<bool> {
    let taus = parse_range(&a.tau)?;
    let profile = load_profile(a.profile.as_deref())?;
    let model = chain_model(a.n, CHAIN_SPACING_UM)?;
    let opts = DirectOptions { duration: a.duration, profile: profile.clone(), ..Default::default() };
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let runs = direct_multistart(&model, &zxz_target(a.n, taus[0])?, &opts, &seeds)?;
    let reports: Vec<OptimizationReport> = runs.iter().map(|r| r.2.clone()).collect();
    let best = best_index(&reports).ok_or_else(|| Error::ScenarioFailed {
        name: "sweep".into(),
        reason: format!("no valid pulse at tau {}", taus[0]),
    })?;
    let entries = tau_sweep(&model, &taus[1..], &runs[best].1, &opts)?;
    std::fs::create_dir_all(&a.out)?;
    std::fs::write(a.out.join(format!("pulse_tau{}.csv", taus[0])), runs[best].0.to_csv_string()?)?;
    let mut rows = vec![json!({"tau": taus[0], "report": report_json(&reports[best])})];
    let mut all_valid = reports[best].pulse_valid;
    for e in &entries {
        std::fs::write(a.out.join(format!("pulse_tau{}.csv", e.tau)), e.pulse.to_csv_string()?)?;
        eprintln!("tau {}: fidelity {:.4}, valid {}", e.tau, e.report.final_fidelity, e.report.pulse_valid);
        all_valid &= e.report.pulse_valid;
        rows.push(json!({"tau": e.tau, "report": report_json(&e.report)}));
    }
    emit(
        &json!({"duration_us": a.duration, "n": a.n, "profile": profile, "seeds": seeds, "entries": rows,
            "provenance": {"software": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION")}}),
        Some(&a.out.join("sweep.json")),
    )?;
    Ok(all_valid)
}

fn scenario(cmd: &ScenarioCmd) -> Result<bool> {
    match cmd {
        ScenarioCmd::List => {
            for s in scenarios::list() {
                println!("{:<22} {}", s.name, s.summary);
            }
            Ok(true)
        }
        ScenarioCmd::Run { name, out, config } => {
            let cfg = match config {
                Some(p) => ScenarioConfig::from_json_str(&std::fs::read_to_string(p)?)?,
                None => ScenarioConfig::default(),
            };
            let dir = out.clone().unwrap_or_else(|| PathBuf::from("results").join(name));
            let res = scenarios::run_and_persist(name, &cfg, &dir)?;
            print!("{}", res.report);
            eprintln!("results in {}", dir.display());
            Ok(res.report.passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::DlaCheck(a) => dla_check(a).map(|_| true),
        Cmd::NnnVerify { rows, cols, out } => nnn_verify(*rows, *cols, out.as_deref()),
        Cmd::Synthesize(a) => synthesize(a),
        Cmd::Sweep(a) => sweep(a),
        Cmd::Scenario(c) => scenario(c),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::parse_range;

    #[test]
    fn ranges_are_inclusive() {
        assert_eq!(parse_range("0.8:0.1:-0.1").unwrap(), vec![0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1]);
        assert_eq!(parse_range("1:2:0.5").unwrap(), vec![1.0, 1.5, 2.0]);
        assert!(parse_range("1:2:-1").is_err());
        assert!(parse_range("1:2").is_err());
    }
}
