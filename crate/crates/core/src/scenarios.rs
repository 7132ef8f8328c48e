//! Named end-to-end runs with tagged expectations and on-disk results.
//!
//! Each scenario is a pure function of its [`ScenarioConfig`]. Results land in
//! one directory per run: `inputs.json`, `report.json` and any CSV outputs.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::closure::{
    close, reflection_sector_check, check_universality_qubit, GeneratorSet, Universality, DEFAULT_TOL,
};
use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, CMat, CVec, C64};
use crate::models::{
    pxp_hamiltonian, zxz_hamiltonian, AtomGeometry, NoiseModel, RydbergSystem, CHAIN_SPACING_UM,
};
use crate::optim::{
    best_index, direct_multistart, grape_study, tau_sweep, zxz_target, ControlModel, DirectOptions, GrapeOptions,
    GrapeProblem, DEFAULT_SUBSTEPS,
};
use crate::parallel::parallel_map;
use crate::pauli::{PauliKey, PauliSum};
use crate::propagation::{
    ground_state, observables_from_density, observables_from_state, propagate_lindblad, propagate_unitary,
    trajectory_csv, ConstraintProfile, ControlPulse, LindbladOptions, Observables, PropagateOptions,
};
use crate::sector::{
    build_hubbard_chain_controls, build_spinful_controls, spin_z_field, verify_nnn_identity, ControlFamily,
    SectorKind, NNN_IDENTITIES,
};
use crate::trotter::{loglog_slope, trotter_commutator_error, trotter_linear_error};

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Follows from the definitions.
    Trivial,
    /// A published value or claim.
    Published,
    /// Computed by an independent calculation in this crate.
    Derived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    /// `|observed - value| <= tolerance`.
    Near,
    Lt,
    Le,
    Gt,
    Ge,
}

/// A tagged expectation. The provenance field is mandatory, also when
/// deserializing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub metric: String,
    pub comparator: Comparator,
    pub value: f64,
    #[serde(default)]
    pub tolerance: f64,
    pub provenance: Provenance,
}

impl Expectation {
    pub fn new(metric: impl Into<String>, comparator: Comparator, value: f64, provenance: Provenance) -> Self {
        Self { metric: metric.into(), comparator, value, tolerance: 0.0, provenance }
    }

    pub fn near(metric: impl Into<String>, value: f64, tolerance: f64, provenance: Provenance) -> Self {
        Self { metric: metric.into(), comparator: Comparator::Near, value, tolerance, provenance }
    }

    pub fn holds(&self, observed: f64) -> bool {
        match self.comparator {
            Comparator::Near => (observed - self.value).abs() <= self.tolerance,
            Comparator::Lt => observed < self.value,
            Comparator::Le => observed <= self.value,
            Comparator::Gt => observed > self.value,
            Comparator::Ge => observed >= self.value,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    #[serde(flatten)]
    pub expectation: Expectation,
    pub observed: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub metrics: Value,
}

impl fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}: {}", self.name, if self.passed { "PASS" } else { "FAIL" })?;
        for c in &self.checks {
            let e = &c.expectation;
            writeln!(
                f,
                "  [{}] {} = {} ({:?} {} ±{}; {:?})",
                if c.passed { "ok" } else { "FAIL" },
                e.metric,
                c.observed,
                e.comparator,
                e.value,
                e.tolerance,
                e.provenance
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub inputs: Value,
    pub report: ScenarioReport,
    /// `(file name, contents)` pairs written next to the report.
    pub files: Vec<(String, String)>,
}

impl ScenarioOutput {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("inputs.json"), serde_json::to_string_pretty(&self.inputs)? + "\n")?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&self.report)? + "\n")?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

/// Sizes and seeds shared by the scenarios.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Largest chain in the universality table.
    pub max_qubits: usize,
    pub random_sets: usize,
    pub trotter_pairs: usize,
    pub pxp_schedules: usize,
    pub direct_seeds: usize,
    pub grape_seeds: usize,
    pub grape_iterations: usize,
    pub profile: ConstraintProfile,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            max_qubits: 6,
            random_sets: 50,
            trotter_pairs: 10,
            pxp_schedules: 20,
            direct_seeds: 8,
            grape_seeds: 100,
            grape_iterations: GrapeOptions::default().iterations,
            profile: ConstraintProfile::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub struct ScenarioInfo {
    pub name: &'static str,
    pub summary: &'static str,
    run: fn(&ScenarioConfig) -> Result<ScenarioOutput>,
}

const SCENARIOS: &[ScenarioInfo] = &[
    ScenarioInfo {
        name: "universality-table",
        summary: "uniform chain plus one X pattern, every pattern for 3..=6 qubits",
        run: run_universality_table,
    },
    ScenarioInfo {
        name: "backend-equivalence",
        summary: "Pauli and dense closure dimensions on random generator sets",
        run: run_backend_equivalence,
    },
    ScenarioInfo {
        name: "sector-universality",
        summary: "fermion, boson and spinful chain closures with ablations",
        run: run_sector_universality_table,
    },
    ScenarioInfo { name: "nnn-identities", summary: "nested commutators produce diagonal hops", run: run_nnn_identities },
    ScenarioInfo { name: "trotter-scaling", summary: "product-formula error slopes", run: run_trotter_scaling },
    ScenarioInfo {
        name: "blockade-nogo",
        summary: "PXP dynamics never populate blockaded states, ZXZ does",
        run: run_blockade_nogo,
    },
    ScenarioInfo {
        name: "edge-dynamics",
        summary: "boundary observables under exact ZXZ evolution on 8 sites",
        run: run_edge_dynamics,
    },
    ScenarioInfo {
        name: "pulse-comparison",
        summary: "direct method against GRAPE on the 3-atom ZXZ target",
        run: run_pulse_comparison,
    },
    ScenarioInfo { name: "tau-sweep", summary: "continuation of ZXZ pulses from 0.8 down to 0.1", run: run_tau_sweep },
    ScenarioInfo {
        name: "noise-forward",
        summary: "stored long pulse under the fitted decay and calibration model",
        run: run_noise_forward,
    },
];

pub fn list() -> &'static [ScenarioInfo] {
    SCENARIOS
}

pub fn run(name: &str, cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let info = SCENARIOS.iter().find(|s| s.name == name).ok_or_else(|| {
        let names: Vec<&str> = SCENARIOS.iter().map(|s| s.name).collect();
        Error::InvalidArgument(format!("unknown scenario '{name}', expected one of {names:?}"))
    })?;
    (info.run)(cfg)
}

/// Runs and writes the results under `dir`.
pub fn run_and_persist(name: &str, cfg: &ScenarioConfig, dir: &Path) -> Result<ScenarioOutput> {
    let out = run(name, cfg)?;
    out.write_to(dir)?;
    Ok(out)
}

struct Recorder {
    name: &'static str,
    checks: Vec<CheckResult>,
}

impl Recorder {
    fn new(name: &'static str) -> Self {
        Self { name, checks: Vec::new() }
    }

    fn check(&mut self, e: Expectation, observed: f64) {
        let passed = e.holds(observed);
        self.checks.push(CheckResult { expectation: e, observed, passed });
    }

    fn finish(self, inputs: Value, metrics: Value, files: Vec<(String, String)>) -> ScenarioOutput {
        let passed = self.checks.iter().all(|c| c.passed);
        let report = ScenarioReport { name: self.name.to_string(), passed, checks: self.checks, metrics };
        ScenarioOutput { inputs, report, files }
    }
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn pattern_label(p: &BTreeSet<usize>) -> String {
    let v: Vec<String> = p.iter().map(|s| s.to_string()).collect();
    format!("{{{}}}", v.join(","))
}

fn all_patterns(n: usize) -> Vec<BTreeSet<usize>> {
    (0u32..1 << n).map(|m| (1..=n).filter(|j| m >> (j - 1) & 1 == 1).collect()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct UniversalityRow {
    pub n: usize,
    pub pattern: String,
    pub symmetric: bool,
    pub dimension: usize,
    pub verdict: Universality,
    pub reflection_closed: Option<bool>,
}

/// One row per break pattern and chain length.
pub fn universality_rows(ns: impl IntoIterator<Item = usize>) -> Result<Vec<UniversalityRow>> {
    let jobs: Vec<(usize, BTreeSet<usize>)> =
        ns.into_iter().flat_map(|n| all_patterns(n).into_iter().map(move |p| (n, p))).collect();
    parallel_map(&jobs, |(n, p)| {
        let v = check_universality_qubit(*n, p)?;
        let reflection_closed =
            if v.pattern_symmetric { Some(reflection_sector_check(&v.closure, *n)?) } else { None };
        Ok(UniversalityRow {
            n: *n,
            pattern: pattern_label(p),
            symmetric: v.pattern_symmetric,
            dimension: v.closure.dimension,
            verdict: v.closure.universality,
            reflection_closed,
        })
    })
    .into_iter()
    .collect()
}

fn run_universality_table(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let mut rec = Recorder::new("universality-table");
    let rows = universality_rows(3..=cfg.max_qubits)?;
    let mismatches = rows
        .iter()
        .filter(|r| (r.verdict == Universality::Universal) == r.symmetric || r.verdict == Universality::Undetermined)
        .count();
    let wrong_dim = rows
        .iter()
        .filter(|r| r.verdict == Universality::Universal && r.dimension != 4usize.pow(r.n as u32) - 1)
        .count();
    let open_reflection = rows.iter().filter(|r| r.reflection_closed == Some(false)).count();
    rec.check(Expectation::new("verdict_mismatches", Comparator::Le, 0.0, Provenance::Published), mismatches as f64);
    rec.check(Expectation::new("universal_dimension_errors", Comparator::Le, 0.0, Provenance::Trivial), wrong_dim as f64);
    rec.check(
        Expectation::new("symmetric_closures_leaving_reflection_sector", Comparator::Le, 0.0, Provenance::Derived),
        open_reflection as f64,
    );
    let find = |n: usize, p: &str| rows.iter().find(|r| r.n == n && r.pattern == p);
    if let Some(r) = find(4, "{2,3}") {
        rec.check(Expectation::new("n4_sites23_universal", Comparator::Le, 0.0, Provenance::Trivial), (r.verdict == Universality::Universal) as u8 as f64);
    }
    if let Some(r) = find(4, "{1}") {
        rec.check(Expectation::near("n4_site1_dimension", 255.0, 0.0, Provenance::Derived), r.dimension as f64);
    }
    let uniform: Vec<Value> = rows
        .iter()
        .filter(|r| r.pattern == "{}")
        .map(|r| json!({"n": r.n, "dimension": r.dimension}))
        .collect();
    let csv = csv_string(
        &["n", "pattern", "symmetric", "dimension", "verdict"],
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.pattern.clone(),
                r.symmetric.to_string(),
                r.dimension.to_string(),
                serde_json::to_value(r.verdict).map(|v| v.as_str().unwrap_or("").to_string()).unwrap_or_default(),
            ]
        }),
    )?;
    Ok(rec.finish(
        json!({"qubits": (3..=cfg.max_qubits).collect::<Vec<_>>(), "tol": DEFAULT_TOL}),
        json!({"patterns": rows.len(), "uniform_chain_dimensions": uniform}),
        vec![("universality.csv".into(), csv)],
    ))
}

/// Random Pauli generator sets on 1..=`max_n` qubits with small rational
/// coefficients.
pub fn random_generator_sets(count: usize, max_n: usize, seed: u64) -> Result<Vec<GeneratorSet>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = [1.0, -1.0, 0.5, 2.0, -1.5];
    (0..count)
        .map(|i| {
            let n = rng.random_range(1..=max_n);
            let k = rng.random_range(2..=4);
            let mut gens = Vec::with_capacity(k);
            while gens.len() < k {
                let terms = rng.random_range(1..=3);
                let mut t = Vec::new();
                for _ in 0..terms {
                    // weight one or two
                    let mut x = 0u64;
                    let mut z = 0u64;
                    for _ in 0..rng.random_range(1..=2) {
                        let q = rng.random_range(0..n);
                        match rng.random_range(0..3) {
                            0 => x |= 1 << q,
                            1 => z |= 1 << q,
                            _ => {
                                x |= 1 << q;
                                z |= 1 << q;
                            }
                        }
                    }
                    t.push((coeffs[rng.random_range(0..coeffs.len())], PauliKey::new(x, z)));
                }
                let g = PauliSum::from_terms(n, t)?;
                if !g.is_empty() {
                    gens.push(g);
                }
            }
            GeneratorSet::pauli(format!("random set {i} on {n} qubits"), gens)
        })
        .collect()
}

fn run_backend_equivalence(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let mut rec = Recorder::new("backend-equivalence");
    let sets = random_generator_sets(cfg.random_sets, 5, cfg.seed)?;
    let rows: Vec<(String, usize, usize, usize)> = parallel_map(&sets, |g| {
        let n = match g {
            GeneratorSet::Pauli { generators, .. } => generators[0].n_qubits(),
            GeneratorSet::Dense { .. } => 0,
        };
        let a = close(g, usize::MAX, DEFAULT_TOL)?.dimension;
        let b = close(&g.to_dense()?, usize::MAX, DEFAULT_TOL)?.dimension;
        Ok((g.label().to_string(), n, a, b))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let disagreements = rows.iter().filter(|r| r.2 != r.3).count();
    rec.check(Expectation::new("dimension_disagreements", Comparator::Le, 0.0, Provenance::Derived), disagreements as f64);
    let csv = csv_string(
        &["label", "n", "pauli_dimension", "dense_dimension"],
        rows.iter().map(|r| vec![r.0.clone(), r.1.to_string(), r.2.to_string(), r.3.to_string()]),
    )?;
    Ok(rec.finish(
        json!({"sets": cfg.random_sets, "max_qubits": 5, "seed": cfg.seed}),
        json!({"universal": rows.iter().filter(|r| r.2 == 4usize.pow(r.1 as u32) - 1).count()}),
        vec![("backends.csv".into(), csv)],
    ))
}

/// Spinful controls with both the tilted and the uniform `B_Z` field.
pub fn spinful_family_both_fields(n_sites: usize, n_particles: usize) -> Result<ControlFamily> {
    let mut fam = build_spinful_controls(n_sites, n_particles, 1.0, 0.0)?;
    let uniform = spin_z_field(&fam.basis, 0.0, 1.0)?;
    fam.push("BZ_uniform", uniform)?;
    Ok(fam)
}

#[derive(Debug, Clone, Serialize)]
pub struct SectorRow {
    pub family: String,
    pub dropped: String,
    pub dimension: usize,
    pub full_dimension: usize,
    pub universality: Universality,
}

fn sector_close(fam: &ControlFamily, dropped: &[&str]) -> Result<SectorRow> {
    let f = if dropped.is_empty() { fam.clone() } else { fam.without(dropped)? };
    let r = close(&f.generator_set()?, usize::MAX, DEFAULT_TOL)?;
    Ok(SectorRow {
        family: fam.label.clone(),
        dropped: dropped.join("+"),
        dimension: r.dimension,
        full_dimension: r.full_dimension,
        universality: r.universality,
    })
}

/// Each family's full closure followed by its single-control ablations.
pub fn sector_rows() -> Result<Vec<SectorRow>> {
    let families = vec![
        build_hubbard_chain_controls(SectorKind::Fermion, 3, 1)?,
        build_hubbard_chain_controls(SectorKind::Fermion, 5, 2)?,
        build_hubbard_chain_controls(SectorKind::Boson, 3, 2)?,
        spinful_family_both_fields(3, 1)?,
    ];
    let mut jobs: Vec<(usize, Vec<&str>)> = Vec::new();
    for (i, fam) in families.iter().enumerate() {
        jobs.push((i, vec![]));
        for name in fam.names() {
            if name == "BZ_uniform" {
                continue;
            }
            if name == "BZ" {
                jobs.push((i, vec!["BZ", "BZ_uniform"]));
            } else {
                jobs.push((i, vec![name]));
            }
        }
    }
    parallel_map(&jobs, |(i, d)| sector_close(&families[*i], d)).into_iter().collect()
}

fn run_sector_universality_table(_cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let mut rec = Recorder::new("sector-universality");
    let rows = sector_rows()?;
    let expected = [
        ("fermion chain N=3 n=1", 9.0),
        ("fermion chain N=5 n=2", 100.0),
        ("boson chain N=3 n=2", 36.0),
        ("spinful chain N=3 n=1", 36.0),
    ];
    for (fam, dim) in expected {
        if let Some(r) = rows.iter().find(|r| r.family == fam && r.dropped.is_empty()) {
            rec.check(Expectation::near(format!("{fam} dimension"), dim, 0.0, Provenance::Derived), r.dimension as f64);
        }
    }
    // ablations that must shrink the algebra
    for r in rows.iter().filter(|r| !r.dropped.is_empty()) {
        let full = rows.iter().find(|f| f.family == r.family && f.dropped.is_empty()).map_or(0, |f| f.dimension);
        let single_particle = r.family.ends_with("n=1");
        let must_shrink = r.dropped.starts_with("hop") || r.dropped == "BX" || (r.dropped == "U" && !single_particle);
        if must_shrink {
            rec.check(
                Expectation::new(format!("{} without {} below full", r.family, r.dropped), Comparator::Lt, full as f64, Provenance::Derived),
                r.dimension as f64,
            );
        }
    }
    let csv = csv_string(
        &["family", "dropped", "dimension", "full_dimension"],
        rows.iter().map(|r| vec![r.family.clone(), r.dropped.clone(), r.dimension.to_string(), r.full_dimension.to_string()]),
    )?;
    Ok(rec.finish(
        json!({"families": expected.iter().map(|e| e.0).collect::<Vec<_>>(), "tol": DEFAULT_TOL}),
        serde_json::to_value(&rows)?,
        vec![("sectors.csv".into(), csv)],
    ))
}

fn run_nnn_identities(_cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let mut rec = Recorder::new("nnn-identities");
    let mut checks = Vec::new();
    for (rows, cols) in [(3, 3), (5, 5)] {
        for id in NNN_IDENTITIES {
            let c = verify_nnn_identity(id.label, rows, cols)?;
            rec.check(
                Expectation::new(format!("{} on {rows}x{cols} residual", id.label), Comparator::Lt, 1e-9, Provenance::Published),
                c.residual,
            );
            checks.push(c);
        }
    }
    let csv = csv_string(
        &["label", "rows", "cols", "proportionality", "residual"],
        checks.iter().map(|c| {
            vec![c.label.clone(), c.rows.to_string(), c.cols.to_string(), c.proportionality.to_string(), format!("{:e}", c.residual)]
        }),
    )?;
    Ok(rec.finish(json!({"lattices": [[3, 3], [5, 5]]}), serde_json::to_value(&checks)?, vec![("nnn.csv".into(), csv)]))
}

/// Random anti-Hermitian pair with spectral norms at most one.
pub fn random_antihermitian_pair(dim: usize, rng: &mut ChaCha8Rng) -> (CMat, CMat) {
    let mut one = || {
        let g = CMat::from_fn(dim, dim, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let h = (&g + g.adjoint()) * C64::new(0.5, 0.0);
        let norm = crate::linalg::spectral_norm(&h);
        h.map(|z| z * C64::new(0.0, 1.0 / norm))
    };
    (one(), one())
}

#[derive(Debug, Clone, Serialize)]
pub struct TrotterRow {
    pub pair: usize,
    pub linear_slope: f64,
    pub commutator_slope: f64,
}

/// Slopes over `n = 2^2..2^10` for `count` random pairs.
pub fn trotter_rows(count: usize, seed: u64) -> Result<Vec<TrotterRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns: Vec<usize> = (2..=10).map(|k| 1 << k).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    (0..count)
        .map(|pair| {
            let (a, b) = random_antihermitian_pair(4, &mut rng);
            let lin = ns.iter().map(|&n| trotter_linear_error(&a, &b, n)).collect::<Result<Vec<_>>>()?;
            let com = ns.iter().map(|&n| trotter_commutator_error(&a, &b, n)).collect::<Result<Vec<_>>>()?;
            Ok(TrotterRow { pair, linear_slope: loglog_slope(&xs, &lin), commutator_slope: loglog_slope(&xs, &com) })
        })
        .collect()
}

fn run_trotter_scaling(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let mut rec = Recorder::new("trotter-scaling");
    let rows = trotter_rows(cfg.trotter_pairs, cfg.seed)?;
    for r in &rows {
        rec.check(Expectation::near(format!("pair {} linear slope", r.pair), -1.0, 0.1, Provenance::Published), r.linear_slope);
        rec.check(
            Expectation::near(format!("pair {} commutator slope", r.pair), -0.5, 0.1, Provenance::Published),
            r.commutator_slope,
        );
    }
    let csv = csv_string(
        &["pair", "linear_slope", "commutator_slope"],
        rows.iter().map(|r| vec![r.pair.to_string(), r.linear_slope.to_string(), r.commutator_slope.to_string()]),
    )?;
    Ok(rec.finish(
        json!({"pairs": cfg.trotter_pairs, "seed": cfg.seed, "n": (2..=10).map(|k| 1usize << k).collect::<Vec<_>>()}),
        serde_json::to_value(&rows)?,
        vec![("trotter.csv".into(), csv)],
    ))
}

/// Total population on basis states with two neighbouring excitations.
pub fn blockaded_population(psi: &CVec) -> f64 {
    psi.iter().enumerate().filter(|(s, _)| s & (s >> 1) != 0).map(|(_, a)| a.norm_sqr()).sum()
}

/// Largest blockaded population over `count` random piecewise-constant PXP
/// schedules of 8 segments.
pub fn pxp_max_blockaded(n: usize, count: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let mut psi = ground_state(1 << n);
        for _ in 0..8 {
            let omega = rng.random_range(0.0..4.0);
            let delta = rng.random_range(-4.0..4.0);
            let t = rng.random_range(0.05..1.0);
            let h = pxp_hamiltonian(n, omega, delta)?.to_dense()?;
            psi = expm_hermitian(&h, t) * psi;
        }
        worst = worst.max(blockaded_population(&psi));
    }
    Ok(worst)
}

/// `|<0 1 ... 1 0| exp(-i π/2 H_ZXZ) |0...0>|`.
pub fn zxz_edge_flip_amplitude(n: usize) -> Result<f64> {
    let u = expm_hermitian(&zxz_hamiltonian(n, 1.0)?.to_dense()?, PI / 2.0);
    let target = ((1usize << (n - 1)) - 1) & !1;
    Ok(u[(target, 0)].norm())
}

fn run_blockade_nogo(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let mut rec = Recorder::new("blockade-nogo");
    let mut metrics = Vec::new();
    for n in 4..=6 {
        let worst = pxp_max_blockaded(n, cfg.pxp_schedules, cfg.seed + n as u64)?;
        let amp = zxz_edge_flip_amplitude(n)?;
        rec.check(Expectation::new(format!("n{n} PXP blockaded population"), Comparator::Lt, 1e-10, Provenance::Published), worst);
        rec.check(Expectation::new(format!("n{n} ZXZ edge-flip amplitude"), Comparator::Gt, 1.0 - 1e-8, Provenance::Published), amp);
        metrics.push(json!({"n": n, "pxp_max_blockaded": worst, "zxz_amplitude": amp}));
    }
    Ok(rec.finish(json!({"schedules": cfg.pxp_schedules, "seed": cfg.seed, "segments": 8}), Value::Array(metrics), vec![]))
}

pub const EDGE_TAUS: [f64; 8] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];

/// Observables of `exp(-i τ H_ZXZ)|0...0>` for every `τ`.
pub fn zxz_edge_observables(n: usize, taus: &[f64]) -> Result<Vec<(f64, Observables)>> {
    let h = zxz_hamiltonian(n, 1.0)?.to_dense()?;
    let psi0 = ground_state(1 << n);
    taus.iter().map(|&t| Ok((t, observables_from_state(&(expm_hermitian(&h, t) * &psi0))?))).collect()
}

fn run_edge_dynamics(_cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let mut rec = Recorder::new("edge-dynamics");
    let n = 8;
    let recs = zxz_edge_observables(n, &EDGE_TAUS)?;
    let (mut z1, mut zn, mut zz) = (0.0f64, 0.0f64, 0.0f64);
    for (_, o) in &recs {
        z1 = z1.max((o.z[0] - 1.0).abs());
        zn = zn.max((o.z[n - 1] - 1.0).abs());
        zz = zz.max((o.zz[0][n - 1] - 1.0).abs());
    }
    let last = &recs.last().expect("taus are non-empty").1;
    let bulk = (1..n - 1).map(|i| (1.0 - last.z[i]).abs()).fold(0.0, f64::max);
    rec.check(Expectation::new("max |<Z1> - 1|", Comparator::Lt, 1e-10, Provenance::Trivial), z1);
    rec.check(Expectation::new("max |<Z8> - 1|", Comparator::Lt, 1e-10, Provenance::Trivial), zn);
    rec.check(Expectation::new("max |<Z1 Z8> - 1|", Comparator::Lt, 1e-10, Provenance::Trivial), zz);
    rec.check(Expectation::new("max bulk |<Zi> - 1| at 0.8", Comparator::Gt, 0.1, Provenance::Derived), bulk);
    Ok(rec.finish(
        json!({"n": n, "taus": EDGE_TAUS, "initial": "all ground"}),
        json!({"bulk_deviation_at_0.8": bulk}),
        vec![
            ("edge_observables.csv".into(), trajectory_csv(&recs)?),
            ("edge_correlations.json".into(), crate::propagation::correlation_json(&recs)? + "\n"),
        ],
    ))
}

fn chain3_model() -> Result<ControlModel> {
    ControlModel::new(RydbergSystem::new(AtomGeometry::chain(3, CHAIN_SPACING_UM)?)?, DEFAULT_SUBSTEPS)
}

pub const GRAPE_SMOOTHNESS: [f64; 3] = [1e-6, 1e-7, 1e-8];

fn run_pulse_comparison(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let mut rec = Recorder::new("pulse-comparison");
    let model = chain3_model()?;
    let target = zxz_target(3, 0.8)?;
    let seeds: Vec<u64> = (0..cfg.direct_seeds as u64).collect();
    let mut files = Vec::new();
    let mut direct = Vec::new();
    let mut rows = Vec::new();
    for (duration, floor) in [(1.2, 0.85), (3.6, 0.90)] {
        let opts = DirectOptions { duration, profile: cfg.profile.clone(), ..Default::default() };
        let runs = direct_multistart(&model, &target, &opts, &seeds)?;
        let reports: Vec<_> = runs.iter().map(|r| r.2.clone()).collect();
        let best = best_index(&reports).map_or(0.0, |i| reports[i].final_fidelity);
        for r in &reports {
            rows.push(vec!["direct".into(), duration.to_string(), r.seed.to_string(), r.final_fidelity.to_string(), r.pulse_valid.to_string()]);
        }
        if let Some(i) = best_index(&reports) {
            files.push((format!("direct_T{duration}.csv"), runs[i].0.to_csv_string()?));
        }
        rec.check(Expectation::new(format!("direct best fidelity T={duration}"), Comparator::Ge, floor, Provenance::Published), best);
        direct.push((duration, best));
    }
    let problem = GrapeProblem::new(model, target, cfg.profile.clone(), 1.25, 26, 50, cfg.seed)?;
    let gopts = GrapeOptions { iterations: cfg.grape_iterations, ..Default::default() };
    let gseeds: Vec<u64> = (0..cfg.grape_seeds as u64).collect();
    let mut grape = Vec::new();
    for r in GRAPE_SMOOTHNESS {
        let study = grape_study(&problem, r, &gopts, &gseeds)?;
        for rep in &study.reports {
            rows.push(vec!["grape".into(), format!("{r:e}"), rep.seed.to_string(), rep.final_fidelity.to_string(), rep.pulse_valid.to_string()]);
        }
        rec.check(
            Expectation::new(format!("GRAPE median at r={r:e} below direct best"), Comparator::Lt, direct[0].1, Provenance::Published),
            study.median,
        );
        grape.push(json!({"r": r, "median": study.median, "best": study.best, "roughness_mhz": study.roughness}));
    }
    files.push(("fidelities.csv".into(), csv_string(&["method", "setting", "seed", "fidelity", "valid"], rows)?));
    Ok(rec.finish(
        json!({
            "atoms": 3, "spacing_um": CHAIN_SPACING_UM, "tau": 0.8, "profile": cfg.profile,
            "direct_seeds": cfg.direct_seeds, "grape_seeds": cfg.grape_seeds,
            "grape_iterations": cfg.grape_iterations, "grape_duration_us": 1.25, "grape_knots": 26,
        }),
        json!({"direct": direct.iter().map(|(t, f)| json!({"duration_us": t, "best": f})).collect::<Vec<_>>(), "grape": grape}),
        files,
    ))
}

pub const SWEEP_TAUS: [f64; 7] = [0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];

fn run_tau_sweep(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let mut rec = Recorder::new("tau-sweep");
    let model = chain3_model()?;
    let opts = DirectOptions { duration: 1.2, profile: cfg.profile.clone(), ..Default::default() };
    let seeds: Vec<u64> = (0..cfg.direct_seeds as u64).collect();
    let runs = direct_multistart(&model, &zxz_target(3, 0.8)?, &opts, &seeds)?;
    let reports: Vec<_> = runs.iter().map(|r| r.2.clone()).collect();
    let i = best_index(&reports).ok_or_else(|| Error::ScenarioFailed {
        name: "tau-sweep".into(),
        reason: "no valid base pulse".into(),
    })?;
    let (base_pulse, base_traj, base_rep) = &runs[i];
    let sweep = tau_sweep(&model, &SWEEP_TAUS, base_traj, &opts)?;
    let mut files = vec![("pulse_tau0.8.csv".to_string(), base_pulse.to_csv_string()?)];
    let mut summary = vec![json!({"tau": 0.8, "fidelity": base_rep.final_fidelity, "valid": base_rep.pulse_valid})];
    let mut valid = base_rep.pulse_valid as usize;
    for e in &sweep {
        files.push((format!("pulse_tau{:.1}.csv", e.tau), e.pulse.to_csv_string()?));
        summary.push(json!({"tau": e.tau, "fidelity": e.report.final_fidelity, "valid": e.report.pulse_valid, "converged": e.report.converged}));
        valid += e.report.pulse_valid as usize;
    }
    rec.check(Expectation::near("constraint-valid pulses", 8.0, 0.0, Provenance::Published), valid as f64);
    Ok(rec.finish(
        json!({"taus": [0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1], "duration_us": 1.2, "seeds": cfg.direct_seeds, "profile": cfg.profile}),
        Value::Array(summary),
        files,
    ))
}

/// A 3.6 µs direct-method pulse for the 3-atom ZXZ target at 0.8.
pub const LONG_PULSE_CSV: &str = include_str!("../data/long_pulse.csv");

pub fn long_pulse() -> Result<ControlPulse> {
    ControlPulse::from_csv_str(LONG_PULSE_CSV)
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityTrace {
    pub t: Vec<f64>,
    /// `1 - <n_i>` per record time, noiseless.
    pub ideal: Vec<Vec<f64>>,
    /// Same under the noise model.
    pub noisy: Vec<Vec<f64>>,
}

/// Ground-state populations of each atom along `pulse`, with and without noise.
pub fn density_traces(pulse: &ControlPulse, sys: &RydbergSystem, noise: &NoiseModel, step: f64) -> Result<DensityTrace> {
    let n_rec = (pulse.duration() / step).round() as usize;
    let times: Vec<f64> = (0..=n_rec).map(|k| k as f64 * step).collect();
    let opts = LindbladOptions { record_times: times.clone(), force: true, ..Default::default() };
    let noisy_states = propagate_lindblad(pulse, sys, noise, &opts)?;
    let ideal_states = propagate_lindblad(pulse, sys, &NoiseModel::ideal(), &opts)?;
    let pick = |states: &[crate::propagation::DensityState]| -> Result<Vec<Vec<f64>>> {
        times
            .iter()
            .map(|&t| {
                let s = states
                    .iter()
                    .min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs()))
                    .expect("records exist");
                Ok(observables_from_density(&s.rho)?.n.iter().map(|x| 1.0 - x).collect())
            })
            .collect()
    };
    Ok(DensityTrace { ideal: pick(&ideal_states)?, noisy: pick(&noisy_states)?, t: times })
}

/// Window length for boundary divergence means, in µs.
pub const DIVERGENCE_WINDOW_US: f64 = 0.5;

/// Windowed mean of the boundary-atom divergence `max(|Δ1|, |ΔN|)`, as
/// `(window end, mean)` pairs.
pub fn windowed_boundary_divergence(trace: &DensityTrace, window: f64) -> Vec<(f64, f64)> {
    let n = trace.ideal[0].len();
    let div: Vec<f64> = (0..trace.t.len())
        .map(|k| {
            let a = (trace.noisy[k][0] - trace.ideal[k][0]).abs();
            let b = (trace.noisy[k][n - 1] - trace.ideal[k][n - 1]).abs();
            a.max(b)
        })
        .collect();
    let total = *trace.t.last().unwrap_or(&0.0);
    let mut out = Vec::new();
    let mut start = 0.0;
    while start + window <= total + 1e-9 {
        let end = start + window;
        let vals: Vec<f64> =
            trace.t.iter().zip(&div).filter(|(t, _)| **t > start - 1e-9 && **t <= end + 1e-9).map(|(_, d)| *d).collect();
        out.push((end, vals.iter().sum::<f64>() / vals.len().max(1) as f64));
        start = end;
    }
    out
}

fn run_noise_forward(_cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let mut rec = Recorder::new("noise-forward");
    let pulse = long_pulse()?;
    let sys = RydbergSystem::new(AtomGeometry::chain(3, CHAIN_SPACING_UM)?)?;
    let noise = NoiseModel::fitted();
    let trace = density_traces(&pulse, &sys, &noise, 0.05)?;
    let windows = windowed_boundary_divergence(&trace, DIVERGENCE_WINDOW_US);
    let early = windows.iter().filter(|w| w.0 <= 1.5 + 1e-9).map(|w| w.1).fold(0.0, f64::max);
    let late = windows.iter().filter(|w| w.0 > 1.5 + 1e-9).map(|w| w.1).fold(0.0, f64::max);
    rec.check(Expectation::new("windowed boundary divergence up to 1.5 us", Comparator::Lt, 0.05, Provenance::Published), early);
    rec.check(Expectation::new("windowed boundary divergence after 1.5 us", Comparator::Gt, 0.05, Provenance::Published), late);

    let ideal = propagate_unitary(&pulse, &sys, &PropagateOptions::forced().with_substeps(40))?;
    let final_ideal = observables_from_state(&(ideal * ground_state(sys.dim())))?;
    let k = trace.t.len() - 1;
    let drift = (0..3).map(|i| (1.0 - final_ideal.n[i] - trace.ideal[k][i]).abs()).fold(0.0, f64::max);
    rec.check(Expectation::new("noiseless master equation vs unitary at T", Comparator::Lt, 1e-4, Provenance::Trivial), drift);

    let rows = trace.t.iter().enumerate().flat_map(|(k, t)| {
        let tr = &trace;
        (0..3).map(move |i| vec![format!("{t:.4}"), (i + 1).to_string(), tr.ideal[k][i].to_string(), tr.noisy[k][i].to_string()])
    });
    let csv = csv_string(&["t_us", "site", "ground_ideal", "ground_noisy"], rows)?;
    let wcsv = csv_string(&["window_end_us", "mean_boundary_divergence"], windows.iter().map(|w| vec![format!("{:.2}", w.0), w.1.to_string()]))?;
    Ok(rec.finish(
        json!({"noise": noise, "pulse_duration_us": pulse.duration(), "window_us": DIVERGENCE_WINDOW_US, "record_step_us": 0.05}),
        json!({"max_early_window": early, "max_late_window": late}),
        vec![("densities.csv".into(), csv), ("divergence_windows.csv".into(), wcsv)],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expectations_need_provenance() {
        let ok = r#"{"metric":"m","comparator":"lt","value":1.0,"provenance":"derived"}"#;
        assert!(serde_json::from_str::<Expectation>(ok).is_ok());
        let bad = r#"{"metric":"m","comparator":"lt","value":1.0}"#;
        assert!(serde_json::from_str::<Expectation>(bad).is_err());
        let e = Expectation::near("x", 1.0, 0.1, Provenance::Trivial);
        assert!(e.holds(1.05) && !e.holds(1.2));
    }

    #[test]
    fn registry_names_are_unique() {
        let names: BTreeSet<&str> = list().iter().map(|s| s.name).collect();
        assert_eq!(names.len(), list().len());
        assert!(run("no-such-scenario", &ScenarioConfig::default()).is_err());
    }

    #[test]
    fn blockade_scenario_passes_and_is_reproducible() {
        let cfg = ScenarioConfig { pxp_schedules: 3, ..Default::default() };
        let a = run("blockade-nogo", &cfg).unwrap();
        assert!(a.report.passed, "{}", a.report);
        let b = run("blockade-nogo", &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a.report).unwrap(), serde_json::to_string(&b.report).unwrap());
    }

    #[test]
    fn persisted_directory_layout() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_and_persist("edge-dynamics", &ScenarioConfig::default(), dir.path()).unwrap();
        assert!(out.report.passed, "{}", out.report);
        for f in ["inputs.json", "report.json", "edge_observables.csv", "edge_correlations.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }

    #[test]
    fn random_sets_are_seeded() {
        let a = random_generator_sets(5, 4, 1).unwrap();
        let b = random_generator_sets(5, 4, 1).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.label(), y.label());
        }
    }
}
