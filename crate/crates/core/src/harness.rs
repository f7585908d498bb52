//! Seeded experiment harness: single runs, parameter sweeps, record
//! emission and the built-in self-check report.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate, Algorithm, EstimatorConfig, LanczosOperator};
use crate::kernels::{build_covariance, sample_index_points, KernelFamily, KernelSpec, DEFAULT_JITTER};
use crate::lanczos::{lanczos, multishift_solve};
use crate::linalg::{cholesky, cholesky_logdet, norm2, DenseSymMatrix};
use crate::precond::{build_preconditioner, PreconditionerConfig, PreconditionerKind};
use crate::probes::ProbeKind;
use crate::rational::{
    closed_form, derive_partial_fraction, eval_closed, eval_partial, partial_fraction,
    RationalPartialFraction,
};
use crate::rng::Rng;

pub const DEFAULT_EXACT_CUTOFF: usize = 5000;
pub const DEFAULT_TRIALS: usize = 20;

/// Everything needed to reproduce one measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub kernel: KernelFamily,
    pub n: usize,
    pub d: usize,
    pub jitter: f64,
    /// `estimator.seed` is the trial seed; matrix and estimator streams are
    /// split from it.
    pub estimator: EstimatorConfig,
    /// Largest `n` for which the Cholesky reference is computed.
    pub exact_cutoff: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kernel: KernelFamily::Matern52,
            n: 1000,
            d: 5,
            jitter: DEFAULT_JITTER,
            estimator: EstimatorConfig::default(),
            exact_cutoff: DEFAULT_EXACT_CUTOFF,
        }
    }
}

impl RunConfig {
    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        KernelSpec::unit(self.kernel, self.jitter)
    }

    /// Sets the jitter and the matching scaled-preconditioner constant.
    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.jitter = jitter;
        self.estimator.precond.scale = jitter;
        self
    }

    fn matrix_seed(&self) -> u64 {
        Rng::new(self.estimator.seed).child(0).seed()
    }

    fn estimator_seed(&self) -> u64 {
        Rng::new(self.estimator.seed).child(1).seed()
    }

    /// The covariance matrix this configuration's trial seed produces.
    pub fn build_matrix(&self) -> Result<DenseSymMatrix> {
        let spec = self.kernel_spec()?;
        let pts = sample_index_points(self.n, self.d, &mut Rng::new(self.matrix_seed()))?;
        Ok(build_covariance(&spec, &pts))
    }
}

/// One measurement row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub kernel_family: KernelFamily,
    pub n: usize,
    pub d: usize,
    pub jitter: f64,
    pub algorithm: Algorithm,
    pub probe_kind: ProbeKind,
    pub s: usize,
    pub t: usize,
    pub precond_kind: PreconditionerKind,
    pub precond_rank: usize,
    pub precond_iters: usize,
    pub precond_scale: f64,
    pub lanczos_operator: LanczosOperator,
    pub seed: u64,
    pub estimate: f64,
    pub exact: Option<f64>,
    pub abs_error: Option<f64>,
    pub wall_time_ms: f64,
    pub error: Option<String>,
}

pub const RECORD_FIELDS: [&str; 19] = [
    "kernel_family",
    "n",
    "d",
    "jitter",
    "algorithm",
    "probe_kind",
    "s",
    "t",
    "precond_kind",
    "precond_rank",
    "precond_iters",
    "precond_scale",
    "lanczos_operator",
    "seed",
    "estimate",
    "exact",
    "abs_error",
    "wall_time_ms",
    "error",
];

/// 17 significant digits, enough to round-trip any `f64`.
fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

impl BenchRecord {
    fn blank(cfg: &RunConfig, algorithm: Algorithm) -> Self {
        let e = &cfg.estimator;
        BenchRecord {
            kernel_family: cfg.kernel,
            n: cfg.n,
            d: cfg.d,
            jitter: cfg.jitter,
            algorithm,
            probe_kind: e.probe_kind,
            s: e.probes,
            t: e.lanczos_iters,
            precond_kind: e.precond.kind,
            precond_rank: e.precond.rank,
            precond_iters: e.precond.num_iters,
            precond_scale: e.precond.scale,
            lanczos_operator: e.operator,
            seed: e.seed,
            estimate: f64::NAN,
            exact: None,
            abs_error: None,
            wall_time_ms: 0.0,
            error: None,
        }
    }

    fn csv_fields(&self) -> [String; 19] {
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        [
            self.kernel_family.to_string(),
            self.n.to_string(),
            self.d.to_string(),
            fmt_f64(self.jitter),
            self.algorithm.to_string(),
            self.probe_kind.to_string(),
            self.s.to_string(),
            self.t.to_string(),
            self.precond_kind.to_string(),
            self.precond_rank.to_string(),
            self.precond_iters.to_string(),
            fmt_f64(self.precond_scale),
            self.lanczos_operator.to_string(),
            self.seed.to_string(),
            fmt_f64(self.estimate),
            opt(self.exact),
            opt(self.abs_error),
            fmt_f64(self.wall_time_ms),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

/// Builds the matrix for one trial and runs each algorithm on it.
///
/// The Cholesky reference is computed once and shared. Estimator failures
/// are reported in the record's `error` field.
pub fn run_trial(cfg: &RunConfig, algorithms: &[Algorithm]) -> Vec<BenchRecord> {
    let m = match cfg.build_matrix() {
        Ok(m) => m,
        Err(e) => {
            return algorithms
                .iter()
                .map(|&a| BenchRecord {
                    error: Some(e.to_string()),
                    ..BenchRecord::blank(cfg, a)
                })
                .collect()
        }
    };
    let exact = if cfg.n <= cfg.exact_cutoff {
        cholesky_logdet(&m).ok()
    } else {
        None
    };
    algorithms
        .iter()
        .map(|&algorithm| {
            let mut rec = BenchRecord::blank(cfg, algorithm);
            let est_cfg = EstimatorConfig {
                algorithm,
                seed: cfg.estimator_seed(),
                ..cfg.estimator
            };
            let started = Instant::now();
            let result = estimate(&m, &est_cfg).map(|e| e.value);
            rec.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
            match result {
                Ok(v) => {
                    rec.estimate = v;
                    rec.exact = exact;
                    rec.abs_error = exact.map(|x| (v - x).abs());
                }
                Err(e) => rec.error = Some(e.to_string()),
            }
            rec
        })
        .collect()
}

pub fn run_single(cfg: &RunConfig) -> BenchRecord {
    run_trial(cfg, &[cfg.estimator.algorithm])
        .pop()
        .expect("one algorithm requested")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    N,
    D,
    PrecondRank,
    PrecondIters,
    Probes,
    LanczosIters,
    ProbeKind,
    Precond,
}

impl SweepParam {
    pub const ALL: [SweepParam; 8] = [
        SweepParam::N,
        SweepParam::D,
        SweepParam::PrecondRank,
        SweepParam::PrecondIters,
        SweepParam::Probes,
        SweepParam::LanczosIters,
        SweepParam::ProbeKind,
        SweepParam::Precond,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::N => "n",
            SweepParam::D => "d",
            SweepParam::PrecondRank => "precond-rank",
            SweepParam::PrecondIters => "precond-iters",
            SweepParam::Probes => "probes",
            SweepParam::LanczosIters => "lanczos-iters",
            SweepParam::ProbeKind => "probe-kind",
            SweepParam::Precond => "precond",
        }
    }

    /// Applies one swept value to a base configuration.
    pub fn apply(self, base: &RunConfig, value: &str) -> Result<RunConfig> {
        let mut cfg = *base;
        let count = || {
            value
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("`{value}` is not a count for sweep {}", self.name())))
        };
        match self {
            SweepParam::N => cfg.n = count()?,
            SweepParam::D => cfg.d = count()?,
            SweepParam::PrecondRank => cfg.estimator.precond.rank = count()?,
            SweepParam::PrecondIters => cfg.estimator.precond.num_iters = count()?,
            SweepParam::Probes => cfg.estimator.probes = count()?,
            SweepParam::LanczosIters => cfg.estimator.lanczos_iters = count()?,
            SweepParam::ProbeKind => cfg.estimator.probe_kind = value.parse()?,
            SweepParam::Precond => cfg.estimator.precond.kind = value.parse()?,
        }
        Ok(cfg)
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown sweep parameter `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<String>,
    pub base: RunConfig,
    pub algorithms: Vec<Algorithm>,
    pub trials: usize,
    pub seed_base: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("sweep needs at least one value"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("sweep needs at least one trial"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid("sweep needs at least one algorithm"));
        }
        for v in &self.values {
            self.param.apply(&self.base, v)?;
        }
        Ok(())
    }

    /// Seed of trial `trial` at value index `value`; shared by all algorithms.
    pub fn trial_seed(&self, value: usize, trial: usize) -> u64 {
        Rng::new(self.seed_base)
            .child(value as u64)
            .child(trial as u64)
            .seed()
    }

    fn tasks(&self) -> Result<Vec<RunConfig>> {
        let mut out = Vec::with_capacity(self.values.len() * self.trials);
        for (vi, v) in self.values.iter().enumerate() {
            let cfg = self.param.apply(&self.base, v)?;
            for ti in 0..self.trials {
                let mut c = cfg;
                c.estimator.seed = self.trial_seed(vi, ti);
                out.push(c);
            }
        }
        Ok(out)
    }
}

/// Runs every (value, trial) pair, `jobs` trials at a time.
///
/// Records reach `sink` in (value, trial, algorithm) order regardless of
/// how trials are scheduled.
pub fn run_sweep(
    spec: &SweepSpec,
    jobs: usize,
    mut sink: impl FnMut(&BenchRecord) -> Result<()>,
) -> Result<Vec<BenchRecord>> {
    spec.validate()?;
    let jobs = jobs.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let tasks = spec.tasks()?;
    let mut all = Vec::with_capacity(tasks.len() * spec.algorithms.len());
    for chunk in tasks.chunks(jobs) {
        let batch: Vec<Vec<BenchRecord>> =
            pool.install(|| chunk.par_iter().map(|c| run_trial(c, &spec.algorithms)).collect());
        for rec in batch.into_iter().flatten() {
            sink(&rec)?;
            all.push(rec);
        }
    }
    Ok(all)
}

/// Streams records to a CSV file as they arrive.
pub struct CsvSink {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvSink {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|cause| Error::Io {
            path: path.clone(),
            cause,
        })?;
        let mut writer = csv::Writer::from_writer(BufWriter::new(file));
        writer.write_record(RECORD_FIELDS).map_err(|cause| Error::Csv {
            path: path.clone(),
            cause,
        })?;
        Ok(CsvSink { path, writer })
    }

    pub fn write(&mut self, rec: &BenchRecord) -> Result<()> {
        self.writer
            .write_record(rec.csv_fields())
            .and_then(|_| self.writer.flush().map_err(csv::Error::from))
            .map_err(|cause| Error::Csv {
                path: self.path.clone(),
                cause,
            })
    }
}

pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_FIELDS)?;
    for r in records {
        w.write_record(r.csv_fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[BenchRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|cause| Error::Io {
        path: path.to_path_buf(),
        cause,
    })?;
    write_csv(records, BufWriter::new(file)).map_err(|cause| Error::Csv {
        path: path.to_path_buf(),
        cause,
    })
}

pub fn emit_json(records: &[BenchRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|cause| Error::Io {
        path: path.to_path_buf(),
        cause,
    })?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, records)
        .map_err(|cause| Error::Json {
            path: path.to_path_buf(),
            cause,
        })?;
    w.flush().map_err(|cause| Error::Io {
        path: path.to_path_buf(),
        cause,
    })
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<BenchRecord>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|cause| Error::Csv {
        path: path.to_path_buf(),
        cause,
    })?;
    rdr.deserialize()
        .collect::<std::result::Result<Vec<BenchRecord>, _>>()
        .map_err(|cause| Error::Csv {
            path: path.to_path_buf(),
            cause,
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(f, "[{}] {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Compares tabulated partial fractions against ones re-derived from the
/// closed forms.
pub fn check_partial_fraction_table(table: &[RationalPartialFraction], tolerance: f64) -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut failure = None;
    for pf in table {
        let derived = match closed_form(pf.order()).and_then(|r| derive_partial_fraction(&r)) {
            Ok(d) => d,
            Err(e) => {
                failure = Some(format!("order {}: {e}", pf.order()));
                break;
            }
        };
        worst = worst.max((derived.offset() - pf.offset()).abs());
        for j in 0..pf.order() {
            worst = worst
                .max((derived.poles()[j] - pf.poles()[j]).abs())
                .max((derived.residues()[j] - pf.residues()[j]).abs());
        }
    }
    CheckResult {
        name: "partial-fraction-table",
        passed: failure.is_none() && worst <= tolerance,
        detail: failure.unwrap_or_else(|| format!("max abs deviation {worst:.3e} (tol {tolerance:.1e})")),
    }
}

fn check_antisymmetry() -> CheckResult {
    let mut rng = Rng::new(0x5eed);
    let mut worst_anti: f64 = 0.0;
    let mut worst_one: f64 = 0.0;
    for k in 1..=6 {
        let r = closed_form(k).expect("orders 1..=6 exist");
        worst_one = worst_one.max(eval_closed(&r, 1.0).expect("1 is not a pole").abs());
        for _ in 0..1000 {
            let z = 100.0 * (1.0 - rng.uniform());
            let a = eval_closed(&r, z).expect("positive z");
            let b = eval_closed(&r, 1.0 / z).expect("positive z");
            if a != 0.0 {
                worst_anti = worst_anti.max((a + b).abs() / a.abs());
            }
        }
    }
    CheckResult {
        name: "antisymmetry",
        passed: worst_anti <= 1e-12 && worst_one <= 1e-14,
        detail: format!("max rel |r(z)+r(1/z)| {worst_anti:.3e}, max |r(1)| {worst_one:.3e}"),
    }
}

fn check_partial_equivalence() -> CheckResult {
    let mut worst: f64 = 0.0;
    for k in [1, 3, 5] {
        let r = closed_form(k).expect("odd order");
        let pf = partial_fraction(k).expect("odd order");
        for i in 0..1000 {
            let z = 10f64.powf(-2.0 + 4.0 * i as f64 / 999.0);
            let a = eval_closed(&r, z).expect("positive z");
            let b = eval_partial(&pf, z).expect("positive z");
            worst = worst.max((a - b).abs() / a.abs());
        }
    }
    CheckResult {
        name: "partial-fraction-equivalence",
        passed: worst < 1e-11,
        detail: format!("max rel diff {worst:.3e}"),
    }
}

fn random_spd(n: usize, rng: &mut Rng) -> DenseSymMatrix {
    let g: Vec<Vec<f64>> = (0..n).map(|_| rng.normal_vec(n)).collect();
    DenseSymMatrix::from_fn(n, |i, j| {
        let s: f64 = (0..n).map(|k| g[i][k] * g[j][k]).sum::<f64>() / n as f64;
        if i == j {
            s + 0.1
        } else {
            s
        }
    })
}

fn check_multishift() -> CheckResult {
    let mut rng = Rng::new(0x3117);
    let pf = partial_fraction(3).expect("order 3");
    let mut worst: f64 = 0.0;
    let mut failure = None;
    for _ in 0..5 {
        let n = 20;
        let m = random_spd(n, &mut rng);
        let v = rng.normal_vec(n);
        let result = lanczos(&m, &v, n).and_then(|f| {
            let ws = multishift_solve(&f, &pf.shifts())?;
            for (alpha, w) in pf.poles().iter().zip(&ws) {
                let shifted = DenseSymMatrix::from_fn(n, |i, j| m.get(i, j) - if i == j { alpha } else { &0.0 });
                let want = cholesky(&shifted)?.solve(&v)?;
                let got = f.lift(w);
                let diff: Vec<f64> = got.iter().zip(&want).map(|(a, b)| a - b).collect();
                worst = worst.max(norm2(&diff) / norm2(&v));
            }
            Ok(())
        });
        if let Err(e) = result {
            failure = Some(e.to_string());
            break;
        }
    }
    CheckResult {
        name: "multishift-exactness",
        passed: failure.is_none() && worst <= 1e-8,
        detail: failure.unwrap_or_else(|| format!("max ‖Qᵗw − (M−αI)⁻¹v‖/‖v‖ {worst:.3e}")),
    }
}

fn check_woodbury() -> CheckResult {
    let mut rng = Rng::new(0x3009);
    let pts = sample_index_points(120, 3, &mut rng).expect("valid size");
    let m = build_covariance(&KernelSpec::unit(KernelFamily::Rbf, 1e-3).expect("valid"), &pts);
    let mut worst_inv: f64 = 0.0;
    let mut worst_det: f64 = 0.0;
    let mut failure = None;
    for kind in PreconditionerKind::ALL {
        let cfg = PreconditionerConfig {
            kind,
            rank: 10,
            scale: 1e-3,
            ..Default::default()
        };
        let result = build_preconditioner(&m, &cfg, &mut rng.child(kind as u64)).and_then(|p| {
            let dense = p.to_dense();
            let chol = cholesky(&dense)?;
            let v = rng.normal_vec(m.n());
            let got = p.apply_inverse(&v)?;
            let want = chol.solve(&v)?;
            let diff: Vec<f64> = got.iter().zip(&want).map(|(a, b)| a - b).collect();
            worst_inv = worst_inv.max(norm2(&diff) / norm2(&want));
            let ld = chol.logdet();
            worst_det = worst_det.max((p.log_det() - ld).abs() / ld.abs().max(1.0));
            Ok(())
        });
        if let Err(e) = result {
            failure = Some(format!("{kind}: {e}"));
            break;
        }
    }
    CheckResult {
        name: "woodbury-consistency",
        passed: failure.is_none() && worst_inv <= 1e-8 && worst_det <= 1e-8,
        detail: failure.unwrap_or_else(|| {
            format!("max rel inverse err {worst_inv:.3e}, max rel logdet err {worst_det:.3e}")
        }),
    }
}

/// Runs the self-checks; `tolerance` applies to the partial-fraction table.
pub fn verify(tolerance: f64) -> VerifyReport {
    let table: Vec<RationalPartialFraction> = [1, 3, 5]
        .into_iter()
        .map(|k| partial_fraction(k).expect("odd order"))
        .collect();
    VerifyReport {
        checks: vec![
            check_partial_fraction_table(&table, tolerance),
            check_antisymmetry(),
            check_partial_equivalence(),
            check_multishift(),
            check_woodbury(),
        ],
    }
}
