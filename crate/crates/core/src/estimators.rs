//! Log-determinant estimators: the rational-function family, stochastic
//! Lanczos quadrature, and the exact Cholesky reference.
//!
//! Both stochastic estimators split `log det M = log det P + tr log(M P⁻¹)`
//! and estimate the trace with probe vectors, one Lanczos factorization of
//! `M P⁻¹` per probe. They differ only in how `log` is applied to the
//! tridiagonal matrix: the rational family solves shifted systems at the
//! poles of `r_k`, quadrature eigendecomposes `T`.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lanczos::{
    lanczos_many, multishift_solve, LanczosFactorization, PreconditionedOperator, SplitPreconditionedOperator,
};
use crate::linalg::{cholesky_logdet, dot, tridiag_eigen, DenseSymMatrix};
use crate::precond::{build_preconditioner, Preconditioner, PreconditionerConfig};
use crate::probes::{make_probes, ProbeKind, DEFAULT_PROBES};
use crate::rational::{partial_fraction, RationalPartialFraction};
use crate::rng::Rng;

pub const DEFAULT_LANCZOS_ITERS: usize = 20;

/// Ritz values at or below zero are replaced by this before taking logs.
pub const RITZ_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    R1,
    #[default]
    R3,
    R5,
    Slq,
    #[serde(rename = "exact")]
    CholeskyExact,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::R1,
        Algorithm::R3,
        Algorithm::R5,
        Algorithm::Slq,
        Algorithm::CholeskyExact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::R1 => "r1",
            Algorithm::R3 => "r3",
            Algorithm::R5 => "r5",
            Algorithm::Slq => "slq",
            Algorithm::CholeskyExact => "exact",
        }
    }

    /// Order of the rational approximation, for the r* family.
    pub fn rational_order(self) -> Option<usize> {
        match self {
            Algorithm::R1 => Some(1),
            Algorithm::R3 => Some(3),
            Algorithm::R5 => Some(5),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm `{s}`")))
    }
}

/// Which form of the preconditioned operator Lanczos runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LanczosOperator {
    /// `L⁻¹ M L⁻ᵗ` with `P = L Lᵗ`: symmetric and similar to `M P⁻¹`.
    #[default]
    Split,
    /// `M P⁻¹` itself, fed to the symmetric recurrence as is.
    Plain,
}

impl LanczosOperator {
    pub const ALL: [LanczosOperator; 2] = [LanczosOperator::Split, LanczosOperator::Plain];

    pub fn name(self) -> &'static str {
        match self {
            LanczosOperator::Split => "split",
            LanczosOperator::Plain => "plain",
        }
    }
}

impl fmt::Display for LanczosOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LanczosOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown Lanczos operator `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub algorithm: Algorithm,
    /// Number of probe vectors `s`.
    pub probes: usize,
    /// Lanczos iterations `t`; capped at the matrix dimension.
    pub lanczos_iters: usize,
    pub probe_kind: ProbeKind,
    pub precond: PreconditionerConfig,
    pub operator: LanczosOperator,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            algorithm: Algorithm::R3,
            probes: DEFAULT_PROBES,
            lanczos_iters: DEFAULT_LANCZOS_ITERS,
            probe_kind: ProbeKind::Rademacher,
            precond: PreconditionerConfig::default(),
            operator: LanczosOperator::Split,
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn with_algorithm(algorithm: Algorithm) -> Self {
        EstimatorConfig {
            algorithm,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.probes == 0 {
            return Err(Error::invalid("need at least one probe vector"));
        }
        if self.lanczos_iters == 0 {
            return Err(Error::invalid("need at least one Lanczos iteration"));
        }
        self.precond.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogDetEstimate {
    pub value: f64,
    pub logdet_precond: f64,
    pub trace_term: f64,
    /// One trace sample per probe, in probe order.
    pub per_probe: Vec<f64>,
    pub wall_time: Duration,
    /// Ritz values clamped to [`RITZ_FLOOR`] (quadrature only).
    pub clamped_ritz: usize,
}

impl LogDetEstimate {
    /// Unbiased sample variance of the per-probe trace samples.
    pub fn probe_variance(&self) -> Option<f64> {
        let s = self.per_probe.len();
        if s < 2 {
            return None;
        }
        let mean = self.per_probe.iter().sum::<f64>() / s as f64;
        Some(self.per_probe.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (s - 1) as f64)
    }
}

/// Runs whichever estimator `cfg.algorithm` names.
pub fn estimate(m: &DenseSymMatrix, cfg: &EstimatorConfig) -> Result<LogDetEstimate> {
    match cfg.algorithm {
        Algorithm::R1 | Algorithm::R3 | Algorithm::R5 => rstar_logdet(m, cfg),
        Algorithm::Slq => slq_logdet(m, cfg),
        Algorithm::CholeskyExact => exact_logdet(m),
    }
}

struct Factorized {
    precond: Preconditioner,
    probes: Vec<Vec<f64>>,
    factorizations: Vec<LanczosFactorization>,
}

fn factorize(m: &DenseSymMatrix, cfg: &EstimatorConfig) -> Result<Factorized> {
    cfg.validate()?;
    let n = m.n();
    let rng = Rng::new(cfg.seed);
    let precond = build_preconditioner(m, &cfg.precond, &mut rng.child(0))
        .map_err(|e| e.context(format!("building {} preconditioner", cfg.precond.kind)))?;
    let probes = make_probes(cfg.probe_kind, cfg.probes, n, &mut rng.child(1))?.into_vectors();
    let t = cfg.lanczos_iters.min(n);
    let factorizations = match cfg.operator {
        LanczosOperator::Split => lanczos_many(&SplitPreconditionedOperator::new(m, &precond)?, &probes, t)?,
        LanczosOperator::Plain => lanczos_many(&PreconditionedOperator::new(m, &precond)?, &probes, t)?,
    };
    Ok(Factorized {
        precond,
        probes,
        factorizations,
    })
}

fn finish(logdet_precond: f64, per_probe: Vec<f64>, started: Instant, clamped_ritz: usize) -> LogDetEstimate {
    // sequential sum in probe order keeps the result independent of scheduling
    let trace_term = per_probe.iter().sum::<f64>() / per_probe.len() as f64;
    LogDetEstimate {
        value: logdet_precond + trace_term,
        logdet_precond,
        trace_term,
        per_probe,
        wall_time: started.elapsed(),
        clamped_ritz,
    }
}

/// Trace sample `vᵗ (b v + Σ_j c_j Qᵗ w_j)` for one probe.
fn rational_probe_value(
    pf: &RationalPartialFraction,
    v: &[f64],
    f: &LanczosFactorization,
) -> Result<f64> {
    let ws = multishift_solve(f, &pf.shifts())?;
    let mut acc = pf.offset() * dot(v, v);
    for (c, w) in pf.residues().iter().zip(&ws) {
        acc += c * dot(v, &f.lift(w));
    }
    Ok(acc)
}

/// Rational-function estimator of order 1, 3 or 5.
pub fn rstar_logdet(m: &DenseSymMatrix, cfg: &EstimatorConfig) -> Result<LogDetEstimate> {
    let order = cfg
        .algorithm
        .rational_order()
        .ok_or_else(|| Error::invalid(format!("{} is not a rational estimator", cfg.algorithm)))?;
    let started = Instant::now();
    let pf = partial_fraction(order)?;
    let fz = factorize(m, cfg)?;
    let per_probe = fz
        .probes
        .iter()
        .zip(&fz.factorizations)
        .map(|(v, f)| rational_probe_value(&pf, v, f))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.context("multi-shift solve"))?;
    Ok(finish(fz.precond.log_det(), per_probe, started, 0))
}

/// Stochastic Lanczos quadrature with the same preconditioner and probes.
pub fn slq_logdet(m: &DenseSymMatrix, cfg: &EstimatorConfig) -> Result<LogDetEstimate> {
    if cfg.algorithm != Algorithm::Slq {
        return Err(Error::invalid(format!("{} is not quadrature", cfg.algorithm)));
    }
    let started = Instant::now();
    let fz = factorize(m, cfg)?;
    let mut clamped = 0;
    let per_probe = fz
        .probes
        .iter()
        .zip(&fz.factorizations)
        .map(|(v, f)| {
            let eig = tridiag_eigen(f.tridiag());
            let quad: f64 = eig
                .values
                .iter()
                .zip(&eig.vectors)
                .map(|(&theta, y)| {
                    let theta = if theta > 0.0 {
                        theta
                    } else {
                        clamped += 1;
                        RITZ_FLOOR
                    };
                    y[0] * y[0] * theta.ln()
                })
                .sum();
            dot(v, v) * quad
        })
        .collect();
    Ok(finish(fz.precond.log_det(), per_probe, started, clamped))
}

/// Exact `log det M` by Cholesky.
pub fn exact_logdet(m: &DenseSymMatrix) -> Result<LogDetEstimate> {
    let started = Instant::now();
    let value = cholesky_logdet(m)?;
    Ok(LogDetEstimate {
        value,
        logdet_precond: value,
        trace_term: 0.0,
        per_probe: Vec::new(),
        wall_time: started.elapsed(),
        clamped_ritz: 0,
    })
}
