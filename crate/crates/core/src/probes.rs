//! Probe vectors for Hutchinson trace estimation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::orthonormalize;
use crate::rng::Rng;

pub const DEFAULT_PROBES: usize = 35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    #[default]
    Rademacher,
    Gaussian,
    NormalOrthogonal,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 3] = [ProbeKind::Rademacher, ProbeKind::Gaussian, ProbeKind::NormalOrthogonal];

    pub fn name(self) -> &'static str {
        match self {
            ProbeKind::Rademacher => "rademacher",
            ProbeKind::Gaussian => "gaussian",
            ProbeKind::NormalOrthogonal => "normal-orthogonal",
        }
    }
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProbeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown probe kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeBatch {
    kind: ProbeKind,
    n: usize,
    vectors: Vec<Vec<f64>>,
}

impl ProbeBatch {
    pub fn kind(&self) -> ProbeKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn into_vectors(self) -> Vec<Vec<f64>> {
        self.vectors
    }
}

/// Draws `s` probes of length `n`.
///
/// Normal-orthogonal probes come in blocks of at most `n` mutually
/// orthogonal vectors; each is a random orthonormal direction scaled by an
/// independent χ(n) radius, so its marginal law is standard normal.
pub fn make_probes(kind: ProbeKind, s: usize, n: usize, rng: &mut Rng) -> Result<ProbeBatch> {
    if s == 0 || n == 0 {
        return Err(Error::invalid("probe batch needs s >= 1 and n >= 1"));
    }
    let vectors = match kind {
        ProbeKind::Rademacher => (0..s).map(|_| (0..n).map(|_| rng.sign()).collect()).collect(),
        ProbeKind::Gaussian => (0..s).map(|_| rng.normal_vec(n)).collect(),
        ProbeKind::NormalOrthogonal => {
            let mut out = Vec::with_capacity(s);
            while out.len() < s {
                let block = (s - out.len()).min(n);
                out.extend(orthogonal_block(block, n, rng)?);
            }
            out
        }
    };
    Ok(ProbeBatch { kind, n, vectors })
}

fn orthogonal_block(block: usize, n: usize, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    let mut attempts = 0;
    let mut q = loop {
        let g: Vec<Vec<f64>> = (0..block).map(|_| rng.normal_vec(n)).collect();
        match orthonormalize(&g) {
            Ok(q) => break q,
            Err(Error::RankDeficient { .. }) if attempts < 3 => attempts += 1,
            Err(e) => return Err(e),
        }
    };
    for row in &mut q {
        let radius = chi(n, rng);
        row.iter_mut().for_each(|x| *x *= radius);
    }
    Ok(q)
}

/// χ-distributed draw with `dof` degrees of freedom.
fn chi(dof: usize, rng: &mut Rng) -> f64 {
    (0..dof).map(|_| rng.normal().powi(2)).sum::<f64>().sqrt()
}
