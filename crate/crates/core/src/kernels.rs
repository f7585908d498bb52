//! Gaussian-process covariance matrices over normally distributed index points.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseSymMatrix;
use crate::rng::Rng;

/// Default diagonal regularizer added to every covariance matrix.
pub const DEFAULT_JITTER: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Rbf,
    Matern52,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Rbf => "rbf",
            KernelFamily::Matern52 => "matern52",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rbf" => Ok(KernelFamily::Rbf),
            "matern52" => Ok(KernelFamily::Matern52),
            _ => Err(Error::invalid(format!("unknown kernel family `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub amplitude: f64,
    pub length_scale: f64,
    pub jitter: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, amplitude: f64, length_scale: f64, jitter: f64) -> Result<Self> {
        if !(amplitude > 0.0) || !(length_scale > 0.0) || !(jitter >= 0.0) {
            return Err(Error::invalid(format!(
                "kernel needs amplitude > 0, length_scale > 0, jitter >= 0 \
                 (got {amplitude}, {length_scale}, {jitter})"
            )));
        }
        Ok(KernelSpec {
            family,
            amplitude,
            length_scale,
            jitter,
        })
    }

    /// Unit amplitude and length scale with the given jitter.
    pub fn unit(family: KernelFamily, jitter: f64) -> Result<Self> {
        Self::new(family, 1.0, 1.0, jitter)
    }

    #[inline]
    fn value_at_sq_distance(&self, r2: f64) -> f64 {
        let a2 = self.amplitude * self.amplitude;
        let l = self.length_scale;
        match self.family {
            KernelFamily::Rbf => a2 * (-r2 / (2.0 * l * l)).exp(),
            KernelFamily::Matern52 => {
                let s = 5.0f64.sqrt() * r2.sqrt() / l;
                a2 * (1.0 + s + s * s / 3.0) * (-s).exp()
            }
        }
    }
}

/// `n` points in `d` dimensions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexPoints {
    n: usize,
    d: usize,
    points: Vec<f64>,
}

impl IndexPoints {
    pub fn from_flat(n: usize, d: usize, points: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::invalid("index points need n >= 1 and d >= 1"));
        }
        if points.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: points.len(),
            });
        }
        Ok(IndexPoints { n, d, points })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.points
    }
}

/// Draws `n * d` independent standard normals.
pub fn sample_index_points(n: usize, d: usize, rng: &mut Rng) -> Result<IndexPoints> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("index points need n >= 1 and d >= 1"));
    }
    IndexPoints::from_flat(n, d, rng.normal_vec(n * d))
}

/// Kernel between two points, without jitter.
pub fn kernel_value(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(spec.value_at_sq_distance(sq_dist(x, y)))
}

#[inline]
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn build_covariance(spec: &KernelSpec, pts: &IndexPoints) -> DenseSymMatrix {
    DenseSymMatrix::from_fn(pts.n(), |i, j| {
        let k = spec.value_at_sq_distance(sq_dist(pts.point(i), pts.point(j)));
        if i == j {
            k + spec.jitter
        } else {
            k
        }
    })
}
