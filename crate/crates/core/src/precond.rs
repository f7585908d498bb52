//! Low-rank-plus-diagonal preconditioners `P = B + A Aᵗ`.
//!
//! `B` is either a positive diagonal or a positive multiple of the identity.
//! Inverses use the Woodbury identity and log-determinants the matrix
//! determinant lemma, both through a Cholesky factor of the `k × k` capacitance
//! matrix `I + Aᵗ B⁻¹ A`. Rows where `B` is negligible (the pivots of a
//! partial Cholesky factor, say) are split off and handled by a small dense
//! Schur complement, which keeps the solve accurate.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::DEFAULT_JITTER;

use crate::linalg::{
    axpy, cholesky_row_major, dot, norm2, orthonormalize, sym_eigen, CholeskyFactor, DenseSymMatrix,
    SymEigen,
};
use crate::rng::Rng;

pub const DEFAULT_RANK: usize = 25;
pub const DEFAULT_NUM_ITERS: usize = 5;
pub const DEFAULT_DIAG_FLOOR: f64 = 1e-12;

const POWER_MAX_ITERS: usize = 100;
const POWER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreconditionerKind {
    Identity,
    Diagonal,
    RankOne,
    PartialCholesky,
    PartialCholeskyScaled,
    TruncSvd,
    TruncSvdScaled,
    RandSvd,
    RandSvdScaled,
}

impl PreconditionerKind {
    pub const ALL: [PreconditionerKind; 9] = [
        PreconditionerKind::Identity,
        PreconditionerKind::Diagonal,
        PreconditionerKind::RankOne,
        PreconditionerKind::PartialCholesky,
        PreconditionerKind::PartialCholeskyScaled,
        PreconditionerKind::TruncSvd,
        PreconditionerKind::TruncSvdScaled,
        PreconditionerKind::RandSvd,
        PreconditionerKind::RandSvdScaled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PreconditionerKind::Identity => "identity",
            PreconditionerKind::Diagonal => "diagonal",
            PreconditionerKind::RankOne => "rank-one",
            PreconditionerKind::PartialCholesky => "partial-cholesky",
            PreconditionerKind::PartialCholeskyScaled => "partial-cholesky-scaled",
            PreconditionerKind::TruncSvd => "trunc-svd",
            PreconditionerKind::TruncSvdScaled => "trunc-svd-scaled",
            PreconditionerKind::RandSvd => "rand-svd",
            PreconditionerKind::RandSvdScaled => "rand-svd-scaled",
        }
    }

    /// Whether the base is `aI` rather than a diagonal correction.
    pub fn is_scaled(self) -> bool {
        matches!(
            self,
            PreconditionerKind::PartialCholeskyScaled
                | PreconditionerKind::TruncSvdScaled
                | PreconditionerKind::RandSvdScaled
        )
    }
}

impl fmt::Display for PreconditionerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PreconditionerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown preconditioner `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreconditionerConfig {
    pub kind: PreconditionerKind,
    pub rank: usize,
    pub num_iters: usize,
    /// The constant `a` of the scaled variants.
    pub scale: f64,
    /// Lower bound applied to diagonal corrections.
    pub diag_floor: f64,
}

impl Default for PreconditionerConfig {
    fn default() -> Self {
        PreconditionerConfig {
            kind: PreconditionerKind::RandSvd,
            rank: DEFAULT_RANK,
            num_iters: DEFAULT_NUM_ITERS,
            scale: DEFAULT_JITTER,
            diag_floor: DEFAULT_DIAG_FLOOR,
        }
    }
}

impl PreconditionerConfig {
    pub fn of_kind(kind: PreconditionerKind) -> Self {
        PreconditionerConfig {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_iters == 0 {
            return Err(Error::invalid("preconditioner num_iters must be >= 1"));
        }
        if self.kind.is_scaled() && !(self.scale > 0.0) {
            return Err(Error::invalid(format!(
                "scaled preconditioner needs a > 0, got {}",
                self.scale
            )));
        }
        if !(self.diag_floor > 0.0) {
            return Err(Error::invalid("diagonal floor must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Base {
    Diagonal(Vec<f64>),
    Scalar(f64),
}

impl Base {
    #[inline]
    fn at(&self, i: usize) -> f64 {
        match self {
            Base::Diagonal(d) => d[i],
            Base::Scalar(a) => *a,
        }
    }
}

/// Rows whose base entry is below this fraction of their low-rank energy are
/// eliminated through a dense Schur complement instead of Woodbury.
const SPLIT_RATIO: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Preconditioner {
    kind: PreconditionerKind,
    n: usize,
    base: Base,
    /// Columns of `A`, each of length `n`.
    factor: Vec<Vec<f64>>,
    /// Rows with a usable base; everything not in here is in `stiff`.
    stiff: Vec<usize>,
    is_stiff: Vec<bool>,
    /// Cholesky of `I + A_Rᵗ B_R⁻¹ A_R` over the non-stiff rows.
    capacitance: Option<CholeskyFactor>,
    /// Cholesky of `B_S + A_S (I + G)⁻¹ A_Sᵗ` over the stiff rows.
    schur: Option<CholeskyFactor>,
    root: InverseRoot,
    log_det: f64,
}

/// `L⁻¹ = W⁻¹ B^{-1/2}` for the factor `L = B^{1/2} W` of `P`, where
/// `W = (I + Ã Ãᵗ)^{1/2}` and `Ã = B^{-1/2} A`. `W⁻¹` is stored as
/// `I + Σ_l c_l u_l u_lᵗ` over the left singular vectors `u_l` of `Ã`.
#[derive(Debug, Clone, Default)]
struct InverseRoot {
    basis: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
}

impl InverseRoot {
    fn new(base: &Base, factor: &[Vec<f64>]) -> Self {
        let k = factor.len();
        if k == 0 {
            return InverseRoot::default();
        }
        let n = factor[0].len();
        let scaled = DMatrix::from_fn(n, k, |i, l| factor[l][i] / base.at(i).sqrt());
        let qr = scaled.qr();
        let q = qr.q();
        let svd = qr.r().svd(true, false);
        let ur = svd.u.expect("requested left singular vectors");
        let mut basis = Vec::with_capacity(k);
        let mut coeffs = Vec::with_capacity(k);
        for (l, &sigma) in svd.singular_values.iter().enumerate() {
            if sigma == 0.0 {
                continue;
            }
            let s2 = sigma * sigma;
            let root = (1.0 + s2).sqrt();
            // 1/sqrt(1+σ²) − 1 without cancellation
            coeffs.push(-s2 / (root * (1.0 + root)));
            basis.push((q.clone() * ur.column(l)).iter().copied().collect());
        }
        InverseRoot { basis, coeffs }
    }

    fn apply_w_inv(&self, v: &mut [f64]) {
        let proj: Vec<f64> = self.basis.iter().map(|u| dot(u, v)).collect();
        for ((u, c), p) in self.basis.iter().zip(&self.coeffs).zip(proj) {
            axpy(c * p, u, v);
        }
    }
}

impl Preconditioner {
    fn assemble(kind: PreconditionerKind, n: usize, base: Base, factor: Vec<Vec<f64>>) -> Result<Self> {
        match &base {
            Base::Diagonal(d) => {
                if let Some(i) = d.iter().position(|&x| !(x > 0.0)) {
                    return Err(Error::invalid(format!(
                        "preconditioner base entry {i} is not positive ({})",
                        d[i]
                    )));
                }
            }
            Base::Scalar(a) => {
                if !(*a > 0.0) {
                    return Err(Error::invalid("preconditioner scale must be positive"));
                }
            }
        }
        let k = factor.len();
        let is_stiff: Vec<bool> = (0..n)
            .map(|i| {
                let energy: f64 = factor.iter().map(|c| c[i] * c[i]).sum();
                base.at(i) < SPLIT_RATIO * energy
            })
            .collect();
        let stiff: Vec<usize> = (0..n).filter(|&i| is_stiff[i]).collect();
        let mut log_det: f64 = (0..n).filter(|&i| !is_stiff[i]).map(|i| base.at(i).ln()).sum();

        let capacitance = if k == 0 {
            None
        } else {
            let scaled: Vec<Vec<f64>> = factor
                .iter()
                .map(|col| {
                    col.iter()
                        .enumerate()
                        .map(|(i, x)| if is_stiff[i] { 0.0 } else { x / base.at(i) })
                        .collect()
                })
                .collect();
            let mut g = vec![0.0; k * k];
            for a in 0..k {
                for b in 0..=a {
                    let v = dot(&factor[a], &scaled[b]);
                    g[a * k + b] = v;
                    g[b * k + a] = v;
                }
                g[a * k + a] += 1.0;
            }
            let c = cholesky_row_major(k, &g).map_err(|e| e.context("capacitance matrix"))?;
            log_det += c.logdet();
            Some(c)
        };

        let schur = match (&capacitance, stiff.len()) {
            (Some(cap), m) if m > 0 => {
                // Rows of (I + G)^{-1/2} A_Sᵗ give the Schur complement as a Gram matrix.
                let half: Vec<Vec<f64>> = stiff
                    .iter()
                    .map(|&i| cap.solve_lower(&factor.iter().map(|c| c[i]).collect::<Vec<_>>()))
                    .collect();
                let mut sc = vec![0.0; m * m];
                for a in 0..m {
                    for b in 0..=a {
                        let v = dot(&half[a], &half[b]);
                        sc[a * m + b] = v;
                        sc[b * m + a] = v;
                    }
                    sc[a * m + a] += base.at(stiff[a]);
                }
                let c = cholesky_row_major(m, &sc).map_err(|e| e.context("preconditioner Schur complement"))?;
                log_det += c.logdet();
                Some(c)
            }
            _ => None,
        };

        let root = InverseRoot::new(&base, &factor);
        Ok(Preconditioner {
            kind,
            n,
            base,
            factor,
            stiff,
            is_stiff,
            capacitance,
            schur,
            root,
            log_det,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::assemble(PreconditionerKind::Identity, n, Base::Scalar(1.0), Vec::new())
            .expect("identity preconditioner is always valid")
    }

    /// `diag(base) + Σ_l a_l a_lᵗ`, labelled as `kind`.
    pub fn from_parts(kind: PreconditionerKind, diagonal: Vec<f64>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let n = diagonal.len();
        check_columns(n, &columns)?;
        Self::assemble(kind, n, Base::Diagonal(diagonal), columns)
    }

    /// `a I + Σ_l a_l a_lᵗ`, labelled as `kind`.
    pub fn from_scaled_parts(kind: PreconditionerKind, n: usize, a: f64, columns: Vec<Vec<f64>>) -> Result<Self> {
        check_columns(n, &columns)?;
        Self::assemble(kind, n, Base::Scalar(a), columns)
    }

    pub fn kind(&self) -> PreconditionerKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of low-rank columns actually kept.
    pub fn rank(&self) -> usize {
        self.factor.len()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn base_diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.base.at(i)).collect()
    }

    pub fn low_rank_columns(&self) -> &[Vec<f64>] {
        &self.factor
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: v.len(),
            });
        }
        Ok(())
    }

    /// `P v`
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        let mut out: Vec<f64> = v.iter().enumerate().map(|(i, x)| self.base.at(i) * x).collect();
        for col in &self.factor {
            let c = dot(col, v);
            out.iter_mut().zip(col).for_each(|(o, a)| *o += c * a);
        }
        Ok(out)
    }

    /// `Aᵗ B⁻¹ u` restricted to the non-stiff rows.
    fn project_regular(&self, u: &[f64]) -> Vec<f64> {
        self.factor
            .iter()
            .map(|col| {
                (0..self.n)
                    .filter(|&i| !self.is_stiff[i])
                    .map(|i| col[i] * u[i] / self.base.at(i))
                    .sum()
            })
            .collect()
    }

    /// `P⁻¹ v`.
    ///
    /// Woodbury over the rows with a usable base; rows whose base is
    /// negligible next to `A Aᵗ` are solved through the Schur complement.
    pub fn apply_inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        let Some(cap) = &self.capacitance else {
            return Ok(v.iter().enumerate().map(|(i, x)| x / self.base.at(i)).collect());
        };
        let mut y = cap.solve(&self.project_regular(v))?;
        if let Some(schur) = &self.schur {
            let rhs: Vec<f64> = self
                .stiff
                .iter()
                .map(|&i| v[i] - self.factor.iter().zip(&y).map(|(c, yl)| c[i] * yl).sum::<f64>())
                .collect();
            let xs = schur.solve(&rhs)?;
            let u: Vec<f64> = self
                .factor
                .iter()
                .map(|c| self.stiff.iter().zip(&xs).map(|(&i, x)| c[i] * x).sum())
                .collect();
            let w = cap.solve(&u)?;
            y.iter_mut().zip(&w).for_each(|(a, b)| *a += b);
            let mut out = vec![0.0; self.n];
            for (&i, x) in self.stiff.iter().zip(&xs) {
                out[i] = *x;
            }
            self.fill_regular(v, &y, &mut out);
            Ok(out)
        } else {
            let mut out = vec![0.0; self.n];
            self.fill_regular(v, &y, &mut out);
            Ok(out)
        }
    }

    /// `B_R⁻¹ (v − A y)` on the non-stiff rows.
    fn fill_regular(&self, v: &[f64], y: &[f64], out: &mut [f64]) {
        let mut ay = vec![0.0; self.n];
        for (col, yl) in self.factor.iter().zip(y) {
            ay.iter_mut().zip(col).for_each(|(o, a)| *o += yl * a);
        }
        for i in 0..self.n {
            if !self.is_stiff[i] {
                out[i] = (v[i] - ay[i]) / self.base.at(i);
            }
        }
    }

    /// `L⁻¹ v` for a fixed factor `P = L Lᵗ`.
    pub fn apply_inverse_root(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        let mut u: Vec<f64> = v.iter().enumerate().map(|(i, x)| x / self.base.at(i).sqrt()).collect();
        self.root.apply_w_inv(&mut u);
        Ok(u)
    }

    /// `L⁻ᵗ v`, the transpose of [`Self::apply_inverse_root`].
    pub fn apply_inverse_root_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        let mut u = v.to_vec();
        self.root.apply_w_inv(&mut u);
        u.iter_mut()
            .enumerate()
            .for_each(|(i, x)| *x /= self.base.at(i).sqrt());
        Ok(u)
    }

    /// Dense `P`, for testing and diagnostics.
    pub fn to_dense(&self) -> DenseSymMatrix {
        DenseSymMatrix::from_fn(self.n, |i, j| {
            let mut s: f64 = self.factor.iter().map(|c| c[i] * c[j]).sum();
            if i == j {
                s += self.base.at(i);
            }
            s
        })
    }
}

fn check_columns(n: usize, columns: &[Vec<f64>]) -> Result<()> {
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: c.len(),
        });
    }
    Ok(())
}

/// `diag(M) − Σ_l a_l²`, floored.
fn residual_diagonal(m: &DenseSymMatrix, columns: &[Vec<f64>], floor: f64) -> Vec<f64> {
    (0..m.n())
        .map(|i| {
            let low: f64 = columns.iter().map(|c| c[i] * c[i]).sum();
            (m.get(i, i) - low).max(floor)
        })
        .collect()
}

/// Columns `sqrt(λ) u` for the positive eigenpairs.
fn eigen_columns(values: &[f64], vectors: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    values
        .iter()
        .zip(vectors)
        .filter(|(&l, _)| l > 0.0)
        .map(|(&l, mut u)| {
            let s = l.sqrt();
            u.iter_mut().for_each(|x| *x *= s);
            u
        })
        .collect()
}

pub fn build_preconditioner(
    m: &DenseSymMatrix,
    cfg: &PreconditionerConfig,
    rng: &mut Rng,
) -> Result<Preconditioner> {
    cfg.validate()?;
    let n = m.n();
    let uses_rank = !matches!(
        cfg.kind,
        PreconditionerKind::Identity | PreconditionerKind::Diagonal | PreconditionerKind::RankOne
    );
    if uses_rank && cfg.rank > n {
        return Err(Error::invalid(format!(
            "preconditioner rank {} exceeds dimension {n}",
            cfg.rank
        )));
    }
    let columns = match cfg.kind {
        PreconditionerKind::Identity => {
            return Ok(Preconditioner::identity(n));
        }
        PreconditionerKind::Diagonal => {
            return Preconditioner::assemble(cfg.kind, n, Base::Diagonal(m.diagonal()), Vec::new());
        }
        PreconditionerKind::RankOne => {
            let (lambda, v) = power_iteration(m, rng)?;
            eigen_columns(&[lambda], vec![v])
        }
        PreconditionerKind::PartialCholesky | PreconditionerKind::PartialCholeskyScaled => {
            pivoted_partial_cholesky(m, cfg.rank)
        }
        PreconditionerKind::TruncSvd | PreconditionerKind::TruncSvdScaled => {
            let SymEigen { values, vectors } = sym_eigen(m);
            let (values, vectors): (Vec<f64>, Vec<Vec<f64>>) =
                values.into_iter().zip(vectors).rev().take(cfg.rank).unzip();
            eigen_columns(&values, vectors)
        }
        PreconditionerKind::RandSvd | PreconditionerKind::RandSvdScaled => {
            if cfg.rank == 0 {
                Vec::new()
            } else {
                let (values, vectors) = randomized_range_svd(m, cfg.rank, cfg.num_iters, rng)?;
                eigen_columns(&values, vectors)
            }
        }
    };
    let base = if cfg.kind.is_scaled() {
        Base::Scalar(cfg.scale)
    } else {
        Base::Diagonal(residual_diagonal(m, &columns, cfg.diag_floor))
    };
    Preconditioner::assemble(cfg.kind, n, base, columns)
}

/// Dominant eigenpair by power iteration from a Gaussian start.
pub fn power_iteration(m: &DenseSymMatrix, rng: &mut Rng) -> Result<(f64, Vec<f64>)> {
    let mut v = rng.normal_vec(m.n());
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda = f64::NAN;
    for _ in 0..POWER_MAX_ITERS {
        let w = m.matvec(&v)?;
        let next = dot(&v, &w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return Ok((0.0, v));
        }
        v = w.into_iter().map(|x| x / nw).collect();
        let converged = (next - lambda).abs() < POWER_TOL * next.abs();
        lambda = next;
        if converged {
            break;
        }
    }
    Ok((lambda, v))
}

/// Rank-`k` pivoted partial Cholesky with greedy largest-diagonal pivots.
///
/// Stops early if the remaining diagonal is exhausted.
pub fn pivoted_partial_cholesky(m: &DenseSymMatrix, k: usize) -> Vec<Vec<f64>> {
    let n = m.n();
    let mut d = m.diagonal();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut used = vec![false; n];
    for _ in 0..k {
        let mut p = None;
        for i in 0..n {
            if !used[i] && p.is_none_or(|q: usize| d[i] > d[q]) {
                p = Some(i);
            }
        }
        let Some(p) = p else { break };
        if !(d[p] > 0.0) {
            break;
        }
        used[p] = true;
        let piv = d[p].sqrt();
        let mut col = m.row(p).to_vec();
        for c in &cols {
            let cp = c[p];
            col.iter_mut().zip(c).for_each(|(x, ci)| *x -= cp * ci);
        }
        col.iter_mut().for_each(|x| *x /= piv);
        for (i, di) in d.iter_mut().enumerate() {
            *di -= col[i] * col[i];
        }
        d[p] = 0.0;
        cols.push(col);
    }
    cols
}

/// Top-`k` eigenpairs of `M` from a randomized range finder with subspace
/// iteration.
///
/// Returns eigenvalues in descending order and the matching unit
/// eigenvectors as rows.
pub fn randomized_range_svd(
    m: &DenseSymMatrix,
    k: usize,
    num_iters: usize,
    rng: &mut Rng,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = m.n();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("randomized SVD rank must be in 1..={n}, got {k}")));
    }
    if num_iters == 0 {
        return Err(Error::invalid("randomized SVD needs num_iters >= 1"));
    }
    let mut last_err = None;
    for _attempt in 0..2 {
        match range_basis(m, k, num_iters, rng) {
            Ok(q) => return Ok(project_and_lift(m, &q)),
            Err(e @ Error::RankDeficient { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("loop ran").context("randomized range finder"))
}

fn range_basis(m: &DenseSymMatrix, k: usize, num_iters: usize, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    let mut y: Vec<Vec<f64>> = (0..k).map(|_| rng.normal_vec(m.n())).collect();
    for _ in 0..num_iters {
        let refs: Vec<&[f64]> = y.iter().map(|v| v.as_slice()).collect();
        y = orthonormalize(&m.matvec_many(&refs))?;
    }
    Ok(y)
}

fn project_and_lift(m: &DenseSymMatrix, q: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = q.len();
    let refs: Vec<&[f64]> = q.iter().map(|v| v.as_slice()).collect();
    let mq = m.matvec_many(&refs);
    let small = DenseSymMatrix::from_fn(k, |a, b| 0.5 * (dot(&q[a], &mq[b]) + dot(&q[b], &mq[a])));
    let eig = sym_eigen(&small);
    let n = m.n();
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for (lambda, z) in eig.values.iter().zip(&eig.vectors).rev() {
        let mut u = vec![0.0; n];
        for (qa, za) in q.iter().zip(z) {
            u.iter_mut().zip(qa).for_each(|(o, x)| *o += za * x);
        }
        values.push(*lambda);
        vectors.push(u);
    }
    (values, vectors)
}
