//! Lanczos tridiagonalization with full reorthogonalization, and the
//! multi-shift tridiagonal solves built on it.
//!
//! Several independent recurrences can be advanced in lockstep with
//! [`lanczos_many`], which lets the operator apply itself to all current
//! basis vectors in one pass over its storage. Each recurrence is
//! arithmetically identical to a standalone [`lanczos`] run.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, thomas_solve, DenseSymMatrix, TridiagMatrix};
use crate::precond::Preconditioner;

/// Breakdown threshold relative to `‖A q₁‖`.
pub const BREAKDOWN_TOL: f64 = 1e-12;

pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn apply_many(&self, xs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.apply(x)).collect()
    }
}

impl LinearOperator for DenseSymMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.matvec(x)
    }

    fn apply_many(&self, xs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        if let Some(x) = xs.iter().find(|x| x.len() != self.n()) {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: x.len(),
            });
        }
        Ok(self.matvec_many(xs))
    }
}

/// `x ↦ L⁻¹ M L⁻ᵗ x` for the factor `P = L Lᵗ`.
///
/// Similar to `M P⁻¹` (it is `M P⁻¹` seen in the `P⁻¹` inner product), so it
/// has the same trace functions, but it is symmetric.
pub struct SplitPreconditionedOperator<'a> {
    matrix: &'a DenseSymMatrix,
    precond: &'a Preconditioner,
}

impl<'a> SplitPreconditionedOperator<'a> {
    pub fn new(matrix: &'a DenseSymMatrix, precond: &'a Preconditioner) -> Result<Self> {
        if matrix.n() != precond.n() {
            return Err(Error::DimensionMismatch {
                expected: matrix.n(),
                found: precond.n(),
            });
        }
        Ok(SplitPreconditionedOperator { matrix, precond })
    }
}

impl LinearOperator for SplitPreconditionedOperator<'_> {
    fn dim(&self) -> usize {
        self.matrix.n()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let y = self.matrix.matvec(&self.precond.apply_inverse_root_transpose(x)?)?;
        self.precond.apply_inverse_root(&y)
    }

    fn apply_many(&self, xs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let inner: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| self.precond.apply_inverse_root_transpose(x))
            .collect::<Result<_>>()?;
        let refs: Vec<&[f64]> = inner.iter().map(|v| v.as_slice()).collect();
        self.matrix
            .matvec_many(&refs)
            .iter()
            .map(|y| self.precond.apply_inverse_root(y))
            .collect()
    }
}

/// `x ↦ M P⁻¹ x`
pub struct PreconditionedOperator<'a> {
    matrix: &'a DenseSymMatrix,
    precond: &'a Preconditioner,
}

impl<'a> PreconditionedOperator<'a> {
    pub fn new(matrix: &'a DenseSymMatrix, precond: &'a Preconditioner) -> Result<Self> {
        if matrix.n() != precond.n() {
            return Err(Error::DimensionMismatch {
                expected: matrix.n(),
                found: precond.n(),
            });
        }
        Ok(PreconditionedOperator { matrix, precond })
    }
}

impl LinearOperator for PreconditionedOperator<'_> {
    fn dim(&self) -> usize {
        self.matrix.n()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.matrix.matvec(&self.precond.apply_inverse(x)?)
    }

    fn apply_many(&self, xs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let pinv: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| self.precond.apply_inverse(x))
            .collect::<Result<_>>()?;
        let refs: Vec<&[f64]> = pinv.iter().map(|v| v.as_slice()).collect();
        Ok(self.matrix.matvec_many(&refs))
    }
}

/// `Q` (rows orthonormal) and `T` with `Q A Qᵗ ≈ T`.
#[derive(Debug, Clone)]
pub struct LanczosFactorization {
    basis: Vec<Vec<f64>>,
    tridiag: TridiagMatrix,
    start_norm: f64,
    requested: usize,
}

impl LanczosFactorization {
    /// Achieved size, smaller than requested after a breakdown.
    pub fn t(&self) -> usize {
        self.basis.len()
    }

    pub fn requested(&self) -> usize {
        self.requested
    }

    pub fn broke_down(&self) -> bool {
        self.t() < self.requested
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn tridiag(&self) -> &TridiagMatrix {
        &self.tridiag
    }

    pub fn start_norm(&self) -> f64 {
        self.start_norm
    }

    /// `Qᵗ w`
    pub fn lift(&self, w: &[f64]) -> Vec<f64> {
        let n = self.basis[0].len();
        let mut out = vec![0.0; n];
        for (q, wi) in self.basis.iter().zip(w) {
            axpy(*wi, q, &mut out);
        }
        out
    }
}

struct Recurrence {
    basis: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    start_norm: f64,
    reference: f64,
    done: bool,
}

pub fn lanczos<O: LinearOperator + ?Sized>(op: &O, v: &[f64], t: usize) -> Result<LanczosFactorization> {
    let mut out = lanczos_many(op, &[v.to_vec()], t)?;
    Ok(out.pop().expect("one start vector"))
}

/// Runs one recurrence per start vector, all advanced together.
pub fn lanczos_many<O: LinearOperator + ?Sized>(
    op: &O,
    starts: &[Vec<f64>],
    t: usize,
) -> Result<Vec<LanczosFactorization>> {
    let n = op.dim();
    if t == 0 {
        return Err(Error::invalid("lanczos needs t >= 1"));
    }
    if t > n {
        return Err(Error::invalid(format!("lanczos t = {t} exceeds operator dimension {n}")));
    }
    let mut runs = Vec::with_capacity(starts.len());
    for v in starts {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            });
        }
        let norm = norm2(v);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::invalid("lanczos start vector must be nonzero and finite"));
        }
        runs.push(Recurrence {
            basis: vec![v.iter().map(|x| x / norm).collect()],
            alpha: Vec::with_capacity(t),
            beta: Vec::with_capacity(t),
            start_norm: norm,
            reference: 0.0,
            done: false,
        });
    }

    for j in 0..t {
        let active: Vec<usize> = (0..runs.len()).filter(|&i| !runs[i].done).collect();
        if active.is_empty() {
            break;
        }
        let current: Vec<&[f64]> = active.iter().map(|&i| runs[i].basis[j].as_slice()).collect();
        let images = op.apply_many(&current)?;
        for (&i, mut w) in active.iter().zip(images) {
            let run = &mut runs[i];
            if j == 0 {
                run.reference = norm2(&w);
            }
            let alpha = dot(&run.basis[j], &w);
            axpy(-alpha, &run.basis[j], &mut w);
            if j > 0 {
                axpy(-run.beta[j - 1], &run.basis[j - 1], &mut w);
            }
            for _ in 0..2 {
                for q in &run.basis {
                    let c = dot(q, &w);
                    axpy(-c, q, &mut w);
                }
            }
            run.alpha.push(alpha);
            if j + 1 == t {
                run.done = true;
                continue;
            }
            let beta = norm2(&w);
            if !(beta >= BREAKDOWN_TOL * run.reference) || beta == 0.0 {
                run.done = true;
                continue;
            }
            run.beta.push(beta);
            w.iter_mut().for_each(|x| *x /= beta);
            run.basis.push(w);
        }
    }

    runs.into_iter()
        .map(|r| {
            Ok(LanczosFactorization {
                tridiag: TridiagMatrix::new(r.alpha, r.beta)?,
                basis: r.basis,
                start_norm: r.start_norm,
                requested: t,
            })
        })
        .collect()
}

/// Solves `(T + σ_j I) w_j = ‖v‖ e₁` for every shift from one factorization.
pub fn multishift_solve(f: &LanczosFactorization, shifts: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut rhs = vec![0.0; f.t()];
    rhs[0] = f.start_norm;
    shifts
        .iter()
        .map(|&s| thomas_solve(&f.tridiag, s, &rhs))
        .collect()
}
