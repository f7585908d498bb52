//! Dense symmetric linear algebra: storage, products, Cholesky, Thomas
//! solves, Gram-Schmidt and a thin eigensolver wrapper.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Smallest pivot magnitude the Thomas elimination accepts.
pub const MIN_PIVOT: f64 = 1e-300;

/// Relative norm below which a projected row counts as linearly dependent.
pub const RANK_TOL: f64 = 1e-12;

const ROW_BLOCK: usize = 4;

/// Dot product with four interleaved accumulators.
///
/// The lane order is fixed, so results are bit-reproducible and identical
/// to what [`dot4_rows`] produces for each row.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
fn dot4_rows(rows: [&[f64]; 4], x: &[f64]) -> [f64; 4] {
    let mut acc = [[0.0f64; 4]; 4];
    let n4 = x.len() / 4 * 4;
    let mut j = 0;
    while j < n4 {
        let xs = &x[j..j + 4];
        for (r, a) in rows.iter().zip(acc.iter_mut()) {
            let rs = &r[j..j + 4];
            a[0] += rs[0] * xs[0];
            a[1] += rs[1] * xs[1];
            a[2] += rs[2] * xs[2];
            a[3] += rs[3] * xs[3];
        }
        j += 4;
    }
    let mut out = [0.0; 4];
    for (k, (r, a)) in rows.iter().zip(acc.iter()).enumerate() {
        let mut s = (a[0] + a[1]) + (a[2] + a[3]);
        for jj in n4..x.len() {
            s += r[jj] * x[jj];
        }
        out[k] = s;
    }
    out
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn scale(v: &mut [f64], a: f64) {
    v.iter_mut().for_each(|x| *x *= a);
}

/// Dense symmetric matrix in full row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseSymMatrix {
    /// Builds a matrix from its lower triangle; `f(i, j)` is only called with `j <= i`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(n >= 1, "matrix dimension must be at least 1");
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        DenseSymMatrix { n, data }
    }

    /// Takes ownership of row-major data, rejecting anything not exactly symmetric.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        for i in 0..n {
            for j in 0..i {
                if data[i * n + j] != data[j * n + i] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(DenseSymMatrix { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(n, data)
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, c: f64) -> Self {
        Self::from_fn(n, |i, j| if i == j { c } else { 0.0 })
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    /// Block-diagonal matrix `diag(a, b)`.
    pub fn block_diag(a: &DenseSymMatrix, b: &DenseSymMatrix) -> Self {
        let na = a.n;
        Self::from_fn(na + b.n, |i, j| match (i < na, j < na) {
            (true, true) => a.get(i, j),
            (false, false) => b.get(i - na, j - na),
            _ => 0.0,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: v.len(),
            });
        }
        let mut out = vec![0.0; self.n];
        self.matvec_into(v, &mut out);
        Ok(out)
    }

    /// Unchecked variant of [`matvec`](Self::matvec); panics on length mismatch.
    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.n);
        assert_eq!(out.len(), self.n);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v);
        }
    }

    /// Applies the matrix to several vectors in a single pass over its rows.
    ///
    /// Each output entry is computed exactly as [`matvec`](Self::matvec)
    /// would compute it, so the results are bit-identical.
    pub fn matvec_many(&self, vs: &[&[f64]]) -> Vec<Vec<f64>> {
        let n = self.n;
        for v in vs {
            assert_eq!(v.len(), n);
        }
        // Row-block-major scratch: block b holds [vec][row-in-block].
        let blocks: Vec<(usize, Vec<f64>)> = (0..n.div_ceil(ROW_BLOCK))
            .into_par_iter()
            .map(|b| {
                let start = b * ROW_BLOCK;
                let end = (start + ROW_BLOCK).min(n);
                let mut out = Vec::with_capacity(vs.len() * ROW_BLOCK);
                if end - start == ROW_BLOCK {
                    let rows = [
                        self.row(start),
                        self.row(start + 1),
                        self.row(start + 2),
                        self.row(start + 3),
                    ];
                    for v in vs {
                        out.extend_from_slice(&dot4_rows(rows, v));
                    }
                } else {
                    for v in vs {
                        for i in start..end {
                            out.push(dot(self.row(i), v));
                        }
                    }
                }
                (start, out)
            })
            .collect();
        let mut result = vec![vec![0.0; n]; vs.len()];
        for (start, out) in blocks {
            let width = (n - start).min(ROW_BLOCK);
            for (k, res) in result.iter_mut().enumerate() {
                res[start..start + width].copy_from_slice(&out[k * width..(k + 1) * width]);
            }
        }
        result
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

/// Symmetric tridiagonal matrix; the sub- and super-diagonal share `offdiag`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagMatrix {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl TridiagMatrix {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::invalid("tridiagonal matrix must have t >= 1"));
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(Error::DimensionMismatch {
                expected: diag.len() - 1,
                found: offdiag.len(),
            });
        }
        Ok(TridiagMatrix { diag, offdiag })
    }

    pub fn t(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn to_dense(&self) -> DenseSymMatrix {
        let t = self.t();
        DenseSymMatrix::from_fn(t, |i, j| {
            if i == j {
                self.diag[i]
            } else if i == j + 1 {
                self.offdiag[j]
            } else {
                0.0
            }
        })
    }

    /// `(T + shift I) x`
    pub fn shifted_matvec(&self, shift: f64, x: &[f64]) -> Vec<f64> {
        let t = self.t();
        (0..t)
            .map(|i| {
                let mut y = (self.diag[i] + shift) * x[i];
                if i > 0 {
                    y += self.offdiag[i - 1] * x[i - 1];
                }
                if i + 1 < t {
                    y += self.offdiag[i] * x[i + 1];
                }
                y
            })
            .collect()
    }
}

/// Solves `(T + shift I) x = b` by Thomas elimination without pivoting.
pub fn thomas_solve(t: &TridiagMatrix, shift: f64, b: &[f64]) -> Result<Vec<f64>> {
    let m = t.t();
    if b.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: b.len(),
        });
    }
    let mut c = vec![0.0; m];
    let mut x = vec![0.0; m];
    let mut pivot = t.diag[0] + shift;
    if !(pivot.abs() >= MIN_PIVOT) {
        return Err(Error::SingularShiftedSystem { index: 0, pivot });
    }
    if m > 1 {
        c[0] = t.offdiag[0] / pivot;
    }
    x[0] = b[0] / pivot;
    for i in 1..m {
        let sub = t.offdiag[i - 1];
        pivot = t.diag[i] + shift - sub * c[i - 1];
        if !(pivot.abs() >= MIN_PIVOT) {
            return Err(Error::SingularShiftedSystem { index: i, pivot });
        }
        if i + 1 < m {
            c[i] = t.offdiag[i] / pivot;
        }
        x[i] = (b[i] - sub * x[i - 1]) / pivot;
    }
    for i in (0..m - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Lower-triangular Cholesky factor in packed row storage.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    packed: Vec<f64>,
}

impl CholeskyFactor {
    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        let s = i * (i + 1) / 2;
        &self.packed[s..s + i + 1]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry `L[i][j]`; zero above the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.row(i)[j]
        }
    }

    /// `2 Σ log L_ii`
    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.row(i)[i].ln()).sum::<f64>()
    }

    /// `L⁻¹ b`; `b` must have length `n`.
    pub(crate) fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let mut y = b.to_vec();
        for i in 0..self.n {
            let r = self.row(i);
            y[i] = (y[i] - dot(&r[..i], &y[..i])) / r[i];
        }
        y
    }

    /// Solves `L Lᵗ x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: b.len(),
            });
        }
        let mut y = self.solve_lower(b);
        for i in (0..self.n).rev() {
            let yi = y[i] / self.row(i)[i];
            y[i] = yi;
            for (k, yk) in y[..i].iter_mut().enumerate() {
                *yk -= self.row(i)[k] * yi;
            }
        }
        Ok(y)
    }
}

/// Cholesky factorization of a symmetric matrix given as row-major data.
pub(crate) fn cholesky_row_major(n: usize, a: &[f64]) -> Result<CholeskyFactor> {
    let mut packed = vec![0.0; n * (n + 1) / 2];
    for i in 0..n {
        let si = i * (i + 1) / 2;
        for j in 0..=i {
            let sj = j * (j + 1) / 2;
            let s = {
                let (head, tail) = packed.split_at(si);
                let li = &tail[..j];
                let lj = if j == i { li } else { &head[sj..sj + j] };
                a[i * n + j] - dot(li, lj)
            };
            if j == i {
                if !(s > 0.0) {
                    return Err(Error::NotPositiveDefinite { index: i, pivot: s });
                }
                packed[si + i] = s.sqrt();
            } else {
                packed[si + j] = s / packed[sj + j];
            }
        }
    }
    Ok(CholeskyFactor { n, packed })
}

pub fn cholesky(m: &DenseSymMatrix) -> Result<CholeskyFactor> {
    cholesky_row_major(m.n, &m.data)
}

/// Exact log-determinant `2 Σ log L_ii` of an SPD matrix.
pub fn cholesky_logdet(m: &DenseSymMatrix) -> Result<f64> {
    Ok(cholesky(m)?.logdet())
}

/// Two-pass modified Gram-Schmidt on a set of rows.
pub fn orthonormalize(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    let n = rows.first().map_or(0, |r| r.len());
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: r.len(),
            });
        }
        let mut v = r.clone();
        let orig = norm2(&v);
        if !(orig > 0.0) || !orig.is_finite() {
            return Err(Error::RankDeficient { row: i });
        }
        for _ in 0..2 {
            for q in &out {
                let c = dot(q, &v);
                axpy(-c, q, &mut v);
            }
        }
        let nv = norm2(&v);
        if nv < RANK_TOL * orig {
            return Err(Error::RankDeficient { row: i });
        }
        scale(&mut v, 1.0 / nv);
        out.push(v);
    }
    Ok(out)
}

/// Eigendecomposition of a dense symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

fn eigen_from_nalgebra(m: DMatrix<f64>) -> SymEigen {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    SymEigen {
        values: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
        vectors: order
            .iter()
            .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
            .collect(),
    }
}

pub fn sym_eigen(m: &DenseSymMatrix) -> SymEigen {
    eigen_from_nalgebra(m.to_nalgebra())
}

/// Eigenvalues only, ascending.
pub fn sym_eigenvalues(m: &DenseSymMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = m.to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn tridiag_eigen(t: &TridiagMatrix) -> SymEigen {
    sym_eigen(&t.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_sym(n: usize, rng: &mut Rng) -> DenseSymMatrix {
        DenseSymMatrix::from_fn(n, |_, _| rng.normal())
    }

    fn random_spd(n: usize, rng: &mut Rng) -> DenseSymMatrix {
        let g: Vec<Vec<f64>> = (0..n).map(|_| rng.normal_vec(n)).collect();
        DenseSymMatrix::from_fn(n, |i, j| {
            let mut s: f64 = (0..n).map(|k| g[i][k] * g[j][k]).sum();
            if i == j {
                s += n as f64;
            }
            s
        })
    }

    // Gaussian elimination with partial pivoting; test-only reference.
    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut x = b.to_vec();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
            m.swap(k, p);
            x.swap(k, p);
            for i in k + 1..n {
                let f = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                x[i] -= f * x[k];
            }
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
            x[i] = (x[i] - s) / m[i][i];
        }
        x
    }

    #[test]
    fn matvec_identity_and_diagonal() {
        let i3 = DenseSymMatrix::identity(3);
        assert_eq!(i3.matvec(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let d = DenseSymMatrix::from_diagonal(&[2.0, 3.0]);
        assert_eq!(d.matvec(&[1.0, 1.0]).unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn matvec_matches_double_loop() {
        let mut rng = Rng::new(11);
        let m = random_sym(5, &mut rng);
        let v = rng.normal_vec(5);
        let got = m.matvec(&v).unwrap();
        for i in 0..5 {
            let mut want = 0.0;
            for j in 0..5 {
                want += m.get(i, j) * v[j];
            }
            assert!((got[i] - want).abs() <= 1e-14 * want.abs().max(1.0));
        }
    }

    #[test]
    fn matvec_dimension_mismatch() {
        let m = DenseSymMatrix::identity(3);
        assert!(matches!(
            m.matvec(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn matvec_many_is_bitwise_matvec() {
        let mut rng = Rng::new(5);
        for n in [1, 3, 4, 7, 33] {
            let m = random_sym(n, &mut rng);
            let vs: Vec<Vec<f64>> = (0..6).map(|_| rng.normal_vec(n)).collect();
            let refs: Vec<&[f64]> = vs.iter().map(|v| v.as_slice()).collect();
            let many = m.matvec_many(&refs);
            for (v, got) in vs.iter().zip(&many) {
                let one = m.matvec(v).unwrap();
                assert_eq!(
                    one.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                    got.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
                );
            }
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let r = DenseSymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.5, 1.0]]);
        assert!(matches!(r, Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn cholesky_small_cases() {
        let l = cholesky(&DenseSymMatrix::identity(2)).unwrap();
        assert_eq!((l.get(0, 0), l.get(1, 0), l.get(1, 1)), (1.0, 0.0, 1.0));

        let m = DenseSymMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 5.0]]).unwrap();
        let l = cholesky(&m).unwrap();
        assert_eq!((l.get(0, 0), l.get(0, 1), l.get(1, 0), l.get(1, 1)), (2.0, 0.0, 1.0, 2.0));

        let bad = DenseSymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&bad), Err(Error::NotPositiveDefinite { index: 1, .. })));
    }

    #[test]
    fn cholesky_reconstructs() {
        let mut rng = Rng::new(2);
        let m = random_spd(40, &mut rng);
        let l = cholesky(&m).unwrap();
        let mut err = 0.0;
        for i in 0..40 {
            for j in 0..40 {
                let s: f64 = (0..40).map(|k| l.get(i, k) * l.get(j, k)).sum();
                err += (s - m.get(i, j)).powi(2);
            }
        }
        assert!(err.sqrt() / m.frobenius_norm() <= 1e-12);
    }

    #[test]
    fn cholesky_solve_matches_dense() {
        let mut rng = Rng::new(8);
        let m = random_spd(25, &mut rng);
        let b = rng.normal_vec(25);
        let x = cholesky(&m).unwrap().solve(&b).unwrap();
        let rows: Vec<Vec<f64>> = (0..25).map(|i| m.row(i).to_vec()).collect();
        let want = dense_solve(&rows, &b);
        for (a, w) in x.iter().zip(&want) {
            assert!((a - w).abs() <= 1e-10 * w.abs().max(1.0));
        }
    }

    #[test]
    fn cholesky_logdet_examples() {
        assert_eq!(cholesky_logdet(&DenseSymMatrix::identity(5)).unwrap(), 0.0);
        let d = DenseSymMatrix::from_diagonal(&[2.0, 0.5]);
        assert!(cholesky_logdet(&d).unwrap().abs() < 1e-15);
        let d = DenseSymMatrix::from_diagonal(&[2.0, 3.0]);
        assert!((cholesky_logdet(&d).unwrap() - 1.791_759_469_228_055).abs() < 1e-14);
    }

    #[test]
    fn logdet_block_diagonal_additive() {
        let mut rng = Rng::new(21);
        for _ in 0..5 {
            let a = random_spd(7, &mut rng);
            let b = random_spd(11, &mut rng);
            let ab = DenseSymMatrix::block_diag(&a, &b);
            let lhs = cholesky_logdet(&ab).unwrap();
            let rhs = cholesky_logdet(&a).unwrap() + cholesky_logdet(&b).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn thomas_trivial_cases() {
        let t = TridiagMatrix::new(vec![1.0; 3], vec![0.0; 2]).unwrap();
        assert_eq!(thomas_solve(&t, 0.0, &[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        let t = TridiagMatrix::new(vec![1.0, 2.0, 3.0], vec![0.0; 2]).unwrap();
        assert_eq!(thomas_solve(&t, 1.0, &[2.0, 3.0, 4.0]).unwrap(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn thomas_singular_pivot() {
        let t = TridiagMatrix::new(vec![1.0, 1.0], vec![1.0]).unwrap();
        assert!(matches!(
            thomas_solve(&t, 0.0, &[1.0, 1.0]),
            Err(Error::SingularShiftedSystem { index: 1, .. })
        ));
        let t = TridiagMatrix::new(vec![-1.0], vec![]).unwrap();
        assert!(matches!(
            thomas_solve(&t, 1.0, &[1.0]),
            Err(Error::SingularShiftedSystem { index: 0, .. })
        ));
    }

    fn random_spd_tridiag(t: usize, rng: &mut Rng) -> TridiagMatrix {
        let off: Vec<f64> = (0..t - 1).map(|_| rng.normal()).collect();
        let diag: Vec<f64> = (0..t)
            .map(|i| {
                let l = if i > 0 { off[i - 1].abs() } else { 0.0 };
                let r = if i + 1 < t { off[i].abs() } else { 0.0 };
                l + r + 0.1 + rng.uniform()
            })
            .collect();
        TridiagMatrix::new(diag, off).unwrap()
    }

    #[test]
    fn thomas_matches_dense_solve() {
        let mut rng = Rng::new(99);
        for t in [1usize, 2, 20, 57, 200] {
            let tri = random_spd_tridiag(t.max(2), &mut rng);
            let t = tri.t();
            let b = rng.normal_vec(t);
            let x = thomas_solve(&tri, 0.5, &b).unwrap();
            let dense = tri.to_dense();
            let rows: Vec<Vec<f64>> = (0..t)
                .map(|i| {
                    let mut r = dense.row(i).to_vec();
                    r[i] += 0.5;
                    r
                })
                .collect();
            let want = dense_solve(&rows, &b);
            let err = norm2(&x.iter().zip(&want).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(err <= 1e-10 * norm2(&want));
            let resid: Vec<f64> =
                tri.shifted_matvec(0.5, &x).iter().zip(&b).map(|(a, b)| a - b).collect();
            assert!(norm2(&resid) <= 1e-10 * norm2(&b));
        }
    }

    #[test]
    fn orthonormalize_examples() {
        let q = orthonormalize(&[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap();
        assert_eq!(q, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);

        let v = vec![vec![1.0, 1.0], vec![1.0, 0.0]];
        let q = orthonormalize(&v).unwrap();
        assert!(dot(&q[0], &q[1]).abs() < 1e-15);
        // span of two independent vectors in R^2 is everything: projector = I
        for i in 0..2 {
            for j in 0..2 {
                let p: f64 = q.iter().map(|r| r[i] * r[j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((p - want).abs() < 1e-14);
            }
        }

        assert!(matches!(
            orthonormalize(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]),
            Err(Error::RankDeficient { row: 1 })
        ));
    }

    #[test]
    fn orthonormalize_preserves_span() {
        let mut rng = Rng::new(4);
        let v: Vec<Vec<f64>> = (0..4).map(|_| rng.normal_vec(9)).collect();
        let q = orthonormalize(&v).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let g = dot(&q[a], &q[b]);
                assert!((g - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        // every original row lies in span(q)
        for r in &v {
            let mut res = r.clone();
            for qi in &q {
                axpy(-dot(qi, r), qi, &mut res);
            }
            assert!(norm2(&res) < 1e-12 * norm2(r));
        }
    }

    #[test]
    fn matvec_is_symmetric_bilinear() {
        let mut rng = Rng::new(77);
        for _ in 0..10 {
            let m = random_sym(30, &mut rng);
            let u = rng.normal_vec(30);
            let v = rng.normal_vec(30);
            let a = dot(&u, &m.matvec(&v).unwrap());
            let b = dot(&v, &m.matvec(&u).unwrap());
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn eigen_of_diagonal() {
        let e = sym_eigen(&DenseSymMatrix::from_diagonal(&[3.0, 1.0, 2.0]));
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        assert!((e.vectors[0][1].abs() - 1.0).abs() < 1e-15);
    }
}
