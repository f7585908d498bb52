//! Rational approximations r₁…r₆ to `log z` and the partial-fraction forms
//! of the odd orders.
//!
//! The partial-fraction constants are embedded as literals and can be
//! re-derived from the closed forms with [`derive_partial_fraction`], which
//! isolates the denominator roots on the negative real axis and evaluates
//! the residues with compensated Horner sums.

use crate::error::{Error, Result};

/// `r_k(z) = scale · N(z) / D(z)` with integer coefficients, highest power first.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalClosedForm {
    order: usize,
    scale: (i64, i64),
    numerator: Vec<i64>,
    denominator: Vec<i64>,
}

impl RationalClosedForm {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Leading scalar factor as `(numerator, denominator)`.
    pub fn scale(&self) -> (i64, i64) {
        self.scale
    }

    pub fn numerator(&self) -> &[i64] {
        &self.numerator
    }

    pub fn denominator(&self) -> &[i64] {
        &self.denominator
    }

    fn scale_f64(&self) -> f64 {
        self.scale.0 as f64 / self.scale.1 as f64
    }

    fn num_f64(&self) -> Vec<f64> {
        self.numerator.iter().map(|&c| c as f64).collect()
    }

    fn den_f64(&self) -> Vec<f64> {
        self.denominator.iter().map(|&c| c as f64).collect()
    }
}

pub fn closed_form(order: usize) -> Result<RationalClosedForm> {
    let (scale, numerator, denominator): ((i64, i64), Vec<i64>, Vec<i64>) = match order {
        1 => ((2, 1), vec![1, -1], vec![1, 1]),
        2 => ((4, 1), vec![1, 0, -1], vec![1, 6, 1]),
        3 => ((2, 3), vec![7, 27, -27, -7], vec![1, 15, 15, 1]),
        4 => ((16, 3), vec![1, 10, 0, -10, -1], vec![1, 28, 70, 28, 1]),
        5 => (
            (2, 15),
            vec![43, 825, 1150, -1150, -825, -43],
            vec![1, 45, 210, 210, 45, 1],
        ),
        6 => (
            (4, 15),
            vec![23, 708, 2355, 0, -2355, -708, -23],
            vec![1, 66, 495, 924, 495, 66, 1],
        ),
        _ => return Err(Error::UnsupportedOrder(order)),
    };
    Ok(RationalClosedForm {
        order,
        scale,
        numerator,
        denominator,
    })
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Horner evaluation with error-free transformations; about twice the
/// working precision.
fn compensated_horner(coeffs: &[f64], x: f64) -> f64 {
    let mut s = coeffs[0];
    let mut err = 0.0;
    for &c in &coeffs[1..] {
        let (p, pe) = two_prod(s, x);
        let (t, se) = two_sum(p, c);
        s = t;
        err = err * x + (pe + se);
    }
    s + err
}

fn derivative(coeffs: &[f64]) -> Vec<f64> {
    let deg = coeffs.len() - 1;
    coeffs[..deg]
        .iter()
        .enumerate()
        .map(|(i, c)| c * (deg - i) as f64)
        .collect()
}

pub fn eval_closed(r: &RationalClosedForm, z: f64) -> Result<f64> {
    let d = compensated_horner(&r.den_f64(), z);
    if d == 0.0 {
        return Err(Error::PoleEvaluation(z));
    }
    Ok(r.scale_f64() * compensated_horner(&r.num_f64(), z) / d)
}

/// `r(x) = offset + Σ_j residues[j] / (x − poles[j])`, poles ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalPartialFraction {
    order: usize,
    offset: f64,
    poles: Vec<f64>,
    residues: Vec<f64>,
}

impl RationalPartialFraction {
    pub fn new(order: usize, offset: f64, poles: Vec<f64>, residues: Vec<f64>) -> Result<Self> {
        if poles.len() != order || residues.len() != order {
            return Err(Error::invalid(format!(
                "order {order} needs {order} poles and residues, got {} and {}",
                poles.len(),
                residues.len()
            )));
        }
        Ok(RationalPartialFraction {
            order,
            offset,
            poles,
            residues,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// The constant term `b`.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Poles `α_j`, ascending (most negative first).
    pub fn poles(&self) -> &[f64] {
        &self.poles
    }

    /// Residues `c_j`, aligned with [`poles`](Self::poles).
    pub fn residues(&self) -> &[f64] {
        &self.residues
    }

    /// Shifts `σ_j = −α_j` for solving `(T + σ_j I) w = …`.
    pub fn shifts(&self) -> Vec<f64> {
        self.poles.iter().map(|a| -a).collect()
    }
}

/// The tabulated partial fractions of r₁, r₃ and r₅.
#[allow(clippy::excessive_precision)]
pub fn partial_fraction(order: usize) -> Result<RationalPartialFraction> {
    let (offset, poles, residues) = match order {
        1 => (2.0, vec![-1.0], vec![-4.0]),
        3 => (
            14.0 / 3.0,
            vec![-13.92820323027551, -1.0, -0.0717967697244908],
            vec![-49.52250037431294, -20.0 / 9.0, -0.2552774034648563],
        ),
        5 => (
            86.0 / 15.0,
            vec![
                -39.863458189061411,
                -3.8518399963191827,
                -1.0,
                -0.25961618368249978,
                -0.025085630936916615,
            ],
            vec![
                -140.08241129102026,
                -6.1858406006156228,
                -92.0 / 75.0,
                -0.41692913805732562,
                -0.088152303639431204,
            ],
        ),
        _ => return Err(Error::UnsupportedOrder(order)),
    };
    RationalPartialFraction::new(order, offset, poles, residues)
}

/// Re-derives the partial fraction of an odd-order closed form from scratch.
pub fn derive_partial_fraction(r: &RationalClosedForm) -> Result<RationalPartialFraction> {
    if r.order % 2 == 0 {
        return Err(Error::UnsupportedOrder(r.order));
    }
    let den = r.den_f64();
    let dden = derivative(&den);
    let num = r.num_f64();
    let degree = den.len() - 1;

    // Scan the negative axis on a log grid for sign changes of D.
    let grid: Vec<f64> = (0..=8000).map(|k| -(-20.0 + k as f64 * 0.005f64).exp()).collect();
    let mut roots = Vec::with_capacity(degree);
    for w in grid.windows(2) {
        // grid runs from near 0 towards −∞; keep brackets as (hi, lo) with lo < hi
        let (hi, lo) = (w[0], w[1]);
        let (fhi, flo) = (compensated_horner(&den, hi), compensated_horner(&den, lo));
        if fhi == 0.0 {
            roots.push(hi);
            continue;
        }
        if flo == 0.0 {
            continue;
        }
        if fhi.signum() == flo.signum() {
            continue;
        }
        let (mut a, mut b, fa) = (lo, hi, flo);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let fm = compensated_horner(&den, mid);
            if fm == 0.0 {
                a = mid;
                b = mid;
                break;
            }
            if fm.signum() == fa.signum() {
                a = mid;
            } else {
                b = mid;
            }
        }
        let mut x = 0.5 * (a + b);
        for _ in 0..3 {
            let step = compensated_horner(&den, x) / compensated_horner(&dden, x);
            if !step.is_finite() {
                break;
            }
            x -= step;
        }
        roots.push(x);
    }
    if roots.len() != degree {
        return Err(Error::RepeatedRoot {
            expected: degree,
            found: roots.len(),
        });
    }
    roots.sort_by(f64::total_cmp);
    let s = r.scale_f64();
    let residues = roots
        .iter()
        .map(|&a| s * compensated_horner(&num, a) / compensated_horner(&dden, a))
        .collect();
    let offset = s * num[0] / den[0];
    RationalPartialFraction::new(r.order, offset, roots, residues)
}

pub fn eval_partial(pf: &RationalPartialFraction, z: f64) -> Result<f64> {
    let mut acc = pf.offset;
    for (&a, &c) in pf.poles.iter().zip(&pf.residues) {
        if z == a {
            return Err(Error::PoleEvaluation(z));
        }
        acc += c / (z - a);
    }
    Ok(acc)
}

/// Tabulates `(z, log z − r_order(z))` over a grid of positive points.
pub fn approximation_error_curve(order: usize, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let r = closed_form(order)?;
    grid.iter()
        .map(|&z| {
            if !(z > 0.0) {
                return Err(Error::invalid(format!("error curve needs z > 0, got {z}")));
            }
            Ok((z, z.ln() - eval_closed(&r, z)?))
        })
        .collect()
}
