//! Dense polynomials with ascending coefficients and small linear algebra
//! helpers on complex matrices.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result, C64};

pub fn mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn add_into(acc: &mut Vec<C64>, a: &[C64], scale: C64) {
    if acc.len() < a.len() {
        acc.resize(a.len(), C64::new(0.0, 0.0));
    }
    for (x, y) in acc.iter_mut().zip(a) {
        *x += y * scale;
    }
}

/// `∏ (p - r)` over the given roots.
pub fn from_roots(roots: &[C64]) -> Vec<C64> {
    roots.iter().fold(vec![C64::new(1.0, 0.0)], |acc, r| {
        mul(&acc, &[-r, C64::new(1.0, 0.0)])
    })
}

/// Value and first derivative.
pub fn eval_d(a: &[C64], p: C64) -> (C64, C64) {
    let mut v = C64::new(0.0, 0.0);
    let mut d = C64::new(0.0, 0.0);
    for c in a.iter().rev() {
        d = d * p + v;
        v = v * p + c;
    }
    (v, d)
}

pub fn eval(a: &[C64], p: C64) -> C64 {
    eval_d(a, p).0
}

/// `Σ |a_j| |p|^j`, the natural scale for the rounding error of `eval`.
pub fn abs_eval(a: &[C64], p: C64) -> f64 {
    let r = p.norm();
    a.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
}

/// All roots of a polynomial with non-vanishing leading coefficient.
///
/// Eigenvalues of the companion matrix, each polished by a few Newton steps.
pub fn roots(a: &[C64]) -> Result<Vec<C64>> {
    let deg = a.len() - 1;
    let lead = a[deg];
    if lead == C64::new(0.0, 0.0) {
        return Err(Error::InvalidParameters("leading coefficient vanishes".into()));
    }
    if deg == 0 {
        return Ok(Vec::new());
    }
    let mut comp = DMatrix::<C64>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -a[i] / lead;
    }
    let t = comp.schur().unpack().1;
    let mut out: Vec<C64> = (0..deg).map(|i| t[(i, i)]).collect();
    for r in out.iter_mut() {
        for _ in 0..4 {
            let (v, d) = eval_d(a, *r);
            if d == C64::new(0.0, 0.0) {
                break;
            }
            let step = v / d;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            *r -= step;
            if step.norm() <= 1e-16 * r.norm() {
                break;
            }
        }
    }
    Ok(out)
}

/// Reciprocal condition estimate from the singular values.
pub fn rcond(m: &DMatrix<C64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// Matrices whose reciprocal condition falls below this are treated as singular.
pub const SINGULAR_RCOND: f64 = 1e-13;

pub fn solve(m: &DMatrix<C64>, rhs: &DVector<C64>, what: &str) -> Result<DVector<C64>> {
    if rcond(m) < SINGULAR_RCOND {
        return Err(Error::SingularJacobian(what.to_string()));
    }
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::SingularJacobian(what.to_string()))
}

pub fn inverse(m: &DMatrix<C64>, what: &str) -> Result<DMatrix<C64>> {
    if rcond(m) < SINGULAR_RCOND {
        return Err(Error::SingularJacobian(what.to_string()));
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularJacobian(what.to_string()))
}
