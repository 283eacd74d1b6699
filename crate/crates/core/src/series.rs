//! Truncated Laurent series at `p = ∞` and `p = 0`.
//!
//! A series is stored in its local variable `w` (`w = 1/p` at infinity,
//! `w = p` at zero) as `Σ_j coeffs[j] w^(lead + j) + O(w^(lead + len))`.
//! Every operation returns only the coefficients it can prove from the
//! inputs' windows; nothing is padded.

use crate::{Error, Result, C64};

/// Expansion point of a series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Center {
    AtInfinity,
    AtZero,
}

impl Center {
    /// Exponent of `p` carried by the local-variable exponent `e`.
    pub fn p_power(self, e: i32) -> i32 {
        match self {
            Center::AtInfinity => -e,
            Center::AtZero => e,
        }
    }

    /// Local-variable exponent carrying `p^k`.
    pub fn w_power(self, k: i32) -> i32 {
        self.p_power(k)
    }
}

/// Tolerance used when a caller-normalised leading coefficient must equal one.
const UNIT_LEAD_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSeries {
    center: Center,
    lead: i32,
    coeffs: Vec<C64>,
}

impl TruncatedSeries {
    /// Builds a series from local-variable coefficients starting at `w^lead`.
    pub fn new(center: Center, lead: i32, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Series("truncation length must be positive".into()));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Series("non-finite coefficient".into()));
        }
        Ok(Self::normalized(center, lead, coeffs))
    }

    /// Builds a series from `(power of p, coefficient)` terms, known up to
    /// (but excluding) local exponent `order`.
    pub fn from_p_terms(center: Center, terms: &[(i32, C64)], order: i32) -> Result<Self> {
        let min_e = terms
            .iter()
            .map(|&(k, _)| center.w_power(k))
            .min()
            .unwrap_or(order - 1)
            .min(order - 1);
        let mut coeffs = vec![C64::new(0.0, 0.0); (order - min_e) as usize];
        for &(k, c) in terms {
            let e = center.w_power(k);
            if e >= order {
                return Err(Error::Series(format!(
                    "term p^{k} lies outside the window O(w^{order})"
                )));
            }
            coeffs[(e - min_e) as usize] += c;
        }
        Self::new(center, min_e, coeffs)
    }

    /// The constant `c` known to `len` terms.
    pub fn constant(center: Center, c: C64, len: usize) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); len.max(1)];
        coeffs[0] = c;
        Self::normalized(center, 0, coeffs)
    }

    /// The zero series known up to `O(w^order)`.
    pub fn zero(center: Center, order: i32) -> Self {
        Self::normalized(center, order - 1, vec![C64::new(0.0, 0.0)])
    }

    fn normalized(center: Center, lead: i32, mut coeffs: Vec<C64>) -> Self {
        let order = lead + coeffs.len() as i32;
        match coeffs.iter().position(|c| *c != C64::new(0.0, 0.0)) {
            Some(0) => Self { center, lead, coeffs },
            Some(first) => {
                coeffs.drain(..first);
                Self {
                    center,
                    lead: lead + first as i32,
                    coeffs,
                }
            }
            None => {
                let zlead = 0.min(order - 1);
                Self {
                    center,
                    lead: zlead,
                    coeffs: vec![C64::new(0.0, 0.0); (order - zlead) as usize],
                }
            }
        }
    }

    pub fn center(&self) -> Center {
        self.center
    }

    pub fn lead(&self) -> i32 {
        self.lead
    }

    /// Truncation length.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// First local exponent that is not known.
    pub fn order(&self) -> i32 {
        self.lead + self.coeffs.len() as i32
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == C64::new(0.0, 0.0))
    }

    /// Coefficient of `w^e`; `None` when `e` lies beyond the window.
    pub fn coeff_w(&self, e: i32) -> Option<C64> {
        if e >= self.order() {
            None
        } else if e < self.lead {
            Some(C64::new(0.0, 0.0))
        } else {
            Some(self.coeffs[(e - self.lead) as usize])
        }
    }

    /// Coefficient of `p^k`; `None` when it lies beyond the window.
    pub fn coeff_p(&self, k: i32) -> Option<C64> {
        self.coeff_w(self.center.w_power(k))
    }

    /// Evaluates the retained terms at `p`.
    pub fn eval(&self, p: C64) -> C64 {
        let w = match self.center {
            Center::AtInfinity => p.inv(),
            Center::AtZero => p,
        };
        let mut acc = C64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * w + c;
        }
        acc * w.powi(self.lead)
    }

    fn check_center(&self, other: &Self) -> Result<()> {
        if self.center != other.center {
            Err(Error::Series(format!(
                "center mismatch: {:?} vs {:?}",
                self.center, other.center
            )))
        } else {
            Ok(())
        }
    }

    fn dense_from(&self, start: i32, order: i32) -> Vec<C64> {
        (start..order)
            .map(|e| self.coeff_w(e).expect("exponent inside window"))
            .collect()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_center(other)?;
        let lead = self.lead.min(other.lead);
        let order = self.order().min(other.order());
        if order <= lead {
            return Ok(Self::zero(self.center, order));
        }
        let a = self.dense_from(lead, order);
        let b = other.dense_from(lead, order);
        let coeffs = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        Ok(Self::normalized(self.center, lead, coeffs))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        let coeffs = self.coeffs.iter().map(|c| c * s).collect();
        Self::normalized(self.center, self.lead, coeffs)
    }

    /// Multiplies by `w^shift`.
    pub fn shift_w(&self, shift: i32) -> Self {
        Self {
            center: self.center,
            lead: self.lead + shift,
            coeffs: self.coeffs.clone(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_center(other)?;
        let n = self.len().min(other.len());
        let coeffs = mul_dense(&self.coeffs, &other.coeffs, n);
        Ok(Self::normalized(self.center, self.lead + other.lead, coeffs))
    }

    pub fn invert(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::Series("cannot invert a zero-leading series".into()));
        }
        let coeffs = inv_dense(&self.coeffs, self.len());
        Ok(Self::normalized(self.center, -self.lead, coeffs))
    }

    /// Non-negative integer power by repeated multiplication.
    pub fn powi(&self, n: u32) -> Result<Self> {
        let mut acc = Self::constant(self.center, C64::new(1.0, 0.0), self.len());
        for _ in 0..n {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// `exp` of a series vanishing at the center.
    pub fn exp(&self) -> Result<Self> {
        if self.is_zero() {
            return Ok(Self::constant(self.center, C64::new(1.0, 0.0), self.order().max(1) as usize));
        }
        if self.lead < 1 {
            return Err(Error::Series(
                "exp requires a series vanishing at the center".into(),
            ));
        }
        let s = self.dense_from(0, self.order());
        Ok(Self::normalized(self.center, 0, exp_dense(&s)))
    }

    /// `log` of a series of the form `1 + (vanishing part)`.
    pub fn log(&self) -> Result<Self> {
        let a = self.unit_lead_dense("log")?;
        Ok(Self::normalized(self.center, 0, log_dense(&a)))
    }

    /// Real power of a series of the form `1 + (vanishing part)`.
    pub fn pow(&self, r: f64) -> Result<Self> {
        let a = self.unit_lead_dense("pow")?;
        Ok(Self::normalized(self.center, 0, pow_dense(&a, r)))
    }

    fn unit_lead_dense(&self, op: &str) -> Result<Vec<C64>> {
        if self.lead != 0 || (self.coeffs[0] - C64::new(1.0, 0.0)).norm() > UNIT_LEAD_TOL {
            return Err(Error::Series(format!(
                "{op} requires a series of the form 1 + (vanishing part)"
            )));
        }
        let mut a = self.coeffs.clone();
        a[0] = C64::new(1.0, 0.0);
        Ok(a)
    }

    /// Compositional inverse of `ζ = A(p)` for a series whose leading power
    /// of `p` is `±1`.
    ///
    /// The result expresses `p` as a series in `ζ`. A leading `p^1` keeps the
    /// center; a leading `p^{-1}` swaps zero and infinity. In both cases the
    /// result again has leading power `±1` in the `p`-view of its center.
    pub fn revert(&self) -> Result<Self> {
        if self.lead.abs() != 1 || self.is_zero() {
            return Err(Error::Series(format!(
                "revert requires leading exponent ±1, got w^{}",
                self.lead
            )));
        }
        // f = series with leading w^1 in the input variable w.
        let f = if self.lead == 1 {
            self.clone()
        } else {
            self.invert()?
        };
        // g expresses the input w in the local variable of ζ, which is ζ
        // itself when ℓ = 1 and 1/ζ when ℓ = -1
        let g = revert_dense(&f.coeffs);
        let out_center = if self.lead == 1 {
            Center::AtZero
        } else {
            Center::AtInfinity
        };
        let w_of_out = Self::normalized(out_center, 1, g);
        match self.center {
            Center::AtZero => Ok(w_of_out),
            Center::AtInfinity => w_of_out.invert(),
        }
    }

    /// Substitutes `inner` for the local variable of `self`.
    ///
    /// `inner` expresses the local variable of `self` (`p` at zero, `1/p` at
    /// infinity) as a series in its own local variable. It must vanish at its own center (leading exponent ≥ 1); the
    /// result is a series in the local variable of `inner`.
    pub fn substitute(&self, inner: &Self) -> Result<Self> {
        if inner.is_zero() || inner.lead < 1 {
            return Err(Error::Series(
                "substitution requires an inner series vanishing at its center".into(),
            ));
        }
        let l = inner.lead;
        let rel = ((l as usize) * self.len()).min(inner.len());
        let c0 = inner.coeffs[0];
        // u = inner / (c0 v^l) = 1 + O(v)
        let u: Vec<C64> = inner.coeffs.iter().take(rel).map(|c| c / c0).collect();
        let w_rel = Self::normalized(inner.center, 0, u);
        let w = w_rel.scale(c0).shift_w(l);
        // Horner: g = a0 + w(a1 + w(a2 + ...))
        let mut g = Self::zero(inner.center, rel as i32);
        for a in self.coeffs.iter().rev() {
            g = g.mul_window(&w, rel)?;
            g = g.add(&Self::constant(inner.center, *a, rel))?;
        }
        let lead_factor = if self.lead == 0 {
            Self::constant(inner.center, C64::new(1.0, 0.0), rel)
        } else {
            w_rel
                .pow(self.lead as f64)?
                .scale(c0.powi(self.lead))
                .shift_w(l * self.lead)
        };
        let out = g.mul(&lead_factor)?;
        let n = out.len().min(rel);
        Ok(Self::normalized(out.center, out.lead, out.coeffs[..n].to_vec()))
    }

    // product keeping at most `n` relative terms, used where one factor has a
    // shifted lead but a long window
    fn mul_window(&self, other: &Self, n: usize) -> Result<Self> {
        let p = self.mul(other)?;
        let keep = p.len().min(n).max(1);
        Ok(Self::normalized(p.center, p.lead, p.coeffs[..keep].to_vec()))
    }

    /// Splits into the parts with non-negative and with negative powers of `p`.
    ///
    /// Both parts keep the input's window, so their sum is the input.
    pub fn split_parts(&self) -> Result<(Self, Self)> {
        let order = self.order();
        // exponent of w carrying p^0 is 0 at both centers
        let (poly_pred, finite_ok): (fn(i32) -> bool, bool) = match self.center {
            Center::AtInfinity => (|e| e <= 0, order > 0),
            Center::AtZero => (|e| e >= 0, order >= 0),
        };
        if !finite_ok {
            return Err(Error::Series(format!(
                "insufficient window O(w^{order}) to separate polynomial and negative parts"
            )));
        }
        let mut poly = Vec::with_capacity(self.len());
        let mut neg = Vec::with_capacity(self.len());
        for (j, c) in self.coeffs.iter().enumerate() {
            let e = self.lead + j as i32;
            if poly_pred(e) {
                poly.push(*c);
                neg.push(C64::new(0.0, 0.0));
            } else {
                poly.push(C64::new(0.0, 0.0));
                neg.push(*c);
            }
        }
        Ok((
            Self::normalized(self.center, self.lead, poly),
            Self::normalized(self.center, self.lead, neg),
        ))
    }

    /// The finite Laurent polynomial made of the known terms.
    pub fn to_laurent_poly(&self) -> LaurentPoly {
        let ks: Vec<i32> = (0..self.len())
            .filter(|&j| self.coeffs[j] != C64::new(0.0, 0.0))
            .map(|j| self.center.p_power(self.lead + j as i32))
            .collect();
        if ks.is_empty() {
            return LaurentPoly::new(0, vec![C64::new(0.0, 0.0)]);
        }
        let low = *ks.iter().min().unwrap();
        let high = *ks.iter().max().unwrap();
        let mut coeffs = vec![C64::new(0.0, 0.0); (high - low + 1) as usize];
        for (j, c) in self.coeffs.iter().enumerate() {
            if *c != C64::new(0.0, 0.0) {
                coeffs[(self.center.p_power(self.lead + j as i32) - low) as usize] = *c;
            }
        }
        LaurentPoly::new(low, coeffs)
    }

    /// Largest coefficient difference over the common window.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_center(other)?;
        let lo = self.lead.min(other.lead);
        let hi = self.order().min(other.order());
        Ok((lo..hi)
            .map(|e| (self.coeff_w(e).unwrap() - other.coeff_w(e).unwrap()).norm())
            .fold(0.0, f64::max))
    }
}

/// A finite Laurent polynomial `Σ coeffs[j] p^(low + j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentPoly {
    low: i32,
    coeffs: Vec<C64>,
}

impl LaurentPoly {
    pub fn new(low: i32, coeffs: Vec<C64>) -> Self {
        Self { low, coeffs }
    }

    pub fn low(&self) -> i32 {
        self.low
    }

    pub fn high(&self) -> i32 {
        self.low + self.coeffs.len() as i32 - 1
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Coefficient of `p^k`, zero outside the stored range.
    pub fn coeff(&self, k: i32) -> C64 {
        if k < self.low || k > self.high() {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(k - self.low) as usize]
        }
    }

    pub fn eval(&self, p: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * p + c;
        }
        acc * p.powi(self.low)
    }

    pub fn derivative(&self) -> LaurentPoly {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * (self.low + j as i32) as f64)
            .collect();
        LaurentPoly::new(self.low - 1, coeffs)
    }

    /// `p · d/dp`, which keeps the exponent range.
    pub fn euler_derivative(&self) -> LaurentPoly {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * (self.low + j as i32) as f64)
            .collect();
        LaurentPoly::new(self.low, coeffs)
    }

    pub fn sub(&self, other: &LaurentPoly) -> LaurentPoly {
        let low = self.low.min(other.low);
        let high = self.high().max(other.high());
        let coeffs = (low..=high).map(|k| self.coeff(k) - other.coeff(k)).collect();
        LaurentPoly::new(low, coeffs)
    }

    pub fn scale(&self, s: C64) -> LaurentPoly {
        LaurentPoly::new(self.low, self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

pub(crate) fn mul_dense(a: &[C64], b: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (i, ai) in a.iter().enumerate().take(n) {
        if *ai == C64::new(0.0, 0.0) {
            continue;
        }
        for (j, bj) in b.iter().enumerate().take(n - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

pub(crate) fn inv_dense(a: &[C64], n: usize) -> Vec<C64> {
    let inv0 = a[0].inv();
    let mut b = vec![C64::new(0.0, 0.0); n];
    b[0] = inv0;
    for k in 1..n {
        let mut acc = C64::new(0.0, 0.0);
        for j in 1..=k.min(a.len() - 1) {
            acc += a[j] * b[k - j];
        }
        b[k] = -acc * inv0;
    }
    b
}

// s[0] must be zero
fn exp_dense(s: &[C64]) -> Vec<C64> {
    let n = s.len();
    let mut e = vec![C64::new(0.0, 0.0); n];
    e[0] = C64::new(1.0, 0.0);
    for k in 1..n {
        let mut acc = C64::new(0.0, 0.0);
        for j in 1..=k {
            acc += s[j] * e[k - j] * j as f64;
        }
        e[k] = acc / k as f64;
    }
    e
}

// a[0] must be one
fn log_dense(a: &[C64]) -> Vec<C64> {
    let n = a.len();
    let mut l = vec![C64::new(0.0, 0.0); n];
    for k in 1..n {
        let mut acc = C64::new(0.0, 0.0);
        for j in 1..k {
            acc += l[j] * a[k - j] * j as f64;
        }
        l[k] = a[k] - acc / k as f64;
    }
    l
}

// a[0] must be one
fn pow_dense(a: &[C64], r: f64) -> Vec<C64> {
    let n = a.len();
    let mut p = vec![C64::new(0.0, 0.0); n];
    p[0] = C64::new(1.0, 0.0);
    for k in 1..n {
        let mut acc = C64::new(0.0, 0.0);
        for j in 1..=k {
            acc += a[j] * p[k - j] * (r * j as f64 - (k - j) as f64);
        }
        p[k] = acc / k as f64;
    }
    p
}

/// Reversion of `f(x) = x (f[0] + f[1] x + ...)` by Lagrange inversion:
/// `[y^m] g = (1/m) [x^(m-1)] (x / f(x))^m`.
fn revert_dense(f: &[C64]) -> Vec<C64> {
    let n = f.len();
    let h = inv_dense(f, n);
    let mut g = vec![C64::new(0.0, 0.0); n];
    let mut hm = vec![C64::new(0.0, 0.0); n];
    hm[0] = C64::new(1.0, 0.0);
    for m in 1..=n {
        hm = mul_dense(&hm, &h, n);
        g[m - 1] = hm[m - 1] / m as f64;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn add_unions_coefficients() {
        let a = TruncatedSeries::from_p_terms(Center::AtInfinity, &[(1, c(1.0)), (0, c(2.0))], 4)
            .unwrap();
        let b = TruncatedSeries::from_p_terms(Center::AtInfinity, &[(-1, c(3.0))], 4).unwrap();
        let s = a.add(&b).unwrap();
        assert_eq!(s.coeff_p(1), Some(c(1.0)));
        assert_eq!(s.coeff_p(0), Some(c(2.0)));
        assert_eq!(s.coeff_p(-1), Some(c(3.0)));
        assert_eq!(s.order(), 4);
    }

    #[test]
    fn mul_by_inverse_is_one() {
        let a = TruncatedSeries::from_p_terms(
            Center::AtInfinity,
            &[(1, c(1.0)), (0, c(-4.0)), (-1, c(3.0))],
            10,
        )
        .unwrap();
        let one = a.mul(&a.invert().unwrap()).unwrap();
        assert_eq!(one.lead(), 0);
        assert!(close(one.coeffs()[0], c(1.0), 1e-14));
        for k in 1..one.len() {
            assert!(one.coeffs()[k].norm() < 1e-12, "k={k}: {}", one.coeffs()[k]);
        }
    }

    #[test]
    fn scale_is_linear() {
        let b = C64::new(0.3, -1.2);
        let a = TruncatedSeries::from_p_terms(Center::AtInfinity, &[(1, c(1.0)), (0, b)], 3)
            .unwrap();
        let s = a.scale(c(2.0));
        assert_eq!(s.coeff_p(1), Some(c(2.0)));
        assert_eq!(s.coeff_p(0), Some(b * 2.0));
    }

    #[test]
    fn center_mismatch_is_an_error() {
        let a = TruncatedSeries::constant(Center::AtZero, c(1.0), 3);
        let b = TruncatedSeries::constant(Center::AtInfinity, c(1.0), 3);
        assert!(a.add(&b).is_err());
        assert!(a.mul(&b).is_err());
    }

    #[test]
    fn invert_zero_series_fails() {
        assert!(TruncatedSeries::zero(Center::AtZero, 4).invert().is_err());
    }

    #[test]
    fn exp_of_zero_is_one() {
        let e = TruncatedSeries::zero(Center::AtZero, 5).exp().unwrap();
        assert_eq!(e.coeff_w(0), Some(c(1.0)));
        for k in 1..5 {
            assert_eq!(e.coeff_w(k), Some(c(0.0)));
        }
    }

    #[test]
    fn exp_requires_vanishing_series() {
        let a = TruncatedSeries::constant(Center::AtZero, c(1.0), 4);
        assert!(a.exp().is_err());
        assert!(a.shift_w(-1).log().is_err());
    }

    #[test]
    fn sqrt_matches_binomial_series() {
        // binomial oracle: C(1/2, k)
        let n = 12;
        let mut expect = vec![c(1.0)];
        for k in 1..n {
            let prev = expect[k - 1];
            expect.push(prev * (0.5 - (k as f64 - 1.0)) / k as f64);
        }
        let mut coeffs = vec![c(0.0); n];
        coeffs[0] = c(1.0);
        coeffs[1] = c(1.0);
        let a = TruncatedSeries::new(Center::AtZero, 0, coeffs).unwrap();
        let r = a.pow(0.5).unwrap();
        assert!(close(r.coeff_w(1).unwrap(), c(0.5), 1e-15));
        assert!(close(r.coeff_w(2).unwrap(), c(-0.125), 1e-15));
        assert!(close(r.coeff_w(3).unwrap(), c(0.0625), 1e-15));
        for (k, e) in expect.iter().enumerate() {
            assert!(close(r.coeff_w(k as i32).unwrap(), *e, 1e-14));
        }
    }

    #[test]
    fn log_inverts_exp_on_linear_series() {
        let cc = C64::new(-0.7, 2.1);
        let s = TruncatedSeries::new(Center::AtInfinity, 1, vec![cc, c(0.0), c(0.0), c(0.0)])
            .unwrap();
        let back = s.exp().unwrap().log().unwrap();
        assert!(back.max_abs_diff(&s).unwrap() < 1e-13);
    }

    #[test]
    fn split_of_laurent_polynomial() {
        let a = TruncatedSeries::from_p_terms(
            Center::AtInfinity,
            &[(1, c(1.0)), (0, c(2.0)), (-1, c(3.0))],
            5,
        )
        .unwrap();
        let (poly, neg) = a.split_parts().unwrap();
        assert_eq!(poly.coeff_p(1), Some(c(1.0)));
        assert_eq!(poly.coeff_p(0), Some(c(2.0)));
        assert_eq!(poly.coeff_p(-1), Some(c(0.0)));
        assert_eq!(neg.coeff_p(-1), Some(c(3.0)));
        assert_eq!(neg.coeff_p(0), Some(c(0.0)));
        let pure = TruncatedSeries::from_p_terms(Center::AtInfinity, &[(2, c(1.0))], 3).unwrap();
        let (poly, neg) = pure.split_parts().unwrap();
        assert_eq!(poly, pure);
        assert!(neg.is_zero());
    }

    #[test]
    fn split_of_toda_zbar() {
        let zbar = TruncatedSeries::from_p_terms(
            Center::AtZero,
            &[(-1, c(3.0)), (0, c(-4.0)), (1, c(1.0))],
            6,
        )
        .unwrap();
        let (poly, neg) = zbar.split_parts().unwrap();
        let bbar = neg.to_laurent_poly();
        assert_eq!(bbar.coeff(-1), c(3.0));
        assert_eq!(bbar.high(), -1);
        assert_eq!(poly.coeff_p(0), Some(c(-4.0)));
        assert_eq!(poly.coeff_p(1), Some(c(1.0)));
    }

    #[test]
    fn split_needs_constant_term_in_window() {
        let a = TruncatedSeries::new(Center::AtInfinity, -3, vec![c(1.0), c(2.0)]).unwrap();
        assert!(a.split_parts().is_err());
    }

    #[test]
    fn revert_of_inverse_p_is_self_inverse() {
        let a = TruncatedSeries::from_p_terms(Center::AtZero, &[(-1, c(1.0))], 6).unwrap();
        let r = a.revert().unwrap();
        assert_eq!(r.center(), Center::AtInfinity);
        assert_eq!(r.coeff_p(-1), Some(c(1.0)));
        for k in -6..-1 {
            assert_eq!(r.coeff_p(k), Some(c(0.0)));
        }
    }

    // naive oracle: substitute p = Σ_j r_j ζ^{-1-j} into Σ_k a_k p^k by
    // explicit truncated polynomial arithmetic in x = 1/ζ.
    fn naive_compose_zero_into_inf(a_terms: &[(i32, C64)], r: &[C64], n: usize) -> Vec<C64> {
        // p = x (r0 + r1 x + ...), powers of x from 0..n
        let mul = |u: &[C64], v: &[C64]| -> Vec<C64> {
            let mut o = vec![c(0.0); n];
            for i in 0..n {
                for j in 0..n - i {
                    o[i + j] += u[i] * v[j];
                }
            }
            o
        };
        let mut base = vec![c(0.0); n];
        base[..r.len().min(n)].copy_from_slice(&r[..r.len().min(n)]);
        // 1/(r0 + r1 x + ...)
        let mut inv = vec![c(0.0); n];
        inv[0] = base[0].inv();
        for k in 1..n {
            let mut acc = c(0.0);
            for j in 1..=k {
                acc += base[j] * inv[k - j];
            }
            inv[k] = -acc * inv[0];
        }
        // result coefficients of x^e for e in -1..n-1 -> index e+1
        let mut out = vec![c(0.0); n + 1];
        for &(k, ak) in a_terms {
            let (fac, shift) = if k >= 0 {
                let mut f = vec![c(0.0); n];
                f[0] = c(1.0);
                for _ in 0..k {
                    f = mul(&f, &base);
                }
                (f, k)
            } else {
                let mut f = vec![c(0.0); n];
                f[0] = c(1.0);
                for _ in 0..(-k) {
                    f = mul(&f, &inv);
                }
                (f, k)
            };
            for (i, v) in fac.iter().enumerate() {
                let e = i as i32 + shift;
                if e >= -1 && ((e + 1) as usize) < out.len() {
                    out[(e + 1) as usize] += ak * v;
                }
            }
        }
        out
    }

    #[test]
    fn revert_toda_zbar_reproduces_log_coefficient() {
        let n = 10;
        let zbar = TruncatedSeries::from_p_terms(
            Center::AtZero,
            &[(-1, c(3.0)), (0, c(-4.0)), (1, c(1.0))],
            n - 1,
        )
        .unwrap();
        let pbar = zbar.revert().unwrap();
        assert_eq!(pbar.center(), Center::AtInfinity);
        // brute-force check z̄(p̄(ζ)) = ζ
        let r: Vec<C64> = (0..pbar.len()).map(|j| pbar.coeff_w(1 + j as i32).unwrap()).collect();
        let comp = naive_compose_zero_into_inf(&[(-1, c(3.0)), (0, c(-4.0)), (1, c(1.0))], &r, 8);
        assert!(close(comp[0], c(1.0), 1e-12));
        // the p^{-1} term is only known through x^{n-2}
        for v in &comp[1..8] {
            assert!(v.norm() < 1e-10, "{v}");
        }
        // log p̄ = -log ζ + q̄0 + q̄1 ζ^{-1} + ...
        let c0 = pbar.coeffs()[0];
        let log_tail = pbar.scale(c0.inv()).shift_w(-1).log().unwrap();
        assert!(close(c0.ln(), c(3.0f64.ln()), 1e-14));
        assert!(close(log_tail.coeff_w(1).unwrap(), c(-4.0), 1e-12));
    }

    #[test]
    fn substitute_reproduces_identity_after_revert() {
        let zbar = TruncatedSeries::from_p_terms(
            Center::AtZero,
            &[(-1, C64::new(2.0, 0.5)), (0, c(0.3)), (1, c(-1.0)), (2, c(0.25))],
            10,
        )
        .unwrap();
        let pbar = zbar.revert().unwrap();
        let id = zbar.substitute(&pbar).unwrap();
        assert_eq!(id.center(), Center::AtInfinity);
        assert!(close(id.coeff_p(1).unwrap(), c(1.0), 1e-12));
        for k in -5..1 {
            assert!(id.coeff_p(k).unwrap().norm() < 1e-10);
        }
    }

    fn arb_c64() -> impl Strategy<Value = C64> {
        (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b)| C64::new(a, b))
    }

    fn arb_unit_series(center: Center) -> impl Strategy<Value = TruncatedSeries> {
        prop::collection::vec(arb_c64(), 4..16).prop_map(move |mut v| {
            v[0] = C64::new(1.0, 0.0);
            for (k, x) in v.iter_mut().enumerate().skip(1) {
                *x *= 0.5f64.powi(k as i32);
            }
            TruncatedSeries::new(center, 0, v).unwrap()
        })
    }

    proptest! {
        #[test]
        fn exp_log_roundtrip(a in arb_unit_series(Center::AtZero)) {
            let back = a.log().unwrap().exp().unwrap();
            prop_assert!(back.max_abs_diff(&a).unwrap() < 1e-11);
        }

        #[test]
        fn pow_times_inverse_pow_is_one(a in arb_unit_series(Center::AtInfinity), r in -3.0f64..3.0) {
            let prod = a.pow(r).unwrap().mul(&a.pow(-r).unwrap()).unwrap();
            let one = TruncatedSeries::constant(Center::AtInfinity, C64::new(1.0, 0.0), prod.len());
            prop_assert!(prod.max_abs_diff(&one).unwrap() < 1e-10);
        }

        #[test]
        fn split_is_linear(a in arb_unit_series(Center::AtInfinity), b in arb_unit_series(Center::AtInfinity)) {
            let a = a.shift_w(-2);
            let b = b.shift_w(-1);
            let (pa, na) = a.split_parts().unwrap();
            let (pb, nb) = b.split_parts().unwrap();
            let (ps, ns) = a.add(&b).unwrap().split_parts().unwrap();
            prop_assert!(ps.max_abs_diff(&pa.add(&pb).unwrap()).unwrap() < 1e-14);
            prop_assert!(ns.max_abs_diff(&na.add(&nb).unwrap()).unwrap() < 1e-14);
            prop_assert!(pa.add(&na).unwrap().max_abs_diff(&a).unwrap() == 0.0);
        }

        #[test]
        fn revert_is_an_involution(a in arb_unit_series(Center::AtZero), s in arb_c64()) {
            prop_assume!(s.norm() > 0.3);
            let a = a.scale(s).shift_w(-1);
            let once = a.revert().unwrap();
            let twice = once.revert().unwrap();
            prop_assert_eq!(twice.center(), a.center());
            prop_assert!(twice.max_abs_diff(&a).unwrap() < 1e-9 * (1.0 + s.norm()).powi(4));
        }

        #[test]
        fn revert_composes_to_identity(a in arb_unit_series(Center::AtZero), s in arb_c64()) {
            prop_assume!(s.norm() > 0.3);
            prop_assume!(a.len() <= 24);
            let a = a.scale(s).shift_w(1);
            let r = a.revert().unwrap();
            let id = a.substitute(&r).unwrap();
            // size of the terms that cancel in each coefficient
            let abs = |x: &TruncatedSeries| {
                let c = x.coeffs().iter().map(|z| C64::new(z.norm(), 0.0)).collect();
                TruncatedSeries::new(x.center(), x.lead(), c).unwrap()
            };
            let terms = abs(&a).substitute(&abs(&r)).unwrap();
            prop_assert!((id.coeff_w(1).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-12);
            for e in 2..id.order() {
                let c = id.coeff_w(e).unwrap().norm();
                let bound = 1e-13 * f64::from(e * e) * terms.coeff_w(e).unwrap().norm();
                prop_assert!(c <= bound, "e = {}: {:e} vs {:e}", e, c, bound);
            }
        }
    }
}
