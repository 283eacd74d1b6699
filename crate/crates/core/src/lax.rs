//! Lax functions `z(p)` at infinity and `z̄(p)` at zero, flow generators
//! `B_n = (z^n)_{≥0}`, `B̄_n = (z̄^n)_{<0}`, and the induced evolution of the
//! natural parameters.

use crate::potential::{Case, LGPotential};
use crate::series::{Center, LaurentPoly, TruncatedSeries};
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    /// `z = λ^{1/M̃}` expanded at `p = ∞`.
    Z,
    /// `z̄` expanded at `p = 0`.
    Zbar,
}

/// A flow `t_n` (side `Z`) or `t̄_n` (side `Zbar`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Flow {
    pub side: Side,
    pub n: u32,
}

impl Flow {
    pub fn t(n: u32) -> Self {
        Self { side: Side::Z, n }
    }

    pub fn tbar(n: u32) -> Self {
        Self { side: Side::Zbar, n }
    }
}

/// Logarithmic constants fixing the branch of `z̄`.
///
/// `log_pi` is a logarithm of `∏(-b_i)^{κ_i}`; `log_cn` (Case II) is a
/// logarithm of `c_N`. Case I uses `φ = log_pi / N`; Case II uses
/// `φ = log_cn / N` and `log_pi` as the constant term of `log λ` at `p = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Branch {
    pub log_pi: C64,
    pub log_cn: C64,
}

impl Branch {
    /// Principal values. Case I takes the product `∏(-b_i)^{κ_i}` first
    /// (principal power per factor) and then its principal logarithm; Case II
    /// sums `κ_i log(-b_i)` term by term.
    pub fn principal(pot: &LGPotential) -> Self {
        let log_pi = match pot.case() {
            Case::I => pi_product(pot).ln(),
            Case::II => pot
                .kappa()
                .iter()
                .zip(pot.b())
                .map(|(k, b)| (-b).ln() * *k)
                .sum(),
        };
        let log_cn = pot.c().last().map(|c| c.ln()).unwrap_or_default();
        Self { log_pi, log_cn }
    }

    /// Continues `self`, valid at `base`, to the nearby potential `to`.
    pub fn continued(&self, base: &LGPotential, to: &LGPotential) -> Self {
        let dpi: C64 = base
            .kappa()
            .iter()
            .zip(base.b().iter().zip(to.b()))
            .map(|(k, (b0, b1))| (b1 / b0).ln() * *k)
            .sum();
        let dcn = match (base.c().last(), to.c().last()) {
            (Some(c0), Some(c1)) => (c1 / c0).ln(),
            _ => C64::new(0.0, 0.0),
        };
        Self {
            log_pi: self.log_pi + dpi,
            log_cn: self.log_cn + dcn,
        }
    }

    /// `φ`, with `e^{Nφ}` equal to `∏(-b_i)^{κ_i}` (Case I) or `c_N` (Case II).
    pub fn phi(&self, pot: &LGPotential) -> C64 {
        let n = pot.n() as f64;
        match pot.case() {
            Case::I => self.log_pi / n,
            Case::II => self.log_cn / n,
        }
    }
}

/// `∏(-b_i)^{κ_i}` with principal powers.
pub fn pi_product(pot: &LGPotential) -> C64 {
    pot.kappa()
        .iter()
        .zip(pot.b())
        .map(|(k, b)| (-b).powf(*k))
        .product()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaxExpansion {
    pub side: Side,
    pub series: TruncatedSeries,
    pub u1: C64,
    pub u2: C64,
    pub phi: C64,
}

const MIN_WINDOW: usize = 4;

/// Window long enough for generators up to `max_flow`.
pub fn default_window(pot: &LGPotential, max_flow: u32) -> usize {
    2 * max_flow as usize + pot.k_dim() + 4
}

/// `z` at infinity or `z̄` at zero with `l` retained terms.
pub fn expand_lax(pot: &LGPotential, side: Side, l: usize) -> Result<LaxExpansion> {
    expand_lax_with_branch(pot, side, l, &Branch::principal(pot))
}

pub fn expand_lax_with_branch(
    pot: &LGPotential,
    side: Side,
    l: usize,
    branch: &Branch,
) -> Result<LaxExpansion> {
    if l < MIN_WINDOW {
        return Err(Error::Series(format!("window {l} below minimum {MIN_WINDOW}")));
    }
    let series = lax_power(pot, side, 1, l, branch)?;
    let phi = branch.phi(pot);
    let z = match side {
        Side::Z => series.clone(),
        Side::Zbar => lax_power(pot, Side::Z, 1, 3, branch)?,
    };
    let u1 = z.coeff_p(0).unwrap();
    let u2 = z.coeff_p(-1).unwrap();
    Ok(LaxExpansion {
        side,
        series,
        u1,
        u2,
        phi,
    })
}

// Σ κ_i log(1 - b_i w) in w = 1/p, or Σ κ_i log(1 - p/b_i) in w = p
fn log_zero_factors(pot: &LGPotential, center: Center, l: usize) -> Vec<C64> {
    let mut s = vec![C64::new(0.0, 0.0); l];
    for (k, b) in pot.kappa().iter().zip(pot.b()) {
        let x = match center {
            Center::AtInfinity => *b,
            Center::AtZero => b.inv(),
        };
        let mut xj = C64::new(1.0, 0.0);
        for (j, sj) in s.iter_mut().enumerate().skip(1) {
            xj *= x;
            *sj -= xj * (*k / j as f64);
        }
    }
    s
}

/// `z^n` at infinity or `z̄^n` at zero, relative length `l`.
pub fn lax_power(
    pot: &LGPotential,
    side: Side,
    n: u32,
    l: usize,
    branch: &Branch,
) -> Result<TruncatedSeries> {
    let nf = n as f64;
    match side {
        Side::Z => {
            let mut s = log_zero_factors(pot, Center::AtInfinity, l);
            for (idx, c) in pot.c().iter().enumerate() {
                if idx + 1 < l {
                    s[idx + 1] += c;
                }
            }
            let r = nf / pot.mtilde();
            let e = TruncatedSeries::new(Center::AtInfinity, 0, s.iter().map(|x| x * r).collect())?;
            Ok(e.exp()?.shift_w(-(n as i32)))
        }
        Side::Zbar => {
            let t = log_zero_factors(pot, Center::AtZero, l);
            let big_n = pot.n();
            match pot.case() {
                Case::I => {
                    let r = nf / big_n as f64;
                    let e = TruncatedSeries::new(Center::AtZero, 0, t.iter().map(|x| x * r).collect())?;
                    let pref = (branch.log_pi * r).exp();
                    Ok(e.exp()?.scale(pref).shift_w(-(n as i32)))
                }
                Case::II => {
                    let nn = big_n as usize;
                    let c = pot.c();
                    let cn = c[nn - 1];
                    // log λ = c_N p^{-N} (1 + X)
                    let mut x = vec![C64::new(0.0, 0.0); l];
                    for (idx, ck) in c.iter().enumerate().take(nn - 1) {
                        let e = nn - (idx + 1);
                        if e < l {
                            x[e] += ck / cn;
                        }
                    }
                    if nn < l {
                        x[nn] += branch.log_pi / cn;
                    }
                    for (j, tj) in t.iter().enumerate().skip(1) {
                        if nn + j < l {
                            x[nn + j] += tj / cn;
                        }
                    }
                    x[0] = C64::new(1.0, 0.0);
                    let one_plus_x = TruncatedSeries::new(Center::AtZero, 0, x)?;
                    let r = nf / big_n as f64;
                    let pref = (branch.log_cn * r).exp();
                    Ok(one_plus_x.pow(r)?.scale(pref).shift_w(-(n as i32)))
                }
            }
        }
    }
}

/// `B_n` (polynomial in `p`) or `B̄_n` (polynomial in `p^{-1}`).
pub fn generator(pot: &LGPotential, flow: Flow, l: usize) -> Result<LaurentPoly> {
    generator_with_branch(pot, flow, l, &Branch::principal(pot))
}

pub fn generator_with_branch(
    pot: &LGPotential,
    flow: Flow,
    l: usize,
    branch: &Branch,
) -> Result<LaurentPoly> {
    let need = flow.n as usize + pot.k_dim() + 2;
    if flow.n == 0 {
        return Err(Error::Series("flow index must be positive".into()));
    }
    if l < need {
        return Err(Error::Series(format!(
            "insufficient window {l} for generator of index {} (need {need})",
            flow.n
        )));
    }
    let zn = lax_power(pot, flow.side, flow.n, l, branch)?;
    let (poly, neg) = zn.split_parts()?;
    let n = flow.n as i32;
    Ok(match flow.side {
        Side::Z => {
            let coeffs = (0..=n).map(|k| poly.coeff_p(k).unwrap()).collect();
            LaurentPoly::new(0, coeffs)
        }
        Side::Zbar => {
            let coeffs = (-n..=-1).map(|k| neg.coeff_p(k).unwrap()).collect();
            LaurentPoly::new(-n, coeffs)
        }
    })
}

/// Result of [`evolution_rhs`]: `∂_t b_i = f[i]`, `∂_t c_k = g[k-1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionRhs {
    pub f: Vec<C64>,
    pub g: Vec<C64>,
    /// Largest relative mismatch between the bracket and its partial
    /// fraction reconstruction over the sample points.
    pub remainder: f64,
}

impl EvolutionRhs {
    /// Time derivatives in parameter order `(b, c)`.
    pub fn theta_t(&self) -> Vec<C64> {
        self.f.iter().chain(self.g.iter()).copied().collect()
    }
}

const REMAINDER_TOL: f64 = 1e-6;

/// Step used for derivatives of generator coefficients, relative to the
/// parameter scale.
pub const GENERATOR_FD_STEP: f64 = 1e-3;

/// Directional derivative `∂_s B` of a generator along `θ_s`.
///
/// The coefficients are holomorphic in `θ`, so the four-point stencil
/// `θ + i^k h θ_s` gives an `O(h⁴)` derivative.
pub fn generator_s_derivative(
    pot: &LGPotential,
    flow: Flow,
    theta_s: &[C64],
    l: usize,
) -> Result<LaurentPoly> {
    let theta = pot.params();
    let norm_s = theta_s.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if norm_s == 0.0 {
        return Ok(LaurentPoly::new(0, vec![C64::new(0.0, 0.0)]));
    }
    let scale = theta.iter().map(|x| x.norm()).fold(1.0, f64::max);
    let h = GENERATOR_FD_STEP * scale / norm_s;
    let base = Branch::principal(pot);
    let probe = |w: C64| -> Result<LaurentPoly> {
        let t: Vec<C64> = theta
            .iter()
            .zip(theta_s)
            .map(|(a, d)| a + d * w * h)
            .collect();
        let q = pot.with_params(&t)?;
        let br = base.continued(pot, &q);
        generator_with_branch(&q, flow, l, &br)
    };
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let real = probe(one)?.sub(&probe(-one)?);
    let imag = probe(i)?.sub(&probe(-i)?);
    Ok(real.sub(&imag.scale(i)).scale(C64::new(1.0 / (4.0 * h), 0.0)))
}

/// The bracket `{B, log λ} = p (B′ ∂_s log λ − ∂_s B (log λ)′)` at `p`.
pub fn bracket_at(
    pot: &LGPotential,
    b: &LaurentPoly,
    b_s: &LaurentPoly,
    theta_s: &[C64],
    p: C64,
) -> Result<C64> {
    let (_, dl, _) = pot.log_derivatives(p)?;
    let ds: C64 = pot
        .dlog_dparams(p)
        .iter()
        .zip(theta_s)
        .map(|(a, b)| a * b)
        .sum();
    Ok(p * (b.derivative().eval(p) * ds - b_s.eval(p) * dl))
}

/// Evolution of the natural parameters along `flow`, given their
/// `s`-derivatives.
pub fn evolution_rhs(pot: &LGPotential, theta_s: &[C64], flow: Flow) -> Result<EvolutionRhs> {
    let k = pot.k_dim();
    if theta_s.len() != k {
        return Err(Error::InvalidParameters(format!(
            "expected {k} s-derivatives, got {}",
            theta_s.len()
        )));
    }
    let l = default_window(pot, flow.n);
    let b = generator(pot, flow, l)?;
    let b_s = generator_s_derivative(pot, flow, theta_s, l)?;
    let db = b.derivative();
    let m = pot.m();
    let f: Vec<C64> = (0..m)
        .map(|i| {
            let bi = pot.b()[i];
            bi * (db.eval(bi) * theta_s[i] + b_s.eval(bi))
        })
        .collect();
    let g = principal_part_at_zero(pot, &b, &b_s, theta_s)?;

    let rmax = pot.b().iter().map(|x| x.norm()).fold(0.0, f64::max);
    let rmin = pot.b().iter().map(|x| x.norm()).fold(f64::INFINITY, f64::min);
    let mut remainder: f64 = 0.0;
    for j in 0..8 {
        let th = 0.37 + j as f64 * std::f64::consts::TAU / 8.0;
        let rad = if j % 2 == 0 { 0.5 * rmin } else { 1.5 * rmax + 0.5 };
        let p = C64::from_polar(rad, th);
        let exact = bracket_at(pot, &b, &b_s, theta_s, p)?;
        let mut rec = C64::new(0.0, 0.0);
        for i in 0..m {
            rec -= f[i] * pot.kappa()[i] / (p - pot.b()[i]);
        }
        for (idx, gk) in g.iter().enumerate() {
            rec += gk * p.powi(-(idx as i32 + 1));
        }
        let mut terms: f64 = 0.0;
        for i in 0..m {
            terms = terms.max((f[i] * pot.kappa()[i] / (p - pot.b()[i])).norm());
        }
        for (idx, gk) in g.iter().enumerate() {
            terms = terms.max((gk * p.powi(-(idx as i32 + 1))).norm());
        }
        let denom = exact.norm().max(rec.norm()).max(1e-14 * terms);
        if denom > 0.0 {
            remainder = remainder.max((exact - rec).norm() / denom);
        }
    }
    if remainder > REMAINDER_TOL {
        return Err(Error::Series(format!(
            "bracket has a polynomial remainder (relative {remainder:e})"
        )));
    }
    Ok(EvolutionRhs { f, g, remainder })
}

// coefficients of p^{-1}, …, p^{-N} of the bracket (Case II only)
fn principal_part_at_zero(
    pot: &LGPotential,
    b: &LaurentPoly,
    b_s: &LaurentPoly,
    theta_s: &[C64],
) -> Result<Vec<C64>> {
    if pot.case() == Case::I {
        return Ok(Vec::new());
    }
    let nn = pot.n();
    let m = pot.m();
    let db = b.derivative();
    let low = db.low().min(b_s.low()).min(0);
    // window reaching p^{-1} after multiplying factors with poles of order ≤ N+1
    let order = 2 + (-low).max(0) + nn + 2;
    let poly_series = |lp: &LaurentPoly| -> Result<TruncatedSeries> {
        let terms: Vec<(i32, C64)> = (lp.low()..=lp.high())
            .filter(|k| *k < order)
            .map(|k| (k, lp.coeff(k)))
            .collect();
        TruncatedSeries::from_p_terms(Center::AtZero, &terms, order.max(lp.low() + 1))
    };
    // ∂_s log λ and (log λ)′ near 0
    let mut ds_terms: Vec<(i32, C64)> = Vec::new();
    let mut dl_terms: Vec<(i32, C64)> = Vec::new();
    for i in 0..m {
        let bi = pot.b()[i];
        let ki = pot.kappa()[i];
        for j in 0..order.max(1) {
            let coef = bi.powi(-(j + 1));
            ds_terms.push((j, coef * theta_s[i] * ki));
            dl_terms.push((j, -coef * ki));
        }
    }
    for (idx, ck) in pot.c().iter().enumerate() {
        let kk = idx as i32 + 1;
        ds_terms.push((-kk, theta_s[m + idx]));
        dl_terms.push((-kk - 1, -ck * kk as f64));
    }
    let ds = TruncatedSeries::from_p_terms(Center::AtZero, &ds_terms, order)?;
    let dl = TruncatedSeries::from_p_terms(Center::AtZero, &dl_terms, order)?;
    let t1 = poly_series(&db)?.mul(&ds)?;
    let t2 = poly_series(b_s)?.mul(&dl)?;
    let br = t1.sub(&t2)?.shift_w(1);
    (1..=nn)
        .map(|k| {
            br.coeff_p(-k)
                .ok_or_else(|| Error::Series("window too short for principal part".into()))
        })
        .collect()
}
