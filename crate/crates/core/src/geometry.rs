//! Lamé coefficients and rotation coefficients of the Egorov metrics, with
//! finite-difference checks of the Darboux, Egorov and Combescure relations.

use nalgebra::DMatrix;

use crate::cmath::log1p;
use crate::fd::{central_from_log, LambdaChart, Probe};
use crate::loewner::{alpha_coeffs, LownerFrame, Residual};
use crate::potential::LGPotential;
use crate::{Result, C64};

/// Square roots fixed once per index and reused by every formula.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricFrame {
    pub gamma: Vec<C64>,
    pub lam: Vec<C64>,
    pub alpha: Vec<C64>,
    /// `σ_n² = α_n/γ_n`, principal root.
    pub sigma: Vec<C64>,
    /// `σ̃_n = γ_n σ_n`, a root of `α_nγ_n`.
    pub sigma_tilde: Vec<C64>,
    /// `σ̂_n² = α_nλ_n/γ_n`, principal root.
    pub sigma_hat: Vec<C64>,
    pub beta: DMatrix<C64>,
    pub beta_hat: DMatrix<C64>,
}

impl MetricFrame {
    pub fn k(&self) -> usize {
        self.sigma.len()
    }

    pub fn h(&self) -> &[C64] {
        &self.sigma
    }

    pub fn h_tilde(&self) -> &[C64] {
        &self.sigma_tilde
    }

    pub fn h_hat(&self) -> &[C64] {
        &self.sigma_hat
    }
}

fn pair_beta(s: &[C64], g: &[C64], m: usize, n: usize) -> C64 {
    let d = g[m] - g[n];
    s[m] * s[n] * g[m] * g[n] / (d * d)
}

/// Principal square root, taking arguments within rounding of the negative
/// real axis to lie on its upper side.
pub fn frame_sqrt(z: C64) -> C64 {
    if z.re < 0.0 && z.im.abs() <= 1e-12 * z.norm() {
        C64::new(0.0, (-z.re).sqrt())
    } else {
        z.sqrt()
    }
}

pub fn metric_frames(lf: &LownerFrame) -> MetricFrame {
    let f = &lf.frame;
    let k = f.len();
    let sigma: Vec<C64> = lf.alpha.iter().zip(&f.gamma).map(|(a, g)| frame_sqrt(a / g)).collect();
    let sigma_tilde = sigma.iter().zip(&f.gamma).map(|(s, g)| s * g).collect();
    let sigma_hat: Vec<C64> = lf
        .alpha
        .iter()
        .zip(&f.gamma)
        .zip(&f.lam)
        .map(|((a, g), l)| frame_sqrt(a * l / g))
        .collect();
    let mut beta = DMatrix::zeros(k, k);
    let mut beta_hat = DMatrix::zeros(k, k);
    for m in 0..k {
        for n in m + 1..k {
            let b = pair_beta(&sigma, &f.gamma, m, n);
            let bh = pair_beta(&sigma_hat, &f.gamma, m, n);
            beta[(m, n)] = b;
            beta[(n, m)] = b;
            beta_hat[(m, n)] = bh;
            beta_hat[(n, m)] = bh;
        }
    }
    MetricFrame {
        gamma: f.gamma.clone(),
        lam: f.lam.clone(),
        alpha: lf.alpha.clone(),
        sigma,
        sigma_tilde,
        sigma_hat,
        beta,
        beta_hat,
    }
}

// log offsets of the frame quantities at a probe
struct Offsets {
    gamma: Vec<C64>,
    lam: Vec<C64>,
    /// `log(α_n/γ_n)`
    h2: Vec<C64>,
    beta: DMatrix<C64>,
    beta_hat: DMatrix<C64>,
}

fn offsets(chart: &LambdaChart, probe: &Probe) -> Offsets {
    let k = chart.k();
    let g = &chart.frame.gamma;
    let dg = chart.dlog_gamma(probe);
    let da = chart.dlog_alpha(probe);
    let dl = chart.dlog_crit(probe);
    let h2: Vec<C64> = (0..k).map(|n| da[n] - dg[n]).collect();
    let mut beta = DMatrix::zeros(k, k);
    let mut beta_hat = DMatrix::zeros(k, k);
    for m in 0..k {
        for n in 0..k {
            if m == n {
                continue;
            }
            let gap = log1p((probe.dgamma[m] - probe.dgamma[n]) / (g[m] - g[n]));
            let b = 0.5 * (h2[m] + h2[n]) + dg[m] + dg[n] - 2.0 * gap;
            beta[(m, n)] = b;
            beta_hat[(m, n)] = b + 0.5 * (dl[m] + dl[n]);
        }
    }
    Offsets {
        gamma: dg,
        lam: dl,
        h2,
        beta,
        beta_hat,
    }
}

fn pairs(k: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..k).flat_map(move |m| (0..k).filter(move |n| *n != m).map(move |n| (m, n)))
}

fn update(r: &mut Residual, got: C64, expect: C64, scale: f64) {
    let a = (got - expect).norm();
    r.abs = r.abs.max(a);
    r.rel = r.rel.max(a / scale.max(f64::MIN_POSITIVE));
}

/// Mismatch between rotation coefficients by formula and by finite
/// differences of the Lamé coefficients.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RotationCheck {
    pub h: Residual,
    pub h_tilde: Residual,
    /// Log-variable coefficients of `ĥ`.
    pub h_hat: Residual,
}

pub fn rotation_check(pot: &LGPotential, h: f64) -> Result<RotationCheck> {
    let chart = LambdaChart::new(pot)?;
    let k = chart.k();
    let mut out = RotationCheck::default();
    if k < 2 {
        return Ok(out);
    }
    let mf = metric_frames(&alpha_coeffs(&chart.frame)?);
    for m in 0..k {
        let (up, dn, delta) = chart.step_pair(m, h)?;
        let (ou, od) = (offsets(&chart, &up), offsets(&chart, &dn));
        let mut e = vec![C64::new(0.0, 0.0); k];
        e[m] = C64::new(h, 0.0);
        let hu = offsets(&chart, &chart.probe(&e)?);
        e[m] = C64::new(-h, 0.0);
        let hd = offsets(&chart, &chart.probe(&e)?);
        for n in 0..k {
            if n == m {
                continue;
            }
            let want = mf.beta[(m, n)];
            let dlog_h = 0.5 * (ou.h2[n] - od.h2[n]) / (2.0 * delta);
            let got = mf.sigma[n] / mf.sigma[m] * dlog_h;
            update(&mut out.h, got, want, want.norm());
            let dlog_ht = dlog_h + (ou.gamma[n] - od.gamma[n]) / (2.0 * delta);
            let got = mf.sigma_tilde[n] / mf.sigma_tilde[m] * dlog_ht;
            update(&mut out.h_tilde, got, want, want.norm());
            let want = mf.beta_hat[(m, n)];
            let dlog_hh = 0.5 * ((hu.h2[n] + hu.lam[n]) - (hd.h2[n] + hd.lam[n])) / (2.0 * h);
            let got = mf.sigma_hat[n] / mf.sigma_hat[m] * dlog_hh;
            update(&mut out.h_hat, got, want, want.norm());
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GeometryResiduals {
    /// `∂β_mn/∂λ_k = β_mkβ_kn`, needs `K ≥ 3`.
    pub darboux: Option<Residual>,
    /// `∂β̂_mn/∂log λ_k = β̂_mkβ̂_kn`, needs `K ≥ 3`.
    pub log_darboux: Option<Residual>,
    /// `∂(h_n²)/∂λ_m = ∂(h_m²)/∂λ_n`.
    pub egorov: Option<Residual>,
    /// `(1/(γ_m − γ_n)) ∂γ_n/∂λ_m = ∂log h_n/∂λ_m`.
    pub combescure: Option<Residual>,
    /// Both sides of the Combescure relation against `α_mγ_n/(γ_m − γ_n)²`.
    pub combescure_vs_gt: Option<Residual>,
    /// Largest `|Σ_k ∂β_mn/∂λ_k|`, reported only.
    pub flatness_sum: Option<f64>,
    /// Largest `|Σ_k ∂β_mn/∂λ_k| / |β_mn|`, reported only.
    pub flatness_sum_rel: Option<f64>,
    /// `Σ_k λ_k ∂β̂_mn/∂λ_k = 0`, relative to `|β̂_mn|`.
    pub hat_homogeneity: Option<Residual>,
}

pub fn geometry_residuals(pot: &LGPotential, h: f64) -> Result<GeometryResiduals> {
    let chart = LambdaChart::new(pot)?;
    let k = chart.k();
    let mut out = GeometryResiduals::default();
    if k < 2 {
        return Ok(out);
    }
    let mf = metric_frames(&alpha_coeffs(&chart.frame)?);
    let g = &mf.gamma;
    let h2: Vec<C64> = mf.sigma.iter().map(|s| s * s).collect();
    // dbeta[k][(m, n)] = ∂β_mn/∂λ_k, dlh[m][n] = ∂log h_n/∂λ_m, dg[m][n] = ∂γ_n/∂λ_m
    let mut dbeta = Vec::with_capacity(k);
    let mut dbeta_hat = Vec::with_capacity(k);
    let mut dh2 = vec![vec![C64::new(0.0, 0.0); k]; k];
    let mut dlh = vec![vec![C64::new(0.0, 0.0); k]; k];
    let mut dgam = vec![vec![C64::new(0.0, 0.0); k]; k];
    let central = |f0: &DMatrix<C64>, u: &DMatrix<C64>, d: &DMatrix<C64>, delta: f64| {
        DMatrix::from_fn(k, k, |m, n| {
            if m == n {
                C64::new(0.0, 0.0)
            } else {
                central_from_log(f0[(m, n)], u[(m, n)], d[(m, n)], delta)
            }
        })
    };
    for m in 0..k {
        let (up, dn, delta) = chart.step_pair(m, h)?;
        let (ou, od) = (offsets(&chart, &up), offsets(&chart, &dn));
        dbeta.push(central(&mf.beta, &ou.beta, &od.beta, delta));
        for n in 0..k {
            dh2[m][n] = central_from_log(h2[n], ou.h2[n], od.h2[n], delta);
            dlh[m][n] = 0.5 * (ou.h2[n] - od.h2[n]) / (2.0 * delta);
            dgam[m][n] = (up.dgamma[n] - dn.dgamma[n]) / (2.0 * delta);
        }
        let mut e = vec![C64::new(0.0, 0.0); k];
        e[m] = C64::new(h, 0.0);
        let hu = offsets(&chart, &chart.probe(&e)?);
        e[m] = C64::new(-h, 0.0);
        let hd = offsets(&chart, &chart.probe(&e)?);
        dbeta_hat.push(central(&mf.beta_hat, &hu.beta_hat, &hd.beta_hat, h));
    }

    let mut egorov = Residual::default();
    let mut comb = Residual::default();
    let mut comb_gt = Residual::default();
    for (m, n) in pairs(k) {
        let scale = dh2[m][n].norm().max(dh2[n][m].norm());
        update(&mut egorov, dh2[m][n], dh2[n][m], scale);
        let lhs = dgam[m][n] / (g[m] - g[n]);
        let rhs = dlh[m][n];
        update(&mut comb, lhs, rhs, rhs.norm());
        let d = g[m] - g[n];
        let exact = mf.alpha[m] * g[n] / (d * d);
        update(&mut comb_gt, lhs, exact, exact.norm());
        update(&mut comb_gt, rhs, exact, exact.norm());
    }
    out.egorov = Some(egorov);
    out.combescure = Some(comb);
    out.combescure_vs_gt = Some(comb_gt);

    if k >= 3 {
        let mut dar = Residual::default();
        let mut ldar = Residual::default();
        for (m, n) in pairs(k) {
            for q in (0..k).filter(|q| *q != m && *q != n) {
                let want = mf.beta[(m, q)] * mf.beta[(q, n)];
                update(&mut dar, dbeta[q][(m, n)], want, want.norm());
                let want = mf.beta_hat[(m, q)] * mf.beta_hat[(q, n)];
                update(&mut ldar, dbeta_hat[q][(m, n)], want, want.norm());
            }
        }
        out.darboux = Some(dar);
        out.log_darboux = Some(ldar);
    }

    let (up, dn, delta) = chart.diagonal_pair(h)?;
    let diag = central(&mf.beta, &offsets(&chart, &up).beta, &offsets(&chart, &dn).beta, delta);
    let (up, dn) = chart.log_scaling_pair(h)?;
    let scal = central(&mf.beta_hat, &offsets(&chart, &up).beta_hat, &offsets(&chart, &dn).beta_hat, h);
    let mut flat: f64 = 0.0;
    let mut flat_rel: f64 = 0.0;
    let mut homog = Residual::default();
    for (m, n) in pairs(k) {
        let s = diag[(m, n)].norm();
        flat = flat.max(s);
        flat_rel = flat_rel.max(s / mf.beta[(m, n)].norm());
        update(&mut homog, scal[(m, n)], C64::new(0.0, 0.0), mf.beta_hat[(m, n)].norm());
    }
    out.flatness_sum = Some(flat);
    out.flatness_sum_rel = Some(flat_rel);
    out.hat_homogeneity = Some(homog);
    Ok(out)
}
