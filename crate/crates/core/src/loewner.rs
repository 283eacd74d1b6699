//! Radial Löwner coefficients and finite-difference checks of the Löwner,
//! Gibbons–Tsarev and potential relations in critical-value coordinates.

use crate::fd::{central_from_log, LambdaChart};
use crate::potential::{Case, CriticalFrame, LGPotential};
use crate::{fixtures, Error, Result, C64};

/// Default relative step for λ-coordinate differences.
pub const DEFAULT_H: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct LownerFrame {
    pub alpha: Vec<C64>,
    pub frame: CriticalFrame,
    pub fd_step: f64,
}

/// `α_n = 1/(γ_n λ″(γ_n))`.
pub fn alpha_coeffs(frame: &CriticalFrame) -> Result<LownerFrame> {
    let scale = frame.d2.iter().map(|d| d.norm()).fold(0.0, f64::max);
    for (n, d) in frame.d2.iter().enumerate() {
        if d.norm() <= 1e-14 * scale || *d == C64::new(0.0, 0.0) {
            return Err(Error::DegenerateFrame(format!(
                "vanishing second derivative at critical point {}",
                n + 1
            )));
        }
    }
    let alpha: Vec<C64> = frame
        .gamma
        .iter()
        .zip(&frame.d2)
        .map(|(g, d)| (g * d).inv())
        .collect();
    Ok(LownerFrame {
        alpha,
        frame: frame.clone(),
        fd_step: DEFAULT_H,
    })
}

/// Absolute and relative size of a residual.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residual {
    pub abs: f64,
    pub rel: f64,
}

impl Residual {
    fn update(&mut self, got: C64, expect: C64, floor: f64) {
        let a = (got - expect).norm();
        self.abs = self.abs.max(a);
        self.rel = self.rel.max(a / expect.norm().max(floor));
    }

    pub fn max(self, other: Residual) -> Residual {
        Residual {
            abs: self.abs.max(other.abs),
            rel: self.rel.max(other.rel),
        }
    }
}

/// `α_n p/(p − γ_n) λ′(p)`, the right-hand side of the Löwner equation.
pub fn loewner_rhs(pot: &LGPotential, lf: &LownerFrame, n: usize, p: C64) -> Result<C64> {
    let (l, d1, _) = pot.log_derivatives(p)?;
    let g = lf.frame.gamma[n];
    Ok(lf.alpha[n] * p / (p - g) * l.exp() * d1)
}

/// Seeded sample points avoiding `0`, every `b_i` and every `γ_n`.
pub fn sample_points(pot: &LGPotential, frame: &CriticalFrame, count: usize, seed: u64) -> Vec<C64> {
    let scale = frame.gamma.iter().map(|g| g.norm()).fold(0.0, f64::max);
    let mut out = Vec::with_capacity(count);
    let mut s = seed;
    while out.len() < count {
        let z = fixtures::random_point(s, pot);
        s = s.wrapping_add(0x9e37_79b9_7f4a_7c15);
        if frame.gamma.iter().all(|g| (z - g).norm() > 0.1 * scale.max(1.0)) {
            out.push(z);
        }
    }
    out
}

/// Largest relative mismatch between `∂λ(p)/∂λ_n` (central differences)
/// and `α_n p/(p − γ_n) λ′(p)` over `samples` and all `n`.
pub fn loewner_residual(pot: &LGPotential, samples: &[C64], h: f64) -> Result<Residual> {
    let chart = LambdaChart::new(pot)?;
    let lf = alpha_coeffs(&chart.frame)?;
    let mut res = Residual::default();
    for n in 0..chart.k() {
        let (up, dn, delta) = chart.step_pair(n, h)?;
        for p in samples {
            let l0 = pot.lambda(*p)?;
            let fd = central_from_log(
                l0,
                chart.dlog_lambda(&up.dtheta, *p, C64::new(0.0, 0.0)),
                chart.dlog_lambda(&dn.dtheta, *p, C64::new(0.0, 0.0)),
                delta,
            );
            let exact = loewner_rhs(pot, &lf, n, *p)?;
            res.update(fd, exact, 0.0);
        }
    }
    Ok(res)
}

/// Central-difference matrix `∂λ(γ_n)/∂λ_m` at the fixed points `p = γ_n`.
pub fn loewner_at_critical_points(pot: &LGPotential, h: f64) -> Result<Vec<Vec<C64>>> {
    let chart = LambdaChart::new(pot)?;
    let k = chart.k();
    let mut out = vec![vec![C64::new(0.0, 0.0); k]; k];
    for m in 0..k {
        let (up, dn, delta) = chart.step_pair(m, h)?;
        for n in 0..k {
            let g = chart.frame.gamma[n];
            out[n][m] = central_from_log(
                chart.frame.lam[n],
                chart.dlog_lambda(&up.dtheta, g, C64::new(0.0, 0.0)),
                chart.dlog_lambda(&dn.dtheta, g, C64::new(0.0, 0.0)),
                delta,
            );
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GtResidual {
    pub gamma: Residual,
    pub alpha: Residual,
    pub alpha_gamma: Residual,
    pub alpha_over_gamma: Residual,
    /// `|∂(α_nγ_n)/∂λ_m − ∂(α_mγ_m)/∂λ_n|` relative, both by differences.
    pub symmetry: Residual,
}

impl GtResidual {
    pub fn worst(&self) -> Residual {
        self.gamma
            .max(self.alpha)
            .max(self.alpha_gamma)
            .max(self.alpha_over_gamma)
    }
}

/// Derivatives of `γ_n, α_n, α_nγ_n, α_n/γ_n` in `λ_m` by central differences:
/// entry `[kind][n][m]`.
pub fn gt_derivatives(chart: &LambdaChart, h: f64) -> Result<[Vec<Vec<C64>>; 4]> {
    let k = chart.k();
    let f = &chart.frame;
    let lf = alpha_coeffs(f)?;
    let mut out: [Vec<Vec<C64>>; 4] = std::array::from_fn(|_| vec![vec![C64::new(0.0, 0.0); k]; k]);
    for m in 0..k {
        let (up, dn, delta) = chart.step_pair(m, h)?;
        let (gu, gd) = (chart.dlog_gamma(&up), chart.dlog_gamma(&dn));
        let (au, ad) = (chart.dlog_alpha(&up), chart.dlog_alpha(&dn));
        for n in 0..k {
            let (g, a) = (f.gamma[n], lf.alpha[n]);
            out[0][n][m] = (up.dgamma[n] - dn.dgamma[n]) / (2.0 * delta);
            out[1][n][m] = central_from_log(a, au[n], ad[n], delta);
            out[2][n][m] = central_from_log(a * g, au[n] + gu[n], ad[n] + gd[n], delta);
            out[3][n][m] = central_from_log(a / g, au[n] - gu[n], ad[n] - gd[n], delta);
        }
    }
    Ok(out)
}

/// Closed-form right-hand sides of the Gibbons–Tsarev relations for `m ≠ n`.
pub fn gt_exact(frame: &CriticalFrame, alpha: &[C64], n: usize, m: usize) -> [C64; 4] {
    let (gn, gm) = (frame.gamma[n], frame.gamma[m]);
    let (an, am) = (alpha[n], alpha[m]);
    let d = gm - gn;
    [
        am * gn / d,
        am * an * (gm + gn) / (d * d),
        am * gm * an * gn * 2.0 / (d * d),
        am * an * 2.0 / (d * d),
    ]
}

/// Gibbons–Tsarev residuals over all pairs `m ≠ n`.
pub fn gt_residual(pot: &LGPotential, h: f64) -> Result<GtResidual> {
    let chart = LambdaChart::new(pot)?;
    let k = chart.k();
    let mut out = GtResidual::default();
    if k < 2 {
        return Ok(out);
    }
    let lf = alpha_coeffs(&chart.frame)?;
    let fd = gt_derivatives(&chart, h)?;
    for n in 0..k {
        for m in 0..k {
            if m == n {
                continue;
            }
            let e = gt_exact(&chart.frame, &lf.alpha, n, m);
            // ∂α_n/∂λ_m can vanish through γ_m + γ_n = 0; its relative error is
            // measured against the size of the two terms instead
            let (gn, gm) = (chart.frame.gamma[n], chart.frame.gamma[m]);
            let terms = (lf.alpha[m] * lf.alpha[n]).norm() * (gm.norm() + gn.norm())
                / (gm - gn).norm_sqr();
            out.gamma.update(fd[0][n][m], e[0], 0.0);
            out.alpha.update(fd[1][n][m], e[1], terms);
            out.alpha_gamma.update(fd[2][n][m], e[2], 0.0);
            out.alpha_over_gamma.update(fd[3][n][m], e[3], 0.0);
            out.symmetry.update(fd[2][n][m], fd[2][m][n], 0.0);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PotentialResidual {
    /// `∂u₁/∂λ_n` against `α_n`.
    pub u1: Residual,
    /// `∂u₂/∂λ_n` against `α_nγ_n`.
    pub u2: Residual,
    /// `∂φ/∂λ_n` against `α_n/γ_n`.
    pub phi: Residual,
}

/// Offsets of `u₁`, `u₂` and `log e^{Nφ}` for parameter offsets `δθ`.
///
/// With `s_j = [w^j] S/M̃`, `u₁ = s₁` and `u₂ = s₂ + s₁²/2`.
pub fn potential_offsets(pot: &LGPotential, dtheta: &[C64]) -> (C64, C64, C64) {
    let mt = pot.mtilde();
    let m = pot.m();
    let (db, dc) = dtheta.split_at(m);
    let c = pot.c();
    let get = |v: &[C64], i: usize| v.get(i).copied().unwrap_or_default();
    let mut s1 = get(c, 0);
    let mut ds1 = get(dc, 0);
    let mut ds2 = get(dc, 1);
    for ((k, b), d) in pot.kappa().iter().zip(pot.b()).zip(db) {
        s1 -= b * *k;
        ds1 -= d * *k;
        ds2 -= (b * 2.0 + d) * d * (*k / 2.0);
    }
    let (s1, ds1, ds2) = (s1 / mt, ds1 / mt, ds2 / mt);
    let du1 = ds1;
    let du2 = ds2 + ds1 * (s1 * 2.0 + ds1) / 2.0;
    let dlog_enphi = match pot.case() {
        Case::I => pot
            .kappa()
            .iter()
            .zip(pot.b())
            .zip(db)
            .map(|((k, b), d)| crate::cmath::log1p(d / b) * *k)
            .sum(),
        Case::II => {
            let n = pot.n() as usize;
            crate::cmath::log1p(dc[n - 1] / c[n - 1])
        }
    };
    (du1, du2, dlog_enphi)
}

/// Checks `∂u₁/∂λ_n = α_n`, `∂u₂/∂λ_n = α_nγ_n`, `∂φ/∂λ_n = α_n/γ_n`;
/// `φ` enters through `e^{Nφ}` only.
pub fn potential_relations_residual(pot: &LGPotential, h: f64) -> Result<PotentialResidual> {
    let chart = LambdaChart::new(pot)?;
    let lf = alpha_coeffs(&chart.frame)?;
    let enphi = match pot.case() {
        Case::I => crate::lax::pi_product(pot),
        Case::II => *pot.c().last().unwrap(),
    };
    let nf = pot.n() as f64;
    let mut out = PotentialResidual::default();
    let (fd_u1, fd_u2, fd_phi) = potential_derivatives(&chart, h)?;
    let ascale = lf.alpha.iter().map(|a| a.norm()).fold(0.0, f64::max);
    for n in 0..chart.k() {
        let (g, a) = (chart.frame.gamma[n], lf.alpha[n]);
        out.u1.update(fd_u1[n], a, 1e-6 * ascale);
        out.u2.update(fd_u2[n], a * g, 1e-6 * ascale);
        let dphi = fd_phi[n] / (enphi * nf);
        out.phi.update(dphi, a / g, 1e-6 * ascale);
    }
    Ok(out)
}

/// Central differences of `u₁`, `u₂` and `e^{Nφ}` in each `λ_n`.
pub fn potential_derivatives(chart: &LambdaChart, h: f64) -> Result<(Vec<C64>, Vec<C64>, Vec<C64>)> {
    let pot = &chart.pot;
    let enphi = match pot.case() {
        Case::I => crate::lax::pi_product(pot),
        Case::II => *pot.c().last().unwrap(),
    };
    let k = chart.k();
    let mut u1 = Vec::with_capacity(k);
    let mut u2 = Vec::with_capacity(k);
    let mut ph = Vec::with_capacity(k);
    for n in 0..k {
        let (up, dn, delta) = chart.step_pair(n, h)?;
        let (a1, a2, a3) = potential_offsets(pot, &up.dtheta);
        let (b1, b2, b3) = potential_offsets(pot, &dn.dtheta);
        u1.push((a1 - b1) / (2.0 * delta));
        u2.push((a2 - b2) / (2.0 * delta));
        ph.push(central_from_log(enphi, a3, b3, delta));
    }
    Ok((u1, u2, ph))
}

/// Ratio `r(h)/r(h/2)` of a residual measured at two steps.
pub fn convergence_ratio(at_h: f64, at_half: f64) -> f64 {
    at_h / at_half
}

/// Whether a ratio is within 20% of the second-order value 4.
pub fn is_second_order(ratio: f64) -> bool {
    (ratio - 4.0).abs() <= 0.8
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::lax::{expand_lax, Side};
    use proptest::prelude::*;

    fn r(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn toda_alpha_is_one_half() {
        let f = fixtures::toda().critical_frame().unwrap();
        let lf = alpha_coeffs(&f).unwrap();
        for a in &lf.alpha {
            assert!((a - r(0.5)).norm() < 1e-14);
        }
    }

    #[test]
    fn single_zero_alpha() {
        for b in [r(1.3), C64::new(0.4, -2.0)] {
            let p = LGPotential::case_i(1, vec![2.0], vec![b]).unwrap();
            let f = p.critical_frame().unwrap();
            assert!((f.gamma[0] + b).norm() < 1e-14);
            assert!((f.d2[0] + r(2.0) / b).norm() < 1e-13);
            let lf = alpha_coeffs(&f).unwrap();
            assert!((lf.alpha[0] - r(0.5)).norm() < 1e-14);
        }
    }

    #[test]
    fn loewner_at_critical_points_is_identity() {
        for pot in [fixtures::toda(), fixtures::ablowitz_ladik(), fixtures::case_two_simple()] {
            let m = loewner_at_critical_points(&pot, DEFAULT_H).unwrap();
            for (n, row) in m.iter().enumerate() {
                for (k, v) in row.iter().enumerate() {
                    let e = if n == k { 1.0 } else { 0.0 };
                    assert!((v - r(e)).norm() < 1e-8, "{n},{k}: {v}");
                }
            }
        }
    }

    #[test]
    fn loewner_on_fixtures() {
        for pot in [fixtures::toda(), fixtures::ablowitz_ladik(), fixtures::case_two_simple()] {
            let f = pot.critical_frame().unwrap();
            let s = sample_points(&pot, &f, 8, 11);
            let res = loewner_residual(&pot, &s, DEFAULT_H).unwrap();
            assert!(res.rel < 1e-7, "{res:?}");
        }
    }

    #[test]
    fn gt_single_critical_point_is_vacuous() {
        let p = LGPotential::case_i(1, vec![2.0], vec![r(1.0)]).unwrap();
        assert_eq!(gt_residual(&p, DEFAULT_H).unwrap(), GtResidual::default());
    }

    #[test]
    fn gt_on_fixtures() {
        for pot in [fixtures::toda(), fixtures::ablowitz_ladik()] {
            let res = gt_residual(&pot, DEFAULT_H).unwrap();
            assert!(res.worst().rel < 1e-7, "{res:?}");
            assert!(res.symmetry.rel < 1e-7, "{res:?}");
        }
    }

    #[test]
    fn toda_potentials() {
        let pot = fixtures::toda();
        let chart = LambdaChart::new(&pot).unwrap();
        let (u1, u2, _) = potential_derivatives(&chart, DEFAULT_H).unwrap();
        let s3 = 3f64.sqrt();
        // frame order is (−√3, √3)
        assert!((u1[0] - r(0.5)).norm() < 1e-9 && (u1[1] - r(0.5)).norm() < 1e-9);
        assert!((u2[0] - r(-s3 / 2.0)).norm() < 1e-9);
        assert!((u2[1] - r(s3 / 2.0)).norm() < 1e-9);
    }

    #[test]
    fn potential_offsets_match_series() {
        let pot = LGPotential::case_ii(
            vec![1.5, 0.7],
            vec![C64::new(1.0, 0.5), r(-2.0)],
            vec![r(0.3), C64::new(0.2, 0.9)],
        )
        .unwrap();
        let d = [C64::new(1e-3, 0.0), C64::new(0.0, 2e-3), r(-1e-3), C64::new(5e-4, 5e-4)];
        let theta: Vec<C64> = pot.params().iter().zip(&d).map(|(a, b)| a + b).collect();
        let pot1 = pot.with_params(&theta).unwrap();
        let e0 = expand_lax(&pot, Side::Z, 6).unwrap();
        let e1 = expand_lax(&pot1, Side::Z, 6).unwrap();
        let (du1, du2, dphi) = potential_offsets(&pot, &d);
        assert!((du1 - (e1.u1 - e0.u1)).norm() < 1e-13);
        assert!((du2 - (e1.u2 - e0.u2)).norm() < 1e-13);
        assert!((dphi - (e1.phi - e0.phi) * 2.0).norm() < 1e-13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn alpha_defining_relation(seed in any::<u64>()) {
            let f = fixtures::random_model(seed).critical_frame().unwrap();
            let lf = alpha_coeffs(&f).unwrap();
            for n in 0..f.len() {
                prop_assert!((lf.alpha[n] * f.gamma[n] * f.d2[n] - r(1.0)).norm() < 1e-12);
            }
        }

        #[test]
        fn alpha_is_the_limit_of_the_loewner_ratio(seed in any::<u64>()) {
            // the Löwner right-hand side divided by α_n tends to 1 at p = γ_n
            let pot = fixtures::random_model(seed);
            let f = pot.critical_frame().unwrap();
            let m = loewner_at_critical_points(&pot, DEFAULT_H).unwrap();
            for n in 0..f.len() {
                prop_assert!((m[n][n] - r(1.0)).norm() < 1e-7);
                let eps = 1e-6 * f.gamma[n].norm();
                let lf = alpha_coeffs(&f).unwrap();
                let near = loewner_rhs(&pot, &lf, n, f.gamma[n] + eps).unwrap();
                prop_assert!((near - r(1.0)).norm() < 1e-4);
            }
        }

        #[test]
        fn random_models_satisfy_all_relations(seed in any::<u64>()) {
            let pot = fixtures::random_model(seed);
            let f = pot.critical_frame().unwrap();
            let s = sample_points(&pot, &f, 4, seed);
            prop_assert!(loewner_residual(&pot, &s, DEFAULT_H).unwrap().rel < 1e-6);
            let gt = gt_residual(&pot, DEFAULT_H).unwrap();
            prop_assert!(gt.worst().rel < 1e-6, "{gt:?}");
            prop_assert!(gt.symmetry.rel < 1e-6, "{gt:?}");
            let pr = potential_relations_residual(&pot, DEFAULT_H).unwrap();
            prop_assert!(pr.u1.rel.max(pr.u2.rel).max(pr.phi.rel) < 1e-6, "{pr:?}");
        }
    }
}
