//! Finite differences in the critical-value coordinates `λ_n`.
//!
//! A probe is a nearby potential described by offsets `δθ` from a fixed base
//! parameter vector together with the offsets `δγ_n` of its critical points.
//! Every quantity needed by the identity checks is evaluated as a difference
//! from the base in a form free of cancellation (`log1p`/`expm1` and
//! difference quotients), so central differences at small steps are limited
//! by truncation rather than by rounding.

use nalgebra::{DMatrix, DVector};

use crate::cmath::{expm1, log1p};
use crate::poly;
use crate::potential::{Case, CriticalFrame, LGPotential};
use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct Probe {
    pub dtheta: Vec<C64>,
    pub dgamma: Vec<C64>,
    pub iterations: usize,
}

/// Base point of λ-coordinate finite differences.
#[derive(Clone, Debug)]
pub struct LambdaChart {
    pub pot: LGPotential,
    pub frame: CriticalFrame,
}

const MAX_NEWTON: usize = 40;

impl LambdaChart {
    pub fn new(pot: &LGPotential) -> Result<Self> {
        Ok(Self {
            pot: pot.clone(),
            frame: pot.critical_frame()?,
        })
    }

    pub fn with_frame(pot: &LGPotential, frame: CriticalFrame) -> Self {
        Self {
            pot: pot.clone(),
            frame,
        }
    }

    pub fn k(&self) -> usize {
        self.pot.k_dim()
    }

    /// The probe potential `θ0 + δθ` rounded to ordinary parameters.
    pub fn potential_at(&self, probe: &Probe) -> Result<LGPotential> {
        let theta: Vec<C64> = self
            .pot
            .params()
            .iter()
            .zip(&probe.dtheta)
            .map(|(a, d)| a + d)
            .collect();
        self.pot.with_params(&theta)
    }

    fn split<'a>(&self, dtheta: &'a [C64]) -> (&'a [C64], &'a [C64]) {
        dtheta.split_at(self.pot.m())
    }

    /// `log λ(p + δp; θ0 + δθ) - log λ(p; θ0)`.
    pub fn dlog_lambda(&self, dtheta: &[C64], p: C64, dp: C64) -> C64 {
        let (db, dc) = self.split(dtheta);
        let pot = &self.pot;
        let mut acc = C64::new(0.0, 0.0);
        for ((k, b), d) in pot.kappa().iter().zip(pot.b()).zip(db) {
            acc += log1p((dp - d) / (p - b)) * *k;
        }
        let lp = log1p(dp / p);
        match pot.case() {
            Case::I => acc -= lp * pot.n() as f64,
            Case::II => {
                let p1 = p + dp;
                for (idx, (c, d)) in pot.c().iter().zip(dc).enumerate() {
                    let k = (idx + 1) as i32;
                    acc += d * p1.powi(-k) + c * p.powi(-k) * expm1(-lp * k as f64);
                }
            }
        }
        acc
    }

    /// `(log λ)′(p + δp; θ0 + δθ) - (log λ)′(p; θ0)`.
    pub fn ddlog1(&self, dtheta: &[C64], p: C64, dp: C64) -> C64 {
        let (db, dc) = self.split(dtheta);
        let pot = &self.pot;
        let mut acc = C64::new(0.0, 0.0);
        for ((k, b), d) in pot.kappa().iter().zip(pot.b()).zip(db) {
            let u = p - b;
            let du = dp - d;
            acc -= du / ((u + du) * u) * *k;
        }
        let p1 = p + dp;
        match pot.case() {
            Case::I => acc += dp / (p * p1) * pot.n() as f64,
            Case::II => {
                let lp = log1p(dp / p);
                for (idx, (c, d)) in pot.c().iter().zip(dc).enumerate() {
                    let k = (idx + 1) as i32;
                    acc -= (d * p1.powi(-k - 1) + c * p.powi(-k - 1) * expm1(-lp * (k + 1) as f64))
                        * k as f64;
                }
            }
        }
        acc
    }

    /// `(log λ)″(p + δp; θ0 + δθ) - (log λ)″(p; θ0)`.
    pub fn ddlog2(&self, dtheta: &[C64], p: C64, dp: C64) -> C64 {
        let (db, dc) = self.split(dtheta);
        let pot = &self.pot;
        let mut acc = C64::new(0.0, 0.0);
        for ((k, b), d) in pot.kappa().iter().zip(pot.b()).zip(db) {
            let u = p - b;
            let du = dp - d;
            let u1 = u + du;
            acc += du * (u1 + u) / (u1 * u1 * u * u) * *k;
        }
        let p1 = p + dp;
        match pot.case() {
            Case::I => acc -= dp * (p + p1) / (p * p * p1 * p1) * pot.n() as f64,
            Case::II => {
                let lp = log1p(dp / p);
                for (idx, (c, d)) in pot.c().iter().zip(dc).enumerate() {
                    let k = (idx + 1) as i32;
                    acc += (d * p1.powi(-k - 2) + c * p.powi(-k - 2) * expm1(-lp * (k + 2) as f64))
                        * (k * (k + 1)) as f64;
                }
            }
        }
        acc
    }

    // critical point offsets for the given parameter offsets
    fn solve_dgamma(&self, dtheta: &[C64], start: &[C64]) -> Result<Vec<C64>> {
        let pot1 = self.pot.with_params(
            &self
                .pot
                .params()
                .iter()
                .zip(dtheta)
                .map(|(a, d)| a + d)
                .collect::<Vec<_>>(),
        )?;
        let mut out = start.to_vec();
        for (n, g) in self.frame.gamma.iter().enumerate() {
            let mut dg = out[n];
            let mut last = f64::INFINITY;
            for _ in 0..MAX_NEWTON {
                let r = self.ddlog1(dtheta, *g, dg);
                let (_, _, d2) = pot1.log_derivatives(g + dg)?;
                let step = r / d2;
                dg -= step;
                let s = step.norm();
                if s <= 1e-17 * (dg.norm() + f64::MIN_POSITIVE) || s == 0.0 || s >= last {
                    break;
                }
                last = s;
            }
            if (dg.norm() > 0.5 * self.frame.separation) || !dg.re.is_finite() {
                return Err(Error::DegenerateFrame(format!(
                    "critical point {n} left its neighbourhood at the probe"
                )));
            }
            out[n] = dg;
        }
        Ok(out)
    }

    /// `log λ_n` offsets of a probe.
    pub fn dlog_crit(&self, probe: &Probe) -> Vec<C64> {
        self.frame
            .gamma
            .iter()
            .zip(&probe.dgamma)
            .map(|(g, dg)| self.dlog_lambda(&probe.dtheta, *g, *dg))
            .collect()
    }

    /// `log γ_n` offsets.
    pub fn dlog_gamma(&self, probe: &Probe) -> Vec<C64> {
        self.frame
            .gamma
            .iter()
            .zip(&probe.dgamma)
            .map(|(g, dg)| log1p(dg / g))
            .collect()
    }

    /// `log α_n` offsets, from `α_n = 1/(γ_n λ_n (log λ)″(γ_n))`.
    pub fn dlog_alpha(&self, probe: &Probe) -> Vec<C64> {
        let dl = self.dlog_crit(probe);
        let dg = self.dlog_gamma(probe);
        (0..self.k())
            .map(|n| {
                let g = self.frame.gamma[n];
                let d2 = self.frame.dlog2[n];
                let dd2 = self.ddlog2(&probe.dtheta, g, probe.dgamma[n]);
                -(dg[n] + dl[n] + log1p(dd2 / d2))
            })
            .collect()
    }

    /// Probe whose critical values are `λ_n exp(dlog[n])`.
    pub fn probe(&self, dlog: &[C64]) -> Result<Probe> {
        let k = self.k();
        if dlog.len() != k {
            return Err(Error::Inversion(format!(
                "expected {k} offsets, got {}",
                dlog.len()
            )));
        }
        let mut dtheta = vec![C64::new(0.0, 0.0); k];
        let mut dgamma = vec![C64::new(0.0, 0.0); k];
        let target_scale = dlog.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if target_scale == 0.0 {
            return Ok(Probe {
                dtheta,
                dgamma,
                iterations: 0,
            });
        }
        let mut last = f64::INFINITY;
        let mut iterations = 0;
        loop {
            let probe = Probe {
                dtheta: dtheta.clone(),
                dgamma: dgamma.clone(),
                iterations,
            };
            let r: Vec<C64> = self
                .dlog_crit(&probe)
                .iter()
                .zip(dlog)
                .map(|(a, b)| a - b)
                .collect();
            let res = r.iter().map(|x| x.norm()).fold(0.0, f64::max);
            if res == 0.0 || iterations >= MAX_NEWTON || (res >= last && res <= 1e-12 * target_scale) {
                if res > 1e-10 * target_scale {
                    return Err(Error::Inversion(format!(
                        "probe did not converge (residual {res:e})"
                    )));
                }
                return Ok(probe);
            }
            last = res;
            let pot1 = self.potential_at(&probe)?;
            let mut j = DMatrix::zeros(k, k);
            for n in 0..k {
                for (col, d) in pot1
                    .dlog_dparams(self.frame.gamma[n] + dgamma[n])
                    .into_iter()
                    .enumerate()
                {
                    j[(n, col)] = d;
                }
            }
            let rhs = DVector::from_iterator(k, r.iter().map(|x| -x));
            let step = poly::solve(&j, &rhs, "envelope Jacobian is singular")?;
            for (t, s) in dtheta.iter_mut().zip(step.iter()) {
                *t += s;
            }
            dgamma = self.solve_dgamma(&dtheta, &dgamma)?;
            iterations += 1;
        }
    }

    /// Central-difference probes for `λ_n → λ_n ± h|λ_n|`; returns the pair
    /// and the step `δ = h|λ_n|`.
    pub fn step_pair(&self, n: usize, h: f64) -> Result<(Probe, Probe, f64)> {
        let lam = self.frame.lam[n];
        let delta = h * lam.norm();
        let mut up = vec![C64::new(0.0, 0.0); self.k()];
        let mut dn = up.clone();
        up[n] = log1p(C64::new(delta, 0.0) / lam);
        dn[n] = log1p(C64::new(-delta, 0.0) / lam);
        Ok((self.probe(&up)?, self.probe(&dn)?, delta))
    }

    /// Probes moving every `log λ_k` by `±eps` (the scaling direction).
    pub fn log_scaling_pair(&self, eps: f64) -> Result<(Probe, Probe)> {
        let k = self.k();
        Ok((
            self.probe(&vec![C64::new(eps, 0.0); k])?,
            self.probe(&vec![C64::new(-eps, 0.0); k])?,
        ))
    }

    /// Probes moving every `λ_k` by `±δ` with `δ = h max|λ|`; returns the
    /// pair and `δ`.
    pub fn diagonal_pair(&self, h: f64) -> Result<(Probe, Probe, f64)> {
        let scale = self.frame.lam.iter().map(|l| l.norm()).fold(0.0, f64::max);
        let delta = h * scale;
        let up: Vec<C64> = self.frame.lam.iter().map(|l| log1p(C64::new(delta, 0.0) / l)).collect();
        let dn: Vec<C64> = self.frame.lam.iter().map(|l| log1p(C64::new(-delta, 0.0) / l)).collect();
        Ok((self.probe(&up)?, self.probe(&dn)?, delta))
    }
}

/// Central difference of a quantity `f0 · exp(Δ)` from its log offsets.
pub fn central_from_log(f0: C64, dlog_up: C64, dlog_dn: C64, delta: f64) -> C64 {
    f0 * (expm1(dlog_up) - expm1(dlog_dn)) / (2.0 * delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::potential::InversionOptions;
    use proptest::prelude::*;

    #[test]
    fn zero_offset_probe_is_base() {
        let ch = LambdaChart::new(&fixtures::toda()).unwrap();
        let p = ch.probe(&[C64::new(0.0, 0.0); 2]).unwrap();
        assert!(p.dtheta.iter().all(|x| x.norm() == 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn probe_agrees_with_direct_inversion(seed in any::<u64>()) {
            let pot = fixtures::random_model(seed);
            let ch = LambdaChart::new(&pot).unwrap();
            let dlog: Vec<C64> = (0..ch.k())
                .map(|n| C64::new(1e-3 * (n as f64 + 1.0), -5e-4))
                .collect();
            let probe = ch.probe(&dlog).unwrap();
            let target: Vec<C64> = ch.frame.lam.iter().zip(&dlog).map(|(l, d)| l * d.exp()).collect();
            let inv = pot.params_from_lambda(&target, &InversionOptions::default()).unwrap();
            let direct = inv.potential.params();
            let theta0 = pot.params();
            for j in 0..ch.k() {
                let mine = theta0[j] + probe.dtheta[j];
                prop_assert!((mine - direct[j]).norm() < 1e-11 * (1.0 + direct[j].norm()));
            }
            for n in 0..ch.k() {
                let g = ch.frame.gamma[n] + probe.dgamma[n];
                prop_assert!((g - inv.frame.gamma[n]).norm() < 1e-10 * g.norm());
            }
        }

        #[test]
        fn difference_forms_match_direct_evaluation(seed in any::<u64>()) {
            let pot = fixtures::random_model(seed);
            let ch = LambdaChart::new(&pot).unwrap();
            let z = fixtures::random_point(seed ^ 77, &pot);
            let dtheta: Vec<C64> = (0..ch.k()).map(|j| C64::new(1e-4, 2e-4 * j as f64)).collect();
            let dp = C64::new(-1e-4, 3e-5);
            let pot1 = ch.potential_at(&Probe { dtheta: dtheta.clone(), dgamma: vec![], iterations: 0 }).unwrap();
            let (l0, d10, d20) = pot.log_derivatives(z).unwrap();
            let (l1, d11, d21) = pot1.log_derivatives(z + dp).unwrap();
            prop_assert!((ch.dlog_lambda(&dtheta, z, dp) - (l1 - l0)).norm() < 1e-11);
            prop_assert!((ch.ddlog1(&dtheta, z, dp) - (d11 - d10)).norm() < 1e-11 * (1.0 + d10.norm()));
            prop_assert!((ch.ddlog2(&dtheta, z, dp) - (d21 - d20)).norm() < 1e-11 * (1.0 + d20.norm()));
        }
    }
}
