//! Landau–Ginzburg potentials, their critical frames, and the map between
//! natural parameters and critical values.
//!
//! Case I:  `λ = p^{-N} ∏ (p - b_i)^{κ_i}` with `M̃ = Σκ_i - N > 0`.
//! Case II: `λ = ∏ (p - b_i)^{κ_i} exp(Σ_{k=1}^N c_k p^{-k})` with `M̃ = Σκ_i > 0`.
//!
//! Natural parameters are ordered `θ = (b_1, …, b_M, c_1, …, c_N)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::fd::LambdaChart;
use crate::poly;
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    I,
    II,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LGPotential {
    case: Case,
    n: i32,
    kappa: Vec<f64>,
    b: Vec<C64>,
    c: Vec<C64>,
}

/// Relative gap below which two critical points (or a critical point and a
/// pole) count as colliding.
pub const COLLISION_TOL: f64 = 1e-8;

const Q_RESIDUAL_TOL: f64 = 1e-9;

impl LGPotential {
    /// Validates raw parameters. Every violated condition is reported.
    pub fn new(case: Case, n: i32, kappa: Vec<f64>, b: Vec<C64>, c: Vec<C64>) -> Result<Self> {
        let mut errs: Vec<String> = Vec::new();
        match case {
            Case::I => {
                if n == 0 {
                    errs.push("N must be nonzero".into());
                }
                if !c.is_empty() {
                    errs.push("c must be empty for Case I".into());
                }
            }
            Case::II => {
                if n <= 0 {
                    errs.push("N must be positive".into());
                } else if c.len() != n as usize {
                    errs.push(format!("c must have N = {n} entries, got {}", c.len()));
                } else if c[n as usize - 1] == C64::new(0.0, 0.0) {
                    errs.push("c_N must be nonzero".into());
                }
            }
        }
        if kappa.is_empty() {
            errs.push("at least one zero b_i is required".into());
        }
        if kappa.len() != b.len() {
            errs.push(format!(
                "kappa has {} entries but b has {}",
                kappa.len(),
                b.len()
            ));
        }
        for (i, k) in kappa.iter().enumerate() {
            if *k == 0.0 || !k.is_finite() {
                errs.push(format!("kappa_{} must be nonzero and finite", i + 1));
            }
        }
        for (i, bi) in b.iter().enumerate() {
            if *bi == C64::new(0.0, 0.0) {
                errs.push(format!("b_{} must be nonzero", i + 1));
            }
            if !bi.re.is_finite() || !bi.im.is_finite() {
                errs.push(format!("b_{} must be finite", i + 1));
            }
            for (j, bj) in b.iter().enumerate().take(i) {
                if bi == bj {
                    errs.push(format!("b_{} and b_{} must be distinct", j + 1, i + 1));
                }
            }
        }
        for (k, ck) in c.iter().enumerate() {
            if !ck.re.is_finite() || !ck.im.is_finite() {
                errs.push(format!("c_{} must be finite", k + 1));
            }
        }
        let sum: f64 = kappa.iter().sum();
        let mtilde = match case {
            Case::I => sum - n as f64,
            Case::II => sum,
        };
        if mtilde <= 0.0 {
            errs.push(format!("Mtilde must be positive (got {mtilde})"));
        }
        if errs.is_empty() {
            Ok(Self { case, n, kappa, b, c })
        } else {
            Err(Error::InvalidParameters(errs.join("; ")))
        }
    }

    pub fn case_i(n: i32, kappa: Vec<f64>, b: Vec<C64>) -> Result<Self> {
        Self::new(Case::I, n, kappa, b, Vec::new())
    }

    pub fn case_ii(kappa: Vec<f64>, b: Vec<C64>, c: Vec<C64>) -> Result<Self> {
        let n = c.len() as i32;
        Self::new(Case::II, n, kappa, b, c)
    }

    pub fn case(&self) -> Case {
        self.case
    }

    pub fn n(&self) -> i32 {
        self.n
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn b(&self) -> &[C64] {
        &self.b
    }

    pub fn c(&self) -> &[C64] {
        &self.c
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn mtilde(&self) -> f64 {
        let sum: f64 = self.kappa.iter().sum();
        match self.case {
            Case::I => sum - self.n as f64,
            Case::II => sum,
        }
    }

    /// Number of critical points, equal to the number of natural parameters.
    pub fn k_dim(&self) -> usize {
        self.b.len() + self.c.len()
    }

    pub fn params(&self) -> Vec<C64> {
        self.b.iter().chain(self.c.iter()).copied().collect()
    }

    /// Same case, `N` and exponents with new natural parameters.
    pub fn with_params(&self, theta: &[C64]) -> Result<Self> {
        if theta.len() != self.k_dim() {
            return Err(Error::InvalidParameters(format!(
                "expected {} parameters, got {}",
                self.k_dim(),
                theta.len()
            )));
        }
        let m = self.m();
        Self::new(
            self.case,
            self.n,
            self.kappa.clone(),
            theta[..m].to_vec(),
            theta[m..].to_vec(),
        )
    }

    /// Homogeneity weight of each natural parameter: 1 for `b_i`, `k` for `c_k`.
    pub fn param_weights(&self) -> Vec<f64> {
        (0..self.m())
            .map(|_| 1.0)
            .chain((1..=self.c.len()).map(|k| k as f64))
            .collect()
    }

    /// `b → ρb`, `c_k → ρ^k c_k`, under which `λ(ρp) = ρ^{M̃} λ(p)`.
    pub fn scaled(&self, rho: C64) -> Result<Self> {
        let theta: Vec<C64> = self
            .params()
            .iter()
            .zip(self.param_weights())
            .map(|(t, w)| t * rho.powi(w as i32))
            .collect();
        self.with_params(&theta)
    }

    fn check_regular(&self, p: C64) -> Result<()> {
        if p == C64::new(0.0, 0.0) && (self.case == Case::II || self.n != 0) {
            return Err(Error::InvalidParameters("evaluation at the pole p = 0".into()));
        }
        if let Some(i) = self.b.iter().position(|b| *b == p) {
            return Err(Error::InvalidParameters(format!(
                "evaluation at the branch point b_{}",
                i + 1
            )));
        }
        Ok(())
    }

    /// `log λ(p)` with principal-branch logarithms taken term by term.
    pub fn log_lambda(&self, p: C64) -> Result<C64> {
        self.check_regular(p)?;
        let mut acc: C64 = self
            .kappa
            .iter()
            .zip(&self.b)
            .map(|(k, b)| (p - b).ln() * k)
            .sum();
        match self.case {
            Case::I => acc -= p.ln() * self.n as f64,
            Case::II => {
                let w = p.inv();
                for (k, c) in self.c.iter().enumerate() {
                    acc += c * w.powi(k as i32 + 1);
                }
            }
        }
        Ok(acc)
    }

    pub fn lambda(&self, p: C64) -> Result<C64> {
        Ok(self.log_lambda(p)?.exp())
    }

    /// `(log λ, (log λ)′, (log λ)″)` at `p`.
    pub fn log_derivatives(&self, p: C64) -> Result<(C64, C64, C64)> {
        let l0 = self.log_lambda(p)?;
        let (l1, l2) = self.dlog(p);
        Ok((l0, l1, l2))
    }

    // branch-free first and second derivatives of log λ
    fn dlog(&self, p: C64) -> (C64, C64) {
        let mut d1 = C64::new(0.0, 0.0);
        let mut d2 = C64::new(0.0, 0.0);
        for (k, b) in self.kappa.iter().zip(&self.b) {
            let r = (p - b).inv();
            d1 += r * k;
            d2 -= r * r * k;
        }
        let w = p.inv();
        match self.case {
            Case::I => {
                let n = self.n as f64;
                d1 -= w * n;
                d2 += w * w * n;
            }
            Case::II => {
                for (idx, c) in self.c.iter().enumerate() {
                    let k = (idx + 1) as f64;
                    let wk = w.powi(idx as i32 + 1);
                    d1 -= c * wk * w * k;
                    d2 += c * wk * w * w * (k * (k + 1.0));
                }
            }
        }
        (d1, d2)
    }

    /// `∂ log λ(p) / ∂θ_j` at fixed `p`.
    pub fn dlog_dparams(&self, p: C64) -> Vec<C64> {
        let mut out: Vec<C64> = self
            .kappa
            .iter()
            .zip(&self.b)
            .map(|(k, b)| -(p - b).inv() * *k)
            .collect();
        let w = p.inv();
        out.extend((1..=self.c.len()).map(|k| w.powi(k as i32)));
        out
    }

    /// Ascending coefficients of the numerator of `(log λ)′`, whose roots
    /// are the critical points. Its leading coefficient is `M̃`.
    pub fn q_coeffs(&self) -> Vec<C64> {
        let one = C64::new(1.0, 0.0);
        let full = poly::from_roots(&self.b);
        let mut partial_sum = vec![C64::new(0.0, 0.0)];
        for i in 0..self.m() {
            let others: Vec<C64> = self
                .b
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, b)| *b)
                .collect();
            poly::add_into(
                &mut partial_sum,
                &poly::from_roots(&others),
                C64::new(self.kappa[i], 0.0),
            );
        }
        match self.case {
            Case::I => {
                let mut q = vec![C64::new(0.0, 0.0)];
                poly::add_into(&mut q, &full, C64::new(-(self.n as f64), 0.0));
                let shifted = poly::mul(&partial_sum, &[C64::new(0.0, 0.0), one]);
                poly::add_into(&mut q, &shifted, one);
                q
            }
            Case::II => {
                let n = self.n as usize;
                let mut pn1 = vec![C64::new(0.0, 0.0); n + 2];
                pn1[n + 1] = one;
                let mut q = poly::mul(&partial_sum, &pn1);
                // Σ_k k c_k p^{N-k}
                let mut cpoly = vec![C64::new(0.0, 0.0); n];
                for (idx, c) in self.c.iter().enumerate() {
                    let k = idx + 1;
                    cpoly[n - k] = c * k as f64;
                }
                poly::add_into(&mut q, &poly::mul(&full, &cpoly), -one);
                q.truncate(self.k_dim() + 1);
                q
            }
        }
    }

    /// Critical frame ordered lexicographically (real part, then imaginary).
    pub fn critical_frame(&self) -> Result<CriticalFrame> {
        let q = self.q_coeffs();
        let mut gamma = poly::roots(&q)?;
        sort_lexicographic(&mut gamma);
        self.frame_at(gamma, q)
    }

    /// Critical frame ordered by nearest-neighbour matching to `reference`.
    pub fn critical_frame_near(&self, reference: &[C64]) -> Result<CriticalFrame> {
        let q = self.q_coeffs();
        let gamma = poly::roots(&q)?;
        let gamma = match_to_reference(&gamma, reference)?;
        self.frame_at(gamma, q)
    }

    fn frame_at(&self, gamma: Vec<C64>, q: Vec<C64>) -> Result<CriticalFrame> {
        let scale = gamma.iter().map(|g| g.norm()).fold(0.0, f64::max);
        let mut separation = f64::INFINITY;
        for i in 0..gamma.len() {
            for j in 0..i {
                separation = separation.min((gamma[i] - gamma[j]).norm());
            }
        }
        if gamma.len() > 1 && separation <= COLLISION_TOL * scale {
            return Err(Error::DegenerateFrame(format!(
                "assumption 'has M distinct zeroes' violated: critical points collide (separation {separation:e})"
            )));
        }
        for g in &gamma {
            if g.norm() <= COLLISION_TOL * scale {
                return Err(Error::DegenerateFrame("critical point at p = 0".into()));
            }
            if let Some(i) = self
                .b
                .iter()
                .position(|b| (g - b).norm() <= COLLISION_TOL * scale.max(b.norm()))
            {
                return Err(Error::DegenerateFrame(format!(
                    "critical point collides with b_{}",
                    i + 1
                )));
            }
            let res = poly::eval(&q, *g).norm();
            if res > Q_RESIDUAL_TOL * poly::abs_eval(&q, *g) {
                return Err(Error::DegenerateFrame(format!(
                    "critical point {g} not resolved (|Q| = {res:e})"
                )));
            }
        }
        let mut log_lam = Vec::with_capacity(gamma.len());
        let mut dlog2 = Vec::with_capacity(gamma.len());
        for g in &gamma {
            log_lam.push(self.log_lambda(*g)?);
            dlog2.push(self.dlog(*g).1);
        }
        let lam: Vec<C64> = log_lam.iter().map(|l| l.exp()).collect();
        let d2: Vec<C64> = lam.iter().zip(&dlog2).map(|(l, d)| l * d).collect();
        let alpha = gamma
            .iter()
            .zip(&d2)
            .map(|(g, d)| (g * d).inv())
            .collect();
        Ok(CriticalFrame {
            gamma,
            log_lam,
            lam,
            d2,
            dlog2,
            alpha,
            separation,
            q_coeffs: q,
        })
    }

    /// `∂λ_n/∂θ_j = λ_n (∂ log λ/∂θ_j)(γ_n)`; the implicit dependence through
    /// `γ_n` drops out because `λ′(γ_n) = 0`.
    pub fn envelope_jacobian(&self, frame: &CriticalFrame) -> DMatrix<C64> {
        let k = self.k_dim();
        let mut j = DMatrix::zeros(frame.len(), k);
        for (n, (g, l)) in frame.gamma.iter().zip(&frame.lam).enumerate() {
            for (col, d) in self.dlog_dparams(*g).into_iter().enumerate() {
                j[(n, col)] = l * d;
            }
        }
        j
    }

    /// Jacobian of `log λ_n` with respect to `θ`.
    pub fn log_envelope_jacobian(&self, frame: &CriticalFrame) -> DMatrix<C64> {
        let k = self.k_dim();
        let mut j = DMatrix::zeros(frame.len(), k);
        for (n, g) in frame.gamma.iter().enumerate() {
            for (col, d) in self.dlog_dparams(*g).into_iter().enumerate() {
                j[(n, col)] = d;
            }
        }
        j
    }

    /// Natural parameters whose critical values are `target`, starting from
    /// `self`. The ordering of `target` follows `self`'s critical frame.
    ///
    /// `λ_n` is matched along the continuation from `self`. For non-integer
    /// `κ_i` the principal values in the returned frame can differ from
    /// `target` by factors `e^{2πiκ_i}`.
    pub fn params_from_lambda(&self, target: &[C64], opts: &InversionOptions) -> Result<Inversion> {
        let frame = self.critical_frame()?;
        self.params_from_lambda_near(&frame, target, opts)
    }

    /// As [`Self::params_from_lambda`], with `frame` fixing the ordering.
    pub fn params_from_lambda_near(
        &self,
        frame: &CriticalFrame,
        target: &[C64],
        opts: &InversionOptions,
    ) -> Result<Inversion> {
        let k = self.k_dim();
        if target.len() != k {
            return Err(Error::Inversion(format!(
                "expected {k} critical values, got {}",
                target.len()
            )));
        }
        let tscale = target.iter().map(|t| t.norm()).fold(0.0, f64::max);
        for i in 0..k {
            if target[i] == C64::new(0.0, 0.0) {
                return Err(Error::Inversion("critical value zero is not attainable".into()));
            }
            for j in 0..i {
                if (target[i] - target[j]).norm() <= 1e-12 * tscale {
                    return Err(Error::Inversion(format!(
                        "target critical values {} and {} coincide",
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        // r_n = log λ_n − log target_n, continued from the starting frame
        // (principal values jump by e^{2πiκ_i} when γ_n − b_i crosses a cut)
        let norm = |r: &[C64]| r.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let mut pot = self.clone();
        let mut fr = frame.clone();
        let mut r: Vec<C64> = fr.lam.iter().zip(target).map(|(l, t)| (l / t).ln()).collect();
        let mut res = norm(&r);
        let mut iterations = 0;
        while iterations < opts.max_iter {
            if res == 0.0 {
                break;
            }
            let j = pot.log_envelope_jacobian(&fr);
            let rhs = DVector::from_iterator(k, r.iter().map(|x| -x));
            let step = poly::solve(&j, &rhs, "envelope Jacobian is singular")?;
            let chart = LambdaChart::with_frame(&pot, fr.clone());
            let theta = pot.params();
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..opts.max_halvings {
                let dtheta: Vec<C64> = step.iter().map(|d| d * t).collect();
                let trial: Vec<C64> = theta.iter().zip(&dtheta).map(|(a, d)| a + d).collect();
                if let Ok(p2) = pot.with_params(&trial) {
                    if let Ok(f2) = p2.critical_frame_near(&fr.gamma) {
                        let r2: Vec<C64> = (0..k)
                            .map(|n| r[n] + chart.dlog_lambda(&dtheta, fr.gamma[n], f2.gamma[n] - fr.gamma[n]))
                            .collect();
                        let res2 = norm(&r2);
                        if res2 < res || (res2 <= res && res <= opts.tol) {
                            accepted = Some((p2, f2, r2, res2));
                            break;
                        }
                    }
                }
                t *= 0.5;
            }
            iterations += 1;
            match accepted {
                Some((p2, f2, r2, res2)) => {
                    let old = res;
                    pot = p2;
                    fr = f2;
                    r = r2;
                    res = res2;
                    if res <= opts.tol && res > 0.25 * old {
                        break;
                    }
                }
                None => {
                    if res <= opts.tol {
                        break;
                    }
                    return Err(Error::Inversion(format!(
                        "Newton iteration diverged (residual {res:e} after {iterations} steps)"
                    )));
                }
            }
        }
        if res > opts.tol {
            return Err(Error::Inversion(format!(
                "no convergence in {} iterations (residual {res:e})",
                opts.max_iter
            )));
        }
        Ok(Inversion {
            potential: pot,
            frame: fr,
            iterations,
            residual: res,
        })
    }
}

#[derive(Clone, Debug)]
pub struct InversionOptions {
    /// Bound on `max_n |log(λ_n/target_n)|` at exit.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 60,
            max_halvings: 30,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Inversion {
    pub potential: LGPotential,
    pub frame: CriticalFrame,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalFrame {
    pub gamma: Vec<C64>,
    /// `log λ(γ_n)` with the principal branch policy of [`LGPotential::log_lambda`].
    pub log_lam: Vec<C64>,
    pub lam: Vec<C64>,
    /// `λ″(γ_n)`.
    pub d2: Vec<C64>,
    /// `(log λ)″(γ_n)`.
    pub dlog2: Vec<C64>,
    /// `α_n = 1/(γ_n λ″(γ_n))`.
    pub alpha: Vec<C64>,
    pub separation: f64,
    pub q_coeffs: Vec<C64>,
}

impl CriticalFrame {
    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }
}

fn lex_less(a: C64, b: C64, tol: f64) -> bool {
    if (a.re - b.re).abs() > tol {
        a.re < b.re
    } else {
        a.im < b.im
    }
}

/// Sorts by real part (ties within a relative `1e-10`), then imaginary part.
pub fn sort_lexicographic(z: &mut [C64]) {
    let scale = z.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let tol = 1e-10 * scale;
    // insertion sort: the tie tolerance is not transitive
    for i in 1..z.len() {
        let mut j = i;
        while j > 0 && lex_less(z[j], z[j - 1], tol) {
            z.swap(j, j - 1);
            j -= 1;
        }
    }
}

/// Reorders `points` so that entry `n` is the one closest to `reference[n]`,
/// assigning the globally closest pairs first.
pub fn match_to_reference(points: &[C64], reference: &[C64]) -> Result<Vec<C64>> {
    if points.len() != reference.len() {
        return Err(Error::DegenerateFrame(format!(
            "cannot match {} points to {} reference points",
            points.len(),
            reference.len()
        )));
    }
    let n = points.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, r) in reference.iter().enumerate() {
        for (j, p) in points.iter().enumerate() {
            pairs.push(((r - p).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![None; n];
    let mut used = vec![false; n];
    for (_, i, j) in pairs {
        if out[i].is_none() && !used[j] {
            out[i] = Some(points[j]);
            used[j] = true;
        }
    }
    Ok(out.into_iter().map(|x| x.unwrap()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    fn r(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn validation_examples() {
        let p = LGPotential::case_i(1, vec![1.0, 1.0], vec![r(3.0), r(1.0)]).unwrap();
        assert_eq!(p.mtilde(), 1.0);
        assert_eq!(p.k_dim(), 2);
        let e = LGPotential::case_i(2, vec![1.0, 1.0], vec![r(3.0), r(1.0)]).unwrap_err();
        assert!(e.to_string().contains("Mtilde must be positive"), "{e}");
        let e = LGPotential::case_ii(vec![1.0], vec![r(1.0)], vec![r(0.0)]).unwrap_err();
        assert!(e.to_string().contains("c_N must be nonzero"), "{e}");
    }

    #[test]
    fn validation_names_each_violation() {
        let e = LGPotential::case_i(0, vec![0.0, 1.0], vec![r(0.0), r(0.0)]).unwrap_err();
        let s = e.to_string();
        for needle in ["N must be nonzero", "kappa_1", "b_1 must be nonzero", "distinct"] {
            assert!(s.contains(needle), "missing {needle}: {s}");
        }
    }

    #[test]
    fn toda_log_derivative_vanishes_at_sqrt3() {
        let p = fixtures::toda();
        let (_, d1, _) = p.log_derivatives(r(3f64.sqrt())).unwrap();
        assert!(d1.norm() < 1e-15);
        assert!(p.log_derivatives(r(0.0)).is_err());
        assert!(p.log_derivatives(r(3.0)).is_err());
    }

    #[test]
    fn case_two_log_derivative_at_large_p() {
        let p = fixtures::case_two_simple();
        let big = r(1e8);
        let (_, d1, _) = p.log_derivatives(big).unwrap();
        assert!((d1 * big - r(1.0)).norm() < 1e-7);
    }

    #[test]
    fn toda_frame_closed_form() {
        let f = fixtures::toda().critical_frame().unwrap();
        let s3 = 3f64.sqrt();
        assert!((f.gamma[0] - r(-s3)).norm() < 1e-14);
        assert!((f.gamma[1] - r(s3)).norm() < 1e-14);
        assert!((f.lam[0] - r(-4.0 - 2.0 * s3)).norm() < 1e-13);
        assert!((f.lam[1] - r(-4.0 + 2.0 * s3)).norm() < 1e-13);
        assert!((f.d2[0] - r(-2.0 / s3)).norm() < 1e-13);
        assert!((f.d2[1] - r(2.0 / s3)).norm() < 1e-13);
    }

    #[test]
    fn ablowitz_ladik_frame_closed_form() {
        let p = fixtures::ablowitz_ladik();
        let q = p.q_coeffs();
        assert!((q[0] - r(2.0)).norm() < 1e-15);
        assert!((q[1] - r(-4.0)).norm() < 1e-15);
        assert!((q[2] - r(1.0)).norm() < 1e-15);
        let f = p.critical_frame().unwrap();
        let s2 = 2f64.sqrt();
        assert!((f.gamma[0] - r(2.0 - s2)).norm() < 1e-14);
        assert!((f.gamma[1] - r(2.0 + s2)).norm() < 1e-14);
        assert!((f.lam[0] - r(3.0 - 2.0 * s2)).norm() < 1e-13);
        assert!((f.lam[1] - r(3.0 + 2.0 * s2)).norm() < 1e-13);
    }

    #[test]
    fn case_two_frame_closed_form() {
        let p = fixtures::case_two_simple();
        let q = p.q_coeffs();
        assert_eq!(q.len(), 3);
        assert!((q[0] - r(5.0)).norm() < 1e-15);
        assert!((q[1] - r(-5.0)).norm() < 1e-15);
        assert!((q[2] - r(1.0)).norm() < 1e-15);
        let f = p.critical_frame().unwrap();
        let s5 = 5f64.sqrt();
        let g = [(5.0 - s5) / 2.0, (5.0 + s5) / 2.0];
        for n in 0..2 {
            assert!((f.gamma[n] - r(g[n])).norm() < 1e-14);
            let lam = (g[n] - 1.0) * (5.0 / g[n]).exp();
            assert!((f.lam[n] - r(lam)).norm() < 1e-12 * lam);
        }
        assert!((f.lam[0].re - 14.233_670_8).abs() < 1e-6);
        assert!((f.lam[1].re - 10.426_906_8).abs() < 1e-6);
    }

    #[test]
    fn collision_is_reported() {
        // Q = p^2 - c p + 2c has a double root at p = 4 when c = 8
        let ok = LGPotential::case_ii(vec![1.0], vec![r(2.0)], vec![r(7.0)]).unwrap();
        assert!(ok.critical_frame().is_ok());
        let deg = LGPotential::case_ii(vec![1.0], vec![r(2.0)], vec![r(8.0)]).unwrap();
        let e = deg.critical_frame().unwrap_err();
        assert!(e.to_string().contains("has M distinct zeroes"), "{e}");
    }

    #[test]
    fn toda_jacobian_entry() {
        let p = fixtures::toda();
        let f = p.critical_frame().unwrap();
        let j = p.envelope_jacobian(&f);
        let s3 = 3f64.sqrt();
        // n at γ = √3, i = b_1 = 3
        let expect = f.lam[1] * (-(r(s3) - r(3.0)).inv());
        assert!((j[(1, 0)] - expect).norm() < 1e-14);
    }

    #[test]
    fn inversion_fixed_point_and_roundtrip() {
        let p = fixtures::toda();
        let f = p.critical_frame().unwrap();
        let inv = p.params_from_lambda(&f.lam, &InversionOptions::default()).unwrap();
        assert_eq!(inv.iterations, 0);
        assert_eq!(inv.potential, p);
        let target: Vec<C64> = f.lam.iter().map(|l| l * (1.0 + 1e-3)).collect();
        let inv = p.params_from_lambda(&target, &InversionOptions::default()).unwrap();
        let back = inv.potential.critical_frame_near(&f.gamma).unwrap();
        for (a, b) in back.lam.iter().zip(&target) {
            assert!((a - b).norm() < 1e-10 * b.norm());
        }
    }

    #[test]
    fn inversion_rejects_equal_targets() {
        let p = fixtures::toda();
        let e = p
            .params_from_lambda(&[r(-1.0), r(-1.0)], &InversionOptions::default())
            .unwrap_err();
        assert!(matches!(e, Error::Inversion(_)));
    }

    fn fd_frame_jacobian(p: &LGPotential) -> (DMatrix<C64>, DMatrix<C64>) {
        let f = p.critical_frame().unwrap();
        let theta = p.params();
        let k = p.k_dim();
        let mut fd = DMatrix::zeros(k, k);
        for j in 0..k {
            let h = 1e-6 * theta[j].norm().max(1.0);
            let mut tp = theta.clone();
            tp[j] += h;
            let mut tm = theta.clone();
            tm[j] -= h;
            let fp = p.with_params(&tp).unwrap().critical_frame_near(&f.gamma).unwrap();
            let fm = p.with_params(&tm).unwrap().critical_frame_near(&f.gamma).unwrap();
            for n in 0..k {
                fd[(n, j)] = (fp.lam[n] - fm.lam[n]) / (2.0 * h);
            }
        }
        (p.envelope_jacobian(&f), fd)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn log_derivative_matches_fd(seed in any::<u64>()) {
            let p = fixtures::random_model(seed);
            let z = fixtures::random_point(seed ^ 0x5555, &p);
            let h = 1e-6 * z.norm();
            let (_, d1, d2) = p.log_derivatives(z).unwrap();
            let lp = p.log_lambda(z + h).unwrap();
            let lm = p.log_lambda(z - h).unwrap();
            // the step is far below any branch cut distance chosen by random_point
            let fd1 = (lp - lm) / (2.0 * h);
            prop_assert!((fd1 - d1).norm() < 1e-6 * (1.0 + d1.norm()));
            let (_, ep, _) = p.log_derivatives(z + h).unwrap();
            let (_, em, _) = p.log_derivatives(z - h).unwrap();
            prop_assert!(((ep - em) / (2.0 * h) - d2).norm() < 1e-6 * (1.0 + d2.norm()));
        }

        #[test]
        fn roots_trace_matches_coefficients(seed in any::<u64>()) {
            let p = fixtures::random_model(seed);
            let f = p.critical_frame().unwrap();
            let q = &f.q_coeffs;
            let d = q.len() - 1;
            let trace: C64 = f.gamma.iter().sum();
            let expect = -q[d - 1] / q[d];
            prop_assert!((trace - expect).norm() < 1e-10 * (1.0 + expect.norm()));
            prop_assert!((q[d] - C64::new(p.mtilde(), 0.0)).norm() < 1e-12 * p.mtilde());
        }

        #[test]
        fn envelope_jacobian_matches_fd(seed in any::<u64>()) {
            let p = fixtures::random_model(seed);
            let (j, fd) = fd_frame_jacobian(&p);
            let scale = j.iter().map(|x| x.norm()).fold(0.0, f64::max);
            let err = (j - fd).iter().map(|x| x.norm()).fold(0.0, f64::max);
            prop_assert!(err < 1e-6 * scale, "err {err:e} scale {scale:e}");
        }

        #[test]
        fn euler_identity(seed in any::<u64>()) {
            let p = fixtures::random_model(seed);
            let f = p.critical_frame().unwrap();
            let j = p.envelope_jacobian(&f);
            let theta = p.params();
            let w = p.param_weights();
            for n in 0..p.k_dim() {
                let s: C64 = (0..p.k_dim()).map(|c| j[(n, c)] * theta[c] * w[c]).sum();
                let expect = f.lam[n] * p.mtilde();
                prop_assert!((s - expect).norm() < 1e-10 * expect.norm());
            }
        }

        #[test]
        fn homogeneity_under_scaling(seed in any::<u64>()) {
            let p = fixtures::random_model(seed);
            let rho = 1.1;
            let f = p.critical_frame().unwrap();
            let g = p.scaled(C64::new(rho, 0.0)).unwrap().critical_frame().unwrap();
            for n in 0..p.k_dim() {
                prop_assert!((g.gamma[n] - f.gamma[n] * rho).norm() < 1e-10 * (f.gamma[n].norm() * rho));
                let expect = f.lam[n] * rho.powf(p.mtilde());
                prop_assert!((g.lam[n] - expect).norm() < 1e-10 * expect.norm());
            }
        }

        #[test]
        fn inversion_roundtrip(seed in any::<u64>()) {
            let p = fixtures::random_model(seed);
            let f = p.critical_frame().unwrap();
            let target: Vec<C64> = f
                .lam
                .iter()
                .enumerate()
                .map(|(n, l)| l * C64::new(1.0 + 1e-3 * (n as f64 + 1.0), 5e-4))
                .collect();
            let inv = p.params_from_lambda(&target, &InversionOptions::default()).unwrap();
            for (a, b) in inv.frame.lam.iter().zip(&target) {
                prop_assert!((a - b).norm() < 1e-10 * b.norm());
            }
        }
    }
}
