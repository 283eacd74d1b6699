//! Residue pairings and cubic forms, metric matrices in natural, critical
//! value and flat charts, flat coordinates and product structures.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::lax::{self, Branch, Side};
use crate::loewner::alpha_coeffs;
use crate::poly;
use crate::potential::{Case, CriticalFrame, LGPotential};
use crate::series::{Center, TruncatedSeries};
use crate::{fixtures, Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Angle,
    Round,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    Natural,
    Lambda,
    Flat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub chart: Chart,
    pub components: Vec<C64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlatKind {
    DZCaseI,
    CaseII,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlatChart {
    pub kind: FlatKind,
    pub labels: Vec<String>,
    pub values: Vec<C64>,
    /// `∂(flat)/∂θ`.
    pub jacobian: DMatrix<C64>,
}

/// Relative step for flat-chart Jacobians.
pub const FLAT_FD_STEP: f64 = 1e-6;

fn check_form(pot: &LGPotential, form: Form) -> Result<()> {
    if form == Form::Angle && pot.case() == Case::II {
        return Err(Error::InvalidParameters(
            "the angle form is not defined for Case II potentials (essential singularity at p = 0)"
                .into(),
        ));
    }
    Ok(())
}

/// Residue weights at the critical points: the pole at `γ_n` contributes
/// `w_n Π(∂ log λ)(γ_n)` to a pairing or cubic form.
fn weights(frame: &CriticalFrame, alpha: &[C64], form: Form, slots: i32) -> Vec<C64> {
    (0..frame.len())
        .map(|n| {
            let base = alpha[n] / frame.gamma[n];
            match form {
                Form::Angle => base * frame.lam[n].powi(slots),
                Form::Round => base * frame.lam[n],
            }
        })
        .collect()
}

/// Values `∂_a log λ(γ_n)` of the chart basis vectors, entry `[(n, a)]`.
pub struct ChartBasis {
    pub chart: Chart,
    pub values: DMatrix<C64>,
    pub frame: CriticalFrame,
    pub alpha: Vec<C64>,
}

fn natural_values(pot: &LGPotential, frame: &CriticalFrame) -> DMatrix<C64> {
    let k = pot.k_dim();
    let mut d = DMatrix::zeros(frame.len(), k);
    for n in 0..frame.len() {
        for (i, v) in pot.dlog_dparams(frame.gamma[n]).into_iter().enumerate() {
            d[(n, i)] = v;
        }
    }
    d
}

pub fn chart_basis(pot: &LGPotential, chart: Chart) -> Result<ChartBasis> {
    let frame = pot.critical_frame()?;
    let alpha = alpha_coeffs(&frame)?.alpha;
    let d = natural_values(pot, &frame);
    let values = match chart {
        Chart::Natural => d,
        Chart::Lambda => {
            let j = pot.envelope_jacobian(&frame);
            &d * poly::inverse(&j, "envelope Jacobian is singular")?
        }
        Chart::Flat => {
            let fc = flat_coordinates(pot)?;
            &d * poly::inverse(&fc.jacobian, "flat chart Jacobian is singular")?
        }
    };
    Ok(ChartBasis {
        chart,
        values,
        frame,
        alpha,
    })
}

fn derivative_values(basis: &ChartBasis, v: &TangentVector) -> Result<Vec<C64>> {
    if v.chart != basis.chart || v.components.len() != basis.values.ncols() {
        return Err(Error::InvalidParameters(format!(
            "tangent vector in {:?} chart with {} components does not match the {:?} basis",
            v.chart,
            v.components.len(),
            basis.chart
        )));
    }
    Ok((0..basis.values.nrows())
        .map(|n| (0..v.components.len()).map(|a| basis.values[(n, a)] * v.components[a]).sum())
        .collect())
}

/// Pairing of two tangent vectors as a sum of residues at the critical points.
pub fn pairing(pot: &LGPotential, form: Form, x: &TangentVector, y: &TangentVector) -> Result<C64> {
    check_form(pot, form)?;
    let basis = chart_basis(pot, x.chart)?;
    let (dx, dy) = (derivative_values(&basis, x)?, derivative_values(&basis, y)?);
    let w = weights(&basis.frame, &basis.alpha, form, 2);
    Ok((0..w.len()).map(|n| w[n] * dx[n] * dy[n]).sum())
}

pub fn cubic(
    pot: &LGPotential,
    form: Form,
    x: &TangentVector,
    y: &TangentVector,
    z: &TangentVector,
) -> Result<C64> {
    check_form(pot, form)?;
    let basis = chart_basis(pot, x.chart)?;
    let dx = derivative_values(&basis, x)?;
    let dy = derivative_values(&basis, y)?;
    let dz = derivative_values(&basis, z)?;
    let w = weights(&basis.frame, &basis.alpha, form, 3);
    Ok((0..w.len()).map(|n| w[n] * dx[n] * dy[n] * dz[n]).sum())
}

fn gram(basis: &ChartBasis, form: Form) -> DMatrix<C64> {
    let w = weights(&basis.frame, &basis.alpha, form, 2);
    let e = &basis.values;
    let k = e.ncols();
    DMatrix::from_fn(k, k, |a, b| (0..w.len()).map(|n| w[n] * e[(n, a)] * e[(n, b)]).sum())
}

fn cubic_tensor(basis: &ChartBasis, form: Form) -> Vec<C64> {
    let w = weights(&basis.frame, &basis.alpha, form, 3);
    let e = &basis.values;
    let k = e.ncols();
    let mut out = vec![C64::new(0.0, 0.0); k * k * k];
    for a in 0..k {
        for b in 0..k {
            for c in 0..k {
                out[(a * k + b) * k + c] =
                    (0..w.len()).map(|n| w[n] * e[(n, a)] * e[(n, b)] * e[(n, c)]).sum();
            }
        }
    }
    out
}

/// Gram matrix of the chart basis.
pub fn metric_matrix(pot: &LGPotential, form: Form, chart: Chart) -> Result<DMatrix<C64>> {
    check_form(pot, form)?;
    Ok(gram(&chart_basis(pot, chart)?, form))
}

/// `true` when the Case I potential belongs to the subfamily with
/// `κ_i = 1` and `N ≥ 1`.
pub fn is_dz(pot: &LGPotential) -> bool {
    pot.case() == Case::I && pot.n() >= 1 && pot.kappa().iter().all(|k| *k == 1.0)
}

fn coeff0(s: &TruncatedSeries) -> Result<C64> {
    s.coeff_p(0)
        .ok_or_else(|| Error::Series("constant term lies outside the window".into()))
}

// flat coordinates other than those with closed-form derivatives
fn series_coordinates(pot: &LGPotential, kind: FlatKind, branch: &Branch) -> Result<Vec<C64>> {
    let n_pole = pot.n() as u32;
    let mut out = Vec::new();
    if kind == FlatKind::DZCaseI {
        let mt = pot.mtilde().round() as u32;
        for n in 1..mt {
            let zn = lax::lax_power(pot, Side::Z, n, lax::default_window(pot, n), branch)?;
            out.push(-coeff0(&zn)? / n as f64);
        }
    }
    let top = match kind {
        FlatKind::DZCaseI => n_pole,
        FlatKind::CaseII => n_pole - 1,
    };
    for n in 1..=top {
        let zn = lax::lax_power(pot, Side::Zbar, n, lax::default_window(pot, n), branch)?;
        out.push(coeff0(&zn)? / n as f64);
    }
    Ok(out)
}

/// Flat coordinates: `(q_1..q_{M̃-1}, q̄_0 = φ, q̄_1..q̄_N)` for the `κ_i = 1`,
/// `N ≥ 1` Case I subfamily, `(log b_i, q̄_0 = φ, q̄_1..q̄_{N-1})` for Case II.
pub fn flat_coordinates(pot: &LGPotential) -> Result<FlatChart> {
    let kind = match pot.case() {
        Case::II => FlatKind::CaseII,
        Case::I if is_dz(pot) => FlatKind::DZCaseI,
        Case::I => {
            return Err(Error::InvalidParameters(
                "flat coordinates by the residue formula need kappa_i = 1 and N >= 1; the metric is likely no longer flat in other cases"
                    .into(),
            ))
        }
    };
    let k = pot.k_dim();
    let m = pot.m();
    let n_pole = pot.n();
    let branch = Branch::principal(pot);
    let phi = branch.phi(pot);
    let series = series_coordinates(pot, kind, &branch)?;
    let mut labels = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    let mut jac = DMatrix::zeros(k, k);
    let mut fd_rows = Vec::new();
    match kind {
        FlatKind::DZCaseI => {
            let mt = pot.mtilde().round() as usize;
            for n in 1..mt {
                labels.push(format!("q{n}"));
                values.push(series[n - 1]);
                fd_rows.push(n - 1);
            }
            labels.push("qbar0".into());
            values.push(phi);
            // φ = (1/N) Σ log(-b_i)
            for i in 0..m {
                jac[(mt - 1, i)] = C64::new(1.0 / n_pole as f64, 0.0) / pot.b()[i];
            }
            for n in 1..=n_pole as usize {
                labels.push(format!("qbar{n}"));
                values.push(series[mt + n - 2]);
                fd_rows.push(mt - 1 + n);
            }
        }
        FlatKind::CaseII => {
            for (i, b) in pot.b().iter().enumerate() {
                labels.push(format!("log b{}", i + 1));
                values.push(b.ln());
                jac[(i, i)] = b.inv();
            }
            labels.push("qbar0".into());
            values.push(phi);
            // φ = (1/N) log c_N
            jac[(m, k - 1)] = (pot.c()[n_pole as usize - 1] * n_pole as f64).inv();
            for n in 1..n_pole as usize {
                labels.push(format!("qbar{n}"));
                values.push(series[n - 1]);
                fd_rows.push(m + n);
            }
        }
    }
    if !fd_rows.is_empty() {
        let theta = pot.params();
        let scale = theta.iter().map(|t| t.norm()).fold(0.0, f64::max);
        for j in 0..k {
            let h = FLAT_FD_STEP * scale;
            let shifted = |sign: f64| -> Result<Vec<C64>> {
                let mut t = theta.clone();
                t[j] += sign * h;
                let q = pot.with_params(&t)?;
                series_coordinates(&q, kind, &branch.continued(pot, &q))
            };
            let (up, dn) = (shifted(1.0)?, shifted(-1.0)?);
            for (s, row) in fd_rows.iter().enumerate() {
                jac[(*row, j)] = (up[s] - dn[s]) / (2.0 * h);
            }
        }
    }
    if poly::rcond(&jac) < poly::SINGULAR_RCOND {
        return Err(Error::SingularJacobian(
            "flat chart Jacobian to the natural parameters is singular".into(),
        ));
    }
    Ok(FlatChart {
        kind,
        labels,
        values,
        jacobian: jac,
    })
}

/// The constant flat metric of each chart kind.
pub fn flat_constants(pot: &LGPotential, kind: FlatKind) -> DMatrix<C64> {
    let k = pot.k_dim();
    let n = pot.n() as usize;
    let mut g = DMatrix::zeros(k, k);
    match kind {
        FlatKind::DZCaseI => {
            let mt = pot.mtilde().round() as usize;
            // q_a at index a-1 (a = 1..mt-1), qbar_a at index mt-1+a
            for a in 1..mt {
                for b in 1..mt {
                    if a + b == mt {
                        g[(a - 1, b - 1)] = C64::new(mt as f64, 0.0);
                    }
                }
            }
            for a in 0..=n {
                g[(mt - 1 + a, mt - 1 + n - a)] = C64::new(n as f64, 0.0);
            }
        }
        FlatKind::CaseII => {
            let m = pot.m();
            // the cross term is +κ_i: Res_{p=0} κ_i/(p − b_i) dlog p = −κ_i/b_i
            // enters with a minus sign
            for (i, kap) in pot.kappa().iter().enumerate() {
                g[(i, i)] = C64::new(-kap, 0.0);
                g[(i, m)] = C64::new(*kap, 0.0);
                g[(m, i)] = C64::new(*kap, 0.0);
            }
            for a in 1..n {
                g[(m + a, m + n - a)] = C64::new(n as f64, 0.0);
            }
        }
    }
    g
}

pub fn flat_form(kind: FlatKind) -> Form {
    match kind {
        FlatKind::DZCaseI => Form::Angle,
        FlatKind::CaseII => Form::Round,
    }
}

#[derive(Clone, Debug)]
pub struct FlatMetricReport {
    pub chart: FlatChart,
    pub form: Form,
    pub matrix: DMatrix<C64>,
    pub expected: DMatrix<C64>,
    /// Largest entrywise deviation from the constants at the given model.
    pub deviation: f64,
    /// Largest deviation from the constants over the sampled models.
    pub variation: f64,
    pub samples: usize,
}

/// Flat metric at `pot` and at `samples` seeded models of the same shape.
pub fn flat_metric_report(pot: &LGPotential, samples: usize, seed: u64) -> Result<FlatMetricReport> {
    let chart = flat_coordinates(pot)?;
    let form = flat_form(chart.kind);
    let matrix = metric_matrix(pot, form, Chart::Flat)?;
    let expected = flat_constants(pot, chart.kind);
    let dev = |m: &DMatrix<C64>| (m - &expected).iter().map(|x| x.norm()).fold(0.0, f64::max);
    let deviation = dev(&matrix);
    let mut variation: f64 = deviation;
    for s in 0..samples {
        let q = fixtures::random_params_like(seed.wrapping_add(s as u64), pot);
        variation = variation.max(dev(&metric_matrix(&q, form, Chart::Flat)?));
    }
    Ok(FlatMetricReport {
        chart,
        form,
        matrix,
        expected,
        deviation,
        variation,
        samples,
    })
}

#[derive(Clone, Debug)]
pub struct ProductStructure {
    /// `c^l_{jk}` at index `(l * K + j) * K + k`.
    pub constants: Vec<C64>,
    pub associativity: f64,
}

/// Structure constants from the metric and cubic form, with the largest
/// associativity defect relative to `max|c|²`.
pub fn product_structure(pot: &LGPotential, form: Form, chart: Chart) -> Result<ProductStructure> {
    check_form(pot, form)?;
    let basis = chart_basis(pot, chart)?;
    let k = basis.values.ncols();
    let g = gram(&basis, form);
    let ginv = poly::inverse(&g, "metric is singular in this chart")?;
    let c3 = cubic_tensor(&basis, form);
    let idx = |a: usize, b: usize, c: usize| (a * k + b) * k + c;
    let mut up = vec![C64::new(0.0, 0.0); k * k * k];
    for l in 0..k {
        for j in 0..k {
            for q in 0..k {
                up[idx(l, j, q)] = (0..k).map(|m| ginv[(l, m)] * c3[idx(m, j, q)]).sum();
            }
        }
    }
    let scale = up.iter().map(|x| x.norm()).fold(0.0, f64::max).powi(2);
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            for q in 0..k {
                for l in 0..k {
                    let left: C64 = (0..k).map(|m| up[idx(m, i, j)] * up[idx(l, m, q)]).sum();
                    let right: C64 = (0..k).map(|m| up[idx(m, j, q)] * up[idx(l, i, m)]).sum();
                    worst = worst.max((left - right).norm());
                }
            }
        }
    }
    Ok(ProductStructure {
        constants: up,
        associativity: if scale > 0.0 { worst / scale } else { worst },
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EulerResidual {
    /// `|λ_n(ρ·θ) − ρ^{M̃}λ_n| / |ρ^{M̃}λ_n|`.
    pub lambda_scaling: f64,
    /// `|γ_n(ρ·θ) − ργ_n| / |ργ_n|`.
    pub gamma_scaling: f64,
    /// `|E(λ_n) − λ_n| / |λ_n|` with `E` by central differences in `log ρ`.
    pub euler_field: f64,
}

/// Quasi-homogeneity of the critical values under `b → ρb`, `c_k → ρ^k c_k`.
pub fn euler_homogeneity_residual(pot: &LGPotential, rho: f64, h: f64) -> Result<EulerResidual> {
    let f0 = pot.critical_frame()?;
    let mt = pot.mtilde();
    let at = |r: f64| -> Result<CriticalFrame> {
        pot.scaled(C64::new(r, 0.0))?.critical_frame_near(&f0.gamma.iter().map(|g| g * r).collect::<Vec<_>>())
    };
    let fr = at(rho)?;
    let mut out = EulerResidual::default();
    let rm = rho.powf(mt);
    for n in 0..f0.len() {
        let want = f0.lam[n] * rm;
        out.lambda_scaling = out.lambda_scaling.max((fr.lam[n] - want).norm() / want.norm());
        let want = f0.gamma[n] * rho;
        out.gamma_scaling = out.gamma_scaling.max((fr.gamma[n] - want).norm() / want.norm());
    }
    let (up, dn) = (at(h.exp())?, at((-h).exp())?);
    for n in 0..f0.len() {
        let e = (up.lam[n] - dn.lam[n]) / (2.0 * h * mt);
        out.euler_field = out.euler_field.max((e - f0.lam[n]).norm() / f0.lam[n].norm());
    }
    Ok(out)
}

/// `exp(N q̄_N)` from the constant term of `z̄^N`, and `∏(-b_i)^{κ_i}`.
pub fn qbar_top_anchor(pot: &LGPotential) -> Result<(C64, C64)> {
    let n = pot.n() as u32;
    if pot.case() != Case::II {
        return Err(Error::InvalidParameters("defined for Case II potentials".into()));
    }
    let branch = Branch::principal(pot);
    let zn = lax::lax_power(pot, Side::Zbar, n, lax::default_window(pot, n), &branch)?;
    Ok((coeff0(&zn)?.exp(), lax::pi_product(pot)))
}

/// Coefficients of `w^j` (`j = 0..=N`, `w = 1/ζ`, `ζ = z̄(p)`) of
/// `(∂ log λ/∂q̄_n) / (p ∂_p log λ)` for a Case II potential.
pub fn qbar_derivative_coefficients(pot: &LGPotential, n: usize, window: usize) -> Result<Vec<C64>> {
    if pot.case() != Case::II {
        return Err(Error::InvalidParameters("defined for Case II potentials".into()));
    }
    let np = pot.n() as usize;
    if n >= np {
        return Err(Error::InvalidParameters(format!("q̄_{n} is not a chart coordinate (N = {np})")));
    }
    let fc = flat_coordinates(pot)?;
    let inv = poly::inverse(&fc.jacobian, "flat chart Jacobian is singular")?;
    let col = pot.m() + n;
    let order = window as i32;
    // numerator Σ v_j ∂_j log λ at p = 0
    let mut num: Vec<(i32, C64)> = Vec::new();
    for (i, (kap, b)) in pot.kappa().iter().zip(pot.b()).enumerate() {
        let v = inv[(i, col)];
        // −κ/(p − b) = (κ/b) Σ (p/b)^j
        for j in 0..order {
            num.push((j, v * *kap / b * b.inv().powi(j)));
        }
    }
    for k in 1..=np {
        num.push((-(k as i32), inv[(pot.m() + k - 1, col)]));
    }
    // p ∂_p log λ = −Σ κ Σ_{j≥1} (p/b)^j − Σ k c_k p^{-k}
    let mut den: Vec<(i32, C64)> = Vec::new();
    for (kap, b) in pot.kappa().iter().zip(pot.b()) {
        for j in 1..order {
            den.push((j, -b.inv().powi(j) * *kap));
        }
    }
    for (k, c) in pot.c().iter().enumerate() {
        den.push((-(k as i32 + 1), -c * (k as f64 + 1.0)));
    }
    let num = TruncatedSeries::from_p_terms(Center::AtZero, &num, order)?;
    let den = TruncatedSeries::from_p_terms(Center::AtZero, &den, order)?;
    let ratio = num.mul(&den.invert()?)?;
    let zbar = lax::expand_lax(pot, Side::Zbar, window)?.series;
    let pbar = zbar.revert()?;
    let r = ratio.substitute(&pbar)?;
    Ok((0..=np as i32).map(|j| r.coeff_w(j).unwrap_or_default()).collect())
}

/// `Σ_γ` of the round-form integrands of `(∂_{b_i}, ∂_{b_j})` and
/// `(∂_{b_i}, ∂_{c_N})` against minus the residues at `b_i` and `0`:
/// `−δ_ij κ_i/b_i²` and `κ_i/(N c_N b_i)`.
pub fn residue_sum_check(pot: &LGPotential) -> Result<f64> {
    if pot.case() != Case::II {
        return Err(Error::InvalidParameters("defined for Case II potentials".into()));
    }
    let g = metric_matrix(pot, Form::Round, Chart::Natural)?;
    let m = pot.m();
    let n = pot.n() as f64;
    let cn = *pot.c().last().unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        let (ki, bi) = (pot.kappa()[i], pot.b()[i]);
        for j in 0..m {
            let want = if i == j { -ki / (bi * bi) } else { C64::new(0.0, 0.0) };
            worst = worst.max((g[(i, j)] - want).norm());
        }
        let want = ki / (n * cn * bi);
        worst = worst.max((g[(i, pot.k_dim() - 1)] - want).norm());
    }
    Ok(worst)
}

/// `(∂_{b_i}, ∂_{b_j})` of the round form for Case I potentials.
pub fn case_i_round_closed_form(pot: &LGPotential) -> DMatrix<C64> {
    let n = pot.n() as f64;
    let m = pot.m();
    DMatrix::from_fn(m, m, |i, j| {
        let (ki, kj, bi, bj) = (pot.kappa()[i], pot.kappa()[j], pot.b()[i], pot.b()[j]);
        if i == j {
            C64::new((ki - n) * ki / n, 0.0) / (bi * bi)
        } else {
            C64::new(ki * kj / n, 0.0) / (bi * bj)
        }
    })
}
