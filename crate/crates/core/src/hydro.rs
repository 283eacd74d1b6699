//! Characteristic speeds, the generalized hodograph solver and residual
//! checks of the hydrodynamic and Lax equations on solved fields.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cmath::log1p;
use crate::fd::LambdaChart;
use crate::lax::{self, Branch, Flow, Side};
use crate::loewner::{alpha_coeffs, Residual};
use crate::poly;
use crate::potential::{CriticalFrame, InversionOptions, LGPotential};
use crate::{Error, Result, C64};

/// A real space-time point `(s, t_k, t̄_k)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpaceTimePoint {
    pub s: f64,
    pub t: BTreeMap<u32, f64>,
    pub tbar: BTreeMap<u32, f64>,
}

impl SpaceTimePoint {
    pub fn at_s(s: f64) -> Self {
        Self {
            s,
            ..Default::default()
        }
    }

    pub fn with_t(mut self, k: u32, v: f64) -> Self {
        self.t.insert(k, v);
        self
    }

    pub fn with_tbar(mut self, k: u32, v: f64) -> Self {
        self.tbar.insert(k, v);
        self
    }

    fn lerp(&self, other: &Self, tau: f64) -> Self {
        let mix = |a: &BTreeMap<u32, f64>, b: &BTreeMap<u32, f64>| {
            let mut out = BTreeMap::new();
            for k in a.keys().chain(b.keys()) {
                let x = a.get(k).copied().unwrap_or(0.0);
                let y = b.get(k).copied().unwrap_or(0.0);
                out.insert(*k, x + (y - x) * tau);
            }
            out
        };
        Self {
            s: self.s + (other.s - self.s) * tau,
            t: mix(&self.t, &other.t),
            tbar: mix(&self.tbar, &other.tbar),
        }
    }
}

impl fmt::Display for SpaceTimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s={}", self.s)?;
        for (k, v) in &self.t {
            write!(f, ",t{k}={v}")?;
        }
        for (k, v) in &self.tbar {
            write!(f, ",tbar{k}={v}")?;
        }
        Ok(())
    }
}

/// `F_n = a0 + Σ a_k V_kn + Σ ā_k V̄_kn`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HodographData {
    pub a0: C64,
    pub a: BTreeMap<u32, C64>,
    pub abar: BTreeMap<u32, C64>,
}

impl HodographData {
    fn flows(&self) -> impl Iterator<Item = (Flow, C64)> + '_ {
        self.a
            .iter()
            .map(|(k, v)| (Flow::t(*k), *v))
            .chain(self.abar.iter().map(|(k, v)| (Flow::tbar(*k), *v)))
    }
}

/// A potential together with its ordered frame and `z̄` branch.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub pot: LGPotential,
    pub frame: CriticalFrame,
    pub branch: Branch,
}

impl State {
    pub fn new(pot: &LGPotential) -> Result<Self> {
        Ok(Self {
            pot: pot.clone(),
            frame: pot.critical_frame()?,
            branch: Branch::principal(pot),
        })
    }

    /// State at new critical values, continuing ordering and branch.
    pub fn at_lambda(&self, lam: &[C64]) -> Result<Self> {
        let inv = self
            .pot
            .params_from_lambda_near(&self.frame, lam, &InversionOptions::default())?;
        let branch = self.branch.continued(&self.pot, &inv.potential);
        Ok(Self {
            pot: inv.potential,
            frame: inv.frame,
            branch,
        })
    }

    /// State at nearby parameters, continuing ordering and branch.
    pub fn at_params(&self, theta: &[C64]) -> Result<Self> {
        let pot = self.pot.with_params(theta)?;
        let frame = pot.critical_frame_near(&self.frame.gamma)?;
        let branch = self.branch.continued(&self.pot, &pot);
        Ok(Self { pot, frame, branch })
    }
}

/// Characteristic speeds `V_kn = γ_n B_k′(γ_n)` (or `V̄_kn` with `B̄_k`).
pub fn speeds(pot: &LGPotential, flow: Flow) -> Result<Vec<C64>> {
    speeds_at(&State::new(pot)?, flow)
}

pub fn speeds_at(st: &State, flow: Flow) -> Result<Vec<C64>> {
    if flow == Flow::t(1) {
        return Ok(st.frame.gamma.clone());
    }
    let l = lax::default_window(&st.pot, flow.n);
    let b = lax::generator_with_branch(&st.pot, flow, l, &st.branch)?;
    let db = b.derivative();
    Ok(st.frame.gamma.iter().map(|g| g * db.eval(*g)).collect())
}

/// `F_n` for the given data.
pub fn hodograph_f(st: &State, data: &HodographData) -> Result<Vec<C64>> {
    let mut f = vec![data.a0; st.pot.k_dim()];
    for (flow, coef) in data.flows() {
        for (x, v) in f.iter_mut().zip(speeds_at(st, flow)?) {
            *x += coef * v;
        }
    }
    Ok(f)
}

/// `r_n = s + Σ t_k V_kn + Σ t̄_k V̄_kn − F_n` and the scale of its terms.
pub fn hodograph_residual_scaled(
    st: &State,
    point: &SpaceTimePoint,
    data: &HodographData,
) -> Result<(Vec<C64>, f64)> {
    let k = st.pot.k_dim();
    let mut r = vec![C64::new(point.s, 0.0); k];
    let mut scale = vec![point.s.abs(); k];
    let times = point
        .t
        .iter()
        .map(|(n, v)| (Flow::t(*n), *v))
        .chain(point.tbar.iter().map(|(n, v)| (Flow::tbar(*n), *v)));
    for (flow, tv) in times {
        if tv == 0.0 {
            continue;
        }
        for (n, v) in speeds_at(st, flow)?.into_iter().enumerate() {
            r[n] += v * tv;
            scale[n] += (v * tv).norm();
        }
    }
    for (n, f) in hodograph_f(st, data)?.into_iter().enumerate() {
        r[n] -= f;
        scale[n] += f.norm();
    }
    let scale = scale.into_iter().fold(1.0, f64::max);
    Ok((r, scale))
}

pub fn hodograph_residual(
    pot: &LGPotential,
    point: &SpaceTimePoint,
    data: &HodographData,
) -> Result<Vec<C64>> {
    Ok(hodograph_residual_scaled(&State::new(pot)?, point, data)?.0)
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Residual bound relative to the size of the hodograph terms.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative step for the Jacobian in `λ`.
    pub jac_step: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 30,
            jac_step: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solved {
    pub state: State,
    pub iterations: usize,
    pub residual: f64,
}

fn max_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// `∂r_n/∂λ_m` by central differences.
pub fn hodograph_jacobian(
    st: &State,
    point: &SpaceTimePoint,
    data: &HodographData,
    h: f64,
) -> Result<DMatrix<C64>> {
    let k = st.pot.k_dim();
    let mut j = DMatrix::zeros(k, k);
    for m in 0..k {
        let d = h * st.frame.lam[m].norm();
        let mut lp = st.frame.lam.clone();
        let mut lm = st.frame.lam.clone();
        lp[m] += d;
        lm[m] -= d;
        let rp = hodograph_residual_scaled(&st.at_lambda(&lp)?, point, data)?.0;
        let rm = hodograph_residual_scaled(&st.at_lambda(&lm)?, point, data)?.0;
        for n in 0..k {
            j[(n, m)] = (rp[n] - rm[n]) / (2.0 * d);
        }
    }
    Ok(j)
}

const NONDEGENERACY: &str = "the non-degeneracy condition det(∂r_n/∂λ_m) ≠ 0 is violated";

/// Damped Newton on the critical values.
pub fn hodograph_solve(
    guess: &State,
    point: &SpaceTimePoint,
    data: &HodographData,
    opts: &SolveOptions,
) -> Result<Solved> {
    let mut st = guess.clone();
    let (mut r, mut scale) = hodograph_residual_scaled(&st, point, data)?;
    let mut res = max_norm(&r);
    let mut iterations = 0;
    while res > opts.tol * scale {
        if iterations >= opts.max_iter {
            return Err(Error::Inversion(format!(
                "hodograph Newton did not converge at {point} (residual {res:e})"
            )));
        }
        let j = hodograph_jacobian(&st, point, data, opts.jac_step)?;
        let rhs = DVector::from_iterator(r.len(), r.iter().map(|x| -x));
        let step = poly::solve(&j, &rhs, NONDEGENERACY)?;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..20 {
            let lam: Vec<C64> = st
                .frame
                .lam
                .iter()
                .zip(step.iter())
                .map(|(l, d)| l + d * t)
                .collect();
            if let Ok(next) = st.at_lambda(&lam) {
                if let Ok((r2, s2)) = hodograph_residual_scaled(&next, point, data) {
                    let res2 = max_norm(&r2);
                    if res2 < res {
                        accepted = Some((next, r2, s2, res2));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((next, r2, s2, res2)) => {
                st = next;
                r = r2;
                scale = s2;
                res = res2;
            }
            None => {
                return Err(Error::Inversion(format!(
                    "hodograph Newton stalled at {point} (residual {res:e})"
                )))
            }
        }
    }
    Ok(Solved {
        state: st,
        iterations,
        residual: res,
    })
}

/// Data for which `pot` solves the hodograph relations at `(s0, 0, …)`.
///
/// The coefficients in `fixed` are kept; `a0` and the coefficients of the
/// `K − 1` flows in `free` are solved from `F_n = s0` at the frame of `pot`.
pub fn seed_data(
    pot: &LGPotential,
    s0: f64,
    free: &[Flow],
    fixed: &[(Flow, C64)],
) -> Result<HodographData> {
    let st = State::new(pot)?;
    let k = pot.k_dim();
    if free.len() + 1 != k {
        return Err(Error::InvalidParameters(format!(
            "seed data needs {} free flows, got {}",
            k - 1,
            free.len()
        )));
    }
    let mut rhs = DVector::from_element(k, C64::new(s0, 0.0));
    for (flow, c) in fixed {
        for (n, v) in speeds_at(&st, *flow)?.into_iter().enumerate() {
            rhs[n] -= c * v;
        }
    }
    let mut m = DMatrix::from_element(k, k, C64::new(1.0, 0.0));
    for (col, flow) in free.iter().enumerate() {
        for (n, v) in speeds_at(&st, *flow)?.into_iter().enumerate() {
            m[(n, col + 1)] = v;
        }
    }
    let sol = poly::solve(&m, &rhs, "seed flows do not separate the critical points")?;
    let mut data = HodographData {
        a0: sol[0],
        ..Default::default()
    };
    let mut put = |flow: Flow, c: C64| {
        let map = match flow.side {
            Side::Z => &mut data.a,
            Side::Zbar => &mut data.abar,
        };
        *map.entry(flow.n).or_insert(C64::new(0.0, 0.0)) += c;
    };
    for (col, flow) in free.iter().enumerate() {
        put(*flow, sol[col + 1]);
    }
    for (flow, c) in fixed {
        put(*flow, *c);
    }
    Ok(data)
}

/// Coordinate carried by a grid axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AxisKind {
    S,
    T(u32),
    Tbar(u32),
}

impl fmt::Display for AxisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisKind::S => write!(f, "s"),
            AxisKind::T(k) => write!(f, "t{k}"),
            AxisKind::Tbar(k) => write!(f, "tbar{k}"),
        }
    }
}

impl FromStr for AxisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameters(format!("unknown grid axis '{s}'"));
        if s == "s" {
            Ok(AxisKind::S)
        } else if let Some(rest) = s.strip_prefix("tbar") {
            let k: u32 = rest.parse().map_err(|_| bad())?;
            if k == 0 {
                return Err(bad());
            }
            Ok(AxisKind::Tbar(k))
        } else if let Some(rest) = s.strip_prefix('t') {
            let k: u32 = rest.parse().map_err(|_| bad())?;
            if k == 0 {
                return Err(bad());
            }
            Ok(AxisKind::T(k))
        } else {
            Err(bad())
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub kind: AxisKind,
    pub values: Vec<f64>,
}

/// A tensor grid swept in lexicographic order of the axes as listed.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub axes: Vec<Axis>,
}

impl FromStr for Grid {
    type Err = Error;

    /// `"s=1.5:2.5:0.1,t1=1"`: each axis is a value or `start:stop:step`
    /// with both ends included.
    fn from_str(text: &str) -> Result<Self> {
        let mut axes: Vec<Axis> = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, range) = part.split_once('=').ok_or_else(|| {
                Error::InvalidParameters(format!("grid axis '{part}' lacks '='"))
            })?;
            let kind: AxisKind = name.trim().parse()?;
            if axes.iter().any(|a| a.kind == kind) {
                return Err(Error::InvalidParameters(format!("grid axis '{kind}' repeated")));
            }
            let nums: Vec<f64> = range
                .split(':')
                .map(|x| {
                    x.trim().parse::<f64>().map_err(|_| {
                        Error::InvalidParameters(format!("bad number '{x}' in grid axis '{name}'"))
                    })
                })
                .collect::<Result<_>>()?;
            let values = match nums.as_slice() {
                [v] => vec![*v],
                [a, b, h] => {
                    if *h <= 0.0 || b < a {
                        return Err(Error::InvalidParameters(format!(
                            "grid axis '{name}' needs start ≤ stop and a positive step"
                        )));
                    }
                    let n = ((b - a) / h + 1e-9).floor() as usize;
                    (0..=n).map(|i| a + i as f64 * h).collect()
                }
                _ => {
                    return Err(Error::InvalidParameters(format!(
                        "grid axis '{name}' must be a value or start:stop:step"
                    )))
                }
            };
            axes.push(Axis { kind, values });
        }
        if !axes.iter().any(|a| a.kind == AxisKind::S) {
            return Err(Error::InvalidParameters("grid must include the s axis".into()));
        }
        Ok(Grid { axes })
    }
}

impl Grid {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.values.len()).collect()
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let shape = self.shape();
        let mut idx = vec![0; shape.len()];
        for d in (0..shape.len()).rev() {
            idx[d] = flat % shape[d];
            flat /= shape[d];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let shape = self.shape();
        idx.iter().zip(&shape).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn point(&self, idx: &[usize]) -> SpaceTimePoint {
        let mut p = SpaceTimePoint::default();
        for (axis, i) in self.axes.iter().zip(idx) {
            let v = axis.values[*i];
            match axis.kind {
                AxisKind::S => p.s = v,
                AxisKind::T(k) => {
                    p.t.insert(k, v);
                }
                AxisKind::Tbar(k) => {
                    p.tbar.insert(k, v);
                }
            }
        }
        p
    }

    /// Continuation predecessor: the last nonzero index decremented.
    pub fn predecessor(idx: &[usize]) -> Option<Vec<usize>> {
        let j = idx.iter().rposition(|i| *i != 0)?;
        let mut p = idx.to_vec();
        p[j] -= 1;
        Some(p)
    }

    pub fn axis_position(&self, kind: AxisKind) -> Option<usize> {
        self.axes.iter().position(|a| a.kind == kind)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldPoint {
    pub point: SpaceTimePoint,
    pub params: Vec<C64>,
    pub lam: Vec<C64>,
    pub gamma: Vec<C64>,
    pub newton_iters: usize,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct SolutionField {
    pub grid: Grid,
    pub template: LGPotential,
    pub data: HodographData,
    /// Flat lexicographic order.
    pub points: Vec<FieldPoint>,
    pub(crate) states: Vec<State>,
}

impl SolutionField {
    pub fn at(&self, idx: &[usize]) -> &FieldPoint {
        &self.points[self.grid.flat_index(idx)]
    }

    pub fn state(&self, idx: &[usize]) -> &State {
        &self.states[self.grid.flat_index(idx)]
    }
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub solve: SolveOptions,
    /// Halvings of a continuation step before giving up.
    pub max_halvings: u32,
    pub parallel: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            max_halvings: 6,
            parallel: true,
        }
    }
}

// continuation from a solved point to a target point with step halving
fn continue_to(
    from: &State,
    from_point: &SpaceTimePoint,
    to: &SpaceTimePoint,
    data: &HodographData,
    opts: &SweepOptions,
) -> Result<Solved> {
    let mut cur = from.clone();
    let mut cur_point = from_point.clone();
    let mut pos = 0.0f64;
    let mut step = 1.0f64;
    let mut halvings = 0;
    let mut total_iters = 0;
    loop {
        let next_pos = (pos + step).min(1.0);
        let target = from_point.lerp(to, next_pos);
        match hodograph_solve(&cur, &target, data, &opts.solve) {
            Ok(sol) => {
                total_iters += sol.iterations;
                if next_pos >= 1.0 {
                    return Ok(Solved {
                        iterations: total_iters,
                        ..sol
                    });
                }
                cur = sol.state;
                cur_point = target;
                pos = next_pos;
            }
            Err(e @ Error::SingularJacobian(_)) => return Err(e),
            Err(e) => {
                if halvings >= opts.max_halvings {
                    return Err(Error::ContinuationBreakdown(format!(
                        "no convergence towards {to} after {halvings} step halvings; last good point {cur_point} with lambda {:?} ({e})",
                        cur.frame.lam
                    )));
                }
                halvings += 1;
                step *= 0.5;
            }
        }
    }
}

/// Solves the hodograph relations over `grid`, starting from `seed` at the
/// first grid point and continuing each point from its predecessor.
pub fn hodograph_sweep(
    seed: &LGPotential,
    grid: &Grid,
    data: &HodographData,
    opts: &SweepOptions,
) -> Result<SolutionField> {
    let n = grid.len();
    if n == 0 {
        return Err(Error::InvalidParameters("empty grid".into()));
    }
    let shape = grid.shape();
    let mut results: Vec<Option<(State, usize, f64)>> = vec![None; n];
    let origin = vec![0; shape.len()];
    let p0 = grid.point(&origin);
    let first = hodograph_solve(&State::new(seed)?, &p0, data, &opts.solve)?;
    results[0] = Some((first.state, first.iterations, first.residual));
    // spine along the first axis
    for i in 1..shape[0] {
        let mut idx = origin.clone();
        idx[0] = i;
        let prev = grid.flat_index(&Grid::predecessor(&idx).unwrap());
        let (st, _, _) = results[prev].clone().unwrap();
        let prev_point = grid.point(&Grid::predecessor(&idx).unwrap());
        let sol = continue_to(&st, &prev_point, &grid.point(&idx), data, opts)?;
        results[grid.flat_index(&idx)] = Some((sol.state, sol.iterations, sol.residual));
    }
    // every spine point owns the block of points sharing its first index
    let block = n / shape[0];
    let spine: Vec<(State, usize, f64)> = (0..shape[0])
        .map(|i| results[i * block].clone().unwrap())
        .collect();
    let solve_block = |i0: usize| -> Result<Vec<(State, usize, f64)>> {
        let mut local: Vec<Option<(State, usize, f64)>> = vec![None; block];
        local[0] = Some(spine[i0].clone());
        for off in 1..block {
            let idx = grid.multi_index(i0 * block + off);
            let pred = Grid::predecessor(&idx).unwrap();
            let poff = grid.flat_index(&pred) - i0 * block;
            let (st, _, _) = local[poff].clone().unwrap();
            let sol = continue_to(&st, &grid.point(&pred), &grid.point(&idx), data, opts)?;
            local[off] = Some((sol.state, sol.iterations, sol.residual));
        }
        Ok(local.into_iter().map(|x| x.unwrap()).collect())
    };
    let blocks: Vec<Vec<(State, usize, f64)>> = if opts.parallel {
        (0..shape[0]).into_par_iter().map(solve_block).collect::<Result<_>>()?
    } else {
        (0..shape[0]).map(solve_block).collect::<Result<_>>()?
    };
    let mut points = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for (flat, (st, iters, res)) in blocks.into_iter().flatten().enumerate() {
        let idx = grid.multi_index(flat);
        points.push(FieldPoint {
            point: grid.point(&idx),
            params: st.pot.params(),
            lam: st.frame.lam.clone(),
            gamma: st.frame.gamma.clone(),
            newton_iters: iters,
            residual: res,
        });
        states.push(st);
    }
    Ok(SolutionField {
        grid: grid.clone(),
        template: seed.clone(),
        data: data.clone(),
        points,
        states,
    })
}

fn flow_axis(flow: Flow) -> AxisKind {
    match flow.side {
        Side::Z => AxisKind::T(flow.n),
        Side::Zbar => AxisKind::Tbar(flow.n),
    }
}

fn axis_step(field: &SolutionField, axis: usize) -> Result<f64> {
    let v = &field.grid.axes[axis].values;
    if v.len() < 3 {
        return Err(Error::InvalidParameters(format!(
            "axis {} needs at least 3 points for central differences",
            field.grid.axes[axis].kind
        )));
    }
    Ok(v[1] - v[0])
}

// interior multi-indices along the two axes, other axes at any position
fn interior(field: &SolutionField, axes: &[usize]) -> Vec<Vec<usize>> {
    let shape = field.grid.shape();
    (0..field.grid.len())
        .map(|f| field.grid.multi_index(f))
        .filter(|idx| axes.iter().all(|&a| idx[a] > 0 && idx[a] + 1 < shape[a]))
        .collect()
}

fn shifted(idx: &[usize], axis: usize, up: bool) -> Vec<usize> {
    let mut v = idx.to_vec();
    if up {
        v[axis] += 1;
    } else {
        v[axis] -= 1;
    }
    v
}

/// Largest `|∂λ_n/∂t − V_n ∂λ_n/∂s|` over interior grid points, by central
/// differences.
pub fn pde_residual(field: &SolutionField, flow: Flow) -> Result<f64> {
    let sa = field.grid.axis_position(AxisKind::S).unwrap();
    let ta = field
        .grid
        .axis_position(flow_axis(flow))
        .ok_or_else(|| Error::InvalidParameters(format!("grid has no axis for {:?}", flow)))?;
    let hs = axis_step(field, sa)?;
    let ht = axis_step(field, ta)?;
    let mut worst: f64 = 0.0;
    for idx in interior(field, &[sa, ta]) {
        let v = speeds_at(field.state(&idx), flow)?;
        let (sp, sm) = (field.at(&shifted(&idx, sa, true)), field.at(&shifted(&idx, sa, false)));
        let (tp, tm) = (field.at(&shifted(&idx, ta, true)), field.at(&shifted(&idx, ta, false)));
        for n in 0..v.len() {
            let ds = (sp.lam[n] - sm.lam[n]) / (2.0 * hs);
            let dt = (tp.lam[n] - tm.lam[n]) / (2.0 * ht);
            worst = worst.max((dt - v[n] * ds).norm());
        }
    }
    Ok(worst)
}

/// `s`- and flow-time derivatives of the natural parameters at an interior
/// grid point, by central differences.
pub fn param_derivatives(field: &SolutionField, idx: &[usize], flow: Flow) -> Result<(Vec<C64>, Vec<C64>)> {
    let sa = field.grid.axis_position(AxisKind::S).unwrap();
    let ta = field
        .grid
        .axis_position(flow_axis(flow))
        .ok_or_else(|| Error::InvalidParameters(format!("grid has no axis for {:?}", flow)))?;
    let hs = axis_step(field, sa)?;
    let ht = axis_step(field, ta)?;
    let d = |axis: usize, h: f64| -> Vec<C64> {
        let p = &field.at(&shifted(idx, axis, true)).params;
        let m = &field.at(&shifted(idx, axis, false)).params;
        p.iter().zip(m).map(|(a, b)| (a - b) / (2.0 * h)).collect()
    };
    Ok((d(sa, hs), d(ta, ht)))
}

/// Interior grid points usable for stencils in `s` and the flow time.
pub fn stencil_points(field: &SolutionField, flow: Flow) -> Vec<Vec<usize>> {
    let sa = field.grid.axis_position(AxisKind::S).unwrap();
    match field.grid.axis_position(flow_axis(flow)) {
        Some(ta) => interior(field, &[sa, ta]),
        None => Vec::new(),
    }
}

/// Largest relative mismatch between `∂_t log λ(p)` (central differences in
/// the flow time) and `{B, log λ}` built from central `s`-differences.
pub fn lax_flow_residual(field: &SolutionField, flow: Flow, samples: &[C64]) -> Result<f64> {
    let sa = field.grid.axis_position(AxisKind::S).unwrap();
    let ta = field
        .grid
        .axis_position(flow_axis(flow))
        .ok_or_else(|| Error::InvalidParameters(format!("grid has no axis for {:?}", flow)))?;
    let ht = axis_step(field, ta)?;
    axis_step(field, sa)?;
    let mut worst: f64 = 0.0;
    for idx in interior(field, &[sa, ta]) {
        let st = field.state(&idx);
        let (theta_s, _) = param_derivatives(field, &idx, flow)?;
        let l = lax::default_window(&st.pot, flow.n);
        let b = lax::generator_with_branch(&st.pot, flow, l, &st.branch)?;
        let bs = lax::generator_s_derivative(&st.pot, flow, &theta_s, l)?;
        let tp = &field.state(&shifted(&idx, ta, true)).pot;
        let tm = &field.state(&shifted(&idx, ta, false)).pot;
        for p in samples {
            let lp = tp.lambda(*p)?;
            let lm = tm.lambda(*p)?;
            // branch-free difference of logarithms
            let dt = log1p((lp - lm) / lm) / (2.0 * ht);
            let br = lax::bracket_at(&st.pot, &b, &bs, &theta_s, *p)?;
            worst = worst.max((dt - br).norm() / br.norm().max(dt.norm()).max(1e-300));
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpeedStructureResidual {
    /// Per flow, `(1/(V_km − V_kn)) ∂V_kn/∂λ_m` against `α_mγ_n/(γ_m − γ_n)²`.
    pub flows: Vec<(Flow, Residual)>,
    /// The same relation for `F_n` of the given data.
    pub f_equation: Residual,
}

/// Finite-difference check of the relations satisfied by the speeds.
pub fn speed_structure_residual(
    pot: &LGPotential,
    h: f64,
    flows: &[Flow],
    data: &HodographData,
) -> Result<SpeedStructureResidual> {
    let chart = LambdaChart::new(pot)?;
    let k = chart.k();
    let base = State::new(pot)?;
    let lf = alpha_coeffs(&base.frame)?;
    let mut out = SpeedStructureResidual::default();
    if k < 2 {
        out.flows = flows.iter().map(|f| (*f, Residual::default())).collect();
        return Ok(out);
    }
    let eval = |st: &State| -> Result<Vec<Vec<C64>>> {
        let mut v: Vec<Vec<C64>> = flows.iter().map(|f| speeds_at(st, *f)).collect::<Result<_>>()?;
        v.push(hodograph_f(st, data)?);
        Ok(v)
    };
    let v0 = eval(&base)?;
    let mut res = vec![Residual::default(); flows.len() + 1];
    for m in 0..k {
        let (up, dn, delta) = chart.step_pair(m, h)?;
        let probe_state = |p: &crate::fd::Probe| -> Result<State> {
            let theta: Vec<C64> = pot.params().iter().zip(&p.dtheta).map(|(a, d)| a + d).collect();
            base.at_params(&theta)
        };
        let vu = eval(&probe_state(&up)?)?;
        let vd = eval(&probe_state(&dn)?)?;
        for n in 0..k {
            if n == m {
                continue;
            }
            let (gm, gn) = (base.frame.gamma[m], base.frame.gamma[n]);
            let expect = lf.alpha[m] * gn / ((gm - gn) * (gm - gn));
            for (q, r) in res.iter_mut().enumerate() {
                let gap = v0[q][m] - v0[q][n];
                // equal speeds leave the relation undefined
                if gap.norm() <= 1e-8 * v0[q][m].norm().max(v0[q][n].norm()) {
                    continue;
                }
                let dv = (vu[q][n] - vd[q][n]) / (2.0 * delta);
                let got = dv / gap;
                let a = (got - expect).norm();
                r.abs = r.abs.max(a);
                r.rel = r.rel.max(a / expect.norm());
            }
        }
    }
    out.f_equation = res.pop().unwrap();
    out.flows = flows.iter().copied().zip(res).collect();
    Ok(out)
}
