use std::fmt::Write;

use dtoda::hydro::{AxisKind, FieldPoint, SolutionField};
use serde::Serialize;

use crate::io::cx;

pub fn header(field: &SolutionField) -> Vec<String> {
    let mut cols = vec!["s".to_string()];
    let mut t: Vec<u32> = Vec::new();
    let mut tb: Vec<u32> = Vec::new();
    for axis in &field.grid.axes {
        match axis.kind {
            AxisKind::S => {}
            AxisKind::T(k) => t.push(k),
            AxisKind::Tbar(k) => tb.push(k),
        }
    }
    t.sort_unstable();
    tb.sort_unstable();
    cols.extend(t.iter().map(|k| format!("t{k}")));
    cols.extend(tb.iter().map(|k| format!("tbar{k}")));
    let pot = &field.template;
    for i in 1..=pot.m() {
        cols.push(format!("re_b{i}"));
        cols.push(format!("im_b{i}"));
    }
    for k in 1..=pot.c().len() {
        cols.push(format!("re_c{k}"));
        cols.push(format!("im_c{k}"));
    }
    for n in 1..=pot.k_dim() {
        cols.push(format!("re_lambda{n}"));
        cols.push(format!("im_lambda{n}"));
    }
    cols.push("residual".into());
    cols.push("iters".into());
    cols
}

// shortest round-trip text, scientific outside [1e-4, 1e15)
fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

pub fn to_csv(field: &SolutionField) -> String {
    let mut out = header(field).join(",");
    out.push('\n');
    for p in &field.points {
        let mut row = vec![num(p.point.s)];
        row.extend(p.point.t.values().map(|v| num(*v)));
        row.extend(p.point.tbar.values().map(|v| num(*v)));
        for z in p.params.iter().chain(&p.lam) {
            row.push(num(z.re));
            row.push(num(z.im));
        }
        row.push(num(p.residual));
        row.push(p.newton_iters.to_string());
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

#[derive(Serialize)]
struct JsonPoint {
    s: f64,
    t: std::collections::BTreeMap<u32, f64>,
    tbar: std::collections::BTreeMap<u32, f64>,
    params: Vec<[f64; 2]>,
    lambda: Vec<[f64; 2]>,
    gamma: Vec<[f64; 2]>,
    residual: f64,
    iters: usize,
}

impl From<&FieldPoint> for JsonPoint {
    fn from(p: &FieldPoint) -> Self {
        Self {
            s: p.point.s,
            t: p.point.t.clone(),
            tbar: p.point.tbar.clone(),
            params: p.params.iter().map(|z| cx(*z)).collect(),
            lambda: p.lam.iter().map(|z| cx(*z)).collect(),
            gamma: p.gamma.iter().map(|z| cx(*z)).collect(),
            residual: p.residual,
            iters: p.newton_iters,
        }
    }
}

#[derive(Serialize)]
struct JsonField {
    shape: Vec<usize>,
    axes: Vec<String>,
    points: Vec<JsonPoint>,
}

pub fn to_json(field: &SolutionField) -> String {
    crate::io::to_json(&JsonField {
        shape: field.grid.shape(),
        axes: field.grid.axes.iter().map(|a| a.kind.to_string()).collect(),
        points: field.points.iter().map(JsonPoint::from).collect(),
    })
}
