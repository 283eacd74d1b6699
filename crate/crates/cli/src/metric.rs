use dtoda::frobenius::{self, Chart, Form};
use dtoda::potential::LGPotential;
use dtoda::C64;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::io::cx;
use crate::Failure;

#[derive(Serialize)]
pub struct FlatSection {
    pub kind: frobenius::FlatKind,
    pub values: Vec<[f64; 2]>,
    pub expected: Vec<Vec<[f64; 2]>>,
    pub deviation: f64,
    pub constancy: f64,
    pub samples: usize,
}

#[derive(Serialize)]
pub struct MetricReport {
    pub chart: Chart,
    pub form: Form,
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<[f64; 2]>>,
    pub associativity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flat: Option<FlatSection>,
}

fn rows(m: &DMatrix<C64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| cx(m[(i, j)])).collect()).collect()
}

fn labels(pot: &LGPotential, chart: Chart) -> Result<Vec<String>, Failure> {
    Ok(match chart {
        Chart::Natural => (1..=pot.m())
            .map(|i| format!("b{i}"))
            .chain((1..=pot.c().len()).map(|k| format!("c{k}")))
            .collect(),
        Chart::Lambda => (1..=pot.k_dim()).map(|n| format!("lambda{n}")).collect(),
        Chart::Flat => frobenius::flat_coordinates(pot).map_err(Failure::from_lib)?.labels,
    })
}

pub fn run_metric(
    pot: &LGPotential,
    chart: Chart,
    form: Form,
    samples: usize,
    seed: u64,
) -> Result<MetricReport, Failure> {
    let labels = labels(pot, chart)?;
    let matrix = frobenius::metric_matrix(pot, form, chart).map_err(Failure::from_lib)?;
    let associativity = frobenius::product_structure(pot, form, chart)
        .map_err(Failure::from_lib)?
        .associativity;
    let flat = if chart == Chart::Flat {
        let rep = frobenius::flat_metric_report(pot, samples, seed).map_err(Failure::from_lib)?;
        (rep.form == form).then(|| FlatSection {
            kind: rep.chart.kind,
            values: rep.chart.values.iter().map(|z| cx(*z)).collect(),
            expected: rows(&rep.expected),
            deviation: rep.deviation,
            constancy: rep.variation,
            samples,
        })
    } else {
        None
    };
    Ok(MetricReport {
        chart,
        form,
        labels,
        matrix: rows(&matrix),
        associativity,
        flat,
    })
}
