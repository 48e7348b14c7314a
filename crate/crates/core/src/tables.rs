//! The published sequence-order grid: three shapes × four sequences × three models.

use serde::{Deserialize, Serialize};

use crate::error::{PulseError, Result};
use crate::propagate::DEFAULT_STEPS;
use crate::pulseshape::{self, PulseShape};
use crate::sequences::{classify_order, parse_sequence, ClassifyOptions, IntervalCache, OrderReport, TABLE_SEQUENCES};
use crate::spinmodel::{ChainModel, XXZ_RATIO};

pub const EXPECTED_TABLE1_CSV: &str = include_str!("../data/table1_expected.csv");

/// Row shapes of the grid; `herm` is represented by S1.
pub const TABLE1_SHAPES: [&str; 3] = ["gauss", "S1", "Q1"];
pub const TABLE1_MODELS: [&str; 3] = ["ising", "xxz", "bath"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table1Row {
    pub shape: String,
    pub sequence: String,
    pub model: String,
    pub order: usize,
    pub asterisk: bool,
}

impl Table1Row {
    pub fn cell(&self) -> String {
        format!("{}{}", self.order, if self.asterisk { "*" } else { "" })
    }

    fn same_cell(&self, other: &Table1Row) -> bool {
        (&self.shape, &self.sequence, &self.model) == (&other.shape, &other.sequence, &other.model)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table1Options {
    /// Must reach the largest published order (6); clusters up to k_max + 1 sites.
    pub k_max: usize,
    pub steps: usize,
    /// Bath cells must agree across these seeds.
    pub bath_seeds: Vec<u64>,
    /// Gaussian widths (units of τ) checked for integer-order sensitivity;
    /// the first one fills the table.
    pub gauss_sigmas: Vec<f64>,
}

impl Default for Table1Options {
    fn default() -> Self {
        Table1Options {
            k_max: 6,
            steps: DEFAULT_STEPS,
            bath_seeds: vec![1, 2, 3],
            gauss_sigmas: vec![pulseshape::REFERENCE_SIGMA, 0.1, 1.0 / 6.0],
        }
    }
}

/// A cell whose order depended on the bath seed or the Gaussian width.
#[derive(Clone, Debug, PartialEq)]
pub struct Finding {
    pub cell: String,
    pub variant: String,
    pub reference: String,
    pub observed: String,
}

#[derive(Clone, Debug, Default)]
pub struct Table1 {
    pub rows: Vec<Table1Row>,
    /// Cells that could not be classified unambiguously.
    pub failures: Vec<(String, PulseError)>,
    pub findings: Vec<Finding>,
    /// Full reports of the reference variant, in row order.
    pub reports: Vec<OrderReport>,
}

impl Table1 {
    pub fn to_csv(&self) -> String {
        rows_to_csv(&self.rows)
    }

    /// Cells differing from `expected` as (expected, computed) pairs; missing
    /// cells count as mismatches.
    pub fn mismatches(&self, expected: &[Table1Row]) -> Vec<(Table1Row, Option<Table1Row>)> {
        expected
            .iter()
            .filter_map(|e| {
                let got = self.rows.iter().find(|r| r.same_cell(e));
                match got {
                    Some(g) if g == e => None,
                    _ => Some((e.clone(), got.cloned())),
                }
            })
            .collect()
    }
}

pub fn rows_to_csv(rows: &[Table1Row]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

pub fn parse_table1_csv(text: &str) -> Result<Vec<Table1Row>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<Table1Row>, _>>()
        .map_err(|e| PulseError::Format(e.to_string()))
}

pub fn expected_table1() -> Vec<Table1Row> {
    parse_table1_csv(EXPECTED_TABLE1_CSV).expect("bundled table parses")
}

fn shape_variants(name: &str, opts: &Table1Options) -> Result<Vec<(String, PulseShape)>> {
    if name == "gauss" {
        Ok(opts.gauss_sigmas.iter().map(|s| (format!("sigma={}", crate::numfmt::fmt_sig(*s)), pulseshape::gaussian(*s))).collect())
    } else {
        Ok(vec![(String::new(), pulseshape::builtin(name)?)])
    }
}

fn model_variants(name: &str, opts: &Table1Options) -> Vec<(String, ChainModel)> {
    match name {
        "ising" => vec![(String::new(), ChainModel::ising(1.0))],
        "xxz" => vec![(String::new(), ChainModel::xxz(1.0, XXZ_RATIO))],
        _ => opts.bath_seeds.iter().map(|s| (format!("seed={s}"), ChainModel::bath(1.0, 1.0, *s))).collect(),
    }
}

/// Computes the grid. Within a (shape, model) pair longer sequences go first
/// so that their higher-order interval integrations serve the shorter ones.
pub fn table1(opts: &Table1Options) -> Result<Table1> {
    let mut out = Table1::default();
    let classify_opts = ClassifyOptions { k_max: opts.k_max, steps: opts.steps, ..Default::default() };
    let mut cells: Vec<(usize, Table1Row, OrderReport)> = Vec::new();
    for (si, shape_name) in TABLE1_SHAPES.iter().enumerate() {
        let shapes = shape_variants(shape_name, opts)?;
        for (mi, model_name) in TABLE1_MODELS.iter().enumerate() {
            for (vi, (shape_tag, shape)) in shapes.iter().enumerate() {
                for (wi, (model_tag, model)) in model_variants(model_name, opts).into_iter().enumerate() {
                    let cache = IntervalCache::new();
                    for (qi, (id, text)) in TABLE_SEQUENCES.iter().enumerate().rev() {
                        let cell = format!("{shape_name}/{id}/{model_name}");
                        let seq = parse_sequence(text)?;
                        let report = match classify_order(&seq, shape, &model, &classify_opts, &cache) {
                            Ok(r) => r,
                            Err(e) => {
                                out.failures.push((format!("{cell} {shape_tag} {model_tag}").trim().to_string(), e));
                                continue;
                            }
                        };
                        let row = Table1Row {
                            shape: shape_name.to_string(),
                            sequence: id.to_string(),
                            model: model_name.to_string(),
                            order: report.displayed_order(),
                            asterisk: report.asterisk,
                        };
                        let index = (si * TABLE_SEQUENCES.len() + qi) * TABLE1_MODELS.len() + mi;
                        if vi == 0 && wi == 0 {
                            cells.push((index, row, report));
                        } else if let Some((_, reference, _)) = cells.iter().find(|c| c.0 == index) {
                            if reference.cell() != row.cell() {
                                let variant = [shape_tag.as_str(), model_tag.as_str()].iter().filter(|s| !s.is_empty()).cloned().collect::<Vec<_>>().join(" ");
                                out.findings.push(Finding { cell, variant, reference: reference.cell(), observed: row.cell() });
                            }
                        }
                    }
                }
            }
        }
    }
    cells.sort_by_key(|c| c.0);
    for (_, row, report) in cells {
        out.rows.push(row);
        out.reports.push(report);
    }
    Ok(out)
}
