//! Per-run metric reports and their CSV forms.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::baseline::{mcqa, mcqa_plus, mv_with, rc_values, TieRule};
use crate::car::{car_curve_of, core_index, mca_of, CarCurve, ThresholdGrid};
use crate::error::{CatError, Result};
use crate::record::EvaluationRun;

/// Every scalar metric for one (model, benchmark) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model_name: String,
    pub benchmark_name: String,
    pub questions: usize,
    pub mcqa: f64,
    pub mcqa_plus: f64,
    pub mv: f64,
    pub mv_tie_rule: TieRule,
    /// MCA(1.0): share of questions answered correctly on every variant.
    pub mca_strict: f64,
    pub curve: CarCurve,
    pub aucar: f64,
    pub dtw_model: f64,
    pub dtw_worst: f64,
    pub norm_dtw: f64,
    pub core: f64,
}

impl MetricReport {
    /// Looks up MCA at a grid threshold; 1.0 always resolves via `mca_strict`.
    pub fn mca_at(&self, c: f64) -> Option<f64> {
        match self.curve.grid().position(c) {
            Some(i) => Some(self.curve.values()[i]),
            None if (c - 1.0).abs() <= crate::car::THRESHOLD_TOLERANCE => Some(self.mca_strict),
            None => None,
        }
    }

    /// Field-wise arithmetic mean of reports sharing one grid.
    pub fn mean_of(
        reports: &[MetricReport],
        model_name: impl Into<String>,
        benchmark_name: impl Into<String>,
    ) -> Result<MetricReport> {
        let first = reports.first().ok_or(CatError::EmptyRun)?;
        let grid = first.curve.grid().clone();
        if let Some(r) = reports.iter().find(|r| r.curve.grid() != &grid) {
            return Err(CatError::InvalidGrid(format!(
                "cannot average reports over different grids ({} vs {})",
                r.curve.grid().len(),
                grid.len()
            )));
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let values = (0..grid.len())
            .map(|k| reports.iter().map(|r| r.curve.values()[k]).sum::<f64>() / n)
            .collect();
        Ok(MetricReport {
            model_name: model_name.into(),
            benchmark_name: benchmark_name.into(),
            questions: first.questions,
            mcqa: avg(|r| r.mcqa),
            mcqa_plus: avg(|r| r.mcqa_plus),
            mv: avg(|r| r.mv),
            mv_tie_rule: first.mv_tie_rule,
            mca_strict: avg(|r| r.mca_strict),
            curve: CarCurve::new(grid, values)?,
            aucar: avg(|r| r.aucar),
            dtw_model: avg(|r| r.dtw_model),
            dtw_worst: avg(|r| r.dtw_worst),
            norm_dtw: avg(|r| r.norm_dtw),
            core: avg(|r| r.core),
        })
    }
}

pub fn metric_report(run: &EvaluationRun, grid: &ThresholdGrid) -> Result<MetricReport> {
    metric_report_with(run, grid, TieRule::default())
}

pub fn metric_report_with(
    run: &EvaluationRun,
    grid: &ThresholdGrid,
    tie_rule: TieRule,
) -> Result<MetricReport> {
    let rc = rc_values(run);
    let curve = car_curve_of(&rc, grid);
    let core = core_index(&curve)?;
    Ok(MetricReport {
        model_name: run.model_name.clone(),
        benchmark_name: run.benchmark_name.clone(),
        questions: run.len(),
        mcqa: mcqa(run),
        mcqa_plus: mcqa_plus(run),
        mv: mv_with(run, tie_rule),
        mv_tie_rule: tie_rule,
        mca_strict: mca_of(&rc, 1.0),
        curve,
        aucar: core.aucar,
        dtw_model: core.dtw_model,
        dtw_worst: core.dtw_worst,
        norm_dtw: core.norm_dtw,
        core: core.core,
    })
}

/// One row of the metrics table as written to CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub model: String,
    pub benchmark: String,
    pub mcqa: f64,
    pub mcqa_plus: f64,
    pub mv: f64,
    pub mca_strict: f64,
    pub aucar: f64,
    pub norm_dtw: f64,
    pub core: f64,
    /// `(threshold, MCA)` columns, present when the full curve was written.
    pub mca: Vec<(f64, f64)>,
}

const METRIC_COLUMNS: [&str; 9] = [
    "model",
    "benchmark",
    "mcqa",
    "mcqa_plus",
    "mv",
    "mca_1.0",
    "aucar",
    "norm_dtw",
    "core",
];

/// Writes one row per report. With `full_curve`, appends an `mca@<c>` column
/// per threshold of the first report's grid.
pub fn write_metrics_csv(
    reports: &[MetricReport],
    full_curve: bool,
    out: impl Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let grid = reports.first().map(|r| r.curve.grid().clone());
    let mut header: Vec<String> = METRIC_COLUMNS.iter().map(|s| s.to_string()).collect();
    if let (true, Some(g)) = (full_curve, &grid) {
        header.extend(g.thresholds().iter().map(|c| format!("mca@{c}")));
    }
    w.write_record(&header)?;
    for r in reports {
        let mut row = vec![
            r.model_name.clone(),
            r.benchmark_name.clone(),
            r.mcqa.to_string(),
            r.mcqa_plus.to_string(),
            r.mv.to_string(),
            r.mca_strict.to_string(),
            r.aucar.to_string(),
            r.norm_dtw.to_string(),
            r.core.to_string(),
        ];
        if let (true, Some(g)) = (full_curve, &grid) {
            for &c in g.thresholds() {
                let v = r.mca_at(c).ok_or_else(|| {
                    CatError::InvalidGrid(format!("report {:?} lacks threshold {c}", r.model_name))
                })?;
                row.push(v.to_string());
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CatError::io("<csv>", e))?;
    Ok(())
}

pub fn read_metrics_csv(input: impl Read) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.len() < METRIC_COLUMNS.len()
        || headers.iter().zip(METRIC_COLUMNS).any(|(h, e)| h != e)
    {
        return Err(CatError::InvalidTable(format!(
            "unexpected metrics header {headers:?}"
        )));
    }
    let thresholds = headers
        .iter()
        .skip(METRIC_COLUMNS.len())
        .map(|h| {
            h.strip_prefix("mca@")
                .and_then(|c| c.parse::<f64>().ok())
                .ok_or_else(|| CatError::InvalidTable(format!("bad column {h:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record?;
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|e| CatError::InvalidTable(format!("column {i}: {e}")))
        };
        let mca = thresholds
            .iter()
            .enumerate()
            .map(|(k, &c)| Ok((c, num(METRIC_COLUMNS.len() + k)?)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(MetricRow {
            model: record[0].to_string(),
            benchmark: record[1].to_string(),
            mcqa: num(2)?,
            mcqa_plus: num(3)?,
            mv: num(4)?,
            mca_strict: num(5)?,
            aucar: num(6)?,
            norm_dtw: num(7)?,
            core: num(8)?,
            mca,
        });
    }
    Ok(rows)
}

/// A curve tagged with the run it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCurve {
    pub name: String,
    pub benchmark: String,
    pub curve: CarCurve,
}

/// Long format: `model,benchmark,threshold,mca`, one row per grid point.
pub fn write_curves_csv(curves: &[NamedCurve], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "benchmark", "threshold", "mca"])?;
    for nc in curves {
        for (c, v) in nc.curve.points() {
            w.write_record([
                nc.name.as_str(),
                nc.benchmark.as_str(),
                &c.to_string(),
                &v.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| CatError::io("<csv>", e))?;
    Ok(())
}

/// Reads curves back, grouping consecutive rows by (model, benchmark).
pub fn read_curves_csv(input: impl Read) -> Result<Vec<NamedCurve>> {
    #[derive(Deserialize)]
    struct Row {
        model: String,
        benchmark: String,
        threshold: f64,
        mca: f64,
    }
    let mut groups: Vec<(String, String, Vec<f64>, Vec<f64>)> = Vec::new();
    for row in csv::Reader::from_reader(input).deserialize::<Row>() {
        let row = row?;
        match groups.last_mut() {
            Some((m, b, cs, vs)) if *m == row.model && *b == row.benchmark => {
                cs.push(row.threshold);
                vs.push(row.mca);
            }
            _ => groups.push((row.model, row.benchmark, vec![row.threshold], vec![row.mca])),
        }
    }
    groups
        .into_iter()
        .map(|(name, benchmark, cs, vs)| {
            Ok(NamedCurve {
                name,
                benchmark,
                curve: CarCurve::new(ThresholdGrid::new(cs)?, vs)?,
            })
        })
        .collect()
}
