//! Metric growth across a family of models, and chance-to-best slopes.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{CatError, Result};
use crate::report::{MetricReport, NamedCurve};

/// A scalar that can be read off a [`MetricReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricKind {
    Mcqa,
    McqaPlus,
    Mv,
    /// MCA at a threshold present in the report's grid (or 1.0).
    Mca(f64),
    Aucar,
    NormDtw,
    Core,
}

impl MetricKind {
    pub fn value(&self, r: &MetricReport) -> Result<f64> {
        Ok(match *self {
            MetricKind::Mcqa => r.mcqa,
            MetricKind::McqaPlus => r.mcqa_plus,
            MetricKind::Mv => r.mv,
            MetricKind::Mca(c) => r
                .mca_at(c)
                .ok_or_else(|| CatError::UnknownMetric(format!("{self} (not on the grid)")))?,
            MetricKind::Aucar => r.aucar,
            MetricKind::NormDtw => r.norm_dtw,
            MetricKind::Core => r.core,
        })
    }

    /// MCQA+, MV, MCA(1.0) and CORE.
    pub fn default_set() -> Vec<MetricKind> {
        vec![
            MetricKind::McqaPlus,
            MetricKind::Mv,
            MetricKind::Mca(1.0),
            MetricKind::Core,
        ]
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricKind::Mcqa => f.write_str("MCQA"),
            MetricKind::McqaPlus => f.write_str("MCQA+"),
            MetricKind::Mv => f.write_str("MV"),
            MetricKind::Mca(c) => write!(f, "MCA({c:.1})"),
            MetricKind::Aucar => f.write_str("AUCAR"),
            MetricKind::NormDtw => f.write_str("norm-DTW"),
            MetricKind::Core => f.write_str("CORE"),
        }
    }
}

impl FromStr for MetricKind {
    type Err = CatError;

    /// Accepts `mcqa`, `mcqa+`, `mv`, `mca@<c>`, `aucar`, `norm-dtw`, `core`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Ok(match lower.as_str() {
            "mcqa" => MetricKind::Mcqa,
            "mcqa+" | "mcqa_plus" | "mcqa-plus" => MetricKind::McqaPlus,
            "mv" => MetricKind::Mv,
            "aucar" => MetricKind::Aucar,
            "norm-dtw" | "norm_dtw" | "dtw" => MetricKind::NormDtw,
            "core" => MetricKind::Core,
            other => {
                let c = other
                    .strip_prefix("mca@")
                    .and_then(|c| c.parse::<f64>().ok())
                    .filter(|c| (0.0..=1.0).contains(c))
                    .ok_or_else(|| CatError::UnknownMetric(s.to_string()))?;
                MetricKind::Mca(c)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthSeries {
    pub metric: String,
    pub values: Vec<f64>,
}

/// Metric values over models sorted by their mean across the selected metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Growth {
    pub models: Vec<String>,
    pub mean_scores: Vec<f64>,
    pub series: Vec<GrowthSeries>,
}

/// Sorts ascending by mean score; ties break by model name.
pub fn growth(reports: &[MetricReport], metrics: &[MetricKind]) -> Result<Growth> {
    if metrics.is_empty() {
        return Err(CatError::UnknownMetric("no metrics selected".into()));
    }
    let mut rows = reports
        .iter()
        .map(|r| {
            let values = metrics
                .iter()
                .map(|m| m.value(r))
                .collect::<Result<Vec<_>>>()?;
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            Ok((r.model_name.clone(), mean, values))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let series = metrics
        .iter()
        .enumerate()
        .map(|(k, m)| GrowthSeries {
            metric: m.to_string(),
            values: rows.iter().map(|r| r.2[k]).collect(),
        })
        .collect();
    Ok(Growth {
        models: rows.iter().map(|r| r.0.clone()).collect(),
        mean_scores: rows.iter().map(|r| r.1).collect(),
        series,
    })
}

/// Per metric: (value at the best model − value at the chance model) /
/// (model count − 1). The best model is the last on the sorted axis.
pub fn slopes(g: &Growth, chance_name: &str) -> Result<Vec<(String, f64)>> {
    let n = g.models.len();
    if n < 2 {
        return Err(CatError::TooFewRuns(n));
    }
    let chance = g
        .models
        .iter()
        .position(|m| m == chance_name)
        .ok_or_else(|| CatError::MissingChance(chance_name.to_string()))?;
    Ok(g.series
        .iter()
        .map(|s| {
            (
                s.metric.clone(),
                (s.values[n - 1] - s.values[chance]) / (n - 1) as f64,
            )
        })
        .collect())
}

/// Everything the reporting commands emit for a set of runs.
#[derive(Debug, Clone, Serialize)]
pub struct ReportBundle {
    pub reports: Vec<MetricReport>,
    pub curves: Vec<NamedCurve>,
    pub growth: Option<Growth>,
    pub slopes: Vec<(String, f64)>,
}

impl ReportBundle {
    pub fn new(reports: Vec<MetricReport>) -> Self {
        let curves = reports
            .iter()
            .map(|r| NamedCurve {
                name: r.model_name.clone(),
                benchmark: r.benchmark_name.clone(),
                curve: r.curve.clone(),
            })
            .collect();
        Self {
            reports,
            curves,
            growth: None,
            slopes: Vec::new(),
        }
    }

    pub fn with_growth(
        mut self,
        metrics: &[MetricKind],
        chance_name: Option<&str>,
    ) -> Result<Self> {
        let g = growth(&self.reports, metrics)?;
        if let Some(chance) = chance_name {
            self.slopes = slopes(&g, chance)?;
        }
        self.growth = Some(g);
        Ok(self)
    }
}
