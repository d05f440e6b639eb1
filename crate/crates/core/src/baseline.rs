//! Accuracy metrics that predate consistency thresholds: MCQA, RC, MCQA+ and MV.

use serde::{Deserialize, Serialize};

use crate::record::{DivergenceSet, EvaluationRun};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarMetric {
    pub name: String,
    pub value: f64,
}

impl ScalarMetric {
    pub fn new(name: impl Into<String>, value: f64) -> Self {
        debug_assert!(
            (0.0..=1.0).contains(&value),
            "metric outside [0, 1]: {value}"
        );
        Self {
            name: name.into(),
            value,
        }
    }
}

/// How majority voting scores a set whose top vote count is shared.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    /// Credit `1/t` when the correct option is one of `t` tied leaders, the
    /// expected score under uniform random tie-breaking.
    #[default]
    Split,
    /// Credit only when the correct option is the unique leader.
    Strict,
}

impl std::str::FromStr for TieRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "split" => Ok(TieRule::Split),
            "strict" => Ok(TieRule::Strict),
            other => Err(format!(
                "unknown tie rule {other:?} (expected split or strict)"
            )),
        }
    }
}

/// Response consistency: share of the set's variants answered correctly.
pub fn rc(set: &DivergenceSet) -> f64 {
    set.matches() as f64 / set.len() as f64
}

/// RC of every set, in run order.
pub fn rc_values(run: &EvaluationRun) -> Vec<f64> {
    run.sets().iter().map(rc).collect()
}

/// Single-shot accuracy over each set's representative (original) variant.
pub fn mcqa(run: &EvaluationRun) -> f64 {
    let correct = run
        .sets()
        .iter()
        .filter(|s| s.representative().is_correct())
        .count();
    correct as f64 / run.len() as f64
}

/// Mean RC over all sets.
pub fn mcqa_plus(run: &EvaluationRun) -> f64 {
    mean(run.sets().iter().map(rc), run.len())
}

pub fn mv(run: &EvaluationRun) -> f64 {
    mv_with(run, TieRule::default())
}

/// Majority-vote accuracy under the given tie rule.
pub fn mv_with(run: &EvaluationRun, rule: TieRule) -> f64 {
    mean(run.sets().iter().map(|s| mv_credit(s, rule)), run.len())
}

/// Per-set majority-vote credit in [0, 1].
pub fn mv_credit(set: &DivergenceSet, rule: TieRule) -> f64 {
    let votes = set.votes();
    let top = votes.iter().copied().max().unwrap_or(0);
    if top == 0 || votes[set.correct_option()] != top {
        return 0.0;
    }
    let leaders = votes.iter().filter(|&&v| v == top).count();
    match rule {
        TieRule::Split => 1.0 / leaders as f64,
        TieRule::Strict if leaders == 1 => 1.0,
        TieRule::Strict => 0.0,
    }
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.sum::<f64>() / n as f64
}
