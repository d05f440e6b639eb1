//! Soft correctness and consistency for open-ended answers.
//!
//! A [`SimilarityScorer`] replaces exact-match correctness with a score in
//! [0, 1]. Soft RC values then feed the same MCA / CAR / CORE machinery as
//! the multiple-choice pipeline; with [`ExactMatchScorer`] on option labels
//! the two pipelines agree exactly.

use std::collections::HashMap;

use serde::Serialize;

use crate::car::{car_curve_of, core_index, mca_of, CarCurve, ThresholdGrid};
use crate::error::{CatError, Result};
use crate::record::{option_letter, EvaluationRun};

/// Similarity between a candidate and a reference, clamped to [0, 1].
///
/// Embedding- or judge-based scorers plug in by implementing this trait (or
/// wrapping a closure in [`FnScorer`]).
pub trait SimilarityScorer: Send + Sync {
    fn name(&self) -> &str;

    fn raw_score(&self, candidate: &str, reference: &str) -> f64;

    fn score(&self, candidate: &str, reference: &str) -> f64 {
        let s = self.raw_score(candidate, reference);
        if s.is_nan() {
            0.0
        } else {
            s.clamp(0.0, 1.0)
        }
    }
}

/// 1 when the trimmed strings are equal, else 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatchScorer;

impl SimilarityScorer for ExactMatchScorer {
    fn name(&self) -> &str {
        "exact-match"
    }

    fn raw_score(&self, candidate: &str, reference: &str) -> f64 {
        if candidate.trim() == reference.trim() {
            1.0
        } else {
            0.0
        }
    }
}

/// Harmonic mean of token precision and recall over whitespace tokens,
/// counting repeated tokens as a multiset.
#[derive(Debug, Clone, Copy, Default)]
pub struct TokenOverlapScorer;

impl SimilarityScorer for TokenOverlapScorer {
    fn name(&self) -> &str {
        "token-overlap"
    }

    fn raw_score(&self, candidate: &str, reference: &str) -> f64 {
        let cand: Vec<&str> = candidate.split_whitespace().collect();
        let refs: Vec<&str> = reference.split_whitespace().collect();
        match (cand.is_empty(), refs.is_empty()) {
            (true, true) => return 1.0,
            (true, false) | (false, true) => return 0.0,
            _ => {}
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in &refs {
            *counts.entry(t).or_default() += 1;
        }
        let mut common = 0usize;
        for t in &cand {
            if let Some(c) = counts.get_mut(t) {
                if *c > 0 {
                    *c -= 1;
                    common += 1;
                }
            }
        }
        if common == 0 {
            return 0.0;
        }
        let precision = common as f64 / cand.len() as f64;
        let recall = common as f64 / refs.len() as f64;
        2.0 * precision * recall / (precision + recall)
    }
}

/// Adapter for user-supplied scoring functions.
pub struct FnScorer<F> {
    name: String,
    f: F,
}

impl<F> FnScorer<F>
where
    F: Fn(&str, &str) -> f64 + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self {
            name: name.into(),
            f,
        }
    }
}

impl<F> SimilarityScorer for FnScorer<F>
where
    F: Fn(&str, &str) -> f64 + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn raw_score(&self, candidate: &str, reference: &str) -> f64 {
        (self.f)(candidate, reference)
    }
}

pub fn token_overlap_scorer() -> TokenOverlapScorer {
    TokenOverlapScorer
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftDivergenceSet {
    pub question_id: String,
    pub soft_scores: Vec<f64>,
    pub responses: Option<Vec<String>>,
}

impl SoftDivergenceSet {
    pub fn new(
        question_id: impl Into<String>,
        soft_scores: Vec<f64>,
        responses: Option<Vec<String>>,
    ) -> Result<Self> {
        let question_id = question_id.into();
        if soft_scores.is_empty() {
            return Err(CatError::EmptySet(question_id));
        }
        if let Some(s) = soft_scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(CatError::InvalidRecord {
                line: 0,
                message: format!("soft score {s} outside [0, 1] in {question_id:?}"),
            });
        }
        Ok(Self {
            question_id,
            soft_scores,
            responses,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SoftRcMode {
    /// Mean of the reference-anchored soft scores.
    #[default]
    MeanSimilarity,
    /// Mean pairwise similarity among the responses themselves.
    Compactness,
}

pub fn soft_rc(
    set: &SoftDivergenceSet,
    mode: SoftRcMode,
    scorer: &dyn SimilarityScorer,
) -> Result<f64> {
    match mode {
        SoftRcMode::MeanSimilarity => {
            Ok(set.soft_scores.iter().sum::<f64>() / set.soft_scores.len() as f64)
        }
        SoftRcMode::Compactness => {
            let responses = set.responses.as_deref().unwrap_or(&[]);
            let m = responses.len();
            if m < 2 {
                return Err(CatError::TooFewResponses(m));
            }
            // Ordered pairs keep the result symmetric for asymmetric scorers.
            let mut total = 0.0;
            for (i, a) in responses.iter().enumerate() {
                for (j, b) in responses.iter().enumerate() {
                    if i != j {
                        total += scorer.score(a, b);
                    }
                }
            }
            Ok(total / (m * (m - 1)) as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftRun {
    pub model_name: String,
    pub benchmark_name: String,
    pub sets: Vec<SoftDivergenceSet>,
}

impl SoftRun {
    /// Uses each record's `soft_score`; raw responses are kept when every
    /// record has one.
    pub fn from_records(run: &EvaluationRun) -> Result<Self> {
        let sets = run
            .sets()
            .iter()
            .map(|s| {
                let scores = s
                    .records()
                    .iter()
                    .map(|r| {
                        r.soft_score
                            .ok_or_else(|| CatError::MissingSoftScore(r.question_id.clone()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let responses = s
                    .records()
                    .iter()
                    .map(|r| r.raw_response.clone())
                    .collect::<Option<Vec<_>>>();
                SoftDivergenceSet::new(s.question_id(), scores, responses)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model_name: run.model_name.clone(),
            benchmark_name: run.benchmark_name.clone(),
            sets,
        })
    }

    /// Scores multiple-choice predictions as text: the predicted label
    /// against the correct label. Missing predictions become empty strings.
    pub fn score_predictions(run: &EvaluationRun, scorer: &dyn SimilarityScorer) -> Result<Self> {
        let label = |i: usize| option_letter(i).map_or_else(|| i.to_string(), String::from);
        let sets = run
            .sets()
            .iter()
            .map(|s| {
                let reference = label(s.correct_option());
                let responses: Vec<String> = s
                    .records()
                    .iter()
                    .map(|r| r.predicted_option.map(label).unwrap_or_default())
                    .collect();
                let scores = responses
                    .iter()
                    .map(|c| scorer.score(c, &reference))
                    .collect();
                SoftDivergenceSet::new(s.question_id(), scores, Some(responses))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model_name: run.model_name.clone(),
            benchmark_name: run.benchmark_name.clone(),
            sets,
        })
    }

    pub fn soft_rc_values(
        &self,
        mode: SoftRcMode,
        scorer: &dyn SimilarityScorer,
    ) -> Result<Vec<f64>> {
        self.sets.iter().map(|s| soft_rc(s, mode, scorer)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoftReport {
    pub model_name: String,
    pub scorer: String,
    pub mode: SoftRcMode,
    /// Mean soft RC, the soft analogue of MCQA+.
    pub mcqa_plus: f64,
    pub mca_strict: f64,
    pub curve: CarCurve,
    pub aucar: f64,
    pub norm_dtw: f64,
    pub core: f64,
}

pub fn soft_metric_report(
    run: &SoftRun,
    grid: &ThresholdGrid,
    mode: SoftRcMode,
    scorer: &dyn SimilarityScorer,
) -> Result<SoftReport> {
    let rc = run.soft_rc_values(mode, scorer)?;
    if rc.is_empty() {
        return Err(CatError::EmptyRun);
    }
    let curve = car_curve_of(&rc, grid);
    let core = core_index(&curve)?;
    Ok(SoftReport {
        model_name: run.model_name.clone(),
        scorer: scorer.name().to_string(),
        mode,
        mcqa_plus: rc.iter().sum::<f64>() / rc.len() as f64,
        mca_strict: mca_of(&rc, 1.0),
        curve,
        aucar: core.aucar,
        norm_dtw: core.norm_dtw,
        core: core.core,
    })
}
