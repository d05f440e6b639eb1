//! Synthetic responders: the uniform chance model, models biased toward the
//! correct option, and the averaged chance baseline.
//!
//! All randomness flows from a single `u64` seed. Repetitions and sweep
//! points draw from their own ChaCha8 stream seeded by [`derive_seed`], so
//! results do not depend on how work is scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::car::ThresholdGrid;
use crate::error::{CatError, Result};
use crate::record::{AnswerRecord, DivergenceSet, EvaluationRun};
use crate::report::{metric_report, MetricReport};

/// Name given to the p = 1/K run of a sweep and to averaged chance baselines.
pub const CHANCE_NAME: &str = "chance";

/// Mixes a master seed with a stream index (SplitMix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasedModelSpec {
    pub option_count: usize,
    pub p_correct: f64,
    pub questions: usize,
    pub variants: usize,
    pub seed: u64,
}

impl BiasedModelSpec {
    pub fn chance(option_count: usize, questions: usize, variants: usize, seed: u64) -> Self {
        Self {
            option_count,
            p_correct: 1.0 / option_count as f64,
            questions,
            variants,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.option_count;
        if k < 2 {
            return Err(CatError::InvalidSpec(format!("option count {k} < 2")));
        }
        let chance = 1.0 / k as f64;
        if !(self.p_correct >= chance - 1e-12 && self.p_correct <= 1.0) {
            return Err(CatError::InvalidSpec(format!(
                "p_correct {} outside [1/K = {chance}, 1]",
                self.p_correct
            )));
        }
        if self.questions == 0 || self.variants == 0 {
            return Err(CatError::InvalidSpec(
                "questions and variants must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn id_width(n: usize) -> usize {
    n.saturating_sub(1).max(1).to_string().len()
}

/// Samples N×M responses: correct with probability `p_correct`, otherwise
/// uniform over the K−1 wrong options. Each question's correct option is
/// drawn uniformly; variant 0 is flagged original.
pub fn simulate_run(spec: &BiasedModelSpec) -> Result<EvaluationRun> {
    simulate_named(spec, format!("p={:.2}", spec.p_correct), "synthetic")
}

pub fn simulate_named(
    spec: &BiasedModelSpec,
    model_name: impl Into<String>,
    benchmark_name: impl Into<String>,
) -> Result<EvaluationRun> {
    spec.validate()?;
    let k = spec.option_count;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (qw, vw) = (id_width(spec.questions), id_width(spec.variants));
    let mut sets = Vec::with_capacity(spec.questions);
    for i in 0..spec.questions {
        let correct = rng.random_range(0..k);
        let question_id = format!("q{i:0qw$}");
        let records = (0..spec.variants)
            .map(|j| {
                let predicted = if rng.random::<f64>() < spec.p_correct {
                    correct
                } else {
                    let wrong = rng.random_range(0..k - 1);
                    if wrong >= correct {
                        wrong + 1
                    } else {
                        wrong
                    }
                };
                AnswerRecord {
                    question_id: question_id.clone(),
                    variant_id: format!("v{j:0vw$}"),
                    is_original: j == 0,
                    option_count: k,
                    correct_option: correct,
                    predicted_option: Some(predicted),
                    raw_response: None,
                    soft_score: None,
                }
            })
            .collect();
        sets.push(DivergenceSet::new(records)?);
    }
    EvaluationRun::new(model_name, benchmark_name, sets)
}

/// Bias levels `min(1, 1/K + t·step)` for t = 0, 1, … up to and including 1.0.
pub fn bias_levels(option_count: usize, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(CatError::InvalidSpec(format!(
            "sweep step {step} outside (0, 1]"
        )));
    }
    if option_count < 2 {
        return Err(CatError::InvalidSpec(format!(
            "option count {option_count} < 2"
        )));
    }
    let chance = 1.0 / option_count as f64;
    let mut levels = Vec::new();
    for t in 0.. {
        let p = chance + t as f64 * step;
        if p >= 1.0 - 1e-9 {
            levels.push(1.0);
            break;
        }
        // Strip float noise such as 0.30000000000000004.
        levels.push((p * 1e12).round() / 1e12);
    }
    Ok(levels)
}

/// One simulated run per bias level; the first is named [`CHANCE_NAME`].
pub fn bias_sweep(
    option_count: usize,
    step: f64,
    questions: usize,
    variants: usize,
    seed: u64,
) -> Result<Vec<(f64, EvaluationRun)>> {
    let levels = bias_levels(option_count, step)?;
    levels
        .par_iter()
        .enumerate()
        .map(|(t, &p)| {
            let spec = BiasedModelSpec {
                option_count,
                p_correct: p,
                questions,
                variants,
                seed: derive_seed(seed, t as u64),
            };
            let name = if t == 0 {
                CHANCE_NAME.to_string()
            } else {
                format!("p={p:.2}")
            };
            let benchmark = format!("synthetic-k{option_count}");
            Ok((p, simulate_named(&spec, name, benchmark)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChanceBaselineSpec {
    pub option_count: usize,
    pub questions: usize,
    pub variants: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl ChanceBaselineSpec {
    /// 1000 questions, 10 variants, 100 repetitions.
    pub fn standard(option_count: usize, seed: u64) -> Self {
        Self {
            option_count,
            questions: 1000,
            variants: 10,
            repetitions: 100,
            seed,
        }
    }
}

/// Every metric and curve value averaged over independent chance runs.
pub fn chance_baseline(spec: &ChanceBaselineSpec, grid: &ThresholdGrid) -> Result<MetricReport> {
    if spec.repetitions == 0 {
        return Err(CatError::InvalidSpec(
            "repetitions must be at least 1".into(),
        ));
    }
    let benchmark = format!("synthetic-k{}", spec.option_count);
    let reports = (0..spec.repetitions)
        .into_par_iter()
        .map(|r| {
            let run = simulate_named(
                &BiasedModelSpec::chance(
                    spec.option_count,
                    spec.questions,
                    spec.variants,
                    derive_seed(spec.seed, r as u64),
                ),
                CHANCE_NAME,
                benchmark.as_str(),
            )?;
            metric_report(&run, grid)
        })
        .collect::<Result<Vec<_>>>()?;
    MetricReport::mean_of(&reports, CHANCE_NAME, benchmark)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::{mcqa_plus, rc_values};
    use crate::car::mca;
    use crate::record::emit_run;

    fn spec(k: usize, p: f64, n: usize, m: usize, seed: u64) -> BiasedModelSpec {
        BiasedModelSpec {
            option_count: k,
            p_correct: p,
            questions: n,
            variants: m,
            seed,
        }
    }

    #[test]
    fn certain_model_is_always_right() {
        let run = simulate_run(&spec(5, 1.0, 50, 10, 3)).unwrap();
        assert!(rc_values(&run).iter().all(|&r| r == 1.0));
    }

    #[test]
    fn rejects_below_chance() {
        assert!(matches!(
            simulate_run(&spec(5, 0.05, 10, 10, 1)),
            Err(CatError::InvalidSpec(_))
        ));
        assert!(simulate_run(&spec(5, 1.01, 10, 10, 1)).is_err());
        assert!(simulate_run(&spec(1, 1.0, 10, 10, 1)).is_err());
        assert!(simulate_run(&BiasedModelSpec::chance(3, 10, 10, 1)).is_ok());
    }

    #[test]
    fn deterministic_given_seed() {
        let a = simulate_run(&spec(4, 0.4, 200, 10, 42)).unwrap();
        let b = simulate_run(&spec(4, 0.4, 200, 10, 42)).unwrap();
        let c = simulate_run(&spec(4, 0.4, 200, 10, 43)).unwrap();
        assert_eq!(emit_run(&a), emit_run(&b));
        assert_ne!(emit_run(&a), emit_run(&c));
    }

    #[test]
    fn wrong_answers_avoid_the_correct_option_uniformly() {
        let run = simulate_run(&spec(4, 0.25, 2000, 10, 9)).unwrap();
        let mut offsets = [0usize; 4];
        for r in run.records() {
            let p = r.predicted_option.unwrap();
            offsets[(p + 4 - r.correct_option) % 4] += 1;
        }
        // 20000 draws, each offset expected 5000 (sd ≈ 61).
        for o in offsets {
            assert!((o as f64 - 5000.0).abs() < 300.0, "{offsets:?}");
        }
    }

    #[test]
    fn mcqa_plus_tracks_p_correct() {
        let run = simulate_run(&spec(5, 0.6, 1000, 10, 11)).unwrap();
        assert!((mcqa_plus(&run) - 0.6).abs() <= 0.02);
    }

    #[test]
    fn expectation_check_over_seeds() {
        // |MCQA+ − p| ≤ 3σ in at least 99 of 100 seeds.
        let (p, n, m) = (0.35, 200, 10);
        let bound = 3.0 * (p * (1.0 - p) / (n * m) as f64).sqrt();
        let within = (0..100)
            .filter(|&s| {
                let run = simulate_run(&spec(5, p, n, m, s)).unwrap();
                (mcqa_plus(&run) - p).abs() <= bound
            })
            .count();
        assert!(within >= 99, "{within}");
    }

    #[test]
    fn strict_mca_closed_form() {
        // P[all 10 correct] at p = 0.5 is 0.5^10 ≈ 0.000977.
        let run = simulate_run(&spec(5, 0.5, 100_000, 10, 5)).unwrap();
        let expected = 0.5f64.powi(10);
        let sd = (expected * (1.0 - expected) / 100_000.0).sqrt();
        assert!((mca(&run, 1.0) - expected).abs() < 4.0 * sd);
    }

    #[test]
    fn sweep_levels() {
        let l2 = bias_levels(2, 0.1).unwrap();
        assert_eq!(l2, vec![0.5, 0.6, 0.7, 0.8, 0.9, 1.0]);
        let l5 = bias_levels(5, 0.1).unwrap();
        assert_eq!(l5, vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]);
        let l10 = bias_levels(10, 0.1).unwrap();
        assert_eq!(l10.len(), 10);
        assert_eq!(l10[0], 0.1);
        assert_eq!(*l10.last().unwrap(), 1.0);
        let l3 = bias_levels(3, 0.1).unwrap();
        assert_eq!(l3.len(), 8);
        assert!(bias_levels(4, 0.0).is_err());
        assert_eq!(bias_levels(4, 1.0).unwrap(), vec![0.25, 1.0]);
    }

    #[test]
    fn sweep_runs_are_named_and_independent() {
        let sweep = bias_sweep(5, 0.1, 20, 10, 1).unwrap();
        assert_eq!(sweep.len(), 9);
        assert_eq!(sweep[0].1.model_name, CHANCE_NAME);
        assert_eq!(sweep[3].1.model_name, "p=0.50");
        let again = bias_sweep(5, 0.1, 20, 10, 1).unwrap();
        assert_eq!(sweep, again);
    }

    #[test]
    fn chance_baseline_two_options() {
        let spec = ChanceBaselineSpec {
            option_count: 2,
            questions: 1000,
            variants: 10,
            repetitions: 20,
            seed: 1,
        };
        let report = chance_baseline(&spec, &ThresholdGrid::default()).unwrap();
        assert!((report.mcqa_plus - 0.5).abs() <= 0.01);
        assert_eq!(report.model_name, CHANCE_NAME);
        let again = chance_baseline(&spec, &ThresholdGrid::default()).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }
}
