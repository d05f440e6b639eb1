//! Minimum-consistency accuracy, CAR curves and the CORE index.
//!
//! Everything here works on a slice of per-question consistency scores, so
//! the hard (multiple-choice RC) and soft (similarity-based) pipelines share
//! one implementation. [`mca`] and [`car_curve`] are the run-level entry
//! points for hard RC.

use serde::{Deserialize, Serialize};

use crate::baseline::rc_values;
use crate::dtw::dtw_distance;
use crate::error::{CatError, Result};
use crate::record::EvaluationRun;

/// Slack on `score >= c` so that e.g. 3/10 passes at c = 0.3.
pub const THRESHOLD_TOLERANCE: f64 = 1e-9;

/// Strictly increasing consistency thresholds inside [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThresholdGrid(Vec<f64>);

/// Strips accumulation noise so 0.1 * 3 prints as 0.3.
fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

impl ThresholdGrid {
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.len() < 2 {
            return Err(CatError::DegenerateGrid(thresholds.len()));
        }
        if let Some(c) = thresholds.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(CatError::InvalidGrid(format!(
                "threshold {c} outside [0, 1]"
            )));
        }
        if let Some(w) = thresholds.windows(2).find(|w| w[0] >= w[1]) {
            return Err(CatError::InvalidGrid(format!(
                "thresholds not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self(thresholds))
    }

    /// `min, min + step, ..., max`; the step must divide the span.
    pub fn uniform(min: f64, max: f64, step: f64) -> Result<Self> {
        if step.is_nan() || step <= 0.0 || max.is_nan() || min.is_nan() || max <= min {
            return Err(CatError::InvalidGrid(format!(
                "need min < max and step > 0, got min={min} max={max} step={step}"
            )));
        }
        let intervals = ((max - min) / step).round();
        if (intervals * step - (max - min)).abs() > 1e-9 {
            return Err(CatError::InvalidGrid(format!(
                "step {step} does not divide [{min}, {max}]"
            )));
        }
        let n = intervals as usize;
        let thresholds = (0..=n)
            .map(|k| {
                if k == n {
                    max
                } else {
                    round12(min + k as f64 * step)
                }
            })
            .collect();
        Self::new(thresholds)
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0[0]
    }

    pub fn max(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// Index of the threshold equal to `c` within [`THRESHOLD_TOLERANCE`].
    pub fn position(&self, c: f64) -> Option<usize> {
        self.0
            .iter()
            .position(|t| (t - c).abs() <= THRESHOLD_TOLERANCE)
    }
}

impl Default for ThresholdGrid {
    /// [0, 1] in steps of 0.1.
    fn default() -> Self {
        Self::uniform(0.0, 1.0, 0.1).expect("default grid is valid")
    }
}

impl TryFrom<Vec<f64>> for ThresholdGrid {
    type Error = CatError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ThresholdGrid> for Vec<f64> {
    fn from(g: ThresholdGrid) -> Self {
        g.0
    }
}

/// Points `(c_k, MCA(c_k))` over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarCurve {
    grid: ThresholdGrid,
    values: Vec<f64>,
}

impl CarCurve {
    /// Checks lengths and range; monotonicity is not enforced so that
    /// averaged or externally supplied curves can be represented.
    pub fn new(grid: ThresholdGrid, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(CatError::CurveLength {
                grid: grid.len(),
                values: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(CatError::InvalidGrid(format!(
                "curve value {v} outside [0, 1]"
            )));
        }
        Ok(Self { grid, values })
    }

    /// The perfect model: MCA = 1 everywhere.
    pub fn ideal(grid: ThresholdGrid) -> Self {
        let values = vec![1.0; grid.len()];
        Self { grid, values }
    }

    /// The worst model: 1 at the first threshold, 0 after.
    pub fn worst(grid: ThresholdGrid) -> Self {
        let mut values = vec![0.0; grid.len()];
        values[0] = 1.0;
        Self { grid, values }
    }

    pub fn grid(&self) -> &ThresholdGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid
            .thresholds()
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[0] >= w[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoreBreakdown {
    pub aucar: f64,
    pub dtw_model: f64,
    pub dtw_worst: f64,
    pub norm_dtw: f64,
    pub core: f64,
}

/// Fraction of scores at or above `c`.
pub fn mca_of(scores: &[f64], c: f64) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let passing = scores
        .iter()
        .filter(|&&s| s >= c - THRESHOLD_TOLERANCE)
        .count();
    passing as f64 / scores.len() as f64
}

pub fn car_curve_of(scores: &[f64], grid: &ThresholdGrid) -> CarCurve {
    let values = grid
        .thresholds()
        .iter()
        .map(|&c| mca_of(scores, c))
        .collect();
    CarCurve {
        grid: grid.clone(),
        values,
    }
}

/// Minimum-consistency accuracy: fraction of questions with RC ≥ c.
pub fn mca(run: &EvaluationRun, c: f64) -> f64 {
    mca_of(&rc_values(run), c)
}

pub fn car_curve(run: &EvaluationRun, grid: &ThresholdGrid) -> CarCurve {
    car_curve_of(&rc_values(run), grid)
}

/// Trapezoidal area under the curve, normalized by the grid span so the
/// result lies in [0, 1] for any sub-range.
pub fn aucar(curve: &CarCurve) -> f64 {
    let c = curve.grid.thresholds();
    let v = &curve.values;
    let area: f64 = (0..c.len() - 1)
        .map(|k| (v[k] + v[k + 1]) / 2.0 * (c[k + 1] - c[k]))
        .sum();
    let span = curve.grid.max() - curve.grid.min();
    (area / span).clamp(0.0, 1.0)
}

pub fn core_index(curve: &CarCurve) -> Result<CoreBreakdown> {
    let k = curve.grid.len();
    if k < 2 {
        return Err(CatError::DegenerateGrid(k));
    }
    let ideal = vec![1.0; k];
    let worst = CarCurve::worst(curve.grid.clone());
    let dtw_model = dtw_distance(&curve.values, &ideal)?;
    let dtw_worst = dtw_distance(&worst.values, &ideal)?;
    let norm_dtw = (1.0 - dtw_model / dtw_worst).clamp(0.0, 1.0);
    let aucar = aucar(curve);
    Ok(CoreBreakdown {
        aucar,
        dtw_model,
        dtw_worst,
        norm_dtw,
        core: aucar * norm_dtw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_grid() {
        let g = ThresholdGrid::default();
        assert_eq!(g.len(), 11);
        assert_eq!(g.min(), 0.0);
        assert_eq!(g.max(), 1.0);
        assert_eq!(g.position(0.3), Some(3));
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(
            ThresholdGrid::new(vec![0.5]),
            Err(CatError::DegenerateGrid(1))
        ));
        assert!(ThresholdGrid::new(vec![0.0, 0.5, 0.5]).is_err());
        assert!(ThresholdGrid::new(vec![0.0, 1.5]).is_err());
        assert!(ThresholdGrid::uniform(0.0, 1.0, 0.3).is_err());
        assert!(ThresholdGrid::uniform(0.0, 1.0, 0.0).is_err());
        let g = ThresholdGrid::uniform(0.2, 0.8, 0.2).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.max(), 0.8);
    }

    #[test]
    fn mca_examples() {
        let scores = [1.0, 0.5, 0.3];
        assert_eq!(mca_of(&scores, 0.0), 1.0);
        assert_eq!(mca_of(&scores, 0.5), 2.0 / 3.0);
        // 3/10 computed in floating point sits just below 0.3.
        assert_eq!(mca_of(&[3.0 / 10.0], 0.1 * 3.0), 1.0);
        assert_eq!(mca_of(&[0.7], 0.1 * 7.0 + 1e-6), 0.0);
    }

    #[test]
    fn aucar_examples() {
        let grid = ThresholdGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let curve = CarCurve::new(grid, vec![1.0, 0.5, 0.0]).unwrap();
        assert_eq!(aucar(&curve), 0.5);
        assert_eq!(aucar(&CarCurve::ideal(ThresholdGrid::default())), 1.0);
        let worst = aucar(&CarCurve::worst(ThresholdGrid::default()));
        assert!((worst - 0.05).abs() < 1e-15);
    }

    #[test]
    fn aucar_normalizes_sub_range() {
        let grid = ThresholdGrid::uniform(0.5, 1.0, 0.25).unwrap();
        assert_eq!(aucar(&CarCurve::ideal(grid)), 1.0);
    }

    #[test]
    fn core_degenerate_curves() {
        let ideal = core_index(&CarCurve::ideal(ThresholdGrid::default())).unwrap();
        assert_eq!((ideal.aucar, ideal.norm_dtw, ideal.core), (1.0, 1.0, 1.0));
        let worst = core_index(&CarCurve::worst(ThresholdGrid::default())).unwrap();
        assert_eq!(worst.dtw_worst, 10.0);
        assert_eq!(worst.dtw_model, 10.0);
        assert_eq!(worst.norm_dtw, 0.0);
        assert_eq!(worst.core, 0.0);
        assert!((worst.aucar - 0.05).abs() < 1e-15);
    }

    #[test]
    fn curve_length_mismatch() {
        assert!(matches!(
            CarCurve::new(ThresholdGrid::default(), vec![1.0; 3]),
            Err(CatError::CurveLength {
                grid: 11,
                values: 3
            })
        ));
    }

    fn scores() -> impl Strategy<Value = (usize, Vec<f64>)> {
        (1usize..=12).prop_flat_map(|m| {
            (
                Just(m),
                prop::collection::vec((0..=m).prop_map(move |k| k as f64 / m as f64), 1..40),
            )
        })
    }

    proptest! {
        #[test]
        fn mca_monotone_and_anchored((_, s) in scores(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(mca_of(&s, lo) >= mca_of(&s, hi));
            prop_assert_eq!(mca_of(&s, 0.0), 1.0);
        }

        #[test]
        fn mca_is_a_step_function((m, s) in scores(), c in 0.0f64..=1.0) {
            // Constant on (j/M, (j+1)/M]: evaluating at c and at the smallest
            // multiple of 1/M at or above c agrees.
            let up = (c * m as f64 - THRESHOLD_TOLERANCE).ceil() / m as f64;
            prop_assert_eq!(mca_of(&s, c), mca_of(&s, up));
        }

        #[test]
        fn core_bounded_by_aucar((_, s) in scores()) {
            let curve = car_curve_of(&s, &ThresholdGrid::default());
            prop_assert!(curve.is_monotone());
            let b = core_index(&curve).unwrap();
            prop_assert!((0.0..=1.0).contains(&b.aucar));
            prop_assert!((0.0..=1.0).contains(&b.norm_dtw));
            prop_assert!(b.core <= b.aucar);
        }

        #[test]
        fn aucar_respects_domination(v in prop::collection::vec(0.0f64..=1.0, 11), bump in prop::collection::vec(0.0f64..=1.0, 11)) {
            let grid = ThresholdGrid::default();
            let higher: Vec<f64> = v.iter().zip(&bump).map(|(x, d)| (x + d).min(1.0)).collect();
            let low = CarCurve::new(grid.clone(), v).unwrap();
            let high = CarCurve::new(grid, higher).unwrap();
            prop_assert!(aucar(&high) >= aucar(&low));
        }
    }
}
