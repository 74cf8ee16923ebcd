use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower clip applied to survival probabilities before they are used as divisors.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum CurveError {
    #[error("times and probabilities differ in length ({times} vs {probs})")]
    LengthMismatch { times: usize, probs: usize },
    #[error("jump times must be finite, nonnegative and strictly increasing (index {0})")]
    BadTimes(usize),
    #[error("probabilities must lie in [0, 1] and be nonincreasing (index {0})")]
    BadProbs(usize),
    #[error("probability level must lie in [0, 1], got {0}")]
    LevelOutOfRange(f64),
    #[error("curve jumps from zero at t = {0}")]
    DegenerateJump(f64),
}

/// A right-continuous, nonincreasing step function with `S(t) = 1` before the
/// first grid time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurvivalCurve {
    times: Vec<f64>,
    probs: Vec<f64>,
}

/// Result of a generalized inverse `inf { t >= 0 : S(t) <= p }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantile {
    pub time: f64,
    /// The curve never reaches the level; `time` is the last grid time.
    pub saturated: bool,
}

/// Per-jump cumulative hazard increments `(S(t-) - S(t)) / S(t-)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HazardIncrements {
    pub times: Vec<f64>,
    pub increments: Vec<f64>,
}

impl SurvivalCurve {
    pub fn new(times: Vec<f64>, probs: Vec<f64>) -> Result<Self, CurveError> {
        if times.len() != probs.len() {
            return Err(CurveError::LengthMismatch {
                times: times.len(),
                probs: probs.len(),
            });
        }
        let mut prev_t = f64::NEG_INFINITY;
        let mut prev_s = 1.0;
        for (i, (&t, &s)) in times.iter().zip(&probs).enumerate() {
            if !(t.is_finite() && t >= 0.0 && t > prev_t) {
                return Err(CurveError::BadTimes(i));
            }
            if !(0.0..=prev_s).contains(&s) {
                return Err(CurveError::BadProbs(i));
            }
            prev_t = t;
            prev_s = s;
        }
        Ok(Self { times, probs })
    }

    /// Caller guarantees the invariants checked by [`SurvivalCurve::new`].
    pub(crate) fn from_sorted(times: Vec<f64>, probs: Vec<f64>) -> Self {
        debug_assert!(Self::new(times.clone(), probs.clone()).is_ok());
        Self { times, probs }
    }

    /// Evaluates a continuous survival function on `grid`, clamping to keep the
    /// result monotone. The grid must be strictly increasing and nonnegative.
    pub fn materialize(grid: &[f64], f: impl Fn(f64) -> f64) -> Self {
        let mut running = 1.0_f64;
        let probs = grid
            .iter()
            .map(|&t| {
                running = running.min(f(t).clamp(0.0, 1.0));
                running
            })
            .collect();
        Self::from_sorted(grid.to_vec(), probs)
    }

    /// Product-integral reconstruction `prod_{t_j <= t} (1 - dLambda_j)`.
    pub fn from_hazard_increments(h: &HazardIncrements) -> Self {
        let mut s = 1.0;
        let probs = h
            .increments
            .iter()
            .map(|&d| {
                s *= 1.0 - d;
                s
            })
            .collect();
        Self::from_sorted(h.times.clone(), probs)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of grid times `<= t`.
    pub fn count_le(&self, t: f64) -> usize {
        self.times.partition_point(|&u| u <= t)
    }

    /// `S(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        match self.count_le(t) {
            0 => 1.0,
            k => self.probs[k - 1],
        }
    }

    /// `S(t-)`, the value just before `t`.
    pub fn left_limit(&self, t: f64) -> f64 {
        match self.times.partition_point(|&u| u < t) {
            0 => 1.0,
            k => self.probs[k - 1],
        }
    }

    /// Smallest value the curve attains.
    pub fn floor(&self) -> f64 {
        self.probs.last().copied().unwrap_or(1.0)
    }

    /// Generalized inverse `inf { t >= 0 : S(t) <= p }`.
    pub fn quantile(&self, p: f64) -> Result<Quantile, CurveError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(CurveError::LevelOutOfRange(p));
        }
        Ok(self.quantile_unchecked(p))
    }

    pub(crate) fn quantile_unchecked(&self, p: f64) -> Quantile {
        if p >= 1.0 {
            return Quantile {
                time: 0.0,
                saturated: false,
            };
        }
        let j = self.probs.partition_point(|&s| s > p);
        match self.times.get(j) {
            Some(&t) => Quantile {
                time: t,
                saturated: false,
            },
            None => Quantile {
                time: self.times.last().copied().unwrap_or(0.0),
                saturated: true,
            },
        }
    }

    /// Cumulative hazard increments at the jump points of the curve.
    pub fn hazard_increments(&self) -> Result<HazardIncrements, CurveError> {
        let mut out = HazardIncrements::default();
        let mut prev = 1.0;
        for (&t, &s) in self.times.iter().zip(&self.probs) {
            if s < prev {
                if prev <= 0.0 {
                    return Err(CurveError::DegenerateJump(t));
                }
                out.times.push(t);
                out.increments.push((prev - s) / prev);
            }
            prev = s;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_jump() -> SurvivalCurve {
        SurvivalCurve::new(vec![1.0, 2.0], vec![0.8, 0.5]).unwrap()
    }

    #[test]
    fn step_evaluation() {
        let s = two_jump();
        assert_eq!(s.eval(0.0), 1.0);
        assert_eq!(s.eval(0.999), 1.0);
        assert_eq!(s.eval(1.0), 0.8);
        assert_eq!(s.eval(1.5), 0.8);
        assert_eq!(s.eval(2.0), 0.5);
        assert_eq!(s.eval(100.0), 0.5);
        assert_eq!(s.left_limit(1.0), 1.0);
        assert_eq!(s.left_limit(2.0), 0.8);
        assert_eq!(s.left_limit(2.5), 0.5);
    }

    #[test]
    fn quantile_rules() {
        let s = two_jump();
        assert_eq!(s.quantile(0.6).unwrap().time, 2.0);
        assert_eq!(s.quantile(0.8).unwrap().time, 1.0);
        assert_eq!(s.quantile(0.5).unwrap().time, 2.0);
        assert_eq!(
            s.quantile(1.0).unwrap(),
            Quantile {
                time: 0.0,
                saturated: false
            }
        );
        let q = s.quantile(0.0).unwrap();
        assert!(q.saturated);
        assert_eq!(q.time, 2.0);
        assert_eq!(s.quantile(1.2), Err(CurveError::LevelOutOfRange(1.2)));
        assert_eq!(s.quantile(-0.1), Err(CurveError::LevelOutOfRange(-0.1)));
    }

    #[test]
    fn hazard_increments_two_jump() {
        let h = two_jump().hazard_increments().unwrap();
        assert_eq!(h.times, vec![1.0, 2.0]);
        assert!((h.increments[0] - 0.2).abs() < 1e-15);
        assert!((h.increments[1] - 0.375).abs() < 1e-15);
        let back = SurvivalCurve::from_hazard_increments(&h);
        assert!((back.probs()[0] - 0.8).abs() < 1e-15);
        assert!((back.probs()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn flat_curve_has_no_increments() {
        let s = SurvivalCurve::new(vec![1.0, 3.0], vec![1.0, 1.0]).unwrap();
        assert!(s.hazard_increments().unwrap().times.is_empty());
        assert!(SurvivalCurve::default().hazard_increments().unwrap().times.is_empty());
    }

    #[test]
    fn rejects_invalid() {
        assert_eq!(
            SurvivalCurve::new(vec![1.0, 1.0], vec![0.5, 0.4]),
            Err(CurveError::BadTimes(1))
        );
        assert_eq!(
            SurvivalCurve::new(vec![1.0, 2.0], vec![0.5, 0.6]),
            Err(CurveError::BadProbs(1))
        );
        assert_eq!(SurvivalCurve::new(vec![-1.0], vec![0.5]), Err(CurveError::BadTimes(0)));
    }

    #[test]
    fn materialize_is_monotone() {
        let grid = [0.5, 1.0, 2.0];
        let s = SurvivalCurve::materialize(&grid, |t| (-t).exp());
        assert!((s.eval(1.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(s.eval(0.1), 1.0);
    }
}
