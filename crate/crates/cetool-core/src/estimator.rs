//! Abstract-state estimation rules `ĝ_t: H_t → S̃`.
//!
//! An [`Estimator`] turns a history (with its filter belief available) into an
//! abstract state index. The certainty-equivalent policy then acts with the
//! abstract MDP's optimal policy at that estimate. Estimators must be total on
//! every reachable history.

use crate::abstraction::Abstraction;
use crate::error::{Error, Result};
use crate::pomdp::History;
use crate::spaces::Dist;
use std::collections::HashMap;

/// Recursively updated estimate of the kind used with event-triggered
/// communication: hold the last received value, advance it through a
/// deterministic prediction table on every action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecursiveRule {
    /// Abstract index of the initial predicted estimate `x̂_{1|0}`.
    pub initial: usize,
    /// Observation index that encodes "no transmission".
    pub null_obs: usize,
    /// Abstract index announced by each ordinary observation.
    pub obs_map: Vec<usize>,
    /// `predict[x̂][a]`: predicted estimate after taking `a` at estimate `x̂`.
    pub predict: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub enum Estimator {
    /// `ĝ_t(h_t) = map[y_t]`.
    LastObservation { map: Vec<usize> },
    /// φ of the maximum-a-posteriori state (lowest index on ties).
    MapPosterior,
    /// The abstract 1-median of the belief pushforward:
    /// `argmin_{z} Σ_s b(s|h) d_S̃(φ(s), z)` (lowest index on ties).
    BeliefMedian,
    /// A fixed abstract state, regardless of the history.
    Constant(usize),
    /// Filtered/predicted estimate recursion driven by the history.
    Recursive(RecursiveRule),
    /// Explicit table over histories.
    Table(HashMap<History, usize>),
}

impl Estimator {
    /// Evaluate the estimate for a history whose filter belief is `belief`.
    pub fn estimate(&self, h: &History, belief: &Dist, ab: &Abstraction) -> Result<usize> {
        let z = match self {
            Estimator::LastObservation { map } => {
                let y = *h.observations.last().expect("history is non-empty");
                *map.get(y)
                    .ok_or_else(|| Error::EstimatorUndefined(h.to_string()))?
            }
            Estimator::MapPosterior => ab.phi(belief.argmax()),
            Estimator::BeliefMedian => {
                let target = ab.target();
                let mut best = 0usize;
                let mut best_v = f64::INFINITY;
                for z in 0..target.len() {
                    let v = belief.expect(|s| target.dist(ab.phi(s), z));
                    if v < best_v {
                        best_v = v;
                        best = z;
                    }
                }
                best
            }
            Estimator::Constant(k) => *k,
            Estimator::Recursive(rule) => rule.run(h)?,
            Estimator::Table(map) => *map
                .get(h)
                .ok_or_else(|| Error::EstimatorUndefined(h.to_string()))?,
        };
        if z >= ab.n_abstract() {
            return Err(Error::EstimatorUndefined(format!(
                "{h} (estimate {z} outside the abstract space)"
            )));
        }
        Ok(z)
    }

    pub fn describe(&self) -> String {
        match self {
            Estimator::LastObservation { .. } => "last-observation".into(),
            Estimator::MapPosterior => "map-posterior".into(),
            Estimator::BeliefMedian => "posterior-median-representative".into(),
            Estimator::Constant(k) => format!("constant({k})"),
            Estimator::Recursive(_) => "recursive".into(),
            Estimator::Table(_) => "table".into(),
        }
    }
}

impl RecursiveRule {
    /// Replay the filtered/predicted recursion along a history and return the
    /// filtered estimate at its final time.
    fn run(&self, h: &History) -> Result<usize> {
        let mut predicted = self.initial;
        let mut filtered = self.initial;
        for (tau, &y) in h.observations.iter().enumerate() {
            filtered = if y == self.null_obs {
                predicted
            } else {
                *self
                    .obs_map
                    .get(y)
                    .ok_or_else(|| Error::EstimatorUndefined(h.to_string()))?
            };
            if tau < h.actions.len() {
                let a = h.actions[tau];
                predicted = *self
                    .predict
                    .get(filtered)
                    .and_then(|row| row.get(a))
                    .ok_or_else(|| Error::EstimatorUndefined(h.to_string()))?;
            }
        }
        Ok(filtered)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::MetricSpace;

    #[test]
    fn map_posterior_composes_argmax_with_phi() {
        let space = MetricSpace::line(4, 1.0);
        let target = space.restrict(&[0, 2]).unwrap();
        let ab = Abstraction::dirac(4, target, vec![0, 0, 1, 1], &[0, 2]).unwrap();
        let h = History::new(vec![0], vec![]).unwrap();
        let b = Dist::new(vec![0.1, 0.2, 0.6, 0.1]).unwrap();
        let z = Estimator::MapPosterior.estimate(&h, &b, &ab).unwrap();
        assert_eq!(z, 1);
    }

    #[test]
    fn belief_median_minimizes_expected_abstract_distance() {
        let space = MetricSpace::line(3, 1.0);
        let ab = Abstraction::identity(&space);
        let h = History::new(vec![0], vec![]).unwrap();
        // Weighted 1-median: the point where the cumulative mass crosses 1/2.
        let b = Dist::new(vec![0.4, 0.0, 0.6]).unwrap();
        assert_eq!(Estimator::BeliefMedian.estimate(&h, &b, &ab).unwrap(), 2);
        let b = Dist::new(vec![0.6, 0.0, 0.4]).unwrap();
        assert_eq!(Estimator::BeliefMedian.estimate(&h, &b, &ab).unwrap(), 0);
        let b = Dist::new(vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(Estimator::BeliefMedian.estimate(&h, &b, &ab).unwrap(), 1);
        // Exact tie between all three points: lowest index wins.
        let b = Dist::new(vec![0.5, 0.0, 0.5]).unwrap();
        assert_eq!(Estimator::BeliefMedian.estimate(&h, &b, &ab).unwrap(), 0);
    }

    #[test]
    fn recursive_rule_replays_history() {
        // Two abstract states; null observation index 2; prediction holds.
        let rule = RecursiveRule {
            initial: 0,
            null_obs: 2,
            obs_map: vec![0, 1],
            predict: vec![vec![0, 1], vec![1, 0]],
        };
        let ab = Abstraction::identity(&MetricSpace::line(2, 1.0));
        let b = Dist::uniform(2);

        // y1 = null: estimate is the initial prediction.
        let h = History::new(vec![2], vec![]).unwrap();
        assert_eq!(
            Estimator::Recursive(rule.clone())
                .estimate(&h, &b, &ab)
                .unwrap(),
            0
        );
        // y1 = 1 (received), a1 = 0 predicts 1, y2 = null keeps prediction.
        let h = History::new(vec![1, 2], vec![0]).unwrap();
        assert_eq!(Estimator::Recursive(rule).estimate(&h, &b, &ab).unwrap(), 1);
    }

    #[test]
    fn out_of_range_estimates_are_rejected() {
        let ab = Abstraction::identity(&MetricSpace::line(2, 1.0));
        let h = History::new(vec![0], vec![]).unwrap();
        let b = Dist::uniform(2);
        let e = Estimator::Constant(5);
        assert!(matches!(
            e.estimate(&h, &b, &ab),
            Err(Error::EstimatorUndefined(_))
        ));
    }

    #[test]
    fn table_estimator_misses_are_errors() {
        let ab = Abstraction::identity(&MetricSpace::line(2, 1.0));
        let h = History::new(vec![0], vec![]).unwrap();
        let b = Dist::uniform(2);
        let e = Estimator::Table(HashMap::new());
        assert!(matches!(
            e.estimate(&h, &b, &ab),
            Err(Error::EstimatorUndefined(_))
        ));
    }
}
