//! Seeded trajectory simulation and Monte-Carlo policy evaluation.
//!
//! Used where the exact history-tree oracle is out of budget (large
//! multi-particle instances) and for trajectory-level invariant checks
//! (event-triggered transmission rules). The simulator tracks the exact
//! filter belief alongside the sampled path so belief-based estimators work
//! unchanged.

use crate::error::Result;
use crate::pomdp::{History, Pomdp};
use crate::spaces::Dist;
use rand::Rng;

/// One sampled path: states, observations, and actions share index `t`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub observations: Vec<usize>,
    pub actions: Vec<usize>,
    pub total_cost: f64,
}

/// Inverse-CDF sample from a distribution.
pub fn sample_index<R: Rng>(d: &Dist, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &m) in d.masses().iter().enumerate() {
        acc += m;
        if u < acc {
            return i;
        }
    }
    d.len() - 1
}

/// Simulate one episode under a history-dependent decision rule.
///
/// The rule sees the history so far and its exact filter belief.
pub fn simulate<R: Rng>(
    p: &Pomdp,
    mut act: impl FnMut(&History, &Dist) -> Result<usize>,
    rng: &mut R,
) -> Result<Trajectory> {
    let joint = sample_index(p.initial(), rng);
    let mut state = joint / p.n_observations();
    let mut obs = joint % p.n_observations();

    let mut history = History {
        observations: vec![obs],
        actions: vec![],
    };
    let (_, mut belief) = p
        .root_belief(obs)
        .expect("sampled observation has positive probability");

    let mut traj = Trajectory {
        states: vec![state],
        observations: vec![obs],
        actions: vec![],
        total_cost: 0.0,
    };

    for t in 0..p.horizon() {
        let a = act(&history, &belief)?;
        traj.actions.push(a);
        traj.total_cost += p.cost(t, state, a);
        if t + 1 == p.horizon() {
            break;
        }
        let next_joint = sample_index(p.kernel(t).row(state, a), rng);
        state = next_joint / p.n_observations();
        obs = next_joint % p.n_observations();
        let (_, next_belief) = p
            .step_belief(t, &belief, a, obs)
            .expect("sampled observation has positive probability");
        belief = next_belief;
        history.actions.push(a);
        history.observations.push(obs);
        traj.states.push(state);
        traj.observations.push(obs);
    }
    Ok(traj)
}

/// Average total cost of a decision rule over `episodes` seeded episodes.
pub fn monte_carlo_value<R: Rng>(
    p: &Pomdp,
    mut act: impl FnMut(&History, &Dist) -> Result<usize>,
    episodes: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut total = 0.0;
    for _ in 0..episodes {
        total += simulate(p, &mut act, rng)?.total_cost;
    }
    Ok(total / episodes as f64)
}
