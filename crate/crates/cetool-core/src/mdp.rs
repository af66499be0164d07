//! Finite-horizon MDP solving and Markov-policy evaluation.
//!
//! An [`Mdp`] is `⟨S, A, {P_t}_{t<T−1}, {c_t}_{t<T}, T⟩` over a finite metric
//! state space. [`Mdp::solve`] runs backward induction with the terminal
//! convention `V_T ≡ 0` (0-based; the sum of costs runs over `t ∈ 0..T`), and
//! [`lipschitz_of`] measures the exact Lipschitz constant of a value function
//! with respect to the state metric — the quantity the sub-optimality bound
//! consumes.

use crate::error::{Error, Result};
use crate::spaces::{Dist, Kernel, MetricSpace};
use serde::{Deserialize, Serialize};

/// Finite-horizon MDP over a finite metric state space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mdp {
    space: MetricSpace,
    n_actions: usize,
    /// `kernels[t]` maps `(s, a)` to the law of `S_{t+1}`; length `T − 1`.
    kernels: Vec<Kernel>,
    /// `costs[t][s][a]`; length `T`.
    costs: Vec<Vec<Vec<f64>>>,
}

/// A deterministic Markov policy: an action for every `(t, s)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkovPolicy {
    table: Vec<Vec<usize>>,
}

impl MarkovPolicy {
    /// Validate a decision table against an MDP: one total row per stage.
    pub fn new(table: Vec<Vec<usize>>, m: &Mdp) -> Result<Self> {
        if table.len() != m.horizon() {
            return Err(Error::DimensionMismatch {
                what: "policy stages",
                expected: m.horizon(),
                got: table.len(),
            });
        }
        for (t, row) in table.iter().enumerate() {
            if row.len() != m.n_states() {
                return Err(Error::DimensionMismatch {
                    what: "policy states",
                    expected: m.n_states(),
                    got: row.len(),
                });
            }
            for (s, &a) in row.iter().enumerate() {
                if a >= m.n_actions() {
                    return Err(Error::InvalidModel(format!(
                        "policy action {a} at (t={t}, s={s}) out of range"
                    )));
                }
            }
        }
        Ok(Self { table })
    }

    #[inline]
    pub fn action(&self, t: usize, s: usize) -> usize {
        self.table[t][s]
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }

    /// Pull a policy on an abstract space back to the source space along a
    /// fiber map: `π̄_t(s) = π_t(phi(s))`.
    pub fn compose_with_map(&self, phi: &[usize], n_source: usize) -> Self {
        let table = self
            .table
            .iter()
            .map(|row| (0..n_source).map(|s| row[phi[s]]).collect())
            .collect();
        Self { table }
    }
}

/// Backward-induction output: the optimal policy and the value functions
/// `values[t]` for `t ∈ 0..=T` (`values[T]` is the terminal zero vector).
#[derive(Debug, Clone)]
pub struct Solution {
    pub policy: MarkovPolicy,
    pub values: Vec<Vec<f64>>,
}

impl Mdp {
    pub fn new(
        space: MetricSpace,
        n_actions: usize,
        kernels: Vec<Kernel>,
        costs: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let n = space.len();
        let horizon = costs.len();
        if horizon == 0 {
            return Err(Error::InvalidModel("horizon must be at least 1".into()));
        }
        if kernels.len() + 1 != horizon {
            return Err(Error::DimensionMismatch {
                what: "dynamics kernels (need T-1)",
                expected: horizon - 1,
                got: kernels.len(),
            });
        }
        if n_actions == 0 {
            return Err(Error::InvalidModel("need at least one action".into()));
        }
        for (t, k) in kernels.iter().enumerate() {
            if k.n_states() != n || k.target_len() != n || k.n_actions() != n_actions {
                return Err(Error::InvalidModel(format!(
                    "kernel at t={t} has shape {}x{}→{}, expected {n}x{n_actions}→{n}",
                    k.n_states(),
                    k.n_actions(),
                    k.target_len()
                )));
            }
        }
        for (t, table) in costs.iter().enumerate() {
            if table.len() != n {
                return Err(Error::InvalidModel(format!(
                    "cost table at t={t} has {} states, expected {n}",
                    table.len()
                )));
            }
            for row in table {
                if row.len() != n_actions {
                    return Err(Error::InvalidModel(format!(
                        "cost table at t={t} has {} actions, expected {n_actions}",
                        row.len()
                    )));
                }
                for &c in row {
                    if !c.is_finite() {
                        return Err(Error::InvalidModel(
                            "costs must be uniformly bounded reals".into(),
                        ));
                    }
                }
            }
        }
        Ok(Self {
            space,
            n_actions,
            kernels,
            costs,
        })
    }

    pub fn space(&self) -> &MetricSpace {
        &self.space
    }

    pub fn n_states(&self) -> usize {
        self.space.len()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn horizon(&self) -> usize {
        self.costs.len()
    }

    #[inline]
    pub fn cost(&self, t: usize, s: usize, a: usize) -> f64 {
        self.costs[t][s][a]
    }

    pub fn costs(&self) -> &[Vec<Vec<f64>>] {
        &self.costs
    }

    pub fn kernel(&self, t: usize) -> &Kernel {
        &self.kernels[t]
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    #[inline]
    pub fn transition(&self, t: usize, s: usize, a: usize) -> &Dist {
        self.kernels[t].row(s, a)
    }

    /// Uniform cost bound `c_max = max |c_t(s,a)|`.
    pub fn cost_bound(&self) -> f64 {
        self.costs
            .iter()
            .flatten()
            .flatten()
            .fold(0.0f64, |m, &c| m.max(c.abs()))
    }

    /// Backward induction. `V_T ≡ 0`;
    /// `V_t(s) = min_a { c_t(s,a) + Σ_{s'} P_t(s'|s,a) V_{t+1}(s') }` with
    /// ties broken toward the lowest action index.
    pub fn solve(&self) -> Solution {
        let n = self.n_states();
        let t_max = self.horizon();
        let mut values = vec![vec![0.0f64; n]; t_max + 1];
        let mut table = vec![vec![0usize; n]; t_max];
        for t in (0..t_max).rev() {
            for s in 0..n {
                let mut best_a = 0usize;
                let mut best_v = f64::INFINITY;
                for a in 0..self.n_actions {
                    let v = self.q_value(t, s, a, &values[t + 1]);
                    if v < best_v {
                        best_v = v;
                        best_a = a;
                    }
                }
                values[t][s] = best_v;
                table[t][s] = best_a;
            }
        }
        Solution {
            policy: MarkovPolicy { table },
            values,
        }
    }

    /// `c_t(s,a) + Σ_{s'} P_t(s'|s,a) V_next(s')`. At the final stage
    /// (`t = T−1`, no kernel) this is the bare cost.
    #[inline]
    pub fn q_value(&self, t: usize, s: usize, a: usize, v_next: &[f64]) -> f64 {
        let mut v = self.costs[t][s][a];
        if t < self.kernels.len() {
            let row = self.kernels[t].row(s, a);
            for (s2, &p) in row.masses().iter().enumerate() {
                v += p * v_next[s2];
            }
        }
        v
    }

    /// Exact evaluation of a Markov policy; `values[t]` for `t ∈ 0..=T`.
    pub fn evaluate_policy(&self, pi: &MarkovPolicy) -> Result<Vec<Vec<f64>>> {
        if pi.table.len() != self.horizon() || pi.table.iter().any(|r| r.len() != self.n_states()) {
            return Err(Error::InvalidModel(
                "policy is not total over (t, s)".into(),
            ));
        }
        let n = self.n_states();
        let t_max = self.horizon();
        let mut values = vec![vec![0.0f64; n]; t_max + 1];
        for t in (0..t_max).rev() {
            for s in 0..n {
                let v_next: &[f64] = &values[t + 1];
                // Same arithmetic as the optimal recursion so that optimal
                // policies reproduce optimal values bit for bit.
                values[t][s] = self.q_value(t, s, pi.action(t, s), v_next);
            }
        }
        Ok(values)
    }
}

/// Exact Lipschitz constant of a value vector with respect to the space
/// metric: `max_{s≠s'} |v(s) − v(s')| / d(s,s')`.
///
/// Zero-distance pairs are skipped (the callers' spaces separate points);
/// singleton spaces give 0.
pub fn lipschitz_of(values: &[f64], space: &MetricSpace) -> f64 {
    let n = space.len();
    let mut lip = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = space.dist(i, j);
            if d > 0.0 {
                lip = lip.max((values[i] - values[j]).abs() / d);
            }
        }
    }
    lip
}
