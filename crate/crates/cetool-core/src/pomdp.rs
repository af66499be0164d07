//! POMDP representation, exact Bayes filtering, and the history-tree oracle.
//!
//! A [`Pomdp`] is `⟨S, Y, A, ξ, {P_t}, {c_t}, T⟩` where `ξ ∈ Δ(S×Y)` is the
//! initial law of `(S_1, Y_1)` and each kernel maps `(s, a)` to a joint law
//! over `S×Y` for the next step. The controller sees the history
//! `h_t = (y_{1:t}, a_{1:t−1})`.
//!
//! The belief `b_{t|t}(·|h_t)` is the posterior of `S_t` given `h_t`. It is
//! policy independent — [`filter`] takes no policy argument, which makes the
//! independence structural — and is computed exactly by the usual
//! predict-then-condition recursion.
//!
//! [`HistoryTree`] materializes every positive-probability history up to the
//! horizon, breadth first, with memoized beliefs. Identical beliefs reached by
//! different histories are deliberately *not* merged: exactness at desk scale
//! beats cleverness, and merging would introduce tolerance questions. On the
//! tree, [`optimal_value`] runs the backward recursion
//!
//! ```text
//!   W_t(h) = min_a { E[c_t(S_t,a) | h] + Σ_{y'} Pr(y'|h,a) · W_{t+1}(h·a·y') }
//! ```
//!
//! which is the exact optimal value over all history-dependent policies (on a
//! finite tree deterministic policies attain the infimum), and
//! [`evaluate_history_policy`] evaluates an arbitrary policy exactly.
//!
//! Probability-zero histories are excluded throughout: conditional
//! expectations are only defined on positive-probability events, so
//! "reachable" always means strictly positive probability under the node's
//! own action prefix.

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::spaces::{Dist, Kernel, MetricSpace};
use serde::{Deserialize, Serialize};

/// Sentinel child id for zero-probability observations.
pub const NO_CHILD: usize = usize::MAX;

/// Finite POMDP with metric state space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pomdp {
    space: MetricSpace,
    n_observations: usize,
    n_actions: usize,
    /// Law of `(S_1, Y_1)` over `S×Y`, flattened as `s * |Y| + y`.
    initial: Dist,
    /// `kernels[t]` maps `(s,a)` to a law over `S×Y`; length `T − 1`.
    kernels: Vec<Kernel>,
    /// `costs[t][s][a]`; length `T`.
    costs: Vec<Vec<Vec<f64>>>,
}

impl Pomdp {
    pub fn new(
        space: MetricSpace,
        n_observations: usize,
        n_actions: usize,
        initial: Dist,
        kernels: Vec<Kernel>,
        costs: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let ns = space.len();
        let horizon = costs.len();
        if horizon == 0 {
            return Err(Error::InvalidModel("horizon must be at least 1".into()));
        }
        if n_observations == 0 || n_actions == 0 {
            return Err(Error::InvalidModel(
                "need at least one observation and one action".into(),
            ));
        }
        if initial.len() != ns * n_observations {
            return Err(Error::DimensionMismatch {
                what: "initial law over S×Y",
                expected: ns * n_observations,
                got: initial.len(),
            });
        }
        if kernels.len() + 1 != horizon {
            return Err(Error::DimensionMismatch {
                what: "pomdp kernels (need T-1)",
                expected: horizon - 1,
                got: kernels.len(),
            });
        }
        for (t, k) in kernels.iter().enumerate() {
            if k.n_states() != ns
                || k.n_actions() != n_actions
                || k.target_len() != ns * n_observations
            {
                return Err(Error::InvalidModel(format!(
                    "kernel at t={t} has wrong shape for |S|={ns}, |Y|={n_observations}, |A|={n_actions}"
                )));
            }
        }
        for table in &costs {
            if table.len() != ns || table.iter().any(|r| r.len() != n_actions) {
                return Err(Error::InvalidModel("cost table shape mismatch".into()));
            }
            if table.iter().flatten().any(|c| !c.is_finite()) {
                return Err(Error::InvalidModel(
                    "costs must be uniformly bounded reals".into(),
                ));
            }
        }
        Ok(Self {
            space,
            n_observations,
            n_actions,
            initial,
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

    pub fn n_observations(&self) -> usize {
        self.n_observations
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

    #[cfg(test)]
    pub(crate) fn costs_mut(&mut self) -> &mut Vec<Vec<Vec<f64>>> {
        &mut self.costs
    }

    pub fn kernel(&self, t: usize) -> &Kernel {
        &self.kernels[t]
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn initial(&self) -> &Dist {
        &self.initial
    }

    #[inline]
    pub fn joint_index(&self, s: usize, y: usize) -> usize {
        s * self.n_observations + y
    }

    /// `ξ_S(s)`: marginal initial state mass.
    pub fn initial_state_mass(&self, s: usize) -> f64 {
        (0..self.n_observations)
            .map(|y| self.initial.mass(self.joint_index(s, y)))
            .sum()
    }

    /// `ξ_Y(y)`: marginal initial observation mass.
    pub fn initial_obs_mass(&self, y: usize) -> f64 {
        (0..self.n_states())
            .map(|s| self.initial.mass(self.joint_index(s, y)))
            .sum()
    }

    /// `P_{S,t}(s'|s,a)`: state marginal of the joint kernel.
    pub fn state_transition_mass(&self, t: usize, s: usize, a: usize, s2: usize) -> f64 {
        let row = self.kernels[t].row(s, a);
        (0..self.n_observations)
            .map(|y| row.mass(self.joint_index(s2, y)))
            .sum()
    }

    /// The fully-observed companion MDP `M = ⟨S, A, {P_{S,t}}, {c_t}, T⟩`.
    pub fn induced_mdp(&self) -> Result<Mdp> {
        let ns = self.n_states();
        let kernels = (0..self.kernels.len())
            .map(|t| {
                let rows = (0..ns)
                    .map(|s| {
                        (0..self.n_actions)
                            .map(|a| {
                                let mass = (0..ns)
                                    .map(|s2| self.state_transition_mass(t, s, a, s2))
                                    .collect();
                                Dist::with_tolerance(mass, 1e-9)
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Kernel::new(rows)
            })
            .collect::<Result<Vec<_>>>()?;
        Mdp::new(
            self.space.clone(),
            self.n_actions,
            kernels,
            self.costs.clone(),
        )
    }

    /// `E[c_t(S_t, a) | belief]`.
    pub fn expected_cost(&self, t: usize, belief: &Dist, a: usize) -> f64 {
        belief.expect(|s| self.costs[t][s][a])
    }

    /// One filtering step: given the posterior of `S_t`, an action and the
    /// next observation, return `(Pr(y'|h,a), posterior of S_{t+1})`, or
    /// `None` when the observation has zero probability.
    pub fn step_belief(
        &self,
        t: usize,
        belief: &Dist,
        action: usize,
        obs: usize,
    ) -> Option<(f64, Dist)> {
        let ns = self.n_states();
        let mut joint = vec![0.0f64; ns];
        for (s, &b) in belief.masses().iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            let row = self.kernels[t].row(s, action);
            for (s2, j) in joint.iter_mut().enumerate() {
                *j += b * row.mass(self.joint_index(s2, obs));
            }
        }
        let z: f64 = joint.iter().sum();
        if z <= 0.0 {
            return None;
        }
        for j in joint.iter_mut() {
            *j /= z;
        }
        Some((z, Dist::unchecked(joint)))
    }

    /// Root posterior `ξ(·|y_1)`, or `None` when `y_1` has zero probability.
    pub fn root_belief(&self, obs: usize) -> Option<(f64, Dist)> {
        let ns = self.n_states();
        let mut mass: Vec<f64> = (0..ns)
            .map(|s| self.initial.mass(self.joint_index(s, obs)))
            .collect();
        let z: f64 = mass.iter().sum();
        if z <= 0.0 {
            return None;
        }
        for m in mass.iter_mut() {
            *m /= z;
        }
        Some((z, Dist::unchecked(mass)))
    }
}

/// An observation/action history `h_t = (y_{1:t}, a_{1:t−1})`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct History {
    pub observations: Vec<usize>,
    pub actions: Vec<usize>,
}

impl History {
    pub fn new(observations: Vec<usize>, actions: Vec<usize>) -> Result<Self> {
        if observations.is_empty() || observations.len() != actions.len() + 1 {
            return Err(Error::InvalidHistory(format!(
                "{} observations with {} actions (need |y| = |a| + 1 ≥ 1)",
                observations.len(),
                actions.len()
            )));
        }
        Ok(Self {
            observations,
            actions,
        })
    }

    /// 0-based time of the history (number of observations minus one).
    pub fn t(&self) -> usize {
        self.observations.len() - 1
    }
}

impl std::fmt::Display for History {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "y{}", self.observations[0])?;
        for (a, y) in self.actions.iter().zip(self.observations.iter().skip(1)) {
            write!(f, " a{a} y{y}")?;
        }
        Ok(())
    }
}

/// Exact posterior of `S_t` given a positive-probability history.
pub fn filter(p: &Pomdp, h: &History) -> Result<Dist> {
    if h.t() >= p.horizon() {
        return Err(Error::InvalidHistory(format!(
            "history length {} exceeds horizon {}",
            h.t() + 1,
            p.horizon()
        )));
    }
    if h.observations.iter().any(|&y| y >= p.n_observations())
        || h.actions.iter().any(|&a| a >= p.n_actions())
    {
        return Err(Error::InvalidHistory("index out of range".into()));
    }
    let (_, mut belief) = p
        .root_belief(h.observations[0])
        .ok_or_else(|| Error::UnreachableHistory(h.to_string()))?;
    for (t, (&a, &y)) in h
        .actions
        .iter()
        .zip(h.observations.iter().skip(1))
        .enumerate()
    {
        let (_, next) = p
            .step_belief(t, &belief, a, y)
            .ok_or_else(|| Error::UnreachableHistory(h.to_string()))?;
        belief = next;
    }
    Ok(belief)
}

/// Where a tree node came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// A first observation `y_1`.
    Root { obs: usize },
    /// Reached from `parent` by taking `action` and observing `obs`.
    Child {
        parent: usize,
        action: usize,
        obs: usize,
    },
}

/// One node of the enumerated history tree.
#[derive(Debug, Clone)]
pub struct TreeNode {
    pub origin: Origin,
    /// 0-based time; the node's history has `t + 1` observations.
    pub t: usize,
    /// Posterior of `S_t` given the node's history.
    pub belief: Dist,
    /// Probability of the observation sequence given the action prefix.
    pub reach: f64,
    /// `obs_probs[a][y'] = Pr(y'|h,a)`; empty at the final level.
    pub obs_probs: Vec<Vec<f64>>,
    /// `children[a][y']`: child node id or [`NO_CHILD`]; empty at the final level.
    pub children: Vec<Vec<usize>>,
}

/// The materialized tree of positive-probability histories, levels `0..T`.
#[derive(Debug, Clone)]
pub struct HistoryTree {
    horizon: usize,
    nodes: Vec<TreeNode>,
    levels: Vec<Vec<usize>>,
}

impl HistoryTree {
    /// Enumerate every positive-probability history of `p` breadth first.
    ///
    /// Fails with a sizing error when more than `budget` nodes are required;
    /// the error reports the actual requirement (counted up to `4 × budget`).
    pub fn build(p: &Pomdp, budget: usize) -> Result<Self> {
        let mut nodes: Vec<TreeNode> = Vec::new();
        let mut levels: Vec<Vec<usize>> = vec![Vec::new(); p.horizon()];

        for y in 0..p.n_observations() {
            if let Some((z, belief)) = p.root_belief(y) {
                if nodes.len() == budget {
                    return Err(budget_error(p, budget));
                }
                levels[0].push(nodes.len());
                nodes.push(TreeNode {
                    origin: Origin::Root { obs: y },
                    t: 0,
                    belief,
                    reach: z,
                    obs_probs: Vec::new(),
                    children: Vec::new(),
                });
            }
        }

        for t in 0..p.horizon().saturating_sub(1) {
            let level: Vec<usize> = levels[t].clone();
            for id in level {
                let belief = nodes[id].belief.clone();
                let reach = nodes[id].reach;
                let mut obs_probs = Vec::with_capacity(p.n_actions());
                let mut children = Vec::with_capacity(p.n_actions());
                for a in 0..p.n_actions() {
                    let mut probs = vec![0.0f64; p.n_observations()];
                    let mut kids = vec![NO_CHILD; p.n_observations()];
                    for y in 0..p.n_observations() {
                        if let Some((z, child_belief)) = p.step_belief(t, &belief, a, y) {
                            probs[y] = z;
                            if nodes.len() == budget {
                                return Err(budget_error(p, budget));
                            }
                            kids[y] = nodes.len();
                            levels[t + 1].push(nodes.len());
                            nodes.push(TreeNode {
                                origin: Origin::Child {
                                    parent: id,
                                    action: a,
                                    obs: y,
                                },
                                t: t + 1,
                                belief: child_belief,
                                reach: reach * z,
                                obs_probs: Vec::new(),
                                children: Vec::new(),
                            });
                        }
                    }
                    obs_probs.push(probs);
                    children.push(kids);
                }
                nodes[id].obs_probs = obs_probs;
                nodes[id].children = children;
            }
        }

        Ok(Self {
            horizon: p.horizon(),
            nodes,
            levels,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Node ids at 0-based time `t`.
    pub fn level(&self, t: usize) -> &[usize] {
        &self.levels[t]
    }

    /// Reconstruct the history of a node from its parent links.
    pub fn history(&self, id: usize) -> History {
        let mut obs = Vec::new();
        let mut acts = Vec::new();
        let mut cur = id;
        loop {
            match self.nodes[cur].origin {
                Origin::Child {
                    parent,
                    action,
                    obs: y,
                } => {
                    obs.push(y);
                    acts.push(action);
                    cur = parent;
                }
                Origin::Root { obs: y } => {
                    obs.push(y);
                    break;
                }
            }
        }
        obs.reverse();
        acts.reverse();
        History {
            observations: obs,
            actions: acts,
        }
    }
}

fn budget_error(p: &Pomdp, budget: usize) -> Error {
    let cap = budget.saturating_mul(4);
    let (required, truncated) = count_required_nodes(p, cap);
    Error::BudgetExceeded {
        budget,
        required,
        truncated,
    }
}

/// Count positive-probability histories without materializing the tree,
/// keeping only frontier beliefs. Stops at `cap`.
fn count_required_nodes(p: &Pomdp, cap: usize) -> (usize, bool) {
    let mut frontier: Vec<Dist> = Vec::new();
    let mut count = 0usize;
    for y in 0..p.n_observations() {
        if let Some((_, belief)) = p.root_belief(y) {
            count += 1;
            frontier.push(belief);
        }
    }
    for t in 0..p.horizon().saturating_sub(1) {
        let mut next = Vec::new();
        for belief in &frontier {
            for a in 0..p.n_actions() {
                for y in 0..p.n_observations() {
                    if let Some((_, child)) = p.step_belief(t, belief, a, y) {
                        count += 1;
                        if count >= cap {
                            return (count, true);
                        }
                        next.push(child);
                    }
                }
            }
        }
        frontier = next;
    }
    (count, false)
}

/// A deterministic history-dependent policy, evaluated node by node on a tree.
pub trait HistoryPolicy {
    fn action(&self, tree: &HistoryTree, node: usize) -> Result<usize>;
}

/// Policy given as an explicit action table over the tree's node ids.
#[derive(Debug, Clone)]
pub struct TablePolicy(pub Vec<usize>);

impl HistoryPolicy for TablePolicy {
    fn action(&self, tree: &HistoryTree, node: usize) -> Result<usize> {
        self.0
            .get(node)
            .copied()
            .ok_or_else(|| Error::PolicyUndefined(tree.history(node).to_string()))
    }
}

/// Exact optimal values `W_t(h)` on the tree, with a minimizing policy
/// (lowest action index on ties).
pub struct TreeSolution {
    pub values: Vec<f64>,
    pub policy: TablePolicy,
}

pub fn optimal_value(p: &Pomdp, tree: &HistoryTree) -> TreeSolution {
    let mut values = vec![0.0f64; tree.len()];
    let mut actions = vec![0usize; tree.len()];
    for t in (0..p.horizon()).rev() {
        for &id in tree.level(t) {
            let node = tree.node(id);
            let mut best_v = f64::INFINITY;
            let mut best_a = 0usize;
            for a in 0..p.n_actions() {
                let q = node_q(p, node, a, &values);
                if q < best_v {
                    best_v = q;
                    best_a = a;
                }
            }
            values[id] = best_v;
            actions[id] = best_a;
        }
    }
    TreeSolution {
        values,
        policy: TablePolicy(actions),
    }
}

/// Exact value of an arbitrary history policy on every tree node.
pub fn evaluate_history_policy(
    p: &Pomdp,
    tree: &HistoryTree,
    policy: &dyn HistoryPolicy,
) -> Result<Vec<f64>> {
    let mut values = vec![0.0f64; tree.len()];
    for t in (0..p.horizon()).rev() {
        for &id in tree.level(t) {
            let node = tree.node(id);
            let a = policy.action(tree, id)?;
            if a >= p.n_actions() {
                return Err(Error::PolicyUndefined(tree.history(id).to_string()));
            }
            values[id] = node_q(p, node, a, &values);
        }
    }
    Ok(values)
}

#[inline]
fn node_q(p: &Pomdp, node: &TreeNode, a: usize, values: &[f64]) -> f64 {
    let mut q = p.expected_cost(node.t, &node.belief, a);
    if !node.children.is_empty() {
        for (y, &child) in node.children[a].iter().enumerate() {
            if child != NO_CHILD {
                q += node.obs_probs[a][y] * values[child];
            }
        }
    }
    q
}

/// All positive-probability histories at 0-based time `t`, each with its
/// reach probability (given its own action prefix) and filter belief.
pub fn reachable_histories(tree: &HistoryTree, t: usize) -> Vec<(History, f64, Dist)> {
    tree.level(t)
        .iter()
        .map(|&id| {
            let n = tree.node(id);
            (tree.history(id), n.reach, n.belief.clone())
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::VALUE_TOL;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random dense POMDP used across the test suites.
    pub(crate) fn random_pomdp(
        rng: &mut ChaCha8Rng,
        ns: usize,
        ny: usize,
        na: usize,
        horizon: usize,
    ) -> Pomdp {
        let space = MetricSpace::line(ns, 1.0);
        let initial =
            Dist::normalized((0..ns * ny).map(|_| rng.gen_range(0.05..1.0)).collect()).unwrap();
        let kernels = (0..horizon - 1)
            .map(|_| {
                Kernel::new(
                    (0..ns)
                        .map(|_| {
                            (0..na)
                                .map(|_| {
                                    Dist::normalized(
                                        (0..ns * ny).map(|_| rng.gen_range(0.05..1.0)).collect(),
                                    )
                                    .unwrap()
                                })
                                .collect()
                        })
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        let costs = (0..horizon)
            .map(|_| {
                (0..ns)
                    .map(|_| (0..na).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect();
        Pomdp::new(space, ny, na, initial, kernels, costs).unwrap()
    }

    /// Fully-observed POMDP over a given MDP: `Y = S`, `Y_t = S_t` exactly.
    pub(crate) fn fully_observed(m: &Mdp) -> Pomdp {
        let ns = m.n_states();
        let initial_state = Dist::uniform(ns);
        fully_observed_with_initial(m, &initial_state)
    }

    pub(crate) fn fully_observed_with_initial(m: &Mdp, initial_state: &Dist) -> Pomdp {
        let ns = m.n_states();
        let mut xi = vec![0.0; ns * ns];
        for s in 0..ns {
            xi[s * ns + s] = initial_state.mass(s);
        }
        let kernels = (0..m.horizon() - 1)
            .map(|t| {
                Kernel::new(
                    (0..ns)
                        .map(|s| {
                            (0..m.n_actions())
                                .map(|a| {
                                    let mut joint = vec![0.0; ns * ns];
                                    for s2 in 0..ns {
                                        joint[s2 * ns + s2] = m.transition(t, s, a).mass(s2);
                                    }
                                    Dist::unchecked(joint)
                                })
                                .collect()
                        })
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        Pomdp::new(
            m.space().clone(),
            ns,
            m.n_actions(),
            Dist::new(xi).unwrap(),
            kernels,
            m.costs().to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn root_belief_is_bayes_on_initial_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = random_pomdp(&mut rng, 3, 2, 2, 2);
        let h = History::new(vec![1], vec![]).unwrap();
        let b = filter(&p, &h).unwrap();
        for s in 0..3 {
            let expect = p.initial.mass(p.joint_index(s, 1)) / p.initial_obs_mass(1);
            assert!((b.mass(s) - expect).abs() <= VALUE_TOL);
        }
    }

    #[test]
    fn perfect_observation_gives_point_mass_beliefs() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let m = crate::mdp::tests::random_mdp(&mut rng, 3, 2, 3);
        let p = fully_observed(&m);
        let tree = HistoryTree::build(&p, 10_000).unwrap();
        for id in 0..tree.len() {
            let h = tree.history(id);
            let last = *h.observations.last().unwrap();
            assert_eq!(tree.node(id).belief.mass(last), 1.0);
        }
    }

    // 2-state/2-observation instance: posterior after a fixed h_2 matches a
    // hand-unrolled Bayes computation over the joint law of (S1,Y1,S2,Y2).
    #[test]
    fn filter_matches_hand_unrolled_bayes() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let p = random_pomdp(&mut rng, 2, 2, 2, 2);
        let (a, y1, y2) = (1usize, 0usize, 1usize);

        // Joint enumeration: Pr(s1, y1, s2, y2 | a) = xi(s1,y1) P(s2,y2|s1,a).
        let mut post = [0.0f64; 2];
        let mut z = 0.0;
        for s1 in 0..2 {
            let prior = p.initial.mass(p.joint_index(s1, y1));
            for s2 in 0..2 {
                let w = prior * p.kernel(0).row(s1, a).mass(p.joint_index(s2, y2));
                post[s2] += w;
                z += w;
            }
        }
        let h = History::new(vec![y1, y2], vec![a]).unwrap();
        let b = filter(&p, &h).unwrap();
        for s in 0..2 {
            assert!((b.mass(s) - post[s] / z).abs() <= VALUE_TOL);
        }
    }

    #[test]
    fn unreachable_history_is_an_explicit_error() {
        let space = MetricSpace::line(2, 1.0);
        // y=1 impossible at t=0.
        let xi = Dist::new(vec![0.5, 0.0, 0.5, 0.0]).unwrap();
        let kernels = vec![Kernel::new(vec![
            vec![Dist::new(vec![0.25; 4]).unwrap()],
            vec![Dist::new(vec![0.25; 4]).unwrap()],
        ])
        .unwrap()];
        let costs = vec![vec![vec![0.0]; 2]; 2];
        let p = Pomdp::new(space, 2, 1, xi, kernels, costs).unwrap();
        let h = History::new(vec![1], vec![]).unwrap();
        assert!(matches!(filter(&p, &h), Err(Error::UnreachableHistory(_))));
        // And the tree simply omits it.
        let tree = HistoryTree::build(&p, 100).unwrap();
        assert_eq!(tree.level(0).len(), 1);
    }

    #[test]
    fn fully_observed_tree_matches_mdp_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let m = crate::mdp::tests::random_mdp(&mut rng, 3, 2, 3);
        let p = fully_observed(&m);
        let tree = HistoryTree::build(&p, 10_000).unwrap();
        let sol = optimal_value(&p, &tree);
        let msol = m.solve();
        for &id in tree.level(0) {
            let s = match tree.node(id).origin {
                Origin::Root { obs } => obs,
                _ => unreachable!(),
            };
            assert!((sol.values[id] - msol.values[0][s]).abs() <= VALUE_TOL);
        }
    }

    #[test]
    fn uninformative_observations_match_open_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        // |Y| = 1: histories carry no information.
        let p = random_pomdp(&mut rng, 3, 1, 2, 3);
        let tree = HistoryTree::build(&p, 10_000).unwrap();
        let sol = optimal_value(&p, &tree);
        let open = crate::oracles::open_loop_optimal(&p);
        assert_eq!(tree.level(0).len(), 1);
        assert!((sol.values[tree.level(0)[0]] - open).abs() <= VALUE_TOL);

        // Y-singleton at t=1 has exactly |A| histories.
        assert_eq!(tree.level(1).len(), p.n_actions());

        // A constant-action policy matches the open-loop value of its sequence.
        for a in 0..p.n_actions() {
            struct Constant(usize);
            impl HistoryPolicy for Constant {
                fn action(&self, _: &HistoryTree, _: usize) -> Result<usize> {
                    Ok(self.0)
                }
            }
            let vals = evaluate_history_policy(&p, &tree, &Constant(a)).unwrap();
            let seq = vec![a; p.horizon()];
            let direct = crate::oracles::open_loop_value(&p, &seq);
            assert!((vals[tree.level(0)[0]] - direct).abs() <= VALUE_TOL);
        }
    }

    #[test]
    fn optimal_policy_evaluation_reproduces_w() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let p = random_pomdp(&mut rng, 3, 3, 2, 3);
        let tree = HistoryTree::build(&p, 100_000).unwrap();
        let sol = optimal_value(&p, &tree);
        let vals = evaluate_history_policy(&p, &tree, &sol.policy).unwrap();
        for id in 0..tree.len() {
            assert_eq!(vals[id], sol.values[id]);
        }
    }

    #[test]
    fn any_policy_dominates_w_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let p = random_pomdp(&mut rng, 3, 2, 2, 3);
        let tree = HistoryTree::build(&p, 100_000).unwrap();
        let sol = optimal_value(&p, &tree);
        for trial in 0..5 {
            let table: Vec<usize> = (0..tree.len())
                .map(|i| (i + trial) % p.n_actions())
                .collect();
            let vals = evaluate_history_policy(&p, &tree, &TablePolicy(table)).unwrap();
            for id in 0..tree.len() {
                assert!(vals[id] >= sol.values[id] - VALUE_TOL);
            }
        }
    }

    #[test]
    fn zero_cost_instance_has_zero_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let mut p = random_pomdp(&mut rng, 2, 2, 2, 3);
        p.costs
            .iter_mut()
            .flatten()
            .flatten()
            .for_each(|c| *c = 0.0);
        let tree = HistoryTree::build(&p, 10_000).unwrap();
        let sol = optimal_value(&p, &tree);
        assert!(sol.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn observation_probabilities_sum_to_one_at_every_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let p = random_pomdp(&mut rng, 4, 3, 2, 3);
        let tree = HistoryTree::build(&p, 100_000).unwrap();
        for node in tree.nodes() {
            for probs in &node.obs_probs {
                let sum: f64 = probs.iter().sum();
                assert!((sum - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn budget_error_reports_requirement() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let p = random_pomdp(&mut rng, 2, 2, 2, 3);
        let full = HistoryTree::build(&p, 10_000).unwrap();
        // Budget large enough for counting (cap = 4x) to finish exactly.
        match HistoryTree::build(&p, full.len() - 1) {
            Err(Error::BudgetExceeded {
                budget,
                required,
                truncated,
            }) => {
                assert_eq!(budget, full.len() - 1);
                assert_eq!(required, full.len());
                assert!(!truncated);
            }
            other => panic!("expected sizing error, got {other:?}"),
        }
        // Far too small: the counted requirement is a truncated lower bound.
        match HistoryTree::build(&p, 3) {
            Err(Error::BudgetExceeded {
                required,
                truncated,
                ..
            }) => {
                assert!(truncated);
                assert!(required >= 12);
            }
            other => panic!("expected sizing error, got {other:?}"),
        }
    }

    #[test]
    fn tree_beliefs_agree_with_direct_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let p = random_pomdp(&mut rng, 3, 2, 2, 3);
        let tree = HistoryTree::build(&p, 100_000).unwrap();
        for &id in tree.level(2) {
            let h = tree.history(id);
            let b = filter(&p, &h).unwrap();
            for s in 0..3 {
                assert!((b.mass(s) - tree.node(id).belief.mass(s)).abs() <= 1e-12);
            }
        }
    }

    // 2x2x2 instance: reachable histories at t=1 match a hand enumeration of
    // positive-probability (y1, a1, y2) triples.
    #[test]
    fn reachable_histories_match_joint_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let p = random_pomdp(&mut rng, 2, 2, 2, 2);
        let tree = HistoryTree::build(&p, 10_000).unwrap();
        let listed = reachable_histories(&tree, 1);
        let mut expected = Vec::new();
        for y1 in 0..2 {
            let py1 = p.initial_obs_mass(y1);
            if py1 <= 0.0 {
                continue;
            }
            for a in 0..2 {
                for y2 in 0..2 {
                    // Pr(y2 | y1, a) via the joint law.
                    let mut z = 0.0;
                    for s1 in 0..2 {
                        let prior = p.initial.mass(p.joint_index(s1, y1)) / py1;
                        for s2 in 0..2 {
                            z += prior * p.kernel(0).row(s1, a).mass(p.joint_index(s2, y2));
                        }
                    }
                    if z > 0.0 {
                        expected.push((vec![y1, y2], vec![a], py1 * z));
                    }
                }
            }
        }
        assert_eq!(listed.len(), expected.len());
        for (h, reach, _) in &listed {
            let hit = expected
                .iter()
                .find(|(obs, acts, _)| obs == &h.observations && acts == &h.actions);
            let (_, _, want_reach) = hit.expect("history missing from enumeration");
            assert!((reach - want_reach).abs() <= 1e-12);
        }
    }
}
