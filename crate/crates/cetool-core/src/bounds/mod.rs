//! The quantitative engine: moduli fitting, the worst-case estimation error
//! η, certainty-equivalent policy synthesis, assembly of the sub-optimality
//! bound 2α, and the residual checks behind it.
//!
//! The pipeline verified by [`verify_bound`] is:
//!
//! 1. `M` = fully-observed companion of the POMDP; `M̃` = abstract MDP;
//! 2. fit concave non-decreasing moduli `F^c_t, F^P_t` from `M`'s cost tables
//!    and pushforward kernels, measured in the abstract metric;
//! 3. measure `η_t = max_h E[ d_S̃(φ(S_t), ĝ_t(h_t)) | h_t ]` over the
//!    enumerated positive-probability histories;
//! 4. assemble `ε_t = F^c_t(η_t)`, `δ_t = F^P_t(η_t) + η_{t+1}` and
//!    `α_t = ε_t + Σ_{τ=t}^{T−1} [δ_τ Lip(Ṽ_{τ+1}) + ε_{τ+1}]`;
//! 5. evaluate the certainty-equivalent policy `μ_t(h) = π̃_t(ĝ_t(h))` and the
//!    exact optimum on the history tree, and require
//!    `W^{P,μ}_t(h) − W^P_t(h) ≤ 2α_t` at every reachable history.
//!
//! A violation in step 5 (or in the residual ceilings of [`sufficiency_residuals`])
//! is a hard error: this crate exists to falsify or confirm the bound, so
//! nothing is downgraded to a warning.

pub mod modulus;

pub use modulus::{Modulus, DIST_ZERO_TOL};

use crate::abstraction::Abstraction;
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::mdp::{lipschitz_of, MarkovPolicy, Mdp};
use crate::pomdp::{
    evaluate_history_policy, optimal_value, HistoryPolicy, HistoryTree, Pomdp, NO_CHILD,
};
use crate::report::{BoundReport, BoundRow, ETA_NOTE};
use crate::spaces::Dist;
use crate::transport::w1;
use crate::VALUE_TOL;
use serde::{Deserialize, Serialize};

/// Shape of the fitted moduli.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuliKind {
    /// Affine `F(x) = F(0) + L·x` from worst-case ratios.
    Linear,
    /// Least concave non-decreasing majorant of the gap scatter.
    Envelope,
}

impl std::fmt::Display for ModuliKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModuliKind::Linear => write!(f, "linear"),
            ModuliKind::Envelope => write!(f, "envelope"),
        }
    }
}

/// How `Lip(Ṽ_t)` enters the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipMode {
    /// Exact pairwise Lipschitz constant of the solved value function.
    #[default]
    Exact,
    /// The unrolled recursion `Lip(V_t) ≤ L^c_t + L^P_t·Lip(V_{t+1})` from
    /// the abstract MDP's own fitted linear constants.
    Recursive,
}

/// Fitted moduli per stage: `fc[t]` for `t ∈ 0..T`, `fp[t]` for `t ∈ 0..T−1`.
#[derive(Debug, Clone)]
pub struct ModuliSet {
    pub fc: Vec<Modulus>,
    pub fp: Vec<Modulus>,
}

/// Fit the moduli of an MDP through an abstraction.
///
/// For every stage the cost scatter `{(d_S̃(φ(s), φ(s')), |c_t(s,a) − c_t(s',a)|)}`
/// and the kernel scatter (gaps measured as W1 between pushforward rows in the
/// abstract metric) are collected over all state pairs and actions. Pairs at
/// abstract distance zero contribute the constant offset `F(0)` — the
/// within-fiber spread — which is exactly zero for identity abstractions.
///
/// The returned moduli are verified post hoc to majorize every observed pair;
/// a failure is an internal invariant violation, not a recoverable condition.
pub fn fit_moduli(m: &Mdp, ab: &Abstraction, kind: ModuliKind) -> Result<ModuliSet> {
    if m.n_states() != ab.n_source() {
        return Err(Error::DimensionMismatch {
            what: "fit_moduli source space",
            expected: ab.n_source(),
            got: m.n_states(),
        });
    }
    let n = m.n_states();
    let horizon = m.horizon();
    let target = ab.target();

    let mut fc = Vec::with_capacity(horizon);
    let mut fp = Vec::with_capacity(horizon.saturating_sub(1));

    for t in 0..horizon {
        let mut pts = vec![(0.0, 0.0)];
        for s in 0..n {
            for s2 in (s + 1)..n {
                let d = ab.abstract_dist(s, s2);
                for a in 0..m.n_actions() {
                    pts.push((d, (m.cost(t, s, a) - m.cost(t, s2, a)).abs()));
                }
            }
        }
        fc.push(fit_one(&pts, kind)?);
    }

    for t in 0..horizon.saturating_sub(1) {
        // Pushforward rows, computed once per (s, a).
        let push: Vec<Vec<Dist>> = (0..n)
            .map(|s| {
                (0..m.n_actions())
                    .map(|a| ab.pushforward(m, t, s, a))
                    .collect()
            })
            .collect();
        let mut pts = vec![(0.0, 0.0)];
        for s in 0..n {
            for s2 in (s + 1)..n {
                let d = ab.abstract_dist(s, s2);
                for a in 0..m.n_actions() {
                    pts.push((d, w1(&push[s][a], &push[s2][a], target)?));
                }
            }
        }
        let modulus = fit_one(&pts, kind)?;
        for &(d, gap) in &pts {
            if gap > modulus.eval(d) + VALUE_TOL {
                return Err(Error::InvariantViolation(format!(
                    "fitted dynamics modulus at t={t} misses a pair: gap {gap} at distance {d}"
                )));
            }
        }
        fp.push(modulus);
    }

    // Post-hoc verification of the cost moduli (the dynamics side is checked
    // above while the scatter is still in scope).
    for t in 0..horizon {
        for s in 0..n {
            for s2 in (s + 1)..n {
                let d = ab.abstract_dist(s, s2);
                for a in 0..m.n_actions() {
                    let gap = (m.cost(t, s, a) - m.cost(t, s2, a)).abs();
                    if gap > fc[t].eval(d) + VALUE_TOL {
                        return Err(Error::InvariantViolation(format!(
                            "fitted cost modulus at t={t} misses a pair: gap {gap} at distance {d}"
                        )));
                    }
                }
            }
        }
    }

    Ok(ModuliSet { fc, fp })
}

fn fit_one(points: &[(f64, f64)], kind: ModuliKind) -> Result<Modulus> {
    match kind {
        ModuliKind::Linear => {
            let mut offset = 0.0f64;
            let mut slope = 0.0f64;
            for &(d, gap) in points {
                if d <= DIST_ZERO_TOL {
                    offset = offset.max(gap);
                } else {
                    slope = slope.max(gap / d);
                }
            }
            Ok(Modulus::affine(offset, slope))
        }
        ModuliKind::Envelope => Modulus::concave_envelope(points),
    }
}

/// Fitted linear Lipschitz constants of an MDP in its own metric (identity
/// abstraction): `(L^c_t for t ∈ 0..T, L^P_t for t ∈ 0..T−1)`.
pub fn linear_constants(m: &Mdp) -> Result<(Vec<f64>, Vec<f64>)> {
    let ab = Abstraction::identity(m.space());
    let set = fit_moduli(m, &ab, ModuliKind::Linear)?;
    Ok((
        set.fc.iter().map(|f| f.final_slope()).collect(),
        set.fp.iter().map(|f| f.final_slope()).collect(),
    ))
}

/// Unrolled Lipschitz recursion: `ub[T−1] = L^c_{T−1}`,
/// `ub[t] = L^c_t + L^P_t·ub[t+1]`, where `L^P_t` bounds the kernel that
/// appears in `V_t`'s own Bellman update (the kernel from `t` to `t+1`).
pub fn lipschitz_recursive_bound(lc: &[f64], lp: &[f64]) -> Vec<f64> {
    let horizon = lc.len();
    let mut ub = vec![0.0f64; horizon + 1];
    for t in (0..horizon).rev() {
        ub[t] = lc[t] + if t < lp.len() { lp[t] * ub[t + 1] } else { 0.0 };
    }
    ub
}

/// Worst violation of the Lipschitz recursion on an MDP with fitted linear
/// constants: `max_t [ Lip(V_t) − (L^c_t + L^P_t·Lip(V_{t+1})) ]`.
/// Non-positive (up to round-off) always.
pub fn lipschitz_recursion_violation(m: &Mdp) -> Result<f64> {
    let (lc, lp) = linear_constants(m)?;
    let sol = m.solve();
    let lips: Vec<f64> = (0..=m.horizon())
        .map(|t| lipschitz_of(&sol.values[t], m.space()))
        .collect();
    let mut worst = f64::NEG_INFINITY;
    for t in 0..m.horizon() {
        let rhs = lc[t]
            + if t < lp.len() {
                lp[t] * lips[t + 1]
            } else {
                0.0
            };
        worst = worst.max(lips[t] - rhs);
    }
    Ok(worst)
}

/// Abstract-state estimates for every tree node.
pub fn node_estimates(tree: &HistoryTree, ab: &Abstraction, g: &Estimator) -> Result<Vec<usize>> {
    (0..tree.len())
        .map(|id| {
            let node = tree.node(id);
            g.estimate(&tree.history(id), &node.belief, ab)
        })
        .collect()
}

/// Worst-case conditional expected estimation error per stage:
///
/// ```text
///     η_t = max_{h_t reachable} Σ_s b_{t|t}(s|h_t) · d_S̃(φ(s), ĝ_t(h_t)).
/// ```
///
/// The max runs over positive-probability histories only (see module docs of
/// [`crate::pomdp`] for why the zero-probability ones are excluded).
pub fn compute_eta(
    p: &Pomdp,
    tree: &HistoryTree,
    ab: &Abstraction,
    g: &Estimator,
) -> Result<Vec<f64>> {
    let estimates = node_estimates(tree, ab, g)?;
    Ok(eta_from_estimates(p, tree, ab, &estimates))
}

fn eta_from_estimates(
    p: &Pomdp,
    tree: &HistoryTree,
    ab: &Abstraction,
    estimates: &[usize],
) -> Vec<f64> {
    let target = ab.target();
    (0..p.horizon())
        .map(|t| {
            tree.level(t)
                .iter()
                .map(|&id| {
                    let node = tree.node(id);
                    let z = estimates[id];
                    node.belief.expect(|s| target.dist(ab.phi(s), z))
                })
                .fold(0.0f64, f64::max)
        })
        .collect()
}

/// The certainty-equivalent policy `μ_t(h_t) = π̃_t(ĝ_t(h_t))`.
#[derive(Debug, Clone)]
pub struct CePolicy {
    pub abstract_policy: MarkovPolicy,
    pub estimator: Estimator,
    pub abstraction: Abstraction,
}

/// Compose an abstract Markov policy with an estimator.
pub fn ce_policy(
    abstract_policy: MarkovPolicy,
    estimator: Estimator,
    abstraction: Abstraction,
) -> CePolicy {
    CePolicy {
        abstract_policy,
        estimator,
        abstraction,
    }
}

impl CePolicy {
    /// Action at an arbitrary history (used by the trajectory simulator).
    pub fn act(&self, h: &crate::pomdp::History, belief: &Dist) -> Result<usize> {
        let z = self.estimator.estimate(h, belief, &self.abstraction)?;
        Ok(self.abstract_policy.action(h.t(), z))
    }
}

impl HistoryPolicy for CePolicy {
    fn action(&self, tree: &HistoryTree, node: usize) -> Result<usize> {
        let n = tree.node(node);
        let z = self
            .estimator
            .estimate(&tree.history(node), &n.belief, &self.abstraction)?;
        Ok(self.abstract_policy.action(n.t, z))
    }
}

/// The assembled bound terms: `eps[t]`, `delta[t]` (t < T−1… t ∈ 0..T−1),
/// `alpha[t]`, and `bound[t] = 2·alpha[t]`.
#[derive(Debug, Clone)]
pub struct BoundCore {
    pub eps: Vec<f64>,
    pub delta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub bound: Vec<f64>,
}

/// Assemble ε, δ, α and the bound 2α from η, the moduli, and the Lipschitz
/// constants of the abstract value functions (`lip_v[t] = Lip(Ṽ_t)`,
/// `t ∈ 0..=T`; only `t ∈ 1..T` is consumed).
///
/// `δ_t` needs `η_{t+1}` and is only defined for `t < T−1` (0-based): the sum
/// in α stops at the last transition, so no boundary value is invented.
pub fn assemble_bound(
    eta: &[f64],
    fc: &[Modulus],
    fp: &[Modulus],
    lip_v: &[f64],
) -> Result<BoundCore> {
    let horizon = eta.len();
    if fc.len() != horizon || fp.len() + 1 != horizon || lip_v.len() < horizon {
        return Err(Error::DimensionMismatch {
            what: "assemble_bound inputs",
            expected: horizon,
            got: fc.len().min(fp.len() + 1).min(lip_v.len()),
        });
    }
    if let Some(&bad) = eta.iter().find(|&&e| e.is_nan() || e < 0.0) {
        return Err(Error::InvariantViolation(format!(
            "eta must be non-negative, got {bad}"
        )));
    }
    let eps: Vec<f64> = (0..horizon).map(|t| fc[t].eval(eta[t])).collect();
    let delta: Vec<f64> = (0..horizon - 1)
        .map(|t| fp[t].eval(eta[t]) + eta[t + 1])
        .collect();
    let mut alpha = vec![0.0f64; horizon];
    alpha[horizon - 1] = eps[horizon - 1];
    for t in (0..horizon - 1).rev() {
        alpha[t] = eps[t] + delta[t] * lip_v[t + 1] + alpha[t + 1];
    }
    let bound = alpha.iter().map(|a| 2.0 * a).collect();
    Ok(BoundCore {
        eps,
        delta,
        alpha,
        bound,
    })
}

/// The coefficient `L^M_t` multiplying `2r` in the bounded-noise closed form:
///
/// ```text
///     L^M_t = L^c_t + Σ_{τ=t}^{T−2} [ (1 + L^P_τ)·Lip(V_{τ+1}) + L^c_{τ+1} ]
/// ```
///
/// (0-based indices; with η ≡ r and pure-linear moduli, `α_t = r·L^M_t`.)
pub fn linear_alpha_coefficient(lc: &[f64], lp: &[f64], lip_v: &[f64], t: usize) -> f64 {
    let horizon = lc.len();
    let mut coeff = lc[t];
    for tau in t..horizon.saturating_sub(1) {
        coeff += (1.0 + lp[tau]) * lip_v[tau + 1] + lc[tau + 1];
    }
    coeff
}

/// Options for the full verification pipeline.
#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub budget: usize,
    pub moduli: ModuliKind,
    pub lip_mode: LipMode,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            budget: crate::DEFAULT_BUDGET,
            moduli: ModuliKind::Linear,
            lip_mode: LipMode::Exact,
        }
    }
}

/// Everything the verification pipeline produces beyond the report: handy for
/// tests that need the intermediates.
pub struct VerifyOutcome {
    pub report: BoundReport,
    pub eta: Vec<f64>,
    pub moduli: ModuliSet,
    pub lip_v: Vec<f64>,
    pub core: BoundCore,
    /// Per-node optimality gap `W^{P,μ}(h) − W^P(h)`.
    pub node_gaps: Vec<f64>,
    pub tree: HistoryTree,
    pub abstract_policy: MarkovPolicy,
}

/// Run the full pipeline and require bound dominance at every reachable
/// history. A violation returns [`Error::BoundViolation`] naming the history —
/// the artifact's core falsification signal.
pub fn verify_bound(
    p: &Pomdp,
    ab: &Abstraction,
    g: &Estimator,
    opts: VerifyOptions,
) -> Result<VerifyOutcome> {
    let m = p.induced_mdp()?;
    let m_tilde = ab.build_abstract_mdp(&m)?;
    let tilde_sol = m_tilde.solve();
    let horizon = p.horizon();

    let lip_v: Vec<f64> = match opts.lip_mode {
        LipMode::Exact => (0..=horizon)
            .map(|t| lipschitz_of(&tilde_sol.values[t], ab.target()))
            .collect(),
        LipMode::Recursive => {
            let (lc, lp) = linear_constants(&m_tilde)?;
            lipschitz_recursive_bound(&lc, &lp)
        }
    };

    let tree = HistoryTree::build(p, opts.budget)?;
    let estimates = node_estimates(&tree, ab, g)?;
    let eta = eta_from_estimates(p, &tree, ab, &estimates);
    let moduli = fit_moduli(&m, ab, opts.moduli)?;
    let core = assemble_bound(&eta, &moduli.fc, &moduli.fp, &lip_v)?;

    let opt = optimal_value(p, &tree);
    let ce = ce_policy(tilde_sol.policy.clone(), g.clone(), ab.clone());
    let mu_vals = evaluate_history_policy(p, &tree, &ce)?;

    let mut node_gaps = vec![0.0f64; tree.len()];
    let mut max_gap = vec![f64::NEG_INFINITY; horizon];
    for t in 0..horizon {
        for &id in tree.level(t) {
            let gap = mu_vals[id] - opt.values[id];
            node_gaps[id] = gap;
            if gap > core.bound[t] + VALUE_TOL {
                return Err(Error::BoundViolation {
                    t: t + 1,
                    history: tree.history(id).to_string(),
                    gap,
                    bound: core.bound[t],
                });
            }
            if gap > max_gap[t] {
                max_gap[t] = gap;
            }
        }
    }

    let rows: Vec<BoundRow> = (0..horizon)
        .map(|t| BoundRow {
            t: t + 1,
            eta: eta[t],
            eps: core.eps[t],
            delta: if t + 1 < horizon {
                Some(core.delta[t])
            } else {
                None
            },
            lip_v: lip_v[t],
            alpha: core.alpha[t],
            bound: core.bound[t],
            gap: Some(max_gap[t]),
            slack: Some(core.bound[t] - max_gap[t]),
        })
        .collect();
    let worst_slack = rows
        .iter()
        .filter_map(|r| r.slack)
        .fold(f64::INFINITY, f64::min);
    let root_gaps = tree.level(0).iter().map(|&id| node_gaps[id]).collect();

    let report = BoundReport {
        instance_id: String::new(),
        family: String::new(),
        horizon,
        moduli: opts.moduli.to_string(),
        mode: "exact".into(),
        eta_note: ETA_NOTE.into(),
        rows,
        root_gaps,
        worst_slack: Some(worst_slack),
        dominance_ok: true,
        mc_value: None,
        mc_episodes: None,
        notes: Vec::new(),
    };

    Ok(VerifyOutcome {
        report,
        eta,
        moduli,
        lip_v,
        core,
        node_gaps,
        tree,
        abstract_policy: tilde_sol.policy,
    })
}

/// Gap of the pulled-back abstract optimal policy `π̄ = π^{M̃} ∘ φ` when used
/// in the original MDP.
pub struct PolicyGapOutcome {
    /// `V^{M,π̄}_t(s) − V^M_t(s)` per `t`, `s`.
    pub gaps: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub bound: Vec<f64>,
    pub max_gap: Vec<f64>,
}

/// Evaluate `π̄ = π^{M̃} ∘ φ` on `M` and check its gap against the bound with
/// `η ≡ 0` (so `ε_t = F^c_t(0)`, `δ_t = F^P_t(0)`).
pub fn abstract_policy_gap(m: &Mdp, ab: &Abstraction, kind: ModuliKind) -> Result<PolicyGapOutcome> {
    let m_tilde = ab.build_abstract_mdp(m)?;
    let tilde_sol = m_tilde.solve();
    let base_sol = m.solve();
    let pi_bar = tilde_sol
        .policy
        .compose_with_map(ab.phi_map(), m.n_states());
    let bar_vals = m.evaluate_policy(&pi_bar)?;

    let lip_v: Vec<f64> = (0..=m.horizon())
        .map(|t| lipschitz_of(&tilde_sol.values[t], ab.target()))
        .collect();
    let moduli = fit_moduli(m, ab, kind)?;
    let eta = vec![0.0; m.horizon()];
    let core = assemble_bound(&eta, &moduli.fc, &moduli.fp, &lip_v)?;

    let mut gaps = Vec::with_capacity(m.horizon());
    let mut max_gap = Vec::with_capacity(m.horizon());
    for t in 0..m.horizon() {
        let row: Vec<f64> = (0..m.n_states())
            .map(|s| bar_vals[t][s] - base_sol.values[t][s])
            .collect();
        let worst = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if worst > core.bound[t] + VALUE_TOL {
            let s = row.iter().position(|&g| g == worst).unwrap_or_default();
            return Err(Error::BoundViolation {
                t: t + 1,
                history: format!("state {s} (fully observed)"),
                gap: worst,
                bound: core.bound[t],
            });
        }
        gaps.push(row);
        max_gap.push(worst);
    }
    Ok(PolicyGapOutcome {
        gaps,
        alpha: core.alpha,
        bound: core.bound,
        max_gap,
    })
}

/// Per-stage maxima of the sufficiency residuals together with their ceilings.
pub struct SufficiencyResiduals {
    /// `max_{h_t, a} | E[c_t(S_t,a)|h_t] − c̃_t(ĝ_t(h_t), a) |` per stage.
    pub max_cost_residual: Vec<f64>,
    /// Ceiling `F^c_t(η_t)` per stage.
    pub cost_ceiling: Vec<f64>,
    /// `max_{h_t, a} W1( ψ̂_t(·|h_t,a), P̃_t(·|ĝ_t(h_t),a) )` for `t < T−1`.
    pub max_predict_residual: Vec<f64>,
    /// Ceiling `F^P_t(η_t) + η_{t+1}`.
    pub predict_ceiling: Vec<f64>,
}

/// Check the two approximate-information-state residuals on every reachable
/// `(h_t, a_t)`:
///
/// - sufficiency for cost: `|E[c_t(S_t,a)|h_t] − c̃_t(ĝ_t(h_t),a)| ≤ F^c_t(η_t)`;
/// - self-prediction: `W1(ψ̂_t(·|h_t,a), P̃_t(·|ĝ_t(h_t),a)) ≤ F^P_t(η_t) + η_{t+1}`,
///   where `ψ̂` is the one-step predicted law of the next estimate
///   `ĝ_{t+1}(H_{t+1})` given `(h_t, a_t)`.
///
/// Ceiling violations are hard errors naming the `(h_t, a_t)` pair.
pub fn sufficiency_residuals(
    p: &Pomdp,
    ab: &Abstraction,
    g: &Estimator,
    kind: ModuliKind,
    budget: usize,
) -> Result<SufficiencyResiduals> {
    let m = p.induced_mdp()?;
    let m_tilde = ab.build_abstract_mdp(&m)?;
    let tree = HistoryTree::build(p, budget)?;
    let estimates = node_estimates(&tree, ab, g)?;
    let eta = eta_from_estimates(p, &tree, ab, &estimates);
    let moduli = fit_moduli(&m, ab, kind)?;
    let target = ab.target();
    let horizon = p.horizon();

    let mut max_cost_residual = vec![0.0f64; horizon];
    let cost_ceiling: Vec<f64> = (0..horizon).map(|t| moduli.fc[t].eval(eta[t])).collect();
    let mut max_predict_residual = vec![0.0f64; horizon.saturating_sub(1)];
    let predict_ceiling: Vec<f64> = (0..horizon.saturating_sub(1))
        .map(|t| moduli.fp[t].eval(eta[t]) + eta[t + 1])
        .collect();

    for t in 0..horizon {
        for &id in tree.level(t) {
            let node = tree.node(id);
            let z = estimates[id];
            for a in 0..p.n_actions() {
                let residual = (p.expected_cost(t, &node.belief, a) - m_tilde.cost(t, z, a)).abs();
                if residual > cost_ceiling[t] + VALUE_TOL {
                    return Err(Error::InvariantViolation(format!(
                        "cost-sufficiency residual {residual:e} exceeds ceiling {:e} at t={}, history {}, action {a}",
                        cost_ceiling[t],
                        t + 1,
                        tree.history(id)
                    )));
                }
                max_cost_residual[t] = max_cost_residual[t].max(residual);

                if t + 1 < horizon {
                    // Predicted law of the next estimate.
                    let mut mass = vec![0.0f64; target.len()];
                    for (y, &child) in node.children[a].iter().enumerate() {
                        if child != NO_CHILD {
                            mass[estimates[child]] += node.obs_probs[a][y];
                        }
                    }
                    let psi_hat = Dist::unchecked(mass);
                    let residual = w1(&psi_hat, m_tilde.transition(t, z, a), target)?;
                    if residual > predict_ceiling[t] + VALUE_TOL {
                        return Err(Error::InvariantViolation(format!(
                            "self-prediction residual {residual:e} exceeds ceiling {:e} at t={}, history {}, action {a}",
                            predict_ceiling[t],
                            t + 1,
                            tree.history(id)
                        )));
                    }
                    max_predict_residual[t] = max_predict_residual[t].max(residual);
                }
            }
        }
    }

    Ok(SufficiencyResiduals {
        max_cost_residual,
        cost_ceiling,
        max_predict_residual,
        predict_ceiling,
    })
}

/// Max over `(t, s, s̃, a)` of
/// `W1(P^φ_t(·|s,a), P̃_t(·|s̃,a)) − F^P_t(d_S̃(φ(s), s̃))`.
///
/// Exhaustive when `samples` is `None`; otherwise a seeded random subset of
/// that many tuples. The contract is that the result is ≤ 1e-9.
pub fn pushforward_consistency_check(
    m: &Mdp,
    ab: &Abstraction,
    fp: &[Modulus],
    samples: Option<(u64, usize)>,
) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let m_tilde = ab.build_abstract_mdp(m)?;
    let target = ab.target();
    let mut worst = f64::NEG_INFINITY;
    let mut check = |t: usize, s: usize, cell: usize, a: usize| -> Result<()> {
        let lhs = w1(
            &ab.pushforward(m, t, s, a),
            m_tilde.transition(t, cell, a),
            target,
        )?;
        let rhs = fp[t].eval(target.dist(ab.phi(s), cell));
        worst = worst.max(lhs - rhs);
        Ok(())
    };
    match samples {
        None => {
            for t in 0..m.horizon().saturating_sub(1) {
                for s in 0..m.n_states() {
                    for cell in 0..ab.n_abstract() {
                        for a in 0..m.n_actions() {
                            check(t, s, cell, a)?;
                        }
                    }
                }
            }
        }
        Some((seed, count)) => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..count {
                let t = rng.gen_range(0..m.horizon().saturating_sub(1).max(1));
                let s = rng.gen_range(0..m.n_states());
                let cell = rng.gen_range(0..ab.n_abstract());
                let a = rng.gen_range(0..m.n_actions());
                if t < m.horizon().saturating_sub(1) {
                    check(t, s, cell, a)?;
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomdp::tests::{fully_observed, random_pomdp};
    use crate::spaces::MetricSpace;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_costs_fit_zero_modulus() {
        let space = MetricSpace::line(3, 1.0);
        let costs = vec![vec![vec![2.0]; 3]; 2];
        let kernels =
            vec![
                crate::spaces::Kernel::new((0..3).map(|_| vec![Dist::uniform(3)]).collect())
                    .unwrap(),
            ];
        let m = Mdp::new(space, 1, kernels, costs).unwrap();
        let ab = Abstraction::identity(m.space());
        let set = fit_moduli(&m, &ab, ModuliKind::Linear).unwrap();
        for f in &set.fc {
            assert_eq!(f.eval(0.0), 0.0);
            assert_eq!(f.final_slope(), 0.0);
        }
    }

    #[test]
    fn linear_fit_recovers_known_ratio() {
        // d(0,1)=1 with cost gap 2.5: the fitted slope is exactly 2.5.
        let space = MetricSpace::line(2, 1.0);
        let costs = vec![vec![vec![0.0], vec![2.5]]];
        let m = Mdp::new(space, 1, vec![], costs).unwrap();
        let ab = Abstraction::identity(m.space());
        let set = fit_moduli(&m, &ab, ModuliKind::Linear).unwrap();
        assert_eq!(set.fc[0].final_slope(), 2.5);
        assert_eq!(set.fc[0].offset(), 0.0);
    }

    #[test]
    fn assemble_bound_zero_eta_linear_moduli_is_zero() {
        let fc = vec![Modulus::linear(1.0); 3];
        let fp = vec![Modulus::linear(0.7); 2];
        let core = assemble_bound(&[0.0, 0.0, 0.0], &fc, &fp, &[5.0, 4.0, 3.0, 0.0]).unwrap();
        assert!(core.bound.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn assemble_bound_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let horizon = 4;
        let eta: Vec<f64> = (0..horizon).map(|_| rng.gen_range(0.0..2.0)).collect();
        let fc: Vec<Modulus> = (0..horizon)
            .map(|_| Modulus::affine(rng.gen_range(0.0..0.5), rng.gen_range(0.0..2.0)))
            .collect();
        let fp: Vec<Modulus> = (0..horizon - 1)
            .map(|_| Modulus::affine(rng.gen_range(0.0..0.5), rng.gen_range(0.0..2.0)))
            .collect();
        let lipv: Vec<f64> = (0..=horizon).map(|_| rng.gen_range(0.0..3.0)).collect();
        let core = assemble_bound(&eta, &fc, &fp, &lipv).unwrap();
        for t in 0..horizon {
            // alpha_t = eps_t + sum_{tau=t}^{T-2} [delta_tau lip_{tau+1} + eps_{tau+1}]
            let mut direct = core.eps[t];
            for tau in t..horizon - 1 {
                direct += core.delta[tau] * lipv[tau + 1] + core.eps[tau + 1];
            }
            assert!((core.alpha[t] - direct).abs() <= 1e-12);
        }
        // T=1 degenerates to alpha_1 = eps_1.
        let core1 = assemble_bound(&eta[..1], &fc[..1], &[], &lipv[..2]).unwrap();
        assert_eq!(core1.alpha[0], core1.eps[0]);
    }

    #[test]
    fn assemble_bound_rejects_negative_eta() {
        let fc = vec![Modulus::linear(1.0)];
        assert!(assemble_bound(&[-0.1], &fc, &[], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn bound_is_monotone_in_eta() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        for _ in 0..20 {
            let horizon = 3;
            let fc: Vec<Modulus> = (0..horizon)
                .map(|_| Modulus::affine(rng.gen_range(0.0..0.3), rng.gen_range(0.0..2.0)))
                .collect();
            let fp: Vec<Modulus> = (0..horizon - 1)
                .map(|_| Modulus::affine(rng.gen_range(0.0..0.3), rng.gen_range(0.0..2.0)))
                .collect();
            let lipv: Vec<f64> = (0..=horizon).map(|_| rng.gen_range(0.0..2.0)).collect();
            let eta: Vec<f64> = (0..horizon).map(|_| rng.gen_range(0.0..1.0)).collect();
            let bigger: Vec<f64> = eta.iter().map(|e| e + rng.gen_range(0.0..1.0)).collect();
            let a = assemble_bound(&eta, &fc, &fp, &lipv).unwrap();
            let b = assemble_bound(&bigger, &fc, &fp, &lipv).unwrap();
            for t in 0..horizon {
                assert!(b.bound[t] >= a.bound[t] - 1e-12);
            }
        }
    }

    #[test]
    fn identity_abstraction_perfect_estimator_gives_zero_gap_zero_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let m = crate::mdp::tests::random_mdp(&mut rng, 3, 2, 3);
        let p = fully_observed(&m);
        let ab = Abstraction::identity(p.space());
        let g = Estimator::LastObservation {
            map: (0..3).collect(),
        };
        let out = verify_bound(&p, &ab, &g, VerifyOptions::default()).unwrap();
        assert!(out.eta.iter().all(|&e| e == 0.0));
        for row in &out.report.rows {
            assert_eq!(row.bound, 0.0);
            assert!(row.gap.unwrap().abs() <= VALUE_TOL);
        }
    }

    #[test]
    fn randomized_instance_respects_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        let p = random_pomdp(&mut rng, 3, 2, 2, 3);
        let ab = Abstraction::identity(p.space());
        let out =
            verify_bound(&p, &ab, &Estimator::MapPosterior, VerifyOptions::default()).unwrap();
        assert!(out.report.worst_slack.unwrap() >= -VALUE_TOL);
    }

    #[test]
    fn envelope_bound_never_exceeds_linear_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for trial in 0..8 {
            let p = random_pomdp(&mut rng, 3, 2, 2, 3);
            let ab = if trial % 2 == 0 {
                Abstraction::identity(p.space())
            } else {
                let target = p.space().restrict(&[0, 2]).unwrap();
                Abstraction::dirac(3, target, vec![0, 1, 1], &[0, 2]).unwrap()
            };
            let g = Estimator::MapPosterior;
            let lin = verify_bound(
                &p,
                &ab,
                &g,
                VerifyOptions {
                    moduli: ModuliKind::Linear,
                    ..Default::default()
                },
            )
            .unwrap();
            let env = verify_bound(
                &p,
                &ab,
                &g,
                VerifyOptions {
                    moduli: ModuliKind::Envelope,
                    ..Default::default()
                },
            )
            .unwrap();
            for t in 0..p.horizon() {
                assert!(
                    env.core.bound[t] <= lin.core.bound[t] + VALUE_TOL,
                    "envelope bound above linear bound at t={t}"
                );
            }
        }
    }

    #[test]
    fn cost_scaling_leaves_actions_fixed_and_scales_gap_and_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        let p = random_pomdp(&mut rng, 3, 2, 2, 3);
        let ab = Abstraction::identity(p.space());
        let g = Estimator::MapPosterior;
        let out = verify_bound(&p, &ab, &g, VerifyOptions::default()).unwrap();

        let k = 3.5;
        let mut scaled = p.clone();
        for table in scaled.costs_mut() {
            for row in table {
                for c in row {
                    *c *= k;
                }
            }
        }
        let out2 = verify_bound(&scaled, &ab, &g, VerifyOptions::default()).unwrap();
        assert_eq!(
            out.abstract_policy.table(),
            out2.abstract_policy.table(),
            "positive cost scaling must not change the abstract policy"
        );
        for t in 0..p.horizon() {
            let b1 = out.core.bound[t];
            let b2 = out2.core.bound[t];
            assert!((b2 - k * b1).abs() <= 1e-9 * (1.0 + b1.abs() * k));
            let g1 = out.report.rows[t].gap.unwrap();
            let g2 = out2.report.rows[t].gap.unwrap();
            assert!((g2 - k * g1).abs() <= 1e-9 * (1.0 + g1.abs() * k));
        }
    }

    #[test]
    fn abstract_policy_gap_identity_abstraction_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        let m = crate::mdp::tests::random_mdp(&mut rng, 4, 2, 3);
        let ab = Abstraction::identity(m.space());
        let out = abstract_policy_gap(&m, &ab, ModuliKind::Linear).unwrap();
        for t in 0..3 {
            assert!(out.max_gap[t].abs() <= VALUE_TOL);
            assert_eq!(out.bound[t], 0.0);
        }
    }

    #[test]
    fn abstract_policy_gap_constant_costs_zero_any_abstraction() {
        let space = MetricSpace::line(4, 1.0);
        let kernels = vec![crate::spaces::Kernel::new(
            (0..4)
                .map(|_| vec![Dist::uniform(4), Dist::uniform(4)])
                .collect(),
        )
        .unwrap()];
        let costs = vec![vec![vec![1.0, 1.0]; 4]; 2];
        let m = Mdp::new(space, 2, kernels, costs).unwrap();
        let target = m.space().restrict(&[0, 2]).unwrap();
        let ab = Abstraction::dirac(4, target, vec![0, 0, 1, 1], &[0, 2]).unwrap();
        let out = abstract_policy_gap(&m, &ab, ModuliKind::Linear).unwrap();
        for t in 0..2 {
            assert!(out.max_gap[t].abs() <= VALUE_TOL);
        }
    }

    #[test]
    fn abstract_policy_gap_quantized_mdp_respects_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(58);
        for _ in 0..5 {
            let m = crate::mdp::tests::random_mdp(&mut rng, 5, 2, 3);
            let target = m.space().restrict(&[1, 3]).unwrap();
            let ab = Abstraction::dirac(5, target, vec![0, 0, 0, 1, 1], &[1, 3]).unwrap();
            // abstract_policy_gap returns Err on violation; Ok is the assertion.
            abstract_policy_gap(&m, &ab, ModuliKind::Linear).unwrap();
            abstract_policy_gap(&m, &ab, ModuliKind::Envelope).unwrap();
        }
    }

    #[test]
    fn sufficiency_residuals_zero_for_perfect_estimator() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let m = crate::mdp::tests::random_mdp(&mut rng, 3, 2, 3);
        let p = fully_observed(&m);
        let ab = Abstraction::identity(p.space());
        let g = Estimator::LastObservation {
            map: (0..3).collect(),
        };
        let out = sufficiency_residuals(&p, &ab, &g, ModuliKind::Linear, 100_000).unwrap();
        for t in 0..3 {
            assert!(out.max_cost_residual[t].abs() <= VALUE_TOL);
        }
        for t in 0..2 {
            assert!(out.max_predict_residual[t].abs() <= VALUE_TOL);
        }
    }

    #[test]
    fn sufficiency_residuals_hold_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        for _ in 0..5 {
            let p = random_pomdp(&mut rng, 3, 2, 2, 3);
            let ab = Abstraction::identity(p.space());
            sufficiency_residuals(
                &p,
                &ab,
                &Estimator::MapPosterior,
                ModuliKind::Linear,
                100_000,
            )
            .unwrap();
            sufficiency_residuals(
                &p,
                &ab,
                &Estimator::BeliefMedian,
                ModuliKind::Envelope,
                100_000,
            )
            .unwrap();
        }
    }

    // 2-state/2-observation instance: eta at the second stage matches a
    // hand enumeration of histories with Bayes posteriors computed from the
    // joint law, independently of the filter implementation.
    #[test]
    fn eta_matches_hand_enumeration_on_two_state_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let p = random_pomdp(&mut rng, 2, 2, 2, 2);
        let ab = Abstraction::identity(p.space());
        let g = Estimator::MapPosterior;
        let tree = HistoryTree::build(&p, 10_000).unwrap();
        let eta = compute_eta(&p, &tree, &ab, &g).unwrap();

        let d = |i: usize, j: usize| p.space().dist(i, j);
        let mut expected = 0.0f64;
        for y1 in 0..2 {
            for a in 0..2 {
                for y2 in 0..2 {
                    // Pr(s2 | y1, a, y2) ∝ Σ_s1 ξ(s1,y1) P(s2,y2 | s1,a).
                    let mut post = [0.0f64; 2];
                    for s1 in 0..2 {
                        let prior = p.initial().mass(p.joint_index(s1, y1));
                        for s2 in 0..2 {
                            post[s2] += prior * p.kernel(0).row(s1, a).mass(p.joint_index(s2, y2));
                        }
                    }
                    let z: f64 = post.iter().sum();
                    if z <= 0.0 {
                        continue;
                    }
                    let b = [post[0] / z, post[1] / z];
                    // Posterior mode with low-index ties, then expected
                    // distance to it.
                    let mode = if b[1] > b[0] { 1 } else { 0 };
                    let err = b[0] * d(0, mode) + b[1] * d(1, mode);
                    expected = expected.max(err);
                }
            }
        }
        assert!((eta[1] - expected).abs() <= 1e-12);
    }

    // The bound pipeline on the mean-field closed-form inputs equals the
    // simplified closed form plus exactly rbar·Σ Lip(Ṽ_{τ+1}) (the simplified
    // form drops the eta term of delta).
    #[test]
    fn mean_field_closed_form_relation_is_exact() {
        let spec = crate::scenarios::ScenarioSpec::MeanField {
            particles: 2,
            grid: 4,
            horizon: 3,
            seed: 65,
            noise_steps: None,
            weights: None,
            beta: 0.3,
            lip_mean_cost: 1.0,
            lip_mean_dyn: 1.0,
            gammas: None,
        };
        let sc = spec.generate().unwrap();
        let data = sc.mean_field.as_ref().unwrap();
        let (fc, fp) = sc.closed_form.as_ref().unwrap().moduli.clone().unwrap();
        let m = sc.pomdp.induced_mdp().unwrap();
        let tilde = sc.abstraction.build_abstract_mdp(&m).unwrap();
        let sol = tilde.solve();
        let horizon = sc.pomdp.horizon();
        let lip_v: Vec<f64> = (0..=horizon)
            .map(|t| lipschitz_of(&sol.values[t], sc.abstraction.target()))
            .collect();
        let eta = vec![data.rbar; horizon];
        let core = assemble_bound(&eta, &vec![fc; horizon], &vec![fp; horizon - 1], &lip_v).unwrap();
        for t in 0..horizon {
            let simplified =
                crate::scenarios::mean_field_closed_form_alpha(t, horizon, data, &lip_v);
            let lip_tail: f64 = (t..horizon - 1).map(|tau| lip_v[tau + 1]).sum();
            assert!(
                (core.alpha[t] - (simplified + data.rbar * lip_tail)).abs() <= 1e-12,
                "alpha {} vs simplified form {} + eta term {}",
                core.alpha[t],
                simplified,
                data.rbar * lip_tail
            );
        }
    }

    #[test]
    fn sufficiency_residuals_hold_on_structured_families() {
        for sc in [
            crate::scenarios::bounded_noise(8, 1, 3, 66).unwrap(),
            crate::scenarios::quantized(9, 1, 3, 3, 67).unwrap(),
            crate::scenarios::event_triggered(5, 1, 3, 68).unwrap(),
        ] {
            sufficiency_residuals(
                &sc.pomdp,
                &sc.abstraction,
                &sc.estimator,
                ModuliKind::Linear,
                crate::DEFAULT_BUDGET,
            )
            .unwrap();
        }
    }

    #[test]
    fn pushforward_consistency_sampled_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(69);
        let m = crate::mdp::tests::random_mdp(&mut rng, 6, 2, 3);
        let target = m.space().restrict(&[0, 3]).unwrap();
        let ab = Abstraction::dirac(6, target, vec![0, 0, 0, 1, 1, 1], &[0, 3]).unwrap();
        let set = fit_moduli(&m, &ab, ModuliKind::Linear).unwrap();
        let worst = pushforward_consistency_check(&m, &ab, &set.fp, Some((7, 500))).unwrap();
        assert!(worst <= VALUE_TOL);
    }

    #[test]
    fn pushforward_consistency_exhaustive_on_small_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let m = crate::mdp::tests::random_mdp(&mut rng, 4, 2, 3);
        let target = m.space().restrict(&[0, 2]).unwrap();
        let ab = Abstraction::dirac(4, target, vec![0, 0, 1, 1], &[0, 2]).unwrap();
        for kind in [ModuliKind::Linear, ModuliKind::Envelope] {
            let set = fit_moduli(&m, &ab, kind).unwrap();
            let worst = pushforward_consistency_check(&m, &ab, &set.fp, None).unwrap();
            assert!(worst <= VALUE_TOL, "pushforward consistency violation {worst}");
        }
    }

    #[test]
    fn lipschitz_recursion_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        for _ in 0..10 {
            let m = crate::mdp::tests::random_mdp(&mut rng, 4, 2, 4);
            let v = lipschitz_recursion_violation(&m).unwrap();
            assert!(v <= VALUE_TOL, "Lipschitz recursion violated by {v}");
        }
    }

    #[test]
    fn recursive_lip_mode_gives_dominating_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let p = random_pomdp(&mut rng, 3, 2, 2, 3);
        let ab = Abstraction::identity(p.space());
        let g = Estimator::MapPosterior;
        let exact = verify_bound(&p, &ab, &g, VerifyOptions::default()).unwrap();
        let rec = verify_bound(
            &p,
            &ab,
            &g,
            VerifyOptions {
                lip_mode: LipMode::Recursive,
                ..Default::default()
            },
        )
        .unwrap();
        for t in 0..p.horizon() {
            assert!(rec.lip_v[t] >= exact.lip_v[t] - VALUE_TOL);
            assert!(rec.core.bound[t] >= exact.core.bound[t] - VALUE_TOL);
        }
    }
}
