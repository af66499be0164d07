//! Independent reference implementations used to cross-check the production
//! solvers.
//!
//! Everything here is deliberately naive — closed forms and exhaustive
//! enumeration — and shares no code with the implementation paths it checks.

use crate::mdp::{MarkovPolicy, Mdp};
use crate::pomdp::Pomdp;
use crate::spaces::Dist;

/// Wasserstein-1 on the path metric `d(i,j) = |i−j|` via the sorted-CDF
/// formula `Σ_i |F_μ(i) − F_ν(i)|`.
pub fn w1_sorted_cdf(mu: &Dist, nu: &Dist) -> f64 {
    let mut acc = 0.0;
    let mut diff = 0.0;
    for i in 0..mu.len() {
        diff += mu.mass(i) - nu.mass(i);
        acc += diff.abs();
    }
    // The final cumulative difference is ~0; every prefix contributes once.
    acc - diff.abs()
}

/// Exhaustive minimum over all deterministic Markov policies.
///
/// Evaluates every one of the `|A|^(|S|·T)` policies and returns the
/// pointwise minimum of `V^{M,π}_1` together with one minimizing policy.
/// Only usable when `|S|·T` is a handful of decision slots.
pub fn brute_force_optimal(m: &Mdp) -> (Vec<f64>, MarkovPolicy) {
    let slots = m.n_states() * m.horizon();
    let n_policies = (m.n_actions() as u64).pow(slots as u32);
    let mut best: Option<(Vec<f64>, MarkovPolicy)> = None;
    for code in 0..n_policies {
        let mut c = code;
        let mut table = vec![vec![0usize; m.n_states()]; m.horizon()];
        for row in table.iter_mut() {
            for slot in row.iter_mut() {
                *slot = (c % m.n_actions() as u64) as usize;
                c /= m.n_actions() as u64;
            }
        }
        let pi = MarkovPolicy::new(table, m).unwrap();
        let values = m.evaluate_policy(&pi).unwrap();
        let v1 = values[0].clone();
        match &mut best {
            None => best = Some((v1, pi)),
            Some((bv, bp)) => {
                let mut improved = false;
                for s in 0..m.n_states() {
                    if v1[s] < bv[s] {
                        bv[s] = v1[s];
                        improved = true;
                    }
                }
                if improved && v1.iter().zip(bv.iter()).all(|(a, b)| a <= b) {
                    *bp = pi;
                }
            }
        }
    }
    let (v, p) = best.expect("at least one policy");
    (v, p)
}

/// Optimal open-loop value of a POMDP: minimum over all `|A|^T` action
/// sequences of the expected total cost, computed by forward marginals of the
/// state law. This is the optimal value when observations are uninformative.
pub fn open_loop_optimal(p: &Pomdp) -> f64 {
    let t_max = p.horizon();
    let n_seq = (p.n_actions() as u64).pow(t_max as u32);
    let mut best = f64::INFINITY;
    for code in 0..n_seq {
        let mut c = code;
        let seq: Vec<usize> = (0..t_max)
            .map(|_| {
                let a = (c % p.n_actions() as u64) as usize;
                c /= p.n_actions() as u64;
                a
            })
            .collect();
        best = best.min(open_loop_value(p, &seq));
    }
    best
}

/// Expected total cost of a fixed action sequence, by forward marginals.
pub fn open_loop_value(p: &Pomdp, actions: &[usize]) -> f64 {
    assert_eq!(actions.len(), p.horizon());
    let ns = p.n_states();
    let mut marginal: Vec<f64> = (0..ns).map(|s| p.initial_state_mass(s)).collect();
    let mut total = 0.0;
    for (t, &a) in actions.iter().enumerate() {
        for s in 0..ns {
            total += marginal[s] * p.cost(t, s, a);
        }
        if t + 1 < p.horizon() {
            let mut next = vec![0.0; ns];
            for s in 0..ns {
                if marginal[s] == 0.0 {
                    continue;
                }
                for s2 in 0..ns {
                    next[s2] += marginal[s] * p.state_transition_mass(t, s, a, s2);
                }
            }
            marginal = next;
        }
    }
    total
}
