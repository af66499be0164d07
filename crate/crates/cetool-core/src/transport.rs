//! Exact Wasserstein-1 distance between finite distributions over a
//! [`MetricSpace`].
//!
//! `w1(μ, ν)` is the value of the optimal-transport linear program
//!
//! ```text
//!     min Σ_ij γ_ij d(i,j)   s.t.   Σ_j γ_ij = μ_i,  Σ_i γ_ij = ν_j,  γ ≥ 0.
//! ```
//!
//! Because the ground cost is a metric, the coupling LP has the same value as
//! the uncapacitated min-cost-flow problem on the point set with net supplies
//! `μ − ν` (flows along paths can always be replaced by direct arcs without
//! increasing cost, by the triangle inequality). The production solver
//! ([`w1_with_potential`]) runs successive shortest paths on that flow
//! network; it is exact, deterministic, and yields a 1-Lipschitz dual
//! potential `f` with `Σ f dμ − Σ f dν = w1` as an optimality certificate.
//!
//! An independent dense two-phase simplex solve of the coupling LP itself is
//! provided in [`dense_lp`] and used by the test suites as a second route.
//!
//! Only the value (and potential) are exposed; optimal couplings are not
//! canonical and nothing downstream consumes them.

use crate::error::{Error, Result};
use crate::spaces::{Dist, MetricSpace};

/// Mass below this is treated as settled when balancing supplies.
const MASS_TOL: f64 = 1e-13;

/// Flow below this is dropped from the residual graph; relaxations must beat
/// the incumbent by this margin. Guards the path search against float-drift
/// cycles of magnitude ~1e-16.
const FLOW_TOL: f64 = 1e-15;

/// Exact Wasserstein-1 distance between `mu` and `nu` on `space`.
pub fn w1(mu: &Dist, nu: &Dist, space: &MetricSpace) -> Result<f64> {
    Ok(w1_with_potential(mu, nu, space)?.0)
}

/// Exact Wasserstein-1 distance together with an optimal dual potential.
///
/// The returned `f` satisfies `|f(i) − f(j)| ≤ d(i,j)` for all pairs and
/// `Σ_i f(i)(μ_i − ν_i) = w1(μ,ν)` up to solver round-off.
pub fn w1_with_potential(mu: &Dist, nu: &Dist, space: &MetricSpace) -> Result<(f64, Vec<f64>)> {
    let n = space.len();
    if mu.len() != n {
        return Err(Error::DimensionMismatch {
            what: "w1 first argument",
            expected: n,
            got: mu.len(),
        });
    }
    if nu.len() != n {
        return Err(Error::DimensionMismatch {
            what: "w1 second argument",
            expected: n,
            got: nu.len(),
        });
    }
    let mut balance: Vec<f64> = (0..n).map(|i| mu.mass(i) - nu.mass(i)).collect();
    let mut flow = vec![vec![0.0f64; n]; n];

    // Each augmentation either settles a surplus/deficit node or saturates a
    // cancellation arc; the cap only trips on a solver defect.
    let max_augmentations = 8 * n * n + 16;
    let mut augmentations = 0usize;
    loop {
        // Largest remaining surplus; lowest index on ties.
        let mut src = None;
        for (i, &b) in balance.iter().enumerate() {
            if b > MASS_TOL && src.map_or(true, |(_, best)| b > best) {
                src = Some((i, b));
            }
        }
        let Some((src, surplus)) = src else { break };

        let (dist, prev) = shortest_paths(src, space, &flow);

        // Closest deficit node; lowest index on ties.
        let mut snk = None;
        for (j, &b) in balance.iter().enumerate() {
            if b < -MASS_TOL && snk.map_or(true, |(_, best)| dist[j] < best) {
                snk = Some((j, dist[j]));
            }
        }
        let Some((snk, _)) = snk else {
            // Residual imbalance from input round-off only; settled.
            break;
        };

        augmentations += 1;
        if augmentations > max_augmentations {
            return Err(Error::InvariantViolation(
                "transport solve did not settle (degenerate augmentation cycle)".into(),
            ));
        }

        // Path capacity: cancellation arcs are bounded by the flow they undo.
        let mut amount = surplus.min(-balance[snk]);
        let mut v = snk;
        let mut steps = 0usize;
        while v != src {
            let (u, cancel) = prev[v].expect("path exists in complete graph");
            if cancel {
                amount = amount.min(flow[v][u]);
            }
            v = u;
            steps += 1;
            if steps > n {
                return Err(Error::InvariantViolation(
                    "transport path walk cycled (negative-cycle drift)".into(),
                ));
            }
        }

        let mut v = snk;
        while v != src {
            let (u, cancel) = prev[v].expect("path exists in complete graph");
            if cancel {
                flow[v][u] -= amount;
                if flow[v][u] <= FLOW_TOL {
                    flow[v][u] = 0.0;
                }
            } else {
                flow[u][v] += amount;
            }
            v = u;
        }
        balance[src] -= amount;
        balance[snk] += amount;
    }

    let mut cost = 0.0;
    for (u, row) in flow.iter().enumerate() {
        for (v, &f) in row.iter().enumerate() {
            if f > 0.0 {
                cost += f * space.dist(u, v);
            }
        }
    }

    // Dual potential from shortest distances over the final residual graph,
    // seeded at zero everywhere (virtual super-source).
    let pi = residual_distances(space, &flow);
    let potential = pi.into_iter().map(|p| -p).collect();
    Ok((cost, potential))
}

/// Bellman-Ford from `src` over the residual graph: forward arcs `(u,v)` with
/// cost `d(u,v)` always exist (uncapacitated); cancellation arcs `(u,v)` with
/// cost `−d(v,u)` exist while `flow[v][u] > 0`. Returns distances and parent
/// pointers `(prev node, used cancellation arc)`.
fn shortest_paths(
    src: usize,
    space: &MetricSpace,
    flow: &[Vec<f64>],
) -> (Vec<f64>, Vec<Option<(usize, bool)>>) {
    let n = space.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev: Vec<Option<(usize, bool)>> = vec![None; n];
    dist[src] = 0.0;
    for _ in 0..n {
        let mut changed = false;
        for u in 0..n {
            if !dist[u].is_finite() {
                continue;
            }
            for v in 0..n {
                if v == u {
                    continue;
                }
                // Cancellation is never costlier than a fresh forward push.
                let (cost, cancel) = if flow[v][u] > FLOW_TOL {
                    (-space.dist(v, u), true)
                } else {
                    (space.dist(u, v), false)
                };
                let cand = dist[u] + cost;
                if cand < dist[v] - FLOW_TOL {
                    dist[v] = cand;
                    prev[v] = Some((u, cancel));
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (dist, prev)
}

fn residual_distances(space: &MetricSpace, flow: &[Vec<f64>]) -> Vec<f64> {
    let n = space.len();
    let mut dist = vec![0.0f64; n];
    for _ in 0..n {
        let mut changed = false;
        for u in 0..n {
            for v in 0..n {
                if v == u {
                    continue;
                }
                let cost = if flow[v][u] > FLOW_TOL {
                    -space.dist(v, u)
                } else {
                    space.dist(u, v)
                };
                if dist[u] + cost < dist[v] - FLOW_TOL {
                    dist[v] = dist[u] + cost;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

/// Convexity residual of W1 over a finite mixture:
///
/// ```text
///     Σ_k w_k · w1(μ_k, ν_k)  −  w1(Σ_k w_k μ_k, Σ_k w_k ν_k)
/// ```
///
/// Non-negative up to solver round-off for any mixture, since transporting
/// each component separately is one feasible plan for the mixed problem.
pub fn w1_convexity_residual(components: &[(f64, Dist, Dist)], space: &MetricSpace) -> Result<f64> {
    if components.is_empty() {
        return Err(Error::InvalidDistribution("empty mixture".into()));
    }
    let weights: Vec<f64> = components.iter().map(|(w, _, _)| *w).collect();
    Dist::new(weights)?;
    let n = space.len();
    let mut mix_mu = vec![0.0; n];
    let mut mix_nu = vec![0.0; n];
    let mut lhs = 0.0;
    for (w, mu, nu) in components {
        lhs += w * w1(mu, nu, space)?;
        for i in 0..n {
            mix_mu[i] += w * mu.mass(i);
            mix_nu[i] += w * nu.mass(i);
        }
    }
    let rhs = w1(
        &Dist::normalized(mix_mu)?,
        &Dist::normalized(mix_nu)?,
        space,
    )?;
    Ok(lhs - rhs)
}

/// Dense two-phase simplex solve of the coupling LP. Independent of the flow
/// solver; intended as a cross-checking oracle at small sizes.
pub mod dense_lp {
    use super::*;

    const PIVOT_TOL: f64 = 1e-11;

    /// Solve `min Σ γ_ij cost[i][j]` subject to the marginal constraints.
    /// Returns the optimal value.
    pub fn transport_lp(mu: &[f64], nu: &[f64], cost: &[Vec<f64>]) -> Result<f64> {
        let n = mu.len();
        let m = nu.len();
        if cost.len() != n || cost.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                what: "transport cost matrix",
                expected: n * m,
                got: cost.iter().map(|r| r.len()).sum(),
            });
        }
        // Drop the last column constraint (redundant: totals match), keeping
        // the system full-rank for the transportation polytope.
        let rows = n + m - 1;
        let vars = n * m;
        let col = |i: usize, j: usize| i * m + j;

        let mut a = vec![vec![0.0f64; vars]; rows];
        let mut b = vec![0.0f64; rows];
        for i in 0..n {
            for j in 0..m {
                a[i][col(i, j)] = 1.0;
            }
            b[i] = mu[i];
        }
        for j in 0..m - 1 {
            for i in 0..n {
                a[n + j][col(i, j)] = 1.0;
            }
            b[n + j] = nu[j];
        }
        let obj: Vec<f64> = (0..vars).map(|k| cost[k / m][k % m]).collect();
        simplex_two_phase(a, b, obj)
    }

    /// Wrapper building the cost matrix from a metric space.
    pub fn w1_dense(mu: &Dist, nu: &Dist, space: &MetricSpace) -> Result<f64> {
        let n = space.len();
        if mu.len() != n || nu.len() != n {
            return Err(Error::DimensionMismatch {
                what: "w1_dense arguments",
                expected: n,
                got: mu.len().min(nu.len()),
            });
        }
        let cost: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| space.dist(i, j)).collect())
            .collect();
        transport_lp(mu.masses(), nu.masses(), &cost)
    }

    /// Two-phase tableau simplex with Bland's rule. `b ≥ 0` assumed.
    fn simplex_two_phase(a: Vec<Vec<f64>>, b: Vec<f64>, obj: Vec<f64>) -> Result<f64> {
        let rows = a.len();
        let vars = obj.len();
        let total = vars + rows; // artificials appended

        // Tableau: rows x (total + 1), last column RHS.
        let mut t = vec![vec![0.0f64; total + 1]; rows];
        for r in 0..rows {
            t[r][..vars].copy_from_slice(&a[r]);
            t[r][vars + r] = 1.0;
            t[r][total] = b[r];
        }
        let mut basis: Vec<usize> = (vars..total).collect();

        // Phase 1: minimize the sum of artificials.
        let mut phase1 = vec![0.0f64; total + 1];
        for r in 0..rows {
            for c in 0..=total {
                phase1[c] -= t[r][c];
            }
        }
        for v in vars..total {
            phase1[v] = 0.0;
        }
        run_simplex(&mut t, &mut phase1, &mut basis, vars + rows)?;
        if phase1[total].abs() > 1e-8 {
            return Err(Error::InvalidDistribution(
                "transport LP infeasible: marginals do not balance".into(),
            ));
        }

        // Phase 2: original objective, artificials barred from entering.
        let mut z = vec![0.0f64; total + 1];
        z[..vars].copy_from_slice(&obj);
        for r in 0..rows {
            if z[basis[r]].abs() > 0.0 {
                let coef = z[basis[r]];
                for c in 0..=total {
                    z[c] -= coef * t[r][c];
                }
            }
        }
        run_simplex(&mut t, &mut z, &mut basis, vars)?;
        Ok(-z[total])
    }

    /// Bland's-rule simplex on a reduced-cost row `z`; columns `>= limit`
    /// (the artificials in phase 2) never enter.
    fn run_simplex(
        t: &mut [Vec<f64>],
        z: &mut [f64],
        basis: &mut [usize],
        limit: usize,
    ) -> Result<()> {
        let rows = t.len();
        let total = z.len() - 1;
        for _ in 0..200_000 {
            let entering = (0..limit.min(total)).find(|&c| z[c] < -PIVOT_TOL);
            let Some(e) = entering else { return Ok(()) };
            // Ratio test, Bland tie-break on basis index.
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..rows {
                if t[r][e] > PIVOT_TOL {
                    let ratio = t[r][total] / t[r][e];
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - PIVOT_TOL
                                || (ratio < lratio + PIVOT_TOL && basis[r] < basis[lr])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((lr, _)) = leave else {
                return Err(Error::InvalidDistribution(
                    "transport LP unbounded (should be impossible)".into(),
                ));
            };
            pivot(t, z, lr, e);
            basis[lr] = e;
        }
        Err(Error::InvalidDistribution(
            "simplex iteration limit exceeded".into(),
        ))
    }

    fn pivot(t: &mut [Vec<f64>], z: &mut [f64], pr: usize, pc: usize) {
        let total = z.len() - 1;
        let piv = t[pr][pc];
        for c in 0..=total {
            t[pr][c] /= piv;
        }
        for r in 0..t.len() {
            if r != pr && t[r][pc].abs() > 0.0 {
                let f = t[r][pc];
                for c in 0..=total {
                    t[r][c] -= f * t[pr][c];
                }
            }
        }
        if z[pc].abs() > 0.0 {
            let f = z[pc];
            for c in 0..=total {
                z[c] -= f * t[pr][c];
            }
        }
    }
}
