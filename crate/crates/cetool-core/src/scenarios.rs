//! Instance generators: the worked example families and seeded random
//! instances for the verification suite.
//!
//! Every generator returns a fully concrete finite [`Scenario`]: a POMDP, an
//! abstraction, an estimator, and (where the family provides them)
//! closed-form ceilings to compare the measured quantities against.
//!
//! Families:
//!
//! - **bounded_noise**: ring world with `Y = S` and `d(Y_t, S_t) = r` almost
//!   surely (exactly distance `r`, so the measured η equals `r`); estimator is
//!   the last observation, abstraction is the identity.
//! - **intermittent**: same world; the observation is good (radius `r`) with
//!   probability `1−p` and degraded (radius `R`) with probability `p`. With
//!   `p = 0` the generator emits literally the same kernel numbers as
//!   bounded_noise(r), and with `r = R` the same as bounded_noise(R). For
//!   `0 < p < 1` the posterior probability of the degraded event at a specific
//!   history may exceed `p`, so the ceiling `(1−p)r + pR` is reported, not
//!   asserted.
//! - **quantized**: bounded noise plus a cell partition with Dirac liftings at
//!   representatives; estimator quantizes the last observation. η ceiling
//!   `r + 2R` with `R` the max cell radius.
//! - **adaptive**: state `(x, θ)` with unknown parameter θ observed only
//!   through realized per-step costs; estimator pairs the observed position
//!   with the posterior-mode parameter. Construction-level Lipschitz
//!   constants are kept at or below the spec'd targets and the fitted ones are
//!   reported next to them.
//! - **event_triggered**: plant + sensor that transmits the state only when
//!   the controller's predicted estimate drifts by more than `r`; state is
//!   `(x, x̂_{t|t−1})`, abstraction projects to `x`, estimator replays the
//!   filtered/predicted recursion from the history. η ceiling `r`.
//! - **mean_field**: `n` particles on a 1-D grid whose coupling is through
//!   the weighted mean; abstraction is the snapped weighted mean with Dirac
//!   lifting at the diagonal. Closed-form affine moduli
//!   `F^c(x) = L^ℓ̄·x + 2β`, `F^P(x) = L^f̄·x + 2γ̄` hold up to a reported
//!   discretization slack. Instances with more than 3 particles skip the
//!   exact oracle (`bound_only`).
//!
//! All generators are pure functions of their spec (seeded ChaCha streams),
//! and every emitted instance passes the full type invariants before release.

use crate::abstraction::Abstraction;
use crate::bounds::{fit_moduli, linear_constants, assemble_bound, ModuliKind, Modulus};
use crate::error::{Error, Result};
use crate::estimator::{Estimator, RecursiveRule};
use crate::mdp::lipschitz_of;
use crate::pomdp::Pomdp;
use crate::report::{BoundReport, BoundRow, ETA_NOTE};
use crate::spaces::{Dist, Kernel, MetricSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A fully generated instance.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub label: String,
    pub family: &'static str,
    pub pomdp: Pomdp,
    pub abstraction: Abstraction,
    pub estimator: Estimator,
    pub closed_form: Option<ClosedForm>,
    /// Family-specific annotations (targets vs fitted constants, slacks).
    pub notes: Vec<String>,
    /// True when the exact history-tree oracle is out of reach and only the
    /// bound plus a Monte-Carlo policy value should be reported.
    pub bound_only: bool,
    pub mean_field: Option<MeanFieldData>,
}

/// Closed-form reference data supplied by a family.
#[derive(Debug, Clone)]
pub struct ClosedForm {
    /// Ceiling on η_t (uniform in t), discretization slack included.
    pub eta_ceiling: f64,
    /// Closed-form moduli (cost, dynamics) where the family derives them.
    pub moduli: Option<(Modulus, Modulus)>,
    /// Additive discretization slack allowed when comparing fitted moduli
    /// against the closed forms (cost, dynamics).
    pub moduli_slack: (f64, f64),
}

/// Extra structure exposed by the mean-field family for coupling checks.
#[derive(Debug, Clone)]
pub struct MeanFieldData {
    /// Grid spacing.
    pub h: f64,
    /// Per-particle weights (sum to 1).
    pub alpha: Vec<f64>,
    /// `Σ_i α_i r_i h`.
    pub rbar: f64,
    /// `Σ_i α_i γ_i`.
    pub gbar: f64,
    pub lip_mean_cost: f64,
    pub lip_mean_dyn: f64,
    pub beta: f64,
    /// Shared-noise support probabilities.
    pub w_probs: Vec<f64>,
    /// `next_abstract[cell][action][w]`: abstract image of the next state
    /// when starting from the fiber representative of `cell`.
    pub next_abstract: Vec<Vec<Vec<usize>>>,
}

/// Parameter block for one scenario; see the module docs for the families.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScenarioSpec {
    BoundedNoise {
        grid: usize,
        radius: usize,
        horizon: usize,
        seed: u64,
    },
    Intermittent {
        grid: usize,
        radius: usize,
        degraded_radius: usize,
        degraded_prob: f64,
        horizon: usize,
        seed: u64,
    },
    Quantized {
        grid: usize,
        radius: usize,
        cell: usize,
        horizon: usize,
        seed: u64,
    },
    Adaptive {
        positions: usize,
        params: usize,
        horizon: usize,
        seed: u64,
        lip_cost: f64,
        lip_dyn: f64,
    },
    EventTriggered {
        grid: usize,
        threshold: usize,
        horizon: usize,
        seed: u64,
    },
    MeanField {
        particles: usize,
        grid: usize,
        horizon: usize,
        seed: u64,
        /// Per-particle observation noise radii in grid steps.
        #[serde(default)]
        noise_steps: Option<Vec<usize>>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_lip")]
        lip_mean_cost: f64,
        #[serde(default = "default_lip")]
        lip_mean_dyn: f64,
        #[serde(default)]
        gammas: Option<Vec<f64>>,
    },
    Random {
        states: usize,
        observations: usize,
        actions: usize,
        horizon: usize,
        seed: u64,
        #[serde(default)]
        variant: usize,
    },
}

fn default_beta() -> f64 {
    0.3
}

fn default_lip() -> f64 {
    1.0
}

impl ScenarioSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            ScenarioSpec::BoundedNoise { .. } => "bounded_noise",
            ScenarioSpec::Intermittent { .. } => "intermittent",
            ScenarioSpec::Quantized { .. } => "quantized",
            ScenarioSpec::Adaptive { .. } => "adaptive",
            ScenarioSpec::EventTriggered { .. } => "event_triggered",
            ScenarioSpec::MeanField { .. } => "mean_field",
            ScenarioSpec::Random { .. } => "random",
        }
    }

    /// Short parameter label used in file names and summaries.
    pub fn label(&self) -> String {
        match self {
            ScenarioSpec::BoundedNoise {
                grid,
                radius,
                horizon,
                seed,
            } => format!("bounded_noise_n{grid}_r{radius}_T{horizon}_s{seed}"),
            ScenarioSpec::Intermittent {
                grid,
                radius,
                degraded_radius,
                degraded_prob,
                horizon,
                seed,
            } => format!(
                "intermittent_n{grid}_r{radius}_R{degraded_radius}_p{degraded_prob}_T{horizon}_s{seed}"
            ),
            ScenarioSpec::Quantized {
                grid,
                radius,
                cell,
                horizon,
                seed,
            } => format!("quantized_n{grid}_r{radius}_c{cell}_T{horizon}_s{seed}"),
            ScenarioSpec::Adaptive {
                positions,
                params,
                horizon,
                seed,
                ..
            } => format!("adaptive_x{positions}_th{params}_T{horizon}_s{seed}"),
            ScenarioSpec::EventTriggered {
                grid,
                threshold,
                horizon,
                seed,
            } => format!("event_triggered_n{grid}_r{threshold}_T{horizon}_s{seed}"),
            ScenarioSpec::MeanField {
                particles,
                grid,
                horizon,
                seed,
                ..
            } => format!("mean_field_p{particles}_m{grid}_T{horizon}_s{seed}"),
            ScenarioSpec::Random {
                states,
                observations,
                actions,
                horizon,
                seed,
                variant,
            } => format!(
                "random_s{states}_y{observations}_a{actions}_T{horizon}_seed{seed}_v{variant}"
            ),
        }
    }

    pub fn generate(&self) -> Result<Scenario> {
        let sc = match *self {
            ScenarioSpec::BoundedNoise {
                grid,
                radius,
                horizon,
                seed,
            } => bounded_noise(grid, radius, horizon, seed)?,
            ScenarioSpec::Intermittent {
                grid,
                radius,
                degraded_radius,
                degraded_prob,
                horizon,
                seed,
            } => intermittent(grid, radius, degraded_radius, degraded_prob, horizon, seed)?,
            ScenarioSpec::Quantized {
                grid,
                radius,
                cell,
                horizon,
                seed,
            } => quantized(grid, radius, cell, horizon, seed)?,
            ScenarioSpec::Adaptive {
                positions,
                params,
                horizon,
                seed,
                lip_cost,
                lip_dyn,
            } => adaptive(positions, params, horizon, seed, lip_cost, lip_dyn)?,
            ScenarioSpec::EventTriggered {
                grid,
                threshold,
                horizon,
                seed,
            } => event_triggered(grid, threshold, horizon, seed)?,
            ScenarioSpec::MeanField {
                particles,
                grid,
                horizon,
                seed,
                ref noise_steps,
                ref weights,
                beta,
                lip_mean_cost,
                lip_mean_dyn,
                ref gammas,
            } => mean_field(MeanFieldParams {
                particles,
                grid,
                horizon,
                seed,
                noise_steps: noise_steps.clone(),
                weights: weights.clone(),
                beta,
                lip_mean_cost,
                lip_mean_dyn,
                gammas: gammas.clone(),
            })?,
            ScenarioSpec::Random {
                states,
                observations,
                actions,
                horizon,
                seed,
                variant,
            } => random_instance(seed, (states, observations, actions, horizon), variant)?,
        };
        // Every instance passes the type invariants before release; Pomdp /
        // Abstraction constructors enforce them, this re-checks the metric.
        let violations =
            crate::spaces::validate_metric(sc.pomdp.space().matrix(), crate::DEFAULT_TOL);
        if !violations.is_empty() {
            return Err(Error::InvalidMetric(violations));
        }
        Ok(sc)
    }
}

// ---------------------------------------------------------------------------
// Ring-world machinery shared by the observation-noise families.
// ---------------------------------------------------------------------------

struct RingWorld {
    n: usize,
    horizon: usize,
    /// `state_dyn[s][a]` over next states.
    state_dyn: Vec<Vec<Vec<f64>>>,
    costs: Vec<Vec<Vec<f64>>>,
    start: usize,
}

const RING_ACTIONS: usize = 2;

fn ring_world(n: usize, horizon: usize, seed: u64) -> Result<RingWorld> {
    if n < 3 || horizon == 0 {
        return Err(Error::InfeasibleSpec(format!(
            "ring world needs grid ≥ 3 and horizon ≥ 1, got grid {n}, horizon {horizon}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let goal = rng.gen_range(0..n);
    let weight = rng.gen_range(0.5..1.5);
    let action_cost: Vec<f64> = (0..RING_ACTIONS).map(|_| rng.gen_range(0.0..0.2)).collect();
    let stay = rng.gen_range(0.4..0.8);
    let side = (1.0 - stay) / 2.0;

    let ring = MetricSpace::ring(n, 1.0);
    let mut state_dyn = vec![vec![vec![0.0f64; n]; RING_ACTIONS]; n];
    for s in 0..n {
        for a in 0..RING_ACTIONS {
            let shift: isize = if a == 0 { -1 } else { 1 };
            let base = (s as isize + shift).rem_euclid(n as isize) as usize;
            state_dyn[s][a][base] += stay;
            state_dyn[s][a][(base + 1) % n] += side;
            state_dyn[s][a][(base + n - 1) % n] += side;
        }
    }
    let cost_row: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            (0..RING_ACTIONS)
                .map(|a| weight * ring.dist(s, goal) + action_cost[a])
                .collect()
        })
        .collect();
    Ok(RingWorld {
        n,
        horizon,
        state_dyn,
        costs: vec![cost_row; horizon],
        start: rng.gen_range(0..n),
    })
}

/// Observation channel on the ring: a list of (offset, probability) pairs
/// applied to the realized next state.
fn ring_channel(offsets: &[(isize, f64)], n: usize, s: usize) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for &(off, p) in offsets {
        if p == 0.0 {
            continue;
        }
        let y = (s as isize + off).rem_euclid(n as isize) as usize;
        match out.iter_mut().find(|(yy, _)| *yy == y) {
            Some((_, q)) => *q += p,
            None => out.push((y, p)),
        }
    }
    out
}

fn ring_pomdp(world: &RingWorld, offsets: &[(isize, f64)]) -> Result<Pomdp> {
    let n = world.n;
    let mut xi = vec![0.0f64; n * n];
    for (y, p) in ring_channel(offsets, n, world.start) {
        xi[world.start * n + y] += p;
    }
    let kernels = (0..world.horizon - 1)
        .map(|_| {
            Kernel::new(
                (0..n)
                    .map(|s| {
                        (0..RING_ACTIONS)
                            .map(|a| {
                                let mut joint = vec![0.0f64; n * n];
                                for (s2, &p) in world.state_dyn[s][a].iter().enumerate() {
                                    if p == 0.0 {
                                        continue;
                                    }
                                    for (y, q) in ring_channel(offsets, n, s2) {
                                        joint[s2 * n + y] += p * q;
                                    }
                                }
                                Dist::new(joint)
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Pomdp::new(
        MetricSpace::ring(n, 1.0),
        n,
        RING_ACTIONS,
        Dist::new(xi)?,
        kernels,
        world.costs.clone(),
    )
}

fn noise_offsets(radius: usize) -> Vec<(isize, f64)> {
    if radius == 0 {
        vec![(0, 1.0)]
    } else {
        vec![(-(radius as isize), 0.5), (radius as isize, 0.5)]
    }
}

/// Bounded observation noise: `Y = S`, `d(Y_t, S_t) = r` almost surely.
pub fn bounded_noise(grid: usize, radius: usize, horizon: usize, seed: u64) -> Result<Scenario> {
    if 2 * radius > grid {
        return Err(Error::InfeasibleSpec(format!(
            "noise radius {radius} exceeds ring {grid} half-diameter"
        )));
    }
    let world = ring_world(grid, horizon, seed)?;
    let pomdp = ring_pomdp(&world, &noise_offsets(radius))?;
    let abstraction = Abstraction::identity(pomdp.space());
    let estimator = Estimator::LastObservation {
        map: (0..grid).collect(),
    };
    Ok(Scenario {
        label: format!("bounded_noise_n{grid}_r{radius}_T{horizon}_s{seed}"),
        family: "bounded_noise",
        pomdp,
        abstraction,
        estimator,
        closed_form: Some(ClosedForm {
            eta_ceiling: radius as f64,
            moduli: None,
            moduli_slack: (0.0, 0.0),
        }),
        notes: vec![format!("observation distance is exactly r = {radius}")],
        bound_only: false,
        mean_field: None,
    })
}

/// Intermittently degraded observations: good radius `r` w.p. `1−p`, degraded
/// radius `R` w.p. `p`.
pub fn intermittent(
    grid: usize,
    radius: usize,
    degraded_radius: usize,
    degraded_prob: f64,
    horizon: usize,
    seed: u64,
) -> Result<Scenario> {
    if radius > degraded_radius {
        return Err(Error::InfeasibleSpec(format!(
            "need r ≤ R, got r = {radius}, R = {degraded_radius}"
        )));
    }
    if !(0.0..=1.0).contains(&degraded_prob) {
        return Err(Error::InfeasibleSpec(format!(
            "degraded probability {degraded_prob} outside [0, 1]"
        )));
    }
    if 2 * degraded_radius > grid {
        return Err(Error::InfeasibleSpec(format!(
            "degraded radius {degraded_radius} exceeds ring {grid} half-diameter"
        )));
    }
    let world = ring_world(grid, horizon, seed)?;
    let p = degraded_prob;
    let mut offsets: Vec<(isize, f64)> = noise_offsets(radius)
        .into_iter()
        .map(|(o, q)| (o, q * (1.0 - p)))
        .collect();
    offsets.extend(
        noise_offsets(degraded_radius)
            .into_iter()
            .map(|(o, q)| (o, q * p)),
    );
    let pomdp = ring_pomdp(&world, &offsets)?;
    let abstraction = Abstraction::identity(pomdp.space());
    let estimator = Estimator::LastObservation {
        map: (0..grid).collect(),
    };
    let ceiling = (1.0 - p) * radius as f64 + p * degraded_radius as f64;
    Ok(Scenario {
        label: format!("intermittent_n{grid}_r{radius}_R{degraded_radius}_p{p}_T{horizon}_s{seed}"),
        family: "intermittent",
        pomdp,
        abstraction,
        estimator,
        closed_form: Some(ClosedForm {
            eta_ceiling: ceiling,
            moduli: None,
            moduli_slack: (0.0, 0.0),
        }),
        notes: vec![format!(
            "eta ceiling (1-p)r + pR = {ceiling}; posterior degraded-event probability \
             at a specific history may exceed p, so the ceiling is reported, not asserted"
        )],
        bound_only: false,
        mean_field: None,
    })
}

/// Bounded noise plus state quantization into contiguous cells with Dirac
/// liftings at representatives; estimator quantizes the last observation.
pub fn quantized(
    grid: usize,
    radius: usize,
    cell: usize,
    horizon: usize,
    seed: u64,
) -> Result<Scenario> {
    if cell == 0 || cell > grid {
        return Err(Error::InfeasibleSpec(format!(
            "cell size {cell} invalid for grid {grid}"
        )));
    }
    let base = bounded_noise(grid, radius, horizon, seed)?;
    let k = grid.div_ceil(cell);
    let phi: Vec<usize> = (0..grid).map(|s| (s / cell).min(k - 1)).collect();
    let reps: Vec<usize> = (0..k)
        .map(|j| {
            let lo = j * cell;
            let hi = ((j + 1) * cell).min(grid);
            lo + (hi - lo - 1) / 2
        })
        .collect();
    let source = base.pomdp.space().clone();
    let target = source.restrict(&reps)?;
    let abstraction = Abstraction::dirac(grid, target, phi.clone(), &reps)?;
    let max_cell_radius = (0..grid)
        .map(|s| source.dist(s, reps[phi[s]]))
        .fold(0.0f64, f64::max);
    let estimator = Estimator::LastObservation { map: phi.clone() };
    let ceiling = radius as f64 + 2.0 * max_cell_radius;
    Ok(Scenario {
        label: format!("quantized_n{grid}_r{radius}_c{cell}_T{horizon}_s{seed}"),
        family: "quantized",
        pomdp: base.pomdp,
        abstraction,
        estimator,
        closed_form: Some(ClosedForm {
            eta_ceiling: ceiling,
            moduli: None,
            moduli_slack: (0.0, 0.0),
        }),
        notes: vec![format!(
            "max cell radius R = {max_cell_radius}; eta ceiling r + 2R = {ceiling}"
        )],
        bound_only: false,
        mean_field: None,
    })
}

// ---------------------------------------------------------------------------
// Adaptive control: unknown parameter observed through realized costs.
// ---------------------------------------------------------------------------

/// State `(x, θ)` on a position grid with `params` parameter values; the
/// observation at `t+1` is `(x_{t+1}, ℓ_θ(x_t, a_t))`. Costs separate the
/// parameter values, so one observed cost identifies θ.
pub fn adaptive(
    positions: usize,
    params: usize,
    horizon: usize,
    seed: u64,
    lip_cost: f64,
    lip_dyn: f64,
) -> Result<Scenario> {
    if positions < 2 || params < 1 || horizon == 0 {
        return Err(Error::InfeasibleSpec(
            "adaptive needs ≥ 2 positions, ≥ 1 parameter value, horizon ≥ 1".into(),
        ));
    }
    if lip_dyn < 1.0 || lip_cost <= 0.0 {
        return Err(Error::InfeasibleSpec(format!(
            "targets must satisfy lip_dyn ≥ 1 (position part is 1-Lipschitz) and \
             lip_cost > 0; got lip_dyn = {lip_dyn}, lip_cost = {lip_cost}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = positions;
    let nth = params;
    let na = 2usize;
    let ns = nx * nth;
    let sid = |x: usize, j: usize| x * nth + j;

    // Sum metric d((x,θ),(x',θ')) = |x−x'| + |θ−θ'|.
    let dist: Vec<Vec<f64>> = (0..ns)
        .map(|s| {
            (0..ns)
                .map(|s2| {
                    let (x, j) = (s / nth, s % nth);
                    let (x2, j2) = (s2 / nth, s2 % nth);
                    (x as f64 - x2 as f64).abs() + (j as f64 - j2 as f64).abs()
                })
                .collect()
        })
        .collect();
    let space = MetricSpace::from_matrix(dist)?;

    // Costs: w_c·|x − g_a| + v_c·m_a·θ, jointly Lipschitz ≤ lip_cost/2.
    let w_c = 0.5 * lip_cost;
    let v_c = 0.25 * lip_cost;
    let goals: Vec<usize> = (0..na).map(|_| rng.gen_range(0..nx)).collect();
    let mults = [1.0f64, 2.0];
    let step_cost = |x: usize, j: usize, a: usize| {
        w_c * (x as f64 - goals[a] as f64).abs() + v_c * mults[a] * j as f64
    };

    // Dynamics: deterministic shift plus a θ-dependent extra push. The extra
    // mixing weight has slope ≤ (lip_dyn − 1) in θ, keeping the joint W1
    // Lipschitz constant at or below lip_dyn.
    let kappa1 = (lip_dyn - 1.0).min(0.6);
    let kappa = |j: usize| 0.2 + kappa1 * j as f64 / (nth.max(2) - 1) as f64;
    let clampx = |v: isize| v.clamp(0, nx as isize - 1) as usize;
    let next_positions = |x: usize, j: usize, a: usize| -> Vec<(usize, f64)> {
        let shift: isize = if a == 0 { -1 } else { 1 };
        let base = clampx(x as isize + shift);
        let pushed = clampx(base as isize + 1);
        let k = kappa(j);
        let mut out = vec![(base, 1.0 - k)];
        if pushed == base {
            out[0].1 += k;
        } else {
            out.push((pushed, k));
        }
        out
    };

    // Observation alphabet: position × (distinct attainable costs + dummy).
    let mut costvals: Vec<f64> = Vec::new();
    for x in 0..nx {
        for j in 0..nth {
            for a in 0..na {
                let c = step_cost(x, j, a);
                if !costvals.contains(&c) {
                    costvals.push(c);
                }
            }
        }
    }
    costvals.sort_by(f64::total_cmp);
    let ncost = costvals.len();
    let dummy = ncost; // index of the "no previous cost" symbol
    let ny = nx * (ncost + 1);
    let yid = |x: usize, c: usize| x * (ncost + 1) + c;
    let costidx = |c: f64| costvals.iter().position(|&v| v == c).expect("enumerated");

    // Initial law: fixed start position, seeded prior over θ, dummy cost.
    let x0 = nx / 2;
    let prior = Dist::normalized(
        (0..nth)
            .map(|_| rng.gen_range(0.2..1.0))
            .collect::<Vec<_>>(),
    )?;
    let mut xi = vec![0.0f64; ns * ny];
    for j in 0..nth {
        xi[sid(x0, j) * ny + yid(x0, dummy)] = prior.mass(j);
    }

    let costs: Vec<Vec<Vec<f64>>> = (0..horizon)
        .map(|_| {
            (0..ns)
                .map(|s| (0..na).map(|a| step_cost(s / nth, s % nth, a)).collect())
                .collect()
        })
        .collect();

    let kernels = (0..horizon.saturating_sub(1))
        .map(|_| {
            Kernel::new(
                (0..ns)
                    .map(|s| {
                        let (x, j) = (s / nth, s % nth);
                        (0..na)
                            .map(|a| {
                                let mut joint = vec![0.0f64; ns * ny];
                                let cobs = costidx(step_cost(x, j, a));
                                for (x2, p) in next_positions(x, j, a) {
                                    joint[sid(x2, j) * ny + yid(x2, cobs)] += p;
                                }
                                Dist::new(joint)
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let pomdp = Pomdp::new(space, ny, na, Dist::new(xi)?, kernels, costs)?;
    let abstraction = Abstraction::identity(pomdp.space());

    // Report fitted constants next to the construction targets.
    let m = pomdp.induced_mdp()?;
    let (lc, lp) = linear_constants(&m)?;
    let notes = vec![
        format!("target joint Lipschitz constants: cost {lip_cost}, dynamics {lip_dyn}"),
        format!("fitted cost constants per stage: {lc:?}"),
        format!("fitted dynamics constants per stage: {lp:?}"),
    ];

    Ok(Scenario {
        label: format!("adaptive_x{nx}_th{nth}_T{horizon}_s{seed}"),
        family: "adaptive",
        pomdp,
        abstraction,
        estimator: Estimator::MapPosterior,
        closed_form: None,
        notes,
        bound_only: false,
        mean_field: None,
    })
}

// ---------------------------------------------------------------------------
// Event-triggered communication.
// ---------------------------------------------------------------------------

/// Plant on a line; the sensor transmits the state only when it differs from
/// the controller's predicted estimate by more than `threshold`.
pub fn event_triggered(
    grid: usize,
    threshold: usize,
    horizon: usize,
    seed: u64,
) -> Result<Scenario> {
    if grid < 2 || horizon == 0 {
        return Err(Error::InfeasibleSpec(
            "event_triggered needs grid ≥ 2 and horizon ≥ 1".into(),
        ));
    }
    if threshold >= grid {
        return Err(Error::InfeasibleSpec(format!(
            "threshold {threshold} never triggers on a grid of {grid} points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = grid;
    let ns = nx * nx; // (x, predicted estimate)
    let ny = nx + 1; // positions + null symbol
    let null_obs = nx;
    let na = 2usize;
    let r = threshold as f64;
    let sid = |x: usize, xp: usize| x * nx + xp;

    let line = MetricSpace::line(nx, 1.0);
    let dist: Vec<Vec<f64>> = (0..ns)
        .map(|s| {
            (0..ns)
                .map(|s2| line.dist(s / nx, s2 / nx) + line.dist(s % nx, s2 % nx))
                .collect()
        })
        .collect();
    let space = MetricSpace::from_matrix(dist)?;

    let clampx = |v: isize| v.clamp(0, nx as isize - 1) as usize;
    let dir = |a: usize| if a == 0 { -1isize } else { 1 };
    let stay = rng.gen_range(0.5..0.8);
    let side = (1.0 - stay) / 2.0;
    let plant = |x: usize, a: usize| -> Vec<(usize, f64)> {
        let base = clampx(x as isize + dir(a));
        let mut out: Vec<(usize, f64)> = Vec::new();
        for (x2, p) in [
            (base, stay),
            (clampx(base as isize + 1), side),
            (clampx(base as isize - 1), side),
        ] {
            match out.iter_mut().find(|(xx, _)| *xx == x2) {
                Some((_, q)) => *q += p,
                None => out.push((x2, p)),
            }
        }
        out
    };
    // Prediction advances the estimate by the action's deterministic shift.
    let predict: Vec<Vec<usize>> = (0..nx)
        .map(|xp| (0..na).map(|a| clampx(xp as isize + dir(a))).collect())
        .collect();

    let goal = rng.gen_range(0..nx);
    let weight = rng.gen_range(0.5..1.5);
    let action_cost: Vec<f64> = (0..na).map(|_| rng.gen_range(0.0..0.2)).collect();
    let costs: Vec<Vec<Vec<f64>>> = (0..horizon)
        .map(|_| {
            (0..ns)
                .map(|s| {
                    (0..na)
                        .map(|a| weight * line.dist(s / nx, goal) + action_cost[a])
                        .collect()
                })
                .collect()
        })
        .collect();

    // Initial law: X_1 uniform over the middle band, x̂_{1|0} = round E[X_1].
    let band: Vec<usize> = (nx / 3..=(2 * nx) / 3).collect();
    let mean: f64 = band.iter().map(|&x| x as f64).sum::<f64>() / band.len() as f64;
    let xhat10 = mean.round() as usize;
    let mut xi = vec![0.0f64; ns * ny];
    for &x1 in &band {
        let y = if line.dist(x1, xhat10) > r {
            x1
        } else {
            null_obs
        };
        xi[sid(x1, xhat10) * ny + y] += 1.0 / band.len() as f64;
    }

    let kernels = (0..horizon.saturating_sub(1))
        .map(|_| {
            Kernel::new(
                (0..ns)
                    .map(|s| {
                        let (x, xp) = (s / nx, s % nx);
                        (0..na)
                            .map(|a| {
                                // The sensor transmitted at the current step iff
                                // d(x, x̂_{t|t−1}) > r; the controller's filtered
                                // estimate feeds the prediction.
                                let xf = if line.dist(x, xp) > r { x } else { xp };
                                let xp2 = predict[xf][a];
                                let mut joint = vec![0.0f64; ns * ny];
                                for (x2, p) in plant(x, a) {
                                    let y2 = if line.dist(x2, xp2) > r { x2 } else { null_obs };
                                    joint[sid(x2, xp2) * ny + y2] += p;
                                }
                                Dist::new(joint)
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let pomdp = Pomdp::new(space, ny, na, Dist::new(xi)?, kernels, costs)?;

    // Abstraction projects to the plant state; Dirac lifting at (x, x).
    let phi: Vec<usize> = (0..ns).map(|s| s / nx).collect();
    let reps: Vec<usize> = (0..nx).map(|x| sid(x, x)).collect();
    let abstraction = Abstraction::dirac(ns, line.clone(), phi, &reps)?;

    let estimator = Estimator::Recursive(RecursiveRule {
        initial: xhat10,
        null_obs,
        obs_map: (0..nx).collect(),
        predict,
    });

    Ok(Scenario {
        label: format!("event_triggered_n{nx}_r{threshold}_T{horizon}_s{seed}"),
        family: "event_triggered",
        pomdp,
        abstraction,
        estimator,
        closed_form: Some(ClosedForm {
            eta_ceiling: r,
            moduli: None,
            moduli_slack: (0.0, 0.0),
        }),
        notes: vec![format!(
            "transmission rule: send iff d(x_t, x̂_t|t-1) > {threshold}; filtered error ≤ {threshold}"
        )],
        bound_only: false,
        mean_field: None,
    })
}

// ---------------------------------------------------------------------------
// Non-homogeneous multi-particle (mean-field coupled) system.
// ---------------------------------------------------------------------------

struct MeanFieldParams {
    particles: usize,
    grid: usize,
    horizon: usize,
    seed: u64,
    noise_steps: Option<Vec<usize>>,
    weights: Option<Vec<f64>>,
    beta: f64,
    lip_mean_cost: f64,
    lip_mean_dyn: f64,
    gammas: Option<Vec<f64>>,
}

/// `n` particles on a 1-D grid, coupled through the weighted mean of the
/// global state; observation is the state plus bounded per-particle noise.
fn mean_field(p: MeanFieldParams) -> Result<Scenario> {
    let n = p.particles;
    let m = p.grid;
    let horizon = p.horizon;
    if n == 0 || m < 3 || horizon == 0 {
        return Err(Error::InfeasibleSpec(
            "mean_field needs ≥ 1 particle, grid ≥ 3, horizon ≥ 1".into(),
        ));
    }
    let ns = m
        .checked_pow(n as u32)
        .filter(|&v| v <= 700)
        .ok_or_else(|| {
            Error::InfeasibleSpec(format!(
                "grid^particles = {m}^{n} is too large to materialize"
            ))
        })?;
    if p.lip_mean_dyn <= 0.0 || p.lip_mean_dyn > 1.0 {
        return Err(Error::InfeasibleSpec(
            "lip_mean_dyn must lie in (0, 1] (the mean map is a clamped affine contraction)".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let h = 1.0f64;
    let top = (m - 1) as f64 * h;

    let alpha = match p.weights {
        Some(w) => {
            if w.len() != n || w.iter().any(|&x| x < 0.0) {
                return Err(Error::InfeasibleSpec(
                    "weights must be n non-negative reals".into(),
                ));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InfeasibleSpec(format!(
                    "weights sum to {total}, expected 1"
                )));
            }
            w
        }
        None => {
            // Non-homogeneous by default: seeded positive weights.
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / total).collect()
        }
    };
    let noise_steps = p.noise_steps.unwrap_or_else(|| vec![1; n]);
    if noise_steps.len() != n || noise_steps.iter().any(|&r| r >= m) {
        return Err(Error::InfeasibleSpec(
            "noise radii must be n grid-step counts below the grid size".into(),
        ));
    }
    let gammas = p
        .gammas
        .unwrap_or_else(|| (0..n).map(|_| 0.25 * h).collect());
    if gammas.len() != n || gammas.iter().any(|&g| g < 0.0) {
        return Err(Error::InfeasibleSpec(
            "gammas must be n non-negative reals".into(),
        ));
    }

    let val = |k: usize| k as f64 * h;
    let idx = |x: &[usize]| -> usize { x.iter().fold(0, |acc, &xi| acc * m + xi) };
    let unidx = |mut s: usize| -> Vec<usize> {
        let mut out = vec![0usize; n];
        for i in (0..n).rev() {
            out[i] = s % m;
            s /= m;
        }
        out
    };
    let mean_of = |x: &[usize]| -> f64 { x.iter().zip(&alpha).map(|(&xi, a)| a * val(xi)).sum() };
    let snap = |u: f64| -> usize { (u.clamp(0.0, top) / h).round() as usize };

    // Metric on tuples: sum of coordinate distances (exact integers).
    let dist: Vec<Vec<f64>> = (0..ns)
        .map(|s| {
            let xs = unidx(s);
            (0..ns)
                .map(|s2| {
                    let ys = unidx(s2);
                    xs.iter()
                        .zip(&ys)
                        .map(|(&a, &b)| (val(a) - val(b)).abs())
                        .sum()
                })
                .collect()
        })
        .collect();
    let space = MetricSpace::from_matrix(dist)?;

    // Shared noise and actions.
    let w_support = [-h, 0.0, h];
    let w_probs = vec![0.25, 0.5, 0.25];
    let na = 2usize;
    let push = [-0.6 * h, 0.6 * h];
    let anchor = top / 2.0;
    let lf = p.lip_mean_dyn;
    let mean_map =
        |mv: f64, a: usize, w: f64| (anchor + lf * (mv - anchor) + push[a] + w).clamp(0.0, top);
    // Local term, bounded by gamma_i; the final clamp keeps the effective
    // local term within the same bound (it only moves values toward range).
    let local = |xs: &[usize], i: usize| -> f64 {
        gammas[i] * (((val(xs[i]) - mean_of(xs)) / top) * 2.0).clamp(-1.0, 1.0)
    };
    let next_state = |xs: &[usize], a: usize, w: f64| -> Vec<usize> {
        let fbar = mean_map(mean_of(xs), a, w);
        (0..n)
            .map(|i| snap((fbar + local(xs, i)).clamp(0.0, top)))
            .collect()
    };

    // Costs: mean-coupled Lipschitz part plus a bounded local part.
    let l_lbar = p.lip_mean_cost;
    let beta = p.beta;
    let goal = [anchor - 0.5 * h, anchor + 0.5 * h];
    let step_cost = |xs: &[usize], a: usize| -> f64 {
        let mv = mean_of(xs);
        let bounded = if n >= 2 {
            ((val(xs[0]) - val(xs[n - 1])) / top * 2.0).clamp(-1.0, 1.0)
        } else {
            ((val(xs[0]) - anchor) / top * 2.0).clamp(-1.0, 1.0)
        };
        l_lbar * (mv - goal[a]).abs() + beta * bounded
    };

    // Observation: per-particle uniform noise over {−r_i, 0, +r_i} steps,
    // clamped to the grid (clamping only shrinks the error).
    let obs_options: Vec<Vec<isize>> = noise_steps
        .iter()
        .map(|&r| {
            if r == 0 {
                vec![0]
            } else {
                vec![-(r as isize), 0, r as isize]
            }
        })
        .collect();
    let obs_channel = |xs: &[usize]| -> Vec<(usize, f64)> {
        let mut combos: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
        for (i, opts) in obs_options.iter().enumerate() {
            let mut next = Vec::with_capacity(combos.len() * opts.len());
            for (prefix, q) in &combos {
                for &o in opts {
                    let yi = (xs[i] as isize + o).clamp(0, m as isize - 1) as usize;
                    let mut v = prefix.clone();
                    v.push(yi);
                    next.push((v, q / opts.len() as f64));
                }
            }
            combos = next;
        }
        let mut out: Vec<(usize, f64)> = Vec::new();
        for (ys, q) in combos {
            let y = idx(&ys);
            match out.iter_mut().find(|(yy, _)| *yy == y) {
                Some((_, acc)) => *acc += q,
                None => out.push((y, q)),
            }
        }
        out
    };

    let ny = ns;
    let x1 = {
        let tuple: Vec<usize> = (0..n).map(|_| rng.gen_range(0..m)).collect();
        tuple
    };
    let mut xi = vec![0.0f64; ns * ny];
    for (y, q) in obs_channel(&x1) {
        xi[idx(&x1) * ny + y] += q;
    }

    let costs: Vec<Vec<Vec<f64>>> = (0..horizon)
        .map(|_| {
            (0..ns)
                .map(|s| {
                    let xs = unidx(s);
                    (0..na).map(|a| step_cost(&xs, a)).collect()
                })
                .collect()
        })
        .collect();

    let kernels = (0..horizon.saturating_sub(1))
        .map(|_| {
            Kernel::new(
                (0..ns)
                    .map(|s| {
                        let xs = unidx(s);
                        (0..na)
                            .map(|a| {
                                let mut joint = vec![0.0f64; ns * ny];
                                for (wi, &w) in w_support.iter().enumerate() {
                                    let xs2 = next_state(&xs, a, w);
                                    let s2 = idx(&xs2);
                                    for (y, q) in obs_channel(&xs2) {
                                        joint[s2 * ny + y] += w_probs[wi] * q;
                                    }
                                }
                                Dist::new(joint)
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let pomdp = Pomdp::new(space, ny, na, Dist::new(xi)?, kernels, costs)?;

    // Abstraction: snapped weighted mean; Dirac lifting at the diagonal.
    let target = MetricSpace::line(m, h);
    let phi: Vec<usize> = (0..ns).map(|s| snap(mean_of(&unidx(s)))).collect();
    let reps: Vec<usize> = (0..m).map(|k| idx(&vec![k; n])).collect();
    let abstraction = Abstraction::dirac(ns, target, phi, &reps)?;

    // Estimator: snapped weighted mean of the last observation.
    let est_map: Vec<usize> = (0..ny).map(|y| snap(mean_of(&unidx(y)))).collect();
    let estimator = Estimator::LastObservation { map: est_map };

    let rbar: f64 = alpha
        .iter()
        .zip(&noise_steps)
        .map(|(a, &r)| a * r as f64 * h)
        .sum();
    let gbar: f64 = alpha.iter().zip(&gammas).map(|(a, &g)| a * g).sum();
    // Snapping the state and the estimate each contribute at most h/2.
    let eta_ceiling = rbar + h;
    let closed_fc = Modulus::affine(2.0 * beta, l_lbar);
    let closed_fp = Modulus::affine(2.0 * gbar, lf);
    let slack = (l_lbar * h, lf * h + 2.0 * h);

    // Deterministic next-abstract table from fiber representatives, for the
    // shared-noise coupling check.
    let next_abstract: Vec<Vec<Vec<usize>>> = (0..m)
        .map(|cell| {
            let rep = vec![cell; n];
            (0..na)
                .map(|a| {
                    w_support
                        .iter()
                        .map(|&w| snap(mean_of(&next_state(&rep, a, w))))
                        .collect()
                })
                .collect()
        })
        .collect();

    let bound_only = n > 3;
    Ok(Scenario {
        label: format!("mean_field_p{n}_m{m}_T{horizon}_s{}", p.seed),
        family: "mean_field",
        pomdp,
        abstraction,
        estimator,
        closed_form: Some(ClosedForm {
            eta_ceiling,
            moduli: Some((closed_fc, closed_fp)),
            moduli_slack: slack,
        }),
        notes: vec![
            format!("weights alpha = {alpha:?}, rbar = {rbar}, gbar = {gbar}"),
            format!(
                "closed-form moduli: F^c(x) = {l_lbar}·x + {}, F^P(x) = {lf}·x + {}; \
                 discretization slack ({}, {}) from grid spacing {h}",
                2.0 * beta,
                2.0 * gbar,
                slack.0,
                slack.1
            ),
            format!("eta ceiling rbar + h = {eta_ceiling}"),
        ],
        bound_only,
        mean_field: Some(MeanFieldData {
            h,
            alpha,
            rbar,
            gbar,
            lip_mean_cost: l_lbar,
            lip_mean_dyn: lf,
            beta,
            w_probs,
            next_abstract,
        }),
    })
}

/// Simplified closed-form α for the mean-field family (0-based `t`):
/// `(T−t)·(L^ℓ̄·r̄ + 2β) + (L^f̄·r̄ + 2γ̄)·Σ_{τ=t}^{T−2} Lip(Ṽ_{τ+1})`.
///
/// This drops the η_{τ+1} contribution to δ_τ, so it sits below the full α
/// by exactly `r̄·Σ Lip(Ṽ_{τ+1})` when η ≡ r̄; the verification pipeline
/// always uses the full α, this helper exists for comparison.
pub fn mean_field_closed_form_alpha(
    t: usize,
    horizon: usize,
    data: &MeanFieldData,
    lip_v: &[f64],
) -> f64 {
    let eps = data.lip_mean_cost * data.rbar + 2.0 * data.beta;
    let delta = data.lip_mean_dyn * data.rbar + 2.0 * data.gbar;
    let lips: f64 = (t..horizon.saturating_sub(1))
        .map(|tau| lip_v[tau + 1])
        .sum();
    (horizon - t) as f64 * eps + delta * lips
}

// ---------------------------------------------------------------------------
// Random instances for the verification suite.
// ---------------------------------------------------------------------------

/// Seeded random POMDP with one of five estimator/abstraction variants:
///
/// 0. identity abstraction + posterior mode;
/// 1. identity abstraction + posterior median representative;
/// 2. random fibering, Dirac liftings + posterior mode;
/// 3. random fibering, uniform liftings + random observation map;
/// 4. identity abstraction + constant estimate.
pub fn random_instance(
    seed: u64,
    sizes: (usize, usize, usize, usize),
    variant: usize,
) -> Result<Scenario> {
    let (ns, ny, na, horizon) = sizes;
    if ns == 0 || ny == 0 || na == 0 || horizon == 0 {
        return Err(Error::InfeasibleSpec("all sizes must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Shortest-path closure of random positive edge weights: triangle
    // inequality by construction, distinct points stay separated.
    let mut d = vec![vec![0.0f64; ns]; ns];
    for i in 0..ns {
        for j in (i + 1)..ns {
            let w = rng.gen_range(0.3..1.5);
            d[i][j] = w;
            d[j][i] = w;
        }
    }
    for k in 0..ns {
        for i in 0..ns {
            for j in 0..ns {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                    d[j][i] = via;
                }
            }
        }
    }
    let space = MetricSpace::from_matrix(d)?;

    let initial = Dist::normalized((0..ns * ny).map(|_| rng.gen_range(0.05..1.0)).collect())?;
    let kernels = (0..horizon.saturating_sub(1))
        .map(|_| {
            Kernel::new(
                (0..ns)
                    .map(|_| {
                        (0..na)
                            .map(|_| {
                                Dist::normalized(
                                    (0..ns * ny).map(|_| rng.gen_range(0.05..1.0)).collect(),
                                )
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let costs = (0..horizon)
        .map(|_| {
            (0..ns)
                .map(|_| (0..na).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect()
        })
        .collect();
    let pomdp = Pomdp::new(space.clone(), ny, na, initial, kernels, costs)?;

    // Random surjective fibering with representatives.
    let mut fiber_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let k = fiber_rng.gen_range(1..=ns);
    let mut order: Vec<usize> = (0..ns).collect();
    for i in (1..ns).rev() {
        let j = fiber_rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut phi = vec![0usize; ns];
    for (cell, &s) in order.iter().take(k).enumerate() {
        phi[s] = cell;
    }
    for &s in order.iter().skip(k) {
        phi[s] = fiber_rng.gen_range(0..k);
    }
    let reps: Vec<usize> = order[..k].to_vec();
    let target = space.restrict(&reps)?;

    let (abstraction, estimator) = match variant % 5 {
        0 => (Abstraction::identity(&space), Estimator::MapPosterior),
        1 => (Abstraction::identity(&space), Estimator::BeliefMedian),
        2 => (
            Abstraction::dirac(ns, target, phi, &reps)?,
            Estimator::MapPosterior,
        ),
        3 => (
            Abstraction::uniform(ns, target, phi)?,
            Estimator::LastObservation {
                map: (0..ny).map(|_| fiber_rng.gen_range(0..k)).collect(),
            },
        ),
        _ => (
            Abstraction::identity(&space),
            Estimator::Constant(fiber_rng.gen_range(0..ns)),
        ),
    };

    Ok(Scenario {
        label: format!("random_s{ns}_y{ny}_a{na}_T{horizon}_seed{seed}_v{variant}"),
        family: "random",
        pomdp,
        abstraction,
        estimator,
        closed_form: None,
        notes: Vec::new(),
        bound_only: false,
        mean_field: None,
    })
}

// ---------------------------------------------------------------------------
// Observation-channel transforms used by the oracle cross-validation.
// ---------------------------------------------------------------------------

/// Fully-observed variant: replace the observation channel with `Y_t = S_t`.
/// Returns the POMDP together with the matching perfect estimator.
pub fn fully_observed_variant(p: &Pomdp) -> Result<(Pomdp, Estimator)> {
    let m = p.induced_mdp()?;
    let ns = m.n_states();
    let mut xi = vec![0.0f64; ns * ns];
    for s in 0..ns {
        xi[s * ns + s] = p.initial_state_mass(s);
    }
    let kernels = (0..m.horizon().saturating_sub(1))
        .map(|t| {
            Kernel::new(
                (0..ns)
                    .map(|s| {
                        (0..m.n_actions())
                            .map(|a| {
                                let mut joint = vec![0.0f64; ns * ns];
                                for (s2, &q) in m.transition(t, s, a).masses().iter().enumerate() {
                                    joint[s2 * ns + s2] = q;
                                }
                                Dist::new(joint)
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let pomdp = Pomdp::new(
        m.space().clone(),
        ns,
        m.n_actions(),
        Dist::new(xi)?,
        kernels,
        m.costs().to_vec(),
    )?;
    let estimator = Estimator::LastObservation {
        map: (0..ns).collect(),
    };
    Ok((pomdp, estimator))
}

/// Uninformative variant: collapse the observation alphabet to a single
/// symbol, keeping the state dynamics.
pub fn uninformative_variant(p: &Pomdp) -> Result<Pomdp> {
    let m = p.induced_mdp()?;
    let ns = m.n_states();
    let xi: Vec<f64> = (0..ns).map(|s| p.initial_state_mass(s)).collect();
    let kernels = (0..m.horizon().saturating_sub(1))
        .map(|t| {
            Kernel::new(
                (0..ns)
                    .map(|s| {
                        (0..m.n_actions())
                            .map(|a| Ok(m.transition(t, s, a).clone()))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Pomdp::new(
        m.space().clone(),
        1,
        m.n_actions(),
        Dist::new(xi)?,
        kernels,
        m.costs().to_vec(),
    )
}

// ---------------------------------------------------------------------------
// Bound-only reporting for instances beyond the exact oracle.
// ---------------------------------------------------------------------------

/// Assemble the bound from the family's η ceiling and fitted moduli, and pair
/// it with a Monte-Carlo estimate of the certainty-equivalent policy's value.
/// Used when the history tree is out of budget (mean-field with n > 3).
pub fn bound_only_report(
    sc: &Scenario,
    kind: ModuliKind,
    episodes: usize,
    seed: u64,
) -> Result<BoundReport> {
    let eta_ceiling = sc
        .closed_form
        .as_ref()
        .map(|c| c.eta_ceiling)
        .ok_or_else(|| {
            Error::InfeasibleSpec("bound-only mode needs a closed-form eta ceiling".into())
        })?;
    let p = &sc.pomdp;
    let m = p.induced_mdp()?;
    let m_tilde = sc.abstraction.build_abstract_mdp(&m)?;
    let tilde_sol = m_tilde.solve();
    let lip_v: Vec<f64> = (0..=p.horizon())
        .map(|t| lipschitz_of(&tilde_sol.values[t], sc.abstraction.target()))
        .collect();
    let moduli = fit_moduli(&m, &sc.abstraction, kind)?;
    let eta = vec![eta_ceiling; p.horizon()];
    let core = assemble_bound(&eta, &moduli.fc, &moduli.fp, &lip_v)?;

    let ce = crate::bounds::ce_policy(
        tilde_sol.policy,
        sc.estimator.clone(),
        sc.abstraction.clone(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mc = crate::sim::monte_carlo_value(p, |h, b| ce.act(h, b), episodes, &mut rng)?;

    let rows = (0..p.horizon())
        .map(|t| BoundRow {
            t: t + 1,
            eta: eta[t],
            eps: core.eps[t],
            delta: if t + 1 < p.horizon() {
                Some(core.delta[t])
            } else {
                None
            },
            lip_v: lip_v[t],
            alpha: core.alpha[t],
            bound: core.bound[t],
            gap: None,
            slack: None,
        })
        .collect();
    Ok(BoundReport {
        instance_id: sc.label.clone(),
        family: sc.family.into(),
        horizon: p.horizon(),
        moduli: kind.to_string(),
        mode: "bound_only".into(),
        eta_note: ETA_NOTE.into(),
        rows,
        root_gaps: Vec::new(),
        worst_slack: None,
        dominance_ok: true,
        mc_value: Some(mc),
        mc_episodes: Some(episodes),
        notes: sc.notes.clone(),
    })
}
