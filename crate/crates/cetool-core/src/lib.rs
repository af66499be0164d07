//! Certainty-equivalent control for finite-horizon POMDPs on finite metric
//! spaces, with exact verification of the sub-optimality bound
//!
//! ```text
//!     W^{P,μ}_t(h_t) − W^P_t(h_t) ≤ 2 α_t,
//!     α_t = ε_t + Σ_{τ=t}^{T−1} [ δ_τ · Lip(Ṽ_{τ+1}) + ε_{τ+1} ],
//!     ε_t = F^c_t(η_t),   δ_t = F^P_t(η_t) + η_{t+1},
//! ```
//!
//! where μ is the certainty-equivalent policy μ_t(h_t) = π̃_t(ĝ_t(h_t)): act
//! with the optimal policy of an abstract fully-observed MDP, evaluated at a
//! state estimate ĝ_t(h_t). η_t is the worst-case conditional expected
//! estimation error, measured in the abstract metric, and F^c/F^P are concave
//! non-decreasing moduli bounding cost gaps and kernel Wasserstein-1 gaps by
//! abstract state distance.
//!
//! Everything is exact at desk scale: the POMDP side is solved by enumerating
//! the positive-probability history tree with exact Bayes filtering, the MDP
//! side by backward induction, and Wasserstein-1 distances by an exact
//! min-cost-flow solve. The bound side (moduli fitting, η measurement, α
//! assembly) is then compared against the measured optimality gap on every
//! reachable history; a violation is a hard error, never a warning.
//!
//! Module map:
//! - [`spaces`]: finite metric spaces, probability vectors, stochastic kernels
//! - [`transport`]: exact Wasserstein-1 with dual certificates
//! - [`mdp`]: backward induction, Markov policy evaluation, Lipschitz constants
//! - [`pomdp`]: Bayes filter, history tree, exact optimal / policy values
//! - [`abstraction`]: state abstraction φ, lifting kernels, abstract MDP
//! - [`estimator`]: history → abstract-state estimation rules
//! - [`bounds`]: moduli, η, α, the bound pipeline, residual checks
//! - [`scenarios`]: the worked example families and random instances
//! - [`model`]: JSON schema for instances and abstractions
//! - [`report`]: bound reports, CSV/JSON serialization
//! - [`sim`]: seeded trajectory simulation (Monte-Carlo evaluation)
//! - [`oracles`]: independent reference implementations used by tests
//!
//! Internal convention: time indices are 0-based (`t ∈ 0..T`); reports and
//! serialized output print 1-based times.

pub mod abstraction;
pub mod bounds;
pub mod error;
pub mod estimator;
pub mod mdp;
pub mod model;
pub mod oracles;
pub mod pomdp;
pub mod report;
pub mod scenarios;
pub mod sim;
pub mod spaces;
pub mod transport;

pub use error::{Error, Result};

/// Numeric tolerance for probability normalization and metric axioms.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Tolerance for value-level contracts (optimality gaps, bound dominance,
/// residual ceilings).
pub const VALUE_TOL: f64 = 1e-9;

/// Default cap on the number of history-tree nodes.
pub const DEFAULT_BUDGET: usize = 200_000;
