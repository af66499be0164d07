//! State abstraction: the map φ, the lifting kernels λ^P and λ^c, the
//! pushforward kernel, and construction of the abstract MDP.
//!
//! An [`Abstraction`] carries a surjective map `φ: S → S̃` onto a metric
//! abstract space together with two lifting kernels `λ^P, λ^c: S̃ → Δ(S)`,
//! each supported on the fiber `φ^{-1}(s̃)` of the abstract state it lifts.
//! The abstract MDP averages the original model through them:
//!
//! ```text
//!     P̃_t(s̃'|s̃,a) = Σ_{s} P^φ_t(s̃'|s,a) λ^P(s|s̃),
//!     c̃_t(s̃,a)    = Σ_{s} c_t(s,a) λ^c(s|s̃),
//! ```
//!
//! where `P^φ_t(s̃'|s,a) = Σ_{s' ∈ φ^{-1}(s̃')} P_{S,t}(s'|s,a)` is the
//! pushforward of the state kernel along φ.
//!
//! The abstract metric is supplied by the scenario, not derived; quantization
//! scenarios restrict the source metric to the cell representatives.

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::spaces::{Dist, Kernel, MetricSpace};
use serde::{Deserialize, Serialize};

/// How the lifting kernels are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaKind {
    /// Dirac mass at a designated representative per fiber (the default).
    Dirac,
    /// Uniform over the fiber.
    Uniform,
    /// Explicit tables.
    Explicit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Abstraction {
    target: MetricSpace,
    /// `phi[s]` = abstract index of source state `s`.
    phi: Vec<usize>,
    /// `λ^P(·|s̃)` over the source space, one per abstract state.
    lambda_p: Vec<Dist>,
    /// `λ^c(·|s̃)` over the source space, one per abstract state.
    lambda_c: Vec<Dist>,
    kind: LambdaKind,
}

impl Abstraction {
    /// Fully explicit construction; validates surjectivity and that both
    /// lifting kernels put all their mass on the right fibers.
    pub fn new(
        n_source: usize,
        target: MetricSpace,
        phi: Vec<usize>,
        lambda_p: Vec<Dist>,
        lambda_c: Vec<Dist>,
        kind: LambdaKind,
    ) -> Result<Self> {
        let k = target.len();
        if phi.len() != n_source {
            return Err(Error::DimensionMismatch {
                what: "abstraction map",
                expected: n_source,
                got: phi.len(),
            });
        }
        if let Some(&bad) = phi.iter().find(|&&c| c >= k) {
            return Err(Error::InvalidAbstraction(format!(
                "phi maps to {bad}, but the abstract space has {k} points"
            )));
        }
        let mut hit = vec![false; k];
        for &c in &phi {
            hit[c] = true;
        }
        if let Some(empty) = hit.iter().position(|h| !h) {
            return Err(Error::InvalidAbstraction(format!(
                "abstract state {empty} has an empty fiber (phi is not surjective)"
            )));
        }
        if lambda_p.len() != k || lambda_c.len() != k {
            return Err(Error::DimensionMismatch {
                what: "lifting kernels",
                expected: k,
                got: lambda_p.len().min(lambda_c.len()),
            });
        }
        for (name, lambdas) in [("lambda_p", &lambda_p), ("lambda_c", &lambda_c)] {
            for (cell, lam) in lambdas.iter().enumerate() {
                if lam.len() != n_source {
                    return Err(Error::DimensionMismatch {
                        what: "lifting kernel support",
                        expected: n_source,
                        got: lam.len(),
                    });
                }
                let off_fiber: f64 = lam
                    .masses()
                    .iter()
                    .enumerate()
                    .filter(|(s, _)| phi[*s] != cell)
                    .map(|(_, &m)| m)
                    .sum();
                if off_fiber > crate::DEFAULT_TOL {
                    return Err(Error::InvalidAbstraction(format!(
                        "{name}(·|{cell}) puts mass {off_fiber:e} outside the fiber"
                    )));
                }
            }
        }
        Ok(Self {
            target,
            phi,
            lambda_p,
            lambda_c,
            kind,
        })
    }

    /// The identity abstraction: `S̃ = S`, `φ = id`, Dirac liftings.
    pub fn identity(space: &MetricSpace) -> Self {
        let n = space.len();
        Self {
            target: space.clone(),
            phi: (0..n).collect(),
            lambda_p: (0..n).map(|s| Dist::point_mass(n, s)).collect(),
            lambda_c: (0..n).map(|s| Dist::point_mass(n, s)).collect(),
            kind: LambdaKind::Dirac,
        }
    }

    /// Dirac liftings at one representative per fiber.
    pub fn dirac(
        n_source: usize,
        target: MetricSpace,
        phi: Vec<usize>,
        representatives: &[usize],
    ) -> Result<Self> {
        if representatives.len() != target.len() {
            return Err(Error::DimensionMismatch {
                what: "fiber representatives",
                expected: target.len(),
                got: representatives.len(),
            });
        }
        for (cell, &r) in representatives.iter().enumerate() {
            if r >= n_source || phi.get(r) != Some(&cell) {
                return Err(Error::InvalidAbstraction(format!(
                    "representative {r} of abstract state {cell} is not in its fiber"
                )));
            }
        }
        let lambdas: Vec<Dist> = representatives
            .iter()
            .map(|&r| Dist::point_mass(n_source, r))
            .collect();
        Self::new(
            n_source,
            target,
            phi,
            lambdas.clone(),
            lambdas,
            LambdaKind::Dirac,
        )
    }

    /// Uniform-on-fiber liftings.
    pub fn uniform(n_source: usize, target: MetricSpace, phi: Vec<usize>) -> Result<Self> {
        let k = target.len();
        let mut fibers: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (s, &c) in phi.iter().enumerate() {
            if c < k {
                fibers[c].push(s);
            }
        }
        if let Some(empty) = fibers.iter().position(|f| f.is_empty()) {
            return Err(Error::InvalidAbstraction(format!(
                "abstract state {empty} has an empty fiber (phi is not surjective)"
            )));
        }
        let lambdas: Vec<Dist> = fibers
            .iter()
            .map(|fiber| {
                let mut mass = vec![0.0; n_source];
                for &s in fiber {
                    mass[s] = 1.0 / fiber.len() as f64;
                }
                Dist::unchecked(mass)
            })
            .collect();
        Self::new(
            n_source,
            target,
            phi,
            lambdas.clone(),
            lambdas,
            LambdaKind::Uniform,
        )
    }

    pub fn target(&self) -> &MetricSpace {
        &self.target
    }

    pub fn n_source(&self) -> usize {
        self.phi.len()
    }

    pub fn n_abstract(&self) -> usize {
        self.target.len()
    }

    #[inline]
    pub fn phi(&self, s: usize) -> usize {
        self.phi[s]
    }

    pub fn phi_map(&self) -> &[usize] {
        &self.phi
    }

    pub fn lambda_p(&self, cell: usize) -> &Dist {
        &self.lambda_p[cell]
    }

    pub fn lambda_c(&self, cell: usize) -> &Dist {
        &self.lambda_c[cell]
    }

    pub fn kind(&self) -> LambdaKind {
        self.kind
    }

    /// Distance between the abstract images of two source states.
    #[inline]
    pub fn abstract_dist(&self, s: usize, s2: usize) -> f64 {
        self.target.dist(self.phi[s], self.phi[s2])
    }

    /// Pushforward kernel `P^φ(·|s,a)` at one source state: the law of
    /// `φ(S_{t+1})` under `P_{S,t}(·|s,a)`.
    pub fn pushforward(&self, m: &Mdp, t: usize, s: usize, a: usize) -> Dist {
        let mut mass = vec![0.0f64; self.n_abstract()];
        for (s2, &p) in m.transition(t, s, a).masses().iter().enumerate() {
            mass[self.phi[s2]] += p;
        }
        Dist::unchecked(mass)
    }

    /// The abstract MDP `M̃` over the target space.
    pub fn build_abstract_mdp(&self, m: &Mdp) -> Result<Mdp> {
        if m.n_states() != self.n_source() {
            return Err(Error::DimensionMismatch {
                what: "abstraction source",
                expected: self.n_source(),
                got: m.n_states(),
            });
        }
        let k = self.n_abstract();
        let kernels = (0..m.horizon() - 1)
            .map(|t| {
                let rows = (0..k)
                    .map(|cell| {
                        (0..m.n_actions())
                            .map(|a| {
                                let mut mass = vec![0.0f64; k];
                                for (s, &w) in self.lambda_p[cell].masses().iter().enumerate() {
                                    if w == 0.0 {
                                        continue;
                                    }
                                    let push = self.pushforward(m, t, s, a);
                                    for (c2, &p) in push.masses().iter().enumerate() {
                                        mass[c2] += w * p;
                                    }
                                }
                                Dist::with_tolerance(mass, 1e-9)
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Kernel::new(rows)
            })
            .collect::<Result<Vec<_>>>()?;
        let costs = (0..m.horizon())
            .map(|t| {
                (0..k)
                    .map(|cell| {
                        (0..m.n_actions())
                            .map(|a| {
                                self.lambda_c[cell]
                                    .masses()
                                    .iter()
                                    .enumerate()
                                    .map(|(s, &w)| w * m.cost(t, s, a))
                                    .sum()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Mdp::new(self.target.clone(), m.n_actions(), kernels, costs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_round_trip_is_bitwise_equal() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let m = crate::mdp::tests::random_mdp(&mut rng, 4, 2, 3);
        let ab = Abstraction::identity(m.space());
        let back = ab.build_abstract_mdp(&m).unwrap();
        assert_eq!(back.costs(), m.costs());
        for t in 0..2 {
            for s in 0..4 {
                for a in 0..2 {
                    assert_eq!(
                        back.transition(t, s, a).masses(),
                        m.transition(t, s, a).masses()
                    );
                }
            }
        }
    }

    #[test]
    fn identity_pushforward_is_the_kernel_itself() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let m = crate::mdp::tests::random_mdp(&mut rng, 3, 2, 2);
        let ab = Abstraction::identity(m.space());
        for s in 0..3 {
            for a in 0..2 {
                assert_eq!(
                    ab.pushforward(&m, 0, s, a).masses(),
                    m.transition(0, s, a).masses()
                );
            }
        }
    }

    #[test]
    fn single_cell_pushforward_is_point_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let m = crate::mdp::tests::random_mdp(&mut rng, 3, 2, 2);
        let ab = Abstraction::uniform(3, MetricSpace::singleton(), vec![0, 0, 0]).unwrap();
        let push = ab.pushforward(&m, 0, 1, 0);
        assert_eq!(push.masses(), &[1.0]);
    }

    #[test]
    fn pushforward_matches_fiber_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let m = crate::mdp::tests::random_mdp(&mut rng, 4, 2, 2);
        let phi = vec![0, 1, 0, 1];
        let target = m.space().restrict(&[0, 1]).unwrap();
        let ab = Abstraction::dirac(4, target, phi.clone(), &[0, 1]).unwrap();
        for s in 0..4 {
            for a in 0..2 {
                let push = ab.pushforward(&m, 0, s, a);
                for cell in 0..2 {
                    let direct: f64 = (0..4)
                        .filter(|&s2| phi[s2] == cell)
                        .map(|s2| m.transition(0, s, a).mass(s2))
                        .sum();
                    assert!((push.mass(cell) - direct).abs() <= 1e-15);
                }
            }
        }
    }

    #[test]
    fn uniform_lambda_averages_costs() {
        // Fiber {0,1} with costs (1,3): abstract cost is the mean, 2.
        let space = MetricSpace::line(2, 1.0);
        let costs = vec![vec![vec![1.0], vec![3.0]]];
        let m = Mdp::new(space, 1, vec![], costs).unwrap();
        let ab = Abstraction::uniform(2, MetricSpace::singleton(), vec![0, 0]).unwrap();
        let tilde = ab.build_abstract_mdp(&m).unwrap();
        assert!((tilde.cost(0, 0, 0) - 2.0).abs() <= 1e-15);
    }

    #[test]
    fn dirac_lambda_reads_cost_at_representative() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let m = crate::mdp::tests::random_mdp(&mut rng, 4, 2, 2);
        let phi = vec![0, 0, 1, 1];
        let reps = [1usize, 3usize];
        let target = m.space().restrict(&reps).unwrap();
        let ab = Abstraction::dirac(4, target, phi, &reps).unwrap();
        let tilde = ab.build_abstract_mdp(&m).unwrap();
        for t in 0..2 {
            for (cell, &r) in reps.iter().enumerate() {
                for a in 0..2 {
                    assert_eq!(tilde.cost(t, cell, a), m.cost(t, r, a));
                }
            }
        }
    }

    #[test]
    fn abstract_rows_are_valid_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let m = crate::mdp::tests::random_mdp(&mut rng, 5, 2, 3);
        let phi = vec![0, 1, 1, 2, 0];
        let target = m.space().restrict(&[0, 1, 3]).unwrap();
        let ab = Abstraction::uniform(5, target, phi).unwrap();
        let tilde = ab.build_abstract_mdp(&m).unwrap();
        for t in 0..2 {
            for c in 0..3 {
                for a in 0..2 {
                    let sum: f64 = tilde.transition(t, c, a).masses().iter().sum();
                    assert!((sum - 1.0).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn off_fiber_mass_is_rejected() {
        let target = MetricSpace::line(2, 1.0);
        let phi = vec![0, 1];
        let bad = Dist::new(vec![0.5, 0.5]).unwrap();
        let good = Dist::point_mass(2, 1);
        let r = Abstraction::new(
            2,
            target,
            phi,
            vec![bad, good.clone()],
            vec![good.clone(), good],
            LambdaKind::Explicit,
        );
        assert!(matches!(r, Err(Error::InvalidAbstraction(_))));
    }

    #[test]
    fn non_surjective_phi_is_rejected() {
        let target = MetricSpace::line(2, 1.0);
        let r = Abstraction::uniform(3, target, vec![0, 0, 0]);
        assert!(matches!(r, Err(Error::InvalidAbstraction(_))));
    }
}
