//! JSON schema for instances: POMDPs, abstractions, estimators, and history
//! trees, as plain nested arrays.
//!
//! A model file looks like:
//!
//! ```json
//! {
//!   "state_space": { "labels": ["0","1"], "dist": [[0.0,1.0],[1.0,0.0]] },
//!   "n_observations": 2,
//!   "n_actions": 2,
//!   "horizon": 2,
//!   "initial": [[0.25,0.25],[0.25,0.25]],
//!   "kernels": [[[ [[0.2,0.3],[0.1,0.4]], ... ]]],
//!   "costs": [[[0.0,1.0],[1.0,0.0]], ...],
//!   "abstraction": { "target": {...}, "phi": [0,0], "lambda": {"kind":"dirac","representatives":[0]} },
//!   "estimator": { "kind": "map_posterior" }
//! }
//! ```
//!
//! Index conventions: `initial[s][y]` is the joint initial law;
//! `kernels[t][s][a][s'][y']` the transition law; `costs[t][s][a]` the
//! per-step cost. Times are 0-based in files.

use crate::abstraction::{Abstraction, LambdaKind};
use crate::error::{Error, Result};
use crate::estimator::{Estimator, RecursiveRule};
use crate::pomdp::{HistoryTree, Origin, Pomdp};
use crate::spaces::{Dist, Kernel, MetricSpace};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceDef {
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    pub dist: Vec<Vec<f64>>,
}

impl SpaceDef {
    pub fn to_space(&self) -> Result<MetricSpace> {
        self.to_space_with_tolerance(crate::DEFAULT_TOL)
    }

    pub fn to_space_with_tolerance(&self, tol: f64) -> Result<MetricSpace> {
        let labels = match &self.labels {
            Some(labels) => labels.clone(),
            None => (0..self.dist.len()).map(|i| i.to_string()).collect(),
        };
        MetricSpace::with_tolerance(labels, self.dist.clone(), tol)
    }

    pub fn from_space(s: &MetricSpace) -> Self {
        Self {
            labels: Some(s.labels().to_vec()),
            dist: s.matrix().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaDef {
    Dirac { representatives: Vec<usize> },
    Uniform,
    Explicit { tables: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbstractionDef {
    pub target: SpaceDef,
    /// Fiber assignment: abstract index per source state.
    pub phi: Vec<usize>,
    pub lambda: LambdaDef,
}

impl AbstractionDef {
    pub fn from_abstraction(ab: &Abstraction) -> Self {
        let lambda = match ab.kind() {
            LambdaKind::Dirac => LambdaDef::Dirac {
                representatives: (0..ab.n_abstract())
                    .map(|cell| ab.lambda_p(cell).argmax())
                    .collect(),
            },
            LambdaKind::Uniform => LambdaDef::Uniform,
            LambdaKind::Explicit => LambdaDef::Explicit {
                tables: (0..ab.n_abstract())
                    .map(|cell| ab.lambda_c(cell).masses().to_vec())
                    .collect(),
            },
        };
        Self {
            target: SpaceDef::from_space(ab.target()),
            phi: ab.phi_map().to_vec(),
            lambda,
        }
    }

    pub fn to_abstraction(&self, n_source: usize) -> Result<Abstraction> {
        let target = self.target.to_space()?;
        match &self.lambda {
            LambdaDef::Dirac { representatives } => {
                Abstraction::dirac(n_source, target, self.phi.clone(), representatives)
            }
            LambdaDef::Uniform => Abstraction::uniform(n_source, target, self.phi.clone()),
            LambdaDef::Explicit { tables } => {
                let lambdas: Vec<Dist> = tables
                    .iter()
                    .map(|t| Dist::new(t.clone()))
                    .collect::<Result<_>>()?;
                Abstraction::new(
                    n_source,
                    target,
                    self.phi.clone(),
                    lambdas.clone(),
                    lambdas,
                    LambdaKind::Explicit,
                )
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorDef {
    LastObservation {
        map: Vec<usize>,
    },
    MapPosterior,
    BeliefMedian,
    Constant {
        index: usize,
    },
    Recursive {
        initial: usize,
        null_obs: usize,
        obs_map: Vec<usize>,
        predict: Vec<Vec<usize>>,
    },
}

impl EstimatorDef {
    /// Named estimators serialize; explicit history tables do not (they are
    /// bound to one enumerated tree).
    pub fn from_estimator(e: &Estimator) -> Option<Self> {
        match e {
            Estimator::LastObservation { map } => {
                Some(EstimatorDef::LastObservation { map: map.clone() })
            }
            Estimator::MapPosterior => Some(EstimatorDef::MapPosterior),
            Estimator::BeliefMedian => Some(EstimatorDef::BeliefMedian),
            Estimator::Constant(index) => Some(EstimatorDef::Constant { index: *index }),
            Estimator::Recursive(rule) => Some(EstimatorDef::Recursive {
                initial: rule.initial,
                null_obs: rule.null_obs,
                obs_map: rule.obs_map.clone(),
                predict: rule.predict.clone(),
            }),
            Estimator::Table(_) => None,
        }
    }

    pub fn to_estimator(&self) -> Estimator {
        match self {
            EstimatorDef::LastObservation { map } => {
                Estimator::LastObservation { map: map.clone() }
            }
            EstimatorDef::MapPosterior => Estimator::MapPosterior,
            EstimatorDef::BeliefMedian => Estimator::BeliefMedian,
            EstimatorDef::Constant { index } => Estimator::Constant(*index),
            EstimatorDef::Recursive {
                initial,
                null_obs,
                obs_map,
                predict,
            } => Estimator::Recursive(RecursiveRule {
                initial: *initial,
                null_obs: *null_obs,
                obs_map: obs_map.clone(),
                predict: predict.clone(),
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub state_space: SpaceDef,
    pub n_observations: usize,
    pub n_actions: usize,
    pub horizon: usize,
    /// `initial[s][y]`.
    pub initial: Vec<Vec<f64>>,
    /// `kernels[t][s][a][s'][y']`.
    pub kernels: Vec<Vec<Vec<Vec<Vec<f64>>>>>,
    /// `costs[t][s][a]`.
    pub costs: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abstraction: Option<AbstractionDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorDef>,
}

impl ModelFile {
    pub fn to_pomdp(&self) -> Result<Pomdp> {
        self.to_pomdp_with_tolerance(crate::DEFAULT_TOL)
    }

    /// Build with an explicit validation tolerance (per-run override).
    pub fn to_pomdp_with_tolerance(&self, tol: f64) -> Result<Pomdp> {
        let space = self.state_space.to_space_with_tolerance(tol)?;
        let ns = space.len();
        let ny = self.n_observations;
        let flat_initial = flatten_joint(&self.initial, ns, ny, tol, "initial")?;
        let kernels = self
            .kernels
            .iter()
            .enumerate()
            .map(|(t, table)| {
                let rows = table
                    .iter()
                    .enumerate()
                    .map(|(s, row)| {
                        row.iter()
                            .map(|joint| {
                                flatten_joint(joint, ns, ny, tol, "kernel").map_err(|_| {
                                    Error::InvalidModel(format!(
                                        "kernel[{t}][{s}] has a malformed joint table"
                                    ))
                                })
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Kernel::new(rows)
            })
            .collect::<Result<Vec<_>>>()?;
        Pomdp::new(
            space,
            ny,
            self.n_actions,
            flat_initial,
            kernels,
            self.costs.clone(),
        )
    }

    pub fn from_pomdp(p: &Pomdp) -> Self {
        let ns = p.n_states();
        let ny = p.n_observations();
        let unflatten = |d: &Dist| -> Vec<Vec<f64>> {
            (0..ns)
                .map(|s| (0..ny).map(|y| d.mass(p.joint_index(s, y))).collect())
                .collect()
        };
        let kernels = (0..p.horizon().saturating_sub(1))
            .map(|t| {
                (0..ns)
                    .map(|s| {
                        (0..p.n_actions())
                            .map(|a| unflatten(p.kernel(t).row(s, a)))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            state_space: SpaceDef::from_space(p.space()),
            n_observations: ny,
            n_actions: p.n_actions(),
            horizon: p.horizon(),
            initial: unflatten(p.initial()),
            kernels,
            costs: p.costs().to_vec(),
            abstraction: None,
            estimator: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s)
            .map_err(|e| Error::InvalidModel(format!("model file parse error: {e}")))
    }
}

fn flatten_joint(
    nested: &[Vec<f64>],
    ns: usize,
    ny: usize,
    tol: f64,
    what: &str,
) -> Result<Dist> {
    if nested.len() != ns || nested.iter().any(|row| row.len() != ny) {
        return Err(Error::InvalidModel(format!(
            "{what} table must be {ns}×{ny}"
        )));
    }
    let mut flat = Vec::with_capacity(ns * ny);
    for row in nested {
        flat.extend_from_slice(row);
    }
    Dist::with_tolerance(flat, tol)
}

/// Debug export of an enumerated history tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeExport {
    pub horizon: usize,
    pub nodes: Vec<TreeNodeExport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeNodeExport {
    pub id: usize,
    /// 1-based stage.
    pub t: usize,
    pub observations: Vec<usize>,
    pub actions: Vec<usize>,
    pub reach: f64,
    pub belief: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
}

pub fn export_tree(tree: &HistoryTree) -> TreeExport {
    let nodes = (0..tree.len())
        .map(|id| {
            let node = tree.node(id);
            let h = tree.history(id);
            TreeNodeExport {
                id,
                t: node.t + 1,
                observations: h.observations,
                actions: h.actions,
                reach: node.reach,
                belief: node.belief.masses().to_vec(),
                parent: match node.origin {
                    Origin::Root { .. } => None,
                    Origin::Child { parent, .. } => Some(parent),
                },
            }
        })
        .collect();
    TreeExport {
        horizon: tree.horizon(),
        nodes,
    }
}
