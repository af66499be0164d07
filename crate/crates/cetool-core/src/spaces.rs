//! Finite metric spaces, probability vectors, and stochastic kernels.
//!
//! These are the substrate every other module consumes: a [`MetricSpace`] is a
//! labelled point set with a dense distance matrix, a [`Dist`] is a validated
//! probability vector over some indexed set, and a [`Kernel`] is one time
//! slice of a controlled transition model, mapping (state, action) to a
//! distribution over a target set.
//!
//! All values are immutable after construction and safe to share across
//! threads.

use crate::error::{Error, MetricViolation, Result};
use crate::DEFAULT_TOL;
use serde::{Deserialize, Serialize};

/// A finite metric space: `n` labelled points and an `n×n` distance matrix.
///
/// The constructor enforces zero diagonal, symmetry, non-negativity, and the
/// triangle inequality (within tolerance). Distinct points at distance zero
/// are allowed (pseudometrics arise from degenerate abstractions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpace {
    labels: Vec<String>,
    dist: Vec<Vec<f64>>,
}

/// Check the metric axioms on a candidate distance matrix.
///
/// Returns an empty list iff `dist` is a valid (pseudo)metric: square, zero
/// diagonal, symmetric, non-negative and finite, and
/// `dist[i][k] ≤ dist[i][j] + dist[j][k]` for every triple within `tol`.
/// Each violation names the failed axiom and the offending indices. A
/// non-square input is reported as a violation per offending row and checking
/// stops there.
pub fn validate_metric(dist: &[Vec<f64>], tol: f64) -> Vec<MetricViolation> {
    let n = dist.len();
    let mut out = Vec::new();
    for (i, row) in dist.iter().enumerate() {
        if row.len() != n {
            out.push(MetricViolation::NotSquare {
                row: i,
                len: row.len(),
                n,
            });
        }
    }
    if !out.is_empty() {
        return out;
    }
    for i in 0..n {
        if dist[i][i].abs() > tol {
            out.push(MetricViolation::NonzeroDiagonal {
                i,
                value: dist[i][i],
            });
        }
        for j in 0..n {
            if !dist[i][j].is_finite() || dist[i][j] < 0.0 {
                out.push(MetricViolation::BadEntry {
                    i,
                    j,
                    value: dist[i][j],
                });
            }
        }
        for j in (i + 1)..n {
            if (dist[i][j] - dist[j][i]).abs() > tol {
                out.push(MetricViolation::Asymmetric { i, j });
            }
        }
    }
    if !out.is_empty() {
        return out;
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let excess = dist[i][k] - dist[i][j] - dist[j][k];
                if excess > tol {
                    out.push(MetricViolation::Triangle { i, j, k, excess });
                }
            }
        }
    }
    out
}

impl MetricSpace {
    /// Build a metric space, validating the axioms at [`DEFAULT_TOL`].
    pub fn new(labels: Vec<String>, dist: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_tolerance(labels, dist, DEFAULT_TOL)
    }

    /// Build a metric space with an explicit axiom tolerance.
    pub fn with_tolerance(labels: Vec<String>, dist: Vec<Vec<f64>>, tol: f64) -> Result<Self> {
        let violations = validate_metric(&dist, tol);
        if !violations.is_empty() {
            return Err(Error::InvalidMetric(violations));
        }
        if labels.len() != dist.len() {
            return Err(Error::DimensionMismatch {
                what: "metric labels",
                expected: dist.len(),
                got: labels.len(),
            });
        }
        Ok(Self { labels, dist })
    }

    /// Metric space with default labels `"0".."n-1"`.
    pub fn from_matrix(dist: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (0..dist.len()).map(|i| i.to_string()).collect();
        Self::new(labels, dist)
    }

    /// Path metric on `{0..n-1}`: `d(i,j) = |i-j| * scale`.
    pub fn line(n: usize, scale: f64) -> Self {
        let dist = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (i as f64 - j as f64).abs() * scale)
                    .collect()
            })
            .collect();
        let labels = (0..n).map(|i| i.to_string()).collect();
        Self { labels, dist }
    }

    /// Cyclic metric on `{0..n-1}`: `d(i,j) = min(|i-j|, n-|i-j|) * scale`.
    pub fn ring(n: usize, scale: f64) -> Self {
        let dist = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let d = (i as isize - j as isize).unsigned_abs();
                        d.min(n - d) as f64 * scale
                    })
                    .collect()
            })
            .collect();
        let labels = (0..n).map(|i| i.to_string()).collect();
        Self { labels, dist }
    }

    /// Single-point space.
    pub fn singleton() -> Self {
        Self {
            labels: vec!["0".to_string()],
            dist: vec![vec![0.0]],
        }
    }

    /// Restriction of this metric to a subset of points, in the given order.
    /// Used for quantization-style abstract spaces (representatives inherit
    /// the source metric).
    pub fn restrict(&self, points: &[usize]) -> Result<Self> {
        for &p in points {
            if p >= self.len() {
                return Err(Error::DimensionMismatch {
                    what: "metric restriction index",
                    expected: self.len(),
                    got: p,
                });
            }
        }
        let dist = points
            .iter()
            .map(|&i| points.iter().map(|&j| self.dist[i][j]).collect())
            .collect();
        let labels = points.iter().map(|&i| self.labels[i].clone()).collect();
        Ok(Self { labels, dist })
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i][j]
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.dist
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for row in &self.dist {
            for &v in row {
                d = d.max(v);
            }
        }
        d
    }
}

/// A probability vector over an indexed finite set.
///
/// Entries are non-negative and sum to 1 within the construction tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dist {
    mass: Vec<f64>,
}

impl Dist {
    /// Validate `mass` as a probability vector at [`DEFAULT_TOL`].
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(mass, DEFAULT_TOL)
    }

    /// Validate `mass` as a probability vector at tolerance `tol`.
    pub fn with_tolerance(mass: Vec<f64>, tol: f64) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::InvalidDistribution("empty mass vector".into()));
        }
        let mut sum = 0.0;
        for (i, &m) in mass.iter().enumerate() {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "entry {i} is {m}, expected a non-negative real"
                )));
            }
            sum += m;
        }
        if (sum - 1.0).abs() > tol {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, expected 1 within {tol:e}"
            )));
        }
        Ok(Self { mass })
    }

    /// Normalize a non-negative vector to total mass 1.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        let mut sum = 0.0;
        for (i, &m) in raw.iter().enumerate() {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "entry {i} is {m}, expected a non-negative real"
                )));
            }
            sum += m;
        }
        if sum <= 0.0 {
            return Err(Error::InvalidDistribution(
                "cannot normalize a zero vector".into(),
            ));
        }
        let mass = raw.into_iter().map(|m| m / sum).collect();
        Ok(Self { mass })
    }

    /// Construct without validation. For internal hot paths that produce
    /// exactly-normalized vectors (e.g. Bayes conditioning divides by the
    /// computed total); debug builds still assert normalization.
    pub(crate) fn unchecked(mass: Vec<f64>) -> Self {
        debug_assert!(
            (mass.iter().sum::<f64>() - 1.0).abs() < 1e-9 && mass.iter().all(|&m| m >= 0.0),
            "unchecked Dist is not normalized"
        );
        Self { mass }
    }

    /// Point mass at `index` over a set of size `n`.
    pub fn point_mass(n: usize, index: usize) -> Self {
        let mut mass = vec![0.0; n];
        mass[index] = 1.0;
        Self { mass }
    }

    /// Uniform distribution over a set of size `n` (n ≥ 1).
    pub fn uniform(n: usize) -> Self {
        Self {
            mass: vec![1.0 / n as f64; n],
        }
    }

    /// Indices carrying mass strictly greater than `tol`.
    pub fn support(&self, tol: f64) -> Vec<usize> {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > tol)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    #[inline]
    pub fn mass(&self, i: usize) -> f64 {
        self.mass[i]
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// Expectation of `f` under this distribution.
    pub fn expect(&self, mut f: impl FnMut(usize) -> f64) -> f64 {
        self.mass.iter().enumerate().map(|(i, &m)| m * f(i)).sum()
    }

    /// Index of the largest mass; ties broken toward the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..self.mass.len() {
            if self.mass[i] > self.mass[best] {
                best = i;
            }
        }
        best
    }
}

/// One time slice of a controlled stochastic kernel: a table mapping
/// (state index, action index) to a [`Dist`] over a target set.
///
/// Every row must be a full distribution; zero-probability rows are rejected
/// at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    rows: Vec<Vec<Dist>>,
    target_len: usize,
}

impl Kernel {
    pub fn new(rows: Vec<Vec<Dist>>) -> Result<Self> {
        let n_actions = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.is_empty() || n_actions == 0 {
            return Err(Error::InvalidModel("kernel has no rows".into()));
        }
        let target_len = rows[0][0].len();
        for (s, row) in rows.iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::DimensionMismatch {
                    what: "kernel actions",
                    expected: n_actions,
                    got: row.len(),
                });
            }
            for (a, d) in row.iter().enumerate() {
                if d.len() != target_len {
                    return Err(Error::InvalidModel(format!(
                        "kernel row ({s},{a}) has target size {}, expected {target_len}",
                        d.len()
                    )));
                }
            }
        }
        Ok(Self { rows, target_len })
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn n_actions(&self) -> usize {
        self.rows[0].len()
    }

    pub fn target_len(&self) -> usize {
        self.target_len
    }

    #[inline]
    pub fn row(&self, state: usize, action: usize) -> &Dist {
        &self.rows[state][action]
    }
}
