//! Concave non-decreasing moduli `F: ℝ≥0 → ℝ≥0`: the functions bounding cost
//! gaps and kernel W1 gaps by abstract state distance, and their fitting from
//! pairwise data.
//!
//! Two fitted shapes are supported:
//!
//! - **affine** (the "linear" kind): `F(x) = F(0) + L·x`, with `F(0)` the
//!   largest gap observed among zero-distance pairs (the within-fiber spread;
//!   zero for identity abstractions) and `L` the largest gap/distance ratio
//!   among positive-distance pairs;
//! - **concave envelope**: the pointwise-least concave non-decreasing majorant
//!   of the gap scatter, built as the upper convex hull followed by monotone
//!   flattening past its peak, constant beyond the last breakpoint.
//!
//! The envelope is pointwise below any valid affine fit of the same data, so
//! bounds assembled from it are never worse.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Distances at or below this are treated as "distance zero" when fitting.
pub const DIST_ZERO_TOL: f64 = 1e-12;

/// A concave, non-decreasing, piecewise-linear function on `ℝ≥0`.
///
/// Breakpoints have strictly increasing `x` starting at `x = 0`; past the last
/// breakpoint the function continues with `final_slope`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Modulus {
    breakpoints: Vec<(f64, f64)>,
    final_slope: f64,
}

impl Modulus {
    pub fn new(breakpoints: Vec<(f64, f64)>, final_slope: f64) -> Result<Self> {
        let m = Self {
            breakpoints,
            final_slope,
        };
        m.check()?;
        Ok(m)
    }

    /// The constant function `x ↦ c`.
    pub fn constant(c: f64) -> Self {
        Self {
            breakpoints: vec![(0.0, c)],
            final_slope: 0.0,
        }
    }

    /// The linear function `x ↦ slope·x`.
    pub fn linear(slope: f64) -> Self {
        Self::affine(0.0, slope)
    }

    /// The affine function `x ↦ offset + slope·x`.
    pub fn affine(offset: f64, slope: f64) -> Self {
        Self {
            breakpoints: vec![(0.0, offset)],
            final_slope: slope,
        }
    }

    /// Least concave non-decreasing majorant of a finite scatter of
    /// `(distance, gap)` points. The scatter must contain at least one point;
    /// a point at `x = 0` is added implicitly (with `y = 0`) if absent.
    pub fn concave_envelope(points: &[(f64, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidModulus("empty scatter".into()));
        }
        for &(x, y) in points {
            if !x.is_finite() || !y.is_finite() || x < 0.0 || y < 0.0 {
                return Err(Error::InvalidModulus(format!(
                    "scatter point ({x}, {y}) outside ℝ≥0 × ℝ≥0"
                )));
            }
        }
        // Collapse ties in x to the maximal y; make sure x = 0 is present.
        let mut pts: Vec<(f64, f64)> = points.to_vec();
        if !pts.iter().any(|&(x, _)| x <= DIST_ZERO_TOL) {
            pts.push((0.0, 0.0));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut dedup: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
        for (x, y) in pts {
            let x = if x <= DIST_ZERO_TOL { 0.0 } else { x };
            match dedup.last_mut() {
                Some(last) if (x - last.0).abs() <= DIST_ZERO_TOL => {
                    last.1 = last.1.max(y);
                }
                _ => dedup.push((x, y)),
            }
        }

        // Upper concave hull (Andrew scan with non-increasing slopes).
        let mut hull: Vec<(f64, f64)> = Vec::with_capacity(dedup.len());
        for p in dedup {
            while hull.len() >= 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                // Keep b only if it lies strictly above the chord a→p.
                let cross = (b.0 - a.0) * (p.1 - a.1) - (p.0 - a.0) * (b.1 - a.1);
                if cross >= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }

        // Monotone flattening: cut at the peak and extend by a constant
        // (minimal among non-decreasing concave extensions).
        let mut peak = 0usize;
        for i in 1..hull.len() {
            if hull[i].1 >= hull[peak].1 {
                peak = i;
            }
        }
        hull.truncate(peak + 1);
        Self::new(hull, 0.0)
    }

    /// Evaluate at `x ≥ 0`.
    pub fn eval(&self, x: f64) -> f64 {
        debug_assert!(x >= -DIST_ZERO_TOL, "modulus evaluated at negative x");
        let bp = &self.breakpoints;
        if x <= bp[0].0 {
            return bp[0].1;
        }
        for w in bp.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if x <= x1 {
                return y0 + (x - x0) * (y1 - y0) / (x1 - x0);
            }
        }
        let (xl, yl) = *bp.last().unwrap();
        yl + self.final_slope * (x - xl)
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn final_slope(&self) -> f64 {
        self.final_slope
    }

    /// Value at zero.
    pub fn offset(&self) -> f64 {
        self.breakpoints[0].1
    }

    fn check(&self) -> Result<()> {
        let bp = &self.breakpoints;
        if bp.is_empty() {
            return Err(Error::InvalidModulus("no breakpoints".into()));
        }
        if bp[0].0 != 0.0 {
            return Err(Error::InvalidModulus(format!(
                "first breakpoint at x = {}, expected 0",
                bp[0].0
            )));
        }
        if bp.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite())
            || !self.final_slope.is_finite()
        {
            return Err(Error::InvalidModulus("non-finite breakpoint".into()));
        }
        if bp[0].1 < 0.0 {
            return Err(Error::InvalidModulus("negative value at 0".into()));
        }
        let mut prev_slope = f64::INFINITY;
        for w in bp.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if x1 <= x0 {
                return Err(Error::InvalidModulus("breakpoints not ascending".into()));
            }
            let slope = (y1 - y0) / (x1 - x0);
            if y1 < y0 - 1e-15 {
                return Err(Error::InvalidModulus("not non-decreasing".into()));
            }
            if slope > prev_slope + 1e-12 {
                return Err(Error::InvalidModulus("not concave".into()));
            }
            prev_slope = slope;
        }
        if self.final_slope < 0.0 {
            return Err(Error::InvalidModulus("decreasing tail".into()));
        }
        if self.final_slope > prev_slope + 1e-12 {
            return Err(Error::InvalidModulus("tail breaks concavity".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_eval() {
        let m = Modulus::affine(2.0, 0.5);
        assert_eq!(m.eval(0.0), 2.0);
        assert_eq!(m.eval(4.0), 4.0);
        assert_eq!(m.offset(), 2.0);
    }

    #[test]
    fn envelope_majorizes_scatter_and_is_minimal_shape() {
        let pts = vec![(0.0, 0.2), (1.0, 1.0), (2.0, 1.1), (3.0, 0.4), (1.5, 0.3)];
        let m = Modulus::concave_envelope(&pts).unwrap();
        for &(x, y) in &pts {
            assert!(m.eval(x) + 1e-12 >= y, "envelope below point ({x},{y})");
        }
        // Flattened past the peak: constant beyond x = 2.
        assert!((m.eval(3.0) - m.eval(2.0)).abs() <= 1e-12);
        assert_eq!(m.final_slope(), 0.0);
        // Below the affine majorant fitted from the same data.
        let f0 = 0.2;
        let slope = pts
            .iter()
            .filter(|&&(x, _)| x > DIST_ZERO_TOL)
            .map(|&(x, y)| y / x)
            .fold(0.0f64, f64::max);
        let aff = Modulus::affine(f0, slope);
        for i in 0..40 {
            let x = i as f64 * 0.1;
            assert!(m.eval(x) <= aff.eval(x) + 1e-12);
        }
    }

    #[test]
    fn envelope_of_degenerate_scatter_is_constant() {
        let m = Modulus::concave_envelope(&[(0.0, 0.7), (0.0, 0.3)]).unwrap();
        assert_eq!(m.eval(0.0), 0.7);
        assert_eq!(m.eval(10.0), 0.7);
    }

    #[test]
    fn envelope_interpolates_concave_data_exactly() {
        // Points already concave and increasing: hull keeps them all.
        let pts = vec![(0.0, 0.0), (1.0, 1.0), (2.0, 1.5), (3.0, 1.75)];
        let m = Modulus::concave_envelope(&pts).unwrap();
        for &(x, y) in &pts {
            assert!((m.eval(x) - y).abs() <= 1e-12);
        }
        assert!((m.eval(0.5) - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn invalid_moduli_are_rejected() {
        assert!(Modulus::new(vec![(1.0, 0.0)], 0.0).is_err()); // no x=0
        assert!(Modulus::new(vec![(0.0, -1.0)], 0.0).is_err()); // negative
        assert!(Modulus::new(vec![(0.0, 0.0), (1.0, 1.0)], 2.0).is_err()); // convex tail
        assert!(Modulus::new(vec![(0.0, 0.0), (1.0, 0.5), (2.0, 2.0)], 0.0).is_err()); // convex
        assert!(Modulus::new(vec![(0.0, 1.0), (1.0, 0.2)], 0.0).is_err()); // decreasing
    }
}
