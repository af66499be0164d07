//! Bound reports and their serialization.
//!
//! A [`BoundReport`] records, per stage: the measured estimation error η, the
//! assembled ε/δ/α terms, the Lipschitz constant of the abstract value
//! function, the bound 2α, the worst measured optimality gap over reachable
//! histories, and the slack between them. Reports serialize to JSON and to a
//! flat CSV with one row per stage.
//!
//! CSV floats are printed with 17 significant digits in scientific notation
//! ('.' decimal separator), so identical runs produce byte-identical files.

use serde::{Deserialize, Serialize};

/// Recorded on every report: how the sup over histories is interpreted.
pub const ETA_NOTE: &str =
    "eta maximized over positive-probability histories only; zero-probability \
     histories have undefined conditionals and are excluded";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundRow {
    /// 1-based stage index.
    pub t: usize,
    pub eta: f64,
    pub eps: f64,
    /// Absent at `t = T`: the α sum stops at the last transition.
    pub delta: Option<f64>,
    pub lip_v: f64,
    pub alpha: f64,
    /// `2 · alpha`.
    pub bound: f64,
    /// Worst gap `W^{P,μ} − W^P` over reachable histories at this stage;
    /// absent in bound-only mode.
    pub gap: Option<f64>,
    /// `bound − gap`; absent in bound-only mode.
    pub slack: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub instance_id: String,
    pub family: String,
    pub horizon: usize,
    /// Moduli kind the bound was assembled from ("linear" | "envelope").
    pub moduli: String,
    /// "exact" when the history-tree oracle ran; "bound_only" when the
    /// instance is too large for it and only a Monte-Carlo policy value is
    /// reported.
    pub mode: String,
    pub eta_note: String,
    pub rows: Vec<BoundRow>,
    /// Gap at each root (t = 1) history, in root enumeration order.
    pub root_gaps: Vec<f64>,
    /// Minimum slack across stages; negative means a bound violation.
    pub worst_slack: Option<f64>,
    pub dominance_ok: bool,
    /// Monte-Carlo estimate of the certainty-equivalent policy's total cost
    /// (bound-only mode).
    pub mc_value: Option<f64>,
    pub mc_episodes: Option<usize>,
    /// Family-specific annotations (closed-form ceilings, fitted vs target
    /// constants, discretization slack).
    pub notes: Vec<String>,
}

/// 17-significant-digit scientific notation; locale-independent.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub const CSV_HEADER: &str = "instance_id,t,eta,eps,delta,lipV,alpha,bound,gap,slack";

impl BoundReport {
    /// Flat CSV, one row per stage. Optional fields render as empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                self.instance_id,
                row.t,
                fmt_float(row.eta),
                fmt_float(row.eps),
                opt(row.delta),
                fmt_float(row.lip_v),
                fmt_float(row.alpha),
                fmt_float(row.bound),
                opt(row.gap),
                opt(row.slack),
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BoundReport {
        BoundReport {
            instance_id: "demo-0".into(),
            family: "random".into(),
            horizon: 2,
            moduli: "linear".into(),
            mode: "exact".into(),
            eta_note: ETA_NOTE.into(),
            rows: vec![
                BoundRow {
                    t: 1,
                    eta: 0.25,
                    eps: 0.5,
                    delta: Some(0.75),
                    lip_v: 1.0,
                    alpha: 1.5,
                    bound: 3.0,
                    gap: Some(0.125),
                    slack: Some(2.875),
                },
                BoundRow {
                    t: 2,
                    eta: 0.25,
                    eps: 0.25,
                    delta: None,
                    lip_v: 0.5,
                    alpha: 0.25,
                    bound: 0.5,
                    gap: Some(0.0),
                    slack: Some(0.5),
                },
            ],
            root_gaps: vec![0.125],
            worst_slack: Some(0.5),
            dominance_ok: true,
            mc_value: None,
            mc_episodes: None,
            notes: vec![],
        }
    }

    #[test]
    fn csv_has_fixed_shape_and_empty_trailing_delta() {
        let csv = sample().to_csv();
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 3);
        // The t=2 row has an empty delta cell.
        let cells: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(cells.len(), 10);
        assert_eq!(cells[4], "");
        // Deterministic: same report, same bytes.
        assert_eq!(csv, sample().to_csv());
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        let back = BoundReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back.rows.len(), r.rows.len());
        assert_eq!(back.rows[0].bound, r.rows[0].bound);
        assert_eq!(back.instance_id, r.instance_id);
    }

    #[test]
    fn float_format_is_17_significant_digits() {
        assert_eq!(fmt_float(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_float(1.0 / 3.0), "3.3333333333333331e-1");
    }
}
