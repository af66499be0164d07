//! The `explain` subcommand: print the additive decomposition of α_t.

use anyhow::{bail, Context, Result};
use cetool_core::report::BoundReport;
use std::path::Path;

pub fn explain(report_path: &Path, t: usize) -> Result<()> {
    let text = std::fs::read_to_string(report_path)
        .with_context(|| format!("cannot read report {}", report_path.display()))?;
    let report = BoundReport::from_json(&text)
        .with_context(|| format!("malformed report {}", report_path.display()))?;
    let horizon = report.horizon;
    if t == 0 || t > horizon {
        bail!("t = {t} out of range 1..={horizon}");
    }
    let row = &report.rows[t - 1];

    println!(
        "{} (t = {t} of {horizon}, moduli = {}, mode = {})",
        report.instance_id, report.moduli, report.mode
    );
    println!("alpha_{t} decomposition:");
    let mut terms: Vec<(String, f64)> = vec![(format!("eps_{t}"), row.eps)];
    for tau in t..horizon {
        let r = &report.rows[tau - 1];
        let next = &report.rows[tau]; // 1-based tau+1 row
        let delta = r
            .delta
            .with_context(|| format!("report row t={tau} is missing delta"))?;
        terms.push((
            format!("delta_{tau} * Lip(V_{})", tau + 1),
            delta * next.lip_v,
        ));
        terms.push((format!("eps_{}", tau + 1), next.eps));
    }
    let mut total = 0.0;
    for (name, value) in &terms {
        println!("  {name:<24} = {value:.12e}");
        total += value;
    }
    println!("  {:<24} = {:.12e}", "sum", total);
    println!("  {:<24} = {:.12e}", "alpha (reported)", row.alpha);
    println!("  {:<24} = {:.12e}", "bound 2*alpha", row.bound);
    if (total - row.alpha).abs() > 1e-9 * (1.0 + row.alpha.abs()) {
        bail!(
            "decomposition sum {total:e} disagrees with reported alpha {:e}",
            row.alpha
        );
    }
    let (dominant, value) = terms
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one term");
    println!("  dominant term: {dominant} ({value:.6e})");
    if let Some(gap) = row.gap {
        println!(
            "  measured gap at t={t}: {gap:.12e}, slack {:.12e}",
            row.slack.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
