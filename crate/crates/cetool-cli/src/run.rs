//! The `run` subcommand: execute every configured scenario, persist reports,
//! and assemble the summary.

use crate::config::{RunConfig, ScenarioSource};
use anyhow::{Context, Result};
use cetool_core::bounds::{verify_bound, ModuliKind, VerifyOptions};
use cetool_core::model::{AbstractionDef, EstimatorDef, ModelFile};
use cetool_core::report::{fmt_float, BoundReport};
use cetool_core::scenarios::{bound_only_report, Scenario, ScenarioSpec};
use std::fs;
use std::path::{Path, PathBuf};

pub struct RunArgs {
    pub config: PathBuf,
    pub moduli: Option<ModuliKind>,
    pub budget: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub families: Option<Vec<String>>,
    pub workers: Option<usize>,
}

struct Job {
    index: usize,
    label: String,
    family: String,
    /// Sweep coordinate for plot data (family-specific parameter).
    sweep: f64,
    source: ScenarioSource,
}

struct JobOutcome {
    index: usize,
    label: String,
    family: String,
    sweep: f64,
    result: std::result::Result<BoundReport, String>,
}

pub fn run(args: RunArgs) -> Result<i32> {
    let mut cfg = RunConfig::load(&args.config)?;

    // Precedence: CLI flag, then CETOOL_BUDGET, then config.
    if let Ok(env_budget) = std::env::var("CETOOL_BUDGET") {
        cfg.budget = env_budget
            .parse()
            .context("CETOOL_BUDGET must be an integer")?;
    }
    if let Some(b) = args.budget {
        cfg.budget = b;
    }
    if let Some(m) = args.moduli {
        cfg.moduli = m;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let out_dir = args
        .out
        .or(cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("cetool-out"));
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create output dir {}", out_dir.display()))?;

    let jobs = expand_jobs(&cfg, args.families.as_deref())?;
    if jobs.is_empty() {
        anyhow::bail!("family filter matched no scenarios");
    }

    let workers = args.workers.or(cfg.workers).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("cannot build worker pool")?;

    let knobs = Knobs {
        budget: cfg.budget,
        moduli: cfg.moduli,
        episodes: cfg.mc_episodes,
        seed: cfg.seed,
        tolerance: cfg.tolerance,
    };
    let out_ref = out_dir.clone();
    let mut outcomes: Vec<JobOutcome> = pool.install(|| {
        use rayon::prelude::*;
        jobs.into_par_iter()
            .map(|job| execute_job(job, knobs, &out_ref))
            .collect()
    });
    outcomes.sort_by_key(|o| o.index);

    write_summary(&out_dir, &outcomes)?;
    write_plot_data(&out_dir, &outcomes)?;

    let mut failures = 0usize;
    println!(
        "{:<4} {:<44} {:>10} {:>14}",
        "id", "scenario", "verdict", "worst_slack"
    );
    for o in &outcomes {
        match &o.result {
            Ok(report) => {
                let slack = report
                    .worst_slack
                    .map(|s| format!("{s:.3e}"))
                    .unwrap_or_else(|| "-".into());
                println!(
                    "{:<4} {:<44} {:>10} {:>14}",
                    o.index, o.label, "pass", slack
                );
            }
            Err(msg) => {
                failures += 1;
                println!("{:<4} {:<44} {:>10} {:>14}", o.index, o.label, "FAIL", "-");
                eprintln!("scenario {} failed: {msg}", o.label);
            }
        }
    }
    println!(
        "{} scenarios, {} failed; outputs in {}",
        outcomes.len(),
        failures,
        out_dir.display()
    );
    Ok(if failures > 0 { 1 } else { 0 })
}

fn expand_jobs(cfg: &RunConfig, families: Option<&[String]>) -> Result<Vec<Job>> {
    let mut jobs = Vec::new();
    for entry in &cfg.scenarios {
        for k in 0..entry.repeat.max(1) {
            let source = match &entry.source {
                ScenarioSource::Spec(spec) => ScenarioSource::Spec(reseed(spec.clone(), k as u64)),
                m @ ScenarioSource::Model { .. } => {
                    if k > 0 {
                        continue; // repeating a fixed model file adds nothing
                    }
                    m.clone()
                }
            };
            let (label, family, sweep) = match &source {
                ScenarioSource::Spec(spec) => (
                    spec.label(),
                    spec.family_name().to_string(),
                    sweep_value(spec),
                ),
                ScenarioSource::Model { model, .. } => (
                    model
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "model".into()),
                    "model".to_string(),
                    0.0,
                ),
            };
            if let Some(filter) = families {
                if !filter.iter().any(|f| f == &family) {
                    continue;
                }
            }
            jobs.push(Job {
                index: jobs.len(),
                label,
                family,
                sweep,
                source,
            });
        }
    }
    Ok(jobs)
}

fn reseed(spec: ScenarioSpec, offset: u64) -> ScenarioSpec {
    if offset == 0 {
        return spec;
    }
    let mut spec = spec;
    match &mut spec {
        ScenarioSpec::BoundedNoise { seed, .. }
        | ScenarioSpec::Intermittent { seed, .. }
        | ScenarioSpec::Quantized { seed, .. }
        | ScenarioSpec::Adaptive { seed, .. }
        | ScenarioSpec::EventTriggered { seed, .. }
        | ScenarioSpec::MeanField { seed, .. }
        | ScenarioSpec::Random { seed, .. } => *seed += offset,
    }
    spec
}

/// Parameter used as the x axis in per-family plot data.
fn sweep_value(spec: &ScenarioSpec) -> f64 {
    match spec {
        ScenarioSpec::BoundedNoise { radius, .. } => *radius as f64,
        ScenarioSpec::Intermittent { degraded_prob, .. } => *degraded_prob,
        ScenarioSpec::Quantized { cell, .. } => *cell as f64,
        ScenarioSpec::Adaptive { params, .. } => *params as f64,
        ScenarioSpec::EventTriggered { threshold, .. } => *threshold as f64,
        ScenarioSpec::MeanField { particles, .. } => *particles as f64,
        ScenarioSpec::Random { seed, .. } => *seed as f64,
    }
}

#[derive(Clone, Copy)]
struct Knobs {
    budget: usize,
    moduli: ModuliKind,
    episodes: usize,
    seed: u64,
    tolerance: f64,
}

fn execute_job(job: Job, knobs: Knobs, out_dir: &Path) -> JobOutcome {
    let result = (|| -> Result<BoundReport> {
        let scenario = materialize(&job.source, knobs.tolerance)?;
        let dir = out_dir.join(format!("{:03}_{}", job.index, job.label));
        fs::create_dir_all(&dir)?;
        let mut instance = ModelFile::from_pomdp(&scenario.pomdp);
        instance.abstraction = Some(AbstractionDef::from_abstraction(&scenario.abstraction));
        instance.estimator = EstimatorDef::from_estimator(&scenario.estimator);
        fs::write(dir.join("instance.json"), instance.to_json())?;

        let mut report = if scenario.bound_only {
            bound_only_report(
                &scenario,
                knobs.moduli,
                knobs.episodes,
                knobs.seed ^ job.index as u64,
            )?
        } else {
            let opts = VerifyOptions {
                budget: knobs.budget,
                moduli: knobs.moduli,
                ..Default::default()
            };
            let outcome = verify_bound(
                &scenario.pomdp,
                &scenario.abstraction,
                &scenario.estimator,
                opts,
            )?;
            let mut report = outcome.report;
            report.notes = scenario.notes.clone();
            report
        };
        report.instance_id = job.label.clone();
        report.family = job.family.clone();

        fs::write(dir.join("report.json"), report.to_json())?;
        fs::write(dir.join("report.csv"), report.to_csv())?;
        Ok(report)
    })();
    JobOutcome {
        index: job.index,
        label: job.label,
        family: job.family,
        sweep: job.sweep,
        result: result.map_err(|e| format!("{e:#}")),
    }
}

fn materialize(source: &ScenarioSource, tolerance: f64) -> Result<Scenario> {
    match source {
        ScenarioSource::Spec(spec) => Ok(spec.generate()?),
        ScenarioSource::Model {
            model,
            abstraction,
            estimator,
        } => {
            let text = fs::read_to_string(model)
                .with_context(|| format!("cannot read model {}", model.display()))?;
            let file = ModelFile::from_json(&text)?;
            let pomdp = file.to_pomdp_with_tolerance(tolerance)?;
            let ab = match abstraction.as_ref().or(file.abstraction.as_ref()) {
                Some(def) => def.to_abstraction(pomdp.n_states())?,
                None => cetool_core::abstraction::Abstraction::identity(pomdp.space()),
            };
            let est = match estimator.as_ref().or(file.estimator.as_ref()) {
                Some(def) => def.to_estimator(),
                None => cetool_core::estimator::Estimator::MapPosterior,
            };
            Ok(Scenario {
                label: "model".into(),
                family: "model",
                pomdp,
                abstraction: ab,
                estimator: est,
                closed_form: None,
                notes: Vec::new(),
                bound_only: false,
                mean_field: None,
            })
        }
    }
}

fn write_summary(out_dir: &Path, outcomes: &[JobOutcome]) -> Result<()> {
    let mut csv = String::from(
        "index,instance_id,family,mode,verdict,worst_slack,bound_t1,gap_t1,bound_gap_ratio\n",
    );
    let mut json_rows = Vec::new();
    for o in outcomes {
        match &o.result {
            Ok(r) => {
                let bound1 = r.rows.first().map(|row| row.bound).unwrap_or(f64::NAN);
                let gap1 = r.rows.first().and_then(|row| row.gap);
                let ratio = gap1.and_then(|g| if g > 0.0 { Some(bound1 / g) } else { None });
                csv.push_str(&format!(
                    "{},{},{},{},pass,{},{},{},{}\n",
                    o.index,
                    o.label,
                    o.family,
                    r.mode,
                    r.worst_slack.map(fmt_float).unwrap_or_default(),
                    fmt_float(bound1),
                    gap1.map(fmt_float).unwrap_or_default(),
                    ratio.map(fmt_float).unwrap_or_default(),
                ));
                json_rows.push(serde_json::json!({
                    "index": o.index,
                    "instance_id": o.label,
                    "family": o.family,
                    "mode": r.mode,
                    "verdict": "pass",
                    "worst_slack": r.worst_slack,
                    "bound_t1": bound1,
                    "gap_t1": gap1,
                }));
            }
            Err(msg) => {
                csv.push_str(&format!("{},{},{},,FAIL,,,,\n", o.index, o.label, o.family));
                json_rows.push(serde_json::json!({
                    "index": o.index,
                    "instance_id": o.label,
                    "family": o.family,
                    "verdict": "fail",
                    "error": msg,
                }));
            }
        }
    }

    // Per-family aggregates: worst slack and smallest bound/gap ratio.
    let mut families: Vec<String> = outcomes.iter().map(|o| o.family.clone()).collect();
    families.sort();
    families.dedup();
    let mut family_rows = Vec::new();
    for fam in &families {
        let mut worst_slack = f64::INFINITY;
        let mut min_ratio: Option<f64> = None;
        let mut pass = true;
        for o in outcomes.iter().filter(|o| &o.family == fam) {
            match &o.result {
                Ok(r) => {
                    if let Some(s) = r.worst_slack {
                        worst_slack = worst_slack.min(s);
                    }
                    if let (Some(row), true) = (r.rows.first(), r.mode == "exact") {
                        if let Some(g) = row.gap {
                            if g > 0.0 {
                                let ratio = row.bound / g;
                                min_ratio = Some(min_ratio.map_or(ratio, |m: f64| m.min(ratio)));
                            }
                        }
                    }
                }
                Err(_) => pass = false,
            }
        }
        family_rows.push(serde_json::json!({
            "family": fam,
            "verdict": if pass { "pass" } else { "fail" },
            "worst_slack": if worst_slack.is_finite() { Some(worst_slack) } else { None },
            "min_bound_gap_ratio": min_ratio,
        }));
    }

    let verdict = outcomes.iter().all(|o| o.result.is_ok());
    let summary = serde_json::json!({
        "pass": verdict,
        "scenarios": json_rows,
        "families": family_rows,
    });
    fs::write(out_dir.join("summary.csv"), csv)?;
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(())
}

/// Plot-ready sweep data per family: x = swept parameter, y = bound and gap
/// at t = 1.
fn write_plot_data(out_dir: &Path, outcomes: &[JobOutcome]) -> Result<()> {
    let mut families: Vec<String> = outcomes.iter().map(|o| o.family.clone()).collect();
    families.sort();
    families.dedup();
    for fam in &families {
        let mut rows: Vec<(f64, f64, Option<f64>)> = Vec::new();
        for o in outcomes.iter().filter(|o| &o.family == fam) {
            if let Ok(r) = &o.result {
                if let Some(row) = r.rows.first() {
                    rows.push((o.sweep, row.bound, row.gap));
                }
            }
        }
        if rows.len() < 2 {
            continue;
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out = String::from("param,bound,gap\n");
        for (x, bound, gap) in rows {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt_float(x),
                fmt_float(bound),
                gap.map(fmt_float).unwrap_or_default()
            ));
        }
        fs::write(out_dir.join(format!("plot_{fam}.csv")), out)?;
    }
    Ok(())
}
