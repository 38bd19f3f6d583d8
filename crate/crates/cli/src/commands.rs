use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use pmfuse::config::Config;
use pmfuse::conflate::ConflationMethod;
use pmfuse::io::{self, ConflationMetricRow, ImprovementRow, SummaryRow};
use pmfuse::measures::{percent_error, ErrorMetrics, Method, Totals};
use pmfuse::pipeline::{self, RunInputs, RunResult};

use crate::manifest::{RunKey, RunManifest};
use crate::{Cli, CliError, Command, MethodChoice};

const DETECTOR_FILE: &str = "detector.csv";
const VENDOR_FILE: &str = "vendor.csv";
const TRUTH_FILE: &str = "truth.csv";

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate => simulate(cli, &cfg),
        Command::Conflate => {
            let results = evaluate_all(cli, &cfg)?;
            write_conflation(&cli.out, &results)
        }
        Command::Report => {
            let results = evaluate_all(cli, &cfg)?;
            write_report(&cli.out, cli.method, &results)
        }
        Command::Compare => {
            let results = evaluate_all(cli, &cfg)?;
            write_conflation(&cli.out, &results)?;
            write_report(&cli.out, cli.method, &results)?;
            let table = comparison_table(cli.method, &results);
            io::write_text(&cli.out.join("comparison.txt"), &table)?;
            print!("{table}");
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    let loaded = match path {
        Some(p) => Config::load(p),
        None => Config::parse("", std::env::vars()),
    };
    loaded.map_err(|e| CliError::Config(e.to_string()))
}

fn configured_runs(cli: &Cli, cfg: &Config) -> Vec<RunKey> {
    cfg.scenarios
        .iter()
        .flat_map(|s| {
            let seeds = cli.seed.clone().unwrap_or_else(|| s.seeds.clone());
            seeds.into_iter().map(|seed| RunKey {
                scenario: s.name.clone(),
                seed,
            })
        })
        .collect()
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn simulate(cli: &Cli, cfg: &Config) -> Result<(), CliError> {
    let runs = configured_runs(cli, cfg);
    if runs.is_empty() {
        return Err(CliError::Config("no scenario or seed selected".into()));
    }
    create_dir(&cli.out)?;
    runs.par_iter().try_for_each(|key| -> Result<(), CliError> {
        let spec = cfg.scenario(&key.scenario).expect("run keys come from the configuration");
        let (_, inputs) = pipeline::simulate(cfg, spec, key.seed)?;
        let dir = key.dir(&cli.out);
        create_dir(&dir)?;
        io::write_detector_csv(&dir.join(DETECTOR_FILE), &inputs.grid, &inputs.samples)?;
        io::write_vendor_csv(&dir.join(VENDOR_FILE), &inputs.grid, &inputs.vendor)?;
        io::write_truth_csv(&dir.join(TRUTH_FILE), &inputs.truth)?;
        eprintln!("simulated {} seed {}", key.scenario, key.seed);
        Ok(())
    })?;
    let mut seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    RunManifest {
        config_path: cli.config.clone(),
        config_hash: cfg.hash.clone(),
        output_dir: cli.out.clone(),
        method: cli.method,
        scenarios: cfg.scenarios.iter().map(|s| s.name.clone()).collect(),
        seeds,
        runs,
    }
    .write(&cli.out)
}

/// Runs to evaluate: explicit seeds win, then the manifest, then the config.
fn runs_to_evaluate(cli: &Cli, cfg: &Config) -> Result<Vec<RunKey>, CliError> {
    if cli.seed.is_some() {
        return Ok(configured_runs(cli, cfg));
    }
    match RunManifest::read(&cli.out)? {
        Some(m) => {
            if m.config_hash != cfg.hash {
                eprintln!("warning: {} was simulated with a different configuration", cli.out.display());
            }
            Ok(m.runs)
        }
        None => Ok(configured_runs(cli, cfg)),
    }
}

fn load_inputs(key: &RunKey, dir: &Path) -> Result<RunInputs, CliError> {
    let truth = io::read_truth_csv(&dir.join(TRUTH_FILE))?;
    let grid = truth.window.clone();
    let (samples, skipped_d) = io::read_detector_csv(&dir.join(DETECTOR_FILE), &grid)?;
    let (vendor, skipped_v) = io::read_vendor_csv(&dir.join(VENDOR_FILE), &grid)?;
    if skipped_d + skipped_v > 0 {
        eprintln!(
            "warning: {}: skipped {skipped_d} detector and {skipped_v} vendor rows outside the analysis window",
            dir.display()
        );
    }
    Ok(RunInputs {
        scenario: key.scenario.clone(),
        seed: key.seed,
        grid,
        samples,
        vendor,
        truth,
    })
}

fn evaluate_all(cli: &Cli, cfg: &Config) -> Result<Vec<RunResult>, CliError> {
    let runs = runs_to_evaluate(cli, cfg)?;
    if runs.is_empty() {
        return Err(CliError::Config("no scenario or seed selected".into()));
    }
    let missing: Vec<PathBuf> = runs
        .iter()
        .flat_map(|k| {
            let dir = k.dir(&cli.out);
            [DETECTOR_FILE, VENDOR_FILE, TRUTH_FILE].map(|f| dir.join(f))
        })
        .filter(|p| !p.exists())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::MissingInputs(missing));
    }
    runs.par_iter()
        .map(|key| {
            let inputs = load_inputs(key, &key.dir(&cli.out))?;
            Ok(pipeline::evaluate(cfg, &inputs)?)
        })
        .collect()
}

/// Results grouped by scenario, in first-seen order.
fn by_scenario(results: &[RunResult]) -> Vec<(&str, Vec<&RunResult>)> {
    let mut out: Vec<(&str, Vec<&RunResult>)> = Vec::new();
    for r in results {
        match out.iter_mut().find(|(s, _)| *s == r.scenario) {
            Some((_, v)) => v.push(r),
            None => out.push((&r.scenario, vec![r])),
        }
    }
    out
}

fn metric_rows(scenario: &str, per_seed: &[&RunResult]) -> Vec<ConflationMetricRow> {
    let mut rows = Vec::new();
    for m in [ConflationMethod::Gasm, ConflationMethod::Cgasm] {
        for (q, get) in [
            ("flow", (|f: &pipeline::ConflatedFields| f.flow_error) as fn(&_) -> _),
            ("speed", |f: &pipeline::ConflatedFields| f.speed_error),
        ] {
            let found: Vec<ErrorMetrics> = per_seed.iter().filter_map(|r| get(r.fields(m))).collect();
            if found.is_empty() {
                continue;
            }
            let k = found.len() as f64;
            rows.push(ConflationMetricRow {
                scenario: scenario.to_string(),
                method: m.name().to_string(),
                quantity: q.to_string(),
                metrics: ErrorMetrics {
                    mae: found.iter().map(|e| e.mae).sum::<f64>() / k,
                    mape: found.iter().map(|e| e.mape).sum::<f64>() / k,
                    n: found.iter().map(|e| e.n).sum(),
                },
            });
        }
    }
    rows
}

fn write_conflation(out: &Path, results: &[RunResult]) -> Result<(), CliError> {
    results.par_iter().try_for_each(|r| -> Result<(), CliError> {
        let dir = RunKey {
            scenario: r.scenario.clone(),
            seed: r.seed,
        }
        .dir(out);
        for m in [ConflationMethod::Gasm, ConflationMethod::Cgasm] {
            let f = r.fields(m);
            let path = dir.join(format!("conflated_{}.csv", m.name()));
            io::write_field_csv(&path, &r.grid, &r.eps, &f.flow, &f.speed, &f.density)?;
        }
        io::write_conflation_metrics_csv(&dir.join("conflation_metrics.csv"), &metric_rows(&r.scenario, &[r]))?;
        Ok(())
    })?;
    let rows: Vec<ConflationMetricRow> =
        by_scenario(results).iter().flat_map(|(s, v)| metric_rows(s, v)).collect();
    io::write_conflation_metrics_csv(&out.join("conflation_metrics.csv"), &rows)?;
    Ok(())
}

fn methods(choice: MethodChoice) -> Vec<Method> {
    match choice {
        MethodChoice::Traditional => vec![Method::GroundTruth, Method::Traditional],
        MethodChoice::Hybrid => vec![Method::GroundTruth, Method::Hybrid],
        MethodChoice::Both => vec![Method::GroundTruth, Method::Traditional, Method::Hybrid],
    }
}

fn summary_rows(choice: MethodChoice, scenario: &str, per_seed: &[&RunResult]) -> Vec<SummaryRow> {
    methods(choice)
        .into_iter()
        .map(|m| SummaryRow {
            scenario: scenario.to_string(),
            method: m,
            totals: pipeline::mean_totals(per_seed, m),
        })
        .collect()
}

fn write_report(out: &Path, choice: MethodChoice, results: &[RunResult]) -> Result<(), CliError> {
    results.par_iter().try_for_each(|r| -> Result<(), CliError> {
        let dir = RunKey {
            scenario: r.scenario.clone(),
            seed: r.seed,
        }
        .dir(out);
        io::write_summary_csv(&dir.join("summary.csv"), &summary_rows(choice, &r.scenario, &[r]))?;
        let reports: Vec<_> = methods(choice).into_iter().map(|m| r.report(m)).collect();
        io::write_breakdown_csv(&dir.join("breakdown.csv"), &r.scenario, &r.grid, &reports)?;
        Ok(())
    })?;
    let grouped = by_scenario(results);
    let summary: Vec<SummaryRow> = grouped.iter().flat_map(|(s, v)| summary_rows(choice, s, v)).collect();
    io::write_summary_csv(&out.join("summary.csv"), &summary)?;
    io::write_measures_csv(&out.join("measures.csv"), &summary)?;
    if choice == MethodChoice::Both {
        let rows: Vec<ImprovementRow> = grouped
            .iter()
            .flat_map(|(s, v)| {
                let t = |m| pipeline::mean_totals(v, m);
                ImprovementRow::from_totals(s, &t(Method::Traditional), &t(Method::Hybrid), &t(Method::GroundTruth))
            })
            .collect();
        io::write_improvement_csv(&out.join("improvement.csv"), &rows)?;
    }
    Ok(())
}

fn fmt_err(e: Option<f64>) -> String {
    e.map(|v| format!("{v:.2}%")).unwrap_or_else(|| "-".into())
}

/// Seed-averaged measures per scenario with percent errors against truth.
fn comparison_table(choice: MethodChoice, results: &[RunResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<22}{:<14}{:>12}{:>10}{:>10}{:>10}{:>10}{:>10}",
        "scenario", "method", "vmt", "vht", "vhd", "vmt err", "vht err", "vhd err"
    );
    for (scenario, v) in by_scenario(results) {
        let truth = pipeline::mean_totals(&v, Method::GroundTruth);
        for m in methods(choice) {
            let t: Totals = pipeline::mean_totals(&v, m);
            let _ = writeln!(
                s,
                "{:<22}{:<14}{:>12.2}{:>10.2}{:>10.2}{:>10}{:>10}{:>10}",
                scenario,
                m.name(),
                t.vmt,
                t.vht,
                t.vhd,
                fmt_err((m != Method::GroundTruth).then(|| percent_error(t.vmt, truth.vmt)).flatten()),
                fmt_err((m != Method::GroundTruth).then(|| percent_error(t.vht, truth.vht)).flatten()),
                fmt_err((m != Method::GroundTruth).then(|| percent_error(t.vhd, truth.vhd)).flatten()),
            );
        }
        if choice == MethodChoice::Both {
            let imp = pmfuse::measures::improvement(
                &pipeline::mean_totals(&v, Method::Traditional),
                &pipeline::mean_totals(&v, Method::Hybrid),
                &truth,
            );
            let p = |x: Option<f64>| x.map(|v| format!("{v:+.2}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "{:<22}{:<14}{:>12}{:>10}{:>10}{:>10}{:>10}{:>10}",
                scenario,
                "improvement",
                "",
                "",
                "",
                p(imp.vmt),
                p(imp.vht),
                p(imp.vhd)
            );
        }
        let rows = metric_rows(scenario, &v);
        let mape = |m: &str| {
            rows.iter()
                .find(|r| r.method == m && r.quantity == "flow")
                .map(|r| format!("{:.2}%", r.metrics.mape))
                .unwrap_or_else(|| "-".into())
        };
        let _ = writeln!(s, "{:<22}flow MAPE gasm {} cgasm {}", scenario, mape("gasm"), mape("cgasm"));
    }
    s
}
