//! `convlab`: run convergence scenarios and write their reports.

use anyhow::{anyhow, bail, Context};
use clap::{Parser, ValueEnum};
use convlab::lab::{self, ConvergenceReport, McConfig, Params, SCENARIOS};
use serde::Deserialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "convlab",
    about = "Desk-scale checks of classical limit theorems"
)]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario id to run (repeatable); ALL runs the whole catalog.
    #[arg(long = "scenario", value_name = "ID")]
    scenarios: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Output directory for reports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format (repeatable).
    #[arg(long = "format", value_enum)]
    formats: Vec<Format>,
    #[arg(long)]
    workers: Option<usize>,
    /// Print the scenario catalog and exit.
    #[arg(long)]
    list: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    scenarios: Vec<ScenarioEntry>,
    #[serde(default)]
    mc: FileMc,
    #[serde(default)]
    output: FileOutput,
    workers: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScenarioEntry {
    Id(String),
    WithParams {
        id: String,
        #[serde(default)]
        params: Params,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileMc {
    seed: Option<u64>,
    replicates: Option<usize>,
    sample_sizes: Option<Vec<u64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileOutput {
    directory: Option<PathBuf>,
    formats: Option<Vec<Format>>,
}

/// A fully resolved run.
struct RunConfig {
    scenarios: Vec<(String, Params)>,
    mc: McConfig,
    out: PathBuf,
    formats: Vec<Format>,
}

fn expand(entries: Vec<(String, Params)>) -> anyhow::Result<Vec<(String, Params)>> {
    let mut out = Vec::new();
    for (id, params) in entries {
        if id == "ALL" {
            if !params.is_empty() {
                bail!("ALL takes no parameters");
            }
            out.extend(SCENARIOS.iter().map(|s| (s.id.to_string(), Params::new())));
        } else if lab::scenario_info(&id).is_some() {
            out.push((id, params));
        } else {
            bail!("unknown scenario `{id}` (see --list)");
        }
    }
    Ok(out)
}

fn resolve(cli: Cli) -> anyhow::Result<RunConfig> {
    let file = match &cli.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<FileConfig>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => FileConfig::default(),
    };
    let entries = if cli.scenarios.is_empty() {
        file.scenarios
            .into_iter()
            .map(|e| match e {
                ScenarioEntry::Id(id) => (id, Params::new()),
                ScenarioEntry::WithParams { id, params } => (id, params),
            })
            .collect()
    } else {
        cli.scenarios
            .into_iter()
            .map(|id| (id, Params::new()))
            .collect()
    };
    let seed = cli
        .seed
        .or(file.mc.seed)
        .ok_or_else(|| anyhow!("a seed is required (--seed or mc.seed)"))?;
    let mut mc = McConfig::new(seed);
    if let Some(r) = cli.replicates.or(file.mc.replicates) {
        mc.replicates = r;
    }
    mc.sample_sizes = file.mc.sample_sizes;
    mc.workers = cli.workers.or(file.workers).unwrap_or(1);
    if mc.workers == 0 {
        bail!("--workers must be at least 1");
    }
    let mut formats = if cli.formats.is_empty() {
        file.output.formats.unwrap_or_default()
    } else {
        cli.formats
    };
    if formats.is_empty() {
        formats.push(Format::Json);
    }
    formats.dedup();
    Ok(RunConfig {
        scenarios: expand(entries)?,
        mc,
        out: cli
            .out
            .or(file.output.directory)
            .unwrap_or_else(|| PathBuf::from("reports")),
        formats,
    })
}

fn write_reports(
    dir: &Path,
    report: &ConvergenceReport,
    overlay: Option<&lab::report::CdfOverlay>,
    formats: &[Format],
) -> anyhow::Result<()> {
    let stem = format!("{}_seed{}", report.scenario, report.mc.seed);
    for f in formats {
        match f {
            Format::Json => {
                let mut js = report.to_json()?;
                js.push('\n');
                fs::write(dir.join(format!("{stem}.json")), js)?;
            }
            Format::Csv => {
                report.write_csv(fs::File::create(dir.join(format!("{stem}.csv")))?)?;
                if let Some(o) = overlay {
                    o.write_csv(fs::File::create(dir.join(format!("{stem}_cdf.csv")))?)?;
                }
            }
        }
    }
    Ok(())
}

fn list() {
    for s in SCENARIOS {
        println!("{:<13} \"{}\"", s.id, s.anchor);
        println!("{:<13} {}", "", s.summary);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list {
        list();
        return ExitCode::SUCCESS;
    }
    let run = match resolve(cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if !run.scenarios.is_empty() {
        if let Err(e) = fs::create_dir_all(&run.out) {
            eprintln!("config error: cannot create {}: {e}", run.out.display());
            return ExitCode::from(2);
        }
    }
    println!(
        "{:<13} {:>14} {:>12}  verdict",
        "scenario", "final", "tolerance"
    );
    let mut failed = Vec::new();
    for (id, params) in &run.scenarios {
        let outcome = lab::run_scenario(id, params, &run.mc).and_then(|r| {
            let overlay = lab::cdf_overlay(id, params, &run.mc)?;
            Ok((r, overlay))
        });
        let (report, overlay) = match outcome {
            Ok(x) => x,
            Err(e) => {
                eprintln!("{id}: {e}");
                return ExitCode::from(2);
            }
        };
        if let Err(e) = write_reports(&run.out, &report, overlay.as_ref(), &run.formats) {
            eprintln!("{id}: writing reports: {e:#}");
            return ExitCode::from(2);
        }
        let verdict = if report.passed() { "pass" } else { "fail" };
        println!(
            "{:<13} {:>14.6e} {:>12.4e}  {verdict}",
            report.scenario,
            report.final_value(),
            report.tolerance
        );
        if !report.passed() {
            failed.push(report.scenario.clone());
        }
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failing scenarios: {}", failed.join(", "));
        ExitCode::from(1)
    }
}
