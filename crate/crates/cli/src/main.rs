//! `silentwatch` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage, 3 invalid configuration,
//! 4 regression failure (including a missing baseline).

mod grid;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use silentwatch::analysis::{self, Regime};
use silentwatch::config::{scenario_by_name, ConfigFile, Violation, DEFAULT_SEED};
use silentwatch::io::{self, RunManifest};
use silentwatch::{regress, simulate, BenchmarkParams, Error, MissionMetrics, ScenarioCase};

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INVALID: u8 = 3;
const EXIT_REGRESSION: u8 = 4;

#[derive(Parser)]
#[command(
    name = "silentwatch",
    version,
    about = "Silent-watch SOC spoofing benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config file ({"params": {...}, "scenario": {...}}).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
    /// Seed override for the noise streams.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace, metrics and manifest.
    Run {
        /// nominal, attacked, defended, attacked-multi or defended-multi.
        /// Defaults to the config file's scenario section.
        scenario: Option<String>,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = TraceFormat::Csv)]
        trace_format: TraceFormat,
    },
    /// Parameter sweeps.
    Sweep {
        #[command(subcommand)]
        kind: SweepKind,
    },
    /// Record or check the golden baselines of the reference scenarios.
    Regress {
        #[arg(value_enum)]
        mode: RegressMode,
        #[arg(long, default_value = "goldens/reference.json")]
        golden: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Validate a config file.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Grid-search the load-step onsets and print the best candidate.
    Calibrate {
        /// Grid spacing in seconds.
        #[arg(long, default_value_t = 50.0)]
        resolution: f64,
        /// Write the calibrated params as a config file.
        #[arg(long)]
        write_config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

// Grids are spelled `std::vec::Vec` so clap parses each as one value
// instead of a repeated argument.
#[derive(Subcommand)]
enum SweepKind {
    /// Nominal/Attacked/Defended over attack bias, with regimes and the
    /// deficit model check.
    Bias {
        /// start:stop:step or a comma list.
        #[arg(long, value_parser = grid::parse_grid, default_value = "0:0.6:0.02")]
        biases: std::vec::Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Defended runs over fallback shed fraction at the headline bias.
    Depth {
        #[arg(long, value_parser = grid::parse_grid, default_value = "0.2:1:0.2")]
        fractions: std::vec::Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Bias x fraction grid with completion and J_LOL parity contours.
    Heatmap {
        #[arg(long, value_parser = grid::parse_grid, default_value = "0:0.6:0.02")]
        biases: std::vec::Vec<f64>,
        #[arg(long, value_parser = grid::parse_grid, default_value = "0.2:1:0.05")]
        fractions: std::vec::Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceFormat {
    Csv,
    Json,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegressMode {
    Record,
    Check,
}

enum Failure {
    Usage(String),
    Invalid(Vec<Violation>),
    Regression(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Invalid(v) if v.iter().any(|x| x.field.ends_with("_grid")) => {
                Failure::Usage(Error::Invalid(v).to_string())
            }
            Error::Invalid(v) => Failure::Invalid(v),
            Error::NoBaseline(p) => Failure::Regression(format!(
                "no baseline at {}; run `regress record` first",
                p.display()
            )),
            other => Failure::Runtime(other.into()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Invalid(v)) => {
            eprintln!("invalid configuration:");
            for x in v {
                eprintln!("  {x}");
            }
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Regression(msg)) => {
            eprintln!("regression: {msg}");
            ExitCode::from(EXIT_REGRESSION)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Run {
            scenario,
            common,
            trace_format,
        } => cmd_run(scenario.as_deref(), &common, trace_format),
        Command::Sweep { kind } => match kind {
            SweepKind::Bias { biases, common } => cmd_sweep_bias(&biases, &common),
            SweepKind::Depth { fractions, common } => cmd_sweep_depth(&fractions, &common),
            SweepKind::Heatmap {
                biases,
                fractions,
                common,
            } => cmd_sweep_heatmap(&biases, &fractions, &common),
        },
        Command::Regress {
            mode,
            golden,
            common,
        } => cmd_regress(mode, &golden, &common),
        Command::Validate { common } => cmd_validate(&common),
        Command::Calibrate {
            resolution,
            write_config,
            common,
        } => cmd_calibrate(resolution, write_config.as_deref(), &common),
    }
}

/// Loads and validates the config (defaults when no file is given).
fn load_config(common: &Common) -> Result<ConfigFile, Failure> {
    let cfg = match &common.config {
        None => ConfigFile::default(),
        Some(path) => match ConfigFile::load(path) {
            Ok(c) => c,
            Err(Error::Json(e)) => {
                return Err(Failure::Invalid(vec![Violation {
                    field: path.display().to_string(),
                    rule: e.to_string(),
                }]))
            }
            Err(e) => return Err(Failure::Usage(e.to_string())),
        },
    };
    cfg.validate().map_err(Failure::Invalid)?;
    Ok(cfg)
}

fn seed_of(common: &Common) -> u64 {
    common.seed.unwrap_or(DEFAULT_SEED)
}

fn resolve_case(
    name: Option<&str>,
    cfg: &ConfigFile,
    common: &Common,
) -> Result<ScenarioCase, Failure> {
    let mut case = match (name, &cfg.scenario) {
        (Some(n), _) => scenario_by_name(&cfg.params, n).ok_or_else(|| {
            Failure::Usage(format!(
                "unknown scenario {n:?} (expected nominal, attacked, defended, attacked-multi, defended-multi)"
            ))
        })?,
        (None, Some(s)) => s.to_case(),
        (None, None) => {
            return Err(Failure::Usage(
                "no scenario given and the config has no scenario section".into(),
            ))
        }
    };
    if let Some(seed) = common.seed {
        case.seed = seed;
    }
    let v = case.validate(&cfg.params);
    if !v.is_empty() {
        return Err(Failure::Invalid(v));
    }
    Ok(case)
}

fn manifest(p: &BenchmarkParams, scenario: &str, seed: u64, outputs: Vec<PathBuf>) -> RunManifest {
    RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: io::config_hash(p),
        scenario: scenario.to_string(),
        seed,
        outputs,
        timestamp: chrono::Utc::now().to_rfc3339(),
    }
}

fn finish(dir: &Path, m: &RunManifest) -> Outcome {
    io::write_json(&dir.join("manifest.json"), m)?;
    Ok(())
}

fn cmd_run(name: Option<&str>, common: &Common, format: TraceFormat) -> Outcome {
    let cfg = load_config(common)?;
    let p = &cfg.params;
    let case = resolve_case(name, &cfg, common)?;
    let out = simulate(&case, p)?;
    let metrics = silentwatch::compute_all(&out.trace, &case, p);
    let hash = io::config_hash(p);
    let digest = io::trace_digest(&out.trace);

    let dir = common.out.join(case.name());
    let mut outputs = Vec::new();
    if matches!(format, TraceFormat::Csv | TraceFormat::Both) {
        let path = dir.join("trace.csv");
        io::write_trace_csv(&path, &out.trace, &hash)?;
        outputs.push(path);
    }
    if matches!(format, TraceFormat::Json | TraceFormat::Both) {
        let path = dir.join("trace.json");
        io::write_trace_json(&path, &out.trace, &hash)?;
        outputs.push(path);
    }
    let path = dir.join("metrics.json");
    io::write_json(
        &path,
        &io::metrics_document(&case.name(), case.seed, &metrics, &digest, &hash),
    )?;
    outputs.push(path);

    println!("{}", MissionMetrics::table_header());
    println!("{}", metrics.table_row(&case.name()));
    finish(&dir, &manifest(p, &case.name(), case.seed, outputs))
}

fn cmd_sweep_bias(grid: &[f64], common: &Common) -> Outcome {
    let cfg = load_config(common)?;
    let p = &cfg.params;
    let seed = seed_of(common);
    let sweep = analysis::sweep_bias(grid, p, seed)?;
    let regimes = analysis::regime_report(&sweep);
    let (model, checks) = match analysis::fit_deficit_model(&sweep, p, seed) {
        Ok(m) => {
            let c = analysis::validate_deficit(&sweep, &m);
            (Some(m), c)
        }
        Err(Error::Unfittable(why)) => {
            eprintln!("deficit model not fitted: {why}");
            (None, Vec::new())
        }
        Err(e) => return Err(e.into()),
    };
    let hash = io::config_hash(p);
    let dir = common.out.join("sweep-bias");
    let csv = dir.join("bias_sweep.csv");
    let json = dir.join("bias_sweep.json");
    io::write_bias_sweep_csv(&csv, &sweep, &hash)?;
    io::write_json(
        &json,
        &io::bias_sweep_summary(&sweep, &regimes, model.as_ref(), &checks, &hash),
    )?;

    println!(
        "{:>6} {:>10} {:>9} {:>9} {:>8}",
        "bias", "regime", "att_end", "def_end", "det(s)"
    );
    for x in &sweep {
        let det = x
            .defended
            .time_to_detection_s
            .map_or("inf".to_string(), |d| format!("{d:.1}"));
        println!(
            "{:>6.2} {:>10} {:>9.2} {:>9.2} {:>8}",
            x.bias,
            x.regime.as_str(),
            x.attacked.endurance_min,
            x.defended.endurance_min,
            det
        );
    }
    let count = |r: Regime| sweep.iter().filter(|x| x.regime == r).count();
    println!(
        "regimes: stealth {} delay {} full_blind {}",
        count(Regime::Stealth),
        count(Regime::Delay),
        count(Regime::FullBlind)
    );
    if let Some(worst) = checks.iter().map(|c| c.abs_error_min).reduce(f64::max) {
        println!("deficit model: max |predicted - simulated| = {worst:.3} min");
    }
    finish(&dir, &manifest(p, "sweep-bias", seed, vec![csv, json]))
}

fn cmd_sweep_depth(fractions: &[f64], common: &Common) -> Outcome {
    let cfg = load_config(common)?;
    let p = &cfg.params;
    let seed = seed_of(common);
    let sweep = analysis::sweep_depth(fractions, p, seed)?;
    let hash = io::config_hash(p);
    let dir = common.out.join("sweep-depth");
    let csv = dir.join("depth_sweep.csv");
    let json = dir.join("depth_sweep.json");
    io::write_depth_csv(&csv, &sweep, &hash)?;
    io::write_json(
        &json,
        &serde_json::json!({
            "schema": io::DEPTH_SWEEP_SCHEMA,
            "config_hash": hash,
            "bias": sweep.bias,
            "attacked": sweep.attacked,
            "first_completing_fraction": sweep.first_completing(p),
        }),
    )
    .context("writing depth summary")?;

    println!("{}", MissionMetrics::table_header());
    println!("{}", sweep.attacked.table_row("attacked"));
    for r in &sweep.rows {
        println!(
            "{}",
            r.defended.table_row(&format!("f = {:.2}", r.fraction))
        );
    }
    finish(&dir, &manifest(p, "sweep-depth", seed, vec![csv, json]))
}

fn cmd_sweep_heatmap(biases: &[f64], fractions: &[f64], common: &Common) -> Outcome {
    let cfg = load_config(common)?;
    let p = &cfg.params;
    let seed = seed_of(common);
    let hm = analysis::heatmap(biases, fractions, p, seed)?;
    let hash = io::config_hash(p);
    let dir = common.out.join("sweep-heatmap");
    let csv = dir.join("heatmap.csv");
    let json = dir.join("heatmap.json");
    io::write_heatmap_csv(&csv, &hm, &hash)?;
    io::write_json(&json, &io::heatmap_summary(&hm, &hash))?;

    println!(
        "{} cells; completion contour {} points, parity contour {} points",
        hm.biases.len() * hm.fractions.len(),
        hm.completion_boundary.len(),
        hm.parity_boundary.len()
    );
    let show = |x: Option<f64>| x.map_or("none".to_string(), |f| format!("{f:.3}"));
    let b = silentwatch::config::HEADLINE_BIAS;
    println!(
        "at bias {b}: completion fraction {}, parity fraction {}",
        show(hm.completion_fraction_at(b)),
        show(hm.parity_fraction_at(b))
    );
    finish(&dir, &manifest(p, "sweep-heatmap", seed, vec![csv, json]))
}

fn cmd_regress(mode: RegressMode, golden: &Path, common: &Common) -> Outcome {
    let cfg = load_config(common)?;
    let p = &cfg.params;
    match mode {
        RegressMode::Record => {
            let g = regress::record(p, seed_of(common), golden)?;
            for r in &g.records {
                println!("recorded {:<16} {}", r.scenario, r.trace_digest);
            }
            println!(
                "wrote {} scenarios to {}",
                g.records.len(),
                golden.display()
            );
            Ok(())
        }
        RegressMode::Check => {
            let report = regress::check(p, golden)?;
            for r in &report.parity {
                println!("parity {:<16} max diff {:e}", r.scenario, r.max_diff());
            }
            for d in &report.diffs {
                println!(
                    "diff {} {}: expected {} actual {}",
                    d.scenario, d.field, d.expected, d.actual
                );
            }
            let failing: std::collections::BTreeSet<&str> =
                report.diffs.iter().map(|d| d.scenario.as_str()).collect();
            let total = report.parity.len();
            let ok = report
                .parity
                .iter()
                .filter(|r| !failing.contains(r.scenario.as_str()) && r.max_diff() == 0.0)
                .count();
            println!("{ok}/{total} scenarios pass, {} diffs", report.diffs.len());
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Regression(format!("{} diffs", report.diffs.len())))
            }
        }
    }
}

fn cmd_validate(common: &Common) -> Outcome {
    let cfg = load_config(common)?;
    if let Some(s) = &cfg.scenario {
        let case = s.to_case();
        println!("scenario {} (seed {})", case.name(), case.seed);
    }
    println!("config ok, hash {}", io::config_hash(&cfg.params));
    Ok(())
}

fn cmd_calibrate(resolution: f64, write_config: Option<&Path>, common: &Common) -> Outcome {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Failure::Usage("resolution must be positive".into()));
    }
    let cfg = load_config(common)?;
    let report = analysis::calibrate_steps(&cfg.params, resolution, seed_of(common))?;
    println!(
        "evaluated {} candidates, {} admissible",
        report.evaluated, report.admissible
    );
    let Some(best) = report.best else {
        return Err(Failure::Runtime(anyhow::anyhow!("no admissible candidate")));
    };
    println!(
        "best tc_step = {} s, th_step = {} s (score {})",
        best.tc_step, best.th_step, report.best_score
    );
    println!("{}", MissionMetrics::table_header());
    for (label, m) in [
        ("nominal", &best.nominal),
        ("attacked", &best.attacked),
        ("defended", &best.defended),
        ("depth 0.2", &best.depth_02),
        ("depth 0.4", &best.depth_04),
        ("depth 1.0", &best.depth_10),
    ] {
        println!("{}", m.table_row(label));
    }
    if let Some(path) = write_config {
        let file = ConfigFile {
            params: BenchmarkParams {
                tc_step: best.tc_step,
                th_step: best.th_step,
                ..cfg.params
            },
            scenario: None,
        };
        io::write_json(path, &file)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
