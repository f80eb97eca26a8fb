use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use homeostat_core::degradation::quantize_loihi8;
use homeostat_core::experiments::suite::{
    read_trials_csv, reports_from_rows, trace_trial, write_metrics_csv, write_trace_csv,
    SuiteReport,
};
use homeostat_core::experiments::{
    classify_trace, compare, run_degradation_suite, run_toy, ClassifierConfig, StabilityVerdict,
    SuiteConfig, ToyAdapter, ToyScenario, TraceLog,
};
use homeostat_core::metrics::MetricsReport;
use homeostat_core::snn::{Checkpoint, RandomInit};

pub const THREADS_ENV: &str = "HOMEOSTAT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "homeostat",
    version,
    about = "Run DWAM homeostasis experiments on small spiking networks"
)]
pub struct Cli {
    /// Suppress the human-readable summary on stdout.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the single-output toy network and classify its rate trace.
    Toy(ToyArgs),
    /// Run the base-versus-degraded suite for every adapter setup.
    Suite(SuiteArgs),
    /// Quantize a checkpoint to 8-bit levels per layer.
    Quantize(QuantizeArgs),
    /// Recompute metrics reports from a trials CSV.
    Metrics(MetricsArgs),
    /// Compare the HM metrics of two adapters condition by condition.
    Compare(CompareArgs),
    /// Write a random checkpoint for the given layer sizes.
    Checkpoint(CheckpointArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AdapterArg {
    None,
    Biodwam,
    Dwam,
}

impl From<AdapterArg> for ToyAdapter {
    fn from(a: AdapterArg) -> Self {
        match a {
            AdapterArg::None => ToyAdapter::None,
            AdapterArg::Biodwam => ToyAdapter::BioDwam,
            AdapterArg::Dwam => ToyAdapter::Dwam,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Expect {
    Converged,
    Oscillating,
    Undetermined,
}

impl Expect {
    fn name(self) -> &'static str {
        match self {
            Expect::Converged => "converged",
            Expect::Oscillating => "oscillating",
            Expect::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Args)]
struct ToyArgs {
    /// Scenario JSON; unknown keys are rejected.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    adapter: Option<AdapterArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Output directory for trace.csv and verdict.json.
    #[arg(long, default_value = "toy_output")]
    out: PathBuf,
    /// Classifier window in steps.
    #[arg(long, default_value_t = ClassifierConfig::default().window)]
    window: usize,
    #[arg(long, default_value_t = ClassifierConfig::default().tol)]
    tol: f64,
    #[arg(long, default_value_t = ClassifierConfig::default().min_crossings)]
    min_crossings: usize,
    #[arg(long, default_value_t = ClassifierConfig::default().min_amplitude)]
    min_amplitude: f64,
    /// Exit with status 2 unless the verdict matches.
    #[arg(long, value_enum)]
    expect: Option<Expect>,
    /// Also write plot.csv (step, rate, theta, trailing window mean).
    #[arg(long)]
    emit_plot_data: bool,
}

#[derive(Debug, Args)]
struct SuiteArgs {
    /// Suite JSON; unknown keys are rejected.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides HOMEOSTAT_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    /// Also write per-step traces of trial 0 for every adapter and condition.
    #[arg(long)]
    emit_plot_data: bool,
}

#[derive(Debug, Args)]
struct QuantizeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// trials.csv written by `suite`.
    #[arg(long)]
    trials: PathBuf,
    /// Output directory for report.json and metrics.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Report JSON of the reference adapter.
    #[arg(long)]
    a: PathBuf,
    /// Report JSON of the adapter under test.
    #[arg(long)]
    b: PathBuf,
    /// Adapter to take from --a; the first report when omitted.
    #[arg(long)]
    adapter_a: Option<String>,
    /// Adapter to take from --b; the first report when omitted.
    #[arg(long)]
    adapter_b: Option<String>,
    /// Comparison CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckpointArgs {
    /// Comma-separated layer sizes, input first.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = RandomInit::default().gain)]
    gain: f64,
    #[arg(long, default_value_t = RandomInit::default().mean_gain)]
    mean_gain: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    ExpectationMismatch,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Toy(args) => cmd_toy(args, quiet),
        Command::Suite(args) => cmd_suite(args, quiet),
        Command::Quantize(args) => cmd_quantize(args, quiet),
        Command::Metrics(args) => cmd_metrics(args, quiet),
        Command::Compare(args) => cmd_compare(args, quiet),
        Command::Checkpoint(args) => cmd_checkpoint(args, quiet),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_json(&read_text(path)?)
        .with_context(|| format!("invalid checkpoint {}", path.display()))
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => {
            let n: usize = v
                .trim()
                .parse()
                .with_context(|| format!("{THREADS_ENV}={v:?} is not a thread count"))?;
            Ok(Some(n))
        }
        _ => Ok(None),
    }
}

fn cmd_toy(args: ToyArgs, quiet: bool) -> Result<Outcome> {
    let mut scenario = match &args.config {
        Some(path) => serde_json::from_str::<ToyScenario>(&read_text(path)?)
            .with_context(|| format!("invalid toy config {}", path.display()))?,
        None => ToyScenario::default(),
    };
    if let Some(a) = args.adapter {
        scenario.adapter = a.into();
    }
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(steps) = args.steps {
        scenario.steps = steps;
    }
    let classifier = ClassifierConfig {
        window: args.window,
        tol: args.tol,
        min_crossings: args.min_crossings,
        min_amplitude: args.min_amplitude,
    };

    let trace = run_toy(&scenario)?;
    let verdict = classify_trace(&trace, &classifier)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    trace.write_csv(create(&args.out.join("trace.csv"))?)?;
    if args.emit_plot_data {
        write_plot_csv(
            &trace,
            classifier.window,
            create(&args.out.join("plot.csv"))?,
        )?;
    }
    let matched = args.expect.map(|e| e.name() == verdict.name());
    let summary = serde_json::json!({
        "adapter": scenario.adapter.name(),
        "seed": scenario.seed,
        "steps": scenario.steps,
        "config_hash": trace.config_hash,
        "classifier": classifier,
        "verdict": verdict,
        "expected": args.expect.map(Expect::name),
        "matched": matched,
    });
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(args.out.join("verdict.json"), text)?;

    if !quiet {
        println!(
            "adapter={} seed={} verdict={} final_rate={:.6}",
            scenario.adapter.name(),
            scenario.seed,
            describe(&verdict),
            trace.final_rate().unwrap_or(0.0)
        );
    }
    if matched == Some(false) {
        eprintln!(
            "expected {}, got {}",
            args.expect.map(Expect::name).unwrap_or_default(),
            verdict.name()
        );
        return Ok(Outcome::ExpectationMismatch);
    }
    Ok(Outcome::Success)
}

fn describe(v: &StabilityVerdict) -> String {
    match v {
        StabilityVerdict::Converged {
            final_rate,
            final_gap,
        } => {
            format!("converged(rate={final_rate:.6}, gap={final_gap:.3e})")
        }
        StabilityVerdict::Oscillating {
            crossings,
            amplitude,
        } => {
            format!("oscillating(crossings={crossings}, amplitude={amplitude:.4})")
        }
        StabilityVerdict::Undetermined => "undetermined".into(),
    }
}

fn write_plot_csv<W: Write>(trace: &TraceLog, window: usize, mut out: W) -> Result<()> {
    writeln!(out, "step,rate,theta,trailing_mean")?;
    let mut sum = 0.0;
    for (k, s) in trace.steps.iter().enumerate() {
        sum += s.rate;
        if k >= window {
            sum -= trace.steps[k - window].rate;
        }
        let n = (k + 1).min(window.max(1));
        writeln!(out, "{},{},{},{}", s.step, s.rate, s.theta, sum / n as f64)?;
    }
    Ok(())
}

fn cmd_suite(args: SuiteArgs, quiet: bool) -> Result<Outcome> {
    let mut cfg = SuiteConfig::from_json(&read_text(&args.config)?)
        .with_context(|| format!("invalid suite config {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let threads = thread_count(args.threads)?;
    let output = run_degradation_suite(&cfg, &checkpoint, threads)?;
    output
        .write_to(&args.out)
        .with_context(|| format!("cannot write artifacts to {}", args.out.display()))?;

    if args.emit_plot_data {
        let dir = args.out.join("traces");
        fs::create_dir_all(&dir)?;
        for adapter in &cfg.adapters {
            let conditions = std::iter::once(None).chain(cfg.conditions.iter().map(Some));
            for condition in conditions {
                let name = condition.map_or("base", |c| c.name.as_str());
                let rows = trace_trial(&cfg, &checkpoint, adapter, condition, 0)?;
                let file = dir.join(format!(
                    "{}__{}__trial0.csv",
                    sanitize(&adapter.name),
                    sanitize(name)
                ));
                write_trace_csv(&rows, create(&file)?)?;
            }
        }
    }

    if !quiet {
        print_reports(&output.report.reports);
        for row in &output.comparison.rows {
            if let (Some(d), Some(f)) = (row.delta_hm_m, &row.favors) {
                println!(
                    "{} vs {} on {}: delta HM_m {:+.6} (favors {})",
                    row.adapter_b, row.adapter_a, row.condition, d, f
                );
            }
        }
    }
    Ok(Outcome::Success)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn print_reports(reports: &[MetricsReport]) {
    println!(
        "{:<12} {:<16} {:>10} {:>10} {:>11}",
        "adapter", "condition", "HM_m", "HM_std", "dFR_m"
    );
    for r in reports {
        for c in &r.conditions {
            println!(
                "{:<12} {:<16} {:>10.6} {:>10.6} {:>+11.6}",
                r.adapter, c.condition, c.hm_m, c.hm_std, c.legacy_delta.fr_m
            );
        }
    }
}

fn cmd_quantize(args: QuantizeArgs, quiet: bool) -> Result<Outcome> {
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let layers: Vec<_> = checkpoint.layers().iter().map(quantize_loihi8).collect();
    if !quiet {
        for (l, (before, after)) in checkpoint.layers().iter().zip(&layers).enumerate() {
            let err = before
                .weights()
                .iter()
                .zip(after.weights())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            println!(
                "layer {l}: max|w| = {:.6e}, max error = {:.6e}, bound = {:.6e}",
                before.max_abs(),
                err,
                before.max_abs() / 254.0
            );
        }
    }
    let quantized = Checkpoint::new(checkpoint.layer_sizes().to_vec(), layers)?;
    fs::write(&args.out, quantized.to_json()?)
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    Ok(Outcome::Success)
}

fn cmd_metrics(args: MetricsArgs, quiet: bool) -> Result<Outcome> {
    let file = fs::File::open(&args.trials)
        .with_context(|| format!("cannot read {}", args.trials.display()))?;
    let rows = read_trials_csv(file)
        .with_context(|| format!("invalid trials CSV {}", args.trials.display()))?;
    let reports = reports_from_rows(&rows)?;
    fs::create_dir_all(&args.out)?;
    let report = SuiteReport {
        config_hash: None,
        master_seed: None,
        reports,
    };
    fs::write(args.out.join("report.json"), report.to_json()?)?;
    write_metrics_csv(&report.reports, create(&args.out.join("metrics.csv"))?)?;
    if !quiet {
        print_reports(&report.reports);
    }
    Ok(Outcome::Success)
}

fn pick_report(path: &Path, adapter: Option<&str>) -> Result<MetricsReport> {
    let report: SuiteReport = serde_json::from_str(&read_text(path)?)
        .with_context(|| format!("invalid report {}", path.display()))?;
    let found = match adapter {
        Some(name) => report.reports.into_iter().find(|r| r.adapter == name),
        None => report.reports.into_iter().next(),
    };
    match found {
        Some(r) => Ok(r),
        None => bail!(
            "{} has no report{}",
            path.display(),
            adapter
                .map(|a| format!(" for adapter {a:?}"))
                .unwrap_or_default()
        ),
    }
}

fn cmd_compare(args: CompareArgs, quiet: bool) -> Result<Outcome> {
    let a = pick_report(&args.a, args.adapter_a.as_deref())?;
    let b = pick_report(&args.b, args.adapter_b.as_deref())?;
    let table = compare(&a, &b);
    match &args.out {
        Some(path) => table.write_csv(create(path)?)?,
        None => table.write_csv(std::io::stdout().lock())?,
    }
    if table.has_errors() && !quiet {
        eprintln!("warning: some conditions are missing from one of the reports");
    }
    Ok(Outcome::Success)
}

fn cmd_checkpoint(args: CheckpointArgs, quiet: bool) -> Result<Outcome> {
    let init = RandomInit {
        gain: args.gain,
        mean_gain: args.mean_gain,
        ..RandomInit::default()
    };
    let checkpoint = Checkpoint::random(&args.sizes, args.seed, &init)?;
    checkpoint
        .save(&args.out)
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    if !quiet {
        println!("wrote {} ({:?})", args.out.display(), args.sizes);
    }
    Ok(Outcome::Success)
}
