use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qentropy_bench::config::{ExperimentConfig, FileConfig, Task};
use qentropy_bench::harness::{run_experiment, RunOutput};
use qentropy_bench::HarnessError;

/// Sublinear entropy estimation experiments.
#[derive(Parser)]
#[command(name = "qentropy", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Multiplicative entropy estimate.
    Estimate(Flags),
    /// Additive entropy estimate (`--eps` is the additive error).
    Additive(Flags),
    /// Decide H ≥ H1 against H ≤ H2.
    Threshold(Flags),
    /// Query-count scaling over a list of sizes.
    Sweep(Flags),
    /// Hard pairs behind the query lower bounds.
    Lowerbound(Flags),
    /// Classical sample-based baseline.
    Baseline(Flags),
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// JSON file with a distribution, density matrix or frequency vector.
    #[arg(long)]
    input: Option<String>,
    /// Named generator, e.g. `uniform:256` or `dirichlet:64:1`.
    #[arg(long)]
    gen: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// exact | bound | sampled | statevector
    #[arg(long)]
    mode: Option<String>,
    /// `a..b` or a comma list.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Records go here (CSV for sweeps); the summary goes to `<out>.summary.json`.
    #[arg(long)]
    out: Option<String>,
    /// Flat TOML file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<String>,
    /// Exit with status 3 when the run's acceptance condition fails.
    #[arg(long)]
    check: bool,
    #[arg(long)]
    h1: Option<f64>,
    #[arg(long)]
    h2: Option<f64>,
    /// `2^a..2^b` or a comma list.
    #[arg(long = "n-list")]
    n_list: Option<String>,
    /// classical | quantum
    #[arg(long)]
    encoding: Option<String>,
    /// Smallest sizes left out of the sweep fit.
    #[arg(long)]
    exclude: Option<usize>,
    /// Lower-bound family: near_deterministic | two_point_vs_spread | collision
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    param: Option<f64>,
}

impl Flags {
    fn file_config(&self) -> FileConfig {
        let f = self.clone();
        FileConfig {
            input: f.input,
            gen: f.gen,
            gamma: f.gamma,
            eps: f.eps,
            eta: f.eta,
            mode: f.mode,
            seeds: f.seeds,
            trials: f.trials,
            out: f.out,
            h1: f.h1,
            h2: f.h2,
            n_list: f.n_list,
            encoding: f.encoding,
            exclude: f.exclude,
            kind: f.kind,
            n: f.n,
            param: f.param,
        }
    }
}

fn write_outputs(cfg: &ExperimentConfig, out: &RunOutput) -> Result<(), HarnessError> {
    let summary = serde_json::to_string_pretty(&out.summary).expect("summary serializes");
    match &cfg.out {
        Some(path) => {
            let body = match &out.csv {
                Some(csv) => csv.clone(),
                None => out.records.iter().map(|r| format!("{r}\n")).collect(),
            };
            std::fs::write(path, body)?;
            std::fs::write(format!("{path}.summary.json"), format!("{summary}\n"))?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            if let Some(csv) = &out.csv {
                write!(stdout, "{csv}")?;
            } else {
                for r in &out.records {
                    writeln!(stdout, "{r}")?;
                }
            }
        }
    }
    println!("{summary}");
    Ok(())
}

fn run(task: Task, flags: &Flags) -> Result<bool, HarnessError> {
    let base = match &flags.config {
        Some(path) => FileConfig::from_toml(&std::fs::read_to_string(path)?)?,
        None => FileConfig::default(),
    };
    let cfg = ExperimentConfig::resolve(task, base.overlay(flags.file_config()))?;
    let out = run_experiment(&cfg)?;
    write_outputs(&cfg, &out)?;
    Ok(out.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, flags) = match &cli.verb {
        Verb::Estimate(f) => (Task::Estimate, f),
        Verb::Additive(f) => (Task::Additive, f),
        Verb::Threshold(f) => (Task::ThresholdTest, f),
        Verb::Sweep(f) => (Task::Sweep, f),
        Verb::Lowerbound(f) => (Task::LowerBoundDemo, f),
        Verb::Baseline(f) => (Task::Baseline, f),
    };
    match run(task, flags) {
        Ok(passed) if flags.check && !passed => ExitCode::from(3),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
