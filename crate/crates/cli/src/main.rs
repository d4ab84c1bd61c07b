use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use wheeze_core::eventgen::EventMode;
use wheeze_core::experiment::{cmd_audit, cmd_prepare, cmd_run, AuditOutcome, ExperimentConfig, PrepareSummary, RunSummary};
use wheeze_core::models::Family;
use wheeze_core::synth::{write_synth_corpus, SynthConfig};
use wheeze_core::Error;

/// Exit status when the command ran but some training runs failed.
const PARTIAL_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "wheeze", version, about = "Wheeze vs. random-event classification and duration-bias audit")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate events and extract features and spectrograms.
    Prepare(Overrides),
    /// Search hyperparameters and train every seeded run; resumes where it stopped.
    Run(Overrides),
    /// Aggregate runs into the bias report, FN histograms and padding probe.
    Audit(Overrides),
    /// Prepare, run and audit.
    All(Overrides),
    /// Write a synthetic corpus with a split manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SynthConfig::default().n_recordings)]
        recordings: usize,
        #[arg(long, default_value_t = SynthConfig::default().seed)]
        seed: u64,
        /// Lower end of the tone-to-background power ratio in dB.
        #[arg(long, default_value_t = SynthConfig::default().snr_db.0, allow_negative_numbers = true)]
        snr_min: f64,
        #[arg(long, default_value_t = SynthConfig::default().snr_db.1, allow_negative_numbers = true)]
        snr_max: f64,
    },
}

#[derive(Args)]
struct Overrides {
    /// TOML config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Restrict to these modes (FD, VD).
    #[arg(long, value_delimiter = ',')]
    mode: Vec<EventMode>,
    /// Restrict to these families (logistic, lda, svm_linear, svm_rbf, boost, cnn).
    #[arg(long, value_delimiter = ',')]
    family: Vec<Family>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if !self.mode.is_empty() {
            cfg.experiment.modes = self.mode.clone();
        }
        if !self.family.is_empty() {
            cfg.experiment.families = self.family.clone();
        }
        if let Some(seed) = self.seed {
            cfg.experiment.base_seed = seed;
        }
        if let Some(jobs) = self.jobs {
            cfg.experiment.jobs = jobs;
        }
        if let Some(out) = &self.out {
            cfg.experiment.output_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn prepare_json(s: &PrepareSummary) -> Value {
    serde_json::to_value(s).unwrap_or(Value::Null)
}

fn run_json(s: &RunSummary) -> Value {
    json!({
        "completed": s.completed.len(),
        "skipped": s.skipped.len(),
        "failed": s.failed,
    })
}

fn audit_json(a: &AuditOutcome) -> Value {
    json!({
        "gaps": a.report.gaps,
        "probes": a.probes.iter().map(|p| json!({"mode": p.mode, "mcc": p.metrics.mcc})).collect::<Vec<_>>(),
        "runs": a.runs.len(),
    })
}

fn error_json(command: &str, err: &Error) -> Value {
    let mut v = json!({
        "status": "error",
        "command": command,
        "kind": err.kind(),
        "message": err.to_string(),
    });
    if let Error::MissingFiles(paths) = err {
        v["missing"] = json!(paths);
    }
    v
}

fn execute(command: &Command) -> Result<(Value, bool), Error> {
    Ok(match command {
        Command::Prepare(o) => (prepare_json(&cmd_prepare(&o.resolve()?)?), true),
        Command::Run(o) => {
            let s = cmd_run(&o.resolve()?)?;
            (run_json(&s), s.failed.is_empty())
        }
        Command::Audit(o) => (audit_json(&cmd_audit(&o.resolve()?)?), true),
        Command::All(o) => {
            let cfg = o.resolve()?;
            let prepared = cmd_prepare(&cfg)?;
            let runs = cmd_run(&cfg)?;
            let ok = runs.failed.is_empty();
            let mut v = json!({"prepare": prepare_json(&prepared), "run": run_json(&runs)});
            if ok {
                v["audit"] = audit_json(&cmd_audit(&cfg)?);
            }
            (v, ok)
        }
        Command::Synth {
            out,
            recordings,
            seed,
            snr_min,
            snr_max,
        } => {
            let cfg = SynthConfig {
                n_recordings: *recordings,
                seed: *seed,
                snr_db: (*snr_min, *snr_max),
                ..SynthConfig::default()
            };
            let corpus = write_synth_corpus(out, &cfg)?;
            let wheezes: usize = corpus.iter().map(|r| r.wheezes.len()).sum();
            (
                json!({"recordings": corpus.len(), "wheezes": wheezes, "manifest": out.join("split.txt")}),
                true,
            )
        }
    })
}

fn name(command: &Command) -> &'static str {
    match command {
        Command::Prepare(_) => "prepare",
        Command::Run(_) => "run",
        Command::Audit(_) => "audit",
        Command::All(_) => "all",
        Command::Synth { .. } => "synth",
    }
}

/// Prints the JSON summary; a closed stdout is not an error.
fn emit(value: &Value) {
    let text = serde_json::to_string_pretty(value).unwrap_or_default();
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let command = name(&cli.command);
    match execute(&cli.command) {
        Ok((mut summary, ok)) => {
            summary["status"] = json!(if ok { "ok" } else { "partial_failure" });
            summary["command"] = json!(command);
            emit(&summary);
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(PARTIAL_FAILURE)
            }
        }
        Err(err) => {
            log::error!("{command} failed: {err}");
            emit(&error_json(command, &err));
            ExitCode::FAILURE
        }
    }
}
