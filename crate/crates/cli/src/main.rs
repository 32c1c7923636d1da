use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;
use tmforge::pipeline::{
    parse_override, run_all, run_stage, workers_from_env, PipelineConfig, RunOptions, Stage,
    WORKERS_ENV,
};

/// Exit status when verification ran and did not pass.
const EXIT_VERIFY_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "tmforge",
    version,
    about = "Train Tsetlin Machines and compile them to streaming FPGA accelerators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write model.json plus an accuracy report.
    Train(Common),
    /// Compile model.json into compiled.json and a sparsity report.
    Compile(Common),
    /// Emit Verilog, testbench, vectors and manifest into rtl/.
    Emit(Common),
    /// Run the cycle-accurate simulator over the test set.
    Sim(Common),
    /// Check simulator output against reference inference.
    Verify(Common),
    /// Write a consolidated summary with latency and throughput figures.
    Report(Common),
    /// Take a state matrix trained elsewhere as model.json.
    Import {
        /// JSON file with `states` or `actions`, or a tmforge model file.
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train and compile every point of the config's sweep grid.
    Sweep(Common),
    /// Train (or import), compile, emit, sim, verify and report.
    Run {
        /// Import this state matrix instead of training.
        #[arg(long)]
        import: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline config (JSON).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Booleanization threshold for raw datasets.
    #[arg(long)]
    threshold: Option<f64>,
    /// Stream width W in bits.
    #[arg(long)]
    bandwidth: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Drop clauses that contain a literal and its negation.
    #[arg(long)]
    prune: bool,
    /// Write a per-cycle trace during `sim`.
    #[arg(long)]
    trace: bool,
    /// Any config key, e.g. `--set hyperparams.threshold=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Training threads; defaults to TMFORGE_WORKERS or the core count.
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

impl Common {
    fn load(&self) -> Result<PipelineConfig> {
        let mut ov: Vec<(String, Value)> = self
            .set
            .iter()
            .map(|s| parse_override(s.as_str()))
            .collect::<Result<_, _>>()?;
        if let Some(o) = &self.out {
            ov.push(("output_dir".into(), Value::String(o.display().to_string())));
        }
        if let Some(w) = self.bandwidth {
            ov.push(("bandwidth".into(), w.into()));
        }
        if let Some(s) = self.seed {
            ov.push(("seed".into(), s.into()));
        }
        if let Some(e) = self.epochs {
            ov.push(("hyperparams.epochs".into(), e.into()));
        }
        if self.prune {
            ov.push(("prune_contradictory".into(), true.into()));
        }
        if self.trace {
            ov.push(("sim.trace".into(), true.into()));
        }
        let mut cfg = PipelineConfig::load(&self.config, &ov)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(t) = self.threshold {
            cfg.dataset.set_threshold(t)?;
        }
        Ok(cfg)
    }

    fn options(&self, import_path: Option<PathBuf>) -> RunOptions {
        RunOptions {
            workers: self
                .workers
                .filter(|&w| w > 0)
                .unwrap_or_else(workers_from_env),
            import_path,
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stages, common, import): (Vec<Stage>, &Common, Option<PathBuf>) = match &cli.command {
        Command::Train(c) => (vec![Stage::Train], c, None),
        Command::Compile(c) => (vec![Stage::Compile], c, None),
        Command::Emit(c) => (vec![Stage::Emit], c, None),
        Command::Sim(c) => (vec![Stage::Sim], c, None),
        Command::Verify(c) => (vec![Stage::Verify], c, None),
        Command::Report(c) => (vec![Stage::Report], c, None),
        Command::Sweep(c) => (vec![Stage::Sweep], c, None),
        Command::Import { file, common } => (vec![Stage::Import], common, Some(file.clone())),
        Command::Run { import, common } => (Vec::new(), common, import.clone()),
    };
    init_logging(common.verbose);

    let cfg = match common.load() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    let opts = common.options(import);
    let results = if stages.is_empty() {
        run_all(&cfg, &opts)
    } else {
        stages
            .iter()
            .map(|&s| run_stage(s, &cfg, &opts).map(|o| (s, o)))
            .collect()
    };
    match results {
        Ok(done) => {
            let mut passed = true;
            for (stage, o) in done {
                for line in &o.summary {
                    if line.is_empty() {
                        println!("[{stage}]");
                    } else {
                        println!("[{stage}] {line}");
                    }
                }
                passed &= o.passed;
            }
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERIFY_FAILED)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
