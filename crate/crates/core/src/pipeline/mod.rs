//! Batch driver: train, compile, emit, simulate, verify and report from one
//! config file, with every artifact under a single run directory.

mod config;
mod import;
mod stages;
mod sweep;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    parse_override, set_key, DatasetSpec, EmitOptions, PipelineConfig, SimOptions, SweepAxis,
    SweepSpec, VerifyOptions,
};
pub use import::{import_states, ImportFile};
pub use stages::{feature_count, load_data, LoadedData, TrainReport, VerifyReport};
pub use sweep::{run_sweep, SweepRow};

/// Worker count for training, read from this variable when set.
pub const WORKERS_ENV: &str = "TMFORGE_WORKERS";

pub const MODEL_FILE: &str = "model.json";
pub const TRAIN_REPORT: &str = "train_report.json";
pub const COMPILED_FILE: &str = "compiled.json";
pub const SPARSITY_FILE: &str = "sparsity.txt";
pub const RESOURCES_FILE: &str = "resources.json";
pub const RTL_DIR: &str = "rtl";
pub const SIM_REPORT: &str = "sim_report.json";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const VERIFY_FILE: &str = "verify.json";
pub const REPORT_FILE: &str = "report.txt";
pub const CONFIG_COPY: &str = "config.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Train,
    Compile,
    Emit,
    Sim,
    Verify,
    Report,
    Import,
    Sweep,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Train,
        Stage::Compile,
        Stage::Emit,
        Stage::Sim,
        Stage::Verify,
        Stage::Report,
        Stage::Import,
        Stage::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Train => "train",
            Stage::Compile => "compile",
            Stage::Emit => "emit",
            Stage::Sim => "sim",
            Stage::Verify => "verify",
            Stage::Report => "report",
            Stage::Import => "import",
            Stage::Sweep => "sweep",
        }
    }

    pub fn sentinel(self) -> String {
        format!("{}.failed", self.name())
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{stage} failed: {message}")]
    Stage { stage: Stage, message: String },
    #[error("{0}")]
    Other(String),
}

macro_rules! from_error {
    ($($t:ty),*) => {$(
        impl From<$t> for PipelineError {
            fn from(e: $t) -> Self {
                PipelineError::Other(e.to_string())
            }
        }
    )*};
}

from_error!(
    std::io::Error,
    serde_json::Error,
    crate::tm::TmError,
    crate::data::DataError,
    crate::compile::CompileError,
    crate::sim::SimError,
    crate::rtl::RtlError
);

/// Per-invocation settings that are not part of the config hash.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub workers: usize,
    /// State matrix to read in the import stage.
    pub import_path: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: workers_from_env(),
            import_path: None,
        }
    }
}

/// `TMFORGE_WORKERS` when set to a positive integer, else the core count.
pub fn workers_from_env() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// What a stage produced, for printing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageOutcome {
    pub summary: Vec<String>,
    /// False only for a verification that ran and did not pass.
    pub passed: bool,
}

impl StageOutcome {
    fn ok(summary: Vec<String>) -> Self {
        Self {
            summary,
            passed: true,
        }
    }
}

/// Runs one stage. On failure a `<stage>.failed` file holding the error is
/// left in the output directory; on success a stale one is removed.
pub fn run_stage(
    stage: Stage,
    cfg: &PipelineConfig,
    opts: &RunOptions,
) -> Result<StageOutcome, PipelineError> {
    let out = &cfg.output_dir;
    let sentinel = out.join(stage.sentinel());
    let result = (|| {
        cfg.validate()?;
        fs::create_dir_all(out)?;
        write_config_copy(cfg, out)?;
        match stage {
            Stage::Train => stages::train(cfg, opts),
            Stage::Compile => stages::compile(cfg),
            Stage::Emit => stages::emit(cfg),
            Stage::Sim => stages::sim(cfg),
            Stage::Verify => stages::verify(cfg),
            Stage::Report => stages::report(cfg),
            Stage::Import => {
                let path = opts.import_path.as_deref().ok_or_else(|| {
                    PipelineError::Config("import needs a state matrix file".into())
                })?;
                import::run(cfg, path)
            }
            Stage::Sweep => sweep::run_sweep(cfg, opts).map(|rows| {
                StageOutcome::ok(vec![format!(
                    "{} sweep points, summary in {}",
                    rows.len(),
                    out.join(sweep::SWEEP_CSV).display()
                )])
            }),
        }
    })();
    match result {
        Ok(outcome) => {
            if sentinel.exists() {
                fs::remove_file(&sentinel)?;
            }
            Ok(outcome)
        }
        Err(e) => {
            let message = match e {
                PipelineError::Stage { message, .. } | PipelineError::Other(message) => message,
                PipelineError::Config(m) => format!("config: {m}"),
            };
            if out.is_dir() {
                let _ = fs::write(&sentinel, format!("{message}\n"));
            }
            Err(PipelineError::Stage { stage, message })
        }
    }
}

/// Train (or keep an imported model), then every later stage in order.
pub fn run_all(
    cfg: &PipelineConfig,
    opts: &RunOptions,
) -> Result<Vec<(Stage, StageOutcome)>, PipelineError> {
    let mut done = Vec::new();
    let first = if opts.import_path.is_some() {
        Stage::Import
    } else {
        Stage::Train
    };
    for stage in [
        first,
        Stage::Compile,
        Stage::Emit,
        Stage::Sim,
        Stage::Verify,
        Stage::Report,
    ] {
        let o = run_stage(stage, cfg, opts)?;
        done.push((stage, o));
    }
    Ok(done)
}

fn write_config_copy(cfg: &PipelineConfig, out: &Path) -> Result<(), PipelineError> {
    #[derive(Serialize)]
    struct Copy<'a> {
        config_hash: String,
        config: &'a PipelineConfig,
    }
    let mut text = serde_json::to_string_pretty(&Copy {
        config_hash: cfg.hash(),
        config: cfg,
    })?;
    text.push('\n');
    fs::write(out.join(CONFIG_COPY), text)?;
    Ok(())
}

fn need(path: &Path, producer: &str) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::Other(format!(
            "{} not found; run {producer} first",
            path.display()
        )))
    }
}

/// Writes JSON with a trailing newline.
fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// `3846153` as `3,846,153`.
pub fn group_thousands(n: u64) -> String {
    let s = n.to_string();
    let mut out = String::with_capacity(s.len() + s.len() / 3);
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}
