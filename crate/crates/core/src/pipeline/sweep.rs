use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use super::*;
use crate::compile::ResourceEstimate;
use crate::sim::{latency_cycles, latency_model};

pub const SWEEP_CSV: &str = "sweep.csv";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    /// `key=value` pairs, `;`-separated.
    pub point: String,
    pub output_dir: String,
    pub status: String,
    pub test_accuracy: Option<f64>,
    pub include_density: Option<f64>,
    pub gates_shared: Option<usize>,
    pub gates_unshared: Option<usize>,
    pub luts_shared: Option<usize>,
    pub latency_cycles: Option<u64>,
    pub throughput_inf_s: Option<u64>,
}

fn points(grid: &[SweepAxis]) -> Vec<Vec<(String, Value)>> {
    let mut out = vec![Vec::new()];
    for axis in grid {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((axis.key.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    out
}

fn run_point(
    base: &Value,
    out: &Path,
    index: usize,
    point: &[(String, Value)],
    workers: usize,
) -> SweepRow {
    let dir = out.join("sweep").join(format!("{index:03}"));
    let label = point
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";");
    let mut row = SweepRow {
        index,
        point: label,
        output_dir: dir.display().to_string(),
        status: "ok".into(),
        test_accuracy: None,
        include_density: None,
        gates_shared: None,
        gates_unshared: None,
        luts_shared: None,
        latency_cycles: None,
        throughput_inf_s: None,
    };
    let mut overrides = point.to_vec();
    overrides.push((
        "output_dir".into(),
        Value::String(dir.display().to_string()),
    ));
    overrides.push(("sweep".into(), serde_json::json!({})));
    let cfg = match PipelineConfig::from_value(base.clone(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            row.status = e.to_string();
            return row;
        }
    };
    let opts = RunOptions {
        workers,
        import_path: None,
    };
    for stage in [Stage::Train, Stage::Compile, Stage::Report] {
        if let Err(e) = run_stage(stage, &cfg, &opts) {
            row.status = e.to_string();
            return row;
        }
    }
    if let Ok(text) = std::fs::read_to_string(dir.join(TRAIN_REPORT)) {
        if let Ok(r) = serde_json::from_str::<TrainReport>(&text) {
            row.test_accuracy = Some(r.test_accuracy);
            row.include_density = Some(r.include_density);
            let p = r.features.div_ceil(cfg.bandwidth);
            row.latency_cycles = Some(latency_cycles(p, cfg.datapath));
            row.throughput_inf_s =
                Some(latency_model(r.features, cfg.bandwidth, cfg.datapath, cfg.clock_mhz).1);
        }
    }
    if let Ok(text) = std::fs::read_to_string(dir.join(RESOURCES_FILE)) {
        if let Ok(r) = serde_json::from_str::<ResourceEstimate>(&text) {
            row.gates_shared = Some(r.shared.gates);
            row.gates_unshared = Some(r.unshared.gates);
            row.luts_shared = Some(r.shared.luts);
        }
    }
    row
}

/// Trains and compiles every point of the grid, each in its own directory
/// under `<output_dir>/sweep/`, and writes `sweep.csv`.
pub fn run_sweep(cfg: &PipelineConfig, opts: &RunOptions) -> Result<Vec<SweepRow>, PipelineError> {
    let spec = &cfg.sweep;
    if spec.grid.is_empty() {
        return Err(PipelineError::Config("sweep.grid is empty".into()));
    }
    for axis in &spec.grid {
        if axis.values.is_empty() {
            return Err(PipelineError::Config(format!(
                "sweep axis {} has no values",
                axis.key
            )));
        }
    }
    let base = serde_json::to_value(cfg)?;
    let pts = points(&spec.grid);
    let jobs = if spec.jobs == 0 {
        opts.workers
    } else {
        spec.jobs
    }
    .clamp(1, pts.len());
    let per_job = (opts.workers / jobs).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| PipelineError::Other(e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        pts.par_iter()
            .enumerate()
            .map(|(i, p)| run_point(&base, &cfg.output_dir, i, p, per_job))
            .collect()
    });
    let mut w = csv::Writer::from_path(cfg.output_dir.join(SWEEP_CSV))
        .map_err(|e| PipelineError::Other(e.to_string()))?;
    for r in &rows {
        w.serialize(r)
            .map_err(|e| PipelineError::Other(e.to_string()))?;
    }
    w.flush()?;
    Ok(rows)
}
