use std::fs;
use std::io::BufWriter;
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::*;
use crate::bits::BitVector;
use crate::compile::{
    estimate_resources, partition, share_subexpressions, CompiledModel, SparsityReport,
};
use crate::data::{
    booleanize_threshold, load_csv, load_idx, noisy_xor, read_cache, read_idx_header,
    BooleanizedDataset, PacketPlan, RawDataset, DEFAULT_THRESHOLD_FRACTION,
};
use crate::rtl::emit_design;
use crate::sim::{
    compare_with_reference, latency_cycles, latency_model, write_trace, SimReport, Simulator,
    Verdict,
};
use crate::tm::{read_model, write_model, Provenance, ReferenceModel, TaStateMatrix, Trainer};

pub struct LoadedData {
    pub train: BooleanizedDataset,
    pub test: BooleanizedDataset,
    /// Booleanization threshold, for raw formats.
    pub threshold: Option<f64>,
}

fn limit<T: Copy + Into<f64>>(raw: &mut RawDataset<T>, n: Option<usize>) {
    if let Some(n) = n {
        raw.truncate(n);
    }
}

fn take(d: BooleanizedDataset, n: Option<usize>) -> BooleanizedDataset {
    match n {
        Some(n) if n < d.len() => d.take(n),
        _ => d,
    }
}

/// Booleanizes both splits with one threshold taken from the training split.
fn booleanize_pair<T: Copy + Into<f64>>(
    train: &RawDataset<T>,
    test: &RawDataset<T>,
    threshold: Option<f64>,
) -> Result<LoadedData, PipelineError> {
    if train.feature_count != test.feature_count {
        return Err(PipelineError::Other(format!(
            "train has {} features, test has {}",
            train.feature_count, test.feature_count
        )));
    }
    let t = threshold.unwrap_or_else(|| train.threshold_at(DEFAULT_THRESHOLD_FRACTION));
    let classes = train
        .labels
        .iter()
        .chain(&test.labels)
        .max()
        .map_or(1, |&m| m + 1);
    Ok(LoadedData {
        train: booleanize_threshold(train, t, Some(classes))?,
        test: booleanize_threshold(test, t, Some(classes))?,
        threshold: Some(t),
    })
}

pub fn load_data(spec: &DatasetSpec, seed: u64) -> Result<LoadedData, PipelineError> {
    match spec {
        DatasetSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            threshold,
            train_limit,
            test_limit,
        } => {
            let mut tr = load_idx(train_images, train_labels)?;
            let mut te = load_idx(test_images, test_labels)?;
            limit(&mut tr, *train_limit);
            limit(&mut te, *test_limit);
            booleanize_pair(&tr, &te, *threshold)
        }
        DatasetSpec::Csv {
            train,
            test,
            threshold,
            train_limit,
            test_limit,
        } => {
            let mut tr = load_csv(train)?;
            let mut te = load_csv(test)?;
            limit(&mut tr, *train_limit);
            limit(&mut te, *test_limit);
            booleanize_pair(&tr, &te, *threshold)
        }
        DatasetSpec::Cache {
            train,
            test,
            train_limit,
            test_limit,
        } => {
            let tr = take(read_cache(train)?, *train_limit);
            let te = take(read_cache(test)?, *test_limit);
            if tr.feature_count() != te.feature_count() {
                return Err(PipelineError::Other(
                    "train and test caches differ in feature count".into(),
                ));
            }
            Ok(LoadedData {
                train: tr,
                test: te,
                threshold: None,
            })
        }
        DatasetSpec::NoisyXor {
            train_samples,
            test_samples,
            noise_features,
            label_noise,
        } => Ok(LoadedData {
            train: noisy_xor(*train_samples, *noise_features, *label_noise, seed),
            // The test split is noise-free so accuracy measures the learned rule.
            test: noisy_xor(*test_samples, *noise_features, 0.0, seed ^ 0x7465_7374),
            threshold: None,
        }),
    }
}

/// Feature count without loading the whole dataset.
pub fn feature_count(spec: &DatasetSpec) -> Result<usize, PipelineError> {
    Ok(match spec {
        DatasetSpec::Idx { train_images, .. } => read_idx_header(train_images)?.item_size(),
        DatasetSpec::Csv { train, .. } => load_csv(train)?.feature_count,
        DatasetSpec::Cache { train, .. } => read_cache(train)?.feature_count(),
        DatasetSpec::NoisyXor { noise_features, .. } => 2 + noise_features,
    })
}

fn provenance(cfg: &PipelineConfig) -> Provenance {
    Provenance::new(cfg.hash(), cfg.seed)
}

fn accuracy(model: &ReferenceModel, d: &BooleanizedDataset) -> Result<f64, PipelineError> {
    if d.is_empty() {
        return Ok(0.0);
    }
    let correct = d
        .features()
        .par_iter()
        .zip(d.labels().par_iter())
        .map(|(x, &y)| model.predict(x).map(|p| (p.argmax_class == y) as usize))
        .sum::<Result<usize, _>>()?;
    Ok(correct as f64 / d.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub test_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub classes: usize,
    pub features: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub threshold: Option<f64>,
    pub epochs: Vec<EpochRecord>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub include_density: f64,
    pub provenance: Provenance,
}

pub(super) fn train(
    cfg: &PipelineConfig,
    opts: &RunOptions,
) -> Result<StageOutcome, PipelineError> {
    cfg.check_paths()?;
    let data = load_data(&cfg.dataset, cfg.seed)?;
    if data.train.is_empty() {
        return Err(PipelineError::Other("training set is empty".into()));
    }
    let hp = cfg.hyperparams.clone();
    let mut trainer = Trainer::new(
        data.train.class_count(),
        data.train.feature_count(),
        hp.clone(),
    )?
    .with_workers(opts.workers)?;
    let mut epochs = Vec::with_capacity(hp.epochs);
    for e in 0..hp.epochs {
        let t = Instant::now();
        trainer.fit_epoch(data.train.features(), data.train.labels())?;
        let acc = accuracy(&ReferenceModel::new(trainer.model()), &data.test)?;
        info!(
            "epoch {}: test accuracy {:.4} ({:.1}s)",
            e + 1,
            acc,
            t.elapsed().as_secs_f64()
        );
        epochs.push(EpochRecord {
            epoch: e + 1,
            test_accuracy: acc,
        });
    }
    let model = trainer.into_model();
    let reference = ReferenceModel::new(&model);
    let prov = provenance(cfg);
    let report = TrainReport {
        classes: model.classes(),
        features: model.features(),
        train_samples: data.train.len(),
        test_samples: data.test.len(),
        threshold: data.threshold,
        train_accuracy: accuracy(&reference, &data.train)?,
        test_accuracy: epochs
            .last()
            .map_or(accuracy(&reference, &data.test)?, |e| e.test_accuracy),
        epochs,
        include_density: model.include_count() as f64 / model.states().len() as f64,
        provenance: prov.clone(),
    };
    let out = &cfg.output_dir;
    write_model(&out.join(MODEL_FILE), &model, Some(hp), prov)?;
    write_json(&out.join(TRAIN_REPORT), &report)?;
    Ok(StageOutcome::ok(vec![
        format!(
            "trained {} classes x {} clauses on {} features",
            report.classes, cfg.hyperparams.clauses_per_class, report.features
        ),
        format!(
            "train accuracy {:.4}, test accuracy {:.4}",
            report.train_accuracy, report.test_accuracy
        ),
        format!("model written to {}", out.join(MODEL_FILE).display()),
    ]))
}

fn load_model(cfg: &PipelineConfig) -> Result<TaStateMatrix, PipelineError> {
    let path = cfg.output_dir.join(MODEL_FILE);
    need(&path, "train or import")?;
    Ok(read_model(&path)?.0)
}

fn load_compiled(cfg: &PipelineConfig) -> Result<CompiledModel, PipelineError> {
    let path = cfg.output_dir.join(COMPILED_FILE);
    need(&path, "compile")?;
    Ok(CompiledModel::read(&path)?)
}

pub(super) fn compile(cfg: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let model = load_model(cfg)?;
    let plan = PacketPlan::new(model.features(), cfg.bandwidth)?;
    let mut compiled = CompiledModel::new(&model, plan)?.with_provenance(provenance(cfg));
    if cfg.prune_contradictory {
        compiled.prune_contradictory();
    }
    let net = share_subexpressions(&partition(&compiled.clauses, &plan), cfg.sharing);
    let report = SparsityReport::new(&compiled, &net);
    let res = estimate_resources(&net, cfg.sharing.lut_inputs);
    let out = &cfg.output_dir;
    compiled.write(&out.join(COMPILED_FILE))?;
    fs::write(out.join(SPARSITY_FILE), report.to_text())?;
    write_json(&out.join(RESOURCES_FILE), &res)?;
    Ok(StageOutcome::ok(vec![
        format!(
            "{} clauses in {} packets of {} bits, include density {:.4}",
            compiled.clause_count(),
            compiled.packet_count,
            compiled.bandwidth,
            report.include_density
        ),
        format!(
            "gates {} shared vs {} unshared, LUT estimate {} vs {}",
            res.shared.gates, res.unshared.gates, res.shared.luts, res.unshared.luts
        ),
        format!(
            "{} contradictory, {} pruned",
            report.contradictory.len(),
            report.pruned.len()
        ),
    ]))
}

pub(super) fn emit(cfg: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let compiled = load_compiled(cfg)?;
    let n = cfg.emit.test_vectors;
    let samples: Vec<BitVector> = if n == 0 {
        Vec::new()
    } else {
        cfg.check_paths()?;
        let data = load_data(&cfg.dataset, cfg.seed)?;
        data.test.features().iter().take(n).cloned().collect()
    };
    let expected = samples
        .iter()
        .map(|x| compiled.predict(x).map(|p| p.argmax_class))
        .collect::<Result<Vec<_>, _>>()?;
    let (design, manifest) = emit_design(
        &compiled,
        &cfg.emit_config(),
        &samples,
        &expected,
        &provenance(cfg),
    )?;
    let dir = cfg.output_dir.join(RTL_DIR);
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    design.write_to(&dir)?;
    Ok(StageOutcome::ok(vec![
        format!("{} files written to {}", design.files.len(), dir.display()),
        format!(
            "top {}, {} test vectors, latency {} cycles",
            manifest.top, manifest.test_vectors, manifest.latency_cycles
        ),
        format!("manifest sha256 {}", manifest.digest()),
    ]))
}

fn test_samples(cfg: &PipelineConfig) -> Result<BooleanizedDataset, PipelineError> {
    cfg.check_paths()?;
    let data = load_data(&cfg.dataset, cfg.seed)?;
    Ok(take(data.test, cfg.sim.limit))
}

pub(super) fn sim(cfg: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let compiled = load_compiled(cfg)?;
    let test = test_samples(cfg)?;
    let report = Simulator::new(&compiled, &cfg.sim_config())?.run(test.features())?;
    let out = &cfg.output_dir;
    write_json(&out.join(SIM_REPORT), &report)?;
    let mut lines = vec![format!(
        "{} samples in {} cycles, II {:.2} cycles, {} inf/s at {} MHz",
        report.samples,
        report.total_cycles,
        report.initiation_interval,
        group_thousands(report.throughput_inf_s),
        report.clock_mhz
    )];
    if let (Some(c), Some(us)) = (report.latency_cycles, report.latency_us) {
        lines.push(format!("latency {c} cycles ({us:.2} us)"));
    }
    if let Some(trace) = &report.trace {
        let f = fs::File::create(out.join(TRACE_FILE))?;
        write_trace(BufWriter::new(f), trace)?;
        lines.push(format!(
            "trace written to {}",
            out.join(TRACE_FILE).display()
        ));
    }
    Ok(StageOutcome::ok(lines))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub verdict: Verdict,
    pub min_accuracy: Option<f64>,
    pub passed: bool,
    pub provenance: Provenance,
}

pub(super) fn verify(cfg: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let model = load_model(cfg)?;
    let compiled = load_compiled(cfg)?;
    let test = test_samples(cfg)?;
    let (verdict, _) = compare_with_reference(
        &model,
        &compiled,
        test.features(),
        Some(test.labels()),
        &cfg.sim_config(),
    )?;
    let acc_ok = match (cfg.verify.min_accuracy, verdict.accuracy) {
        (Some(min), Some(acc)) => acc >= min,
        (Some(_), None) => false,
        (None, _) => true,
    };
    let passed = verdict.passed && acc_ok;
    let mut lines = vec![format!(
        "{} samples, {} mismatches between simulator and reference",
        verdict.samples,
        verdict.mismatches.len()
    )];
    if let Some(acc) = verdict.accuracy {
        let bound = cfg
            .verify
            .min_accuracy
            .map_or(String::new(), |m| format!(" (required {m:.4})"));
        lines.push(format!("accuracy {acc:.4}{bound}"));
    }
    lines.extend(verdict.warnings.iter().map(|w| format!("warning: {w}")));
    lines.push(if passed { "PASS".into() } else { "FAIL".into() });
    write_json(
        &cfg.output_dir.join(VERIFY_FILE),
        &VerifyReport {
            verdict,
            min_accuracy: cfg.verify.min_accuracy,
            passed,
            provenance: provenance(cfg),
        },
    )?;
    Ok(StageOutcome {
        summary: lines,
        passed,
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &std::path::Path) -> Option<T> {
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

pub(super) fn report(cfg: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let out = &cfg.output_dir;
    let compiled = load_compiled(cfg).ok();
    let features = match &compiled {
        Some(c) => c.features,
        None => {
            cfg.check_paths()?;
            feature_count(&cfg.dataset)?
        }
    };
    let plan = PacketPlan::new(features, cfg.bandwidth)?;
    let p = plan.packet_count();
    let (us, tput) = latency_model(features, cfg.bandwidth, cfg.datapath, cfg.clock_mhz);
    let mut t = Vec::new();
    t.push(format!("config {}", cfg.hash()));
    t.push(format!("seed {}", cfg.seed));
    t.push(String::new());
    t.push("Predicted performance".into());
    t.push(format!(
        "  features {features}, bandwidth {} bits, {p} packets ({} pad bits)",
        cfg.bandwidth,
        plan.pad_bits()
    ));
    t.push(format!(
        "  pipeline stages: class sum {}, argmax {}",
        cfg.datapath.class_sum_stages, cfg.datapath.argmax_stages
    ));
    t.push(format!(
        "  latency {} cycles = {us:.2} us at {} MHz",
        latency_cycles(p, cfg.datapath),
        cfg.clock_mhz
    ));
    t.push(format!("  initiation interval {p} cycles"));
    t.push(format!("  throughput {} inf/s", group_thousands(tput)));

    if let Some(r) = read_json::<TrainReport>(&out.join(TRAIN_REPORT)) {
        t.push(String::new());
        t.push("Training".into());
        t.push(format!(
            "  {} train / {} test samples, {} classes",
            r.train_samples, r.test_samples, r.classes
        ));
        if let Some(th) = r.threshold {
            t.push(format!("  booleanization threshold {th}"));
        }
        t.push(format!("  train accuracy {:.4}", r.train_accuracy));
        t.push(format!("  test accuracy {:.4}", r.test_accuracy));
        t.push(format!("  include density {:.4}", r.include_density));
    }
    if compiled.is_some() {
        if let Ok(s) = fs::read_to_string(out.join(SPARSITY_FILE)) {
            t.push(String::new());
            t.push("Compilation".into());
            t.extend(s.lines().map(|l| {
                if l.is_empty() {
                    String::new()
                } else {
                    format!("  {l}")
                }
            }));
        }
    }
    if let Some(r) = read_json::<SimReport>(&out.join(SIM_REPORT)) {
        t.push(String::new());
        t.push("Simulation".into());
        t.push(format!(
            "  {} samples in {} cycles",
            r.samples, r.total_cycles
        ));
        if let (Some(c), Some(us)) = (r.latency_cycles, r.latency_us) {
            t.push(format!("  measured latency {c} cycles = {us:.2} us"));
        }
        t.push(format!(
            "  measured initiation interval {:.2} cycles",
            r.initiation_interval
        ));
        t.push(format!(
            "  measured throughput {} inf/s",
            group_thousands(r.throughput_inf_s)
        ));
    }
    if let Some(v) = read_json::<VerifyReport>(&out.join(VERIFY_FILE)) {
        t.push(String::new());
        t.push("Verification".into());
        t.push(format!(
            "  {} ({} samples, {} mismatches)",
            if v.passed { "passed" } else { "FAILED" },
            v.verdict.samples,
            v.verdict.mismatches.len()
        ));
        if let Some(a) = v.verdict.accuracy {
            t.push(format!("  simulated accuracy {a:.4}"));
        }
    }
    if out.join(RTL_DIR).join("manifest.json").exists() {
        t.push(String::new());
        t.push(format!("RTL in {}", out.join(RTL_DIR).display()));
    }
    let mut text = t.join("\n");
    text.push('\n');
    fs::write(out.join(REPORT_FILE), &text)?;
    Ok(StageOutcome::ok(text.lines().map(str::to_string).collect()))
}
