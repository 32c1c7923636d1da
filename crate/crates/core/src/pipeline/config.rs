use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::arch::DatapathConfig;
use crate::compile::SharingConfig;
use crate::rtl::{EmitConfig, StreamSignals};
use crate::sim::{SimConfig, StallPattern};
use crate::tm::Hyperparams;

/// Where the data comes from and how it is booleanized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        /// Bit set when value > threshold. Defaults to 30% of the training value range.
        #[serde(default)]
        threshold: Option<f64>,
        #[serde(default)]
        train_limit: Option<usize>,
        #[serde(default)]
        test_limit: Option<usize>,
    },
    Csv {
        train: PathBuf,
        test: PathBuf,
        #[serde(default)]
        threshold: Option<f64>,
        #[serde(default)]
        train_limit: Option<usize>,
        #[serde(default)]
        test_limit: Option<usize>,
    },
    /// Already booleanized cache files.
    Cache {
        train: PathBuf,
        test: PathBuf,
        #[serde(default)]
        train_limit: Option<usize>,
        #[serde(default)]
        test_limit: Option<usize>,
    },
    NoisyXor {
        train_samples: usize,
        test_samples: usize,
        #[serde(default = "default_noise_features")]
        noise_features: usize,
        #[serde(default = "default_label_noise")]
        label_noise: f64,
    },
}

fn default_noise_features() -> usize {
    10
}

fn default_label_noise() -> f64 {
    0.4
}

impl DatasetSpec {
    pub fn paths(&self) -> Vec<&Path> {
        match self {
            DatasetSpec::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                ..
            } => vec![train_images, train_labels, test_images, test_labels],
            DatasetSpec::Csv { train, test, .. } | DatasetSpec::Cache { train, test, .. } => {
                vec![train, test]
            }
            DatasetSpec::NoisyXor { .. } => Vec::new(),
        }
        .into_iter()
        .map(PathBuf::as_path)
        .collect()
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            DatasetSpec::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                ..
            } => {
                for p in [train_images, train_labels, test_images, test_labels] {
                    fix(p);
                }
            }
            DatasetSpec::Csv { train, test, .. } | DatasetSpec::Cache { train, test, .. } => {
                fix(train);
                fix(test);
            }
            DatasetSpec::NoisyXor { .. } => {}
        }
    }

    pub fn set_threshold(&mut self, value: f64) -> Result<(), PipelineError> {
        match self {
            DatasetSpec::Idx { threshold, .. } | DatasetSpec::Csv { threshold, .. } => {
                *threshold = Some(value);
                Ok(())
            }
            _ => Err(PipelineError::Config(
                "threshold only applies to idx and csv datasets".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitOptions {
    pub prefix: String,
    pub signals: StreamSignals,
    pub sum_width: Option<u32>,
    /// Test-set samples written as testbench vectors.
    pub test_vectors: usize,
}

impl Default for EmitOptions {
    fn default() -> Self {
        let e = EmitConfig::default();
        Self {
            prefix: e.prefix,
            signals: e.signals,
            sum_width: None,
            test_vectors: 64,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOptions {
    pub input_stalls: StallPattern,
    pub output_stalls: StallPattern,
    pub trace: bool,
    /// Only the first `limit` test samples; all when unset.
    pub limit: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    /// Fail verification below this test accuracy.
    pub min_accuracy: Option<f64>,
}

/// One value list per dotted config key; the sweep runs their product.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub grid: Vec<SweepAxis>,
    /// Concurrent jobs; 0 means one per core.
    pub jobs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: usize,
    #[serde(default)]
    pub datapath: DatapathConfig,
    #[serde(default)]
    pub sharing: SharingConfig,
    #[serde(default = "default_clock")]
    pub clock_mhz: f64,
    #[serde(default)]
    pub prune_contradictory: bool,
    #[serde(default)]
    pub emit: EmitOptions,
    #[serde(default)]
    pub sim: SimOptions,
    #[serde(default)]
    pub verify: VerifyOptions,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_bandwidth() -> usize {
    64
}

fn default_clock() -> f64 {
    50.0
}

fn default_output() -> PathBuf {
    PathBuf::from("runs/default")
}

impl PipelineConfig {
    /// Reads a config file, applies `key=value` overrides (dotted keys, JSON
    /// values, bare strings allowed) and resolves dataset paths against the
    /// file's directory.
    pub fn load(path: &Path, overrides: &[(String, Value)]) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_value(value, overrides)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.dataset.resolve(base);
        Ok(cfg)
    }

    pub fn from_value(
        mut value: Value,
        overrides: &[(String, Value)],
    ) -> Result<Self, PipelineError> {
        for (key, v) in overrides {
            set_key(&mut value, key, v.clone())?;
        }
        let mut cfg: Self =
            serde_json::from_value(value).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.hyperparams.seed = cfg.seed;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if let Err(e) = self.hyperparams.validate() {
            return bad(e.to_string());
        }
        if self.bandwidth == 0 {
            return bad("bandwidth must be positive".into());
        }
        if !(self.clock_mhz.is_finite() && self.clock_mhz > 0.0) {
            return bad("clock_mhz must be positive".into());
        }
        if let Some(a) = self.verify.min_accuracy {
            if !(0.0..=1.0).contains(&a) {
                return bad(format!("verify.min_accuracy {a} is outside [0, 1]"));
            }
        }
        if let DatasetSpec::NoisyXor { label_noise, .. } = self.dataset {
            if !(0.0..=0.5).contains(&label_noise) {
                return bad(format!("label_noise {label_noise} is outside [0, 0.5]"));
            }
        }
        Ok(())
    }

    /// Fails unless every dataset file exists.
    pub fn check_paths(&self) -> Result<(), PipelineError> {
        for p in self.dataset.paths() {
            if !p.exists() {
                return Err(PipelineError::Config(format!(
                    "dataset file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    pub fn emit_config(&self) -> EmitConfig {
        EmitConfig {
            datapath: self.datapath,
            sharing: self.sharing,
            sum_width: self.emit.sum_width,
            prefix: self.emit.prefix.clone(),
            signals: self.emit.signals.clone(),
            clock_mhz: self.clock_mhz,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            clock_mhz: self.clock_mhz,
            datapath: self.datapath,
            sharing: self.sharing,
            input_stalls: self.sim.input_stalls.clone(),
            output_stalls: self.sim.output_stalls.clone(),
            trace: self.sim.trace,
        }
    }

    /// sha256 of the canonical JSON form. The output directory and the sweep
    /// grid do not change any artifact, so they are left out.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.remove("output_dir");
            m.remove("sweep");
        }
        // serde_json maps are ordered by key, so this text is canonical.
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}

/// `a.b.c = v` on a JSON object, creating intermediate objects.
pub fn set_key(root: &mut Value, key: &str, v: Value) -> Result<(), PipelineError> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(PipelineError::Config(format!("bad key {key:?}")));
        }
        let Value::Object(map) = cur else {
            return Err(PipelineError::Config(format!(
                "{key}: {} is not an object",
                parts[..i].join(".")
            )));
        };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), v);
            return Ok(());
        }
        cur = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!()
}

/// Parses `key=value`; the value is JSON when it parses as JSON, else a string.
pub fn parse_override(s: &str) -> Result<(String, Value), PipelineError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| PipelineError::Config(format!("override {s:?} is not key=value")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn xor() -> Value {
        json!({"dataset": {"format": "noisy_xor", "train_samples": 100, "test_samples": 50}})
    }

    #[test]
    fn defaults_fill_in() {
        let c = PipelineConfig::from_value(xor(), &[]).unwrap();
        assert_eq!(c.bandwidth, 64);
        assert_eq!(c.clock_mhz, 50.0);
        assert_eq!(c.emit.test_vectors, 64);
        c.validate().unwrap();
    }

    #[test]
    fn overrides_apply_and_change_hash() {
        let a = PipelineConfig::from_value(xor(), &[]).unwrap();
        let o = vec![
            parse_override("hyperparams.threshold=20").unwrap(),
            parse_override("seed=9").unwrap(),
        ];
        let b = PipelineConfig::from_value(xor(), &o).unwrap();
        assert_eq!(b.hyperparams.threshold, 20);
        assert_eq!(b.hyperparams.seed, 9);
        assert_ne!(a.hash(), b.hash());
        let c =
            PipelineConfig::from_value(xor(), &[parse_override("output_dir=elsewhere").unwrap()])
                .unwrap();
        assert_eq!(c.output_dir, PathBuf::from("elsewhere"));
        assert_eq!(a.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = xor();
        v["bandwith"] = json!(32);
        assert!(PipelineConfig::from_value(v, &[]).is_err());
        assert!(parse_override("novalue").is_err());
        assert!(set_key(&mut json!({"a": 1}), "a.b", json!(2)).is_err());
    }

    #[test]
    fn relative_paths_resolve_against_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"dataset": {"format": "csv", "train": "a.csv", "test": "/abs/b.csv"}}"#,
        )
        .unwrap();
        let c = PipelineConfig::load(&path, &[]).unwrap();
        assert_eq!(
            c.dataset.paths(),
            vec![dir.path().join("a.csv").as_path(), Path::new("/abs/b.csv")]
        );
        assert!(c.check_paths().is_err());
    }
}
