//! Verilog-2001 emission: clause blocks, class sums, argmax tree,
//! controller, AXI4-stream top level and a self-checking testbench.

mod argmax;
mod class_sum;
mod controller;
mod hcb;
pub mod lint;
mod top;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::arch::{index_width, DatapathConfig};
use crate::bits::BitVector;
use crate::compile::{
    min_sum_width, partition, share_subexpressions, CompiledModel, SharedNetlist, SharingConfig,
};
use crate::data::packetize;
use crate::tm::Provenance;

pub use lint::{lint_design, LintIssue};

#[derive(Debug, Error)]
pub enum RtlError {
    #[error("invalid emit config: {0}")]
    Config(String),
    #[error("{samples} test vectors but {expected} expected results")]
    VectorCount { samples: usize, expected: usize },
    #[error("test vector {index} has {found} features, expected {expected}")]
    VectorWidth {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Names of the stream slave ports on the top module.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct StreamSignals {
    pub tdata: String,
    pub tvalid: String,
    pub tready: String,
    pub tlast: String,
}

impl Default for StreamSignals {
    fn default() -> Self {
        Self {
            tdata: "s_axis_tdata".into(),
            tvalid: "s_axis_tvalid".into(),
            tready: "s_axis_tready".into(),
            tlast: "s_axis_tlast".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmitConfig {
    pub datapath: DatapathConfig,
    pub sharing: SharingConfig,
    /// Signed class-sum width; the minimum that fits when unset.
    pub sum_width: Option<u32>,
    pub prefix: String,
    pub signals: StreamSignals,
    /// Testbench clock.
    pub clock_mhz: f64,
}

impl Default for EmitConfig {
    fn default() -> Self {
        Self {
            datapath: DatapathConfig::default(),
            sharing: SharingConfig::default(),
            sum_width: None,
            prefix: "tm_".into(),
            signals: StreamSignals::default(),
            clock_mhz: 50.0,
        }
    }
}

fn is_identifier(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_')
        && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
        && !lint::is_keyword(s)
}

impl EmitConfig {
    pub fn validate(&self, model: &CompiledModel) -> Result<(), RtlError> {
        let min = model.sum_width();
        if let Some(w) = self.sum_width {
            if w < min {
                return Err(RtlError::Config(format!(
                    "sum_width {w} cannot hold class sums, need at least {min}"
                )));
            }
            if w > 32 {
                return Err(RtlError::Config(format!("sum_width {w} exceeds 32 bits")));
            }
        }
        if !self.prefix.is_empty() && !is_identifier(&self.prefix) {
            return Err(RtlError::Config(format!(
                "prefix {:?} is not a Verilog identifier",
                self.prefix
            )));
        }
        let s = &self.signals;
        for name in [&s.tdata, &s.tvalid, &s.tready, &s.tlast] {
            if !is_identifier(name) {
                return Err(RtlError::Config(format!(
                    "signal name {name:?} is not a Verilog identifier"
                )));
            }
        }
        if !(self.clock_mhz.is_finite() && self.clock_mhz > 0.0) {
            return Err(RtlError::Config("clock_mhz must be positive".into()));
        }
        if self.sharing.lut_inputs < 2 {
            return Err(RtlError::Config("lut_inputs must be at least 2".into()));
        }
        Ok(())
    }
}

/// Everything the per-module emitters need, resolved once.
pub(crate) struct Design<'a> {
    pub model: &'a CompiledModel,
    pub net: SharedNetlist,
    pub cfg: &'a EmitConfig,
    pub packets: usize,
    pub bandwidth: usize,
    pub clauses: usize,
    pub classes: usize,
    pub sum_width: u32,
    pub index_width: u32,
}

impl<'a> Design<'a> {
    fn new(model: &'a CompiledModel, cfg: &'a EmitConfig) -> Result<Self, RtlError> {
        cfg.validate(model)?;
        let net = share_subexpressions(&partition(&model.clauses, &model.plan()), cfg.sharing);
        Ok(Self {
            model,
            net,
            cfg,
            packets: model.packet_count,
            bandwidth: model.bandwidth,
            clauses: model.clause_count().max(1),
            classes: model.classes,
            sum_width: cfg.sum_width.unwrap_or_else(|| model.sum_width()),
            index_width: index_width(model.classes),
        })
    }

    pub fn module(&self, name: &str) -> String {
        format!("{}{}", self.cfg.prefix, name)
    }

    /// Width of the count output of each popcount.
    pub fn count_width(&self) -> u32 {
        self.sum_width - 1
    }
}

pub(crate) const HEADER: &str = "// Generated by tmforge. Do not edit.\n";

/// The emitted file set, in a fixed order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RtlDesign {
    pub files: Vec<(String, String)>,
}

impl RtlDesign {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t.as_str())
    }

    pub fn verilog_files(&self) -> impl Iterator<Item = (&str, &str)> {
        self.files
            .iter()
            .filter(|(n, _)| n.ends_with(".v"))
            .map(|(n, t)| (n.as_str(), t.as_str()))
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), RtlError> {
        fs::create_dir_all(dir)?;
        for (name, text) in &self.files {
            fs::write(dir.join(name), text)?;
        }
        Ok(())
    }
}

/// The RTL modules only, without testbench, vectors or manifest.
pub fn emit_rtl(model: &CompiledModel, cfg: &EmitConfig) -> Result<RtlDesign, RtlError> {
    let d = Design::new(model, cfg)?;
    let mut files = vec![("top.v".to_string(), top::emit_top(&d))];
    for p in 0..d.packets {
        files.push((format!("hcb_{p}.v"), hcb::emit_hcb(&d, p)));
    }
    files.push(("class_sum.v".into(), class_sum::emit_class_sum(&d)));
    files.push(("argmax.v".into(), argmax::emit_argmax(&d)));
    files.push(("controller.v".into(), controller::emit_controller(&d)));
    Ok(RtlDesign { files })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub top: String,
    pub provenance: Provenance,
    pub features: usize,
    pub bandwidth: usize,
    pub packets: usize,
    pub classes: usize,
    pub clauses: usize,
    pub sum_width: u32,
    pub class_sum_stages: usize,
    pub argmax_stages: usize,
    pub latency_cycles: usize,
    pub test_vectors: usize,
    pub files: Vec<ManifestFile>,
}

impl Manifest {
    /// sha256 over the manifest text itself, for quick comparisons.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(
            serde_json::to_vec(self).expect("manifest serializes"),
        ))
    }
}

/// Full file set: RTL, testbench, vector files and `manifest.json`.
pub fn emit_design(
    model: &CompiledModel,
    cfg: &EmitConfig,
    samples: &[BitVector],
    expected: &[usize],
    provenance: &Provenance,
) -> Result<(RtlDesign, Manifest), RtlError> {
    if samples.len() != expected.len() {
        return Err(RtlError::VectorCount {
            samples: samples.len(),
            expected: expected.len(),
        });
    }
    let plan = model.plan();
    let digits = plan.bandwidth().div_ceil(4);
    let mut vectors = String::new();
    for (index, x) in samples.iter().enumerate() {
        let words = packetize(x, &plan).map_err(|_| RtlError::VectorWidth {
            index,
            expected: plan.features(),
            found: x.len(),
        })?;
        for w in words {
            let h = w.to_hex();
            vectors.push_str(&format!("{h:0>digits$}\n"));
        }
    }
    let iw = index_width(model.classes) as usize;
    let mut exp = String::new();
    for &e in expected {
        exp.push_str(&format!("{:0>w$X}\n", e, w = iw.div_ceil(4)));
    }

    let mut design = emit_rtl(model, cfg)?;
    let d = Design::new(model, cfg)?;
    design
        .files
        .push(("tb_top.v".into(), top::emit_testbench(&d, samples.len())));
    design.files.push(("vectors.mem".into(), vectors));
    design.files.push(("expected.mem".into(), exp));

    let manifest = Manifest {
        format: "tmforge-rtl".into(),
        version: 1,
        top: d.module("top"),
        provenance: provenance.clone(),
        features: model.features,
        bandwidth: model.bandwidth,
        packets: d.packets,
        classes: d.classes,
        clauses: model.clause_count(),
        sum_width: d.sum_width,
        class_sum_stages: cfg.datapath.class_sum_stages,
        argmax_stages: cfg.datapath.argmax_stages,
        latency_cycles: d.packets + cfg.datapath.post_hcb_latency(),
        test_vectors: samples.len(),
        files: design
            .files
            .iter()
            .map(|(name, text)| ManifestFile {
                name: name.clone(),
                bytes: text.len(),
                sha256: hex::encode(Sha256::digest(text.as_bytes())),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    design.files.push(("manifest.json".into(), text));
    Ok((design, manifest))
}

/// Minimum signed sum width for `clauses_per_class` clauses.
pub fn required_sum_width(clauses_per_class: usize) -> u32 {
    min_sum_width(clauses_per_class.div_ceil(2))
}

#[cfg(test)]
mod tests;
