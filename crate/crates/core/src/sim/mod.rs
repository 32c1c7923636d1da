//! Cycle-accurate simulation of the streaming accelerator and the
//! closed-form latency/throughput model.

mod machine;
mod trace;

pub use machine::{Accelerator, CycleInputs, CycleOutputs};
pub use trace::{clause_checksum, write_trace, TraceRecord};

use std::collections::BTreeSet;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::DatapathConfig;
use crate::bits::BitVector;
use crate::compile::{
    partition, share_subexpressions, CompiledModel, SharedNetlist, SharingConfig,
};
use crate::data::{packetize, PacketPlan};
use crate::tm::{ReferenceModel, TaStateMatrix};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("sample {index} has {found} features, compiled model expects {expected}")]
    SampleWidth {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("reference model and compiled model disagree on {0}")]
    ModelMismatch(String),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("simulation did not drain within {0} cycles")]
    Timeout(u64),
}

/// Cycles during which a stall is injected.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StallPattern {
    #[default]
    Never,
    Cycles {
        cycles: BTreeSet<u64>,
    },
    /// Stalls whenever `cycle % period == phase`.
    Periodic {
        period: u64,
        phase: u64,
    },
}

impl StallPattern {
    pub fn stalled(&self, cycle: u64) -> bool {
        match self {
            StallPattern::Never => false,
            StallPattern::Cycles { cycles } => cycles.contains(&cycle),
            StallPattern::Periodic { period, phase } => *period > 0 && cycle % period == *phase,
        }
    }

    pub fn is_never(&self) -> bool {
        match self {
            StallPattern::Never => true,
            StallPattern::Cycles { cycles } => cycles.is_empty(),
            StallPattern::Periodic { period, phase } => *period == 0 || phase >= period,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub clock_mhz: f64,
    pub datapath: DatapathConfig,
    pub sharing: SharingConfig,
    /// Cycles in which the source holds TVALID low.
    pub input_stalls: StallPattern,
    /// Cycles in which the sink holds its ready low.
    pub output_stalls: StallPattern,
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            clock_mhz: 50.0,
            datapath: DatapathConfig::default(),
            sharing: SharingConfig::default(),
            input_stalls: StallPattern::Never,
            output_stalls: StallPattern::Never,
            trace: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.clock_mhz.is_finite() && self.clock_mhz > 0.0) {
            return Err(SimError::Config(format!(
                "clock_mhz must be positive, got {}",
                self.clock_mhz
            )));
        }
        if self.sharing.lut_inputs < 2 {
            return Err(SimError::Config("lut_inputs must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub samples: usize,
    pub packet_count: usize,
    pub clock_mhz: f64,
    pub predictions: Vec<usize>,
    /// From the first accepted packet to the cycle the first result is visible.
    pub latency_cycles: Option<u64>,
    pub latency_us: Option<f64>,
    /// Mean spacing of first-packet acceptances; the packet count when only
    /// one sample was run.
    pub initiation_interval: f64,
    pub throughput_inf_s: u64,
    pub total_cycles: u64,
    #[serde(skip)]
    pub trace: Option<Vec<TraceRecord>>,
}

/// Closed-form latency (µs) and throughput (inferences/s, rounded down).
pub fn latency_model(
    features: usize,
    bandwidth: usize,
    datapath: DatapathConfig,
    clock_mhz: f64,
) -> (f64, u64) {
    let p = features.div_ceil(bandwidth.max(1));
    let cycles = latency_cycles(p, datapath);
    let latency_us = cycles as f64 / clock_mhz;
    (latency_us, throughput(clock_mhz, p as f64))
}

pub fn latency_cycles(packets: usize, datapath: DatapathConfig) -> u64 {
    (packets + datapath.post_hcb_latency()) as u64
}

fn throughput(clock_mhz: f64, ii: f64) -> u64 {
    // Exact for integer clocks in MHz and integer II.
    let hz = clock_mhz * 1e6;
    if hz.fract() == 0.0 && ii.fract() == 0.0 {
        hz as u64 / ii as u64
    } else {
        (hz / ii).floor() as u64
    }
}

pub struct Simulator {
    model: CompiledModel,
    net: SharedNetlist,
    config: SimConfig,
}

impl Simulator {
    pub fn new(model: &CompiledModel, config: &SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let net = share_subexpressions(&partition(&model.clauses, &model.plan()), config.sharing);
        Ok(Self::with_netlist(model, net, config))
    }

    pub fn with_netlist(model: &CompiledModel, net: SharedNetlist, config: &SimConfig) -> Self {
        Self {
            model: model.clone(),
            net,
            config: config.clone(),
        }
    }

    pub fn netlist(&self) -> &SharedNetlist {
        &self.net
    }

    pub fn plan(&self) -> PacketPlan {
        self.model.plan()
    }

    pub fn run(&self, samples: &[BitVector]) -> Result<SimReport, SimError> {
        let plan = self.plan();
        let mut stream: Vec<(BitVector, bool)> =
            Vec::with_capacity(samples.len() * plan.packet_count());
        for (index, x) in samples.iter().enumerate() {
            let words = packetize(x, &plan).map_err(|_| SimError::SampleWidth {
                index,
                expected: plan.features(),
                found: x.len(),
            })?;
            let n = words.len();
            stream.extend(words.into_iter().enumerate().map(|(p, w)| (w, p + 1 == n)));
        }

        let cfg = &self.config;
        let mut acc = Accelerator::new(&self.model, &self.net, cfg.datapath);
        // Leave the reset state before the stream starts.
        acc.step(CycleInputs {
            rst: false,
            tvalid: false,
            tdata: None,
            tlast: false,
            result_ready: true,
        });

        let p = plan.packet_count();
        let limit = 1000
            + 64 * (stream.len() as u64 + 64)
                * (1 + u64::from(!cfg.input_stalls.is_never())
                    + u64::from(!cfg.output_stalls.is_never()));
        let mut next = 0;
        let mut first_accept = Vec::with_capacity(samples.len());
        let mut predictions = Vec::with_capacity(samples.len());
        let mut first_result: Option<u64> = None;
        let mut trace = cfg.trace.then(Vec::new);
        let mut cycle = 0u64;
        while predictions.len() < samples.len() {
            if cycle >= limit {
                return Err(SimError::Timeout(limit));
            }
            let offer = next < stream.len() && !cfg.input_stalls.stalled(cycle);
            let ready = !cfg.output_stalls.stalled(cycle);
            let regs = trace
                .as_ref()
                .map(|_| clause_checksum(acc.clause_registers()));
            let out = acc.step(CycleInputs {
                rst: false,
                tvalid: offer,
                tdata: offer.then(|| &stream[next].0),
                tlast: offer && stream[next].1,
                result_ready: ready,
            });
            if let Some(pk) = out.accepted {
                if pk == 0 {
                    first_accept.push(cycle);
                }
                next += 1;
            }
            if out.result_valid && ready {
                first_result.get_or_insert(cycle);
                predictions.push(out.result_class);
            }
            if let Some(t) = trace.as_mut() {
                t.push(TraceRecord {
                    cycle,
                    state: out.state,
                    packet: out.accepted,
                    checksum: format!("{:016x}", regs.unwrap_or(0)),
                });
            }
            cycle += 1;
        }

        let ii = if first_accept.len() >= 2 {
            (first_accept[first_accept.len() - 1] - first_accept[0]) as f64
                / (first_accept.len() - 1) as f64
        } else {
            p as f64
        };
        let latency_cycles = first_result.map(|r| r - first_accept[0]);
        Ok(SimReport {
            samples: samples.len(),
            packet_count: p,
            clock_mhz: cfg.clock_mhz,
            predictions,
            latency_cycles,
            latency_us: latency_cycles.map(|c| c as f64 / cfg.clock_mhz),
            initiation_interval: ii,
            throughput_inf_s: throughput(cfg.clock_mhz, ii),
            total_cycles: cycle,
            trace,
        })
    }
}

pub fn simulate_stream(
    model: &CompiledModel,
    samples: &[BitVector],
    config: &SimConfig,
) -> Result<SimReport, SimError> {
    Simulator::new(model, config)?.run(samples)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub samples: usize,
    pub mismatches: Vec<usize>,
    pub passed: bool,
    /// Fraction of samples whose simulated class equals its label, when labels were given.
    pub accuracy: Option<f64>,
    pub warnings: Vec<String>,
}

/// Simulates every sample and checks each predicted class against the
/// reference inference on the state matrix.
pub fn compare_with_reference(
    model: &TaStateMatrix,
    compiled: &CompiledModel,
    samples: &[BitVector],
    labels: Option<&[usize]>,
    config: &SimConfig,
) -> Result<(Verdict, SimReport), SimError> {
    if model.features() != compiled.features || model.classes() != compiled.classes {
        return Err(SimError::ModelMismatch(format!(
            "dimensions ({} features, {} classes) vs ({}, {})",
            model.features(),
            model.classes(),
            compiled.features,
            compiled.classes
        )));
    }
    let mut warnings = Vec::new();
    if samples.is_empty() {
        warn!("verification ran on an empty dataset");
        warnings.push("empty dataset: nothing was compared".to_string());
    }
    let reference = ReferenceModel::new(model);
    let report = simulate_stream(compiled, samples, config)?;
    let mut mismatches = Vec::new();
    for (i, (x, &got)) in samples.iter().zip(&report.predictions).enumerate() {
        let want = reference
            .predict(x)
            .map_err(|e| SimError::ModelMismatch(e.to_string()))?
            .argmax_class;
        if want != got {
            mismatches.push(i);
        }
    }
    let accuracy = labels.filter(|l| !l.is_empty()).map(|l| {
        let hits = report
            .predictions
            .iter()
            .zip(l)
            .filter(|(a, b)| a == b)
            .count();
        hits as f64 / l.len() as f64
    });
    Ok((
        Verdict {
            samples: samples.len(),
            passed: mismatches.is_empty(),
            mismatches,
            accuracy,
            warnings,
        },
        report,
    ))
}
