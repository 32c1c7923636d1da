//! Trained model to sparse clause expressions, per-packet partial clauses
//! and a shared AND netlist.

mod partition;
mod report;
mod share;

pub use partition::{partition, HcbPlan};
pub use report::{
    estimate_resources, lut_cost, ClassSparsity, CostSummary, ResourceEstimate, SharingSummary,
    SparsityReport,
};
pub use share::{share_subexpressions, Gate, Input, PacketNetlist, SharedNetlist, SharingConfig};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitVector;
use crate::data::PacketPlan;
use crate::tm::{polarity, Prediction, Provenance, TaStateMatrix};

pub const COMPILED_FORMAT: &str = "tmforge-compiled";
pub const COMPILED_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("compiled model: {0}")]
    Invalid(String),
    #[error("input has {found} features, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One literal: feature `feature`, or its negation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub feature: u32,
    pub negated: bool,
}

impl Literal {
    pub fn pos(feature: usize) -> Self {
        Self {
            feature: feature as u32,
            negated: false,
        }
    }

    pub fn neg(feature: usize) -> Self {
        Self {
            feature: feature as u32,
            negated: true,
        }
    }

    pub fn eval(self, x: &BitVector) -> bool {
        x.get(self.feature as usize) != self.negated
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClauseRef {
    pub class: usize,
    pub clause: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseExpr {
    pub class: usize,
    pub clause: usize,
    pub polarity: i8,
    pub pos_includes: Vec<usize>,
    pub neg_includes: Vec<usize>,
}

impl ClauseExpr {
    pub fn id(&self) -> ClauseRef {
        ClauseRef {
            class: self.class,
            clause: self.clause,
        }
    }

    pub fn include_count(&self) -> usize {
        self.pos_includes.len() + self.neg_includes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.include_count() == 0
    }

    /// Includes both `x_i` and `NOT x_i` for some `i`, so it is constant 0.
    pub fn is_contradictory(&self) -> bool {
        let (mut a, mut b) = (
            self.pos_includes.iter().peekable(),
            self.neg_includes.iter().peekable(),
        );
        while let (Some(&&p), Some(&&n)) = (a.peek(), b.peek()) {
            match p.cmp(&n) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    /// Sorted by feature, positive before negated.
    pub fn literals(&self) -> Vec<Literal> {
        let mut v: Vec<Literal> = self
            .pos_includes
            .iter()
            .map(|&f| Literal::pos(f))
            .chain(self.neg_includes.iter().map(|&f| Literal::neg(f)))
            .collect();
        v.sort_unstable();
        v
    }

    pub fn evaluate(&self, x: &BitVector) -> bool {
        self.pos_includes.iter().all(|&f| x.get(f)) && self.neg_includes.iter().all(|&f| !x.get(f))
    }
}

/// Include sets of every clause, class-major.
pub fn compile_model(model: &TaStateMatrix) -> Vec<ClauseExpr> {
    let f = model.features();
    let mut out = Vec::with_capacity(model.classes() * model.clauses_per_class());
    for class in 0..model.classes() {
        for clause in 0..model.clauses_per_class() {
            let (mut pos, mut neg) = (Vec::new(), Vec::new());
            for lit in model.clause_includes(class, clause) {
                if lit < f {
                    pos.push(lit);
                } else {
                    neg.push(lit - f);
                }
            }
            out.push(ClauseExpr {
                class,
                clause,
                polarity: polarity(clause) as i8,
                pos_includes: pos,
                neg_includes: neg,
            });
        }
    }
    out
}

/// The compiled-model file: everything the emitter and the simulator need.
///
/// Clause slot `i` (bit `i` of every clause register bank) is `clauses[i]`.
/// Pruned clauses are kept aside with their original indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompiledModel {
    pub format: String,
    pub version: u32,
    pub classes: usize,
    pub clauses_per_class: usize,
    pub features: usize,
    pub bandwidth: usize,
    pub packet_count: usize,
    pub pad_bits: usize,
    pub clauses: Vec<ClauseExpr>,
    #[serde(default)]
    pub pruned: Vec<ClauseExpr>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl CompiledModel {
    pub fn new(model: &TaStateMatrix, plan: PacketPlan) -> Result<Self, CompileError> {
        if plan.features() != model.features() {
            return Err(CompileError::DimensionMismatch {
                expected: model.features(),
                found: plan.features(),
            });
        }
        Ok(Self {
            format: COMPILED_FORMAT.into(),
            version: COMPILED_VERSION,
            classes: model.classes(),
            clauses_per_class: model.clauses_per_class(),
            features: model.features(),
            bandwidth: plan.bandwidth(),
            packet_count: plan.packet_count(),
            pad_bits: plan.pad_bits(),
            clauses: compile_model(model),
            pruned: Vec::new(),
            provenance: Provenance::default(),
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn plan(&self) -> PacketPlan {
        PacketPlan::new(self.features, self.bandwidth).expect("validated on construction")
    }

    pub fn clause_count(&self) -> usize {
        self.clauses.len()
    }

    pub fn contradictory(&self) -> Vec<ClauseRef> {
        self.clauses
            .iter()
            .chain(&self.pruned)
            .filter(|c| c.is_contradictory())
            .map(ClauseExpr::id)
            .collect()
    }

    /// Moves constant-0 clauses to `pruned`. They never vote, so predictions
    /// are unchanged. Returns the removed clauses' original indices.
    pub fn prune_contradictory(&mut self) -> Vec<ClauseRef> {
        let (drop, keep): (Vec<_>, Vec<_>) = std::mem::take(&mut self.clauses)
            .into_iter()
            .partition(ClauseExpr::is_contradictory);
        self.clauses = keep;
        let ids = drop.iter().map(ClauseExpr::id).collect();
        self.pruned.extend(drop);
        self.pruned.sort_by_key(ClauseExpr::id);
        ids
    }

    /// Slot index of every surviving clause, keyed by original index.
    pub fn slot_map(&self) -> Vec<(ClauseRef, usize)> {
        self.clauses
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id(), i))
            .collect()
    }

    /// Clauses per class split by polarity: `(positive slots, negative slots)`.
    pub fn class_slots(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut out = vec![(Vec::new(), Vec::new()); self.classes];
        for (i, c) in self.clauses.iter().enumerate() {
            if c.polarity > 0 {
                out[c.class].0.push(i);
            } else {
                out[c.class].1.push(i);
            }
        }
        out
    }

    /// Signed width able to hold every class sum.
    pub fn sum_width(&self) -> u32 {
        let max = self
            .class_slots()
            .iter()
            .map(|(p, n)| p.len().max(n.len()))
            .max()
            .unwrap_or(0)
            .max(self.clauses_per_class.div_ceil(2));
        min_sum_width(max)
    }

    pub fn clause_outputs(&self, x: &BitVector) -> Result<Vec<bool>, CompileError> {
        self.check_width(x)?;
        Ok(self.clauses.iter().map(|c| c.evaluate(x)).collect())
    }

    pub fn sums_from_outputs(&self, outputs: &[bool]) -> Vec<i32> {
        let mut sums = vec![0i32; self.classes];
        for (c, &o) in self.clauses.iter().zip(outputs) {
            if o {
                sums[c.class] += i32::from(c.polarity);
            }
        }
        sums
    }

    pub fn predict(&self, x: &BitVector) -> Result<Prediction, CompileError> {
        let outputs = self.clause_outputs(x)?;
        Ok(Prediction::from_sums(self.sums_from_outputs(&outputs)))
    }

    fn check_width(&self, x: &BitVector) -> Result<(), CompileError> {
        if x.len() != self.features {
            return Err(CompileError::DimensionMismatch {
                expected: self.features,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CompileError> {
        let bad = |m: String| Err(CompileError::Invalid(m));
        if self.format != COMPILED_FORMAT {
            return bad(format!("unexpected format tag {:?}", self.format));
        }
        if self.version != COMPILED_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        let plan = PacketPlan::new(self.features, self.bandwidth)
            .map_err(|e| CompileError::Invalid(e.to_string()))?;
        if plan.packet_count() != self.packet_count || plan.pad_bits() != self.pad_bits {
            return bad("packet count or padding disagrees with features and bandwidth".into());
        }
        if self.classes == 0 {
            return bad("no classes".into());
        }
        for c in self.clauses.iter().chain(&self.pruned) {
            if c.class >= self.classes || c.clause >= self.clauses_per_class {
                return bad(format!(
                    "clause ({}, {}) outside model dimensions",
                    c.class, c.clause
                ));
            }
            if i32::from(c.polarity) != polarity(c.clause) {
                return bad(format!(
                    "clause ({}, {}) has polarity {}",
                    c.class, c.clause, c.polarity
                ));
            }
            for set in [&c.pos_includes, &c.neg_includes] {
                if set.windows(2).any(|w| w[0] >= w[1]) {
                    return bad(format!(
                        "clause ({}, {}) include list not strictly sorted",
                        c.class, c.clause
                    ));
                }
                if set.last().is_some_and(|&f| f >= self.features) {
                    return bad(format!(
                        "clause ({}, {}) includes a feature out of range",
                        c.class, c.clause
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), CompileError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, CompileError> {
        let m: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        m.validate()?;
        Ok(m)
    }
}

/// Smallest signed width holding `[-max, max]`.
pub fn min_sum_width(max: usize) -> u32 {
    (usize::BITS - max.leading_zeros()) + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(v: &[u8]) -> BitVector {
        BitVector::from_bools(&v.iter().map(|&b| b == 1).collect::<Vec<_>>())
    }

    #[test]
    fn all_exclude_model_compiles_to_empty_clauses() {
        let m = TaStateMatrix::new(2, 4, 6, 10).unwrap();
        let e = compile_model(&m);
        assert_eq!(e.len(), 8);
        assert!(e.iter().all(ClauseExpr::is_empty));
        assert!(e[3].evaluate(&bits(&[0, 1, 0, 1, 1, 0])));
        assert_eq!(e[3].polarity, -1);
    }

    #[test]
    fn single_include() {
        let mut m = TaStateMatrix::new(2, 4, 6, 10).unwrap();
        m.set_state(0, 0, 3, 11).unwrap();
        let e = compile_model(&m);
        assert_eq!(e[0].pos_includes, vec![3]);
        assert!(e[0].neg_includes.is_empty());
        assert!(e[1..].iter().all(ClauseExpr::is_empty));
    }

    #[test]
    fn contradiction_detection_and_prune() {
        let mut m = TaStateMatrix::new(1, 4, 3, 10).unwrap();
        m.set_state(0, 2, 1, 20).unwrap();
        m.set_state(0, 2, 3 + 1, 20).unwrap();
        m.set_state(0, 1, 0, 20).unwrap();
        let mut c = CompiledModel::new(&m, PacketPlan::new(3, 2).unwrap()).unwrap();
        assert!(c.clauses[2].is_contradictory());
        assert!(!c.clauses[1].is_contradictory());
        assert_eq!(
            c.contradictory(),
            vec![ClauseRef {
                class: 0,
                clause: 2
            }]
        );
        let before: Vec<_> = (0..8u64)
            .map(|v| c.predict(&BitVector::from_u64(v, 3)).unwrap())
            .collect();
        let removed = c.prune_contradictory();
        assert_eq!(
            removed,
            vec![ClauseRef {
                class: 0,
                clause: 2
            }]
        );
        assert_eq!(c.clause_count(), 3);
        assert_eq!(
            c.slot_map()[2],
            (
                ClauseRef {
                    class: 0,
                    clause: 3
                },
                2
            )
        );
        let after: Vec<_> = (0..8u64)
            .map(|v| c.predict(&BitVector::from_u64(v, 3)).unwrap())
            .collect();
        assert_eq!(before, after);
        assert_eq!(
            c.contradictory().len(),
            1,
            "pruned clauses are still reported"
        );
    }

    #[test]
    fn sum_width_holds_range() {
        assert_eq!(min_sum_width(0), 1);
        assert_eq!(min_sum_width(1), 2);
        assert_eq!(min_sum_width(2), 3);
        assert_eq!(min_sum_width(100), 8);
        assert_eq!(min_sum_width(127), 8);
        assert_eq!(min_sum_width(128), 9);
    }

    #[test]
    fn file_round_trip_and_validation() {
        let mut m = TaStateMatrix::new(2, 2, 5, 4).unwrap();
        m.set_state(1, 1, 7, 8).unwrap();
        let c = CompiledModel::new(&m, PacketPlan::new(5, 4).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        c.write(&p).unwrap();
        assert_eq!(CompiledModel::read(&p).unwrap(), c);

        let mut bad = c.clone();
        bad.clauses[0].pos_includes = vec![9];
        assert!(bad.validate().is_err());
        let mut bad = c.clone();
        bad.packet_count = 3;
        assert!(bad.validate().is_err());
        let mut bad = c;
        bad.clauses[1].polarity = 1;
        assert!(bad.validate().is_err());
    }
}
