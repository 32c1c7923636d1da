//! Vanilla Tsetlin Machine: automaton state storage, reference inference and
//! training.
//!
//! A model with `F` input features has `2F` literals per clause. Literal `i`
//! (for `i < F`) is the feature `x_i` itself and literal `F + i` is its
//! negation. Clause `j` of each class votes with polarity `+1` when `j` is even
//! and `-1` when `j` is odd.
//!
//! An automaton with `N` states per action holds a state in `[1, 2N]`; states
//! above `N` include their literal in the clause. A clause is the AND of its
//! included literals, and a clause with nothing included outputs 1 (the
//! hardware seeds every clause register with 1 before the partial clauses are
//! ANDed in, and the software model follows it).

mod feedback;
mod model_file;
pub mod rng;
mod train;

pub use feedback::{feedback_probability, type_i_feedback, type_ii_feedback};
pub use model_file::{read_model, write_model, ModelFile, Provenance, MODEL_FORMAT, MODEL_VERSION};
pub use train::{train, train_with_workers, Trainer};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{words_for, BitVector};

#[derive(Debug, Error)]
pub enum TmError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("dimension mismatch: expected {expected} {what}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("automaton state {state} outside [1, {max}]")]
    StateOutOfRange { state: u32, max: u32 },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    /// `m`; must be even so both polarities get the same number of clauses.
    pub clauses_per_class: usize,
    /// Vote margin `T` used by the feedback resource allocation.
    pub threshold: u32,
    /// Specificity `s`, strictly greater than 1.
    pub specificity: f64,
    /// `N`: each automaton has `2N` states.
    pub states_per_action: u32,
    pub epochs: usize,
    pub seed: u64,
}

/// Largest `N` whose `2N` states still fit the `u16` state storage.
pub const MAX_STATES_PER_ACTION: u32 = (u16::MAX / 2) as u32;

impl Hyperparams {
    pub fn validate(&self) -> Result<(), TmError> {
        let bad = |m: String| Err(TmError::InvalidHyperparams(m));
        if self.clauses_per_class == 0 || !self.clauses_per_class.is_multiple_of(2) {
            return bad(format!(
                "clauses_per_class must be a positive even number, got {}",
                self.clauses_per_class
            ));
        }
        if self.threshold == 0 {
            return bad("threshold must be at least 1".into());
        }
        if !self.specificity.is_finite() || self.specificity <= 1.0 {
            return bad(format!("specificity must be > 1, got {}", self.specificity));
        }
        if self.states_per_action == 0 || self.states_per_action > MAX_STATES_PER_ACTION {
            return bad(format!(
                "states_per_action must be in [1, {MAX_STATES_PER_ACTION}], got {}",
                self.states_per_action
            ));
        }
        Ok(())
    }
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            clauses_per_class: 200,
            threshold: 15,
            specificity: 10.0,
            states_per_action: 128,
            epochs: 10,
            seed: 0,
        }
    }
}

/// `true` (include) iff `state > n`.
///
/// # Panics
///
/// When `state` lies outside `[1, 2n]`.
#[inline]
pub fn include_action(state: u32, n: u32) -> bool {
    assert!(
        state >= 1 && state <= 2 * n,
        "automaton state {state} outside [1, {}]",
        2 * n
    );
    state > n
}

/// Vote weight of clause `j`: `+1` for even indices, `-1` for odd ones.
#[inline]
pub fn polarity(clause: usize) -> i32 {
    if clause.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Expands an `F`-bit feature vector into the `2F` literal vector
/// `[x_0 .. x_{F-1}, !x_0 .. !x_{F-1}]`.
pub fn literals(x: &BitVector) -> BitVector {
    let f = x.len();
    let mut lits = BitVector::zeros(2 * f);
    for i in 0..f {
        let v = x.get(i);
        lits.set(if v { i } else { f + i }, true);
    }
    lits
}

/// AND over the included literals; 1 for an empty include set.
pub fn clause_output(included: &[usize], literals: &BitVector) -> bool {
    included.iter().all(|&l| literals.get(l))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub class_sums: Vec<i32>,
    pub argmax_class: usize,
}

impl Prediction {
    pub fn from_sums(class_sums: Vec<i32>) -> Self {
        let argmax_class = argmax_lowest(&class_sums);
        Self {
            class_sums,
            argmax_class,
        }
    }
}

/// Index of the maximum; the lowest index wins ties.
pub fn argmax_lowest(values: &[i32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Automaton states for every (class, clause, literal), the trained model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaStateMatrix {
    classes: usize,
    clauses_per_class: usize,
    features: usize,
    states_per_action: u32,
    /// Row-major `[class][clause][literal]`.
    states: Vec<u16>,
}

impl TaStateMatrix {
    /// Every automaton starts at `N`, the exclude side of the boundary.
    pub fn new(
        classes: usize,
        clauses_per_class: usize,
        features: usize,
        states_per_action: u32,
    ) -> Result<Self, TmError> {
        if classes == 0 || clauses_per_class == 0 || features == 0 {
            return Err(TmError::InvalidHyperparams(
                "classes, clauses and features must all be non-zero".into(),
            ));
        }
        if states_per_action == 0 || states_per_action > MAX_STATES_PER_ACTION {
            return Err(TmError::InvalidHyperparams(format!(
                "states_per_action must be in [1, {MAX_STATES_PER_ACTION}]"
            )));
        }
        let len = classes * clauses_per_class * 2 * features;
        Ok(Self {
            classes,
            clauses_per_class,
            features,
            states_per_action,
            states: vec![states_per_action as u16; len],
        })
    }

    pub fn from_states(
        classes: usize,
        clauses_per_class: usize,
        features: usize,
        states_per_action: u32,
        states: Vec<u16>,
    ) -> Result<Self, TmError> {
        let mut m = Self::new(classes, clauses_per_class, features, states_per_action)?;
        if states.len() != m.states.len() {
            return Err(TmError::DimensionMismatch {
                what: "automaton states",
                expected: m.states.len(),
                found: states.len(),
            });
        }
        let max = 2 * states_per_action;
        if let Some(&bad) = states.iter().find(|&&s| s == 0 || s as u32 > max) {
            return Err(TmError::StateOutOfRange {
                state: bad as u32,
                max,
            });
        }
        m.states = states;
        Ok(m)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn clauses_per_class(&self) -> usize {
        self.clauses_per_class
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn literal_count(&self) -> usize {
        2 * self.features
    }

    pub fn states_per_action(&self) -> u32 {
        self.states_per_action
    }

    pub fn states(&self) -> &[u16] {
        &self.states
    }

    pub(crate) fn states_mut(&mut self) -> &mut [u16] {
        &mut self.states
    }

    #[inline]
    fn offset(&self, class: usize, clause: usize) -> usize {
        assert!(class < self.classes && clause < self.clauses_per_class);
        (class * self.clauses_per_class + clause) * self.literal_count()
    }

    pub fn clause_states(&self, class: usize, clause: usize) -> &[u16] {
        let o = self.offset(class, clause);
        &self.states[o..o + self.literal_count()]
    }

    pub fn state(&self, class: usize, clause: usize, literal: usize) -> u32 {
        assert!(literal < self.literal_count());
        self.states[self.offset(class, clause) + literal] as u32
    }

    pub fn set_state(
        &mut self,
        class: usize,
        clause: usize,
        literal: usize,
        state: u32,
    ) -> Result<(), TmError> {
        let max = 2 * self.states_per_action;
        if state == 0 || state > max {
            return Err(TmError::StateOutOfRange { state, max });
        }
        assert!(literal < self.literal_count());
        let o = self.offset(class, clause);
        self.states[o + literal] = state as u16;
        Ok(())
    }

    /// Literal indices whose automaton currently includes them.
    pub fn clause_includes(&self, class: usize, clause: usize) -> Vec<usize> {
        let n = self.states_per_action;
        self.clause_states(class, clause)
            .iter()
            .enumerate()
            .filter(|(_, &s)| include_action(s as u32, n))
            .map(|(l, _)| l)
            .collect()
    }

    pub fn include_count(&self) -> usize {
        let n = self.states_per_action as u16;
        self.states.iter().filter(|&&s| s > n).count()
    }
}

/// Include masks derived from a [`TaStateMatrix`], for fast batch inference.
///
/// This is the reference inference path: it reads the automaton actions
/// directly and shares nothing with the compiled clause representation.
#[derive(Clone, Debug)]
pub struct ReferenceModel {
    classes: usize,
    clauses_per_class: usize,
    features: usize,
    words: usize,
    masks: Vec<u64>,
}

impl ReferenceModel {
    pub fn new(model: &TaStateMatrix) -> Self {
        let lits = model.literal_count();
        let words = words_for(lits);
        let n = model.states_per_action();
        let clauses = model.classes() * model.clauses_per_class();
        let mut masks = vec![0u64; clauses * words];
        for c in 0..clauses {
            let states = &model.states()[c * lits..(c + 1) * lits];
            for (l, &s) in states.iter().enumerate() {
                if include_action(s as u32, n) {
                    masks[c * words + (l >> 6)] |= 1 << (l & 63);
                }
            }
        }
        Self {
            classes: model.classes(),
            clauses_per_class: model.clauses_per_class(),
            features: model.features(),
            words,
            masks,
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> usize {
        self.features
    }

    fn check(&self, x: &BitVector) -> Result<(), TmError> {
        if x.len() != self.features {
            return Err(TmError::DimensionMismatch {
                what: "features",
                expected: self.features,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Clause outputs of every clause, flattened `[class][clause]`.
    pub fn clause_outputs(&self, x: &BitVector) -> Result<Vec<bool>, TmError> {
        self.check(x)?;
        let lits = literals(x);
        let lw = lits.words();
        Ok(self
            .masks
            .chunks_exact(self.words)
            .map(|mask| mask.iter().zip(lw).all(|(m, l)| m & !l == 0))
            .collect())
    }

    pub fn predict(&self, x: &BitVector) -> Result<Prediction, TmError> {
        let outputs = self.clause_outputs(x)?;
        let sums = outputs
            .chunks_exact(self.clauses_per_class)
            .map(|class| {
                class
                    .iter()
                    .enumerate()
                    .map(|(j, &o)| if o { polarity(j) } else { 0 })
                    .sum()
            })
            .collect();
        Ok(Prediction::from_sums(sums))
    }

    pub fn accuracy(&self, samples: &[BitVector], labels: &[usize]) -> Result<f64, TmError> {
        if samples.is_empty() {
            return Ok(0.0);
        }
        let mut correct = 0usize;
        for (x, &y) in samples.iter().zip(labels) {
            if self.predict(x)?.argmax_class == y {
                correct += 1;
            }
        }
        Ok(correct as f64 / samples.len() as f64)
    }
}

/// Class sums and argmax for a single input, straight from automaton states.
pub fn class_sums(model: &TaStateMatrix, x: &BitVector) -> Result<Prediction, TmError> {
    if x.len() != model.features() {
        return Err(TmError::DimensionMismatch {
            what: "features",
            expected: model.features(),
            found: x.len(),
        });
    }
    let lits = literals(x);
    let sums = (0..model.classes())
        .map(|c| {
            (0..model.clauses_per_class())
                .map(|j| {
                    if clause_output(&model.clause_includes(c, j), &lits) {
                        polarity(j)
                    } else {
                        0
                    }
                })
                .sum()
        })
        .collect();
    Ok(Prediction::from_sums(sums))
}
