use rayon::prelude::*;

use super::feedback::{
    apply_type_i, apply_type_ii, feedback_probability, include_mask, rare_threshold, GATE_COUNTER,
};
use super::rng::{permutation, KeyedStream};
use super::{literals, polarity, Hyperparams, TaStateMatrix, TmError};
use crate::bits::{words_for, BitVector};
use crate::data::BooleanizedDataset;

const TAG_SHUFFLE: u64 = 0x5348_5546;
const TAG_NEGATIVE: u64 = 0x4E45_4741;

/// Incremental trainer; one call to [`Trainer::fit_epoch`] is one pass over
/// the data.
///
/// Each sample updates the clauses of its target class and of one uniformly
/// drawn non-target class. Clauses of the target class with positive polarity
/// receive Type I feedback and those with negative polarity Type II; the
/// non-target class gets the mirrored routing. A clause takes part with the
/// probability given by [`feedback_probability`] for its class sum.
pub struct Trainer {
    model: TaStateMatrix,
    hp: Hyperparams,
    masks: Vec<u64>,
    words: usize,
    epochs_done: usize,
    pool: Option<rayon::ThreadPool>,
}

#[inline]
fn fires(mask: &[u64], lits: &[u64]) -> bool {
    mask.iter().zip(lits).all(|(m, l)| m & !l == 0)
}

struct ClassUpdate<'a> {
    class: usize,
    is_target: bool,
    probability: f64,
    states: &'a mut [u16],
    masks: &'a mut [u64],
}

impl Trainer {
    pub fn new(classes: usize, features: usize, hp: Hyperparams) -> Result<Self, TmError> {
        hp.validate()?;
        let model = TaStateMatrix::new(
            classes,
            hp.clauses_per_class,
            features,
            hp.states_per_action,
        )?;
        Self::from_model(model, hp)
    }

    /// Continues training from an existing state matrix.
    pub fn from_model(model: TaStateMatrix, hp: Hyperparams) -> Result<Self, TmError> {
        hp.validate()?;
        if model.clauses_per_class() != hp.clauses_per_class
            || model.states_per_action() != hp.states_per_action
        {
            return Err(TmError::InvalidHyperparams(
                "model dimensions disagree with hyperparameters".into(),
            ));
        }
        let lits = model.literal_count();
        let words = words_for(lits);
        let n = model.states_per_action() as u16;
        let masks = model
            .states()
            .chunks_exact(lits)
            .flat_map(|clause| include_mask(clause, n))
            .collect();
        Ok(Self {
            model,
            hp,
            masks,
            words,
            epochs_done: 0,
            pool: None,
        })
    }

    /// Spreads clause updates over `workers` threads. Results are identical
    /// for every worker count.
    pub fn with_workers(mut self, workers: usize) -> Result<Self, TmError> {
        self.pool = if workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| TmError::InvalidHyperparams(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(self)
    }

    pub fn model(&self) -> &TaStateMatrix {
        &self.model
    }

    pub fn into_model(self) -> TaStateMatrix {
        self.model
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    fn class_sum(&self, class: usize, lits: &[u64]) -> i32 {
        let m = self.hp.clauses_per_class;
        let base = class * m * self.words;
        (0..m)
            .map(|j| {
                let mask = &self.masks[base + j * self.words..base + (j + 1) * self.words];
                if fires(mask, lits) {
                    polarity(j)
                } else {
                    0
                }
            })
            .sum()
    }

    pub fn fit_epoch(&mut self, samples: &[BitVector], labels: &[usize]) -> Result<(), TmError> {
        if samples.is_empty() {
            return Err(TmError::EmptyDataset);
        }
        if samples.len() != labels.len() {
            return Err(TmError::DimensionMismatch {
                what: "labels",
                expected: samples.len(),
                found: labels.len(),
            });
        }
        let classes = self.model.classes();
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(TmError::LabelOutOfRange { label, classes });
        }
        if let Some(x) = samples.iter().find(|x| x.len() != self.model.features()) {
            return Err(TmError::DimensionMismatch {
                what: "features",
                expected: self.model.features(),
                found: x.len(),
            });
        }
        let epoch = self.epochs_done as u64;
        let seed = self.hp.seed;
        let order = permutation(samples.len(), KeyedStream::new(seed, &[TAG_SHUFFLE, epoch]));
        for &i in &order {
            self.update(epoch, i as u64, &samples[i], labels[i]);
        }
        self.epochs_done += 1;
        Ok(())
    }

    fn update(&mut self, epoch: u64, sample: u64, x: &BitVector, target: usize) {
        let classes = self.model.classes();
        let seed = self.hp.seed;
        let t = self.hp.threshold;
        let lits = literals(x);
        let lw = lits.words();

        let negative = (classes > 1).then(|| {
            let r = KeyedStream::new(seed, &[TAG_NEGATIVE, epoch, sample])
                .below(0, classes as u64 - 1) as usize;
            if r >= target {
                r + 1
            } else {
                r
            }
        });

        let p_target = feedback_probability(self.class_sum(target, lw), t, true);
        let p_negative = negative.map(|c| feedback_probability(self.class_sum(c, lw), t, false));

        let m = self.hp.clauses_per_class;
        let lit_count = self.model.literal_count();
        let words = self.words;
        let state_span = m * lit_count;
        let mask_span = m * words;

        let mut jobs = Vec::with_capacity(2);
        {
            let states = self.model.states_mut();
            let masks = &mut self.masks;
            match negative {
                None => jobs.push(ClassUpdate {
                    class: target,
                    is_target: true,
                    probability: p_target,
                    states: &mut states[target * state_span..(target + 1) * state_span],
                    masks: &mut masks[target * mask_span..(target + 1) * mask_span],
                }),
                Some(neg) => {
                    let (lo, hi) = (target.min(neg), target.max(neg));
                    let (s_lo, s_hi) = states.split_at_mut(hi * state_span);
                    let (m_lo, m_hi) = masks.split_at_mut(hi * mask_span);
                    let lo_job = (
                        &mut s_lo[lo * state_span..(lo + 1) * state_span],
                        &mut m_lo[lo * mask_span..(lo + 1) * mask_span],
                    );
                    let hi_job = (&mut s_hi[..state_span], &mut m_hi[..mask_span]);
                    let p_neg = p_negative.unwrap_or(0.0);
                    for (class, (st, mk)) in [(lo, lo_job), (hi, hi_job)] {
                        let is_target = class == target;
                        jobs.push(ClassUpdate {
                            class,
                            is_target,
                            probability: if is_target { p_target } else { p_neg },
                            states: st,
                            masks: mk,
                        });
                    }
                }
            }
        }

        let n = self.hp.states_per_action as u16;
        let rare = rare_threshold(self.hp.specificity);
        let clause_job =
            |class: usize, is_target: bool, p: f64, j: usize, st: &mut [u16], mk: &mut [u64]| {
                let stream = KeyedStream::new(seed, &[epoch, sample, class as u64, j as u64]);
                if stream.f64_at(GATE_COUNTER) >= p {
                    return;
                }
                let out = fires(mk, lw);
                // target: + clauses get Type I, - clauses Type II; non-target mirrored
                let type_i = j.is_multiple_of(2) == is_target;
                if type_i {
                    apply_type_i(st, mk, out, lw, n, rare, &stream);
                } else {
                    apply_type_ii(st, mk, out, lw, n);
                }
            };

        for job in jobs {
            if job.probability <= 0.0 {
                continue;
            }
            let ClassUpdate {
                class,
                is_target,
                probability,
                states,
                masks,
            } = job;
            match &self.pool {
                Some(pool) => pool.install(|| {
                    states
                        .par_chunks_mut(lit_count)
                        .zip(masks.par_chunks_mut(words))
                        .enumerate()
                        .for_each(|(j, (st, mk))| {
                            clause_job(class, is_target, probability, j, st, mk)
                        });
                }),
                None => states
                    .chunks_mut(lit_count)
                    .zip(masks.chunks_mut(words))
                    .enumerate()
                    .for_each(|(j, (st, mk))| clause_job(class, is_target, probability, j, st, mk)),
            }
        }
    }
}

/// Trains a fresh model for `hp.epochs` passes over `dataset`.
pub fn train(dataset: &BooleanizedDataset, hp: &Hyperparams) -> Result<TaStateMatrix, TmError> {
    train_with_workers(dataset, hp, 1)
}

pub fn train_with_workers(
    dataset: &BooleanizedDataset,
    hp: &Hyperparams,
    workers: usize,
) -> Result<TaStateMatrix, TmError> {
    if dataset.is_empty() {
        return Err(TmError::EmptyDataset);
    }
    let mut trainer = Trainer::new(dataset.class_count(), dataset.feature_count(), hp.clone())?
        .with_workers(workers)?;
    for _ in 0..hp.epochs {
        trainer.fit_epoch(dataset.features(), dataset.labels())?;
    }
    Ok(trainer.into_model())
}
