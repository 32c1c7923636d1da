//! Vanilla Tsetlin Machine feedback rules.

use super::rng::KeyedStream;
use crate::bits::{words_for, BitVector};

/// Stream counter reserved for the per-clause participation draw; literal
/// draws start right after it.
pub(crate) const GATE_COUNTER: u64 = 0;
pub(crate) const LITERAL_COUNTER_BASE: u64 = 1;

/// Probability that a clause of a class takes part in feedback for one sample.
///
/// The class sum is clamped to `[-T, T]` first; target classes get
/// `(T - sum) / 2T`, non-target classes `(T + sum) / 2T`.
pub fn feedback_probability(class_sum: i32, threshold: u32, is_target: bool) -> f64 {
    assert!(threshold >= 1, "threshold must be at least 1");
    let t = threshold as i64;
    let clamped = (class_sum as i64).clamp(-t, t);
    let num = if is_target { t - clamped } else { t + clamped };
    num as f64 / (2 * t) as f64
}

/// `floor(2^32 / s)`: a literal draw below this value is the `1/s` event.
pub(crate) fn rare_threshold(specificity: f64) -> u64 {
    ((1u64 << 32) as f64 / specificity).floor() as u64
}

#[inline]
fn set_bit(mask: &mut [u64], i: usize, value: bool) {
    let m = 1u64 << (i & 63);
    if value {
        mask[i >> 6] |= m;
    } else {
        mask[i >> 6] &= !m;
    }
}

/// Type I feedback on one clause, keeping `mask` (the include bitmap of the
/// clause) in sync with `states`.
pub(crate) fn apply_type_i(
    states: &mut [u16],
    mask: &mut [u64],
    clause_output: bool,
    literals: &[u64],
    n: u16,
    rare: u64,
    stream: &KeyedStream,
) {
    let max = 2 * n;
    for (k, st) in states.iter_mut().enumerate() {
        let is_rare = (stream.u32_pair(LITERAL_COUNTER_BASE, k) as u64) < rare;
        let lit = (literals[k >> 6] >> (k & 63)) & 1 == 1;
        if clause_output && lit {
            if !is_rare && *st < max {
                *st += 1;
                if *st == n + 1 {
                    set_bit(mask, k, true);
                }
            }
        } else if is_rare && *st > 1 {
            *st -= 1;
            if *st == n {
                set_bit(mask, k, false);
            }
        }
    }
}

/// Type II feedback on one clause: when the clause fires, every excluded
/// literal that is 0 moves one step towards include.
pub(crate) fn apply_type_ii(
    states: &mut [u16],
    mask: &mut [u64],
    clause_output: bool,
    literals: &[u64],
    n: u16,
) {
    if !clause_output {
        return;
    }
    let len = states.len();
    for (w, (&lit, m)) in literals.iter().zip(mask.iter_mut()).enumerate() {
        let mut candidates = !lit & !*m;
        if w == len >> 6 {
            candidates &= (1u64 << (len & 63)).wrapping_sub(1);
        }
        while candidates != 0 {
            let b = candidates.trailing_zeros() as usize;
            candidates &= candidates - 1;
            let k = w * 64 + b;
            // excluded means st <= n, so st + 1 <= n + 1 <= 2n
            states[k] += 1;
            if states[k] == n + 1 {
                *m |= 1 << b;
            }
        }
    }
}

pub(crate) fn include_mask(states: &[u16], n: u16) -> Vec<u64> {
    let mut mask = vec![0u64; words_for(states.len())];
    for (k, &s) in states.iter().enumerate() {
        if s > n {
            set_bit(&mut mask, k, true);
        }
    }
    mask
}

/// Type I feedback on one clause's automata.
///
/// When the clause outputs 1, literals that are 1 move towards include with
/// probability `(s-1)/s` and literals that are 0 move towards exclude with
/// probability `1/s`. When it outputs 0, every literal moves towards exclude
/// with probability `1/s`. Literal `k` draws from `stream` at a fixed counter,
/// so results do not depend on update order. States stay in `[1, 2N]`.
pub fn type_i_feedback(
    states: &mut [u16],
    clause_output: bool,
    literals: &BitVector,
    specificity: f64,
    states_per_action: u32,
    stream: &KeyedStream,
) {
    assert_eq!(states.len(), literals.len(), "one automaton per literal");
    let n = states_per_action as u16;
    let mut mask = include_mask(states, n);
    apply_type_i(
        states,
        &mut mask,
        clause_output,
        literals.words(),
        n,
        rare_threshold(specificity),
        stream,
    );
}

/// Type II feedback on one clause's automata: when the clause outputs 1,
/// each literal that is 0 and currently excluded gains one state. Nothing
/// else changes.
pub fn type_ii_feedback(
    states: &mut [u16],
    clause_output: bool,
    literals: &BitVector,
    states_per_action: u32,
) {
    assert_eq!(states.len(), literals.len(), "one automaton per literal");
    let n = states_per_action as u16;
    let mut mask = include_mask(states, n);
    apply_type_ii(states, &mut mask, clause_output, literals.words(), n);
}
