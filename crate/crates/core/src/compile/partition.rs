use std::ops::Range;

use super::{ClauseExpr, Literal};
use crate::bits::BitVector;
use crate::data::PacketPlan;

/// The partial clauses evaluated by the block that sees packet `packet`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HcbPlan {
    pub packet: usize,
    pub features: Range<usize>,
    /// Indexed by clause slot; literals use global feature indices.
    pub partials: Vec<Vec<Literal>>,
}

impl HcbPlan {
    pub fn partial_output(&self, slot: usize, x: &BitVector) -> bool {
        self.partials[slot].iter().all(|l| l.eval(x))
    }

    pub fn include_count(&self) -> usize {
        self.partials.iter().map(Vec::len).sum()
    }
}

pub fn partition(exprs: &[ClauseExpr], plan: &PacketPlan) -> Vec<HcbPlan> {
    let mut hcbs: Vec<HcbPlan> = (0..plan.packet_count())
        .map(|p| HcbPlan {
            packet: p,
            features: plan.feature_range(p),
            partials: vec![Vec::new(); exprs.len()],
        })
        .collect();
    for (slot, e) in exprs.iter().enumerate() {
        for lit in e.literals() {
            let (p, _) = plan.locate(lit.feature as usize);
            hcbs[p].partials[slot].push(lit);
        }
    }
    hcbs
}
