use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ClauseExpr, ClauseRef, CompiledModel, SharedNetlist};

/// LUTs needed for one AND gate of `fan_in` inputs built from `lut_inputs`-input LUTs.
pub fn lut_cost(fan_in: usize, lut_inputs: usize) -> usize {
    assert!(lut_inputs >= 2, "lut_inputs must be at least 2");
    if fan_in <= 1 {
        0
    } else {
        (fan_in - 1).div_ceil(lut_inputs - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostSummary {
    pub gates: usize,
    pub edges: usize,
    pub luts: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    pub lut_inputs: usize,
    pub shared: CostSummary,
    pub unshared: CostSummary,
    /// One flip-flop per clause per block.
    pub clause_registers: usize,
}

/// An estimate from the LUT-packing formula, not a synthesis result.
pub fn estimate_resources(netlist: &SharedNetlist, lut_inputs: usize) -> ResourceEstimate {
    let shared = CostSummary {
        gates: netlist.gate_count(),
        edges: netlist.edge_count(),
        luts: netlist
            .packets
            .iter()
            .flat_map(|p| &p.gates)
            .map(|g| lut_cost(g.inputs.len(), lut_inputs))
            .sum(),
    };
    let unshared = CostSummary {
        gates: netlist.unshared_gate_count(),
        edges: netlist.unshared_edge_count(),
        luts: netlist
            .packets
            .iter()
            .flat_map(|p| &p.partials)
            .map(|p| lut_cost(p.len(), lut_inputs))
            .sum(),
    };
    ResourceEstimate {
        lut_inputs,
        shared,
        unshared,
        clause_registers: netlist.clause_count * netlist.packets.len(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSparsity {
    pub class: usize,
    pub includes: usize,
    pub empty_clauses: usize,
    /// Clause length (include count) to number of clauses.
    pub clause_lengths: BTreeMap<usize, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharingSummary {
    pub nodes_before: usize,
    pub nodes_after: usize,
    pub node_savings: usize,
    pub edges_before: usize,
    pub edges_after: usize,
    pub factors: usize,
    pub estimate: ResourceEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub total_actions: usize,
    pub include_count: usize,
    pub include_density: f64,
    pub per_class: Vec<ClassSparsity>,
    pub contradictory: Vec<ClauseRef>,
    pub pruned: Vec<ClauseRef>,
    pub sharing: SharingSummary,
}

impl SparsityReport {
    pub fn new(model: &CompiledModel, netlist: &SharedNetlist) -> Self {
        let all: Vec<&ClauseExpr> = model.clauses.iter().chain(&model.pruned).collect();
        let total_actions = model.classes * model.clauses_per_class * 2 * model.features;
        let include_count: usize = all.iter().map(|c| c.include_count()).sum();
        let mut per_class: Vec<ClassSparsity> = (0..model.classes)
            .map(|class| ClassSparsity {
                class,
                includes: 0,
                empty_clauses: 0,
                clause_lengths: BTreeMap::new(),
            })
            .collect();
        for c in &all {
            let s = &mut per_class[c.class];
            s.includes += c.include_count();
            s.empty_clauses += usize::from(c.is_empty());
            *s.clause_lengths.entry(c.include_count()).or_insert(0) += 1;
        }
        let estimate = estimate_resources(netlist, netlist.config.lut_inputs);
        let (before, after) = (netlist.unshared_gate_count(), netlist.gate_count());
        Self {
            total_actions,
            include_count,
            include_density: if total_actions == 0 {
                0.0
            } else {
                include_count as f64 / total_actions as f64
            },
            per_class,
            contradictory: model.contradictory(),
            pruned: model.pruned.iter().map(ClauseExpr::id).collect(),
            sharing: SharingSummary {
                nodes_before: before,
                nodes_after: after,
                node_savings: before.saturating_sub(after),
                edges_before: netlist.unshared_edge_count(),
                edges_after: netlist.edge_count(),
                factors: netlist.factor_count(),
                estimate,
            },
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "automaton actions   {}", self.total_actions);
        let _ = writeln!(s, "includes            {}", self.include_count);
        let _ = writeln!(
            s,
            "include density     {:.4}%",
            100.0 * self.include_density
        );
        let _ = writeln!(s, "contradictory       {}", self.contradictory.len());
        let _ = writeln!(s, "pruned              {}", self.pruned.len());
        let _ = writeln!(s);
        let _ = writeln!(s, "class  includes  empty  longest");
        for c in &self.per_class {
            let longest = c.clause_lengths.keys().next_back().copied().unwrap_or(0);
            let _ = writeln!(
                s,
                "{:>5}  {:>8}  {:>5}  {:>7}",
                c.class, c.includes, c.empty_clauses, longest
            );
        }
        let sh = &self.sharing;
        let e = &sh.estimate;
        let _ = writeln!(s);
        let _ = writeln!(s, "sharing             before   after");
        let _ = writeln!(
            s,
            "  gates           {:>8} {:>7}",
            sh.nodes_before, sh.nodes_after
        );
        let _ = writeln!(
            s,
            "  edges           {:>8} {:>7}",
            sh.edges_before, sh.edges_after
        );
        let _ = writeln!(
            s,
            "  LUT{} estimate  {:>8} {:>7}",
            e.lut_inputs, e.unshared.luts, e.shared.luts
        );
        let _ = writeln!(s, "  factor gates             {:>7}", sh.factors);
        let _ = writeln!(s, "clause registers    {}", e.clause_registers);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::{partition, share_subexpressions, SharingConfig};
    use crate::data::PacketPlan;
    use crate::tm::TaStateMatrix;

    #[test]
    fn lut_cost_examples() {
        assert_eq!(lut_cost(2, 6), 1);
        assert_eq!(lut_cost(13, 6), 3);
        assert_eq!(lut_cost(6, 6), 1);
        assert_eq!(lut_cost(7, 6), 2);
        assert_eq!(lut_cost(1, 6), 0);
        assert_eq!(lut_cost(0, 6), 0);
        assert_eq!(lut_cost(3, 2), 2);
    }

    #[test]
    fn density_and_histograms() {
        let mut m = TaStateMatrix::new(2, 2, 4, 5).unwrap();
        m.set_state(0, 0, 0, 6).unwrap();
        m.set_state(0, 0, 5, 6).unwrap();
        m.set_state(1, 1, 2, 6).unwrap();
        let c = CompiledModel::new(&m, PacketPlan::new(4, 2).unwrap()).unwrap();
        let net = share_subexpressions(&partition(&c.clauses, &c.plan()), SharingConfig::default());
        let r = SparsityReport::new(&c, &net);
        assert_eq!(r.total_actions, 2 * 2 * 8);
        assert_eq!(r.include_count, 3);
        assert!((r.include_density - 3.0 / 32.0).abs() < 1e-12);
        assert_eq!(r.per_class[0].clause_lengths[&2], 1);
        assert_eq!(r.per_class[0].empty_clauses, 1);
        assert_eq!(r.per_class[1].includes, 1);
        assert!(r.to_text().contains("include density"));
    }
}
