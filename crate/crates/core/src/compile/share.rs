//! Logic sharing between partial clauses of one packet.
//!
//! Step 1 hash-conses identical partial include sets into one gate. Step 2
//! greedily pulls out literal subsets common to several gates as their own
//! gate. A subset is accepted only if it is at least `factor_min_size` wide
//! and lowers the LUT estimate at `lut_inputs`.
//!
//! Gates never cross packets: a block only sees its own packet's bits.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::lut_cost;
use super::{HcbPlan, Literal};
use crate::bits::BitVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct SharingConfig {
    /// Smallest common subset pulled out as its own gate; 0 disables factoring.
    pub factor_min_size: usize,
    pub lut_inputs: usize,
}

impl Default for SharingConfig {
    fn default() -> Self {
        Self {
            factor_min_size: 4,
            lut_inputs: 6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Input {
    Literal(Literal),
    /// Output of an earlier gate in the same packet.
    Gate(usize),
}

/// An AND gate. Literal leaves are inputs, not gates; inverters are free.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gate {
    pub inputs: Vec<Input>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PacketNetlist {
    pub packet: usize,
    /// Topologically ordered: every `Input::Gate(i)` points backwards.
    pub gates: Vec<Gate>,
    /// Uses of each gate, as another gate's input or as a clause root.
    pub refcount: Vec<u32>,
    /// Root gate per clause slot; `None` for an empty partial (constant 1).
    pub roots: Vec<Option<usize>>,
    /// Number of gates that are common factors rather than partial roots.
    pub factor_count: usize,
    /// The flat partials this netlist was built from.
    pub partials: Vec<Vec<Literal>>,
}

impl PacketNetlist {
    /// Gate outputs; `bit(f)` reads global feature `f`.
    pub fn eval_gates(&self, bit: impl Fn(usize) -> bool, out: &mut Vec<bool>) {
        out.clear();
        for g in &self.gates {
            let v = g.inputs.iter().all(|i| match *i {
                Input::Literal(l) => bit(l.feature as usize) != l.negated,
                Input::Gate(j) => out[j],
            });
            out.push(v);
        }
    }

    /// Partial clause outputs per slot for a full feature vector.
    pub fn evaluate(&self, x: &BitVector) -> Vec<bool> {
        let mut vals = Vec::new();
        self.eval_gates(|f| x.get(f), &mut vals);
        self.roots
            .iter()
            .map(|r| r.is_none_or(|g| vals[g]))
            .collect()
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    pub fn edge_count(&self) -> usize {
        self.gates.iter().map(|g| g.inputs.len()).sum()
    }

    pub fn unshared_gate_count(&self) -> usize {
        self.partials.iter().filter(|p| !p.is_empty()).count()
    }

    pub fn unshared_edge_count(&self) -> usize {
        self.partials.iter().map(Vec::len).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SharedNetlist {
    pub config: SharingConfig,
    pub clause_count: usize,
    pub packets: Vec<PacketNetlist>,
}

impl SharedNetlist {
    pub fn gate_count(&self) -> usize {
        self.packets.iter().map(PacketNetlist::gate_count).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.packets.iter().map(PacketNetlist::edge_count).sum()
    }

    pub fn unshared_gate_count(&self) -> usize {
        self.packets
            .iter()
            .map(PacketNetlist::unshared_gate_count)
            .sum()
    }

    pub fn unshared_edge_count(&self) -> usize {
        self.packets
            .iter()
            .map(PacketNetlist::unshared_edge_count)
            .sum()
    }

    pub fn factor_count(&self) -> usize {
        self.packets.iter().map(|p| p.factor_count).sum()
    }

    /// Full clause outputs: AND over every packet's partial.
    pub fn clause_outputs(&self, x: &BitVector) -> Vec<bool> {
        let mut out = vec![true; self.clause_count];
        for p in &self.packets {
            for (o, v) in out.iter_mut().zip(p.evaluate(x)) {
                *o &= v;
            }
        }
        out
    }
}

pub fn share_subexpressions(hcbs: &[HcbPlan], config: SharingConfig) -> SharedNetlist {
    let clause_count = hcbs.first().map_or(0, |h| h.partials.len());
    let packets = hcbs.par_iter().map(|h| share_packet(h, config)).collect();
    SharedNetlist {
        config,
        clause_count,
        packets,
    }
}

struct Item {
    rem: Vec<Literal>,
    factors: Vec<usize>,
}

impl Item {
    fn fan_in(&self) -> usize {
        self.rem.len() + self.factors.len()
    }
}

fn intersect(a: &[Literal], b: &[Literal]) -> Vec<Literal> {
    let (mut i, mut j, mut out) = (0, 0, Vec::new());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn contains_all(set: &[Literal], sub: &[Literal]) -> bool {
    let mut it = set.iter();
    sub.iter().all(|s| it.by_ref().any(|x| x == s))
}

fn share_packet(hcb: &HcbPlan, config: SharingConfig) -> PacketNetlist {
    let mut unique: BTreeMap<&[Literal], usize> = BTreeMap::new();
    for p in hcb.partials.iter().filter(|p| !p.is_empty()) {
        unique.entry(p.as_slice()).or_insert(0);
    }
    for (i, v) in unique.values_mut().enumerate() {
        *v = i;
    }
    let mut items: Vec<Item> = unique
        .keys()
        .map(|k| Item {
            rem: k.to_vec(),
            factors: Vec::new(),
        })
        .collect();

    let mut factors: Vec<Vec<Literal>> = Vec::new();
    if config.factor_min_size > 0 && config.lut_inputs >= 2 {
        factor(&mut items, &mut factors, config);
    }

    let mut gates: Vec<Gate> = factors
        .iter()
        .map(|f| Gate {
            inputs: f.iter().map(|&l| Input::Literal(l)).collect(),
        })
        .collect();
    let item_gate: Vec<usize> = items
        .iter()
        .map(|it| {
            if it.rem.is_empty() && it.factors.len() == 1 {
                it.factors[0]
            } else {
                gates.push(Gate {
                    inputs: it
                        .factors
                        .iter()
                        .map(|&f| Input::Gate(f))
                        .chain(it.rem.iter().map(|&l| Input::Literal(l)))
                        .collect(),
                });
                gates.len() - 1
            }
        })
        .collect();
    let roots: Vec<Option<usize>> = hcb
        .partials
        .iter()
        .map(|p| (!p.is_empty()).then(|| item_gate[unique[p.as_slice()]]))
        .collect();

    let mut refcount = vec![0u32; gates.len()];
    for g in &gates {
        for i in &g.inputs {
            if let Input::Gate(j) = *i {
                refcount[j] += 1;
            }
        }
    }
    for r in roots.iter().flatten() {
        refcount[*r] += 1;
    }
    PacketNetlist {
        packet: hcb.packet,
        gates,
        refcount,
        roots,
        factor_count: factors.len(),
        partials: hcb.partials.clone(),
    }
}

fn factor(items: &mut [Item], factors: &mut Vec<Vec<Literal>>, config: SharingConfig) {
    let min = config.factor_min_size;
    let l = config.lut_inputs;
    let n = items.len();
    let mut eligible: Vec<bool> = items.iter().map(|it| it.rem.len() >= min).collect();

    // Every intersection of two eligible items that is wide enough, with the
    // number of pairs producing it, plus the eligible items containing it.
    // Only the items a new factor touches change, so both are kept up to date
    // instead of being rebuilt each round.
    let mut pairs: BTreeMap<Vec<Literal>, usize> = BTreeMap::new();
    let mut groups: BTreeMap<Vec<Literal>, Vec<usize>> = BTreeMap::new();
    let add_pairs = |items: &[Item],
                     eligible: &[bool],
                     changed: &[usize],
                     pairs: &mut BTreeMap<Vec<Literal>, usize>,
                     sign: bool| {
        for (a, &i) in changed.iter().enumerate() {
            if !eligible[i] {
                continue;
            }
            for j in 0..items.len() {
                // Pairs inside `changed` are visited once, from the earlier entry.
                if j == i || !eligible[j] || changed[..a].contains(&j) {
                    continue;
                }
                let c = intersect(&items[i].rem, &items[j].rem);
                if c.len() < min {
                    continue;
                }
                if sign {
                    *pairs.entry(c).or_insert(0) += 1;
                } else if let Some(k) = pairs.get_mut(&c) {
                    *k -= 1;
                    if *k == 0 {
                        pairs.remove(&c);
                    }
                }
            }
        }
    };
    for i in 0..n {
        if !eligible[i] {
            continue;
        }
        for j in i + 1..n {
            if eligible[j] {
                let c = intersect(&items[i].rem, &items[j].rem);
                if c.len() >= min {
                    *pairs.entry(c).or_insert(0) += 1;
                }
            }
        }
    }

    loop {
        groups.retain(|c, _| pairs.contains_key(c));
        for c in pairs.keys() {
            if !groups.contains_key(c) {
                let g = (0..n)
                    .filter(|&i| eligible[i] && contains_all(&items[i].rem, c))
                    .collect();
                groups.insert(c.clone(), g);
            }
        }
        // Highest savings first; ties go to the smallest literal set.
        let mut pick: Option<(usize, &Vec<Literal>)> = None;
        for (c, group) in &groups {
            let savings = (group.len() - 1) * (c.len() - 1);
            if pick.is_some_and(|(best, _)| savings <= best) {
                continue;
            }
            let before: usize = group.iter().map(|&i| lut_cost(items[i].fan_in(), l)).sum();
            let after: usize = lut_cost(c.len(), l)
                + group
                    .iter()
                    .map(|&i| lut_cost(items[i].fan_in() - c.len() + 1, l))
                    .sum::<usize>();
            if group.len() >= 2 && after < before {
                pick = Some((savings, c));
            }
        }
        let Some((_, c)) = pick else { return };
        let c = c.clone();
        let group = groups[&c].clone();

        add_pairs(items, &eligible, &group, &mut pairs, false);
        let id = factors.len();
        for &i in &group {
            let it = &mut items[i];
            it.rem.retain(|x| c.binary_search(x).is_err());
            it.factors.push(id);
            eligible[i] = it.rem.len() >= min;
        }
        factors.push(c);
        add_pairs(items, &eligible, &group, &mut pairs, true);
        // Remainders only shrink, so changed items can leave groups but never join.
        for (c, g) in groups.iter_mut() {
            g.retain(|&i| !group.contains(&i) || (eligible[i] && contains_all(&items[i].rem, c)));
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use proptest::prelude::*;

    use super::*;
    use crate::compile::{lut_cost, partition, ClauseExpr};
    use crate::data::PacketPlan;

    /// Straightforward version that rebuilds every candidate each round.
    fn factor_rebuilding(
        items: &mut [Item],
        factors: &mut Vec<Vec<Literal>>,
        config: SharingConfig,
    ) {
        let min = config.factor_min_size;
        let l = config.lut_inputs;
        loop {
            let eligible: Vec<usize> = (0..items.len())
                .filter(|&i| items[i].rem.len() >= min)
                .collect();
            let mut candidates: BTreeSet<Vec<Literal>> = BTreeSet::new();
            for (a, &i) in eligible.iter().enumerate() {
                for &j in &eligible[a + 1..] {
                    let c = intersect(&items[i].rem, &items[j].rem);
                    if c.len() >= min {
                        candidates.insert(c);
                    }
                }
            }
            if candidates.is_empty() {
                return;
            }
            let mut scored: Vec<(usize, Vec<Literal>, Vec<usize>)> = candidates
                .into_iter()
                .map(|c| {
                    let group: Vec<usize> = eligible
                        .iter()
                        .copied()
                        .filter(|&i| contains_all(&items[i].rem, &c))
                        .collect();
                    ((group.len() - 1) * (c.len() - 1), c, group)
                })
                .collect();
            // Highest savings first; ties go to the smallest literal set.
            scored.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
            let pick = scored.into_iter().find(|(_, c, group)| {
                let before: usize = group.iter().map(|&i| lut_cost(items[i].fan_in(), l)).sum();
                let after: usize = lut_cost(c.len(), l)
                    + group
                        .iter()
                        .map(|&i| lut_cost(items[i].fan_in() - c.len() + 1, l))
                        .sum::<usize>();
                group.len() >= 2 && after < before
            });
            let Some((_, c, group)) = pick else { return };
            let id = factors.len();
            for &i in &group {
                let it = &mut items[i];
                it.rem.retain(|x| c.binary_search(x).is_err());
                it.factors.push(id);
            }
            factors.push(c);
        }
    }

    fn hcb(partials: Vec<Vec<Literal>>) -> HcbPlan {
        HcbPlan {
            packet: 0,
            features: 0..64,
            partials,
        }
    }

    fn lits(pos: &[usize], neg: &[usize]) -> Vec<Literal> {
        let mut v: Vec<Literal> = pos
            .iter()
            .map(|&f| Literal::pos(f))
            .chain(neg.iter().map(|&f| Literal::neg(f)))
            .collect();
        v.sort();
        v
    }

    #[test]
    fn identical_partials_share_one_gate() {
        let s = lits(&[1, 7], &[3]);
        let n = share_packet(
            &hcb(vec![s.clone(), s, lits(&[2], &[])]),
            SharingConfig::default(),
        );
        assert_eq!(n.gate_count(), 2);
        assert_eq!(n.roots[0], n.roots[1]);
        assert_eq!(n.refcount[n.roots[0].unwrap()], 2);
        assert_eq!(n.unshared_gate_count(), 3);
    }

    #[test]
    fn disjoint_partials_are_not_shared() {
        let n = share_packet(
            &hcb(vec![
                lits(&[1, 2], &[]),
                lits(&[3], &[4]),
                vec![],
                lits(&[5], &[]),
            ]),
            SharingConfig::default(),
        );
        assert_eq!(n.gate_count(), n.unshared_gate_count());
        assert_eq!(n.gate_count(), 3);
        assert_eq!(n.roots[2], None);
    }

    #[test]
    fn common_subset_is_factored() {
        let common = [10, 11, 12, 13, 14, 15];
        let a = lits(&[&common[..], &[1, 2, 3, 4, 5]].concat(), &[]);
        let b = lits(&[&common[..], &[20, 21, 22, 23, 24]].concat(), &[]);
        let n = share_packet(&hcb(vec![a.clone(), b.clone()]), SharingConfig::default());
        assert_eq!(n.factor_count, 1);
        assert_eq!(n.gates[0].inputs.len(), 6);
        assert_eq!(n.refcount[0], 2);
        let shared: usize = n.gates.iter().map(|g| lut_cost(g.inputs.len(), 6)).sum();
        assert!(shared < 2 * lut_cost(11, 6));
        for v in 0..200u64 {
            let mut x = BitVector::zeros(64);
            for f in 0..26 {
                x.set(
                    f,
                    (v.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> (f + 7)) & 1 == 1
                        || (10..16).contains(&f) && v % 3 == 0,
                );
            }
            let out = n.evaluate(&x);
            assert_eq!(out[0], a.iter().all(|l| l.eval(&x)));
            assert_eq!(out[1], b.iter().all(|l| l.eval(&x)));
        }
    }

    #[test]
    fn root_equal_to_factor_aliases_it() {
        let c = lits(&[1, 2, 3, 4, 5, 6], &[]);
        let a = lits(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11], &[]);
        let b = lits(&[1, 2, 3, 4, 5, 6, 12, 13, 14, 15, 16], &[]);
        let n = share_packet(&hcb(vec![c.clone(), a, b]), SharingConfig::default());
        assert_eq!(n.factor_count, 1);
        assert_eq!(n.roots[0], Some(0));
        assert_eq!(n.refcount[0], 3);
        assert_eq!(n.gate_count(), 3);
    }

    #[test]
    fn factoring_disabled() {
        let a = lits(&[1, 2, 3, 4, 5, 6, 7], &[]);
        let b = lits(&[1, 2, 3, 4, 5, 6, 8], &[]);
        let cfg = SharingConfig {
            factor_min_size: 0,
            lut_inputs: 6,
        };
        let n = share_packet(&hcb(vec![a, b]), cfg);
        assert_eq!(n.factor_count, 0);
        assert_eq!(n.gate_count(), 2);
    }

    #[test]
    fn netlist_over_packets_matches_clauses() {
        let exprs = vec![
            ClauseExpr {
                class: 0,
                clause: 0,
                polarity: 1,
                pos_includes: vec![0, 5],
                neg_includes: vec![9],
            },
            ClauseExpr {
                class: 0,
                clause: 1,
                polarity: -1,
                pos_includes: vec![0],
                neg_includes: vec![5],
            },
        ];
        let plan = PacketPlan::new(10, 4).unwrap();
        let net = share_subexpressions(&partition(&exprs, &plan), SharingConfig::default());
        assert_eq!(net.packets.len(), 3);
        for v in 0..1024u64 {
            let x = BitVector::from_u64(v, 10);
            let want: Vec<bool> = exprs.iter().map(|e| e.evaluate(&x)).collect();
            assert_eq!(net.clause_outputs(&x), want);
        }
    }

    type Factored = (Vec<Vec<Literal>>, Vec<(Vec<Literal>, Vec<usize>)>);

    fn run(
        sets: &[Vec<Literal>],
        config: SharingConfig,
        f: fn(&mut [Item], &mut Vec<Vec<Literal>>, SharingConfig),
    ) -> Factored {
        let mut items: Vec<Item> = sets
            .iter()
            .map(|r| Item {
                rem: r.clone(),
                factors: Vec::new(),
            })
            .collect();
        let mut factors = Vec::new();
        f(&mut items, &mut factors, config);
        (
            factors,
            items.into_iter().map(|it| (it.rem, it.factors)).collect(),
        )
    }

    proptest! {
        #[test]
        fn incremental_factoring_matches_rebuilding(
            masks in prop::collection::btree_set(1u32..1 << 14, 1..40),
            min in 2usize..6,
            lut in 2usize..8,
        ) {
            // Dense overlapping sets over 14 literals exercise many rounds.
            let sets: Vec<Vec<Literal>> = masks
                .iter()
                .map(|&m| (0..14).filter(|b| m >> b & 1 == 1).map(|b| if b < 7 { Literal::pos(b) } else { Literal::neg(b - 7) }).collect::<Vec<_>>())
                .map(|mut v| { v.sort(); v })
                .collect();
            let config = SharingConfig { factor_min_size: min, lut_inputs: lut };
            prop_assert_eq!(run(&sets, config, factor), run(&sets, config, factor_rebuilding));
        }
    }
}
