//! Register-level model of the accelerator. One call to [`Accelerator::step`]
//! is one clock cycle: outputs are computed from the current registers and
//! inputs, then every register takes its next value.

use crate::arch::{tree_leaves, DatapathConfig, FsmState};
use crate::bits::BitVector;
use crate::compile::{CompiledModel, SharedNetlist};

/// Inputs sampled during one cycle.
#[derive(Clone, Copy, Debug)]
pub struct CycleInputs<'a> {
    pub rst: bool,
    pub tvalid: bool,
    pub tdata: Option<&'a BitVector>,
    pub tlast: bool,
    pub result_ready: bool,
}

/// Outputs visible during one cycle, before the clock edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CycleOutputs {
    pub tready: bool,
    /// A packet was transferred this cycle; holds its packet index.
    pub accepted: Option<usize>,
    pub result_valid: bool,
    pub result_class: usize,
    pub error: bool,
    pub state: FsmState,
}

type Leaves = Vec<(i64, usize)>;

pub struct Accelerator<'a> {
    net: &'a SharedNetlist,
    packets: usize,
    feature_base: Vec<usize>,
    pos_slots: Vec<Vec<usize>>,
    neg_slots: Vec<Vec<usize>>,
    leaves: usize,
    min_sum: i64,
    boundaries: Vec<usize>,

    state: FsmState,
    count: usize,
    error: bool,
    hcb: Vec<BitVector>,
    dp_valid: bool,
    cs: Vec<(bool, Vec<i64>)>,
    am: Vec<(bool, Leaves)>,
    out_valid: bool,
    out_class: usize,
    gate_buf: Vec<bool>,
}

impl<'a> Accelerator<'a> {
    pub fn new(model: &CompiledModel, net: &'a SharedNetlist, datapath: DatapathConfig) -> Self {
        let plan = model.plan();
        let (pos_slots, neg_slots) = model.class_slots().into_iter().unzip();
        let width = model.sum_width();
        let mut a = Self {
            net,
            packets: plan.packet_count(),
            feature_base: (0..plan.packet_count())
                .map(|p| plan.feature_range(p).start)
                .collect(),
            pos_slots,
            neg_slots,
            leaves: tree_leaves(model.classes),
            min_sum: -(1i64 << (width - 1)),
            boundaries: datapath.argmax_boundaries(model.classes),
            state: FsmState::Reset,
            count: 0,
            error: false,
            hcb: Vec::new(),
            dp_valid: false,
            cs: vec![(false, Vec::new()); datapath.class_sum_stages],
            am: vec![(false, Vec::new()); datapath.argmax_stages],
            out_valid: false,
            out_class: 0,
            gate_buf: Vec::new(),
        };
        a.reset();
        a
    }

    fn reset(&mut self) {
        self.state = FsmState::Reset;
        self.count = 0;
        self.error = false;
        self.hcb = vec![BitVector::ones(self.net.clause_count); self.packets];
        self.dp_valid = false;
        for s in &mut self.cs {
            s.0 = false;
        }
        for s in &mut self.am {
            s.0 = false;
        }
        self.out_valid = false;
        self.out_class = 0;
    }

    pub fn state(&self) -> FsmState {
        self.state
    }

    pub fn packet_counter(&self) -> usize {
        self.count
    }

    pub fn clause_registers(&self) -> &[BitVector] {
        &self.hcb
    }

    pub fn step(&mut self, inp: CycleInputs<'_>) -> CycleOutputs {
        let advance = !(self.out_valid && !inp.result_ready);
        let tready = advance && self.state != FsmState::Reset;
        let accept = inp.tvalid && tready;
        let out = CycleOutputs {
            tready,
            accepted: (accept && !inp.rst).then_some(self.count),
            result_valid: self.out_valid,
            result_class: self.out_class,
            error: self.error,
            state: self.state,
        };
        if inp.rst {
            self.reset();
            return out;
        }
        let last = self.count + 1 == self.packets;

        if advance {
            // Output side first: it reads registers the input side overwrites.
            let sums_in = (
                self.dp_valid,
                if self.dp_valid {
                    self.class_sums()
                } else {
                    Vec::new()
                },
            );
            let am_in = if self.cs.is_empty() {
                sums_in
            } else {
                self.cs.rotate_right(1);
                std::mem::replace(&mut self.cs[0], sums_in)
            };
            let mut stage = (
                am_in.0,
                if am_in.0 {
                    self.leaves_of(&am_in.1)
                } else {
                    Vec::new()
                },
            );
            let mut level = 0;
            let mut next_am = Vec::with_capacity(self.am.len());
            for (s, &b) in self.boundaries.iter().enumerate() {
                let v = reduce(stage, level, b);
                level = b;
                next_am.push(v);
                stage = std::mem::take(&mut self.am[s]);
            }
            let done = reduce(stage, level, tree_depth_of(self.leaves));
            for (s, v) in next_am.into_iter().enumerate() {
                self.am[s] = v;
            }
            self.out_valid = done.0;
            if done.0 {
                self.out_class = done.1[0].1;
            }

            self.dp_valid = accept && last && inp.tlast;
            if accept {
                let data = inp.tdata.expect("tvalid without tdata");
                self.load_hcb(self.count, data);
            }
        }

        let next_count = if accept {
            if last || inp.tlast {
                0
            } else {
                self.count + 1
            }
        } else {
            self.count
        };
        if accept && inp.tlast != last {
            self.error = true;
        }
        self.state = if !advance {
            FsmState::Stall
        } else if accept {
            if next_count == 0 {
                FsmState::Idle
            } else {
                FsmState::Compute
            }
        } else if self.count == 0 {
            FsmState::Idle
        } else {
            FsmState::Stall
        };
        self.count = next_count;
        out
    }

    fn load_hcb(&mut self, p: usize, data: &BitVector) {
        let base = self.feature_base[p];
        let pn = &self.net.packets[p];
        pn.eval_gates(|f| data.get(f - base), &mut self.gate_buf);
        let mut next = if p == 0 {
            BitVector::ones(self.net.clause_count)
        } else {
            self.hcb[p - 1].clone()
        };
        for (slot, r) in pn.roots.iter().enumerate() {
            if let Some(g) = *r {
                if !self.gate_buf[g] {
                    next.set(slot, false);
                }
            }
        }
        self.hcb[p] = next;
    }

    fn class_sums(&self) -> Vec<i64> {
        let full = &self.hcb[self.packets - 1];
        self.pos_slots
            .iter()
            .zip(&self.neg_slots)
            .map(|(pos, neg)| {
                let ones = |s: &Vec<usize>| s.iter().filter(|&&i| full.get(i)).count() as i64;
                ones(pos) - ones(neg)
            })
            .collect()
    }

    fn leaves_of(&self, sums: &[i64]) -> Leaves {
        (0..self.leaves)
            .map(|c| (sums.get(c).copied().unwrap_or(self.min_sum), c))
            .collect()
    }
}

fn tree_depth_of(leaves: usize) -> usize {
    leaves.trailing_zeros() as usize
}

/// Runs comparator levels `from..to`; the left input wins ties.
fn reduce(stage: (bool, Leaves), from: usize, to: usize) -> (bool, Leaves) {
    let (valid, mut v) = stage;
    if !valid {
        return (false, v);
    }
    for _ in from..to {
        v = v
            .chunks(2)
            .map(|pair| {
                if pair[0].0 >= pair[1].0 {
                    pair[0]
                } else {
                    pair[1]
                }
            })
            .collect();
    }
    (true, v)
}
