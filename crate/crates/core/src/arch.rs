//! Datapath parameters shared by the Verilog emitter and the simulator, so
//! both describe the same pipeline.

use serde::{Deserialize, Serialize};

/// Register stages behind the clause blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct DatapathConfig {
    pub class_sum_stages: usize,
    pub argmax_stages: usize,
}

impl Default for DatapathConfig {
    fn default() -> Self {
        Self {
            class_sum_stages: 1,
            argmax_stages: 1,
        }
    }
}

impl DatapathConfig {
    /// Cycles from the last packet's clock edge to a visible result:
    /// class-sum stages, argmax stages and the output register.
    pub fn post_hcb_latency(&self) -> usize {
        self.class_sum_stages + self.argmax_stages + 1
    }

    /// Argmax tree level after which each argmax register sits.
    ///
    /// Stage `s` (1-based) follows level `ceil(s * depth / stages)`; level 0
    /// is the leaves. Several stages may share a level, which just adds delay.
    pub fn argmax_boundaries(&self, classes: usize) -> Vec<usize> {
        let d = tree_depth(classes);
        let k = self.argmax_stages;
        (1..=k).map(|s| (s * d).div_ceil(k)).collect()
    }
}

/// Leaves of the argmax comparison tree: the next power of two.
pub fn tree_leaves(classes: usize) -> usize {
    classes.max(1).next_power_of_two()
}

pub fn tree_depth(classes: usize) -> usize {
    tree_leaves(classes).trailing_zeros() as usize
}

/// Bits needed to hold a class index.
pub fn index_width(classes: usize) -> u32 {
    tree_depth(classes).max(1) as u32
}

/// Controller states with their 2-bit encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FsmState {
    Reset,
    Idle,
    Compute,
    Stall,
}

impl FsmState {
    pub const ALL: [FsmState; 4] = [
        FsmState::Reset,
        FsmState::Idle,
        FsmState::Compute,
        FsmState::Stall,
    ];

    pub fn encoding(self) -> u8 {
        match self {
            FsmState::Reset => 0,
            FsmState::Idle => 1,
            FsmState::Compute => 2,
            FsmState::Stall => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FsmState::Reset => "RESET",
            FsmState::Idle => "IDLE",
            FsmState::Compute => "COMPUTE",
            FsmState::Stall => "STALL",
        }
    }
}
