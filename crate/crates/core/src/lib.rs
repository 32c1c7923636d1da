//! Tsetlin Machine training, compilation to a streaming accelerator,
//! Verilog emission and cycle-accurate simulation.

pub mod arch;
pub mod bits;
pub mod compile;
pub mod data;
pub mod pipeline;
pub mod rtl;
pub mod sim;
pub mod tm;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
