//! Control-flow melding for SIMT divergence reduction on a small SSA IR.

pub mod analysis;
pub mod corpus;
pub mod harness;
pub mod ir;
pub mod meld;
pub mod sim;
