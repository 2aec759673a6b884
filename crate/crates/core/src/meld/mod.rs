//! Divergence-aware control-flow melding.
//!
//! The pass looks for regions headed by a divergent branch whose two sides
//! contain structurally similar single-entry single-exit subgraphs, aligns
//! them, and rewrites each profitable pair into one shared instruction stream
//! guarded by `select`s on the branch condition.

mod align;
mod codegen;
mod config;
mod driver;
mod postopt;
mod preprocess;
mod profit;
mod replicate;
mod ssa_repair;
mod subgraph;
mod unpredicate;

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::ir::Violation;

pub use align::{
    align_instructions, alignment_score, compatible, global_align, InstructionAlignment, Side, Step,
};
pub use codegen::{meld_subgraphs, InstTag, MeldOutcome};
pub use config::{ConfigError, MeldConfig, MeldMode};
pub use driver::{
    analyze_opportunities, run_darm, run_darm_module, run_darm_with_hook, MeldRecord, MeldReport,
    Opportunity, RegionOpportunities,
};
pub use postopt::post_optimize;
pub use preprocess::preprocess;
pub use profit::{kind_profile, mp_block, mp_subgraph};
pub use replicate::{replicate_region, Replica};
pub use ssa_repair::{repair_all, repair_value};
pub use subgraph::{
    align_subgraphs, classify, decompose_path, detect_meldable_regions, isomorphism, pair_profit,
    simplify_region, MeldableRegion, PairKind, Subgraph, SubgraphAlignment, SubgraphTuple,
};
pub use unpredicate::unpredicate;

#[derive(Debug, Clone, Error)]
pub enum MeldError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("SSA verification failed after {stage}: {}", .violations.first().map(|v| v.to_string()).unwrap_or_default())]
    Verify {
        stage: String,
        violations: Vec<Violation>,
    },
    #[error("no function named `{0}`")]
    UnknownFunction(String),
}

impl MeldError {
    pub(crate) fn invariant(msg: impl Into<String>) -> MeldError {
        MeldError::Invariant(msg.into())
    }
}
