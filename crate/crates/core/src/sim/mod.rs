//! Lockstep SIMT warp interpreter with immediate-post-dominator reconvergence.

mod compare;
mod fixture;
mod warp;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::ir::LatencyModel;

pub use compare::{compare_runs, Verdict};
pub use fixture::{Fixture, FixtureError};
pub use warp::execute_warp;

pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub warp_size: usize,
    pub max_steps: u64,
    pub latency: LatencyModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            warp_size: 32,
            max_steps: DEFAULT_MAX_STEPS,
            latency: LatencyModel::default(),
        }
    }
}

impl SimConfig {
    pub fn with_warp_size(warp_size: usize) -> Self {
        SimConfig {
            warp_size,
            ..SimConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("warp size must be between 1 and 64, got {0}")]
    BadWarpSize(usize),
    #[error("function expects {expected} argument(s) per lane, fixture row {row} has {got}")]
    ArgCount {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("fixture has {rows} argument rows for a warp of {warp_size} lanes")]
    ArgRows { rows: usize, warp_size: usize },
    #[error("unknown memory `{0}` in fixture")]
    UnknownMemory(String),
    #[error("initializer for `{name}` has {got} elements but the array holds {len}")]
    InitTooLong { name: String, len: u32, got: usize },
    #[error("no function named `{0}`")]
    UnknownFunction(String),
    #[error("gave up after {0} issued instructions")]
    NonTermination(u64),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemSpace {
    Shared,
    Global,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FaultKind {
    DivideByZero,
    OutOfBounds {
        space: MemSpace,
        array: String,
        index: i64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum LaneOutcome {
    Returned {
        value: Option<i32>,
    },
    Fault {
        fault: FaultKind,
        block: String,
    },
    /// Lane never finished (only possible if the run aborted).
    Running,
}

impl LaneOutcome {
    /// Outcome with the faulting block dropped; block names change across rewrites.
    pub fn observable(&self) -> LaneOutcome {
        match self {
            LaneOutcome::Fault { fault, .. } => LaneOutcome::Fault {
                fault: fault.clone(),
                block: String::new(),
            },
            other => other.clone(),
        }
    }
}

/// Where an `undef`-derived value became observable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaintViolation {
    pub lane: usize,
    pub block: String,
    pub site: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WarpExecStats {
    pub issued_instructions: u64,
    pub thread_cycles: u64,
    pub useful_thread_cycles: u64,
    pub utilization: f64,
    pub divergent_branch_count: u64,
    pub shared_mem_issues: u64,
    pub global_mem_issues: u64,
    pub serialized_cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExecResult {
    pub lanes: Vec<LaneOutcome>,
    pub global: BTreeMap<String, Vec<i32>>,
    pub shared: Vec<i32>,
    pub stats: WarpExecStats,
    pub taint_violations: Vec<TaintViolation>,
}
