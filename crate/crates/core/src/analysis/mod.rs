//! Dominators, post-dominators, regions and divergence over a [`Function`].

pub mod cfg;
pub mod divergence;
pub mod dom;
pub mod regions;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::ir::Function;

pub use cfg::Cfg;
pub use divergence::DivergenceInfo;
pub use dom::{compute_dominators, compute_postdominators, DomTree};
pub use regions::{Region, RegionKind, RegionTree};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("block ^{block} branches to unknown block ^{target}")]
    UnknownTarget { block: String, target: String },
    #[error("block ^{0} is unreachable from the entry")]
    Unreachable(String),
    #[error("function has no return block")]
    NoReturn,
    #[error("function has several return blocks: {}", .0.join(", "))]
    MultipleReturns(Vec<String>),
    #[error("block ^{0} cannot reach the return block")]
    NoPathToExit(String),
}

/// Everything the pass needs about one function snapshot.
#[derive(Debug, Clone)]
pub struct Analyses {
    pub cfg: Cfg,
    pub dom: DomTree,
    pub pdom: DomTree,
    pub regions: RegionTree,
    pub divergence: DivergenceInfo,
}

impl Analyses {
    pub fn compute(f: &Function) -> Result<Analyses, AnalysisError> {
        let cfg = Cfg::new(f)?;
        let dom = dom::dominators_of(f, &cfg)?;
        let pdom = dom::postdominators_of(f, &cfg)?;
        let regions = regions::compute_regions(&cfg, &dom, &pdom);
        let divergence = divergence::divergence_of(f, &cfg, &dom, &pdom);
        Ok(Analyses {
            cfg,
            dom,
            pdom,
            regions,
            divergence,
        })
    }

    pub fn idx(&self, label: &str) -> usize {
        self.cfg
            .idx(label)
            .unwrap_or_else(|| panic!("no block ^{label}"))
    }

    pub fn ipdom(&self, b: usize) -> Option<usize> {
        self.pdom.parent(b)
    }
}

pub fn compute_regions(f: &Function) -> Result<RegionTree, AnalysisError> {
    Ok(Analyses::compute(f)?.regions)
}

pub fn analyze_divergence(f: &Function) -> Result<DivergenceInfo, AnalysisError> {
    Ok(Analyses::compute(f)?.divergence)
}

#[derive(Debug, Serialize)]
struct RegionDump {
    entry: String,
    exit: String,
    kind: RegionKind,
    blocks: Vec<String>,
    parent: Option<usize>,
}

#[derive(Debug, Serialize)]
struct AnalysisDump<'a> {
    function: &'a str,
    idom: BTreeMap<&'a str, Option<&'a str>>,
    ipdom: BTreeMap<&'a str, Option<&'a str>>,
    regions: Vec<RegionDump>,
    divergence: &'a DivergenceInfo,
}

/// JSON view of all analyses, for debugging.
pub fn dump_analysis(f: &Function) -> Result<serde_json::Value, AnalysisError> {
    let a = Analyses::compute(f)?;
    let name = |i: usize| a.cfg.label(i);
    let tree = |t: &DomTree| {
        (0..a.cfg.len())
            .map(|i| (name(i), t.parent(i).map(name)))
            .collect::<BTreeMap<_, _>>()
    };
    let dump = AnalysisDump {
        function: &f.name,
        idom: tree(&a.dom),
        ipdom: tree(&a.pdom),
        regions: a
            .regions
            .regions
            .iter()
            .map(|r| RegionDump {
                entry: name(r.entry).to_string(),
                exit: name(r.exit).to_string(),
                kind: r.kind,
                blocks: r.blocks.iter().map(|&b| name(b).to_string()).collect(),
                parent: r.parent,
            })
            .collect(),
        divergence: &a.divergence,
    };
    Ok(serde_json::to_value(dump).expect("analysis dump serializes"))
}
