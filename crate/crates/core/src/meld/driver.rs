use serde::Serialize;

use crate::analysis::Analyses;
use crate::ir::{verify_ssa, Function, LatencyModel, Module, NameGen, Operand};

use super::align::Side;
use super::codegen::meld_subgraphs;
use super::config::MeldConfig;
use super::postopt::post_optimize;
use super::preprocess::preprocess;
use super::replicate::replicate_region;
use super::subgraph::{
    align_subgraphs, decompose_path, detect_meldable_regions, isomorphism, MeldableRegion,
    PairKind, Subgraph, SubgraphAlignment, SubgraphTuple,
};
use super::unpredicate::unpredicate;
use super::MeldError;

/// One applied meld.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MeldRecord {
    pub iteration: usize,
    pub region_entry: String,
    pub region_exit: String,
    pub true_entry: String,
    pub false_entry: String,
    pub kind: PairKind,
    pub mp_score: f64,
    pub blocks_melded: usize,
    pub selects_inserted: usize,
    pub unpredicated_runs: usize,
    pub replicated: bool,
    pub melded_entry: String,
    pub melded_exit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MeldReport {
    pub function: String,
    pub iterations: usize,
    /// False if the iteration cap was reached while melds were still found.
    pub converged: bool,
    pub melds: Vec<MeldRecord>,
}

/// A profitable pair found in a region, before anything is rewritten.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Opportunity {
    pub true_subgraph: Subgraph,
    pub false_subgraph: Subgraph,
    pub kind: PairKind,
    pub profit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RegionOpportunities {
    pub region: MeldableRegion,
    pub true_path: Vec<Subgraph>,
    pub false_path: Vec<Subgraph>,
    pub alignment: SubgraphAlignment,
    pub opportunities: Vec<Opportunity>,
}

struct Plan {
    region: MeldableRegion,
    scratch: Function,
    ng: NameGen,
    tpath: Vec<Subgraph>,
    fpath: Vec<Subgraph>,
    alignment: SubgraphAlignment,
}

fn plan_region(
    f: &Function,
    region: &MeldableRegion,
    cfg: &MeldConfig,
    lm: &LatencyModel,
) -> Result<Option<Plan>, MeldError> {
    let mut scratch = f.clone();
    let mut ng = NameGen::for_function(&scratch);
    let Some((tpath, _)) = decompose_path(&mut scratch, &region.true_entry, &region.exit, &mut ng)?
    else {
        return Ok(None);
    };
    let Some((fpath, _)) =
        decompose_path(&mut scratch, &region.false_entry, &region.exit, &mut ng)?
    else {
        return Ok(None);
    };
    let alignment = align_subgraphs(&scratch, &tpath, &fpath, cfg, lm);
    Ok(Some(Plan {
        region: region.clone(),
        scratch,
        ng,
        tpath,
        fpath,
        alignment,
    }))
}

/// Every profitable pair the first round of the pass would consider.
pub fn analyze_opportunities(
    f: &Function,
    cfg: &MeldConfig,
    lm: &LatencyModel,
) -> Result<Vec<RegionOpportunities>, MeldError> {
    let mut f = f.clone();
    post_optimize(&mut f);
    let a = Analyses::compute(&f)?;
    let mut out = Vec::new();
    for region in detect_meldable_regions(&f, &a) {
        let Some(plan) = plan_region(&f, &region, cfg, lm)? else {
            continue;
        };
        let opportunities = plan
            .alignment
            .tuples
            .iter()
            .filter(|t| t.profit >= cfg.threshold)
            .map(|t| Opportunity {
                true_subgraph: plan.tpath[t.true_index].clone(),
                false_subgraph: plan.fpath[t.false_index].clone(),
                kind: t.kind.clone(),
                profit: t.profit,
            })
            .collect();
        out.push(RegionOpportunities {
            region,
            true_path: plan.tpath,
            false_path: plan.fpath,
            alignment: plan.alignment,
            opportunities,
        });
    }
    Ok(out)
}

fn check(
    stage: &str,
    f: &Function,
    hook: &mut impl FnMut(&str, &Function) -> Result<(), MeldError>,
) -> Result<(), MeldError> {
    let violations = verify_ssa(f);
    if !violations.is_empty() {
        return Err(MeldError::Verify {
            stage: stage.to_string(),
            violations,
        });
    }
    hook(stage, f)
}

fn apply(
    plan: Plan,
    tuple: &SubgraphTuple,
    iteration: usize,
    cfg: &MeldConfig,
    lm: &LatencyModel,
    hook: &mut impl FnMut(&str, &Function) -> Result<(), MeldError>,
) -> Result<(Function, MeldRecord), MeldError> {
    let Plan {
        region,
        mut scratch,
        mut ng,
        tpath,
        fpath,
        ..
    } = plan;
    let g = &mut scratch;
    check("simplify", g, hook)?;
    let (mut t, mut s) = (
        tpath[tuple.true_index].clone(),
        fpath[tuple.false_index].clone(),
    );
    let cond: Operand = region.cond.clone();
    let q = preprocess(g, &t, &s, &cond, &mut ng)?;
    check("preprocess", g, hook)?;

    let replicated = if let PairKind::BlockRegion { block, slot } = &tuple.kind {
        let (single, other) = match block {
            Side::True => (&mut t, &s),
            Side::False => (&mut s, &t),
        };
        let rep = replicate_region(g, other, &single.entry.clone(), slot, &mut ng)?;
        *single = rep.subgraph;
        true
    } else {
        false
    };
    let pairs = if t.is_block() {
        vec![(t.entry.clone(), s.entry.clone())]
    } else {
        isomorphism(g, &t, &s)
            .ok_or_else(|| MeldError::invariant("paired subgraphs are not isomorphic"))?
    };
    let outcome = meld_subgraphs(g, &q, &cond, &t, &s, &pairs, lm, cfg.gap_penalty, &mut ng)?;
    check("meld", g, hook)?;
    let runs = unpredicate(g, &outcome, &cond, &mut ng)?;
    check("unpredicate", g, hook)?;
    post_optimize(g);
    check("post-optimize", g, hook)?;

    let record = MeldRecord {
        iteration,
        region_entry: region.entry,
        region_exit: region.exit,
        true_entry: tpath[tuple.true_index].entry.clone(),
        false_entry: fpath[tuple.false_index].entry.clone(),
        kind: tuple.kind.clone(),
        mp_score: tuple.profit,
        blocks_melded: pairs.len(),
        selects_inserted: outcome.selects,
        unpredicated_runs: runs,
        replicated,
        melded_entry: outcome.entry,
        melded_exit: outcome.exit,
    };
    Ok((scratch, record))
}

/// Run the pass on `f`, calling `hook` after every rewriting stage with the
/// function as it stands. Each stage's result is SSA-verified first.
pub fn run_darm_with_hook(
    f: &mut Function,
    cfg: &MeldConfig,
    lm: &LatencyModel,
    mut hook: impl FnMut(&str, &Function) -> Result<(), MeldError>,
) -> Result<MeldReport, MeldError> {
    let mut report = MeldReport {
        function: f.name.clone(),
        iterations: 0,
        converged: false,
        melds: Vec::new(),
    };
    let original = f.clone();
    post_optimize(f);
    while report.iterations < cfg.max_iterations {
        report.iterations += 1;
        let a = Analyses::compute(f)?;
        let mut applied = None;
        for region in detect_meldable_regions(f, &a) {
            let Some(plan) = plan_region(f, &region, cfg, lm)? else {
                continue;
            };
            let Some(tuple) = plan
                .alignment
                .tuples
                .iter()
                .find(|t| t.profit >= cfg.threshold)
                .cloned()
            else {
                continue;
            };
            applied = Some(apply(plan, &tuple, report.iterations, cfg, lm, &mut hook)?);
            break;
        }
        match applied {
            Some((g, record)) => {
                *f = g;
                report.melds.push(record);
                if cfg.run_once {
                    report.converged = true;
                    break;
                }
            }
            None => {
                report.converged = true;
                break;
            }
        }
    }
    if report.melds.is_empty() {
        *f = original;
    }
    Ok(report)
}

pub fn run_darm(
    f: &mut Function,
    cfg: &MeldConfig,
    lm: &LatencyModel,
) -> Result<MeldReport, MeldError> {
    run_darm_with_hook(f, cfg, lm, |_, _| Ok(()))
}

/// Run the pass on the configured function, or on every function.
pub fn run_darm_module(
    m: &mut Module,
    cfg: &MeldConfig,
    lm: &LatencyModel,
) -> Result<Vec<MeldReport>, MeldError> {
    if let Some(name) = &cfg.target_function {
        let f = m
            .function_mut(name)
            .ok_or_else(|| MeldError::UnknownFunction(name.clone()))?;
        return Ok(vec![run_darm(f, cfg, lm)?]);
    }
    m.functions
        .iter_mut()
        .map(|f| run_darm(f, cfg, lm))
        .collect()
}
