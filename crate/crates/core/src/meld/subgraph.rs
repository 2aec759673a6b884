use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::analysis::regions::{is_region, region_body};
use crate::analysis::Analyses;
use crate::ir::{Block, Function, LatencyModel, NameGen, Opcode, Operand, Phi, Terminator};

use super::align::{global_align, Side, Step};
use super::config::{MeldConfig, MeldMode};
use super::profit::{mp_block, mp_subgraph};
use super::replicate::replica_path;
use super::MeldError;

/// A single-entry single-exit piece of one side of a divergent region. Only
/// the entry has predecessors outside `blocks`, and only the exit branches
/// outside it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Subgraph {
    pub entry: String,
    pub exit: String,
    /// Member blocks in depth-first pre-order from the entry.
    pub blocks: Vec<String>,
}

impl Subgraph {
    pub fn is_block(&self) -> bool {
        self.blocks.len() == 1
    }

    fn block(label: &str) -> Subgraph {
        Subgraph {
            entry: label.to_string(),
            exit: label.to_string(),
            blocks: vec![label.to_string()],
        }
    }

    fn from_set(f: &Function, entry: &str, exit: &str, set: &HashSet<String>) -> Subgraph {
        let mut order = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![entry.to_string()];
        while let Some(v) = stack.pop() {
            if !seen.insert(v.clone()) {
                continue;
            }
            let succs = f.block(&v).expect("member exists").succ_labels();
            for s in succs.into_iter().rev() {
                if set.contains(&s) && !seen.contains(&s) {
                    stack.push(s);
                }
            }
            order.push(v);
        }
        Subgraph {
            entry: entry.to_string(),
            exit: exit.to_string(),
            blocks: order,
        }
    }
}

/// A region headed by a divergent two-way branch whose sides are disjoint
/// until they reach the region exit.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MeldableRegion {
    pub entry: String,
    pub exit: String,
    pub cond: Operand,
    pub true_entry: String,
    pub false_entry: String,
}

/// Regions worth trying, in block layout order.
pub fn detect_meldable_regions(f: &Function, a: &Analyses) -> Vec<MeldableRegion> {
    let mut out = Vec::new();
    for b in &f.blocks {
        let Terminator::CondBr {
            cond,
            then_to,
            else_to,
        } = &b.term
        else {
            continue;
        };
        if then_to == else_to || !a.divergence.branch_is_divergent(&b.label) {
            continue;
        }
        let e = a.idx(&b.label);
        let Some(x) = a.ipdom(e) else { continue };
        let (t, fl) = (a.idx(then_to), a.idx(else_to));
        if a.pdom.dominates(t, fl) || a.pdom.dominates(fl, t) {
            continue;
        }
        let body = region_body(&a.cfg, e, x);
        if !is_region(&a.cfg, &a.dom, &a.pdom, e, x, &body) {
            continue;
        }
        if body
            .iter()
            .any(|&i| f.blocks[i].contains_opcode(Opcode::Barrier))
        {
            continue;
        }
        let tr: HashSet<usize> = region_body(&a.cfg, t, x).into_iter().collect();
        let fr: HashSet<usize> = region_body(&a.cfg, fl, x).into_iter().collect();
        if tr.contains(&e) || fr.contains(&e) || !tr.is_disjoint(&fr) {
            continue;
        }
        out.push(MeldableRegion {
            entry: b.label.clone(),
            exit: a.cfg.label(x).to_string(),
            cond: cond.clone(),
            true_entry: then_to.clone(),
            false_entry: else_to.clone(),
        });
    }
    out
}

/// Route the edges from `from` into `target` through a fresh block, moving
/// the matching phi inputs along. Returns the new block's label.
pub(crate) fn split_edges(
    f: &mut Function,
    target: &str,
    from: &[String],
    base: &str,
    ng: &mut NameGen,
) -> String {
    let label = ng.fresh(base);
    let mut nb = Block::new(label.clone(), Terminator::Br(target.to_string()));
    for p in from {
        f.block_mut(p)
            .expect("pred exists")
            .term
            .retarget(target, &label);
    }
    let tb = f.block_mut(target).expect("target exists");
    for phi in &mut tb.phis {
        let (moved, kept): (Vec<_>, Vec<_>) =
            phi.incoming.drain(..).partition(|(_, p)| from.contains(p));
        phi.incoming = kept;
        let first = moved
            .first()
            .map(|(v, _)| v.clone())
            .unwrap_or(Operand::Undef);
        if moved.iter().all(|(v, _)| *v == first) {
            phi.incoming.push((first, label.clone()));
        } else {
            let name = ng.fresh(&format!("{}.m", phi.result));
            nb.phis.push(Phi {
                result: name.clone(),
                incoming: moved,
            });
            phi.incoming.push((Operand::value(name), label.clone()));
        }
    }
    let at = f.block_index(target).expect("target exists");
    f.blocks.insert(at, nb);
    label
}

/// Split the path from `start` up to (not including) `stop` into a sequence
/// of subgraphs. Join blocks with several incoming edges from one subgraph
/// get a fresh exit block. Returns the subgraphs and whether `f` changed, or
/// `None` if the path does not decompose.
pub fn decompose_path(
    f: &mut Function,
    start: &str,
    stop: &str,
    ng: &mut NameGen,
) -> Result<Option<(Vec<Subgraph>, bool)>, MeldError> {
    let mut out = Vec::new();
    let mut modified = false;
    let mut cur = start.to_string();
    let mut budget = 4 * f.blocks.len() + 8;
    while cur != stop {
        budget -= 1;
        if budget == 0 {
            return Err(MeldError::invariant(format!(
                "decomposition from ^{start} does not terminate"
            )));
        }
        let a = Analyses::compute(f)?;
        let c = a.idx(&cur);
        let s = a.idx(stop);
        let Some(j) = a.ipdom(c) else { return Ok(None) };
        let preds = &a.cfg.preds[c];
        if preds.len() == 1 && a.cfg.succs[c] == [j] {
            out.push(Subgraph::block(&cur));
            cur = a.cfg.label(j).to_string();
            continue;
        }
        let body = region_body(&a.cfg, c, j);
        let inside = |b: usize| body.binary_search(&b).is_ok();
        if inside(s) || preds.iter().filter(|&&p| !inside(p)).count() != 1 {
            return Ok(None);
        }
        if body
            .iter()
            .any(|&b| b != c && a.cfg.preds[b].iter().any(|&p| !inside(p)))
        {
            return Ok(None);
        }
        let into_j: Vec<usize> = a.cfg.preds[j]
            .iter()
            .copied()
            .filter(|&p| inside(p))
            .collect();
        let set = |extra: Option<usize>| -> HashSet<String> {
            body.iter()
                .chain(extra.iter())
                .map(|&b| a.cfg.label(b).to_string())
                .collect()
        };
        if j != s
            && a.cfg.preds[j].iter().all(|&p| inside(p))
            && a.cfg.succs[j].len() == 1
            && a.cfg.succs[j][0] != j
        {
            let jl = a.cfg.label(j).to_string();
            out.push(Subgraph::from_set(f, &cur, &jl, &set(Some(j))));
            cur = a.cfg.label(a.cfg.succs[j][0]).to_string();
        } else if into_j.len() == 1 {
            let exit = a.cfg.label(into_j[0]).to_string();
            out.push(Subgraph::from_set(f, &cur, &exit, &set(None)));
            cur = a.cfg.label(j).to_string();
        } else {
            let from: Vec<String> = into_j.iter().map(|&p| a.cfg.label(p).to_string()).collect();
            let jl = a.cfg.label(j).to_string();
            split_edges(f, &jl, &from, &format!("{jl}.x"), ng);
            modified = true;
        }
    }
    Ok(Some((out, modified)))
}

/// Give the region headed by `entry`, and every region nested inside it, a
/// single entry edge and a single exit edge. Returns whether `f` changed.
pub fn simplify_region(f: &mut Function, entry: &str, ng: &mut NameGen) -> Result<bool, MeldError> {
    let a = Analyses::compute(f)?;
    let Some(r) = a.regions.region_at(a.idx(entry)).cloned() else {
        return Ok(false);
    };
    let label = |i: usize| a.cfg.label(i).to_string();
    let exit = label(r.exit);
    let exits: Vec<String> = r
        .exit_edges(&a.cfg)
        .into_iter()
        .map(|(p, _)| label(p))
        .collect();
    let entries: Vec<String> = r
        .entry_edges(&a.cfg)
        .into_iter()
        .map(|(p, _)| label(p))
        .collect();
    let children: Vec<String> = r
        .children
        .iter()
        .map(|&c| label(a.regions.regions[c].entry))
        .collect();
    let mut changed = false;
    if exits.len() > 1 {
        split_edges(f, &exit, &exits, &format!("{exit}.x"), ng);
        changed = true;
    }
    if entries.len() > 1 && r.entry != 0 {
        split_edges(f, entry, &entries, &format!("{entry}.e"), ng);
        changed = true;
    }
    for c in children {
        changed |= simplify_region(f, &c, ng)?;
    }
    Ok(changed)
}

/// Pair up the blocks of two subgraphs with the same branching structure.
/// Returns the pairs in pre-order of `s1`, or `None` if they differ.
pub fn isomorphism(f: &Function, s1: &Subgraph, s2: &Subgraph) -> Option<Vec<(String, String)>> {
    if s1.blocks.len() != s2.blocks.len() {
        return None;
    }
    let in1: HashSet<&str> = s1.blocks.iter().map(String::as_str).collect();
    let in2: HashSet<&str> = s2.blocks.iter().map(String::as_str).collect();
    let mut fwd: HashMap<&str, &str> = HashMap::new();
    let mut back: HashSet<&str> = HashSet::new();
    let mut pairs = Vec::new();
    let mut stack = vec![(s1.entry.as_str(), s2.entry.as_str())];
    while let Some((x, y)) = stack.pop() {
        if let Some(&seen) = fwd.get(x) {
            if seen != y {
                return None;
            }
            continue;
        }
        if !back.insert(y) || (x == s1.exit) != (y == s2.exit) {
            return None;
        }
        fwd.insert(x, y);
        pairs.push((x.to_string(), y.to_string()));
        let (tx, ty) = (&f.block(x)?.term, &f.block(y)?.term);
        if tx.kind() != ty.kind() {
            return None;
        }
        let (sx, sy) = (tx.successors(), ty.successors());
        let mut next = Vec::new();
        for (a, b) in sx.into_iter().zip(sy) {
            match (in1.contains(a), in2.contains(b)) {
                (true, true) => next.push((a, b)),
                (false, false) => {}
                _ => return None,
            }
        }
        stack.extend(next.into_iter().rev());
    }
    (pairs.len() == s1.blocks.len()).then_some(pairs)
}

/// How a true-side and a false-side subgraph can be melded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PairKind {
    BlockBlock,
    RegionRegion,
    /// One side is a single block; it is replicated into the other side's
    /// shape with its code placed at `slot`.
    BlockRegion {
        block: Side,
        slot: String,
    },
}

fn straight_line(f: &Function, s: &Subgraph) -> bool {
    let b = f.block(&s.entry).expect("member exists");
    b.phis.is_empty() && matches!(b.term, Terminator::Br(_)) && f.preds(&s.entry).len() == 1
}

/// Synthetic blocks standing in for a replica of `region` carrying `b` at `slot`.
fn replica_stand_ins(f: &Function, region: &Subgraph, b: &Block, slot: &str) -> Vec<Block> {
    region
        .blocks
        .iter()
        .map(|r| {
            let src = f.block(r).expect("member exists");
            let mut copy = Block::new(format!("{r}.rep"), src.term.clone());
            if r == slot {
                copy.insts = b.insts.clone();
            }
            copy
        })
        .collect()
}

/// Decide whether a pair can be melded, and how.
pub fn classify(
    f: &Function,
    t: &Subgraph,
    fs: &Subgraph,
    mode: MeldMode,
    lm: &LatencyModel,
) -> Option<PairKind> {
    let blocks = |s: &Subgraph| {
        s.blocks
            .iter()
            .map(|l| f.block(l).expect("member exists"))
            .collect::<Vec<_>>()
    };
    let (bt, bf) = (blocks(t), blocks(fs));
    if bt
        .iter()
        .chain(&bf)
        .any(|b| b.contains_opcode(Opcode::Barrier))
    {
        return None;
    }
    if bt.iter().chain(&bf).all(|b| b.insts.is_empty()) {
        return None;
    }
    match (t.is_block(), fs.is_block()) {
        (true, true) => Some(PairKind::BlockBlock),
        _ if mode == MeldMode::BranchFusion => None,
        (false, false) => isomorphism(f, t, fs).map(|_| PairKind::RegionRegion),
        (true, false) | (false, true) => {
            let (side, single, region) = if t.is_block() {
                (Side::True, t, fs)
            } else {
                (Side::False, fs, t)
            };
            if !straight_line(f, single) {
                return None;
            }
            let b = f.block(&single.entry).expect("member exists");
            let mut best: Option<(f64, &String)> = None;
            for r in &region.blocks {
                if replica_path(f, region, r).is_none() {
                    continue;
                }
                let score = mp_block(b, f.block(r).expect("member exists"), lm);
                if best.is_none_or(|(s, _)| score > s) {
                    best = Some((score, r));
                }
            }
            best.map(|(_, r)| PairKind::BlockRegion {
                block: side,
                slot: r.clone(),
            })
        }
    }
}

/// Subgraph profitability of a classified pair.
pub fn pair_profit(
    f: &Function,
    t: &Subgraph,
    fs: &Subgraph,
    kind: &PairKind,
    lm: &LatencyModel,
) -> f64 {
    let get = |l: &str| f.block(l).expect("member exists");
    match kind {
        PairKind::BlockBlock => mp_block(get(&t.entry), get(&fs.entry), lm),
        PairKind::RegionRegion => {
            let pairs = isomorphism(f, t, fs).unwrap_or_default();
            mp_subgraph(pairs.iter().map(|(a, b)| (get(a), get(b))), lm)
        }
        PairKind::BlockRegion { block, slot } => {
            let (single, region) = match block {
                Side::True => (t, fs),
                Side::False => (fs, t),
            };
            let stand_ins = replica_stand_ins(f, region, get(&single.entry), slot);
            mp_subgraph(
                region.blocks.iter().map(|r| get(r)).zip(stand_ins.iter()),
                lm,
            )
        }
    }
}

/// One aligned pair of subgraphs.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SubgraphTuple {
    pub true_index: usize,
    pub false_index: usize,
    pub kind: PairKind,
    pub profit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgraphAlignment {
    pub steps: Vec<Step>,
    pub score: f64,
    /// Matched pairs in alignment order.
    pub tuples: Vec<SubgraphTuple>,
}

/// Align the subgraph sequences of the two sides, scoring a match by its
/// profitability.
pub fn align_subgraphs(
    f: &Function,
    tpath: &[Subgraph],
    fpath: &[Subgraph],
    cfg: &MeldConfig,
    lm: &LatencyModel,
) -> SubgraphAlignment {
    let mut table: HashMap<(usize, usize), (PairKind, f64)> = HashMap::new();
    for (i, t) in tpath.iter().enumerate() {
        for (j, s) in fpath.iter().enumerate() {
            if let Some(k) = classify(f, t, s, cfg.mode, lm) {
                let p = pair_profit(f, t, s, &k, lm);
                table.insert((i, j), (k, p));
            }
        }
    }
    if cfg.mode == MeldMode::BranchFusion && (tpath.len() != 1 || fpath.len() != 1) {
        table.clear();
    }
    let (score, steps) = global_align(
        tpath.len(),
        fpath.len(),
        |i, j| table.get(&(i, j)).map(|(_, p)| *p),
        cfg.gap_penalty,
    );
    let tuples = steps
        .iter()
        .filter_map(|s| match *s {
            Step::Match(i, j) => {
                let (kind, profit) = table[&(i, j)].clone();
                Some(SubgraphTuple {
                    true_index: i,
                    false_index: j,
                    kind,
                    profit,
                })
            }
            Step::Gap(..) => None,
        })
        .collect();
    SubgraphAlignment {
        steps,
        score,
        tuples,
    }
}
