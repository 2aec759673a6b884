use serde::Serialize;

use crate::ir::Function;

use super::cfg::{reachable, reverse_postorder, Cfg};
use super::AnalysisError;

/// Immediate dominators of every node reachable from `root` (iterative
/// two-finger intersection over reverse post-order). Unreachable nodes and the
/// root map to `None`.
pub fn immediate_dominators(
    succs: &[Vec<usize>],
    preds: &[Vec<usize>],
    root: usize,
) -> Vec<Option<usize>> {
    let n = succs.len();
    let rpo = reverse_postorder(succs, root);
    let mut order = vec![usize::MAX; n];
    for (i, &v) in rpo.iter().enumerate() {
        order[v] = i;
    }
    let mut idom: Vec<Option<usize>> = vec![None; n];
    idom[root] = Some(root);
    let intersect = |idom: &[Option<usize>], mut a: usize, mut b: usize| {
        while a != b {
            while order[a] > order[b] {
                a = idom[a].expect("processed");
            }
            while order[b] > order[a] {
                b = idom[b].expect("processed");
            }
        }
        a
    };
    let mut changed = true;
    while changed {
        changed = false;
        for &v in rpo.iter().skip(1) {
            let mut new: Option<usize> = None;
            for &p in &preds[v] {
                if order[p] == usize::MAX || idom[p].is_none() {
                    continue;
                }
                new = Some(match new {
                    None => p,
                    Some(cur) => intersect(&idom, p, cur),
                });
            }
            if new.is_some() && idom[v] != new {
                idom[v] = new;
                changed = true;
            }
        }
    }
    idom[root] = None;
    idom
}

/// A dominator or post-dominator tree over block indices.
#[derive(Debug, Clone, Serialize)]
pub struct DomTree {
    pub labels: Vec<String>,
    pub root: usize,
    /// Immediate (post-)dominator; `None` for the root.
    pub idom: Vec<Option<usize>>,
    pub depth: Vec<usize>,
}

impl DomTree {
    fn build(labels: Vec<String>, root: usize, idom: Vec<Option<usize>>) -> DomTree {
        let n = idom.len();
        let mut depth = vec![usize::MAX; n];
        depth[root] = 0;
        fn fill(v: usize, idom: &[Option<usize>], depth: &mut [usize]) -> usize {
            if depth[v] != usize::MAX {
                return depth[v];
            }
            let d = fill(idom[v].expect("non-root has a parent"), idom, depth) + 1;
            depth[v] = d;
            d
        }
        for v in 0..n {
            if idom[v].is_some() {
                fill(v, &idom, &mut depth);
            }
        }
        DomTree {
            labels,
            root,
            idom,
            depth,
        }
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.idom[v]
    }

    /// Reflexive dominance.
    pub fn dominates(&self, a: usize, mut b: usize) -> bool {
        loop {
            if a == b {
                return true;
            }
            match self.idom[b] {
                Some(p) => b = p,
                None => return false,
            }
        }
    }

    pub fn strictly_dominates(&self, a: usize, b: usize) -> bool {
        a != b && self.dominates(a, b)
    }

    pub fn idom_label(&self, label: &str) -> Option<&str> {
        let i = self.labels.iter().position(|l| l == label)?;
        self.idom[i].map(|p| self.labels[p].as_str())
    }

    /// Nodes on the path from `v` up to the root, `v` first.
    pub fn chain(&self, mut v: usize) -> Vec<usize> {
        let mut out = vec![v];
        while let Some(p) = self.idom[v] {
            out.push(p);
            v = p;
        }
        out
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        (0..self.idom.len())
            .filter(|&c| self.idom[c] == Some(v))
            .collect()
    }
}

fn require_reachable(f: &Function, cfg: &Cfg) -> Result<(), AnalysisError> {
    let seen = reachable(&cfg.succs, 0);
    match seen.iter().position(|s| !s) {
        Some(i) => Err(AnalysisError::Unreachable(f.blocks[i].label.clone())),
        None => Ok(()),
    }
}

pub fn compute_dominators(f: &Function) -> Result<DomTree, AnalysisError> {
    let cfg = Cfg::new(f)?;
    dominators_of(f, &cfg)
}

pub(crate) fn dominators_of(f: &Function, cfg: &Cfg) -> Result<DomTree, AnalysisError> {
    require_reachable(f, cfg)?;
    let idom = immediate_dominators(&cfg.succs, &cfg.preds, 0);
    Ok(DomTree::build(cfg.labels.clone(), 0, idom))
}

/// The unique `ret` block.
pub(crate) fn single_exit(f: &Function, cfg: &Cfg) -> Result<usize, AnalysisError> {
    let exits = cfg.exits(f);
    match exits.as_slice() {
        [x] => Ok(*x),
        [] => Err(AnalysisError::NoReturn),
        many => Err(AnalysisError::MultipleReturns(
            many.iter().map(|&i| cfg.labels[i].clone()).collect(),
        )),
    }
}

pub fn compute_postdominators(f: &Function) -> Result<DomTree, AnalysisError> {
    let cfg = Cfg::new(f)?;
    postdominators_of(f, &cfg)
}

pub(crate) fn postdominators_of(f: &Function, cfg: &Cfg) -> Result<DomTree, AnalysisError> {
    require_reachable(f, cfg)?;
    let exit = single_exit(f, cfg)?;
    let seen = reachable(&cfg.preds, exit);
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(AnalysisError::NoPathToExit(cfg.labels[i].clone()));
    }
    let idom = immediate_dominators(&cfg.preds, &cfg.succs, exit);
    Ok(DomTree::build(cfg.labels.clone(), exit, idom))
}

/// Dominance frontier of every node, for a tree built over `preds`-direction edges.
pub fn dominance_frontiers(dt: &DomTree, preds: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = dt.idom.len();
    let mut df: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (b, ps) in preds.iter().enumerate().take(n) {
        if ps.len() < 2 {
            continue;
        }
        let Some(ib) = dt.idom[b] else { continue };
        for &p in ps {
            if dt.depth[p] == usize::MAX && p != dt.root {
                continue;
            }
            let mut runner = p;
            while runner != ib {
                if !df[runner].contains(&b) {
                    df[runner].push(b);
                }
                match dt.idom[runner] {
                    Some(r) => runner = r,
                    None => break,
                }
            }
        }
    }
    df
}

/// Iterated dominance frontier of a node set.
pub fn iterated_frontier(df: &[Vec<usize>], seeds: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut work: Vec<usize> = seeds.to_vec();
    while let Some(x) = work.pop() {
        for &y in &df[x] {
            if !out.contains(&y) {
                out.push(y);
                work.push(y);
            }
        }
    }
    out.sort_unstable();
    out
}
