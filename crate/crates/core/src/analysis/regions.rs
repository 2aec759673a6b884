use serde::Serialize;

use super::dom::DomTree;
use super::Cfg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionKind {
    Simple,
    NonSimple,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Region {
    pub entry: usize,
    pub exit: usize,
    /// Blocks reachable from `entry` without passing through `exit`, sorted.
    pub blocks: Vec<usize>,
    pub kind: RegionKind,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

impl Region {
    pub fn contains(&self, b: usize) -> bool {
        self.blocks.binary_search(&b).is_ok()
    }

    /// Edges from outside the body into the entry.
    pub fn entry_edges(&self, cfg: &Cfg) -> Vec<(usize, usize)> {
        cfg.preds[self.entry]
            .iter()
            .filter(|p| !self.contains(**p))
            .map(|&p| (p, self.entry))
            .collect()
    }

    /// Edges from the body to the exit.
    pub fn exit_edges(&self, cfg: &Cfg) -> Vec<(usize, usize)> {
        cfg.preds[self.exit]
            .iter()
            .filter(|p| self.contains(**p))
            .map(|&p| (p, self.exit))
            .collect()
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RegionTree {
    pub regions: Vec<Region>,
    /// Outermost regions.
    pub top: Vec<usize>,
    /// Innermost region holding each block, if any.
    pub innermost: Vec<Option<usize>>,
}

impl RegionTree {
    pub fn region_at(&self, entry: usize) -> Option<&Region> {
        self.regions.iter().find(|r| r.entry == entry)
    }
}

/// Blocks reachable from `entry` without entering `exit`.
pub fn region_body(cfg: &Cfg, entry: usize, exit: usize) -> Vec<usize> {
    let mut seen = vec![false; cfg.len()];
    let mut stack = vec![entry];
    seen[entry] = true;
    while let Some(v) = stack.pop() {
        for &w in &cfg.succs[v] {
            if w != exit && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    (0..cfg.len()).filter(|&v| seen[v]).collect()
}

/// Whether `(entry, exit)` with the given body satisfies the region definition:
/// every body block dominated by the entry and post-dominated by the exit, the
/// body is entered only at the entry and left only towards the exit.
pub fn is_region(
    cfg: &Cfg,
    dom: &DomTree,
    pdom: &DomTree,
    entry: usize,
    exit: usize,
    body: &[usize],
) -> bool {
    if entry == exit || body.contains(&exit) {
        return false;
    }
    let inside = |b: usize| body.binary_search(&b).is_ok();
    body.iter().all(|&b| {
        dom.dominates(entry, b)
            && pdom.dominates(exit, b)
            && cfg.succs[b].iter().all(|&s| inside(s) || s == exit)
            && (b == entry || cfg.preds[b].iter().all(|&p| inside(p)))
    })
}

/// For every branching block, the smallest region it heads, nested by containment.
pub fn compute_regions(cfg: &Cfg, dom: &DomTree, pdom: &DomTree) -> RegionTree {
    let mut regions: Vec<Region> = Vec::new();
    for e in 0..cfg.len() {
        if cfg.succs[e].len() < 2 {
            continue;
        }
        let mut cur = pdom.parent(e);
        while let Some(x) = cur {
            let body = region_body(cfg, e, x);
            if is_region(cfg, dom, pdom, e, x, &body) {
                let mut r = Region {
                    entry: e,
                    exit: x,
                    blocks: body,
                    kind: RegionKind::Simple,
                    parent: None,
                    children: Vec::new(),
                };
                if r.entry_edges(cfg).len() != 1 || r.exit_edges(cfg).len() != 1 {
                    r.kind = RegionKind::NonSimple;
                }
                regions.push(r);
                break;
            }
            cur = pdom.parent(x);
        }
    }
    let n = regions.len();
    for i in 0..n {
        let parent = (0..n)
            .filter(|&j| {
                j != i
                    && regions[j].blocks.len() > regions[i].blocks.len()
                    && regions[i].blocks.iter().all(|&b| regions[j].contains(b))
            })
            .min_by_key(|&j| regions[j].blocks.len());
        regions[i].parent = parent;
        if let Some(p) = parent {
            regions[p].children.push(i);
        }
    }
    let top = (0..n).filter(|&i| regions[i].parent.is_none()).collect();
    let innermost = (0..cfg.len())
        .map(|b| {
            (0..n)
                .filter(|&i| regions[i].contains(b))
                .min_by_key(|&i| regions[i].blocks.len())
        })
        .collect();
    RegionTree {
        regions,
        top,
        innermost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::dom::{dominators_of, postdominators_of};
    use crate::ir::parse_function;

    fn tree(src: &str) -> (Cfg, RegionTree) {
        let f = parse_function(src).unwrap();
        let cfg = Cfg::new(&f).unwrap();
        let d = dominators_of(&f, &cfg).unwrap();
        let p = postdominators_of(&f, &cfg).unwrap();
        let t = compute_regions(&cfg, &d, &p);
        (cfg, t)
    }

    #[test]
    fn diamond_is_one_region() {
        let (cfg, t) = tree("fn f(%c) { a: condbr %c ^b ^c b: br ^d c: br ^d d: ret }");
        assert_eq!(t.regions.len(), 1);
        let r = &t.regions[0];
        assert_eq!((cfg.label(r.entry), cfg.label(r.exit)), ("a", "d"));
        assert_eq!(r.kind, RegionKind::NonSimple);
        assert_eq!(r.blocks, vec![0, 1, 2]);
    }

    #[test]
    fn nested_if_then() {
        let (cfg, t) = tree(
            "fn f(%c) { s: br ^a a: condbr %c ^b ^e b: condbr %c ^c ^d c: br ^d d: br ^e e: br ^z z: ret }",
        );
        assert_eq!(t.regions.len(), 2);
        let outer = t.region_at(cfg.idx("a").unwrap()).unwrap();
        let inner = t.region_at(cfg.idx("b").unwrap()).unwrap();
        assert_eq!(cfg.label(outer.exit), "e");
        assert_eq!(cfg.label(inner.exit), "d");
        // two edges reach ^d, so the if-then is not simple
        assert_eq!(inner.kind, RegionKind::NonSimple);
        assert_eq!(inner.parent, Some(0));
        assert_eq!(t.innermost[cfg.idx("c").unwrap()], Some(1));
    }
}
