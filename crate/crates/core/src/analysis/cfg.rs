use std::collections::HashMap;

use crate::ir::{Function, Terminator};

use super::AnalysisError;

/// Index-based view of a function's control-flow graph.
#[derive(Debug, Clone)]
pub struct Cfg {
    pub labels: Vec<String>,
    /// Distinct successors, in role order.
    pub succs: Vec<Vec<usize>>,
    /// Distinct predecessors, in block order.
    pub preds: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
}

impl Cfg {
    pub fn new(f: &Function) -> Result<Cfg, AnalysisError> {
        let labels: Vec<String> = f.blocks.iter().map(|b| b.label.clone()).collect();
        let index: HashMap<String, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        let n = labels.len();
        let mut succs = vec![Vec::new(); n];
        let mut preds = vec![Vec::new(); n];
        for (i, b) in f.blocks.iter().enumerate() {
            for s in b.term.successors() {
                let j = *index.get(s).ok_or_else(|| AnalysisError::UnknownTarget {
                    block: b.label.clone(),
                    target: s.to_string(),
                })?;
                if !succs[i].contains(&j) {
                    succs[i].push(j);
                }
            }
        }
        for (i, ss) in succs.iter().enumerate() {
            for &j in ss {
                preds[j].push(i);
            }
        }
        Ok(Cfg {
            labels,
            succs,
            preds,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn idx(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    /// Blocks ending in `ret`.
    pub fn exits(&self, f: &Function) -> Vec<usize> {
        f.blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| matches!(b.term, Terminator::Ret(_)))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Reverse post-order of the nodes reachable from `root`.
pub fn reverse_postorder(succs: &[Vec<usize>], root: usize) -> Vec<usize> {
    let n = succs.len();
    let mut seen = vec![false; n];
    let mut post = Vec::with_capacity(n);
    let mut stack = vec![(root, 0usize)];
    seen[root] = true;
    while let Some(&mut (v, ref mut k)) = stack.last_mut() {
        if *k < succs[v].len() {
            let w = succs[v][*k];
            *k += 1;
            if !seen[w] {
                seen[w] = true;
                stack.push((w, 0));
            }
        } else {
            post.push(v);
            stack.pop();
        }
    }
    post.reverse();
    post
}

pub fn reachable(succs: &[Vec<usize>], root: usize) -> Vec<bool> {
    let mut seen = vec![false; succs.len()];
    for v in reverse_postorder(succs, root) {
        seen[v] = true;
    }
    seen
}
