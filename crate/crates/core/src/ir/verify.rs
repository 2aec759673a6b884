use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::{Function, Module, Operand};
use crate::analysis::cfg::reachable;
use crate::analysis::dom::immediate_dominators;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    DuplicateLabel,
    UnknownTarget,
    EntryHasPredecessors,
    Unreachable,
    MultipleDefinition,
    UndefinedValue,
    PhiMismatch,
    NotDominated,
    UnknownMemory,
    DuplicateFunction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// The offending value (or label, for CFG-level problems).
    pub value: String,
    pub block: String,
    /// Result of the instruction holding the bad use, when it has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub user: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "^{}: {}", self.block, self.message)
    }
}

struct Checker<'a> {
    f: &'a Function,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn push(
        &mut self,
        kind: ViolationKind,
        value: &str,
        block: &str,
        user: Option<&str>,
        message: String,
    ) {
        self.out.push(Violation {
            kind,
            value: value.to_string(),
            block: block.to_string(),
            user: user.map(str::to_string),
            message,
        });
    }
}

/// Check the structural and SSA invariants of a function.
pub fn verify_ssa(f: &Function) -> Vec<Violation> {
    let mut ck = Checker { f, out: Vec::new() };
    let n = f.blocks.len();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, b) in f.blocks.iter().enumerate() {
        if index.insert(b.label.as_str(), i).is_some() {
            ck.push(
                ViolationKind::DuplicateLabel,
                &b.label,
                &b.label,
                None,
                format!("label ^{} defined twice", b.label),
            );
        }
    }

    let mut succs = vec![Vec::new(); n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, b) in f.blocks.iter().enumerate() {
        for s in b.term.successors() {
            match index.get(s) {
                Some(&j) => {
                    if !succs[i].contains(&j) {
                        succs[i].push(j);
                        preds[j].push(i);
                    }
                }
                None => ck.push(
                    ViolationKind::UnknownTarget,
                    s,
                    &b.label,
                    None,
                    format!("branch to unknown block ^{s}"),
                ),
            }
        }
    }
    if n == 0 {
        return ck.out;
    }
    if !preds[0].is_empty() {
        let l = &f.blocks[0].label;
        ck.push(
            ViolationKind::EntryHasPredecessors,
            l,
            l,
            None,
            format!("entry block ^{l} has predecessors"),
        );
    }
    let live = reachable(&succs, 0);
    for (i, b) in f.blocks.iter().enumerate() {
        if !live[i] {
            ck.push(
                ViolationKind::Unreachable,
                &b.label,
                &b.label,
                None,
                format!("block ^{} is unreachable", b.label),
            );
        }
    }

    // (block, position) of each definition; phis sit at position 0, instruction k at k + 1.
    let mut defs: HashMap<&str, (usize, usize)> = HashMap::new();
    let params: HashSet<&str> = f.params.iter().map(String::as_str).collect();
    let mut seen_params = HashSet::new();
    for p in &f.params {
        if !seen_params.insert(p.as_str()) {
            ck.push(
                ViolationKind::MultipleDefinition,
                p,
                &f.blocks[0].label,
                None,
                format!("parameter %{p} declared twice"),
            );
        }
    }
    for (bi, b) in f.blocks.iter().enumerate() {
        let named = b.phis.iter().map(|p| (p.result.as_str(), 0)).chain(
            b.insts
                .iter()
                .enumerate()
                .filter_map(|(k, i)| i.result.as_deref().map(|r| (r, k + 1))),
        );
        for (name, pos) in named {
            if params.contains(name) || defs.insert(name, (bi, pos)).is_some() {
                ck.push(
                    ViolationKind::MultipleDefinition,
                    name,
                    &b.label,
                    None,
                    format!("%{name} is defined more than once"),
                );
            }
        }
    }

    let idom = immediate_dominators(&succs, &preds, 0);
    let dominates = |a: usize, mut b: usize| loop {
        if a == b {
            return true;
        }
        match idom[b] {
            Some(p) => b = p,
            None => return false,
        }
    };

    for (bi, b) in f.blocks.iter().enumerate() {
        if !live[bi] {
            continue;
        }
        let pred_labels: Vec<&str> = preds[bi]
            .iter()
            .map(|&p| f.blocks[p].label.as_str())
            .collect();
        for phi in &b.phis {
            for pl in &pred_labels {
                let hits = phi.incoming.iter().filter(|(_, l)| l == pl).count();
                if hits != 1 {
                    ck.push(
                        ViolationKind::PhiMismatch,
                        &phi.result,
                        &b.label,
                        Some(&phi.result),
                        format!(
                            "phi %{} has {hits} incoming values for predecessor ^{pl}",
                            phi.result
                        ),
                    );
                }
            }
            for (v, l) in &phi.incoming {
                let Some(&pi) = index.get(l.as_str()) else {
                    ck.push(
                        ViolationKind::PhiMismatch,
                        &phi.result,
                        &b.label,
                        Some(&phi.result),
                        format!("phi %{} names unknown block ^{l}", phi.result),
                    );
                    continue;
                };
                if !preds[bi].contains(&pi) {
                    ck.push(
                        ViolationKind::PhiMismatch,
                        &phi.result,
                        &b.label,
                        Some(&phi.result),
                        format!(
                            "phi %{} has an incoming value from non-predecessor ^{l}",
                            phi.result
                        ),
                    );
                    continue;
                }
                if let Operand::Value(name) = v {
                    if params.contains(name.as_str()) {
                        continue;
                    }
                    match defs.get(name.as_str()) {
                        None => ck.push(
                            ViolationKind::UndefinedValue,
                            name,
                            &b.label,
                            Some(&phi.result),
                            format!("%{name} is used but never defined"),
                        ),
                        Some(&(db, _)) => {
                            if live[pi] && !dominates(db, pi) {
                                ck.push(
                                    ViolationKind::NotDominated,
                                    name,
                                    &b.label,
                                    Some(&phi.result),
                                    format!(
                                        "%{name} does not dominate the edge ^{l} -> ^{} used by %{}",
                                        b.label, phi.result
                                    ),
                                );
                            }
                        }
                    }
                }
            }
        }

        let uses = b
            .insts
            .iter()
            .enumerate()
            .flat_map(|(k, i)| i.args.iter().map(move |a| (a, k + 1, i.result.as_deref())))
            .chain(b.term.operands().into_iter().map(|a| (a, usize::MAX, None)));
        for (a, pos, user) in uses {
            let Operand::Value(name) = a else { continue };
            if params.contains(name.as_str()) {
                continue;
            }
            let ok = match defs.get(name.as_str()) {
                None => {
                    ck.push(
                        ViolationKind::UndefinedValue,
                        name,
                        &b.label,
                        user,
                        format!("%{name} is used but never defined"),
                    );
                    continue;
                }
                Some(&(db, dpos)) => {
                    if db == bi {
                        dpos < pos
                    } else {
                        dominates(db, bi)
                    }
                }
            };
            if !ok {
                let who = user.map(|u| format!(" by %{u}")).unwrap_or_default();
                ck.push(
                    ViolationKind::NotDominated,
                    name,
                    &b.label,
                    user,
                    format!("definition of %{name} does not dominate its use{who}"),
                );
            }
        }
    }
    ck.out.sort_by_key(|v| {
        (
            ck.f.block_index(&v.block).unwrap_or(usize::MAX),
            v.kind as u8,
        )
    });
    ck.out
}

/// Per-function checks plus module-level uniqueness and memory references.
pub fn verify_module(m: &Module) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut names = HashSet::new();
    for f in &m.functions {
        if !names.insert(f.name.as_str()) {
            out.push(Violation {
                kind: ViolationKind::DuplicateFunction,
                value: f.name.clone(),
                block: f
                    .blocks
                    .first()
                    .map(|b| b.label.clone())
                    .unwrap_or_default(),
                user: None,
                message: format!("function {} defined twice", f.name),
            });
        }
        out.extend(verify_ssa(f));
        for b in &f.blocks {
            for i in &b.insts {
                if let Some(g) = &i.mem {
                    if m.global(g).is_none() {
                        out.push(Violation {
                            kind: ViolationKind::UnknownMemory,
                            value: g.clone(),
                            block: b.label.clone(),
                            user: i.result.clone(),
                            message: format!("unknown global array {g}"),
                        });
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_function;

    #[test]
    fn clean_function() {
        let f = parse_function(
            "fn f(%c) {\n^e:\n %a = add %c 1\n condbr %c ^l ^r\n^l:\n br ^j\n^r:\n %b = mul %a 2\n br ^j\n^j:\n %p = phi %a:^l, %b:^r\n ret %p\n}",
        )
        .unwrap();
        assert_eq!(verify_ssa(&f), vec![]);
    }

    #[test]
    fn use_outside_dominated_region() {
        // %a is defined on the false side and used after the merge point.
        let f = parse_function(
            "fn f(%c) {\n^e:\n condbr %c ^t ^fa\n^t:\n br ^j\n^fa:\n %a = add %c 1\n br ^j\n^j:\n %x = mul %a 2\n ret %x\n}",
        )
        .unwrap();
        let v = verify_ssa(&f);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].kind, ViolationKind::NotDominated);
        assert_eq!(v[0].value, "a");
        assert_eq!(v[0].user.as_deref(), Some("x"));
        assert_eq!(v[0].block, "j");
    }

    #[test]
    fn phi_problems() {
        let f = parse_function(
            "fn f(%c) {\n^e:\n condbr %c ^l ^r\n^l:\n br ^j\n^r:\n br ^j\n^j:\n %p = phi 1:^l\n ret %p\n}",
        )
        .unwrap();
        let v = verify_ssa(&f);
        assert!(v
            .iter()
            .any(|x| x.kind == ViolationKind::PhiMismatch && x.value == "p"));
    }

    #[test]
    fn same_block_order() {
        let f = parse_function("fn f() {\n^e:\n %x = add %y 1\n %y = add 2 3\n ret %x\n}").unwrap();
        let v = verify_ssa(&f);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].value, "y");
    }
}
