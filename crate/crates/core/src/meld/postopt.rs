use std::collections::{HashMap, HashSet};

use crate::analysis::cfg::reachable;
use crate::analysis::dom::immediate_dominators;
use crate::ir::{Function, Opcode, Operand, Terminator};

/// Cleanup applied after every rewrite, repeated until nothing changes:
/// constant and same-target branches become jumps, unreachable blocks go away,
/// trivial phis and selects fold, identical phis merge, empty forwarding
/// blocks are bypassed, straight-line block chains merge, and dead pure code
/// is deleted. Returns whether anything changed.
pub fn post_optimize(f: &mut Function) -> bool {
    let mut any = false;
    loop {
        let changed = fold_branches(f)
            | remove_unreachable(f)
            | fold_phis(f)
            | fold_selects(f)
            | forward_empty_blocks(f)
            | merge_chains(f)
            | dead_code(f);
        if !changed {
            return any;
        }
        any = true;
    }
}

fn fold_branches(f: &mut Function) -> bool {
    let mut changed = false;
    for b in &mut f.blocks {
        if let Terminator::CondBr {
            cond,
            then_to,
            else_to,
        } = &b.term
        {
            let target = if then_to == else_to {
                Some(then_to.clone())
            } else {
                match cond {
                    Operand::Imm(0) => Some(else_to.clone()),
                    Operand::Imm(_) => Some(then_to.clone()),
                    _ => None,
                }
            };
            if let Some(t) = target {
                b.term = Terminator::Br(t);
                changed = true;
            }
        }
    }
    changed
}

fn index_of(f: &Function) -> HashMap<String, usize> {
    f.blocks
        .iter()
        .enumerate()
        .map(|(i, b)| (b.label.clone(), i))
        .collect()
}

fn succ_graph(f: &Function) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let idx = index_of(f);
    let n = f.blocks.len();
    let mut succs = vec![Vec::new(); n];
    let mut preds = vec![Vec::new(); n];
    for (i, b) in f.blocks.iter().enumerate() {
        for s in b.term.successors() {
            if let Some(&j) = idx.get(s) {
                if !succs[i].contains(&j) {
                    succs[i].push(j);
                    preds[j].push(i);
                }
            }
        }
    }
    (succs, preds)
}

/// Drop phi entries whose predecessor no longer branches to the block.
fn prune_phi_entries(f: &mut Function) {
    let preds: HashMap<String, HashSet<String>> = f
        .blocks
        .iter()
        .map(|b| (b.label.clone(), f.preds(&b.label).into_iter().collect()))
        .collect();
    for b in &mut f.blocks {
        let ps = &preds[&b.label];
        for p in &mut b.phis {
            p.incoming.retain(|(_, l)| ps.contains(l));
        }
    }
}

fn remove_unreachable(f: &mut Function) -> bool {
    let (succs, _) = succ_graph(f);
    let live = reachable(&succs, 0);
    if live.iter().all(|&l| l) {
        return false;
    }
    let mut i = 0;
    f.blocks.retain(|_| {
        let keep = live[i];
        i += 1;
        keep
    });
    prune_phi_entries(f);
    true
}

fn dominance(f: &Function) -> Vec<Option<usize>> {
    let (succs, preds) = succ_graph(f);
    immediate_dominators(&succs, &preds, 0)
}

fn fold_phis(f: &mut Function) -> bool {
    let idom = dominance(f);
    let dominates = |a: usize, mut b: usize| loop {
        if a == b {
            return true;
        }
        match idom[b] {
            Some(p) => b = p,
            None => return false,
        }
    };
    let mut def_block: HashMap<String, usize> = HashMap::new();
    for (i, b) in f.blocks.iter().enumerate() {
        for d in b.defs() {
            def_block.insert(d.to_string(), i);
        }
    }
    // The replacement must be available wherever the phi was.
    let available = |v: &Operand, at: usize| match v {
        Operand::Value(name) => match def_block.get(name) {
            Some(&db) => db != at && dominates(db, at),
            None => true,
        },
        _ => true,
    };

    let mut subst: HashMap<String, Operand> = HashMap::new();
    let mut drop: HashSet<String> = HashSet::new();
    for (bi, b) in f.blocks.iter().enumerate() {
        let mut seen: Vec<(Vec<(Operand, String)>, String)> = Vec::new();
        for p in &b.phis {
            let own = Operand::value(p.result.clone());
            let distinct: Vec<&Operand> = {
                let mut d: Vec<&Operand> = Vec::new();
                for (v, _) in &p.incoming {
                    if *v != own && !d.contains(&v) {
                        d.push(v);
                    }
                }
                d
            };
            let replacement = match distinct.as_slice() {
                [] => Some(Operand::Undef),
                [v] => Some((*v).clone()),
                [a, Operand::Undef] | [Operand::Undef, a] => Some((*a).clone()),
                _ => None,
            };
            if let Some(r) = replacement {
                if r == Operand::Undef || available(&r, bi) {
                    subst.insert(p.result.clone(), r);
                    drop.insert(p.result.clone());
                    continue;
                }
            }
            let mut key = p.incoming.clone();
            key.sort_by(|a, b| a.1.cmp(&b.1));
            if let Some((_, first)) = seen.iter().find(|(k, _)| *k == key) {
                subst.insert(p.result.clone(), Operand::value(first.clone()));
                drop.insert(p.result.clone());
            } else {
                seen.push((key, p.result.clone()));
            }
        }
    }
    if drop.is_empty() {
        return false;
    }
    // Chains such as a -> b -> c must resolve fully.
    let resolve = |mut o: Operand| {
        for _ in 0..subst.len() + 1 {
            match &o {
                Operand::Value(v) => match subst.get(v) {
                    Some(n) => o = n.clone(),
                    None => break,
                },
                _ => break,
            }
        }
        o
    };
    let full: HashMap<String, Operand> = subst
        .keys()
        .map(|k| (k.clone(), resolve(Operand::value(k.clone()))))
        .collect();
    for b in &mut f.blocks {
        b.phis.retain(|p| !drop.contains(&p.result));
    }
    f.substitute_uses(&full);
    true
}

fn fold_selects(f: &mut Function) -> bool {
    let mut subst: HashMap<String, Operand> = HashMap::new();
    for b in &mut f.blocks {
        b.insts.retain(|i| {
            if i.opcode != Opcode::Select {
                return true;
            }
            let pick = match (&i.args[0], &i.args[1], &i.args[2]) {
                (_, a, b) if a == b => Some(a.clone()),
                (Operand::Imm(0), _, b) => Some(b.clone()),
                (Operand::Imm(_), a, _) => Some(a.clone()),
                _ => None,
            };
            match (pick, &i.result) {
                (Some(p), Some(r)) => {
                    subst.insert(r.clone(), p);
                    false
                }
                _ => true,
            }
        });
    }
    if subst.is_empty() {
        return false;
    }
    f.substitute_uses(&subst);
    true
}

/// Bypass blocks that hold nothing but `br S`, provided every predecessor can
/// branch to `S` without giving one of `S`'s phis two different values.
fn forward_empty_blocks(f: &mut Function) -> bool {
    for bi in 1..f.blocks.len() {
        let b = &f.blocks[bi];
        let Terminator::Br(s) = &b.term else { continue };
        if !b.phis.is_empty() || !b.insts.is_empty() || *s == b.label {
            continue;
        }
        let (label, s) = (b.label.clone(), s.clone());
        let preds = f.preds(&label);
        if preds.is_empty() {
            continue;
        }
        let target = f.block(&s).expect("branch target exists");
        let s_preds = f.preds(&s);
        let ok = target.phis.iter().all(|p| {
            let via = p.incoming_from(&label).cloned().unwrap_or(Operand::Undef);
            preds
                .iter()
                .all(|q| !s_preds.contains(q) || p.incoming_from(q) == Some(&via))
        });
        if !ok {
            continue;
        }
        for q in &preds {
            let qb = f.block_mut(q).expect("pred exists");
            qb.term.retarget(&label, &s);
        }
        let tb = f.block_mut(&s).expect("target exists");
        for p in &mut tb.phis {
            let via = p.incoming_from(&label).cloned().unwrap_or(Operand::Undef);
            p.incoming.retain(|(_, l)| *l != label);
            for q in &preds {
                if p.incoming_from(q).is_none() {
                    p.incoming.push((via.clone(), q.clone()));
                }
            }
        }
        f.blocks.remove(bi);
        return true;
    }
    false
}

/// Merge `B` into `A` when `A: br B` is `B`'s only incoming edge.
fn merge_chains(f: &mut Function) -> bool {
    for ai in 0..f.blocks.len() {
        let Terminator::Br(bl) = &f.blocks[ai].term else {
            continue;
        };
        let bl = bl.clone();
        if bl == f.blocks[ai].label || bl == f.blocks[0].label {
            continue;
        }
        let bi = f.block_index(&bl).expect("target exists");
        if !f.blocks[bi].phis.is_empty() || f.preds(&bl).len() != 1 {
            continue;
        }
        let a_label = f.blocks[ai].label.clone();
        let b = f.blocks.remove(bi);
        let ai = f.block_index(&a_label).expect("a exists");
        f.blocks[ai].insts.extend(b.insts);
        f.blocks[ai].term = b.term;
        for s in f.blocks[ai].succ_labels() {
            f.rename_phi_pred(&s, &bl, &a_label);
        }
        return true;
    }
    false
}

fn dead_code(f: &mut Function) -> bool {
    let mut changed = false;
    loop {
        let mut uses: HashMap<String, usize> = HashMap::new();
        for b in &f.blocks {
            for p in &b.phis {
                for (v, _) in &p.incoming {
                    if let Some(n) = v.as_value() {
                        if n != p.result {
                            *uses.entry(n.to_string()).or_insert(0) += 1;
                        }
                    }
                }
            }
            for i in &b.insts {
                for a in &i.args {
                    if let Some(n) = a.as_value() {
                        *uses.entry(n.to_string()).or_insert(0) += 1;
                    }
                }
            }
            for a in b.term.operands() {
                if let Some(n) = a.as_value() {
                    *uses.entry(n.to_string()).or_insert(0) += 1;
                }
            }
        }
        let live = |n: &str| uses.get(n).copied().unwrap_or(0) > 0;
        let mut removed = false;
        for b in &mut f.blocks {
            let before = b.phis.len() + b.insts.len();
            b.phis.retain(|p| live(&p.result));
            b.insts
                .retain(|i| !i.opcode.is_pure() || i.result.as_deref().is_none_or(live));
            removed |= b.phis.len() + b.insts.len() != before;
        }
        if !removed {
            return changed;
        }
        changed = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse_function, print_function, verify_ssa};

    #[test]
    fn minimal_function_is_untouched() {
        let mut f = parse_function("fn f(%a) {\n^e:\n %x = add %a 1\n ret %x\n}").unwrap();
        let before = f.clone();
        assert!(!post_optimize(&mut f));
        assert_eq!(f, before);
    }

    #[test]
    fn same_target_condbr_collapses() {
        let mut f =
            parse_function("fn f(%c) {\n^e:\n %x = add %c 1\n condbr %c ^x ^x\n^x:\n ret %x\n}")
                .unwrap();
        post_optimize(&mut f);
        assert_eq!(f.blocks.len(), 1);
        assert_eq!(f.blocks[0].term, Terminator::Ret(Some(Operand::value("x"))));
    }

    #[test]
    fn forwarding_respects_phis() {
        let src = "fn f(%c) {\n^e:\n condbr %c ^a ^b\n^a:\n br ^j\n^b:\n br ^j\n^j:\n %p = phi 1:^a, 2:^b\n ret %p\n}";
        let mut f = parse_function(src).unwrap();
        post_optimize(&mut f);
        // only one arm can be bypassed; the other keeps the phi inputs apart
        assert_eq!(f.blocks.len(), 3, "{}", print_function(&f));
        assert!(verify_ssa(&f).is_empty());
    }

    #[test]
    fn undef_phi_folds_only_when_dominated() {
        let src = "fn f(%c) {\n^e:\n %a = add %c 1\n condbr %c ^l ^r\n^l:\n %b = add %c 2\n br ^j\n^r:\n br ^j\n^j:\n %p = phi %a:^l, undef:^r\n %q = phi %b:^l, undef:^r\n store.shared %p %q\n ret\n}";
        let mut f = parse_function(src).unwrap();
        post_optimize(&mut f);
        let j = f.blocks.last().unwrap();
        assert_eq!(j.phis.len(), 1);
        assert_eq!(j.insts[0].args[0], Operand::value("a"));
        assert!(verify_ssa(&f).is_empty());
    }

    #[test]
    fn idempotent() {
        let src = "fn f(%c) {\n^e:\n condbr 1 ^a ^b\n^a:\n %s = select %c 4 4\n br ^j\n^b:\n br ^j\n^j:\n %p = phi %s:^a, %s:^b\n ret %p\n}";
        let mut f = parse_function(src).unwrap();
        post_optimize(&mut f);
        let once = f.clone();
        assert!(!post_optimize(&mut f));
        assert_eq!(f, once);
        assert_eq!(f.blocks.len(), 1);
        assert_eq!(f.blocks[0].term, Terminator::Ret(Some(Operand::Imm(4))));
    }
}
