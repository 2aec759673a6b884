#![allow(dead_code)]

pub mod brute;
pub mod kernels;

use proptest::prelude::*;
use simtmeld::ir::{
    Block, CmpPred, Function, Inst, MemDecl, Module, Opcode, Operand, Phi, Terminator,
};

/// Successor lists of a CFG whose last node is the only exit. Node `i` always
/// reaches `i + 1`, so every node is reachable and reaches the exit; a second
/// random edge adds forward jumps and back edges.
pub fn shape(max_blocks: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
    (2..=max_blocks).prop_flat_map(|n| {
        proptest::collection::vec((any::<bool>(), 1..n, any::<bool>()), n - 1).prop_map(
            move |extra| {
                let mut succs: Vec<Vec<usize>> = extra
                    .iter()
                    .enumerate()
                    .map(|(i, &(two, t, swap))| {
                        let mut s = vec![i + 1];
                        if two && t != i + 1 {
                            s.push(t);
                            if swap {
                                s.reverse();
                            }
                        }
                        s
                    })
                    .collect();
                succs.push(Vec::new());
                succs
            },
        )
    })
}

/// Arbitrary directed graph on up to `max` nodes, node 0 the root.
pub fn digraph(max: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
    (1..=max)
        .prop_flat_map(|n| proptest::collection::vec(proptest::collection::vec(0..n, 0..=3), n))
        .prop_map(|mut g| {
            for s in &mut g {
                s.sort_unstable();
                s.dedup();
            }
            g
        })
}

pub fn preds_of(succs: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut preds = vec![Vec::new(); succs.len()];
    for (v, ss) in succs.iter().enumerate() {
        for &s in ss {
            preds[s].push(v);
        }
    }
    preds
}

/// Nodes reachable from `root` when `removed` is deleted.
pub fn reach_without(succs: &[Vec<usize>], root: usize, removed: Option<usize>) -> Vec<bool> {
    let mut seen = vec![false; succs.len()];
    if Some(root) == removed {
        return seen;
    }
    seen[root] = true;
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        for &w in &succs[v] {
            if Some(w) != removed && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// `dom[a][b]`: every path from `root` to `b` passes through `a`.
pub fn brute_dominance(succs: &[Vec<usize>], root: usize) -> Vec<Vec<bool>> {
    let n = succs.len();
    let live = reach_without(succs, root, None);
    (0..n)
        .map(|a| {
            let without = reach_without(succs, root, Some(a));
            (0..n).map(|b| live[b] && (a == b || !without[b])).collect()
        })
        .collect()
}

/// Immediate dominators from the brute-force relation: the strict dominator
/// that every other strict dominator dominates.
pub fn brute_idom(dom: &[Vec<bool>], root: usize) -> Vec<Option<usize>> {
    let n = dom.len();
    (0..n)
        .map(|b| {
            if b == root || !dom[b][b] {
                return None;
            }
            let strict: Vec<usize> = (0..n).filter(|&a| a != b && dom[a][b]).collect();
            strict
                .iter()
                .copied()
                .find(|&c| strict.iter().all(|&a| dom[a][c]))
        })
        .collect()
}

/// One generated instruction: opcode selector and two operand selectors.
pub type Recipe = (u8, u8, u8);

pub fn recipes(n_blocks: usize) -> impl Strategy<Value = Vec<Vec<Recipe>>> {
    proptest::collection::vec(proptest::collection::vec(any::<Recipe>(), 1..6), n_blocks)
}

const BINARY: &[Opcode] = &[
    Opcode::Add,
    Opcode::Sub,
    Opcode::Mul,
    Opcode::And,
    Opcode::Or,
    Opcode::Xor,
    Opcode::Icmp(CmpPred::Lt),
    Opcode::Icmp(CmpPred::Eq),
];

pub fn label(i: usize) -> String {
    format!("b{i}")
}

/// Last value defined in block `i`.
pub fn last_value(f: &Function, i: usize) -> String {
    f.blocks[i]
        .insts
        .iter()
        .rev()
        .find_map(|x| x.result.clone())
        .expect("every generated block defines a value")
}

/// A valid SSA function over `succs`. Blocks with several predecessors get a
/// phi of each predecessor's last value; instructions use parameters, the
/// block's phi and earlier values of the same block.
pub fn build(succs: &[Vec<usize>], recipes: &[Vec<Recipe>]) -> Function {
    let n = succs.len();
    let preds = preds_of(succs);
    let mut blocks = Vec::with_capacity(n);
    for i in 0..n {
        let mut pool = vec![Operand::value("p0"), Operand::value("p1")];
        let mut b = Block::new(label(i), Terminator::Ret(None));
        if preds[i].len() > 1 {
            let name = format!("m{i}");
            b.phis.push(Phi {
                result: name.clone(),
                incoming: preds[i]
                    .iter()
                    .map(|&p| (Operand::value(format!("v{p}_last")), label(p)))
                    .collect(),
            });
            pool.push(Operand::value(name));
        }
        let pick = |pool: &[Operand], k: u8| -> Operand {
            if k.is_multiple_of(5) {
                Operand::Imm(i32::from(k / 5) - 10)
            } else {
                pool[usize::from(k) % pool.len()].clone()
            }
        };
        for (k, &(op, a, c)) in recipes[i].iter().enumerate() {
            let res = format!("v{i}_{k}");
            let inst = match op % 12 {
                0 => Inst::new(Some(res.clone()), Opcode::Tid, vec![]),
                1 => Inst::new(Some(res.clone()), Opcode::LoadShared, vec![pick(&pool, a)]),
                2 => Inst::new(
                    None,
                    Opcode::StoreShared,
                    vec![pick(&pool, a), pick(&pool, c)],
                ),
                3 => Inst::new(Some(res.clone()), Opcode::LoadGlobal, vec![pick(&pool, a)])
                    .with_mem("g"),
                _ => Inst::new(
                    Some(res.clone()),
                    BINARY[usize::from(op) % BINARY.len()],
                    vec![pick(&pool, a), pick(&pool, c)],
                ),
            };
            if inst.result.is_some() {
                pool.push(Operand::value(res));
            }
            b.insts.push(inst);
        }
        // a closing copy fixes the name the successors' phis refer to
        let last = pool.last().cloned().unwrap_or(Operand::Imm(0));
        b.insts.push(Inst::new(
            Some(format!("v{i}_last")),
            Opcode::Add,
            vec![last, Operand::Imm(0)],
        ));
        b.term = match succs[i].as_slice() {
            [] => Terminator::Ret(Some(Operand::value(format!("v{i}_last")))),
            [t] => Terminator::Br(label(*t)),
            [t, e] => Terminator::CondBr {
                cond: Operand::value(format!("v{i}_last")),
                then_to: label(*t),
                else_to: label(*e),
            },
            _ => unreachable!("at most two successors"),
        };
        blocks.push(b);
    }
    Function {
        name: "gen".into(),
        params: vec!["p0".into(), "p1".into()],
        shared: vec![MemDecl {
            name: "s".into(),
            len: 16,
        }],
        blocks,
    }
}

pub fn module_of(f: Function) -> Module {
    Module {
        globals: vec![MemDecl {
            name: "g".into(),
            len: 16,
        }],
        functions: vec![f],
    }
}

pub fn function() -> impl Strategy<Value = Function> {
    shape(12).prop_flat_map(|s| {
        let n = s.len();
        recipes(n).prop_map(move |r| build(&s, &r))
    })
}

/// Regions of a single-exit CFG straight from the definition: for every
/// branch, the nearest post-dominator `x` such that the blocks reachable
/// without passing `x` are dominated by the entry, post-dominated by `x`,
/// entered only at the entry and left only towards `x`. Sorted tuples of
/// `(entry, exit, body, simple)`.
pub fn brute_regions(s: &[Vec<usize>]) -> Vec<(usize, usize, Vec<usize>, bool)> {
    let n = s.len();
    let preds = preds_of(s);
    let dom = brute_dominance(s, 0);
    let pdom = brute_dominance(&preds, n - 1);
    let pidom = brute_idom(&pdom, n - 1);
    let mut out = Vec::new();
    for e in (0..n).filter(|&e| s[e].len() > 1) {
        let mut cur = pidom[e];
        while let Some(x) = cur {
            let live = reach_without(s, e, Some(x));
            let body: Vec<usize> = (0..n).filter(|&b| live[b]).collect();
            let ok = body.iter().all(|&b| {
                dom[e][b]
                    && pdom[x][b]
                    && s[b].iter().all(|&t| live[t] || t == x)
                    && (b == e || preds[b].iter().all(|&p| live[p]))
            });
            if ok {
                let entries = preds[e].iter().filter(|&&p| !live[p]).count();
                let exits = body
                    .iter()
                    .map(|&b| s[b].iter().filter(|&&t| t == x).count())
                    .sum::<usize>();
                out.push((e, x, body, entries == 1 && exits == 1));
                break;
            }
            cur = pidom[x];
        }
    }
    out.sort();
    out
}
