use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::ir::{Block, Function, Inst, LatencyModel, NameGen, Opcode, Operand, Phi, Terminator};

use super::align::{align_instructions, Side, Step};
use super::ssa_repair::repair_all;
use super::subgraph::Subgraph;
use super::MeldError;

/// Where an instruction of a melded block came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstTag {
    /// Shared by both sides, or a `select` feeding such an instruction.
    Melded,
    TrueOnly,
    FalseOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MeldOutcome {
    /// Melded blocks with one tag per instruction.
    pub blocks: Vec<(String, Vec<InstTag>)>,
    pub selects: usize,
    pub entry: String,
    pub exit: String,
    /// Blocks carrying each side's original exit branch.
    pub true_exit: String,
    pub false_exit: String,
}

struct Draft {
    label: String,
    phis: Vec<Phi>,
    insts: Vec<Inst>,
    tags: Vec<InstTag>,
    /// Position in `insts` of each matched instruction with its false-side twin.
    matched: Vec<(usize, Inst)>,
}

fn side_of(pairs: &[(String, String)], side: Side) -> impl Iterator<Item = &String> {
    pairs
        .iter()
        .map(move |(t, f)| if side == Side::True { t } else { f })
}

/// Meld two isomorphic subgraphs that are the two targets of `q`'s
/// `condbr cond`. `pairs` matches their blocks, entries first. Every matched
/// instruction pair becomes one instruction whose differing operands are
/// chosen by `select cond`; unmatched instructions are kept in place and
/// tagged with their side.
#[allow(clippy::too_many_arguments)]
pub fn meld_subgraphs(
    f: &mut Function,
    q: &str,
    cond: &Operand,
    t: &Subgraph,
    fs: &Subgraph,
    pairs: &[(String, String)],
    lm: &LatencyModel,
    gap_penalty: f64,
    ng: &mut NameGen,
) -> Result<MeldOutcome, MeldError> {
    let expected = Terminator::CondBr {
        cond: cond.clone(),
        then_to: t.entry.clone(),
        else_to: fs.entry.clone(),
    };
    if f.block(q).map(|b| &b.term) != Some(&expected) {
        return Err(MeldError::invariant(format!(
            "^{q} does not branch to both subgraphs"
        )));
    }
    if pairs.first() != Some(&(t.entry.clone(), fs.entry.clone())) || pairs.len() != t.blocks.len()
    {
        return Err(MeldError::invariant(
            "block pairing does not cover the subgraphs",
        ));
    }

    let mut to_m: [HashMap<String, String>; 2] = Default::default();
    for (a, b) in pairs {
        let m = ng.fresh(&format!("{a}_{b}"));
        to_m[0].insert(a.clone(), m.clone());
        to_m[1].insert(b.clone(), m);
    }
    let bt = ng.fresh(&format!("{}.t", t.exit));
    let bf = ng.fresh(&format!("{}.f", fs.exit));
    let exits = [(&t.exit, &bt), (&fs.exit, &bf)];
    let map_target =
        |side: usize, l: &str| to_m[side].get(l).cloned().unwrap_or_else(|| l.to_string());
    let map_pred = |side: usize, l: &str| {
        if l == exits[side].0 {
            exits[side].1.clone()
        } else {
            map_target(side, l)
        }
    };

    // Pass 1: instruction order, phis and the false-to-true value map.
    let mut value_map: HashMap<String, Operand> = HashMap::new();
    let mut drafts = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let (ta, fb) = (
            f.block(a).expect("true block"),
            f.block(b).expect("false block"),
        );
        let al = align_instructions(ta, fb, lm, gap_penalty);
        let mut d = Draft {
            label: to_m[0][a].clone(),
            phis: Vec::new(),
            insts: Vec::new(),
            tags: Vec::new(),
            matched: Vec::new(),
        };
        for step in al.steps {
            match step {
                Step::Match(i, j) => {
                    let (x, y) = (&ta.insts[i], &fb.insts[j]);
                    if let (Some(rx), Some(ry)) = (&x.result, &y.result) {
                        value_map.insert(ry.clone(), Operand::value(rx.clone()));
                    }
                    d.matched.push((d.insts.len(), y.clone()));
                    d.insts.push(x.clone());
                    d.tags.push(InstTag::Melded);
                }
                Step::Gap(Side::True, i) => {
                    d.insts.push(ta.insts[i].clone());
                    d.tags.push(InstTag::TrueOnly);
                }
                Step::Gap(Side::False, j) => {
                    d.insts.push(fb.insts[j].clone());
                    d.tags.push(InstTag::FalseOnly);
                }
            }
        }
        for (side, blk) in [(0, ta), (1, fb)] {
            for p in &blk.phis {
                d.phis.push(Phi {
                    result: p.result.clone(),
                    incoming: p
                        .incoming
                        .iter()
                        .map(|(v, l)| (v.clone(), map_pred(side, l)))
                        .collect(),
                });
            }
        }
        drafts.push(d);
    }
    let mapped = |o: &Operand| match o {
        Operand::Value(v) => value_map.get(v).cloned().unwrap_or_else(|| o.clone()),
        _ => o.clone(),
    };

    // Pass 2: selects for differing operands, and terminators.
    let mut selects = 0;
    let mut melded = Vec::with_capacity(drafts.len());
    let mut select =
        |a: Operand, b: Operand, insts: &mut Vec<Inst>, tags: &mut Vec<InstTag>| -> Operand {
            let name = ng.fresh("sel");
            insts.push(Inst::new(
                Some(name.clone()),
                Opcode::Select,
                vec![cond.clone(), a, b],
            ));
            tags.push(InstTag::Melded);
            selects += 1;
            Operand::value(name)
        };
    for (d, (a, b)) in drafts.into_iter().zip(pairs) {
        let mut insts = Vec::with_capacity(d.insts.len());
        let mut tags = Vec::with_capacity(d.insts.len());
        let mut twins = d.matched.into_iter().peekable();
        for (k, (mut inst, tag)) in d.insts.into_iter().zip(d.tags).enumerate() {
            if let Some((_, twin)) = twins.next_if(|(pos, _)| *pos == k) {
                for (x, y) in inst.args.iter_mut().zip(&twin.args) {
                    let y = mapped(y);
                    if *x != y {
                        *x = select(x.clone(), y, &mut insts, &mut tags);
                    }
                }
            }
            insts.push(inst);
            tags.push(tag);
        }
        let (ta, fb) = (
            &f.block(a).expect("true block").term,
            &f.block(b).expect("false block").term,
        );
        let term = if *a == t.exit {
            Terminator::CondBr {
                cond: cond.clone(),
                then_to: bt.clone(),
                else_to: bf.clone(),
            }
        } else {
            match (ta, fb) {
                (Terminator::Br(x), Terminator::Br(_)) => Terminator::Br(map_target(0, x)),
                (
                    Terminator::CondBr {
                        cond: c1,
                        then_to,
                        else_to,
                    },
                    Terminator::CondBr { cond: c2, .. },
                ) => {
                    let c2 = mapped(c2);
                    let c = if *c1 == c2 {
                        c1.clone()
                    } else {
                        select(c1.clone(), c2, &mut insts, &mut tags)
                    };
                    Terminator::CondBr {
                        cond: c,
                        then_to: map_target(0, then_to),
                        else_to: map_target(0, else_to),
                    }
                }
                _ => {
                    return Err(MeldError::invariant(format!(
                        "^{a} and ^{b} end differently"
                    )))
                }
            }
        };
        melded.push((
            Block {
                label: d.label,
                phis: d.phis,
                insts,
                term,
            },
            tags,
        ));
    }

    // Blocks that carry each side's original way out.
    let mut exit_blocks = Vec::new();
    for (side, (orig, label)) in exits.iter().enumerate() {
        let mut term = f.block(orig).expect("exit block").term.clone();
        let outside: Vec<String> = term
            .successors()
            .into_iter()
            .filter(|s| !to_m[side].contains_key(*s))
            .map(str::to_string)
            .collect();
        for s in term.successors_mut() {
            *s = map_target(side, s);
        }
        for s in outside {
            f.rename_phi_pred(&s, orig, label);
        }
        exit_blocks.push(Block::new((*label).clone(), term));
    }

    let members: HashSet<&String> = side_of(pairs, Side::True)
        .chain(side_of(pairs, Side::False))
        .collect();
    let pos = f
        .blocks
        .iter()
        .position(|b| members.contains(&b.label))
        .expect("subgraph blocks exist");
    f.blocks.retain(|b| !members.contains(&b.label));
    let tags: Vec<(String, Vec<InstTag>)> = melded
        .iter()
        .map(|(b, t)| (b.label.clone(), t.clone()))
        .collect();
    let new_blocks: Vec<Block> = melded
        .into_iter()
        .map(|(b, _)| b)
        .chain(exit_blocks)
        .collect();
    f.blocks.splice(pos..pos, new_blocks);
    let entry = to_m[0][&t.entry].clone();
    f.block_mut(q).expect("branching block").term = Terminator::Br(entry.clone());

    // A phi only lists its own side's edges; the other side's are undefined.
    for (label, _) in &tags {
        let preds = f.preds(label);
        let b = f.block_mut(label).expect("melded block");
        for p in &mut b.phis {
            for pred in &preds {
                if p.incoming_from(pred).is_none() {
                    p.incoming.push((Operand::Undef, pred.clone()));
                }
            }
        }
    }
    f.substitute_uses(&value_map);
    repair_all(f, ng)?;

    Ok(MeldOutcome {
        blocks: tags,
        selects,
        entry,
        exit: to_m[0][&t.exit].clone(),
        true_exit: bt,
        false_exit: bf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse_function, verify_ssa};

    fn one(l: &str) -> Subgraph {
        Subgraph {
            entry: l.into(),
            exit: l.into(),
            blocks: vec![l.into()],
        }
    }

    #[test]
    fn diamond_arms_share_one_block() {
        let src = "fn f() shared s[64] {\n^e:\n %t = tid\n %c = icmp.lt %t 16\n condbr %c ^a ^b\n^a:\n %x = load.shared %t\n %y = add %x 1\n br ^j\n^b:\n %u = load.shared 5\n %v = mul %u 3\n br ^j\n^j:\n %r = phi %y:^a, %v:^b\n ret %r\n}";
        let mut f = parse_function(src).unwrap();
        let mut ng = NameGen::for_function(&f);
        let pairs = vec![("a".to_string(), "b".to_string())];
        let out = meld_subgraphs(
            &mut f,
            "e",
            &Operand::value("c"),
            &one("a"),
            &one("b"),
            &pairs,
            &LatencyModel::default(),
            -1.0,
            &mut ng,
        )
        .unwrap();
        assert!(verify_ssa(&f).is_empty(), "{:?}", verify_ssa(&f));
        assert_eq!(out.entry, "a_b");
        let m = f.block("a_b").unwrap();
        // one select for the load address
        assert_eq!(out.selects, 1);
        assert_eq!(m.insts[0].opcode, Opcode::Select);
        assert_eq!(m.insts[1].opcode, Opcode::LoadShared);
        let tags = &out.blocks[0].1;
        assert_eq!(tags.iter().filter(|t| **t == InstTag::TrueOnly).count(), 1);
        assert_eq!(tags.iter().filter(|t| **t == InstTag::FalseOnly).count(), 1);
        assert_eq!(
            f.block("j").unwrap().phis[0].incoming_from("b.f"),
            Some(&Operand::value("v"))
        );
    }
}
