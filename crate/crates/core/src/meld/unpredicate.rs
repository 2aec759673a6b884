use crate::ir::{Block, Function, NameGen, Operand, Terminator};

use super::codegen::{InstTag, MeldOutcome};
use super::ssa_repair::repair_all;
use super::MeldError;

/// Move every maximal run of one-sided instructions in the melded blocks into
/// its own block, entered only by lanes of that side. Returns the number of
/// runs moved.
pub fn unpredicate(
    f: &mut Function,
    outcome: &MeldOutcome,
    cond: &Operand,
    ng: &mut NameGen,
) -> Result<usize, MeldError> {
    let mut runs = 0;
    for (label, tags) in &outcome.blocks {
        let mut cur = label.clone();
        let mut tags = tags.clone();
        while let Some(start) = tags.iter().position(|t| *t != InstTag::Melded) {
            let side = tags[start];
            let end = tags[start..]
                .iter()
                .position(|t| *t != side)
                .map_or(tags.len(), |n| start + n);

            let split = ng.fresh(&format!(
                "{cur}.{}",
                if side == InstTag::TrueOnly { "t" } else { "f" }
            ));
            let tail = ng.fresh(&format!("{cur}.c"));
            let b = f.block_mut(&cur).expect("melded block exists");
            let rest = b.insts.split_off(end);
            let run = b.insts.split_off(start);
            let term = std::mem::replace(
                &mut b.term,
                if side == InstTag::TrueOnly {
                    Terminator::CondBr {
                        cond: cond.clone(),
                        then_to: split.clone(),
                        else_to: tail.clone(),
                    }
                } else {
                    Terminator::CondBr {
                        cond: cond.clone(),
                        then_to: tail.clone(),
                        else_to: split.clone(),
                    }
                },
            );
            let succs: Vec<String> = term.successors().into_iter().map(str::to_string).collect();
            let mut sb = Block::new(split.clone(), Terminator::Br(tail.clone()));
            sb.insts = run;
            let mut tb = Block::new(tail.clone(), term);
            tb.insts = rest;
            let at = f.block_index(&cur).expect("melded block exists");
            f.blocks.insert(at + 1, sb);
            f.blocks.insert(at + 2, tb);
            for s in succs {
                f.rename_phi_pred(&s, &cur, &tail);
            }
            runs += 1;
            tags = tags.split_off(end);
            cur = tail;
        }
    }
    repair_all(f, ng)?;
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse_function, verify_ssa, Opcode};

    #[test]
    fn runs_become_guarded_blocks() {
        let src = "fn f() {\n^e:\n %t = tid\n %c = icmp.lt %t 4\n br ^m\n^m:\n %a = add %t 1\n %b = mul %a 2\n %d = sub %t 3\n %g = add %b %d\n br ^x\n^x:\n %r = phi %g:^m\n ret %r\n}";
        let mut f = parse_function(src).unwrap();
        let mut ng = NameGen::for_function(&f);
        let outcome = MeldOutcome {
            blocks: vec![(
                "m".into(),
                vec![
                    InstTag::Melded,
                    InstTag::TrueOnly,
                    InstTag::FalseOnly,
                    InstTag::Melded,
                ],
            )],
            selects: 0,
            entry: "m".into(),
            exit: "m".into(),
            true_exit: "m".into(),
            false_exit: "m".into(),
        };
        let n = unpredicate(&mut f, &outcome, &Operand::value("c"), &mut ng).unwrap();
        assert_eq!(n, 2);
        assert!(verify_ssa(&f).is_empty(), "{:?}", verify_ssa(&f));
        assert_eq!(f.block("m.t").unwrap().insts[0].opcode, Opcode::Mul);
        assert_eq!(f.block("m.c.f").unwrap().insts[0].opcode, Opcode::Sub);
        assert_eq!(f.block("x").unwrap().phis[0].incoming[0].1, "m.c.c");
        // %b and %d now reach their use through phis
        let last = f.block("m.c.c").unwrap();
        assert_eq!(last.phis.len(), 1);
        assert_eq!(f.block("m.c").unwrap().phis.len(), 1);
    }
}
