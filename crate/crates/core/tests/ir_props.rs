mod common;

use proptest::prelude::*;
use simtmeld::ir::{
    block_latency, parse_module, print_module, verify_ssa, Block, Inst, LatencyModel, OpKind,
    Opcode, Operand, Terminator, ViolationKind,
};

use common::{function, label, last_value, module_of};

fn kinds_of(v: &[simtmeld::ir::Violation]) -> Vec<ViolationKind> {
    v.iter().map(|x| x.kind).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn print_parse_round_trip(f in function()) {
        let m = module_of(f);
        let text = print_module(&m);
        let back = parse_module(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(print_module(&back), text);
    }

    #[test]
    fn generated_functions_verify(f in function()) {
        prop_assert!(verify_ssa(&f).is_empty(), "{:?}", verify_ssa(&f));
    }

    #[test]
    fn mutations_are_caught(f in function(), pick in any::<prop::sample::Index>()) {
        let n = f.blocks.len();
        let victim = pick.index(n);

        let mut g = f.clone();
        g.blocks[victim].insts[0].args = vec![Operand::value("nowhere"), Operand::Imm(1)];
        g.blocks[victim].insts[0].opcode = Opcode::Add;
        g.blocks[victim].insts[0].mem = None;
        let undefined = verify_ssa(&g);

        let mut g = f.clone();
        let other = last_value(&f, (victim + 1) % n);
        g.blocks[victim].insts[0].result = Some(other);
        g.blocks[victim].insts[0].opcode = Opcode::Add;
        g.blocks[victim].insts[0].args = vec![Operand::Imm(1), Operand::Imm(2)];
        g.blocks[victim].insts[0].mem = None;
        let duplicate = verify_ssa(&g);

        let mut g = f.clone();
        if let Some(t) = g.blocks[victim].term.successors_mut().into_iter().next() {
            *t = "missing".into();
        } else {
            g.blocks[victim].term = Terminator::Br("missing".into());
        }
        let target = verify_ssa(&g);

        // the exit block never dominates the entry
        let mut g = f.clone();
        let late = last_value(&f, n - 1);
        g.blocks[0].insts.push(Inst::new(Some("late_use".into()), Opcode::Add, vec![Operand::value(late), Operand::Imm(0)]));
        let dominance = verify_ssa(&g);

        let kinds = kinds_of(&undefined);
        prop_assert!(kinds.contains(&ViolationKind::UndefinedValue), "{:?}", undefined);
        prop_assert!(kinds_of(&duplicate).contains(&ViolationKind::MultipleDefinition), "{:?}", duplicate);
        prop_assert!(kinds_of(&target).contains(&ViolationKind::UnknownTarget), "{:?}", target);
        prop_assert!(kinds_of(&dominance).contains(&ViolationKind::NotDominated), "{:?}", dominance);

        if let Some(j) = f.blocks.iter().position(|b| !b.phis.is_empty()) {
            let mut g = f.clone();
            g.blocks[j].phis[0].incoming.pop();
            let v = verify_ssa(&g);
            prop_assert!(kinds_of(&v).contains(&ViolationKind::PhiMismatch), "{:?}", v);
            let mut g = f.clone();
            g.blocks[j].phis[0].incoming[0].1 = label(j);
            prop_assert!(!verify_ssa(&g).is_empty());
        }
    }

    #[test]
    fn latency_is_additive(f in function(), cycles in proptest::collection::vec(1u32..40, 32)) {
        let mut lm = LatencyModel::unit();
        for (k, c) in OpKind::ALL.iter().zip(&cycles) {
            lm.set(*k, *c);
        }
        let mut whole = Block::new("w", Terminator::Ret(None));
        let mut parts = 0u64;
        for b in &f.blocks {
            let expected: u64 = b.insts.iter().map(|i| u64::from(lm.get(i.opcode.kind()))).sum::<u64>()
                + u64::from(lm.get(b.term.kind()));
            prop_assert_eq!(block_latency(b, &lm), expected);
            parts += block_latency(b, &lm) - u64::from(lm.get(b.term.kind()));
            whole.insts.extend(b.insts.iter().cloned());
            whole.phis.extend(b.phis.iter().cloned());
        }
        prop_assert_eq!(block_latency(&whole, &lm), parts + u64::from(lm.get(OpKind::Ret)));
    }
}
