mod common;

use proptest::prelude::*;
use simtmeld::analysis::dom::immediate_dominators;
use simtmeld::analysis::{analyze_divergence, Analyses, Cfg, RegionKind};
use simtmeld::ir::{Opcode, Operand, Terminator};

use common::{
    brute_dominance, brute_idom, brute_regions, build, digraph, function, preds_of, recipes, shape,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn dominators_match_path_definition(g in digraph(12)) {
        let preds = preds_of(&g);
        let dom = brute_dominance(&g, 0);
        prop_assert_eq!(immediate_dominators(&g, &preds, 0), brute_idom(&dom, 0));
    }

    #[test]
    fn function_dominators_and_postdominators(s in shape(12)) {
        let n = s.len();
        let f = build(&s, &vec![vec![(4, 1, 1)]; n]);
        let a = Analyses::compute(&f).unwrap();
        let dom = brute_dominance(&s, 0);
        let preds = preds_of(&s);
        let pdom = brute_dominance(&preds, n - 1);
        for b in 0..n {
            for x in 0..n {
                prop_assert_eq!(a.dom.dominates(x, b), dom[x][b], "dom {} {}", x, b);
                prop_assert_eq!(a.pdom.dominates(x, b), pdom[x][b], "pdom {} {}", x, b);
            }
        }
        prop_assert_eq!(a.dom.idom.clone(), brute_idom(&dom, 0));
        prop_assert_eq!(a.pdom.idom.clone(), brute_idom(&pdom, n - 1));
    }

    #[test]
    fn regions_match_definition(s in shape(12)) {
        let n = s.len();
        let f = build(&s, &vec![vec![(4, 1, 1)]; n]);
        let a = Analyses::compute(&f).unwrap();
        let expected = brute_regions(&s);
        let mut got: Vec<_> = a
            .regions
            .regions
            .iter()
            .map(|r| (r.entry, r.exit, r.blocks.clone(), r.kind == RegionKind::Simple))
            .collect();
        got.sort();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn divergence_is_closed(f in function()) {
        let d = analyze_divergence(&f).unwrap();
        let a = Analyses::compute(&f).unwrap();
        prop_assert_eq!(&a.divergence, &d);
        for b in &f.blocks {
            for p in &b.phis {
                if p.incoming.iter().any(|(v, _)| d.is_divergent(v)) {
                    prop_assert!(d.values.contains(&p.result));
                }
            }
            for i in &b.insts {
                if let Some(r) = &i.result {
                    if i.opcode == Opcode::Tid || i.args.iter().any(|x| d.is_divergent(x)) {
                        prop_assert!(d.values.contains(r), "{} should be divergent", r);
                    }
                }
            }
            let divergent_cond = matches!(&b.term, Terminator::CondBr { cond, .. } if d.is_divergent(cond));
            prop_assert_eq!(d.branch_is_divergent(&b.label), divergent_cond);
        }
        // joins of divergent branches merge lane-dependent paths
        let cfg = Cfg::new(&f).unwrap();
        for br in &d.branches {
            let Some(j) = a.pdom.parent(cfg.idx(br).unwrap()) else { continue };
            for p in &f.blocks[j].phis {
                prop_assert!(d.values.contains(&p.result), "join phi {} of {}", p.result, br);
            }
        }
    }

    #[test]
    fn uniform_code_stays_uniform(s in shape(12), r in recipes(12)) {
        let mut r = r;
        r.truncate(s.len());
        for block in &mut r {
            for step in block.iter_mut() {
                if step.0 % 12 == 0 {
                    step.0 = 4;
                }
            }
        }
        let f = build(&s, &r);
        prop_assert!(!f.blocks.iter().any(|b| b.contains_opcode(Opcode::Tid)));
        let d = analyze_divergence(&f).unwrap();
        prop_assert!(d.values.is_empty() && d.branches.is_empty(), "{:?}", d);
        prop_assert!(!d.is_divergent(&Operand::value("p0")));
    }
}
