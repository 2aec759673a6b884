use std::collections::BTreeSet;

use serde::Serialize;

use crate::ir::{Function, Opcode, Operand, Terminator};

use super::dom::{dominance_frontiers, iterated_frontier, DomTree};
use super::regions::region_body;
use super::Cfg;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DivergenceInfo {
    pub values: BTreeSet<String>,
    /// Labels of blocks whose conditional branch is divergent.
    pub branches: BTreeSet<String>,
}

impl DivergenceInfo {
    pub fn is_divergent(&self, op: &Operand) -> bool {
        op.as_value().is_some_and(|v| self.values.contains(v))
    }

    pub fn branch_is_divergent(&self, label: &str) -> bool {
        self.branches.contains(label)
    }
}

/// Taint-style divergence: `tid` seeds, data dependence propagates, and a
/// divergent branch makes the join phis it controls divergent together with
/// loop-carried values that leave its scope.
pub fn divergence_of(f: &Function, cfg: &Cfg, dom: &DomTree, pdom: &DomTree) -> DivergenceInfo {
    let df = dominance_frontiers(dom, &cfg.preds);
    let mut info = DivergenceInfo::default();
    loop {
        let before = (info.values.len(), info.branches.len());
        for b in &f.blocks {
            for p in &b.phis {
                if p.incoming.iter().any(|(v, _)| info.is_divergent(v)) {
                    info.values.insert(p.result.clone());
                }
            }
            for i in &b.insts {
                let Some(r) = &i.result else { continue };
                if i.opcode == Opcode::Tid || i.args.iter().any(|a| info.is_divergent(a)) {
                    info.values.insert(r.clone());
                }
            }
            if let Terminator::CondBr { cond, .. } = &b.term {
                if info.is_divergent(cond) {
                    info.branches.insert(b.label.clone());
                }
            }
        }
        for bl in info.branches.clone() {
            let b = cfg.idx(&bl).expect("branch block exists");
            let Some(join) = pdom.parent(b) else { continue };
            let scope = region_body(cfg, b, join);
            let in_scope = |x: usize| scope.binary_search(&x).is_ok();
            for j in iterated_frontier(&df, &cfg.succs[b]) {
                if in_scope(j) || j == join {
                    for p in &f.blocks[j].phis {
                        info.values.insert(p.result.clone());
                    }
                }
            }
            // Lanes leaving a loop in different iterations see different values.
            let cyclic = cfg.preds[b].iter().any(|p| in_scope(*p));
            for &x in &scope {
                if x == b && !cyclic {
                    continue;
                }
                for d in f.blocks[x].defs() {
                    if info.values.contains(d) {
                        continue;
                    }
                    if used_outside(f, d, &scope) {
                        info.values.insert(d.to_string());
                    }
                }
            }
        }
        if (info.values.len(), info.branches.len()) == before {
            return info;
        }
    }
}

fn used_outside(f: &Function, v: &str, scope: &[usize]) -> bool {
    f.blocks.iter().enumerate().any(|(i, b)| {
        if scope.binary_search(&i).is_ok() {
            return false;
        }
        b.phis
            .iter()
            .any(|p| p.incoming.iter().any(|(o, _)| o.as_value() == Some(v)))
            || b.insts
                .iter()
                .any(|ins| ins.args.iter().any(|a| a.as_value() == Some(v)))
            || b.term.operands().iter().any(|a| a.as_value() == Some(v))
    })
}

#[cfg(test)]
mod tests {
    use crate::analysis::analyze_divergence;
    use crate::ir::parse_function;

    #[test]
    fn no_tid_means_uniform() {
        let f = parse_function("fn f(%c) { a: condbr %c ^b ^c b: br ^d c: br ^d d: ret }").unwrap();
        let d = analyze_divergence(&f).unwrap();
        assert!(d.values.is_empty() && d.branches.is_empty());
    }

    #[test]
    fn tid_compare_branch_is_divergent() {
        let f = parse_function(
            "fn f(%n) {\n^a:\n %tid = tid\n %c = icmp.gt %tid %n\n condbr %c ^b ^c\n^b:\n br ^d\n^c:\n br ^d\n^d:\n %p = phi 1:^b, 2:^c\n ret %p\n}",
        )
        .unwrap();
        let d = analyze_divergence(&f).unwrap();
        assert!(d.branches.contains("a"));
        assert!(d.values.contains("c"));
        // sync dependence: constant inputs, but the choice depends on the lane
        assert!(d.values.contains("p"));
    }

    #[test]
    fn loads_propagate_through_address() {
        let f = parse_function(
            "fn f() shared s[8] {\n^a:\n %t = tid\n %x = load.shared %t\n %y = load.shared 0\n %z = add %y 1\n ret %x\n}",
        )
        .unwrap();
        let d = analyze_divergence(&f).unwrap();
        assert!(d.values.contains("x"));
        assert!(!d.values.contains("y"));
        assert!(!d.values.contains("z"));
    }

    #[test]
    fn divergent_loop_exit_taints_live_outs() {
        let f = parse_function(
            "fn f() {\n^a:\n %t = tid\n br ^h\n^h:\n %i = phi 0:^a, %j:^h\n %j = add %i 1\n %c = icmp.lt %j %t\n condbr %c ^h ^x\n^x:\n %o = add %j 0\n ret %o\n}",
        )
        .unwrap();
        let d = analyze_divergence(&f).unwrap();
        assert!(d.values.contains("o"));
    }
}
