use std::collections::{BTreeSet, HashMap};

use crate::analysis::dom::{dominance_frontiers, dominators_of, iterated_frontier};
use crate::analysis::Cfg;
use crate::ir::{verify_ssa, Function, NameGen, Operand, Phi, ViolationKind};

use super::MeldError;

/// Restore dominance for every use of `value` that its definition no longer
/// dominates. Phis are placed on the iterated dominance frontier of the
/// definition; paths that bypass the definition contribute `undef`. Uses that
/// are still dominated are left alone.
pub fn repair_value(f: &mut Function, value: &str, ng: &mut NameGen) -> Result<(), MeldError> {
    let cfg = Cfg::new(f)?;
    let dom = dominators_of(f, &cfg)?;
    let d =
        cfg.idx(f.def_block(value).ok_or_else(|| {
            MeldError::invariant(format!("%{value} has no definition to repair"))
        })?)
        .expect("defining block exists");
    let def_pos = {
        let b = &f.blocks[d];
        if b.phis.iter().any(|p| p.result == value) {
            0
        } else {
            1 + b
                .insts
                .iter()
                .position(|i| i.result.as_deref() == Some(value))
                .expect("defined here")
        }
    };
    let df = dominance_frontiers(&dom, &cfg.preds);
    let phi_blocks: BTreeSet<usize> = iterated_frontier(&df, &[d]).into_iter().collect();
    let phi_name: HashMap<usize, String> = phi_blocks
        .iter()
        .map(|&b| (b, ng.fresh(&format!("{value}.r"))))
        .collect();

    let reaching_start = |mut b: usize| -> Operand {
        loop {
            if let Some(n) = phi_name.get(&b) {
                return Operand::value(n.clone());
            }
            if b == d {
                // only reached for uses in `d` above the definition
                return Operand::Undef;
            }
            match dom.parent(b) {
                Some(p) => {
                    if p == d {
                        return Operand::value(value);
                    }
                    b = p;
                }
                None => return Operand::Undef,
            }
        }
    };
    let reaching_end = |b: usize| -> Operand {
        if b == d {
            Operand::value(value)
        } else {
            reaching_start(b)
        }
    };

    let valid_at = |b: usize, pos: usize| -> bool {
        if b == d {
            def_pos < pos
        } else {
            dom.dominates(d, b)
        }
    };

    let mut new_phis: Vec<(usize, Phi)> = Vec::new();
    for &b in &phi_blocks {
        let incoming = cfg.preds[b]
            .iter()
            .map(|&p| (reaching_end(p), cfg.label(p).to_string()))
            .collect();
        new_phis.push((
            b,
            Phi {
                result: phi_name[&b].clone(),
                incoming,
            },
        ));
    }

    for (bi, block) in f.blocks.iter_mut().enumerate() {
        for phi in &mut block.phis {
            for (v, pred) in &mut phi.incoming {
                if v.as_value() == Some(value) {
                    let p = cfg.idx(pred).expect("phi names a known block");
                    if !dom.dominates(d, p) {
                        *v = reaching_end(p);
                    }
                }
            }
        }
        if valid_at(bi, usize::MAX) && bi != d {
            continue;
        }
        let start = reaching_start(bi);
        for (k, inst) in block.insts.iter_mut().enumerate() {
            if valid_at(bi, k + 1) {
                continue;
            }
            for a in &mut inst.args {
                if a.as_value() == Some(value) {
                    *a = start.clone();
                }
            }
        }
        if !valid_at(bi, usize::MAX) {
            for a in block.term.operands_mut() {
                if a.as_value() == Some(value) {
                    *a = start.clone();
                }
            }
        }
    }
    for (b, phi) in new_phis {
        f.blocks[b].phis.push(phi);
    }
    Ok(())
}

/// Repair every dominance violation in `f`. Returns the number of values
/// repaired. Violations other than broken dominance are reported as errors.
pub fn repair_all(f: &mut Function, ng: &mut NameGen) -> Result<usize, MeldError> {
    let mut repaired = 0;
    for _ in 0..f.all_value_names().len() + 1 {
        let violations = verify_ssa(f);
        if violations.is_empty() {
            return Ok(repaired);
        }
        if let Some(v) = violations
            .iter()
            .find(|v| v.kind != ViolationKind::NotDominated)
        {
            return Err(MeldError::invariant(format!("cannot repair: {v}")));
        }
        let values: BTreeSet<String> = violations.into_iter().map(|v| v.value).collect();
        for v in values {
            repair_value(f, &v, ng)?;
            repaired += 1;
        }
    }
    Err(MeldError::invariant("SSA repair did not converge"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_function;

    #[test]
    fn inserts_undef_phi_at_join() {
        let mut f = parse_function(
            "fn f(%c) {\n^e:\n condbr %c ^t ^fa\n^t:\n br ^j\n^fa:\n %a = add %c 1\n br ^j\n^j:\n %x = mul %a 2\n ret %x\n}",
        )
        .unwrap();
        let mut ng = NameGen::for_function(&f);
        assert_eq!(repair_all(&mut f, &mut ng).unwrap(), 1);
        assert!(verify_ssa(&f).is_empty());
        let j = f.block("j").unwrap();
        assert_eq!(j.phis.len(), 1);
        assert_eq!(j.phis[0].incoming_from("t"), Some(&Operand::Undef));
        assert_eq!(j.phis[0].incoming_from("fa"), Some(&Operand::value("a")));
        assert_eq!(j.insts[0].args[0], Operand::value("a.r"));
    }

    #[test]
    fn loop_carried_repair() {
        // %a defined in the body, used in the header after the body moved behind it
        let mut f = parse_function(
            "fn f(%c) {\n^e:\n br ^h\n^h:\n %y = add %a 0\n condbr %c ^b ^x\n^b:\n %a = add %c 1\n br ^h\n^x:\n ret\n}",
        )
        .unwrap();
        let mut ng = NameGen::for_function(&f);
        repair_all(&mut f, &mut ng).unwrap();
        assert!(verify_ssa(&f).is_empty(), "{:?}", verify_ssa(&f));
        let h = f.block("h").unwrap();
        assert_eq!(h.phis[0].incoming_from("e"), Some(&Operand::Undef));
    }
}
