use crate::ir::{Block, Function, NameGen, Operand, Terminator};

use super::ssa_repair::repair_all;
use super::subgraph::Subgraph;
use super::MeldError;

/// Make the entries of `t` and `s` the two targets of one `condbr cond` block
/// so they can be melded. If the entries are reached from different blocks,
/// both edges are redirected to a new block that branches on `cond`; values
/// that no longer dominate their uses are repaired. Returns the label of the
/// branching block.
pub fn preprocess(
    f: &mut Function,
    t: &Subgraph,
    s: &Subgraph,
    cond: &Operand,
    ng: &mut NameGen,
) -> Result<String, MeldError> {
    let outside_pred = |sg: &Subgraph| -> Result<String, MeldError> {
        let preds: Vec<String> = f
            .preds(&sg.entry)
            .into_iter()
            .filter(|p| !sg.blocks.contains(p))
            .collect();
        match preds.as_slice() {
            [p] => Ok(p.clone()),
            _ => Err(MeldError::invariant(format!(
                "^{} must have exactly one predecessor outside its subgraph",
                sg.entry
            ))),
        }
    };
    let (pt, pf) = (outside_pred(t)?, outside_pred(s)?);
    let (t1, f1) = (t.entry.as_str(), s.entry.as_str());
    let wanted = Terminator::CondBr {
        cond: cond.clone(),
        then_to: t1.to_string(),
        else_to: f1.to_string(),
    };
    if pt == pf && f.block(&pt).map(|b| &b.term) == Some(&wanted) {
        return Ok(pt);
    }
    let p = ng.fresh(&format!("{t1}_{f1}.p"));
    f.block_mut(&pt).expect("pred exists").term.retarget(t1, &p);
    f.block_mut(&pf).expect("pred exists").term.retarget(f1, &p);
    f.rename_phi_pred(t1, &pt, &p);
    f.rename_phi_pred(f1, &pf, &p);
    let at = f.block_index(t1).expect("entry exists");
    f.blocks.insert(at, Block::new(p.clone(), wanted));
    repair_all(f, ng)?;
    Ok(p)
}
