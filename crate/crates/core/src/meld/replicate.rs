use std::collections::{HashMap, HashSet, VecDeque};

use serde::Serialize;

use crate::ir::{Block, Function, NameGen, Operand, Terminator};

use super::subgraph::Subgraph;
use super::MeldError;

/// A copy of a region's control skeleton that carries one block's code.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replica {
    pub subgraph: Subgraph,
    /// Original region block to its copy, in region pre-order.
    pub map: Vec<(String, String)>,
}

fn shortest_path(
    f: &Function,
    inside: &HashSet<&str>,
    from: &str,
    to: &str,
    stop_at: &str,
) -> Option<Vec<String>> {
    let mut prev: HashMap<&str, &str> = HashMap::new();
    let mut queue = VecDeque::from([from]);
    let mut seen = HashSet::from([from]);
    while let Some(v) = queue.pop_front() {
        if v == to {
            let mut path = vec![to.to_string()];
            let mut cur = to;
            while let Some(&p) = prev.get(cur) {
                path.push(p.to_string());
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        if v == stop_at && v != from {
            continue;
        }
        for s in f.block(v)?.term.successors() {
            if inside.contains(s) && seen.insert(s) {
                prev.insert(s, v);
                queue.push_back(s);
            }
        }
    }
    None
}

/// The route a replica takes from the region entry through `slot` to the
/// region exit, or `None` if no such route visits each block at most once.
pub(crate) fn replica_path(f: &Function, region: &Subgraph, slot: &str) -> Option<Vec<String>> {
    let inside: HashSet<&str> = region.blocks.iter().map(String::as_str).collect();
    let head = shortest_path(f, &inside, &region.entry, slot, &region.exit)?;
    let tail = shortest_path(f, &inside, slot, &region.exit, &region.exit)?;
    let mut path = head;
    path.extend(tail.into_iter().skip(1));
    let distinct: HashSet<&String> = path.iter().collect();
    (distinct.len() == path.len()).then_some(path)
}

/// Replace block `b` by a copy of `region` whose branches are fixed so that
/// control runs from the copy's entry through the copy of `slot`, which holds
/// `b`'s instructions, and leaves towards `b`'s old successor.
pub fn replicate_region(
    f: &mut Function,
    region: &Subgraph,
    b: &str,
    slot: &str,
    ng: &mut NameGen,
) -> Result<Replica, MeldError> {
    let path = replica_path(f, region, slot)
        .ok_or_else(|| MeldError::invariant(format!("no simple route through ^{slot}")))?;
    let victim = f
        .block(b)
        .ok_or_else(|| MeldError::invariant(format!("no block ^{b}")))?
        .clone();
    let Terminator::Br(after) = victim.term.clone() else {
        return Err(MeldError::invariant(format!("^{b} does not end in a jump")));
    };
    let preds = f.preds(b);
    if preds.len() != 1 || !victim.phis.is_empty() {
        return Err(MeldError::invariant(format!(
            "^{b} is not a straight-line block"
        )));
    }

    let map: Vec<(String, String)> = region
        .blocks
        .iter()
        .map(|r| (r.clone(), ng.fresh(&format!("{r}.rep"))))
        .collect();
    let lookup: HashMap<&str, &str> = map.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let position: HashMap<&str, usize> = path
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();

    let mut copies = Vec::with_capacity(map.len());
    for (orig, copy) in &map {
        let src = f.block(orig).expect("region block exists");
        let mut term = src.term.clone();
        if let Terminator::CondBr { cond, then_to, .. } = &mut term {
            let taken = match position.get(orig.as_str()) {
                Some(&k) if k + 1 < path.len() => then_to == &path[k + 1],
                Some(_) => !lookup.contains_key(then_to.as_str()),
                None => false,
            };
            *cond = Operand::Imm(i32::from(taken));
        }
        for t in term.successors_mut() {
            *t = match lookup.get(t.as_str()) {
                Some(c) => c.to_string(),
                None => after.clone(),
            };
        }
        let mut block = Block::new(copy.clone(), term);
        if orig == slot {
            block.insts = victim.insts.clone();
        }
        copies.push(block);
    }

    let entry_copy = lookup[region.entry.as_str()].to_string();
    let exit_copy = lookup[region.exit.as_str()].to_string();
    f.block_mut(&preds[0])
        .expect("pred exists")
        .term
        .retarget(b, &entry_copy);
    f.rename_phi_pred(&after, b, &exit_copy);
    let at = f.block_index(b).expect("victim exists");
    f.blocks.splice(at..=at, copies);

    Ok(Replica {
        subgraph: Subgraph {
            entry: entry_copy,
            exit: exit_copy,
            blocks: map.iter().map(|(_, c)| c.clone()).collect(),
        },
        map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_function;

    fn diamond() -> Function {
        parse_function(
            "fn f(%c, %d) {\n^e:\n condbr %c ^b ^h\n^b:\n %v = add %d 1\n br ^x\n^h:\n condbr %d ^l ^r\n^l:\n br ^j\n^r:\n br ^j\n^j:\n br ^x\n^x:\n %p = phi %v:^b, 0:^j\n ret %p\n}",
        )
        .unwrap()
    }

    fn region() -> Subgraph {
        Subgraph {
            entry: "h".into(),
            exit: "j".into(),
            blocks: vec!["h".into(), "l".into(), "r".into(), "j".into()],
        }
    }

    #[test]
    fn path_through_each_slot() {
        let f = diamond();
        assert_eq!(
            replica_path(&f, &region(), "r").unwrap(),
            vec!["h", "r", "j"]
        );
        assert_eq!(
            replica_path(&f, &region(), "h").unwrap(),
            vec!["h", "l", "j"]
        );
    }

    #[test]
    fn replica_steers_into_slot() {
        let mut f = diamond();
        let mut ng = NameGen::for_function(&f);
        let rep = replicate_region(&mut f, &region(), "b", "r", &mut ng).unwrap();
        assert!(f.block("b").is_none());
        let h = f.block("h.rep").unwrap();
        assert_eq!(
            h.term,
            Terminator::CondBr {
                cond: Operand::Imm(0),
                then_to: "l.rep".into(),
                else_to: "r.rep".into()
            }
        );
        assert_eq!(f.block("r.rep").unwrap().insts.len(), 1);
        assert_eq!(f.block("j.rep").unwrap().term, Terminator::Br("x".into()));
        assert_eq!(
            f.block("x").unwrap().phis[0].incoming_from("j.rep"),
            Some(&Operand::value("v"))
        );
        assert_eq!(rep.subgraph.entry, "h.rep");
        assert!(crate::analysis::Cfg::new(&f).is_ok());
    }
}
