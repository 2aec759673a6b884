use std::collections::BTreeMap;

use crate::ir::{Block, LatencyModel, OpKind};

/// Multiset of instruction kinds in a block, terminator included, phis excluded.
pub fn kind_profile(b: &Block) -> BTreeMap<OpKind, u32> {
    let mut m = BTreeMap::new();
    for i in &b.insts {
        *m.entry(i.opcode.kind()).or_insert(0) += 1;
    }
    *m.entry(b.term.kind()).or_insert(0) += 1;
    m
}

/// Latency that melding two blocks with these profiles could save, and their
/// combined latency.
pub(crate) fn saved_and_total(
    p1: &BTreeMap<OpKind, u32>,
    p2: &BTreeMap<OpKind, u32>,
    lm: &LatencyModel,
) -> (u64, u64) {
    let lat = |p: &BTreeMap<OpKind, u32>| -> u64 {
        p.iter()
            .map(|(k, n)| u64::from(lm.get(*k)) * u64::from(*n))
            .sum()
    };
    let saved = p1
        .iter()
        .map(|(k, n)| u64::from((*n).min(p2.get(k).copied().unwrap_or(0))) * u64::from(lm.get(*k)))
        .sum();
    (saved, lat(p1) + lat(p2))
}

/// Block melding profitability: the fraction of the two blocks' combined
/// latency that melding saves. Always within `[0, 0.5]`.
pub fn mp_block(b1: &Block, b2: &Block, lm: &LatencyModel) -> f64 {
    let (s, t) = saved_and_total(&kind_profile(b1), &kind_profile(b2), lm);
    ratio(s, t)
}

pub(crate) fn ratio(saved: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        saved as f64 / total as f64
    }
}

/// Subgraph profitability over corresponding block pairs: the latency-weighted
/// mean of the pairwise block scores.
pub fn mp_subgraph<'a>(
    pairs: impl IntoIterator<Item = (&'a Block, &'a Block)>,
    lm: &LatencyModel,
) -> f64 {
    let (mut saved, mut total) = (0u64, 0u64);
    for (a, b) in pairs {
        let (s, t) = saved_and_total(&kind_profile(a), &kind_profile(b), lm);
        saved += s;
        total += t;
    }
    ratio(saved, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_function;

    fn blocks(src: &str) -> Vec<Block> {
        parse_function(src).unwrap().blocks
    }

    #[test]
    fn worked_example() {
        let b = blocks(
            "fn f() shared s[4] {\n^a:\n %x = add 1 2\n %y = add 1 2\n %z = load.shared 0\n br ^b\n^b:\n %u = add 1 2\n %v = load.shared 0\n %w = load.shared 1\n br ^c\n^c:\n ret\n}",
        );
        let lm = LatencyModel::default();
        let mp = mp_block(&b[0], &b[1], &lm);
        assert_eq!(mp, 22.0 / 65.0);
        assert_eq!(mp, mp_block(&b[1], &b[0], &lm));
        assert_eq!(mp_block(&b[0], &b[0], &lm), 0.5);
    }

    #[test]
    fn disjoint_kinds_score_zero() {
        let b = blocks("fn f() {\n^a:\n %x = add 1 2\n br ^b\n^b:\n %y = mul 1 2\n ret\n}");
        assert_eq!(mp_block(&b[0], &b[1], &LatencyModel::default()), 0.0);
    }

    #[test]
    fn subgraph_weighting() {
        let b = blocks(
            "fn f() {\n^a:\n %x = add 1 2\n br ^b\n^b:\n %y = add 1 2\n br ^c\n^c:\n ret\n}",
        );
        let lm = LatencyModel::default();
        assert_eq!(mp_subgraph([(&b[0], &b[1]), (&b[1], &b[0])], &lm), 0.5);
        // a (add, br) with c (ret): nothing shared, weight 3; a with b: 2 of 4 saved
        assert_eq!(
            mp_subgraph([(&b[0], &b[2]), (&b[0], &b[1])], &lm),
            2.0 / 7.0
        );
    }
}
