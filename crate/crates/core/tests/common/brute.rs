//! Reference implementations checked against the pass.

use simtmeld::ir::{Block, Inst, LatencyModel, OpKind, Opcode, Operand, Terminator};
use simtmeld::meld::{Side, Step};

pub const OPS: &[Opcode] = &[
    Opcode::Add,
    Opcode::Mul,
    Opcode::Xor,
    Opcode::LoadShared,
    Opcode::StoreShared,
    Opcode::LoadGlobal,
    Opcode::Div,
];

pub fn block(ops: &[u8], term: u8) -> Block {
    let term = match term % 3 {
        0 => Terminator::Br("x".into()),
        1 => Terminator::Ret(None),
        _ => Terminator::CondBr {
            cond: Operand::Imm(1),
            then_to: "x".into(),
            else_to: "y".into(),
        },
    };
    let mut b = Block::new("b", term);
    for (k, &o) in ops.iter().enumerate() {
        let op = OPS[usize::from(o) % OPS.len()];
        let mut i = Inst::new(
            op.has_result().then(|| format!("r{k}")),
            op,
            vec![Operand::Imm(i32::from(o)); op.arity()],
        );
        if op.names_global() {
            i = i.with_mem("g");
        }
        b.insts.push(i);
    }
    b
}

pub fn latency_model(cycles: &[u32]) -> LatencyModel {
    let mut lm = LatencyModel::unit();
    for (k, c) in OpKind::ALL.iter().zip(cycles) {
        lm.set(*k, *c);
    }
    lm
}

/// Best latency over every one-to-one pairing of same-kind operations.
pub fn best_pairing(a: &[OpKind], b: &[OpKind], used: &mut Vec<bool>, lm: &LatencyModel) -> u64 {
    let Some((first, rest)) = a.split_first() else {
        return 0;
    };
    let mut best = best_pairing(rest, b, used, lm);
    for j in 0..b.len() {
        if !used[j] && b[j] == *first {
            used[j] = true;
            best = best.max(u64::from(lm.get(*first)) + best_pairing(rest, b, used, lm));
            used[j] = false;
        }
    }
    best
}

pub fn kinds(b: &Block) -> Vec<OpKind> {
    b.insts
        .iter()
        .map(|i| i.opcode.kind())
        .chain([b.term.kind()])
        .collect()
}

pub fn brute_mp(b1: &Block, b2: &Block, lm: &LatencyModel) -> f64 {
    let (k1, k2) = (kinds(b1), kinds(b2));
    let total: u64 = k1.iter().chain(&k2).map(|k| u64::from(lm.get(*k))).sum();
    let saved = best_pairing(&k1, &k2, &mut vec![false; k2.len()], lm);
    saved as f64 / total as f64
}

/// Every alignment of sequences of lengths `n` and `m`.
pub fn all_alignments(n: usize, m: usize) -> Vec<Vec<Step>> {
    fn go(i: usize, j: usize, n: usize, m: usize, cur: &mut Vec<Step>, out: &mut Vec<Vec<Step>>) {
        if i == n && j == m {
            out.push(cur.clone());
            return;
        }
        if i < n && j < m {
            cur.push(Step::Match(i, j));
            go(i + 1, j + 1, n, m, cur, out);
            cur.pop();
        }
        if i < n {
            cur.push(Step::Gap(Side::True, i));
            go(i + 1, j, n, m, cur, out);
            cur.pop();
        }
        if j < m {
            cur.push(Step::Gap(Side::False, j));
            go(i, j + 1, n, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, 0, n, m, &mut Vec::new(), &mut out);
    out
}

pub fn is_alignment(steps: &[Step], n: usize, m: usize) -> bool {
    let (mut i, mut j) = (0, 0);
    for s in steps {
        match *s {
            Step::Match(a, b) if a == i && b == j => (i, j) = (i + 1, j + 1),
            Step::Gap(Side::True, a) if a == i => i += 1,
            Step::Gap(Side::False, b) if b == j => j += 1,
            _ => return false,
        }
    }
    i == n && j == m
}

/// Best score over every alignment, enumerated one column at a time and
/// summed left to right.
pub fn best_alignment_score(
    n: usize,
    m: usize,
    score: &dyn Fn(usize, usize) -> Option<f64>,
    gap: f64,
) -> f64 {
    fn go(
        i: usize,
        j: usize,
        acc: f64,
        n: usize,
        m: usize,
        score: &dyn Fn(usize, usize) -> Option<f64>,
        gap: f64,
    ) -> f64 {
        if i == n && j == m {
            return acc;
        }
        let mut best = f64::NEG_INFINITY;
        if i < n && j < m {
            if let Some(s) = score(i, j) {
                best = best.max(go(i + 1, j + 1, acc + s, n, m, score, gap));
            }
        }
        if i < n {
            best = best.max(go(i + 1, j, acc + gap, n, m, score, gap));
        }
        if j < m {
            best = best.max(go(i, j + 1, acc + gap, n, m, score, gap));
        }
        best
    }
    go(0, 0, 0.0, n, m, score, gap)
}
