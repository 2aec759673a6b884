use serde::Serialize;

use crate::ir::{Block, Inst, LatencyModel, Opcode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    True,
    False,
}

/// One column of a pairwise alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step {
    Match(usize, usize),
    Gap(Side, usize),
}

/// Global alignment of two sequences of lengths `n` and `m`. `score(i, j)`
/// yields `None` for pairs that may not be matched; every gap column costs
/// `gap`. Among optimal alignments, matches are preferred over gaps and a
/// true-side gap is placed before a false-side gap.
pub fn global_align(
    n: usize,
    m: usize,
    score: impl Fn(usize, usize) -> Option<f64>,
    gap: f64,
) -> (f64, Vec<Step>) {
    #[derive(Clone, Copy, PartialEq)]
    enum From {
        Start,
        Diag,
        Up,
        Left,
    }
    let w = m + 1;
    let mut dp = vec![f64::NEG_INFINITY; (n + 1) * w];
    let mut from = vec![From::Start; (n + 1) * w];
    dp[0] = 0.0;
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            let mut how = From::Start;
            if i > 0 && j > 0 {
                if let Some(s) = score(i - 1, j - 1) {
                    best = dp[(i - 1) * w + j - 1] + s;
                    how = From::Diag;
                }
            }
            // `Left` (false-side gap last) wins ties over `Up` so that, read
            // forwards, the true-side gap comes first.
            if j > 0 {
                let v = dp[i * w + j - 1] + gap;
                if v > best || how == From::Start {
                    best = v;
                    how = From::Left;
                }
            }
            if i > 0 {
                let v = dp[(i - 1) * w + j] + gap;
                if v > best || how == From::Start {
                    best = v;
                    how = From::Up;
                }
            }
            dp[i * w + j] = best;
            from[i * w + j] = how;
        }
    }
    let mut steps = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        match from[i * w + j] {
            From::Diag => {
                steps.push(Step::Match(i - 1, j - 1));
                i -= 1;
                j -= 1;
            }
            From::Up => {
                steps.push(Step::Gap(Side::True, i - 1));
                i -= 1;
            }
            From::Left => {
                steps.push(Step::Gap(Side::False, j - 1));
                j -= 1;
            }
            From::Start => unreachable!("every interior cell has a predecessor"),
        }
    }
    steps.reverse();
    (dp[n * w + m], steps)
}

/// Whether two instructions can be replaced by a single one.
pub fn compatible(a: &Inst, b: &Inst) -> bool {
    if a.opcode != b.opcode || a.mem != b.mem || a.opcode == Opcode::Barrier {
        return false;
    }
    // `const` carries its value in the opcode's immediate slot.
    a.opcode != Opcode::Const || a.args == b.args
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstructionAlignment {
    pub steps: Vec<Step>,
    pub score: f64,
}

impl InstructionAlignment {
    pub fn gaps(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, Step::Gap(..)))
            .count()
    }
}

/// Align the non-phi, non-terminator instructions of two blocks. A compatible
/// pair scores its latency, so expensive instructions are matched first.
pub fn align_instructions(
    b1: &Block,
    b2: &Block,
    lm: &LatencyModel,
    gap_penalty: f64,
) -> InstructionAlignment {
    let (score, steps) = global_align(
        b1.insts.len(),
        b2.insts.len(),
        |i, j| {
            let (x, y) = (&b1.insts[i], &b2.insts[j]);
            compatible(x, y).then(|| f64::from(lm.get(x.opcode.kind())))
        },
        gap_penalty,
    );
    InstructionAlignment { steps, score }
}

/// Score of an explicit alignment under the same scoring as [`global_align`];
/// `None` if it matches an incompatible pair.
pub fn alignment_score(
    steps: &[Step],
    score: impl Fn(usize, usize) -> Option<f64>,
    gap: f64,
) -> Option<f64> {
    let mut total = 0.0;
    for s in steps {
        total += match *s {
            Step::Match(i, j) => score(i, j)?,
            Step::Gap(..) => gap,
        };
    }
    Some(total)
}
