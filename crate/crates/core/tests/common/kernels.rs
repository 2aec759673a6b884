//! Text generators for small divergent kernels.

use proptest::prelude::*;

/// Straight-line code applying `ops` to `%{tag}0`; returns the text and the
/// name of the final value.
pub fn straight(tag: &str, ops: &[(u8, i8)]) -> (String, String) {
    let mut out = String::new();
    let mut cur = format!("%{tag}0");
    for (k, &(op, imm)) in ops.iter().enumerate() {
        let v = format!("%{tag}v{k}");
        let rhs = match imm % 3 {
            0 => "%t".to_string(),
            1 => "%a".to_string(),
            _ => imm.to_string(),
        };
        match op % 8 {
            0 => out.push_str(&format!("  {v} = add {cur} {rhs}\n")),
            1 => out.push_str(&format!("  {v} = sub {cur} {rhs}\n")),
            2 => out.push_str(&format!("  {v} = mul {cur} {rhs}\n")),
            3 => out.push_str(&format!("  {v} = xor {cur} {rhs}\n")),
            4 => out.push_str(&format!("  {v} = or {cur} {rhs}\n")),
            // lane-private slots keep the two arms free of races
            5 => out.push_str(&format!(
                "  {v}a = load.shared %t\n  {v} = add {v}a {cur}\n"
            )),
            6 => out.push_str(&format!(
                "  store.shared %t {cur}\n  {v} = add {cur} {rhs}\n"
            )),
            _ => out.push_str(&format!("  {v} = icmp.lt {cur} {rhs}\n")),
        }
        cur = v;
    }
    (out, cur)
}

pub type Arm = (Vec<(u8, i8)>, Option<(Vec<(u8, i8)>, Vec<(u8, i8)>)>);

/// An arm: a block, optionally followed by a nested divergent diamond.
pub fn arm(tag: &str, a: &Arm) -> (String, String) {
    let (code, v) = straight(tag, &a.0);
    let mut text = format!("^{tag}:\n  %{tag}0 = add %t %a\n{code}");
    let Some((l, r)) = &a.1 else {
        text.push_str("  br ^j\n");
        return (text, v);
    };
    text.push_str(&format!(
        "  %{tag}s = add {v} 0\n  condbr %d ^{tag}.l ^{tag}.r\n"
    ));
    let (lc, lv) = straight(&format!("{tag}l"), l);
    let (rc, rv) = straight(&format!("{tag}r"), r);
    text.push_str(&format!(
        "^{tag}.l:\n  %{tag}l0 = add %{tag}s 1\n{lc}  br ^{tag}.j\n"
    ));
    text.push_str(&format!(
        "^{tag}.r:\n  %{tag}r0 = add %{tag}s 2\n{rc}  br ^{tag}.j\n"
    ));
    text.push_str(&format!(
        "^{tag}.j:\n  %{tag}m = phi {lv}:^{tag}.l, {rv}:^{tag}.r\n  br ^j\n"
    ));
    (text, format!("%{tag}m"))
}

pub fn diamond(t: &Arm, f: &Arm) -> String {
    let (tt, tv) = arm("p", t);
    let (ft, fv) = arm("q", f);
    let (pred_t, pred_f) = (
        if t.1.is_some() { "p.j" } else { "p" },
        if f.1.is_some() { "q.j" } else { "q" },
    );
    format!(
        "global out[64]\n\nfn k(%a) shared s[32] {{\n^e:\n  %t = tid\n  %h = and %t 1\n  %c = icmp.eq %h 0\n  %w = and %t 2\n  %d = icmp.ne %w 0\n  condbr %c ^p ^q\n{tt}{ft}^j:\n  %r = phi {tv}:^{pred_t}, {fv}:^{pred_f}\n  %o = load.shared %h\n  %z = add %r %o\n  store.global out %t %z\n  ret\n}}\n"
    )
}

pub fn ops() -> impl Strategy<Value = Vec<(u8, i8)>> {
    proptest::collection::vec(any::<(u8, i8)>(), 0..6)
}

pub fn arm_strategy() -> impl Strategy<Value = Arm> {
    (ops(), proptest::option::weighted(0.4, (ops(), ops())))
}

/// One subgraph of a path: a block, or a block heading a diamond.
fn segment(tag: &str, a: &Arm, prev: &str, next: &str) -> (String, String) {
    let (code, v) = straight(tag, &a.0);
    let mut text = format!("^{tag}:\n  %{tag}0 = add {prev} 1\n{code}");
    let Some((l, r)) = &a.1 else {
        text.push_str(&format!("  br ^{next}\n"));
        return (text, v);
    };
    text.push_str(&format!(
        "  %{tag}s = add {v} 0\n  condbr %d ^{tag}.l ^{tag}.r\n"
    ));
    let (lc, lv) = straight(&format!("{tag}l"), l);
    let (rc, rv) = straight(&format!("{tag}r"), r);
    text.push_str(&format!(
        "^{tag}.l:\n  %{tag}l0 = add %{tag}s 1\n{lc}  br ^{tag}.j\n"
    ));
    text.push_str(&format!(
        "^{tag}.r:\n  %{tag}r0 = add %{tag}s 2\n{rc}  br ^{tag}.j\n"
    ));
    text.push_str(&format!(
        "^{tag}.j:\n  %{tag}m = phi {lv}:^{tag}.l, {rv}:^{tag}.r\n  br ^{next}\n"
    ));
    (text, format!("%{tag}m"))
}

fn path(tag: &str, segs: &[Arm]) -> (String, String, String) {
    let mut text = String::new();
    let mut prev = "%t".to_string();
    for (i, s) in segs.iter().enumerate() {
        let next = if i + 1 == segs.len() {
            "j".to_string()
        } else {
            format!("{tag}{}", i + 1)
        };
        let (t, v) = segment(&format!("{tag}{i}"), s, &prev, &next);
        text.push_str(&t);
        prev = v;
    }
    let n = segs.len() - 1;
    let last = if segs[n].1.is_some() {
        format!("{tag}{n}.j")
    } else {
        format!("{tag}{n}")
    };
    (text, prev, last)
}

/// A divergent branch on `tid & 1` whose arms are the given chains of
/// subgraphs, labelled `p0, p1, ...` and `q0, q1, ...`, joining at `^j`.
pub fn chain_kernel(t: &[Arm], f: &[Arm]) -> String {
    let (tt, tv, tl) = path("p", t);
    let (ft, fv, fl) = path("q", f);
    format!(
        "global out[64]\n\nfn k(%a) shared s[32] {{\n^e:\n  %t = tid\n  %h = and %t 1\n  %c = icmp.eq %h 0\n  %w = and %t 2\n  %d = icmp.ne %w 0\n  condbr %c ^p0 ^q0\n{tt}{ft}^j:\n  %r = phi {tv}:^{tl}, {fv}:^{fl}\n  store.global out %t %r\n  ret\n}}\n"
    )
}

pub fn chain_strategy(max_len: usize) -> impl Strategy<Value = (Vec<Arm>, Vec<Arm>)> {
    (
        proptest::collection::vec(arm_strategy(), 1..=max_len),
        proptest::collection::vec(arm_strategy(), 1..=max_len),
    )
}
