use std::fmt::Write;

use super::{Block, Function, Inst, Module, Terminator};

fn inst_line(i: &Inst) -> String {
    let mut s = String::new();
    if let Some(r) = &i.result {
        let _ = write!(s, "%{r} = ");
    }
    s.push_str(&i.opcode.mnemonic());
    if let Some(m) = &i.mem {
        let _ = write!(s, " {m}");
    }
    for a in &i.args {
        let _ = write!(s, " {a}");
    }
    s
}

fn term_line(t: &Terminator) -> String {
    match t {
        Terminator::Br(l) => format!("br ^{l}"),
        Terminator::CondBr {
            cond,
            then_to,
            else_to,
        } => format!("condbr {cond} ^{then_to} ^{else_to}"),
        Terminator::Ret(None) => "ret".into(),
        Terminator::Ret(Some(v)) => format!("ret {v}"),
    }
}

pub(crate) fn block_lines(b: &Block) -> Vec<String> {
    let mut out = Vec::with_capacity(b.phis.len() + b.insts.len() + 1);
    for p in &b.phis {
        let inc: Vec<String> = p
            .incoming
            .iter()
            .map(|(v, l)| format!("{v}:^{l}"))
            .collect();
        out.push(format!("%{} = phi {}", p.result, inc.join(", ")));
    }
    out.extend(b.insts.iter().map(inst_line));
    out.push(term_line(&b.term));
    out
}

fn write_function(out: &mut String, f: &Function) {
    let params: Vec<String> = f.params.iter().map(|p| format!("%{p}: i32")).collect();
    let _ = write!(out, "fn {}({})", f.name, params.join(", "));
    for s in &f.shared {
        let _ = write!(out, " shared {}[{}]", s.name, s.len);
    }
    out.push_str(" {\n");
    for b in &f.blocks {
        let _ = writeln!(out, "^{}:", b.label);
        for line in block_lines(b) {
            let _ = writeln!(out, "  {line}");
        }
    }
    out.push_str("}\n");
}

pub fn print_function(f: &Function) -> String {
    let mut out = String::new();
    write_function(&mut out, f);
    out
}

pub fn print_module(m: &Module) -> String {
    let mut out = String::from("# simtmeld IR\n");
    for g in &m.globals {
        let _ = writeln!(out, "global {}[{}]", g.name, g.len);
    }
    for f in &m.functions {
        out.push('\n');
        write_function(&mut out, f);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;

    #[test]
    fn round_trip_is_identity() {
        let src = r#"
global out[32]
fn k(%a: i32, %b: i32) shared buf[16] {
^entry:
  %t = tid
  %c = icmp.lt %t %a
  condbr %c ^l ^r
^l:
  %x = load.shared %t
  br ^j
^r:
  %y = mul %b -3
  store.global out %t %y
  br ^j
^j:
  %p = phi %x:^l, %y:^r
  %s = select %c %p undef
  ret %s
}
"#;
        let m = parse_module(src).unwrap();
        let text = print_module(&m);
        assert_eq!(parse_module(&text).unwrap(), m);
        assert_eq!(print_module(&parse_module(&text).unwrap()), text);
    }
}
