use std::fmt::Write;

use super::print::block_lines;
use super::{Function, Terminator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMode {
    /// Block labels only.
    #[default]
    Labels,
    /// Full instruction listing inside each node.
    Full,
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\")
        .replace('"', "\\\"")
        .replace('<', "\\<")
        .replace('>', "\\>")
        .replace('{', "\\{")
        .replace('}', "\\}")
        .replace('|', "\\|")
}

pub fn emit_dot(f: &Function, mode: LabelMode) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", escape(&f.name));
    let _ = writeln!(out, "  node [shape=record, fontname=monospace];");
    for b in &f.blocks {
        let label = match mode {
            LabelMode::Labels => escape(&b.label),
            LabelMode::Full => {
                let mut s = format!("{}:\\l", escape(&b.label));
                for l in block_lines(b) {
                    s.push_str(&escape(&l));
                    s.push_str("\\l");
                }
                format!("{{{s}}}")
            }
        };
        let _ = writeln!(out, "  \"{}\" [label=\"{}\"];", escape(&b.label), label);
    }
    for b in &f.blocks {
        match &b.term {
            Terminator::Br(t) => {
                let _ = writeln!(out, "  \"{}\" -> \"{}\";", escape(&b.label), escape(t));
            }
            Terminator::CondBr {
                then_to, else_to, ..
            } => {
                let _ = writeln!(
                    out,
                    "  \"{}\" -> \"{}\" [label=\"T\"];",
                    escape(&b.label),
                    escape(then_to)
                );
                let _ = writeln!(
                    out,
                    "  \"{}\" -> \"{}\" [label=\"F\"];",
                    escape(&b.label),
                    escape(else_to)
                );
            }
            Terminator::Ret(_) => {}
        }
    }
    out.push_str("}\n");
    out
}
