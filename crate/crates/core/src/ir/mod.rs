//! The SSA mini-IR: modules, functions, blocks and instructions.
//!
//! Every scalar is a 32-bit integer. Values are named (`%name` in text) and
//! blocks are labelled (`^name` in text); the in-memory form stores the bare
//! names. The first block of a function is its entry.

mod dot;
mod latency;
mod parse;
mod print;
mod verify;

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use dot::{emit_dot, LabelMode};
pub use latency::{block_latency, LatencyError, LatencyModel};
pub use parse::{parse_function, parse_module, ParseError};
pub use print::{print_function, print_module};
pub use verify::{verify_module, verify_ssa, Violation, ViolationKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CmpPred {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CmpPred {
    pub const ALL: [CmpPred; 6] = [
        CmpPred::Eq,
        CmpPred::Ne,
        CmpPred::Lt,
        CmpPred::Gt,
        CmpPred::Le,
        CmpPred::Ge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CmpPred::Eq => "eq",
            CmpPred::Ne => "ne",
            CmpPred::Lt => "lt",
            CmpPred::Gt => "gt",
            CmpPred::Le => "le",
            CmpPred::Ge => "ge",
        }
    }

    pub fn eval(self, a: i32, b: i32) -> bool {
        match self {
            CmpPred::Eq => a == b,
            CmpPred::Ne => a != b,
            CmpPred::Lt => a < b,
            CmpPred::Gt => a > b,
            CmpPred::Le => a <= b,
            CmpPred::Ge => a >= b,
        }
    }
}

/// Non-terminator, non-phi opcodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Opcode {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    Icmp(CmpPred),
    Select,
    LoadShared,
    StoreShared,
    LoadGlobal,
    StoreGlobal,
    Tid,
    Const,
    /// Reserved warp-level intrinsic. Regions containing it are never melded.
    Barrier,
}

impl Opcode {
    pub const BINARY: [Opcode; 10] = [
        Opcode::Add,
        Opcode::Sub,
        Opcode::Mul,
        Opcode::Div,
        Opcode::Rem,
        Opcode::And,
        Opcode::Or,
        Opcode::Xor,
        Opcode::Shl,
        Opcode::Shr,
    ];

    pub fn mnemonic(self) -> String {
        match self {
            Opcode::Icmp(p) => format!("icmp.{}", p.name()),
            other => other.kind().name().to_string(),
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Opcode> {
        if let Some(pred) = s.strip_prefix("icmp.") {
            return CmpPred::ALL
                .iter()
                .find(|p| p.name() == pred)
                .map(|p| Opcode::Icmp(*p));
        }
        let op = match s {
            "add" => Opcode::Add,
            "sub" => Opcode::Sub,
            "mul" => Opcode::Mul,
            "div" => Opcode::Div,
            "rem" => Opcode::Rem,
            "and" => Opcode::And,
            "or" => Opcode::Or,
            "xor" => Opcode::Xor,
            "shl" => Opcode::Shl,
            "shr" => Opcode::Shr,
            "select" => Opcode::Select,
            "load.shared" => Opcode::LoadShared,
            "store.shared" => Opcode::StoreShared,
            "load.global" => Opcode::LoadGlobal,
            "store.global" => Opcode::StoreGlobal,
            "tid" => Opcode::Tid,
            "const" => Opcode::Const,
            "barrier" => Opcode::Barrier,
            _ => return None,
        };
        Some(op)
    }

    /// Number of value operands (the global array name of `*.global` is not counted).
    pub fn arity(self) -> usize {
        match self {
            Opcode::Tid | Opcode::Barrier => 0,
            Opcode::Const | Opcode::LoadShared | Opcode::LoadGlobal => 1,
            Opcode::Select => 3,
            _ => 2,
        }
    }

    pub fn has_result(self) -> bool {
        !matches!(
            self,
            Opcode::StoreShared | Opcode::StoreGlobal | Opcode::Barrier
        )
    }

    pub fn names_global(self) -> bool {
        matches!(self, Opcode::LoadGlobal | Opcode::StoreGlobal)
    }

    pub fn is_store(self) -> bool {
        matches!(self, Opcode::StoreShared | Opcode::StoreGlobal)
    }

    pub fn is_load(self) -> bool {
        matches!(self, Opcode::LoadShared | Opcode::LoadGlobal)
    }

    /// Free of side effects and unable to trap: safe to delete when unused.
    pub fn is_pure(self) -> bool {
        !(self.is_store()
            || self.is_load()
            || matches!(self, Opcode::Div | Opcode::Rem | Opcode::Barrier))
    }

    pub fn kind(self) -> OpKind {
        match self {
            Opcode::Add => OpKind::Add,
            Opcode::Sub => OpKind::Sub,
            Opcode::Mul => OpKind::Mul,
            Opcode::Div => OpKind::Div,
            Opcode::Rem => OpKind::Rem,
            Opcode::And => OpKind::And,
            Opcode::Or => OpKind::Or,
            Opcode::Xor => OpKind::Xor,
            Opcode::Shl => OpKind::Shl,
            Opcode::Shr => OpKind::Shr,
            Opcode::Icmp(_) => OpKind::Icmp,
            Opcode::Select => OpKind::Select,
            Opcode::LoadShared => OpKind::LoadShared,
            Opcode::StoreShared => OpKind::StoreShared,
            Opcode::LoadGlobal => OpKind::LoadGlobal,
            Opcode::StoreGlobal => OpKind::StoreGlobal,
            Opcode::Tid => OpKind::Tid,
            Opcode::Const => OpKind::Const,
            Opcode::Barrier => OpKind::Barrier,
        }
    }
}

/// Instruction type as seen by the cost model. Comparison predicates collapse
/// into a single `icmp` kind; phis and terminators have their own kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpKind {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    Icmp,
    Select,
    LoadShared,
    StoreShared,
    LoadGlobal,
    StoreGlobal,
    Tid,
    Const,
    Barrier,
    Phi,
    Br,
    CondBr,
    Ret,
}

impl OpKind {
    pub const ALL: [OpKind; 23] = [
        OpKind::Add,
        OpKind::Sub,
        OpKind::Mul,
        OpKind::Div,
        OpKind::Rem,
        OpKind::And,
        OpKind::Or,
        OpKind::Xor,
        OpKind::Shl,
        OpKind::Shr,
        OpKind::Icmp,
        OpKind::Select,
        OpKind::LoadShared,
        OpKind::StoreShared,
        OpKind::LoadGlobal,
        OpKind::StoreGlobal,
        OpKind::Tid,
        OpKind::Const,
        OpKind::Barrier,
        OpKind::Phi,
        OpKind::Br,
        OpKind::CondBr,
        OpKind::Ret,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Div => "div",
            OpKind::Rem => "rem",
            OpKind::And => "and",
            OpKind::Or => "or",
            OpKind::Xor => "xor",
            OpKind::Shl => "shl",
            OpKind::Shr => "shr",
            OpKind::Icmp => "icmp",
            OpKind::Select => "select",
            OpKind::LoadShared => "load.shared",
            OpKind::StoreShared => "store.shared",
            OpKind::LoadGlobal => "load.global",
            OpKind::StoreGlobal => "store.global",
            OpKind::Tid => "tid",
            OpKind::Const => "const",
            OpKind::Barrier => "barrier",
            OpKind::Phi => "phi",
            OpKind::Br => "br",
            OpKind::CondBr => "condbr",
            OpKind::Ret => "ret",
        }
    }

    pub fn from_name(s: &str) -> Option<OpKind> {
        OpKind::ALL.iter().copied().find(|k| k.name() == s)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operand {
    Value(String),
    Imm(i32),
    Undef,
}

impl Operand {
    pub fn value(name: impl Into<String>) -> Operand {
        Operand::Value(name.into())
    }

    pub fn as_value(&self) -> Option<&str> {
        match self {
            Operand::Value(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Value(v) => write!(f, "%{v}"),
            Operand::Imm(i) => write!(f, "{i}"),
            Operand::Undef => f.write_str("undef"),
        }
    }
}

impl Serialize for Operand {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inst {
    pub result: Option<String>,
    pub opcode: Opcode,
    /// Global array operated on by `load.global` / `store.global`.
    pub mem: Option<String>,
    pub args: Vec<Operand>,
}

impl Inst {
    pub fn new(result: Option<String>, opcode: Opcode, args: Vec<Operand>) -> Inst {
        Inst {
            result,
            opcode,
            mem: None,
            args,
        }
    }

    pub fn with_mem(mut self, mem: impl Into<String>) -> Inst {
        self.mem = Some(mem.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phi {
    pub result: String,
    /// `(value, predecessor label)` pairs.
    pub incoming: Vec<(Operand, String)>,
}

impl Phi {
    pub fn incoming_from(&self, pred: &str) -> Option<&Operand> {
        self.incoming
            .iter()
            .find(|(_, b)| b == pred)
            .map(|(v, _)| v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Terminator {
    Br(String),
    CondBr {
        cond: Operand,
        then_to: String,
        else_to: String,
    },
    Ret(Option<Operand>),
}

impl Terminator {
    pub fn kind(&self) -> OpKind {
        match self {
            Terminator::Br(_) => OpKind::Br,
            Terminator::CondBr { .. } => OpKind::CondBr,
            Terminator::Ret(_) => OpKind::Ret,
        }
    }

    /// Successor labels in role order (taken, fallthrough). Duplicates are kept.
    pub fn successors(&self) -> Vec<&str> {
        match self {
            Terminator::Br(t) => vec![t],
            Terminator::CondBr {
                then_to, else_to, ..
            } => vec![then_to, else_to],
            Terminator::Ret(_) => vec![],
        }
    }

    pub fn successors_mut(&mut self) -> Vec<&mut String> {
        match self {
            Terminator::Br(t) => vec![t],
            Terminator::CondBr {
                then_to, else_to, ..
            } => vec![then_to, else_to],
            Terminator::Ret(_) => vec![],
        }
    }

    pub fn operands(&self) -> Vec<&Operand> {
        match self {
            Terminator::CondBr { cond, .. } => vec![cond],
            Terminator::Ret(Some(v)) => vec![v],
            _ => vec![],
        }
    }

    pub fn operands_mut(&mut self) -> Vec<&mut Operand> {
        match self {
            Terminator::CondBr { cond, .. } => vec![cond],
            Terminator::Ret(Some(v)) => vec![v],
            _ => vec![],
        }
    }

    pub fn retarget(&mut self, from: &str, to: &str) {
        for s in self.successors_mut() {
            if s == from {
                *s = to.to_string();
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub label: String,
    pub phis: Vec<Phi>,
    pub insts: Vec<Inst>,
    pub term: Terminator,
}

impl Block {
    pub fn new(label: impl Into<String>, term: Terminator) -> Block {
        Block {
            label: label.into(),
            phis: Vec::new(),
            insts: Vec::new(),
            term,
        }
    }

    /// Distinct successor labels, in role order.
    pub fn succ_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in self.term.successors() {
            if !out.iter().any(|o| o == s) {
                out.push(s.to_string());
            }
        }
        out
    }

    pub fn defs(&self) -> impl Iterator<Item = &str> {
        self.phis
            .iter()
            .map(|p| p.result.as_str())
            .chain(self.insts.iter().filter_map(|i| i.result.as_deref()))
    }

    pub fn contains_opcode(&self, op: Opcode) -> bool {
        self.insts.iter().any(|i| i.opcode == op)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemDecl {
    pub name: String,
    pub len: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub params: Vec<String>,
    pub shared: Vec<MemDecl>,
    pub blocks: Vec<Block>,
}

impl Function {
    pub fn entry(&self) -> &Block {
        &self.blocks[0]
    }

    pub fn block(&self, label: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.label == label)
    }

    pub fn block_mut(&mut self, label: &str) -> Option<&mut Block> {
        self.blocks.iter_mut().find(|b| b.label == label)
    }

    pub fn block_index(&self, label: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.label == label)
    }

    /// Total shared-memory words; shared arrays are laid out back to back.
    pub fn shared_len(&self) -> u32 {
        self.shared.iter().map(|d| d.len).sum()
    }

    /// Offset of a shared array in the flat shared address space.
    pub fn shared_offset(&self, name: &str) -> Option<u32> {
        let mut off = 0;
        for d in &self.shared {
            if d.name == name {
                return Some(off);
            }
            off += d.len;
        }
        None
    }

    /// Distinct predecessor labels of `label`, in block order.
    pub fn preds(&self, label: &str) -> Vec<String> {
        self.blocks
            .iter()
            .filter(|b| b.term.successors().contains(&label))
            .map(|b| b.label.clone())
            .collect()
    }

    pub fn all_value_names(&self) -> HashSet<String> {
        let mut names: HashSet<String> = self.params.iter().cloned().collect();
        for b in &self.blocks {
            names.extend(b.defs().map(str::to_string));
        }
        names
    }

    /// Label of the block defining `value`, if it is not a parameter.
    pub fn def_block(&self, value: &str) -> Option<&str> {
        self.blocks
            .iter()
            .find(|b| b.defs().any(|d| d == value))
            .map(|b| b.label.as_str())
    }

    /// Replace every use of the values in `map` (phis, instructions, terminators).
    pub fn substitute_uses(&mut self, map: &HashMap<String, Operand>) {
        if map.is_empty() {
            return;
        }
        for b in &mut self.blocks {
            substitute_in_block(b, map);
        }
    }

    pub fn use_count(&self, value: &str) -> usize {
        let mut n = 0;
        for b in &self.blocks {
            for p in &b.phis {
                n += p
                    .incoming
                    .iter()
                    .filter(|(v, _)| v.as_value() == Some(value))
                    .count();
            }
            for i in &b.insts {
                n += i
                    .args
                    .iter()
                    .filter(|a| a.as_value() == Some(value))
                    .count();
            }
            n += b
                .term
                .operands()
                .iter()
                .filter(|a| a.as_value() == Some(value))
                .count();
        }
        n
    }

    /// Rename a predecessor label inside the phis of `block`.
    pub fn rename_phi_pred(&mut self, block: &str, from: &str, to: &str) {
        if let Some(b) = self.block_mut(block) {
            for p in &mut b.phis {
                for (_, pred) in &mut p.incoming {
                    if pred == from {
                        *pred = to.to_string();
                    }
                }
            }
        }
    }
}

pub(crate) fn substitute_in_block(b: &mut Block, map: &HashMap<String, Operand>) {
    let subst = |op: &mut Operand| {
        if let Operand::Value(v) = op {
            if let Some(r) = map.get(v.as_str()) {
                *op = r.clone();
            }
        }
    };
    for p in &mut b.phis {
        for (v, _) in &mut p.incoming {
            subst(v);
        }
    }
    for i in &mut b.insts {
        for a in &mut i.args {
            subst(a);
        }
    }
    for a in b.term.operands_mut() {
        subst(a);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Module {
    pub globals: Vec<MemDecl>,
    pub functions: Vec<Function>,
}

impl Module {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_mut(&mut self, name: &str) -> Option<&mut Function> {
        self.functions.iter_mut().find(|f| f.name == name)
    }

    pub fn global(&self, name: &str) -> Option<&MemDecl> {
        self.globals.iter().find(|g| g.name == name)
    }
}

/// Generates names that do not collide with anything already in a function.
#[derive(Debug, Clone)]
pub struct NameGen {
    taken: HashSet<String>,
}

impl NameGen {
    pub fn for_function(f: &Function) -> NameGen {
        let mut taken = f.all_value_names();
        taken.extend(f.blocks.iter().map(|b| b.label.clone()));
        NameGen { taken }
    }

    /// `base` itself if free, otherwise `base.1`, `base.2`, ...
    pub fn fresh(&mut self, base: &str) -> String {
        if self.taken.insert(base.to_string()) {
            return base.to_string();
        }
        let mut n = 1;
        loop {
            let cand = format!("{base}.{n}");
            if self.taken.insert(cand.clone()) {
                return cand;
            }
            n += 1;
        }
    }

    pub fn reserve(&mut self, name: &str) {
        self.taken.insert(name.to_string());
    }
}
