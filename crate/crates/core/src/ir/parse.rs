use std::collections::HashSet;

use thiserror::Error;

use super::{Block, Function, Inst, MemDecl, Module, Opcode, Operand, Phi, Terminator};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("{line}:{col}: duplicate definition of {what}")]
    Duplicate {
        line: usize,
        col: usize,
        what: String,
    },
    #[error("{line}:{col}: unknown opcode `{name}`")]
    UnknownOpcode {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("{line}:{col}: `{opcode}` expects {expected} operand(s)")]
    Arity {
        line: usize,
        col: usize,
        opcode: String,
        expected: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Value(String),
    Label(String),
    Int(i64),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    for (lineno, line) in src.lines().enumerate() {
        let line_no = lineno + 1;
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let take_name = |start: usize| -> (String, usize) {
                let mut j = start;
                while j < chars.len() && is_name_char(chars[j]) {
                    j += 1;
                }
                (chars[start..j].iter().collect(), j)
            };
            match c {
                '%' | '^' => {
                    let (name, j) = take_name(i + 1);
                    if name.is_empty() {
                        return Err(ParseError::Syntax {
                            line: line_no,
                            col,
                            msg: format!("expected a name after `{c}`"),
                        });
                    }
                    let tok = if c == '%' {
                        Tok::Value(name)
                    } else {
                        Tok::Label(name)
                    };
                    out.push(Token {
                        tok,
                        line: line_no,
                        col,
                    });
                    i = j;
                }
                '-' | '0'..='9' => {
                    let mut j = i + 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    let text: String = chars[i..j].iter().collect();
                    let n = text.parse::<i64>().map_err(|_| ParseError::Syntax {
                        line: line_no,
                        col,
                        msg: format!("bad integer `{text}`"),
                    })?;
                    out.push(Token {
                        tok: Tok::Int(n),
                        line: line_no,
                        col,
                    });
                    i = j;
                }
                '(' | ')' | '{' | '}' | '[' | ']' | ':' | ',' | '=' => {
                    out.push(Token {
                        tok: Tok::Punct(c),
                        line: line_no,
                        col,
                    });
                    i += 1;
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let (name, j) = take_name(i);
                    out.push(Token {
                        tok: Tok::Ident(name),
                        line: line_no,
                        col,
                    });
                    i = j;
                }
                other => {
                    return Err(ParseError::Syntax {
                        line: line_no,
                        col,
                        msg: format!("unexpected character `{other}`"),
                    })
                }
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn loc(&self) -> (usize, usize) {
        match self.toks.get(self.pos) {
            Some(t) => (t.line, t.col),
            None => self
                .toks
                .last()
                .map(|t| (t.line, t.col + 1))
                .unwrap_or((1, 1)),
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.loc();
        Err(ParseError::Syntax {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect_punct(&mut self, c: char) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Punct(p)) if *p == c => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err(format!("expected `{c}`")),
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(p)) if *p == c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_ident(&mut self) -> Result<String, ParseError> {
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                self.err("expected a name")
            }
        }
    }

    fn expect_label(&mut self) -> Result<String, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Label(s)) => {
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected a block label `^name`"),
        }
    }

    fn expect_value_name(&mut self) -> Result<String, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Value(s)) => {
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected a value `%name`"),
        }
    }

    fn expect_int(&mut self) -> Result<i64, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Int(n)) => {
                self.pos += 1;
                Ok(n)
            }
            _ => self.err("expected an integer"),
        }
    }

    fn is_operand_start(&self) -> bool {
        match self.peek() {
            Some(Tok::Value(_)) | Some(Tok::Int(_)) => true,
            Some(Tok::Ident(s)) => s == "undef",
            _ => false,
        }
    }

    fn operand(&mut self) -> Result<Operand, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Value(v)) => {
                self.pos += 1;
                Ok(Operand::Value(v))
            }
            Some(Tok::Int(n)) => {
                if n < i64::from(i32::MIN) || n > i64::from(i32::MAX) {
                    return self.err(format!("immediate {n} does not fit in 32 bits"));
                }
                self.pos += 1;
                Ok(Operand::Imm(n as i32))
            }
            Some(Tok::Ident(s)) if s == "undef" => {
                self.pos += 1;
                Ok(Operand::Undef)
            }
            _ => self.err("expected an operand"),
        }
    }

    fn mem_decl(&mut self) -> Result<MemDecl, ParseError> {
        let name = self.expect_ident()?;
        self.expect_punct('[')?;
        let len = self.expect_int()?;
        if !(0..=i64::from(u32::MAX)).contains(&len) {
            return self.err("array length out of range");
        }
        self.expect_punct(']')?;
        Ok(MemDecl {
            name,
            len: len as u32,
        })
    }

    fn on_line(&self, line: usize) -> bool {
        self.toks.get(self.pos).is_some_and(|t| t.line == line)
    }

    fn function(&mut self) -> Result<Function, ParseError> {
        // `fn` already consumed
        let name = self.expect_ident()?;
        self.expect_punct('(')?;
        let mut params = Vec::new();
        let mut seen = HashSet::new();
        if !self.eat_punct(')') {
            loop {
                let (line, col) = self.loc();
                let p = self.expect_value_name()?;
                if self.eat_punct(':') {
                    let ty = self.expect_ident()?;
                    if ty != "i32" {
                        return Err(ParseError::Syntax {
                            line,
                            col,
                            msg: format!("unsupported type `{ty}`"),
                        });
                    }
                }
                if !seen.insert(p.clone()) {
                    return Err(ParseError::Duplicate {
                        line,
                        col,
                        what: format!("%{p}"),
                    });
                }
                params.push(p);
                if self.eat_punct(')') {
                    break;
                }
                self.expect_punct(',')?;
            }
        }
        let mut shared = Vec::new();
        while matches!(self.peek(), Some(Tok::Ident(s)) if s == "shared") {
            self.pos += 1;
            let (line, col) = self.loc();
            let d = self.mem_decl()?;
            if shared.iter().any(|s: &MemDecl| s.name == d.name) {
                return Err(ParseError::Duplicate {
                    line,
                    col,
                    what: format!("shared {}", d.name),
                });
            }
            shared.push(d);
        }
        self.expect_punct('{')?;
        let mut blocks: Vec<Block> = Vec::new();
        let mut values: HashSet<String> = params.iter().cloned().collect();
        while !self.eat_punct('}') {
            if self.peek().is_none() {
                return self.err("unexpected end of input inside function");
            }
            let (line, col) = self.loc();
            let label = match self.next() {
                Some(Tok::Label(l)) | Some(Tok::Ident(l)) => l,
                _ => {
                    self.pos -= 1;
                    return self.err("expected a block label");
                }
            };
            self.expect_punct(':')?;
            if blocks.iter().any(|b| b.label == label) {
                return Err(ParseError::Duplicate {
                    line,
                    col,
                    what: format!("^{label}"),
                });
            }
            let block = self.block(label, &mut values)?;
            blocks.push(block);
        }
        if blocks.is_empty() {
            return self.err(format!("function `{name}` has no blocks"));
        }
        Ok(Function {
            name,
            params,
            shared,
            blocks,
        })
    }

    fn define(
        &self,
        values: &mut HashSet<String>,
        name: &str,
        line: usize,
        col: usize,
    ) -> Result<(), ParseError> {
        if values.insert(name.to_string()) {
            Ok(())
        } else {
            Err(ParseError::Duplicate {
                line,
                col,
                what: format!("%{name}"),
            })
        }
    }

    fn block(&mut self, label: String, values: &mut HashSet<String>) -> Result<Block, ParseError> {
        let mut phis = Vec::new();
        let mut insts = Vec::new();
        loop {
            let (line, col) = self.loc();
            match self.peek().cloned() {
                Some(Tok::Value(result)) => {
                    self.pos += 1;
                    self.expect_punct('=')?;
                    let (oline, ocol) = self.loc();
                    let opname = self.expect_ident()?;
                    if opname == "phi" {
                        if !insts.is_empty() {
                            return Err(ParseError::Syntax {
                                line: oline,
                                col: ocol,
                                msg: "phi after non-phi".into(),
                            });
                        }
                        let mut incoming = Vec::new();
                        loop {
                            let v = self.operand()?;
                            self.expect_punct(':')?;
                            let pred = self.expect_label()?;
                            incoming.push((v, pred));
                            if !self.eat_punct(',') {
                                break;
                            }
                        }
                        self.define(values, &result, line, col)?;
                        phis.push(Phi { result, incoming });
                        continue;
                    }
                    let opcode = Opcode::from_mnemonic(&opname).ok_or_else(|| {
                        ParseError::UnknownOpcode {
                            line: oline,
                            col: ocol,
                            name: opname.clone(),
                        }
                    })?;
                    if !opcode.has_result() {
                        return Err(ParseError::Syntax {
                            line: oline,
                            col: ocol,
                            msg: format!("`{opname}` does not produce a value"),
                        });
                    }
                    let inst =
                        self.inst_body(Some(result.clone()), opcode, &opname, oline, ocol)?;
                    self.define(values, &result, line, col)?;
                    insts.push(inst);
                }
                Some(Tok::Ident(kw)) => {
                    self.pos += 1;
                    match kw.as_str() {
                        "br" => {
                            let t = self.expect_label()?;
                            return Ok(self.finish(label, phis, insts, Terminator::Br(t)));
                        }
                        "condbr" => {
                            let cond = self.operand()?;
                            let then_to = self.expect_label()?;
                            let else_to = self.expect_label()?;
                            return Ok(self.finish(
                                label,
                                phis,
                                insts,
                                Terminator::CondBr {
                                    cond,
                                    then_to,
                                    else_to,
                                },
                            ));
                        }
                        "ret" => {
                            let v = if self.is_operand_start() && self.on_line(line) {
                                Some(self.operand()?)
                            } else {
                                None
                            };
                            return Ok(self.finish(label, phis, insts, Terminator::Ret(v)));
                        }
                        "phi" => {
                            return Err(ParseError::Syntax {
                                line,
                                col,
                                msg: "phi must define a value".into(),
                            })
                        }
                        other => {
                            let opcode = Opcode::from_mnemonic(other).ok_or_else(|| {
                                ParseError::UnknownOpcode {
                                    line,
                                    col,
                                    name: other.to_string(),
                                }
                            })?;
                            if opcode.has_result() {
                                return Err(ParseError::Syntax {
                                    line,
                                    col,
                                    msg: format!("result of `{other}` must be named"),
                                });
                            }
                            let inst = self.inst_body(None, opcode, other, line, col)?;
                            insts.push(inst);
                        }
                    }
                }
                None => return self.err(format!("block ^{label} has no terminator")),
                _ => return self.err("expected an instruction"),
            }
        }
    }

    fn finish(&self, label: String, phis: Vec<Phi>, insts: Vec<Inst>, term: Terminator) -> Block {
        Block {
            label,
            phis,
            insts,
            term,
        }
    }

    fn inst_body(
        &mut self,
        result: Option<String>,
        opcode: Opcode,
        opname: &str,
        line: usize,
        col: usize,
    ) -> Result<Inst, ParseError> {
        let mem = if opcode.names_global() {
            match self.peek().cloned() {
                Some(Tok::Ident(n)) if n != "undef" => {
                    self.pos += 1;
                    Some(n)
                }
                _ => return self.err(format!("`{opname}` expects a global array name")),
            }
        } else {
            None
        };
        // Operands end at the end of the line.
        let mut args = Vec::new();
        while self.is_operand_start() && self.on_line(line) {
            args.push(self.operand()?);
        }
        if args.len() != opcode.arity() {
            return Err(ParseError::Arity {
                line,
                col,
                opcode: opname.to_string(),
                expected: opcode.arity(),
            });
        }
        if opcode == Opcode::Const && matches!(args[0], Operand::Value(_)) {
            return Err(ParseError::Syntax {
                line,
                col,
                msg: "`const` takes an immediate".into(),
            });
        }
        Ok(Inst {
            result,
            opcode,
            mem,
            args,
        })
    }
}

pub fn parse_module(src: &str) -> Result<Module, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let mut m = Module::default();
    while p.peek().is_some() {
        let (line, col) = p.loc();
        match p.next() {
            Some(Tok::Ident(kw)) if kw == "global" => {
                let (line, col) = p.loc();
                let d = p.mem_decl()?;
                if m.globals.iter().any(|g| g.name == d.name) {
                    return Err(ParseError::Duplicate {
                        line,
                        col,
                        what: format!("global {}", d.name),
                    });
                }
                m.globals.push(d);
            }
            Some(Tok::Ident(kw)) if kw == "fn" => {
                let f = p.function()?;
                if m.functions.iter().any(|g| g.name == f.name) {
                    return Err(ParseError::Duplicate {
                        line,
                        col,
                        what: format!("fn {}", f.name),
                    });
                }
                m.functions.push(f);
            }
            _ => {
                return Err(ParseError::Syntax {
                    line,
                    col,
                    msg: "expected `global` or `fn`".into(),
                })
            }
        }
    }
    Ok(m)
}

/// Parse source expected to hold exactly one function.
pub fn parse_function(src: &str) -> Result<Function, ParseError> {
    let m = parse_module(src)?;
    match <[Function; 1]>::try_from(m.functions) {
        Ok([f]) => Ok(f),
        Err(_) => Err(ParseError::Syntax {
            line: 1,
            col: 1,
            msg: "expected exactly one function".into(),
        }),
    }
}
