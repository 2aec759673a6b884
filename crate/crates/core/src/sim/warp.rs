use std::collections::{BTreeMap, HashMap};

use crate::analysis::{compute_postdominators, Cfg};
use crate::ir::{Function, Module, Opcode, Operand, Terminator};

use super::{
    ExecResult, FaultKind, Fixture, LaneOutcome, MemSpace, SimConfig, SimError, TaintViolation,
    WarpExecStats,
};

const MAX_RECORDED_VIOLATIONS: usize = 256;

#[derive(Debug, Clone, Copy)]
enum Src {
    Reg(usize),
    Imm(i32),
    Undef,
}

#[derive(Debug)]
struct CInst {
    dst: Option<usize>,
    op: Opcode,
    global: usize,
    args: Vec<Src>,
    lat: u64,
}

#[derive(Debug)]
enum CTerm {
    Br(usize),
    CondBr(Src, usize, usize),
    Ret(Option<Src>),
}

#[derive(Debug)]
struct CBlock {
    phis: Vec<(usize, Vec<(usize, Src)>)>,
    insts: Vec<CInst>,
    term: CTerm,
    term_lat: u64,
    ipdom: Option<usize>,
}

struct Compiled {
    blocks: Vec<CBlock>,
    nregs: usize,
}

fn compile(m: &Module, f: &Function, cfg: &SimConfig) -> Result<Compiled, SimError> {
    let graph = Cfg::new(f)?;
    let pdom = compute_postdominators(f)?;
    let mut regs: HashMap<&str, usize> = HashMap::new();
    for p in &f.params {
        let n = regs.len();
        regs.entry(p.as_str()).or_insert(n);
    }
    for b in &f.blocks {
        for d in b.defs() {
            let n = regs.len();
            regs.entry(d).or_insert(n);
        }
    }
    let src = |o: &Operand| match o {
        Operand::Value(v) => regs.get(v.as_str()).map_or(Src::Undef, |&r| Src::Reg(r)),
        Operand::Imm(i) => Src::Imm(*i),
        Operand::Undef => Src::Undef,
    };
    let bidx = |l: &str| graph.idx(l).expect("targets were checked");
    let mut blocks = Vec::with_capacity(f.blocks.len());
    for (i, b) in f.blocks.iter().enumerate() {
        let phis = b
            .phis
            .iter()
            .map(|p| {
                let inc = p
                    .incoming
                    .iter()
                    .filter_map(|(v, l)| graph.idx(l).map(|pi| (pi, src(v))))
                    .collect();
                (regs[p.result.as_str()], inc)
            })
            .collect();
        let mut insts = Vec::with_capacity(b.insts.len());
        for ins in &b.insts {
            let global = match &ins.mem {
                Some(g) => m
                    .globals
                    .iter()
                    .position(|d| &d.name == g)
                    .ok_or_else(|| SimError::UnknownMemory(g.clone()))?,
                None => usize::MAX,
            };
            insts.push(CInst {
                dst: ins.result.as_deref().map(|r| regs[r]),
                op: ins.opcode,
                global,
                args: ins.args.iter().map(src).collect(),
                lat: u64::from(cfg.latency.get(ins.opcode.kind())),
            });
        }
        let term = match &b.term {
            Terminator::Br(t) => CTerm::Br(bidx(t)),
            Terminator::CondBr {
                cond,
                then_to,
                else_to,
            } => CTerm::CondBr(src(cond), bidx(then_to), bidx(else_to)),
            Terminator::Ret(v) => CTerm::Ret(v.as_ref().map(src)),
        };
        blocks.push(CBlock {
            phis,
            insts,
            term,
            term_lat: u64::from(cfg.latency.get(b.term.kind())),
            ipdom: pdom.parent(i),
        });
    }
    Ok(Compiled {
        blocks,
        nregs: regs.len(),
    })
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    block: usize,
    rpc: Option<usize>,
    mask: u64,
}

struct Lanes {
    vals: Vec<Vec<i32>>,
    taint: Vec<Vec<bool>>,
}

impl Lanes {
    fn read(&self, lane: usize, s: Src) -> (i32, bool) {
        match s {
            Src::Reg(r) => (self.vals[lane][r], self.taint[lane][r]),
            Src::Imm(i) => (i, false),
            Src::Undef => (0, true),
        }
    }

    fn write(&mut self, lane: usize, r: usize, v: (i32, bool)) {
        self.vals[lane][r] = v.0;
        self.taint[lane][r] = v.1;
    }
}

fn lanes_of(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |l| mask & (1u64 << l) != 0)
}

fn alu(op: Opcode, a: i32, b: i32) -> Option<i32> {
    Some(match op {
        Opcode::Add => a.wrapping_add(b),
        Opcode::Sub => a.wrapping_sub(b),
        Opcode::Mul => a.wrapping_mul(b),
        Opcode::Div => {
            if b == 0 {
                return None;
            }
            a.wrapping_div(b)
        }
        Opcode::Rem => {
            if b == 0 {
                return None;
            }
            a.wrapping_rem(b)
        }
        Opcode::And => a & b,
        Opcode::Or => a | b,
        Opcode::Xor => a ^ b,
        Opcode::Shl => a.wrapping_shl((b & 31) as u32),
        Opcode::Shr => a >> (b & 31),
        Opcode::Icmp(p) => i32::from(p.eval(a, b)),
        _ => unreachable!("not an ALU opcode"),
    })
}

/// Run `f` on one warp. Every lane starts at the entry with its own argument
/// row; divergent branches serialize the true side first and reconverge at the
/// branch block's immediate post-dominator.
pub fn execute_warp(
    m: &Module,
    f: &Function,
    fx: &Fixture,
    cfg: &SimConfig,
) -> Result<ExecResult, SimError> {
    let ws = cfg.warp_size;
    if ws == 0 || ws > 64 {
        return Err(SimError::BadWarpSize(ws));
    }
    let code = compile(m, f, cfg)?;

    let rows = fx.args.len();
    if !(rows == ws || rows == 1 || (rows == 0 && f.params.is_empty())) {
        return Err(SimError::ArgRows {
            rows,
            warp_size: ws,
        });
    }
    for (row, a) in fx.args.iter().enumerate() {
        if a.len() != f.params.len() {
            return Err(SimError::ArgCount {
                row,
                expected: f.params.len(),
                got: a.len(),
            });
        }
    }

    let mut global: Vec<Vec<i32>> = m.globals.iter().map(|g| vec![0; g.len as usize]).collect();
    for (name, init) in &fx.global {
        let gi = m
            .globals
            .iter()
            .position(|g| &g.name == name)
            .ok_or_else(|| SimError::UnknownMemory(name.clone()))?;
        if init.len() > global[gi].len() {
            return Err(SimError::InitTooLong {
                name: name.clone(),
                len: m.globals[gi].len,
                got: init.len(),
            });
        }
        global[gi][..init.len()].copy_from_slice(init);
    }
    let mut shared = vec![0i32; f.shared_len() as usize];
    for (name, init) in &fx.shared {
        let decl = f
            .shared
            .iter()
            .find(|s| &s.name == name)
            .ok_or_else(|| SimError::UnknownMemory(name.clone()))?;
        if init.len() > decl.len as usize {
            return Err(SimError::InitTooLong {
                name: name.clone(),
                len: decl.len,
                got: init.len(),
            });
        }
        let off = f.shared_offset(name).expect("declared") as usize;
        shared[off..off + init.len()].copy_from_slice(init);
    }

    let mut lanes = Lanes {
        vals: vec![vec![0; code.nregs]; ws],
        taint: vec![vec![false; code.nregs]; ws],
    };
    for lane in 0..ws {
        if let Some(row) = fx.args.get(if rows == 1 { 0 } else { lane }) {
            lanes.vals[lane][..row.len()].copy_from_slice(row);
        }
    }

    let mut outcome = vec![LaneOutcome::Running; ws];
    let mut prev = vec![usize::MAX; ws];
    let mut violations: Vec<TaintViolation> = Vec::new();
    let mut stats = WarpExecStats::default();
    let mut useful: u64 = 0;
    let mut threads: u64 = 0;
    let full: u64 = if ws == 64 { u64::MAX } else { (1u64 << ws) - 1 };
    let mut retired: u64 = 0;
    let mut stack = vec![Entry {
        block: 0,
        rpc: None,
        mask: full,
    }];
    let mut steps: u64 = 0;

    let violate =
        |violations: &mut Vec<TaintViolation>, lane: usize, block: usize, site: String| {
            if violations.len() < MAX_RECORDED_VIOLATIONS {
                violations.push(TaintViolation {
                    lane,
                    block: f.blocks[block].label.clone(),
                    site,
                });
            }
        };

    while let Some(top) = stack.last().copied() {
        if Some(top.block) == top.rpc {
            stack.pop();
            continue;
        }
        let bi = top.block;
        let block = &code.blocks[bi];
        let mut active = top.mask & !retired;
        if active == 0 {
            stack.pop();
            continue;
        }

        for lane in lanes_of(active) {
            let staged: Vec<(usize, (i32, bool))> = block
                .phis
                .iter()
                .map(|(dst, inc)| {
                    let v = inc
                        .iter()
                        .find(|(p, _)| *p == prev[lane])
                        .map_or((0, true), |(_, s)| lanes.read(lane, *s));
                    (*dst, v)
                })
                .collect();
            for (dst, v) in staged {
                lanes.write(lane, dst, v);
            }
        }

        for ins in &block.insts {
            steps += 1;
            if steps > cfg.max_steps {
                return Err(SimError::NonTermination(cfg.max_steps));
            }
            stats.issued_instructions += 1;
            threads += ins.lat * ws as u64;
            useful += ins.lat * u64::from(active.count_ones());
            match ins.op {
                Opcode::LoadShared | Opcode::StoreShared => stats.shared_mem_issues += 1,
                Opcode::LoadGlobal | Opcode::StoreGlobal => stats.global_mem_issues += 1,
                _ => {}
            }
            let mut faulted: u64 = 0;
            for lane in lanes_of(active) {
                let arg = |k: usize| lanes.read(lane, ins.args[k]);
                let mut fault = |kind: FaultKind| {
                    outcome[lane] = LaneOutcome::Fault {
                        fault: kind,
                        block: f.blocks[bi].label.clone(),
                    };
                    faulted |= 1u64 << lane;
                };
                let result: Option<(i32, bool)> = match ins.op {
                    Opcode::Tid => Some((lane as i32, false)),
                    Opcode::Const => Some(arg(0)),
                    Opcode::Barrier => None,
                    Opcode::Select => {
                        let (c, ct) = arg(0);
                        let (v, vt) = if c != 0 { arg(1) } else { arg(2) };
                        Some((v, vt || ct))
                    }
                    Opcode::LoadShared | Opcode::LoadGlobal => {
                        let (addr, at) = arg(0);
                        if at {
                            violate(&mut violations, lane, bi, "load address".into());
                        }
                        let (mem, space, name) = if ins.op == Opcode::LoadShared {
                            (&shared, MemSpace::Shared, "shared")
                        } else {
                            (
                                &global[ins.global],
                                MemSpace::Global,
                                m.globals[ins.global].name.as_str(),
                            )
                        };
                        match usize::try_from(addr).ok().and_then(|a| mem.get(a)) {
                            Some(&v) => Some((v, false)),
                            None => {
                                fault(FaultKind::OutOfBounds {
                                    space,
                                    array: name.to_string(),
                                    index: i64::from(addr),
                                });
                                None
                            }
                        }
                    }
                    Opcode::StoreShared | Opcode::StoreGlobal => {
                        let (addr, at) = arg(0);
                        let (val, vt) = arg(1);
                        if at || vt {
                            violate(&mut violations, lane, bi, "store".into());
                        }
                        let (mem, space, name) = if ins.op == Opcode::StoreShared {
                            (&mut shared, MemSpace::Shared, "shared")
                        } else {
                            (
                                &mut global[ins.global],
                                MemSpace::Global,
                                m.globals[ins.global].name.as_str(),
                            )
                        };
                        match usize::try_from(addr).ok().and_then(|a| mem.get_mut(a)) {
                            Some(slot) => *slot = val,
                            None => fault(FaultKind::OutOfBounds {
                                space,
                                array: name.to_string(),
                                index: i64::from(addr),
                            }),
                        }
                        None
                    }
                    op => {
                        let (a, at) = arg(0);
                        let (b, bt) = arg(1);
                        match alu(op, a, b) {
                            Some(v) => Some((v, at || bt)),
                            None => {
                                fault(FaultKind::DivideByZero);
                                None
                            }
                        }
                    }
                };
                if let (Some(dst), Some(v)) = (ins.dst, result) {
                    lanes.write(lane, dst, v);
                }
            }
            retired |= faulted;
            active &= !faulted;
            if active == 0 {
                break;
            }
        }
        if active == 0 {
            continue;
        }

        steps += 1;
        if steps > cfg.max_steps {
            return Err(SimError::NonTermination(cfg.max_steps));
        }
        stats.issued_instructions += 1;
        threads += block.term_lat * ws as u64;
        useful += block.term_lat * u64::from(active.count_ones());
        for lane in lanes_of(active) {
            prev[lane] = bi;
        }
        match block.term {
            CTerm::Br(t) => stack.last_mut().expect("nonempty").block = t,
            CTerm::Ret(v) => {
                for lane in lanes_of(active) {
                    let value = v.map(|s| {
                        let (x, t) = lanes.read(lane, s);
                        if t {
                            violate(&mut violations, lane, bi, "return value".into());
                        }
                        x
                    });
                    outcome[lane] = LaneOutcome::Returned { value };
                }
                retired |= active;
            }
            CTerm::CondBr(c, t, e) => {
                let mut tmask = 0u64;
                for lane in lanes_of(active) {
                    let (x, tainted) = lanes.read(lane, c);
                    if tainted {
                        violate(&mut violations, lane, bi, "branch condition".into());
                    }
                    if x != 0 {
                        tmask |= 1u64 << lane;
                    }
                }
                let fmask = active & !tmask;
                let top = stack.last_mut().expect("nonempty");
                if t == e || fmask == 0 {
                    top.block = t;
                } else if tmask == 0 {
                    top.block = e;
                } else {
                    stats.divergent_branch_count += 1;
                    let rpc = block.ipdom.expect("a branching block has a post-dominator");
                    top.block = rpc;
                    stack.push(Entry {
                        block: e,
                        rpc: Some(rpc),
                        mask: fmask,
                    });
                    stack.push(Entry {
                        block: t,
                        rpc: Some(rpc),
                        mask: tmask,
                    });
                }
            }
        }
    }

    stats.thread_cycles = threads;
    stats.useful_thread_cycles = useful;
    stats.serialized_cycles = threads - useful;
    stats.utilization = if threads == 0 {
        1.0
    } else {
        useful as f64 / threads as f64
    };
    let global = m
        .globals
        .iter()
        .zip(global)
        .map(|(d, v)| (d.name.clone(), v))
        .collect::<BTreeMap<_, _>>();
    Ok(ExecResult {
        lanes: outcome,
        global,
        shared,
        stats,
        taint_violations: violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;

    fn run(src: &str, ws: usize, args: Vec<Vec<i32>>) -> ExecResult {
        let m = parse_module(src).unwrap();
        let fx = Fixture {
            args,
            ..Fixture::default()
        };
        execute_warp(&m, &m.functions[0], &fx, &SimConfig::with_warp_size(ws)).unwrap()
    }

    #[test]
    fn uniform_code_is_fully_utilized() {
        let r = run(
            "fn f(%a) {\n^e:\n %x = add %a 1\n %y = mul %x %x\n ret %y\n}",
            8,
            vec![vec![3]],
        );
        assert_eq!(r.stats.utilization, 1.0);
        assert_eq!(r.stats.issued_instructions, 3);
        assert_eq!(r.stats.thread_cycles, 24);
        assert!(r
            .lanes
            .iter()
            .all(|l| *l == LaneOutcome::Returned { value: Some(16) }));
    }

    const ARMS: &str = "global out[8]\nfn f() shared s[8] {\n^a:\n %t = tid\n %c = icmp.lt %t 4\n condbr %c ^l ^r\n^l:\n %x = load.shared %t\n store.global out %t %x\n br ^j\n^r:\n %y = load.shared %t\n store.global out %t %y\n br ^j\n^j:\n ret\n}";

    #[test]
    fn half_split_diamond_serializes_arms() {
        let r = run(ARMS, 8, vec![]);
        // uniform: tid, icmp, condbr (3 cycles); each arm: 20 + 100 + 1 on half the lanes; ret 1
        let arm = 121u64;
        assert_eq!(r.stats.divergent_branch_count, 1);
        assert_eq!(r.stats.thread_cycles, (3 + 2 * arm + 1) * 8);
        assert_eq!(r.stats.useful_thread_cycles, (3 + 1) * 8 + 2 * arm * 4);
        assert_eq!(r.stats.shared_mem_issues, 2);
        assert!(r.taint_violations.is_empty());
    }

    #[test]
    fn faults_are_per_lane() {
        let r = run(
            "fn f() {\n^e:\n %t = tid\n %q = div 12 %t\n ret %q\n}",
            4,
            vec![],
        );
        assert!(matches!(
            r.lanes[0],
            LaneOutcome::Fault {
                fault: FaultKind::DivideByZero,
                ..
            }
        ));
        assert_eq!(r.lanes[3], LaneOutcome::Returned { value: Some(4) });
    }

    #[test]
    fn undef_reaching_a_branch_is_flagged() {
        let r = run(
            "fn f() {\n^e:\n %x = add undef 1\n condbr %x ^a ^a\n^a:\n ret\n}",
            2,
            vec![],
        );
        assert_eq!(r.taint_violations.len(), 2);
        let r = run(
            "fn f() {\n^e:\n %t = tid\n %x = select 1 %t undef\n ret %x\n}",
            2,
            vec![],
        );
        assert!(r.taint_violations.is_empty());
    }

    #[test]
    fn loop_with_divergent_trip_count() {
        let r = run(
            "fn f() {\n^e:\n %t = tid\n br ^h\n^h:\n %i = phi 0:^e, %j:^h\n %j = add %i 1\n %c = icmp.le %j %t\n condbr %c ^h ^x\n^x:\n ret %j\n}",
            4,
            vec![],
        );
        for (lane, o) in r.lanes.iter().enumerate() {
            assert_eq!(
                *o,
                LaneOutcome::Returned {
                    value: Some(lane as i32 + 1)
                }
            );
        }
    }
}
