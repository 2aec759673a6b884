//! End-to-end checks: meld a module, compare it against the original on
//! random inputs, and measure what melding bought.

use rayon::prelude::*;
use serde::Serialize;

use crate::ir::{parse_module, LatencyModel, Module};
use crate::meld::{run_darm, MeldConfig, MeldError, MeldMode, MeldReport};
use crate::sim::{compare_runs, execute_warp, Fixture, SimConfig, SimError, WarpExecStats};

/// Meld every function of `m` (or the configured one) on a copy.
pub fn meld_module(
    m: &Module,
    cfg: &MeldConfig,
    lm: &LatencyModel,
) -> Result<(Module, Vec<MeldReport>), MeldError> {
    let mut out = m.clone();
    let reports = crate::meld::run_darm_module(&mut out, cfg, lm)?;
    Ok((out, reports))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleFailure {
    pub warp_size: usize,
    pub seed: u64,
    pub diff: String,
}

/// Run `function` from both modules on the same random fixtures and report
/// every disagreement.
pub fn oracle(
    before: &Module,
    after: &Module,
    function: &str,
    warp_sizes: &[usize],
    seeds: std::ops::Range<u64>,
    sim: &SimConfig,
) -> Result<Vec<OracleFailure>, SimError> {
    let f0 = before
        .function(function)
        .ok_or_else(|| SimError::UnknownFunction(function.to_string()))?;
    let f1 = after
        .function(function)
        .ok_or_else(|| SimError::UnknownFunction(function.to_string()))?;
    let jobs: Vec<(usize, u64)> = warp_sizes
        .iter()
        .flat_map(|&w| seeds.clone().map(move |s| (w, s)))
        .collect();
    let results: Result<Vec<Option<OracleFailure>>, SimError> = jobs
        .par_iter()
        .map(|&(warp_size, seed)| {
            let cfg = SimConfig {
                warp_size,
                ..sim.clone()
            };
            let fx = Fixture::random(before, f0, warp_size, seed);
            let a = execute_warp(before, f0, &fx, &cfg)?;
            let b = execute_warp(after, f1, &fx, &cfg)?;
            let v = compare_runs(&a, &b);
            Ok((!v.equal).then(|| OracleFailure {
                warp_size,
                seed,
                diff: v.diff.unwrap_or_default(),
            }))
        })
        .collect();
    Ok(results?.into_iter().flatten().collect())
}

/// Stats of one run on the seeded random fixture.
pub fn measure(
    m: &Module,
    function: &str,
    seed: u64,
    sim: &SimConfig,
) -> Result<WarpExecStats, SimError> {
    let f = m
        .function(function)
        .ok_or_else(|| SimError::UnknownFunction(function.to_string()))?;
    let fx = Fixture::random(m, f, sim.warp_size, seed);
    Ok(execute_warp(m, f, &fx, sim)?.stats)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "detail")]
pub enum BenchStatus {
    Melded,
    Unchanged,
    /// The pass refused the kernel, e.g. for having several returns.
    Rejected(String),
    /// Melded code disagreed with the original; always a bug.
    OracleFailed(String),
    /// The pass or the simulator hit an internal error.
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchRow {
    pub kernel: String,
    pub mode: MeldMode,
    pub threshold: f64,
    pub status: BenchStatus,
    pub melds: usize,
    pub mp_scores: Vec<f64>,
    pub selects_inserted: usize,
    pub replicated: bool,
    pub before: Option<WarpExecStats>,
    pub after: Option<WarpExecStats>,
    /// Drop in serialized cycles, in percent of the original's.
    pub serialized_reduction_pct: Option<f64>,
    /// Drop in total thread cycles, in percent of the original's.
    pub cycle_reduction_pct: Option<f64>,
}

impl BenchRow {
    pub fn melded(&self) -> bool {
        self.status == BenchStatus::Melded
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchConfig {
    pub modes: Vec<MeldMode>,
    pub thresholds: Vec<f64>,
    pub warp_size: usize,
    pub seed: u64,
    /// Random fixtures per warp size checked against the original.
    pub oracle_seeds: u64,
    pub oracle_warp_sizes: Vec<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            modes: vec![MeldMode::Darm, MeldMode::BranchFusion],
            thresholds: vec![0.0, 0.2, 0.35, 0.5],
            warp_size: 32,
            seed: 1,
            oracle_seeds: 10,
            oracle_warp_sizes: vec![4, 8, 32],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CapabilityRow {
    pub kernel: String,
    pub branch_fusion: bool,
    pub darm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchReport {
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
    /// Which kernels each mode melds at the default threshold.
    pub capability: Vec<CapabilityRow>,
}

impl BenchReport {
    pub fn failures(&self) -> Vec<&BenchRow> {
        self.rows
            .iter()
            .filter(|r| {
                matches!(
                    r.status,
                    BenchStatus::OracleFailed(_) | BenchStatus::Error(_)
                )
            })
            .collect()
    }

    /// Fixed-width text table.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<14} {:<14} {:>5}  {:<10} {:>5} {:>9} {:>9} {:>9}\n",
            "kernel", "mode", "thr", "status", "melds", "ser.red%", "cyc.red%", "util"
        );
        for r in &self.rows {
            let status = match &r.status {
                BenchStatus::Melded => "melded",
                BenchStatus::Unchanged => "unchanged",
                BenchStatus::Rejected(_) => "rejected",
                BenchStatus::OracleFailed(_) => "MISMATCH",
                BenchStatus::Error(_) => "ERROR",
            };
            let pct = |p: Option<f64>| p.map_or("-".to_string(), |v| format!("{v:.1}"));
            let util = match (&r.before, &r.after) {
                (Some(b), Some(a)) => format!("{:.2}->{:.2}", b.utilization, a.utilization),
                _ => "-".into(),
            };
            let mode = match r.mode {
                MeldMode::Darm => "darm",
                MeldMode::BranchFusion => "branch-fusion",
            };
            out.push_str(&format!(
                "{:<14} {:<14} {:>5.2}  {:<10} {:>5} {:>9} {:>9} {:>9}\n",
                r.kernel,
                mode,
                r.threshold,
                status,
                r.melds,
                pct(r.serialized_reduction_pct),
                pct(r.cycle_reduction_pct),
                util
            ));
        }
        out.push_str("\ncapability at threshold 0.2 (branch-fusion / darm)\n");
        for c in &self.capability {
            let mark = |b: bool| if b { "yes" } else { "no" };
            out.push_str(&format!(
                "{:<14} {:<4} {}\n",
                c.kernel,
                mark(c.branch_fusion),
                mark(c.darm)
            ));
        }
        out
    }
}

fn percent(before: u64, after: u64) -> Option<f64> {
    (before > 0).then(|| (before as f64 - after as f64) / before as f64 * 100.0)
}

fn bench_one(
    name: &str,
    m: &Module,
    mode: MeldMode,
    threshold: f64,
    cfg: &BenchConfig,
) -> BenchRow {
    let mut row = BenchRow {
        kernel: name.to_string(),
        mode,
        threshold,
        status: BenchStatus::Unchanged,
        melds: 0,
        mp_scores: Vec::new(),
        selects_inserted: 0,
        replicated: false,
        before: None,
        after: None,
        serialized_reduction_pct: None,
        cycle_reduction_pct: None,
    };
    let mc = MeldConfig {
        mode,
        threshold,
        ..MeldConfig::default()
    };
    let lm = LatencyModel::default();
    let mut after = m.clone();
    let mut reports = Vec::new();
    for f in &mut after.functions {
        match run_darm(f, &mc, &lm) {
            Ok(r) => reports.push(r),
            Err(MeldError::Analysis(e)) => {
                row.status = BenchStatus::Rejected(e.to_string());
                return row;
            }
            Err(e) => {
                row.status = BenchStatus::Error(e.to_string());
                return row;
            }
        }
    }
    for r in &reports {
        for md in &r.melds {
            row.melds += 1;
            row.mp_scores.push(md.mp_score);
            row.selects_inserted += md.selects_inserted;
            row.replicated |= md.replicated;
        }
    }
    if row.melds > 0 {
        row.status = BenchStatus::Melded;
    }
    let sim = SimConfig::with_warp_size(cfg.warp_size);
    for f in &m.functions {
        match oracle(
            m,
            &after,
            &f.name,
            &cfg.oracle_warp_sizes,
            0..cfg.oracle_seeds,
            &sim,
        ) {
            Ok(fails) if fails.is_empty() => {}
            Ok(fails) => {
                let first = &fails[0];
                row.status = BenchStatus::OracleFailed(format!(
                    "{}: warp {} seed {}: {}",
                    f.name, first.warp_size, first.seed, first.diff
                ));
                return row;
            }
            Err(e) => {
                row.status = BenchStatus::Error(e.to_string());
                return row;
            }
        }
    }
    if let Some(f) = m.functions.first() {
        match (
            measure(m, &f.name, cfg.seed, &sim),
            measure(&after, &f.name, cfg.seed, &sim),
        ) {
            (Ok(b), Ok(a)) => {
                row.serialized_reduction_pct = percent(b.serialized_cycles, a.serialized_cycles);
                row.cycle_reduction_pct = percent(b.thread_cycles, a.thread_cycles);
                row.before = Some(b);
                row.after = Some(a);
            }
            (Err(e), _) | (_, Err(e)) => row.status = BenchStatus::Error(e.to_string()),
        }
    }
    row
}

/// Run every kernel under every mode and threshold, in parallel.
pub fn run_bench(kernels: &[(String, String)], cfg: &BenchConfig) -> BenchReport {
    let mut jobs = Vec::new();
    for (k, (name, _)) in kernels.iter().enumerate() {
        for &mode in &cfg.modes {
            for &t in &cfg.thresholds {
                jobs.push((k, name.clone(), mode, t));
            }
        }
    }
    let rows: Vec<BenchRow> = jobs
        .par_iter()
        .map(|(k, name, mode, t)| match parse_module(&kernels[*k].1) {
            Ok(m) => bench_one(name, &m, *mode, *t, cfg),
            Err(e) => BenchRow {
                kernel: name.clone(),
                mode: *mode,
                threshold: *t,
                status: BenchStatus::Rejected(e.to_string()),
                melds: 0,
                mp_scores: Vec::new(),
                selects_inserted: 0,
                replicated: false,
                before: None,
                after: None,
                serialized_reduction_pct: None,
                cycle_reduction_pct: None,
            },
        })
        .collect();
    let default_t = MeldConfig::default().threshold;
    let capability = kernels
        .iter()
        .map(|(name, _)| {
            let melds = |mode: MeldMode| {
                rows.iter().any(|r| {
                    r.kernel == *name && r.mode == mode && r.threshold == default_t && r.melded()
                })
            };
            CapabilityRow {
                kernel: name.clone(),
                branch_fusion: melds(MeldMode::BranchFusion),
                darm: melds(MeldMode::Darm),
            }
        })
        .collect();
    BenchReport {
        config: cfg.clone(),
        rows,
        capability,
    }
}
