use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use simtmeld::analysis::dump_analysis;
use simtmeld::harness::{run_bench, BenchConfig};
use simtmeld::ir::{
    emit_dot, parse_module, print_module, verify_module, LabelMode, LatencyModel, Module,
};
use simtmeld::meld::{analyze_opportunities, run_darm_module, MeldConfig, MeldError, MeldMode};
use simtmeld::sim::{compare_runs, execute_warp, Fixture, SimConfig};

#[derive(Parser)]
#[command(
    name = "simtmeld",
    version,
    about = "Control-flow melding for SIMT divergence reduction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Meld divergent regions and print the transformed IR.
    Meld(MeldArgs),
    /// Run a function on one warp and print execution statistics.
    Simulate(SimulateArgs),
    /// Meld and simulate every kernel of a corpus directory.
    Bench(BenchArgs),
    /// Print a function's control-flow graph in Graphviz format.
    Dot(DotArgs),
    /// Print dominators, regions and divergence as JSON.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct MeldArgs {
    input: PathBuf,
    /// key = value file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    gap_penalty: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Report melding opportunities without rewriting anything.
    #[arg(long)]
    analysis_only: bool,
    #[arg(long)]
    function: Option<String>,
    /// Stop after the first round of melding.
    #[arg(long)]
    run_once: bool,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<MeldMode>,
    #[arg(long)]
    dot_before: Option<PathBuf>,
    #[arg(long)]
    dot_after: Option<PathBuf>,
    #[arg(long)]
    latency_model: Option<PathBuf>,
    /// Where to write the melded IR (default: stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Where to write the JSON report (default: stderr, or stdout with --analysis-only).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    input: PathBuf,
    /// JSON fixture; a random one is generated from --seed otherwise.
    #[arg(long)]
    fixture: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    warp_size: Option<usize>,
    #[arg(long)]
    function: Option<String>,
    /// Run this module on the same inputs and compare the results.
    #[arg(long)]
    compare: Option<PathBuf>,
    #[arg(long)]
    latency_model: Option<PathBuf>,
    #[arg(long)]
    max_steps: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(default_value = "corpus")]
    corpus: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long, default_value_t = 32)]
    warp_size: usize,
    /// Random fixtures per warp size for the equivalence check.
    #[arg(long, default_value_t = 10)]
    oracle_seeds: u64,
    /// Also write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct DotArgs {
    input: PathBuf,
    #[arg(long)]
    function: Option<String>,
    /// Show instructions instead of block labels only.
    #[arg(long)]
    full: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    input: PathBuf,
    #[arg(long)]
    function: Option<String>,
}

fn parse_mode(s: &str) -> Result<MeldMode, String> {
    s.parse()
        .map_err(|e: simtmeld::meld::ConfigError| e.to_string())
}

/// Error carrying the process exit code.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    fn user(err: impl Into<anyhow::Error>) -> Failure {
        Failure {
            code: 2,
            err: err.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        Failure::user(err)
    }
}

impl From<MeldError> for Failure {
    fn from(e: MeldError) -> Self {
        let code = match e {
            MeldError::Invariant(_) | MeldError::Verify { .. } => 3,
            MeldError::Analysis(_) | MeldError::UnknownFunction(_) => 2,
        };
        Failure {
            code,
            err: e.into(),
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_module(path: &Path) -> Result<Module, Failure> {
    let src = read(path)?;
    parse_module(&src).map_err(|e| Failure::user(anyhow!("{}: {e}", path.display())))
}

/// Write through a temporary file in the same directory so readers never see
/// a partial file.
fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| anyhow!("{} is not a file path", path.display()))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, contents).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))
}

fn latency(path: &Option<PathBuf>) -> Result<LatencyModel, Failure> {
    match path {
        Some(p) => LatencyModel::parse(&read(p)?)
            .map_err(|e| Failure::user(anyhow!("{}: {e}", p.display()))),
        None => Ok(LatencyModel::default()),
    }
}

fn pick<'m>(m: &'m Module, name: &Option<String>) -> Result<&'m simtmeld::ir::Function, Failure> {
    match name {
        Some(n) => m
            .function(n)
            .ok_or_else(|| Failure::user(anyhow!("no function named `{n}`"))),
        None => m
            .functions
            .first()
            .ok_or_else(|| Failure::user(anyhow!("module has no functions"))),
    }
}

/// Print to stdout, ending with a newline; a closed pipe is not an error.
fn out(text: &str) {
    let mut so = std::io::stdout().lock();
    let _ = so.write_all(text.as_bytes());
    if !text.ends_with('\n') {
        let _ = so.write_all(b"\n");
    }
}

fn dots(m: &Module) -> String {
    m.functions
        .iter()
        .map(|f| emit_dot(f, LabelMode::Full))
        .collect()
}

fn cmd_meld(a: MeldArgs) -> Result<(), Failure> {
    let mut cfg = MeldConfig::default();
    if let Some(p) = &a.config {
        cfg.merge_kv(&read(p)?)
            .map_err(|e| Failure::user(anyhow!("{}: {e}", p.display())))?;
    }
    if let Some(t) = a.threshold {
        cfg.threshold = t;
    }
    if let Some(g) = a.gap_penalty {
        cfg.gap_penalty = g;
    }
    if let Some(n) = a.max_iterations {
        cfg.max_iterations = n;
    }
    if let Some(mode) = a.mode {
        cfg.mode = mode;
    }
    if a.function.is_some() {
        cfg.target_function = a.function.clone();
    }
    cfg.run_once |= a.run_once;
    cfg.validate().map_err(Failure::user)?;
    let lm = latency(&a.latency_model)?;
    let m = load_module(&a.input)?;
    let bad = verify_module(&m);
    if let Some(v) = bad.first() {
        return Err(Failure::user(anyhow!(
            "{}: input is not valid SSA: {v}",
            a.input.display()
        )));
    }
    if let Some(p) = &a.dot_before {
        write_atomic(p, &dots(&m))?;
    }

    if a.analysis_only {
        let mut doc = Vec::new();
        for f in &m.functions {
            if cfg.target_function.as_ref().is_some_and(|t| *t != f.name) {
                continue;
            }
            let regions = analyze_opportunities(f, &cfg, &lm)?;
            doc.push(json!({ "function": f.name, "regions": regions }));
        }
        let text = serde_json::to_string_pretty(&doc).map_err(anyhow::Error::from)?;
        match &a.report {
            Some(p) => write_atomic(p, &text)?,
            None => out(&text),
        }
        return Ok(());
    }

    let mut melded = m.clone();
    let reports = run_darm_module(&mut melded, &cfg, &lm)?;
    if let Some(v) = verify_module(&melded).first() {
        return Err(Failure {
            code: 3,
            err: anyhow!("melded module fails verification: {v}"),
        });
    }
    let ir = print_module(&melded);
    if parse_module(&ir).map(|r| r != melded).unwrap_or(true) {
        return Err(Failure {
            code: 3,
            err: anyhow!("melded module does not round-trip through the printer"),
        });
    }
    if let Some(p) = &a.dot_after {
        write_atomic(p, &dots(&melded))?;
    }
    let report = if reports.len() == 1 {
        json!(reports[0])
    } else {
        json!(reports)
    };
    let report = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?;
    match &a.output {
        Some(p) => write_atomic(p, &ir)?,
        None => out(&ir),
    }
    match &a.report {
        Some(p) => write_atomic(p, &report)?,
        None => eprintln!("{report}"),
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<bool, Failure> {
    let m = load_module(&a.input)?;
    let f = pick(&m, &a.function)?;
    let mut cfg = SimConfig {
        latency: latency(&a.latency_model)?,
        ..SimConfig::default()
    };
    if let Some(n) = a.max_steps {
        cfg.max_steps = n;
    }
    let fx = match &a.fixture {
        Some(p) => Fixture::from_json(&read(p)?)
            .map_err(|e| Failure::user(anyhow!("{}: {e}", p.display())))?,
        None => Fixture::random(&m, f, a.warp_size.unwrap_or(cfg.warp_size), a.seed),
    };
    cfg.warp_size = a.warp_size.or(fx.warp_size).unwrap_or(cfg.warp_size);
    let run = execute_warp(&m, f, &fx, &cfg).map_err(Failure::user)?;
    let Some(other) = &a.compare else {
        let doc = json!({ "function": f.name, "warpSize": cfg.warp_size, "lanes": run.lanes, "stats": run.stats });
        out(&serde_json::to_string_pretty(&doc).map_err(anyhow::Error::from)?);
        return Ok(true);
    };
    let m2 = load_module(other)?;
    let f2 = m2.function(&f.name).ok_or_else(|| {
        Failure::user(anyhow!("{} has no function `{}`", other.display(), f.name))
    })?;
    let run2 = execute_warp(&m2, f2, &fx, &cfg).map_err(Failure::user)?;
    let verdict = compare_runs(&run, &run2);
    let doc = json!({
        "function": f.name,
        "warpSize": cfg.warp_size,
        "verdict": verdict,
        "before": run.stats,
        "after": run2.stats,
    });
    out(&serde_json::to_string_pretty(&doc).map_err(anyhow::Error::from)?);
    Ok(verdict.equal)
}

fn corpus_files(dir: &Path) -> anyhow::Result<Vec<(String, String)>> {
    let mut paths = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).with_context(|| format!("cannot list {}", d.display()))? {
            let p = e?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "ir") {
                paths.push(p);
            }
        }
    }
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            Ok((name, read(&p)?))
        })
        .collect()
}

fn cmd_bench(a: BenchArgs) -> Result<bool, Failure> {
    let kernels = corpus_files(&a.corpus)?;
    if kernels.is_empty() {
        return Err(Failure::user(anyhow!(
            "no .ir files under {}",
            a.corpus.display()
        )));
    }
    let mut cfg = BenchConfig {
        seed: a.seed,
        warp_size: a.warp_size,
        oracle_seeds: a.oracle_seeds,
        ..BenchConfig::default()
    };
    if let Some(t) = a.thresholds {
        cfg.thresholds = t;
    }
    let report = run_bench(&kernels, &cfg);
    out(&report.table());
    if let Some(p) = &a.json {
        write_atomic(
            p,
            &serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?,
        )?;
    }
    let failures = report.failures();
    for r in &failures {
        eprintln!("kernel {} failed: {:?}", r.kernel, r.status);
    }
    Ok(failures.is_empty())
}

fn cmd_dot(a: DotArgs) -> Result<(), Failure> {
    let m = load_module(&a.input)?;
    let f = pick(&m, &a.function)?;
    let mode = if a.full {
        LabelMode::Full
    } else {
        LabelMode::Labels
    };
    out(&emit_dot(f, mode));
    Ok(())
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<(), Failure> {
    let m = load_module(&a.input)?;
    let f = pick(&m, &a.function)?;
    let v = dump_analysis(f).map_err(Failure::user)?;
    out(&serde_json::to_string_pretty(&v).map_err(anyhow::Error::from)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Meld(a) => cmd_meld(a).map(|_| true),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Dot(a) => cmd_dot(a).map(|_| true),
        Command::Analyze(a) => cmd_analyze(a).map(|_| true),
    };
    let _ = std::io::stdout().flush();
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
