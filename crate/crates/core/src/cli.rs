//! Command-line driver. Exit codes: 0 success, 1 parse or I/O error,
//! 2 invalid configuration or empty corpus, 3 learning did not converge,
//! 4 node id out of range, 5 evaluation found unsound results.

use crate::dataset::{
    check_correct, dataset_from_jsonl, dataset_to_jsonl, extract_examples, run_on, Dataset, Mode, Program, Verdict,
};
use crate::dsl::{exec_program, parse_program, render_program, DslProgram, LatticeResult};
use crate::minilang::{parse, render, render_node, NodeId};
use crate::oracle::{learn_loop, mutate_ema, mutate_gj, render_log, LoopConfig, LoopOutcome, OracleKind};
use crate::synthesis::{parse_config, CandidateSpace, ConfigError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Parser, Debug)]
#[command(name = "learnpa", version, about = "Learn static analyses for MiniJS from examples")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Learn an analysis from a corpus with counter-example refinement.
    Learn(LearnArgs),
    /// Run a `.dsl` analysis on one query node of a program.
    Analyze {
        program: PathBuf,
        dsl: PathBuf,
        #[arg(long)]
        node: u32,
        /// Call trace as comma-separated call-site ids, innermost last.
        #[arg(long, value_delimiter = ',')]
        calltrace: Vec<u32>,
    },
    /// Print the instrumented trace of a program, or its examples with --mode.
    Trace {
        program: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Print the mutants of a program, at every node or at --node.
    Mutate {
        program: PathBuf,
        #[arg(long)]
        node: Option<u32>,
    },
    /// Score a `.dsl` analysis on a dataset file.
    Eval { dsl: PathBuf, dataset: PathBuf },
    /// Extract a dataset file from a corpus.
    DatasetBuild {
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct LearnArgs {
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output directory for program.dsl, dataset.jsonl and counterexamples.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Use the random-order oracle instead of the guided one.
    #[arg(long)]
    pub blackbox: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    #[value(name = "pointsto-this")]
    PointsToThis,
    #[value(name = "pointsto-var")]
    PointsToVar,
    Alloc,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::PointsToThis => Mode::PointsToThis,
            ModeArg::PointsToVar => Mode::PointsToVar,
            ModeArg::Alloc => Mode::AllocSite,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("corpus {0} has no examples")]
    EmptyCorpus(PathBuf),
    #[error("node {node} out of range (program has {len} nodes)")]
    NodeOutOfRange { node: u32, len: usize },
    #[error("{0} unsound results")]
    Unsound(usize),
    #[error("learning did not converge after {0} refinements")]
    NotConverged(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } => 1,
            CliError::Config(_) | CliError::EmptyCorpus(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::NodeOutOfRange { .. } => 4,
            CliError::Unsound(_) => 5,
        }
    }
}

/// Everything a learning run depends on.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub corpus: PathBuf,
    pub space: CandidateSpace,
    pub loop_cfg: LoopConfig,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn new(mode: Mode, corpus: impl Into<PathBuf>) -> RunConfig {
        RunConfig {
            mode,
            corpus: corpus.into(),
            space: CandidateSpace::new(mode.language()),
            loop_cfg: LoopConfig::default(),
            jobs: None,
        }
    }

    /// Applies a `key=value` file with learning and oracle parameters.
    pub fn apply_config(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seed = None;
        for (line, key, value) in parse_config(text)? {
            if self.space.set(&key, &value)? {
                continue;
            }
            let bad = || ConfigError::BadValue { key: key.clone(), value: value.clone() };
            let n = value.parse::<u64>().map_err(|_| bad())?;
            match key.as_str() {
                "budget" if n > 0 => self.loop_cfg.budget = n as usize,
                "max_iters" => self.loop_cfg.max_iters = n as usize,
                "batch" if n > 0 => self.loop_cfg.batch = n as usize,
                "jobs" if n > 0 => self.jobs = Some(n as usize),
                "seed" => seed = Some(n),
                "budget" | "batch" | "jobs" => return Err(bad()),
                _ => return Err(ConfigError::UnknownKey { line, key }),
            }
        }
        if let (Some(s), OracleKind::Blackbox { .. }) = (seed, self.loop_cfg.oracle) {
            self.loop_cfg.oracle = OracleKind::Blackbox { seed: s };
        }
        Ok(())
    }
}

/// Serialized results of a learning run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifacts {
    pub program: String,
    pub dataset: String,
    pub log: String,
    pub converged: bool,
    pub iterations: usize,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), message: e.to_string() })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io { path: path.to_path_buf(), message: e.to_string() })
}

fn load_program(path: &Path) -> Result<Arc<Program>, CliError> {
    let src = read(path)?;
    Program::from_source(&src).map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })
}

/// `.mini` files of a directory in file-name order.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), message: e.to_string() })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "mini"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_corpus(dir: &Path, mode: Mode) -> Result<Dataset, CliError> {
    let mut d = Dataset::new(mode);
    for f in corpus_files(dir)? {
        d.add_program(&load_program(&f)?);
    }
    if d.is_empty() {
        return Err(CliError::EmptyCorpus(dir.to_path_buf()));
    }
    Ok(d)
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool").install(f),
        None => f(),
    }
}

/// Loads the corpus and runs the refinement loop.
pub fn run_learn(cfg: &RunConfig) -> Result<(LoopOutcome, Artifacts), CliError> {
    let d = load_corpus(&cfg.corpus, cfg.mode)?;
    let out = with_jobs(cfg.jobs, || learn_loop(&d, &cfg.space, &cfg.loop_cfg))
        .expect("corpus dataset is nonempty and matches the language");
    let artifacts = Artifacts {
        program: render_program(&out.program) + "\n",
        dataset: dataset_to_jsonl(&out.dataset),
        log: render_log(&out.log),
        converged: out.converged,
        iterations: out.iterations,
    };
    Ok((out, artifacts))
}

fn learn(args: &LearnArgs, out: &mut String) -> Result<(), CliError> {
    let mut cfg = RunConfig::new(args.mode.into(), &args.corpus);
    if args.blackbox {
        cfg.loop_cfg.oracle = OracleKind::Blackbox { seed: 0 };
    }
    if let Some(path) = &args.config {
        cfg.apply_config(&read(path)?)?;
    }
    if let Some(s) = args.seed {
        if args.blackbox {
            cfg.loop_cfg.oracle = OracleKind::Blackbox { seed: s };
        }
    }
    if let Some(b) = args.budget {
        if b == 0 {
            return Err(ConfigError::BadValue { key: "budget".into(), value: "0".into() }.into());
        }
        cfg.loop_cfg.budget = b;
    }
    if let Some(m) = args.max_iters {
        cfg.loop_cfg.max_iters = m;
    }
    if let Some(j) = args.jobs {
        if j == 0 {
            return Err(ConfigError::BadValue { key: "jobs".into(), value: "0".into() }.into());
        }
        cfg.jobs = Some(j);
    }
    let (_, a) = run_learn(&cfg)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Io { path: args.out.clone(), message: e.to_string() })?;
    write_file(&args.out.join("program.dsl"), &a.program)?;
    write_file(&args.out.join("dataset.jsonl"), &a.dataset)?;
    write_file(&args.out.join("counterexamples.jsonl"), &a.log)?;
    let _ = writeln!(out, "{}", a.program.trim_end());
    let _ = writeln!(out, "iterations: {}, converged: {}", a.iterations, a.converged);
    if !a.converged {
        return Err(CliError::NotConverged(a.iterations));
    }
    Ok(())
}

fn load_dsl(path: &Path) -> Result<DslProgram, CliError> {
    parse_program(&read(path)?).map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })
}

fn describe_result(p: &Program, r: LatticeResult) -> String {
    match r {
        LatticeResult::Node(n) => {
            let snippet = if p.ast.is_distinguished(n) { String::new() } else { render_node(&p.ast, n) };
            format!("{} {} {}", n, p.ast.describe(n), snippet.lines().next().unwrap_or("")).trim_end().to_string()
        }
        LatticeResult::Top => "TOP".into(),
        LatticeResult::Bottom => "BOTTOM".into(),
        LatticeResult::NewAlloc => "NEWALLOC".into(),
        LatticeResult::NoAlloc => "NOALLOC".into(),
    }
}

fn analyze(program: &Path, dsl: &Path, node: u32, calltrace: &[u32], out: &mut String) -> Result<(), CliError> {
    let p = load_program(program)?;
    let pa = load_dsl(dsl)?;
    for &n in std::iter::once(&node).chain(calltrace) {
        if n as usize >= p.ast.len() {
            return Err(CliError::NodeOutOfRange { node: n, len: p.ast.len() });
        }
    }
    let trace: Vec<NodeId> = calltrace.iter().map(|n| NodeId(*n)).collect();
    let r = exec_program(&pa, &p.ast, NodeId(node), &trace).result;
    let _ = writeln!(out, "{}", describe_result(&p, r));
    Ok(())
}

fn trace(program: &Path, mode: Option<ModeArg>, out: &mut String) -> Result<(), CliError> {
    let p = load_program(program)?;
    match mode {
        None => out.push_str(&p.trace.dump()),
        Some(m) => out.push_str(&dataset_to_jsonl(&Dataset::from_examples(m.into(), extract_examples(&p, m.into())).unwrap())),
    }
    Ok(())
}

fn mutate(program: &Path, node: Option<u32>, out: &mut String) -> Result<(), CliError> {
    let src = read(program)?;
    let ast = parse(&src).map_err(|e| CliError::Parse { path: program.to_path_buf(), message: e.to_string() })?;
    let sites: Vec<NodeId> = match node {
        Some(n) if n as usize >= ast.len() => return Err(CliError::NodeOutOfRange { node: n, len: ast.len() }),
        Some(n) => vec![NodeId(n)],
        None => ast.tree_ids().collect(),
    };
    let mut seen = std::collections::HashSet::new();
    for site in sites {
        for m in mutate_ema(&ast, site).into_iter().chain(mutate_gj(&ast, site)) {
            let text = render(&m.ast);
            if seen.insert(text.clone()) {
                let _ = writeln!(out, "// {} at {}: {}\n{}\n", m.mutation.kind, site, m.mutation.payload, text);
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Score {
    pub precise: usize,
    pub approx: usize,
    pub unsound: usize,
}

impl Score {
    pub fn total(&self) -> usize {
        self.precise + self.approx + self.unsound
    }

    pub fn add(&mut self, v: Verdict) {
        match v {
            Verdict::Precise => self.precise += 1,
            Verdict::SoundApprox => self.approx += 1,
            Verdict::Unsound => self.unsound += 1,
        }
    }
}

pub fn score(pa: &DslProgram, d: &Dataset) -> Score {
    let mut s = Score::default();
    for e in d.examples() {
        s.add(check_correct(run_on(pa, e).result, e));
    }
    s
}

fn eval(dsl: &Path, dataset: &Path, out: &mut String) -> Result<(), CliError> {
    let pa = load_dsl(dsl)?;
    let d = dataset_from_jsonl(&read(dataset)?)
        .map_err(|e| CliError::Parse { path: dataset.to_path_buf(), message: e.to_string() })?;
    let s = score(&pa, &d);
    let pct = |n: usize| 100.0 * n as f64 / s.total().max(1) as f64;
    let _ = writeln!(out, "precise {} ({:.2}%)", s.precise, pct(s.precise));
    let _ = writeln!(out, "sound-approx {} ({:.2}%)", s.approx, pct(s.approx));
    let _ = writeln!(out, "unsound {} ({:.2}%)", s.unsound, pct(s.unsound));
    if s.unsound > 0 {
        return Err(CliError::Unsound(s.unsound));
    }
    Ok(())
}

fn dataset_build(mode: ModeArg, corpus: &Path, path: &Path, out: &mut String) -> Result<(), CliError> {
    let d = load_corpus(corpus, mode.into())?;
    write_file(path, &dataset_to_jsonl(&d))?;
    let _ = writeln!(out, "{} examples from {} programs", d.len(), d.programs().len());
    Ok(())
}

/// Runs a parsed command, appending its standard output to `out`.
pub fn execute(cli: &Cli, out: &mut String) -> Result<(), CliError> {
    match &cli.command {
        Command::Learn(args) => learn(args, out),
        Command::Analyze { program, dsl, node, calltrace } => analyze(program, dsl, *node, calltrace, out),
        Command::Trace { program, mode } => trace(program, *mode, out),
        Command::Mutate { program, node } => mutate(program, *node, out),
        Command::Eval { dsl, dataset } => eval(dsl, dataset, out),
        Command::DatasetBuild { mode, corpus, out: path } => dataset_build(*mode, corpus, path, out),
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut out = String::new();
    let res = execute(&cli, &mut out);
    print!("{out}");
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
