//! Command-line driver: verify, repair, align, score and summary.

use crate::coevolution::results::{write_results, RunInfo};
use crate::coevolution::{automated_assurance, co_evolve, conforms_prog_spec, Budget, Mode, Outcome, Session};
use crate::intent::{check_all, extract_hs_intent};
use crate::lang::{find_node, parse_named, parse_test, NodeRef, Program, Test};
use crate::metrics::{build_summary_prompt, completeness, CompletenessResult, DEFAULT_MUTATIONS};
use crate::solver::{Backend, BoundedDomain, SmtConfig, Solver, Status};
use crate::synthesis::{annotate, Enumerative, Subprocess, Synthesizer};
use crate::vcgen::VcKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NONCONFORMING: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_REPAIR_FAILED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("{0}")]
    Run(String),
}

#[derive(Debug, Parser)]
#[command(name = "coevolve", version, about = "Verify and co-evolve programs, specifications and tests")]
pub struct Cli {
    /// key=value configuration file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the program against its specification.
    Verify {
        file: PathBuf,
        /// Also print the hard/soft intent split.
        #[arg(long)]
        explain: bool,
    },
    /// Repair until the program conforms to its specification.
    Repair {
        file: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Repair, then align the specification with a directory of tests.
    Align {
        file: PathBuf,
        #[arg(long)]
        tests: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Completeness of the specification against mutated tests.
    Score {
        file: PathBuf,
        #[arg(long)]
        tests: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MUTATIONS)]
        mutations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the summary prompt for a verified program.
    Summary { file: PathBuf },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Patches requested per campaign.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub max_campaigns: Option<usize>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    pub time_budget: Option<u64>,
    /// `enumerative` or a shell command speaking the request protocol.
    #[arg(long)]
    pub synth: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop at the first verified candidate (default).
    #[arg(long, conflicts_with = "all")]
    pub first: bool,
    /// Keep going until the pool is empty.
    #[arg(long)]
    pub all: bool,
    /// Dump the intent report of every campaign into the log.
    #[arg(long)]
    pub explain: bool,
    /// Results directory; defaults to `results/<file stem>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Settings from the configuration file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    pub solver_cmd: Option<String>,
    pub solver_timeout_ms: Option<u64>,
    pub synth_cmd: Option<String>,
    pub synth_builtin: Option<String>,
    pub int_lo: Option<i64>,
    pub int_hi: Option<i64>,
    pub max_array_len: Option<usize>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, CliError> {
        let mut c = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| CliError::Config { line: i + 1, message };
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected key=value".into()))?;
            let (k, v) = (k.trim(), v.trim().to_string());
            let num = |v: &str| v.parse::<i64>().map_err(|e| err(format!("{k}: {e}")));
            match k {
                "solver.cmd" => c.solver_cmd = Some(v),
                "solver.timeout_ms" => c.solver_timeout_ms = Some(num(&v)?.max(0) as u64),
                "synth.cmd" => c.synth_cmd = Some(v),
                "synth.builtin" => c.synth_builtin = Some(v),
                "domain.int_lo" => c.int_lo = Some(num(&v)?),
                "domain.int_hi" => c.int_hi = Some(num(&v)?),
                "domain.max_array_len" => c.max_array_len = Some(num(&v)?.max(0) as usize),
                _ => return Err(err(format!("unknown key '{k}'"))),
            }
        }
        Ok(c)
    }

    pub fn domain(&self) -> Result<BoundedDomain, CliError> {
        let d = BoundedDomain::default();
        let out = BoundedDomain {
            int_lo: self.int_lo.unwrap_or(d.int_lo),
            int_hi: self.int_hi.unwrap_or(d.int_hi),
            max_array_len: self.max_array_len.unwrap_or(d.max_array_len),
        };
        if out.int_lo > out.int_hi {
            return Err(CliError::Run(format!("empty integer domain [{}, {}]", out.int_lo, out.int_hi)));
        }
        Ok(out)
    }

    pub fn solver(&self) -> Result<Solver, CliError> {
        Ok(match &self.solver_cmd {
            Some(cmd) => Solver::new(Backend::Smt(SmtConfig {
                cmd: cmd.clone(),
                timeout_ms: self.solver_timeout_ms.unwrap_or(SmtConfig::default().timeout_ms),
            })),
            None => Solver::bounded(self.domain()?),
        })
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.display().to_string(), source })
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().to_string()).unwrap_or_else(|| "input.mvl".into())
}

pub fn load_program(path: &Path) -> Result<Program, CliError> {
    let text = read(path)?;
    parse_named(&text, &file_name(path))
        .map_err(|e| CliError::Parse { path: path.display().to_string(), message: e.to_string() })
}

/// Every `.mvl` file in `dir`, in name order, read as one test each.
pub fn load_tests(dir: &Path) -> Result<Vec<Test>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|source| CliError::Read { path: dir.display().to_string(), source })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "mvl"))
        .collect();
    files.sort();
    let mut tests = Vec::new();
    for f in files {
        let t = parse_test(&read(&f)?).map_err(|e| CliError::Parse { path: f.display().to_string(), message: e.to_string() })?;
        tests.push(t);
    }
    Ok(tests)
}

/// One reported error in the verifier's listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyError {
    pub index: usize,
    pub line: u32,
    pub method: String,
    pub kind: VcKind,
    pub message: String,
    /// The clause behind a postcondition failure.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub related_line: Option<u32>,
    pub trace: Vec<u32>,
    pub unknown: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub file: String,
    pub conforming: bool,
    pub partitions: usize,
    pub errors: Vec<VerifyError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intent: Option<String>,
}

fn message(kind: VcKind, node: Option<&NodeRef<'_>>) -> &'static str {
    match kind {
        VcKind::SignatureWf | VcKind::WfCheck => "index out of range.",
        VcKind::Postcondition => "A postcondition might not hold on this path.",
        VcKind::InvariantEntry => "This loop invariant might not hold on entry.",
        VcKind::InvariantMaintain => "This loop invariant might not be maintained by the loop.",
        VcKind::IntermediateAssert => match node {
            Some(NodeRef::Stmt(_, s)) if matches!(s.kind, crate::lang::StmtKind::Call { .. }) => {
                "A precondition for this call might not hold."
            }
            _ => "assertion might not hold.",
        },
    }
}

/// Checks `p` and lists one error per failing assertion, shallowest first.
pub fn verify(p: &Program, solver: &Solver, explain: bool) -> Result<VerifyReport, CliError> {
    let v = conforms_prog_spec(p, solver).map_err(|e| CliError::Run(e.to_string()))?;
    let mut errors: Vec<VerifyError> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (c, t) in v.failing.iter().zip(&v.failing_traces) {
        if !seen.insert((t.method.clone(), t.kind, t.target)) {
            continue;
        }
        let node = find_node(p, t.target);
        let (line, related_line) = match t.kind {
            VcKind::Postcondition => {
                let start = p.method(&t.method).map(|m| m.body_span.line).unwrap_or(t.target_line);
                (start, Some(t.target_line))
            }
            _ => (t.target_line, None),
        };
        errors.push(VerifyError {
            index: errors.len() + 1,
            line,
            method: t.method.clone(),
            kind: t.kind,
            message: message(t.kind, node.as_ref()).to_string(),
            related_line,
            trace: t.lines.clone(),
            unknown: c.verdict.status == Status::Unknown,
        });
    }
    let intent = explain.then(|| extract_hs_intent(p, &v.checked).dump());
    Ok(VerifyReport { file: p.source_name.clone(), conforming: v.holds, partitions: v.checked.len(), errors, intent })
}

pub fn render_verify(r: &VerifyReport) -> String {
    let mut out = String::new();
    for e in &r.errors {
        let note = if e.unknown { " (the solver could not decide)" } else { "" };
        let _ = writeln!(out, "line {}: Error {}: {}{note}", e.line, e.index, e.message);
        if let Some(l) = e.related_line {
            let _ = writeln!(out, "line {l}: This is the postcondition that might not hold.");
        }
    }
    let n = r.errors.len();
    let _ = writeln!(out, "{n} {}", if n == 1 { "error" } else { "errors" });
    if let Some(i) = &r.intent {
        out.push('\n');
        out.push_str(i);
    }
    out
}

pub fn render_score(r: &CompletenessResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "score: {:.4}", r.score);
    let _ = writeln!(out, "killed: {}/{}", r.killed, r.total_mutations);
    let _ = writeln!(out, "operators: inc dec neg len zero sentinel");
    for s in &r.skipped {
        let _ = writeln!(out, "skipped: {s} (no output equality)");
    }
    let _ = writeln!(out, "{:<4} {:<16} {:<8} {:<24} ops", "#", "test", "killed", "oracle");
    for (i, m) in r.per_mutation.iter().enumerate() {
        let ops: Vec<String> = m.ops.iter().map(|o| format!("{o:?}").to_lowercase()).collect();
        let _ = writeln!(out, "{:<4} {:<16} {:<8} {:<24} {}", i + 1, m.test, m.inconsistent, m.oracle, ops.join(","));
    }
    out
}

#[derive(Debug, Serialize)]
struct RunReport {
    command: String,
    outcome: Outcome,
    campaigns: usize,
    candidates: usize,
    results: String,
}

fn plugin(run: &RunArgs, cfg: &Config) -> Result<Box<dyn Synthesizer>, CliError> {
    let timeout = Duration::from_secs(run.time_budget.unwrap_or(20 * 60).max(1));
    let choice = run.synth.clone().or_else(|| cfg.synth_cmd.clone()).or_else(|| cfg.synth_builtin.clone());
    Ok(match choice.as_deref() {
        None | Some("enumerative") => Box::new(Enumerative),
        Some(cmd) => Box::new(Subprocess::new(cmd, timeout)),
    })
}

fn budget(run: &RunArgs) -> Budget {
    let d = Budget::default();
    Budget {
        wall_clock: run.time_budget.map(Duration::from_secs).unwrap_or(d.wall_clock),
        max_campaigns: run.max_campaigns.unwrap_or(d.max_campaigns),
        k: run.k.unwrap_or(d.k).max(1),
        max_candidates: d.max_candidates,
    }
}

fn out_dir(run: &RunArgs, file: &Path) -> PathBuf {
    run.out.clone().unwrap_or_else(|| {
        let stem = file.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_else(|| "input".into());
        Path::new("results").join(stem)
    })
}

fn drive(cmd: &str, file: &Path, tests: Option<&Path>, run: &RunArgs, cfg: &Config, json: bool) -> Result<i32, CliError> {
    let p = load_program(file)?;
    let tests = match tests {
        Some(d) => load_tests(d)?,
        None => Vec::new(),
    };
    let solver = cfg.solver()?;
    let mut synth = plugin(run, cfg)?;
    let mode = if run.all { Mode::All } else { Mode::First };
    let mut s = Session::new(&solver, &mut *synth, budget(run), mode, run.seed);
    s.domain = cfg.domain()?;
    s.explain = run.explain;
    let run_err = |e: crate::coevolution::CoevolveError| CliError::Run(e.to_string());
    let (verified, outcome) = if cmd == "align" {
        let a = automated_assurance(&mut s, p, &tests).map_err(run_err)?;
        (a.triples.into_iter().map(|t| (t.candidate, t.tests)).collect::<Vec<_>>(), a.outcome)
    } else {
        let e = co_evolve(&mut s, p).map_err(run_err)?;
        (e.verified.into_iter().map(|c| (c, Vec::new())).collect(), e.outcome)
    };
    let dir = out_dir(run, file);
    let input = file_name(file);
    let info = RunInfo { command: cmd, input: &input, seed: run.seed, outcome, campaigns: s.campaigns };
    write_results(&dir, &input, &verified, &s.log, &info).map_err(|e| CliError::Run(format!("{}: {e}", dir.display())))?;
    let report = RunReport {
        command: cmd.to_string(),
        outcome,
        campaigns: s.campaigns,
        candidates: verified.len(),
        results: dir.display().to_string(),
    };
    if json {
        emit(&(serde_json::to_string_pretty(&report).unwrap_or_default() + "\n"));
    } else {
        let note = match outcome {
            Outcome::Solved => "solved",
            Outcome::PoolEmpty => "no candidate left to try",
            Outcome::BudgetExhausted => "budget exhausted",
        };
        emit(&format!(
            "{cmd}: {note} after {} campaigns\nverified candidates: {}\nresults: {}\n",
            s.campaigns,
            verified.len(),
            dir.display()
        ));
    }
    Ok(if verified.is_empty() { EXIT_REPAIR_FAILED } else { EXIT_OK })
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let cfg = match &cli.config {
        Some(path) => Config::parse(&read(path)?)?,
        None => Config::default(),
    };
    match &cli.command {
        Command::Verify { file, explain } => {
            let p = load_program(file)?;
            let r = verify(&p, &cfg.solver()?, *explain)?;
            if cli.json {
                emit(&(serde_json::to_string_pretty(&r).unwrap_or_default() + "\n"));
            } else {
                emit(&render_verify(&r));
            }
            Ok(if r.conforming { EXIT_OK } else { EXIT_NONCONFORMING })
        }
        Command::Repair { file, run } => drive("repair", file, None, run, &cfg, cli.json),
        Command::Align { file, tests, run } => drive("align", file, Some(tests), run, &cfg, cli.json),
        Command::Score { file, tests, mutations, seed } => {
            let p = load_program(file)?;
            let tests = load_tests(tests)?;
            let r = completeness(&p, &tests, *mutations, *seed, &cfg.solver()?).map_err(|e| CliError::Run(e.to_string()))?;
            if cli.json {
                emit(&(serde_json::to_string_pretty(&r).unwrap_or_default() + "\n"));
            } else {
                emit(&render_score(&r));
            }
            Ok(EXIT_OK)
        }
        Command::Summary { file } => {
            let p = load_program(file)?;
            let solver = cfg.solver()?;
            let checked = check_all(&p, &solver).map_err(|e| CliError::Run(e.to_string()))?;
            let annotated = annotate(&p, &extract_hs_intent(&p, &checked));
            let s = build_summary_prompt(&annotated);
            if cli.json {
                emit(&(serde_json::to_string_pretty(&s).unwrap_or_default() + "\n"));
            } else {
                emit(&s.prompt);
            }
            Ok(if checked.iter().all(|c| c.conforms()) { EXIT_OK } else { EXIT_NONCONFORMING })
        }
    }
}

/// Parses `args` and runs the command, returning the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_keys() {
        let c = Config::parse("# comment\nsolver.timeout_ms = 250\ndomain.int_lo=-2\ndomain.int_hi=2\nsynth.builtin=enumerative\n")
            .unwrap();
        assert_eq!(c.solver_timeout_ms, Some(250));
        assert_eq!(c.domain().unwrap(), BoundedDomain { int_lo: -2, int_hi: 2, max_array_len: 3 });
        assert_eq!(c.synth_builtin.as_deref(), Some("enumerative"));
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(matches!(Config::parse("solver.path=z3"), Err(CliError::Config { line: 1, .. })));
        assert!(matches!(Config::parse("nonsense"), Err(CliError::Config { .. })));
    }

    #[test]
    fn inverted_domain_is_an_error() {
        let c = Config::parse("domain.int_lo=3\ndomain.int_hi=1").unwrap();
        assert!(c.domain().is_err());
    }
}
