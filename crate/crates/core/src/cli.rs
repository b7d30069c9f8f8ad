//! Command-line front end.
//!
//! Exit codes: 0 when every checked property holds, 1 when one is false,
//! 2 for usage and configuration errors, 3 when `--strict` is given and a
//! verdict is not guaranteed to survive untruncation.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::butterfly::{build_butterfly, center_anchored_selection, read_flutter_dir, write_flutter_dir, ButterflyError, ButterflyParams, Flutter};
use crate::checker::{ck_at, iterative_ck, resolve_state, CheckError, Evaluator, Soundness};
use crate::facts::{run_facts, run_facts_on, FactsConfig, FactsError};
use crate::formula::{agent_list, AgentId, Formula, FormulaError, FormulaParser, ParseError};
use crate::lewis::{
    event_names, property_run, verify_lewis_theorem, C4Reading, EventSpec, LewisError, ReasonOps, DEFAULT_MAX_STATES,
};
use crate::model::{load_model, save_model, to_dot, FormatError, Model, TableSelection};
use crate::random::ModelShape;
use crate::structure::{EpistemicStructure, Selection};

pub const SEED_ENV: &str = "PLAUSIBILITY_MC_SEED";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FALSE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONTAMINATED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "plausibility-mc", version, about = "Model checker for epistemic-plausibility models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a butterfly model file or a flutter directory.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Evaluate a formula at a state.
    Check(CheckArgs),
    /// Iterative common knowledge of a formula.
    Ck(CkArgs),
    /// The five key facts on a flutter.
    Facts(FactsArgs),
    /// C1–C4 and the iterated reasons they should generate.
    Lewis(LewisArgs),
    /// Export a model as a Graphviz graph or list its comparability gaps.
    Dump(DumpArgs),
    /// Seeded property runs.
    #[command(subcommand)]
    Suite(SuiteCommand),
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// One butterfly centered on k, written as a model file.
    Butterfly {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        m: u64,
        #[arg(long)]
        depth: u32,
        #[arg(long, default_value = "R C")]
        agents: String,
        #[arg(short = 'o', long)]
        output: PathBuf,
    },
    /// A flutter: one model file per butterfly and a manifest.
    Flutter {
        #[arg(long)]
        k_lo: u64,
        #[arg(long)]
        k_hi: u64,
        #[arg(long)]
        m: u64,
        #[arg(long)]
        depth: u32,
        #[arg(long, default_value = "R C")]
        agents: String,
        #[arg(short = 'o', long)]
        output: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// A model file or a flutter directory.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub state: String,
    /// Formula text. `[>n]` stands for the disjunction of the heights above
    /// `n` that occur in the model.
    #[arg(long)]
    pub formula: String,
    /// Exit with 3 when the verdict may change under untruncation.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct CkArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub formula: String,
    /// Agents of the group; all agents by default.
    #[arg(long)]
    pub group: Option<String>,
    /// Also decide membership of this state by search from it.
    #[arg(long)]
    pub state: Option<String>,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct FactsArgs {
    /// Use a flutter written by `gen flutter`; its range, margin and depth
    /// replace the corresponding options.
    #[arg(long)]
    pub flutter_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    pub k: u64,
    #[arg(long, default_value_t = 50)]
    pub m: u64,
    #[arg(long, default_value_t = 100)]
    pub threshold: u64,
    /// Truncation depth; defaults to the least depth that fits the chain
    /// below the threshold, and at least 6.
    #[arg(long)]
    pub depth: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub k_lo: u64,
    #[arg(long, default_value_t = 600)]
    pub k_hi: u64,
    /// Centers for the counterfactual fact.
    #[arg(long, value_delimiter = ',', default_values_t = [200u64, 250, 350])]
    pub samples: Vec<u64>,
    /// Highest level n evaluated for r^n.
    #[arg(long, default_value_t = 6)]
    pub iter_depth: usize,
    /// Append key=value lines.
    #[arg(long)]
    pub machine: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum C4ReadingArg {
    Local,
    Global,
}

impl From<C4ReadingArg> for C4Reading {
    fn from(r: C4ReadingArg) -> Self {
        match r {
            C4ReadingArg::Local => C4Reading::Local,
            C4ReadingArg::Global => C4Reading::Global,
        }
    }
}

#[derive(Debug, Args)]
pub struct LewisArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// A formula, or state names separated by spaces or commas.
    #[arg(long)]
    pub basis: String,
    /// A formula, or state names separated by spaces or commas.
    #[arg(long)]
    pub target: String,
    #[arg(long, value_enum, default_value = "local")]
    pub c4_reading: C4ReadingArg,
    #[arg(long, default_value_t = 6)]
    pub depth: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    pub max_states: usize,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Graphviz output.
    #[arg(long, conflicts_with = "gaps")]
    pub dot: bool,
    /// List pairs that share an epistemic component without being directly
    /// comparable.
    #[arg(long)]
    pub gaps: bool,
    /// For a flutter directory: the butterfly to export.
    #[arg(long)]
    pub k: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum SuiteCommand {
    /// Random models with every pair of events: C1–C4 must force A ⊆ r^n(B).
    Lewis {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        models: usize,
        #[arg(long, default_value_t = 6)]
        max_states: usize,
        #[arg(long, value_enum, default_value = "local")]
        c4_reading: C4ReadingArg,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: Box<FormatError> },
    #[error(transparent)]
    Butterfly(#[from] ButterflyError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Facts(#[from] FactsError),
    #[error(transparent)]
    Lewis(#[from] LewisError),
    #[error("formula: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Agents(#[from] FormulaError),
    #[error("PLAUSIBILITY_MC_SEED: {0:?} is not an unsigned integer")]
    Seed(String),
    #[error("{0}")]
    Usage(String),
    #[error("writing output: {0}")]
    Output(#[from] io::Error),
}

/// A loaded `--model` argument.
pub enum Loaded {
    Explicit { model: Model, selection: TableSelection },
    Flutter(Flutter),
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    if path.is_dir() {
        return Ok(Loaded::Flutter(read_flutter_dir(path)?));
    }
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (model, selection) = load_model(&text).map_err(|source| CliError::Format {
        path: path.to_path_buf(),
        source: Box::new(source),
    })?;
    Ok(Loaded::Explicit { model, selection })
}

/// Parses formula text against a structure's agents and heights.
pub fn parse_for<S: EpistemicStructure>(st: &S, text: &str, explicit_heights: Option<Vec<u64>>) -> Result<Formula, ParseError> {
    let mut p = FormulaParser::new().agents(st.agents());
    if let Some(max) = st.max_height() {
        p = p.height_ceiling(max);
    }
    if let Some(hs) = explicit_heights {
        p = p.heights(hs);
    }
    p.parse(text)
}

fn seed_from_env(seed: u64) -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Seed(v)),
        Err(_) => Ok(seed),
    }
}

/// Parses `args` (program name first) and runs the command, writing reports
/// to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(CliError::Output(e)) if e.kind() == io::ErrorKind::BrokenPipe => EXIT_PASS,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

pub fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        Command::Gen(g) => gen(g, out),
        Command::Check(a) => check(a, out),
        Command::Ck(a) => ck(a, out),
        Command::Facts(a) => facts(a, out),
        Command::Lewis(a) => lewis(a, out),
        Command::Dump(a) => dump(a, out),
        Command::Suite(s) => suite(s, out),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn gen(cmd: GenCommand, out: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        GenCommand::Butterfly {
            k,
            m,
            depth,
            agents,
            output,
        } => {
            let agents = parse_agents(&agents)?;
            let model = build_butterfly(ButterflyParams::new(k, m, depth)?, &agents)?;
            let selection = center_anchored_selection(&model, k).map_err(CheckError::from)?;
            write_file(&output, &save_model(&model, Some(&selection)))?;
            writeln!(out, "wrote {} ({} states)", output.display(), model.len())?;
        }
        GenCommand::Flutter {
            k_lo,
            k_hi,
            m,
            depth,
            agents,
            output,
        } => {
            let agents = parse_agents(&agents)?;
            let fl = Flutter::new(k_lo, k_hi, m, depth, &agents)?;
            write_flutter_dir(&fl, &output)?;
            writeln!(
                out,
                "wrote {} ({} butterflies)",
                output.display(),
                fl.centers().count()
            )?;
        }
    }
    Ok(EXIT_PASS)
}

fn verdict_code(value: bool, soundness: Soundness, strict: bool) -> i32 {
    if strict && !soundness.is_exact() {
        EXIT_CONTAMINATED
    } else if value {
        EXIT_PASS
    } else {
        EXIT_FALSE
    }
}

fn check(a: CheckArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    match load(&a.model)? {
        Loaded::Explicit { model, selection } => {
            let hs = model.heights().collect();
            check_on(&model, &selection, Some(hs), &a, out)
        }
        Loaded::Flutter(fl) => check_on(&fl, &fl, None, &a, out),
    }
}

fn check_on<S, F>(st: &S, sel: &F, heights: Option<Vec<u64>>, a: &CheckArgs, out: &mut dyn Write) -> Result<i32, CliError>
where
    S: EpistemicStructure,
    F: Selection<S::State>,
{
    let phi = parse_for(st, &a.formula, heights)?;
    let w = resolve_state(st, &a.state)?;
    let mut ev = Evaluator::new(st, sel);
    let r = ev.check(&phi, w)?;
    let trace: Vec<String> = r.trace.iter().map(|&s| st.label(s)).collect();
    writeln!(out, "state: {}", st.label(w))?;
    writeln!(out, "formula: {}", a.formula)?;
    writeln!(out, "verdict: {}", r.value)?;
    writeln!(out, "soundness: {}", r.soundness)?;
    match st.safe_modal_depth(w) {
        Some(q) => writeln!(out, "modal depth: {} (safe up to {q})", phi.modal_depth())?,
        None => writeln!(out, "modal depth: {}", phi.modal_depth())?,
    }
    if !trace.is_empty() {
        writeln!(out, "witness: {}", trace.join(" -> "))?;
    }
    Ok(verdict_code(r.value, r.soundness, a.strict))
}

fn group_indices<S: EpistemicStructure>(st: &S, group: Option<&str>) -> Result<Vec<usize>, CliError> {
    match group {
        None => Ok((0..st.agents().len()).collect()),
        Some(text) => parse_agents(text)?
            .iter()
            .map(|a| {
                st.agent_index(a)
                    .ok_or_else(|| CheckError::UnknownAgent(a.to_string()).into())
            })
            .collect(),
    }
}

fn ck(a: CkArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    match load(&a.model)? {
        Loaded::Explicit { model, selection } => {
            let hs = model.heights().collect();
            ck_on(&model, &selection, Some(hs), &a, out)
        }
        Loaded::Flutter(fl) => ck_on(&fl, &fl, None, &a, out),
    }
}

fn ck_on<S, F>(st: &S, sel: &F, heights: Option<Vec<u64>>, a: &CkArgs, out: &mut dyn Write) -> Result<i32, CliError>
where
    S: EpistemicStructure,
    F: Selection<S::State>,
{
    let phi = parse_for(st, &a.formula, heights)?;
    let group = group_indices(st, a.group.as_deref())?;
    let names: Vec<&str> = group.iter().map(|&i| st.agents()[i].as_str()).collect();
    let mut ev = Evaluator::new(st, sel);
    let rep = iterative_ck(&mut ev, &group, &phi)?;
    let inexact = rep.verdicts.values().filter(|v| !v.1.is_exact()).count();
    writeln!(out, "formula: {}", a.formula)?;
    writeln!(out, "group: {}", names.join(" "))?;
    writeln!(out, "states: {}", rep.verdicts.len())?;
    writeln!(out, "ck members: {}", rep.len())?;
    writeln!(out, "fixed point after {} iterations", rep.iterations)?;
    writeln!(out, "frontier-contaminated verdicts: {inexact}")?;
    if rep.len() <= 20 {
        let members: Vec<String> = rep.members().map(|s| st.label(s)).collect();
        writeln!(out, "members: {{{}}}", members.join(", "))?;
    }
    let Some(label) = &a.state else {
        return Ok(if a.strict && inexact > 0 { EXIT_CONTAMINATED } else { EXIT_PASS });
    };
    let w = resolve_state(st, label)?;
    let at = ck_at(&mut ev, &group, &phi, w)?;
    let (value, soundness) = rep.verdicts[&w];
    if (value, soundness) != (at.value, at.soundness) {
        return Err(CliError::Usage(format!(
            "internal disagreement at {label}: fixed point {value} ({soundness}), search {} ({})",
            at.value, at.soundness
        )));
    }
    writeln!(out, "state {}: {} ({})", st.label(w), at.value, at.soundness)?;
    writeln!(out, "reachable region: {} states", at.region_size)?;
    if !at.refutation.is_empty() {
        let path: Vec<String> = at.refutation.iter().map(|&s| st.label(s)).collect();
        writeln!(out, "refutation: {}", path.join(" -> "))?;
    }
    Ok(verdict_code(at.value, at.soundness, a.strict))
}

fn facts(a: FactsArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let base = FactsConfig {
        center: a.k,
        margin: a.m,
        threshold: a.threshold,
        range: (a.k_lo, a.k_hi),
        samples: a.samples.clone(),
        iter_depth: a.iter_depth,
        ..FactsConfig::default()
    };
    let report = match &a.flutter_dir {
        Some(dir) => {
            let fl = read_flutter_dir(dir)?;
            run_facts_on(&base, &fl)?
        }
        None => {
            let cfg = FactsConfig {
                depth: a.depth.unwrap_or_else(|| base.required_depth().max(6)),
                ..base
            };
            run_facts(&cfg)?
        }
    };
    write!(out, "{report}")?;
    if a.machine {
        for line in report.machine_lines() {
            writeln!(out, "{line}")?;
        }
    }
    Ok(if report.all_pass() { EXIT_PASS } else { EXIT_FALSE })
}

fn event_spec(model: &Model, text: &str) -> Result<EventSpec, CliError> {
    let names: Vec<String> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect();
    if !names.is_empty() && names.iter().all(|n| model.state(n).is_ok()) {
        return Ok(EventSpec::States(names));
    }
    Ok(EventSpec::Formula(parse_for(model, text, Some(model.heights().collect()))?))
}

fn lewis(a: LewisArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let (model, selection) = match load(&a.model)? {
        Loaded::Explicit { model, selection } => (model, selection),
        Loaded::Flutter(_) => {
            return Err(CliError::Usage(
                "lewis needs a single model file; export one butterfly with `gen butterfly`".into(),
            ))
        }
    };
    let reading = C4Reading::from(a.c4_reading);
    let ops = ReasonOps::new(&model, &selection)?;
    let basis = event_spec(&model, &a.basis)?.resolve(&model, &selection, &ops)?;
    let target = event_spec(&model, &a.target)?.resolve(&model, &selection, &ops)?;
    let rep = verify_lewis_theorem(&ops, &basis, &target, a.depth, reading, a.max_states)?;
    let set = |e| format!("{{{}}}", event_names(&model, e).join(", "));
    let agent = |i: usize| model.agents()[i].to_string();

    writeln!(out, "basis A = {}", set(&basis))?;
    writeln!(out, "target B = {}", set(&target))?;
    writeln!(out, "C4 reading: {reading}, {} events enumerated", rep.conditions.c4_search_space)?;
    let mut kv = String::new();
    for c in crate::lewis::Condition::ALL {
        let holds = rep.conditions.holds(c);
        writeln!(kv, "{}={}", c.to_string().to_lowercase(), if holds { "pass" } else { "fail" }).unwrap();
        match rep.conditions.violations.get(&c) {
            None => writeln!(out, "{c}: holds")?,
            Some(v) => {
                let mut who = format!("i = {}", agent(v.agent_i));
                if let Some(j) = v.agent_j {
                    write!(who, ", j = {}", agent(j)).unwrap();
                }
                if let Some(e) = &v.event {
                    write!(who, ", C = {}", set(e)).unwrap();
                }
                writeln!(out, "{c}: fails at {} ({who})", model.name(v.state))?;
            }
        }
    }
    for (n, level) in rep.levels.iter().enumerate() {
        writeln!(out, "r^{n}(B) = {}", set(level))?;
    }
    match rep.stabilized_at {
        Some(n) => writeln!(out, "levels stabilize at n = {n}")?,
        None => writeln!(out, "levels not stabilized by n = {}", a.depth)?,
    }
    match rep.counterexample {
        Some((n, s)) => writeln!(out, "A ⊄ r^{n}(B): {} is missing", model.name(s))?,
        None => writeln!(out, "A ⊆ r^n(B) for n = 0..={}", a.depth)?,
    }
    writeln!(kv, "conditions={}", if rep.conditions.all_hold() { "pass" } else { "fail" }).unwrap();
    writeln!(kv, "iterated={}", if rep.counterexample.is_none() { "pass" } else { "fail" }).unwrap();
    writeln!(kv, "theorem_refuted={}", rep.refutes_theorem()).unwrap();
    out.write_all(kv.as_bytes())?;
    Ok(if rep.conditions.all_hold() && rep.counterexample.is_none() {
        EXIT_PASS
    } else {
        EXIT_FALSE
    })
}

fn dump(a: DumpArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    if !a.dot && !a.gaps {
        return Err(CliError::Usage("choose an output: --dot or --gaps".into()));
    }
    let model = match (load(&a.model)?, a.k) {
        (Loaded::Explicit { model, .. }, None) => model,
        (Loaded::Explicit { .. }, Some(_)) => return Err(CliError::Usage("--k applies to flutter directories".into())),
        (Loaded::Flutter(fl), Some(k)) => fl.butterfly_model(k)?,
        (Loaded::Flutter(_), None) => return Err(CliError::Usage("a flutter directory needs --k".into())),
    };
    if a.dot {
        out.write_all(to_dot(&model).as_bytes())?;
        return Ok(EXIT_PASS);
    }
    let mut total = 0;
    for (i, agent) in model.agents().iter().enumerate() {
        for (x, y) in model.comparability_gaps(i) {
            total += 1;
            writeln!(out, "{agent}: {} ~ {} (same component, not comparable)", model.name(x), model.name(y))?;
        }
    }
    writeln!(out, "gaps={total}")?;
    Ok(EXIT_PASS)
}

fn suite(cmd: SuiteCommand, out: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        SuiteCommand::Lewis {
            seed,
            models,
            max_states,
            c4_reading,
        } => {
            let seed = seed_from_env(seed)?;
            let shape = ModelShape {
                max_states,
                ..ModelShape::default()
            };
            let run = property_run(seed, models, &shape, c4_reading.into(), max_states)?;
            writeln!(out, "seed={}", run.seed)?;
            writeln!(out, "models={}", run.models)?;
            writeln!(out, "pairs={}", run.pairs)?;
            writeln!(out, "premises_held={}", run.premises_held)?;
            writeln!(out, "counterexamples={}", run.counterexamples.len())?;
            writeln!(out, "violations_replayed={}", run.violations_replayed)?;
            writeln!(out, "replay_failures={}", run.replay_failures)?;
            Ok(if run.passed() { EXIT_PASS } else { EXIT_FALSE })
        }
    }
}

/// Agents given as a list on the command line.
pub fn parse_agents(text: &str) -> Result<Vec<AgentId>, CliError> {
    Ok(agent_list(&text.replace(',', " "))?)
}
