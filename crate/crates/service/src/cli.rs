//! Command-line entry points.
//!
//! Exit status: 0 success, 1 the verdict or play went against the
//! receiver, 2 usage or input error, 3 internal error, 4 the solver gave up
//! within its limits.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use protogame::game::{FirstLegal, Pick, ScriptStep, Scripted, Strategy, Value};
use protogame::netsim::SimError;
use protogame::syntax::SourceText;
use protogame::validity::{check_omega_instances, CertificateStrategy, Greedy, Interactive, SearchLimits, Verdict};
use protogame::{
    annotate, compose, expand_sugar, parse_formula, print_formula, print_surface, simulate, solve, GameState,
    LossModel, Move, Mover,
};
use serde::Deserialize;

use crate::api::{self, AppState};
use crate::catalog::{resolve, Catalog, LoadError};
use crate::store::Store;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;
pub const EXIT_UNKNOWN: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "protogame", version, about = "Formulas as protocols: normal forms, games, verdicts and sessions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a program and print its formulas.
    Parse { file: PathBuf },
    /// Print the normal form of one formula (`FILE:NAME`) or of all (`FILE`).
    Normalize { target: String },
    /// Decide a formula by solving its game.
    Check(CheckArgs),
    /// Compose two protocols: the second is inserted at each final
    /// occurrence of the first.
    Compose { first: String, second: String },
    /// Play a game and print the transcript.
    Play(PlayArgs),
    /// Simulate a session under a loss model.
    Simulate(SimulateArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct LimitArgs {
    #[arg(long, default_value_t = SearchLimits::default().max_states)]
    pub max_states: usize,
    #[arg(long, default_value_t = SearchLimits::default().max_depth)]
    pub max_depth: usize,
    #[arg(long, default_value_t = SearchLimits::default().int_bound)]
    pub int_bound: u64,
    #[arg(long, default_value_t = SearchLimits::default().fresh_bound)]
    pub fresh_bound: usize,
}

impl LimitArgs {
    fn limits(&self) -> SearchLimits {
        SearchLimits {
            max_states: self.max_states,
            max_depth: self.max_depth,
            int_bound: self.int_bound,
            fresh_bound: self.fresh_bound,
        }
    }
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// `FILE:NAME`
    pub target: String,
    #[command(flatten)]
    pub limits: LimitArgs,
    /// Solve the subgames where the sender's first integer is each of
    /// these values, e.g. `0,1,2,3`.
    #[arg(long, value_delimiter = ',')]
    pub n0: Vec<u64>,
    /// Print the verdict with its certificate as JSON.
    #[arg(long)]
    pub json: bool,
    /// Verdict cache directory; defaults to `$PROTOGAME_STORE`.
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub no_cache: bool,
}

#[derive(Debug, Args)]
pub struct PlayArgs {
    /// `FILE:NAME`
    pub target: String,
    /// `greedy`, `certificate` or `interactive`.
    #[arg(long, default_value = "greedy")]
    pub player: String,
    /// `first`, `certificate`, `interactive` or `scripted:FILE`.
    #[arg(long, default_value = "first")]
    pub opponent: String,
    #[arg(long, default_value_t = 50)]
    pub budget: usize,
    /// Also print the network reading of the play.
    #[arg(long)]
    pub trace: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `NAME` in the program given by `--file`, or `FILE:NAME`.
    #[arg(long)]
    pub formula: String,
    /// Program file; the bundled examples by default.
    #[arg(long)]
    pub file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub ack_loss: f64,
    #[arg(long, default_value_t = 0.0)]
    pub close_request: f64,
    #[arg(long, default_value_t = 0.0)]
    pub reinit: f64,
    #[arg(long)]
    pub max_ack_losses: Option<usize>,
    #[arg(long)]
    pub max_close_requests: Option<usize>,
    #[arg(long)]
    pub max_reinits: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub first_int: u64,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Store directory; defaults to `$PROTOGAME_STORE`, else in memory.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Program whose formulas are offered; the bundled examples by default.
    #[arg(long)]
    pub program: Option<PathBuf>,
}

/// Output streams of a command.
pub struct Io<'a> {
    pub input: &'a mut dyn BufRead,
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

struct Failure(i32, String);

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure(EXIT_USAGE, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(EXIT_INTERNAL, e.to_string())
    }
}

fn internal(e: impl std::fmt::Display) -> Failure {
    Failure(EXIT_INTERNAL, e.to_string())
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure(EXIT_USAGE, e.to_string())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, io: Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { io.out.write_all(text.as_bytes()) } else { io.err.write_all(text.as_bytes()) };
            return if code == 0 { EXIT_OK } else { EXIT_USAGE };
        }
    };
    let Io { input, out, err } = io;
    let result = match cli.command {
        Command::Parse { file } => parse_cmd(&file, out),
        Command::Normalize { target } => normalize_cmd(&target, out),
        Command::Check(a) => check_cmd(&a, out),
        Command::Compose { first, second } => compose_cmd(&first, &second, out),
        Command::Play(a) => play_cmd(&a, input, out),
        Command::Simulate(a) => simulate_cmd(&a, out),
        Command::Serve(a) => serve_cmd(&a),
    };
    match result {
        Ok(code) => code,
        Err(Failure(code, message)) => {
            let _ = writeln!(err, "protogame: {message}");
            code
        }
    }
}

fn named(target: &str) -> Result<(Catalog, String), Failure> {
    match resolve(target)? {
        (c, Some(name)) => Ok((c, name)),
        (_, None) => Err(usage(format!("`{target}` names no formula; use FILE:NAME"))),
    }
}

fn parse_cmd(file: &std::path::Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let c = Catalog::load(file)?;
    let sig = &c.program.signature;
    for (name, sorts) in sig.predicates() {
        let sorts: Vec<String> = sorts.iter().map(|s| s.to_string()).collect();
        let sorts = if sorts.is_empty() { "()".to_string() } else { sorts.join(" * ") };
        writeln!(out, "pred {name} : {sorts}")?;
    }
    for (name, f) in &c.program.formulas {
        writeln!(out, "formula {name} := {}", print_surface(f))?;
    }
    Ok(EXIT_OK)
}

fn normalize_cmd(target: &str, out: &mut dyn Write) -> Result<i32, Failure> {
    let (c, name) = resolve(target)?;
    match name {
        Some(n) => writeln!(out, "{}", print_formula(&c.root(&n)?))?,
        None => {
            for n in c.names().map(str::to_string).collect::<Vec<_>>() {
                writeln!(out, "{n}: {}", print_formula(&c.root(&n)?))?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn verdict_code(v: &Verdict) -> i32 {
    match v {
        Verdict::Valid { .. } => EXIT_OK,
        Verdict::Invalid { .. } => EXIT_NEGATIVE,
        Verdict::Unknown { .. } => EXIT_UNKNOWN,
    }
}

fn check_cmd(a: &CheckArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let (c, name) = named(&a.target)?;
    let root = c.root(&name)?;
    let lim = a.limits.limits();
    let engine = c.engine(lim.policy());
    if !a.n0.is_empty() {
        let results = check_omega_instances(&engine, &root, &a.n0, &lim).map_err(usage)?;
        let mut code = EXIT_OK;
        for (n, v) in &results {
            let st = v.stats();
            writeln!(out, "n0={n}: {}  (states {}, depth {})", v.label(), st.states, st.depth)?;
            code = code.max(verdict_code(v));
        }
        return Ok(code);
    }
    let store = match (&a.store, a.no_cache) {
        (_, true) => None,
        (Some(dir), _) => Some(Store::open(dir).map_err(internal)?),
        (None, _) => Store::from_env().map_err(internal)?,
    };
    let cached = store.as_ref().and_then(|s| s.cached_verdict(&root, &lim));
    let verdict = match cached {
        Some(v) => v,
        None => {
            let v = solve(&engine, &root, &lim).map_err(usage)?;
            if let Some(s) = &store {
                s.cache_verdict(&root, &lim, &v).map_err(internal)?;
            }
            v
        }
    };
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&verdict).map_err(internal)?)?;
    } else {
        let st = verdict.stats();
        writeln!(out, "{}", verdict.label())?;
        writeln!(out, "states {}, depth {}{}", st.states, st.depth, if st.limit_hit { ", limit hit" } else { "" })?;
    }
    Ok(verdict_code(&verdict))
}

fn compose_cmd(first: &str, second: &str, out: &mut dyn Write) -> Result<i32, Failure> {
    let (c1, n1) = named(first)?;
    let (c2, n2) = named(second)?;
    let f = c1.root(&n1)?;
    let g = c2.root(&n2)?;
    let composed = compose(&f, &g).map_err(usage)?;
    writeln!(out, "{}", print_formula(&composed.to_formula()))?;
    Ok(EXIT_OK)
}

/// One step of an opponent script file.
#[derive(Debug, Deserialize)]
struct ScriptLine {
    /// `"root"`, `"newest"`, an index into `V`, or a formula.
    pick: serde_json::Value,
    #[serde(default)]
    values: Vec<Value>,
}

fn load_script(path: &str, c: &Catalog) -> Result<Vec<ScriptStep>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {path}: {e}")))?;
    let lines: Vec<ScriptLine> = serde_json::from_str(&text).map_err(|e| usage(format!("{path}: {e}")))?;
    let sig = &c.program.signature;
    lines
        .into_iter()
        .map(|l| {
            let pick = match &l.pick {
                serde_json::Value::Number(n) => Pick::Index(n.as_u64().ok_or_else(|| usage("bad index"))? as usize),
                serde_json::Value::String(s) if s == "root" => Pick::Root,
                serde_json::Value::String(s) if s == "newest" => Pick::Newest,
                serde_json::Value::String(s) => {
                    let f = parse_formula(&SourceText::new(s.as_str(), path), sig).map_err(usage)?;
                    Pick::Formula(expand_sugar(&f, sig).map_err(usage)?)
                }
                other => return Err(usage(format!("{path}: bad pick {other}"))),
            };
            Ok(ScriptStep::new(pick, l.values))
        })
        .collect()
}

fn prompt<'a>(
    input: &'a mut dyn BufRead,
    out: &'a mut dyn Write,
) -> impl FnMut(&GameState, &[Move]) -> Option<Move> + 'a {
    move |s, moves| {
        let _ = writeln!(out, "-- step {}, {} to move", s.step + 1, s.turn);
        for (k, m) in moves.iter().enumerate() {
            let _ = writeln!(out, "  [{k}] {m}");
        }
        let _ = write!(out, "> ");
        let _ = out.flush();
        let mut line = String::new();
        input.read_line(&mut line).ok()?;
        line.trim().parse::<usize>().ok().and_then(|k| moves.get(k).cloned())
    }
}

fn play_cmd(a: &PlayArgs, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<i32, Failure> {
    let (c, name) = named(&a.target)?;
    let root = c.root(&name)?;
    let lim = SearchLimits::default();
    let engine = c.engine(lim.policy());
    let needs_cert = |side: &str| side == "certificate";
    let verdict = if needs_cert(&a.player) || needs_cert(&a.opponent) {
        Some(solve(&engine, &root, &lim).map_err(usage)?)
    } else {
        None
    };
    let cert = |want: Mover| -> Result<CertificateStrategy, Failure> {
        match verdict.as_ref().and_then(|v| v.certificate()) {
            Some(c) if c.mover == want => Ok(CertificateStrategy::new(c.clone())),
            _ => Err(usage(format!("the {want} has no winning strategy here"))),
        }
    };
    if a.player == "interactive" && a.opponent == "interactive" {
        return Err(usage("only one side can be interactive"));
    }
    let result = {
        let mut interactive: Option<Box<dyn Strategy + '_>> = Some(Box::new(Interactive(prompt(input, &mut *out))));
        let mut human = || interactive.take().expect("one interactive side");
        let mut player: Box<dyn Strategy + '_> = match a.player.as_str() {
            "greedy" => Box::new(Greedy),
            "certificate" => Box::new(cert(Mover::Player)?),
            "interactive" => human(),
            other => return Err(usage(format!("unknown player strategy `{other}`"))),
        };
        let mut opponent: Box<dyn Strategy + '_> = match a.opponent.as_str() {
            "first" => Box::new(FirstLegal),
            "certificate" => Box::new(cert(Mover::Opponent)?),
            "interactive" => human(),
            s if s.starts_with("scripted:") => Box::new(Scripted::new(load_script(&s["scripted:".len()..], &c)?)),
            other => return Err(usage(format!("unknown opponent strategy `{other}`"))),
        };
        engine.run_play(&root, player.as_mut(), opponent.as_mut(), a.budget)
    };
    let (t, failure) = match result {
        Ok(t) => (t, None),
        Err(e) => (e.transcript.clone(), Some(e.to_string())),
    };
    if a.json {
        let trace = annotate(&engine, &t).map_err(internal)?;
        writeln!(out, "{}", serde_json::to_string_pretty(&trace).map_err(internal)?)?;
    } else {
        out.write_all(t.to_table().as_bytes())?;
        if a.trace {
            let trace = annotate(&engine, &t).map_err(internal)?;
            writeln!(out)?;
            out.write_all(trace.timeline().as_bytes())?;
        }
    }
    if let Some(m) = failure {
        return Err(usage(m));
    }
    Ok(if t.outcome.player_won() { EXIT_OK } else { EXIT_NEGATIVE })
}

fn simulate_cmd(a: &SimulateArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let (c, name) = match &a.file {
        Some(f) => (Catalog::load(f)?, a.formula.clone()),
        None => named(&a.formula)?,
    };
    let root = c.root(&name)?;
    let engine = c.engine(SearchLimits::default().policy());
    let model = LossModel {
        ack_loss_probability: a.ack_loss,
        close_request_probability: a.close_request,
        reinit_probability: a.reinit,
        seed: a.seed,
        max_ack_losses: a.max_ack_losses,
        max_close_requests: a.max_close_requests,
        max_reinits: a.max_reinits,
        first_int: a.first_int,
    };
    let trace = simulate(&engine, &root, &model, a.steps).map_err(|e| match e {
        SimError::Game(_) => internal(e),
        _ => usage(e),
    })?;
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&trace).map_err(internal)?)?;
    } else {
        out.write_all(trace.timeline().as_bytes())?;
    }
    Ok(if trace.outcome().player_won() { EXIT_OK } else { EXIT_NEGATIVE })
}

fn serve_cmd(a: &ServeArgs) -> Result<i32, Failure> {
    let catalog = match &a.program {
        Some(p) => Catalog::load(p)?,
        None => Catalog::bundled(),
    };
    let store = match &a.store {
        Some(dir) => Some(Store::open(dir).map_err(internal)?),
        None => Store::from_env().map_err(internal)?,
    };
    let state = AppState::new(catalog, store).map_err(internal)?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(api::serve(state, a.port))?;
    Ok(EXIT_OK)
}
