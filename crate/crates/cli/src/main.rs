use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ertkit::corpus::{self, CheckStatus, CorpusOptions};
use ertkit::ert::{ert_eval, ert_series, ErtConfig, Kind, Mutation};
use ertkit::invariants::specfile::{CheckKind, SpecFile};
use ertkit::lang::{parse_program, parse_rt, Program, RtExpr};
use ertkit::mdp::export::{to_dot, to_json};
use ertkit::mdp::{build_mdp, cross_check, CrossCheckConfig, Verdict};
use ertkit::props::{run_props, Property, PropsConfig};
use ertkit::report::{RunReport, StateResult, Status};
use ertkit::{Error, State, XReal};

#[derive(Parser)]
#[command(name = "ertkit", version, about = "Expected run-times of probabilistic programs")]
struct Cli {
    #[arg(long, value_enum, global = true, default_value = "text")]
    format: Format,
    /// Include wall-clock timings in the report.
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Loops {
    Unroll,
    Solve,
}

#[derive(Subcommand)]
enum Cmd {
    /// ert[C](f) at the given states.
    Eval(ProgArgs),
    /// Compare ert with the expected reward of the operational MDP.
    Crosscheck {
        #[command(flatten)]
        prog: ProgArgs,
        #[command(flatten)]
        mdp: MdpArgs,
        /// Replace every loop by `while<k>` first (corpus entries with
        /// infinite state spaces default to a bound).
        #[arg(long)]
        bound_loops: Option<u32>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Check an upper invariant from a spec file.
    CheckInv(SpecArgs),
    /// Check an omega-invariant (or its limit) from a spec file.
    CheckOmega(SpecArgs),
    /// Refine an invariant from a spec file.
    Refine(SpecArgs),
    /// Randomised property suite.
    Props {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, default_value_t = 4)]
        max_depth: u32,
        /// Only these properties (repeatable).
        #[arg(long = "property", value_parser = parse_property)]
        properties: Vec<Property>,
        /// Run against a transformer whose `if` guards cost nothing.
        #[arg(long)]
        mutant: bool,
        #[command(flatten)]
        mdp: MdpArgs,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Scripted checks of the case-study corpus (all entries by default).
    Corpus {
        name: Option<String>,
        /// List the entries and exit.
        #[arg(long)]
        list: bool,
        #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_param)]
        params: Vec<(String, i64)>,
        #[arg(long)]
        lead: Option<i64>,
        #[arg(long)]
        start: Option<i64>,
        #[arg(long = "N")]
        n: Option<i64>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value_t = 64)]
        depth: u32,
        #[command(flatten)]
        mdp: MdpArgs,
    },
    /// Write the operational MDP as DOT (or JSON with `--format json`).
    ExportMdp {
        #[command(flatten)]
        prog: ProgArgs,
        #[command(flatten)]
        mdp: MdpArgs,
        #[arg(long)]
        bound_loops: Option<u32>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ProgArgs {
    /// A `.pp` file or `corpus:NAME`.
    program: String,
    /// Post-run-time, inline or a `.rt` file.
    #[arg(long = "f", default_value = "0")]
    f: String,
    /// Initial state such as `c=1` or `{x=2, a=[0,0]}` (repeatable).
    #[arg(long = "state")]
    states: Vec<String>,
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_param)]
    params: Vec<(String, i64)>,
    /// Maximum unrolling depth.
    #[arg(long, default_value_t = 64)]
    depth: u32,
    #[arg(long, value_enum, default_value = "unroll")]
    loops: Loops,
    /// Ignore loop annotations.
    #[arg(long)]
    no_annotations: bool,
    /// Cap on non-memoised evaluations.
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Args)]
struct MdpArgs {
    /// Maximum number of MDP nodes (default 200000 or ERTKIT_MAX_NODES).
    #[arg(long)]
    node_cap: Option<usize>,
}

impl MdpArgs {
    fn cap(&self) -> usize {
        self.node_cap.unwrap_or_else(ertkit::mdp::crosscheck::default_node_cap)
    }
}

#[derive(Args)]
struct SpecArgs {
    spec: PathBuf,
    #[arg(long, default_value_t = 64)]
    depth: u32,
    #[arg(long, value_enum, default_value = "unroll")]
    loops: Loops,
}

fn parse_param(s: &str) -> Result<(String, i64), String> {
    let (k, v) = s.split_once('=').ok_or("expected NAME=VALUE")?;
    let v = v.trim().parse().map_err(|_| format!("`{v}` is not an integer"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_property(s: &str) -> Result<Property, String> {
    Property::ALL
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| format!("unknown property `{s}`"))
}

/// A failure before any result: bad input or an evaluation error.
struct InputError(String);

impl From<Error> for InputError {
    fn from(e: Error) -> Self {
        InputError(e.to_string())
    }
}

type Res<T> = Result<T, InputError>;

struct Loaded {
    source: String,
    program: Program,
    corpus: Option<&'static corpus::Entry>,
    params: BTreeMap<String, i64>,
}

fn load_program(spec: &str, params: &[(String, i64)]) -> Res<Loaded> {
    let params: BTreeMap<String, i64> = params.iter().cloned().collect();
    if let Some(name) = spec.strip_prefix("corpus:") {
        let e = corpus::entry(name)?;
        let source = corpus::source(name, &params)?;
        let program = parse_program(&source).map_err(|e| InputError(format!("{spec}: {e}")))?;
        return Ok(Loaded {
            source,
            program,
            corpus: Some(e),
            params,
        });
    }
    if !params.is_empty() {
        return Err(InputError("--param only applies to corpus programs".into()));
    }
    let source = std::fs::read_to_string(spec).map_err(|e| InputError(format!("{spec}: {e}")))?;
    let program = parse_program(&source).map_err(|e| InputError(format!("{spec}: {e}")))?;
    Ok(Loaded {
        source,
        program,
        corpus: None,
        params,
    })
}

fn load_rt(s: &str) -> Res<RtExpr> {
    let text = if s.ends_with(".rt") && Path::new(s).is_file() {
        std::fs::read_to_string(s).map_err(|e| InputError(format!("{s}: {e}")))?
    } else {
        s.to_string()
    };
    let body: String = text
        .lines()
        .map(|l| l.split("//").next().unwrap_or(""))
        .collect::<Vec<_>>()
        .join("\n");
    parse_rt(body.trim()).map_err(|e| InputError(format!("run-time `{}`: {e}", body.trim())))
}

fn states(args: &ProgArgs, l: &Loaded) -> Res<Vec<State>> {
    if args.states.is_empty() {
        return Ok(vec![match l.corpus {
            Some(e) => corpus::default_state(e.name, &l.params)?,
            None => State::new(),
        }]);
    }
    args.states
        .iter()
        .map(|s| State::parse(s).map_err(|e| InputError(format!("state `{s}`: {e}"))))
        .collect()
}

fn ert_config(depth: u32, loops: Loops) -> ErtConfig {
    let cfg = ErtConfig::default().with_depth(depth);
    match loops {
        Loops::Unroll => cfg,
        Loops::Solve => cfg.solving(),
    }
}

impl ProgArgs {
    fn config(&self) -> ErtConfig {
        let mut cfg = ert_config(self.depth, self.loops);
        cfg.use_annotations = !self.no_annotations;
        if let Some(b) = self.budget {
            cfg.eval_budget = b;
        }
        cfg
    }
}

/// Short exact form when it is readable, otherwise a float.
fn show(x: &XReal) -> String {
    let s = x.to_string();
    if s.len() <= 24 {
        s
    } else {
        format!("≈{:.12}", x.to_f64())
    }
}

struct Out {
    report: RunReport,
    text: Vec<String>,
}

impl Out {
    fn new(report: RunReport) -> Self {
        Out {
            report,
            text: Vec::new(),
        }
    }

    fn line(&mut self, s: impl Into<String>) {
        self.text.push(s.into());
    }
}

fn cmd_eval(args: &ProgArgs, out: &mut Out) -> Res<()> {
    let l = load_program(&args.program, &args.params)?;
    out.report.program_sha256 = Some(ertkit::report::sha256_hex(&l.source));
    let f = load_rt(&args.f)?;
    let cfg = args.config();
    for s in states(args, &l)? {
        let r = ert_eval(&l.program, &f, &s, &cfg).map_err(|e| InputError(format!("at {s}: {e}")))?;
        let mut item = serde_json::to_value(StateResult::new(&s, &r)).expect("serialisable");
        let mut line = format!("{s}: {} ({})", show(&r.value), r.kind);
        if let Kind::LowerBound { depth } = r.kind {
            // How much the last doubling of the depth still added.
            let half = (depth / 2).max(1);
            let prev = ert_series(&l.program, &f, &s, &cfg, &[half])?.remove(0);
            let gap = r.value.monus(&prev.value).map_err(Error::from)?;
            line.push_str(&format!("; exact value {}; depth {half} gave {}, gap {:.3e}", r.value, show(&prev.value), gap.to_f64()));
            item["gap_since_half_depth"] = json!({"depth": half, "value": prev.value, "gap": gap});
        }
        out.line(line);
        out.report.push(Status::Ok, item);
    }
    Ok(())
}

fn crosscheck_config(prog: &ProgArgs, mdp: &MdpArgs, bound: Option<u32>, l: &Loaded, tol: f64) -> CrossCheckConfig {
    CrossCheckConfig {
        ert: prog.config(),
        node_cap: mdp.cap(),
        tol,
        bound_loops: bound.or(l.corpus.and_then(|e| e.crosscheck_bound)),
        ..CrossCheckConfig::default()
    }
}

fn cmd_crosscheck(prog: &ProgArgs, mdp: &MdpArgs, bound: Option<u32>, tol: f64, out: &mut Out) -> Res<()> {
    let l = load_program(&prog.program, &prog.params)?;
    out.report.program_sha256 = Some(ertkit::report::sha256_hex(&l.source));
    let f = load_rt(&prog.f)?;
    let cfg = crosscheck_config(prog, mdp, bound, &l, tol);
    if let Some(k) = cfg.bound_loops {
        out.line(format!("loops bounded to while<{k}>"));
    }
    for s in states(prog, &l)? {
        let c = cross_check(&l.program, &f, &s, &cfg).map_err(|e| InputError(format!("at {s}: {e}")))?;
        let (word, status) = match c.verdict {
            Verdict::Agree => ("pass", Status::Ok),
            Verdict::Disagree => ("MISMATCH", Status::Failed),
            Verdict::Unchecked => ("unchecked", Status::Inconclusive),
        };
        out.line(format!(
            "{s}: {word}: ert {} ({}), MDP {} ({:?}, {} nodes), gap {:.3e}",
            show(&c.ert.value),
            c.ert.kind,
            show(&c.mdp.value),
            c.mdp.method,
            c.nodes,
            c.gap
        ));
        out.report.push(status, json!({"state": s, "crosscheck": c}));
    }
    Ok(())
}

fn cmd_spec(args: &SpecArgs, allowed: &[CheckKind], out: &mut Out) -> Res<()> {
    let spec = SpecFile::load(&args.spec)?;
    if !allowed.contains(&spec.kind) {
        return Err(InputError(format!(
            "{}: kind `{}` does not belong to this command",
            args.spec.display(),
            serde_json::to_value(spec.kind).expect("serialisable").as_str().unwrap_or("?")
        )));
    }
    let text = std::fs::read_to_string(&args.spec).map_err(|e| InputError(e.to_string()))?;
    out.report.program_sha256 = Some(ertkit::report::sha256_hex(&text));
    let o = spec.run(&ert_config(args.depth, args.loops))?;
    for v in &o.verdicts {
        let label = v.direction.map(|d| format!("{d:?}: ").to_lowercase()).unwrap_or_default();
        out.line(format!("{label}{}", v.verdict));
    }
    if let Some(tables) = &o.tables {
        for (i, t) in tables.iter().enumerate() {
            let cells: Vec<String> = t.iter().map(|(s, x)| format!("{s} -> {}", show(x))).collect();
            out.line(format!("round {}: {}", i + 1, cells.join(", ")));
        }
    }
    let status = if o.failed() {
        Status::Failed
    } else if o.inconclusive() {
        Status::Inconclusive
    } else {
        Status::Ok
    };
    out.report.push(status, &o);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_props(
    seed: u64,
    count: usize,
    max_depth: u32,
    properties: &[Property],
    mutant: bool,
    mdp: &MdpArgs,
    tol: f64,
    out: &mut Out,
) -> Res<()> {
    let cfg = PropsConfig {
        seed,
        count,
        max_depth,
        mutation: if mutant { Mutation::FreeIfGuard } else { Mutation::None },
        node_cap: mdp.cap(),
        tol,
        properties: if properties.is_empty() {
            Property::ALL.to_vec()
        } else {
            properties.to_vec()
        },
        ..PropsConfig::default()
    };
    let r = run_props(&cfg);
    for (p, t) in &r.tallies {
        out.line(format!("{:<16} passed {:>4}  skipped {:>4}  failed {:>4}", p.name(), t.passed, t.skipped, t.failed));
    }
    for f in &r.failures {
        out.line(format!("FAIL {} case {} at {}: {}", f.property.name(), f.case, f.state, f.detail));
        out.line(format!("  program: {}", f.program));
        out.line(format!("  shrunk:  {}", f.shrunk));
    }
    out.line(if r.ok() {
        "all properties hold".to_string()
    } else {
        format!("{} failures", r.failures.len())
    });
    out.report.push(if r.ok() { Status::Ok } else { Status::Failed }, &r);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_corpus(
    name: Option<&str>,
    list: bool,
    params: &[(String, i64)],
    named: [(&str, Option<i64>); 3],
    threshold: Option<f64>,
    depth: u32,
    mdp: &MdpArgs,
    out: &mut Out,
) -> Res<()> {
    if list {
        for e in corpus::ENTRIES {
            let ps: Vec<String> = e.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            out.line(format!("{:<10} {} {}", e.name, e.summary, ps.join(" ")));
            out.report.push(Status::Ok, json!({"name": e.name, "summary": e.summary}));
        }
        return Ok(());
    }
    let mut given: BTreeMap<String, i64> = params.iter().cloned().collect();
    for (k, v) in named {
        if let Some(v) = v {
            given.insert(k.to_string(), v);
        }
    }
    let names: Vec<&str> = match name {
        Some(n) => vec![n],
        None => corpus::ENTRIES.iter().map(|e| e.name).collect(),
    };
    let opts = CorpusOptions {
        ert: ErtConfig::default().with_depth(depth),
        node_cap: mdp.cap(),
        threshold,
    };
    for n in names {
        let e = corpus::entry(n)?;
        // With no entry named, parameters go to the entries that have them.
        let mine: BTreeMap<String, i64> = given
            .iter()
            .filter(|(k, _)| name.is_some() || e.params.iter().any(|(p, _)| p == *k))
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        let t = Instant::now();
        let checks = corpus::run_checks(n, &mine, &opts)?;
        out.report.time(n, t.elapsed().as_secs_f64());
        out.line(format!("== {n}"));
        let mut status = Status::Ok;
        for c in &checks {
            let tag = match c.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Fail => {
                    status = Status::Failed;
                    "FAIL"
                }
                CheckStatus::Consistent => "consistent",
            };
            out.line(format!("  {tag:<10} {}: {}", c.name, c.detail));
        }
        out.report.push(status, json!({"entry": n, "params": corpus::resolve_params(e, &mine)?, "checks": checks}));
    }
    Ok(())
}

fn cmd_export(prog: &ProgArgs, mdp: &MdpArgs, bound: Option<u32>, output: Option<&Path>, json_out: bool) -> Res<String> {
    let l = load_program(&prog.program, &prog.params)?;
    let f = load_rt(&prog.f)?;
    let s = states(prog, &l)?.remove(0);
    let p = match bound.or(l.corpus.and_then(|e| e.crosscheck_bound)) {
        Some(k) => l.program.bound_loops(k),
        None => l.program.clone(),
    };
    let m = build_mdp(&p, &f, &s, mdp.cap())?;
    let text = if json_out {
        serde_json::to_string_pretty(&to_json(&m)).expect("serialisable")
    } else {
        to_dot(&m)
    };
    match output {
        Some(path) => {
            std::fs::write(path, &text).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
            Ok(format!("wrote {} nodes to {}", m.len(), path.display()))
        }
        None => Ok(text),
    }
}

fn run(cli: &Cli, out: &mut Out) -> Res<Option<String>> {
    match &cli.cmd {
        Cmd::Eval(a) => cmd_eval(a, out)?,
        Cmd::Crosscheck { prog, mdp, bound_loops, tol } => cmd_crosscheck(prog, mdp, *bound_loops, *tol, out)?,
        Cmd::CheckInv(a) => cmd_spec(a, &[CheckKind::Upper], out)?,
        Cmd::CheckOmega(a) => cmd_spec(a, &[CheckKind::Omega, CheckKind::Limit], out)?,
        Cmd::Refine(a) => cmd_spec(a, &[CheckKind::Refine], out)?,
        Cmd::Props {
            seed,
            count,
            max_depth,
            properties,
            mutant,
            mdp,
            tol,
        } => cmd_props(*seed, *count, *max_depth, properties, *mutant, mdp, *tol, out)?,
        Cmd::Corpus {
            name,
            list,
            params,
            lead,
            start,
            n,
            threshold,
            depth,
            mdp,
        } => cmd_corpus(
            name.as_deref(),
            *list,
            params,
            [("lead", *lead), ("start", *start), ("N", *n)],
            *threshold,
            *depth,
            mdp,
            out,
        )?,
        Cmd::ExportMdp {
            prog,
            mdp,
            bound_loops,
            output,
        } => {
            return cmd_export(prog, mdp, *bound_loops, output.as_deref(), cli.format == Format::Json).map(Some);
        }
    }
    Ok(None)
}

/// Writes a line to stdout; a closed pipe is not an error.
fn emit(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command: Vec<String> = std::env::args().skip(1).filter(|a| a != "--timings").collect();
    let mut out = Out::new(RunReport::new(&command));
    let start = Instant::now();
    match run(&cli, &mut out) {
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Ok(Some(raw)) => {
            emit(&raw);
            ExitCode::SUCCESS
        }
        Ok(None) => {
            if cli.timings {
                out.report.time("total", start.elapsed().as_secs_f64());
            } else {
                out.report.timings = None;
            }
            match cli.format {
                Format::Json => emit(&out.report.to_json()),
                Format::Text => {
                    for l in &out.text {
                        emit(l);
                    }
                    if cli.timings {
                        if let Some(t) = &out.report.timings {
                            for (k, v) in t {
                                emit(&format!("time {k}: {v:.3}s"));
                            }
                        }
                    }
                }
            }
            ExitCode::from(out.report.status.exit_code() as u8)
        }
    }
}

