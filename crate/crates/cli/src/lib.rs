//! The `mercurius` command-line pipeline.
//!
//! Every command reads one `.mpp` file and runs
//! parse → inline invocations → well-formedness → refine, followed by the
//! command's own stage.  [`run`] returns the rendered report and the exit
//! code: `0` when everything is fine, `1` for violations, unproven guards,
//! simulation errors and analysis errors, `2` for usage errors and
//! unreadable input.
//!
//! JSON reports share one top-level shape:
//!
//! ```text
//! { "protocol": "<input DSL>", "refined": "<refined DSL>" | null,
//!   "guards": [ { "assertion", "status", "provenance", … } ],
//!   "projections": { "party": { P: spec }, "endpoint": { P: { c: spec } } },
//!   "simReports": [ { "outcome", "trace": [ … ], … } ],
//!   …command-specific keys… }
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use mercurius_ast::{
    ord_decompose, Assertion, Channel, Event, GlobalProtocol, OrdKind, Party, ProtocolFile,
};
use mercurius_graph::ProtocolGraph;
use mercurius_modular::{check_recursion, check_usages, derive_presync, instantiate, Library};
use mercurius_orderings::{assumptions_of, Fact, Rule};
use mercurius_parser::{parse, parse_assertion, parse_sync, serialize};
use mercurius_project::{project_all, project_endpoint, project_party};
use mercurius_refine::{check_race_freedom, refine_protocol, GuardReport, Witness};
use mercurius_sim::{synthesize_programs, Bounds, SimReport, Simulation};
use mercurius_wellformed::check_wf;
use serde_json::{json, Value};

/// Environment variable holding default simulation bounds.
pub const BOUNDS_ENV: &str = "MERCURIUS_BOUNDS";

/// Output format.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Text,
    Json,
}

/// What to do with the protocol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    /// Print the refined protocol.
    Refine,
    /// Print party projections, one endpoint, or everything.
    Project { party: Option<Party>, channel: Option<Channel>, all: bool },
    CheckWf,
    CheckRace,
    /// Print the transmission graph and its adjacent/linked pairs.
    CheckGraph { dot: bool },
    /// Pre-context conditions, usage checks and recursion checks.
    CheckModular { def: Option<String>, usage: Option<String> },
    /// Explore party programs (synthesised from the projections when
    /// `synthesize` is set).
    Simulate { synthesize: bool },
    /// Print a derivation for an ordering fact such as `A^1 <HB C^3` or
    /// a transmission-level guard such as `1 <HB 3`.
    Explain { fact: String },
}

/// A parsed invocation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub command: Command,
    /// Synchronisation edges given on the command line, added to those
    /// declared in the file.
    pub sync: Vec<(Event, Event)>,
    pub bounds: Bounds,
    pub format: Format,
}

/// Parses `--sync` arguments.
pub fn parse_syncs(args: &[String]) -> Result<Vec<(Event, Event)>, String> {
    args.iter().map(|s| parse_sync(s).map_err(|e| format!("invalid --sync `{s}`: {e}"))).collect()
}

/// Resolves simulation bounds: the flag wins over [`BOUNDS_ENV`], which wins
/// over the defaults.  Step and state bounds must be positive.
pub fn resolve_bounds(flag: Option<&str>, env: Option<&str>) -> Result<Bounds, String> {
    let mut b = Bounds::default();
    for text in [env, flag].into_iter().flatten() {
        let parsed: Bounds = text.parse().map_err(|e| format!("{e}"))?;
        for item in text.split(',').filter_map(|i| i.split_once('=')) {
            match item.0.trim() {
                "steps" => b.max_steps = parsed.max_steps,
                "states" => b.max_states = parsed.max_states,
                "unroll" => b.unroll = parsed.unroll,
                _ => {}
            }
        }
    }
    if b.max_steps == 0 || b.max_states == 0 {
        return Err("bounds must be positive".into());
    }
    Ok(b)
}

/// A finished run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunResult {
    pub code: i32,
    pub output: String,
}

impl RunResult {
    fn usage(msg: String) -> Self {
        RunResult { code: 2, output: format!("error: {msg}\n") }
    }

    fn error(msg: String, format: Format) -> Self {
        let output = match format {
            Format::Text => format!("error: {msg}\n"),
            Format::Json => format!("{:#}\n", json!({ "error": msg })),
        };
        RunResult { code: 1, output }
    }
}

struct Loaded {
    file: ProtocolFile,
    lib: Library,
    protocol: GlobalProtocol,
    refined: GlobalProtocol,
    sync: Vec<(Event, Event)>,
}

/// Executes one command.  Never panics on bad input; diagnostics end up in
/// the output.
pub fn run(cfg: &RunConfig) -> RunResult {
    let text = match std::fs::read_to_string(&cfg.input) {
        Ok(t) => t,
        Err(e) => return RunResult::usage(format!("cannot read {}: {e}", cfg.input.display())),
    };
    run_text(&text, cfg)
}

/// [`run`] on file contents already in memory.
pub fn run_text(text: &str, cfg: &RunConfig) -> RunResult {
    let loaded = match load(text, cfg) {
        Ok(l) => l,
        Err(e) => return RunResult::error(e, cfg.format),
    };
    let wf = check_wf(&loaded.protocol);
    if !wf.ok || cfg.command == Command::CheckWf {
        return wf_report(&loaded, &wf, cfg.format);
    }
    let mut report = Report::new(&loaded);
    let code = match stage(&loaded, cfg, &mut report) {
        Ok(code) => code,
        Err(e) => return RunResult::error(e, cfg.format),
    };
    RunResult { code, output: report.render(cfg.format) }
}

fn load(text: &str, cfg: &RunConfig) -> Result<Loaded, String> {
    let file = parse(text).map_err(|e| format!("{}: {e}", cfg.input.display()))?;
    let lib = Library::from_file(&file).map_err(|e| e.to_string())?;
    let main = file.main_def().ok_or("no main protocol")?;
    let protocol = instantiate(&lib, &main.name, &main.parties, &main.channels, &[], cfg.bounds.unroll)
        .map_err(|e| e.to_string())?;
    let refined = refine_protocol(&protocol);
    let mut sync = file.syncs.clone();
    sync.extend(cfg.sync.iter().cloned());
    Ok(Loaded { file, lib, protocol, refined, sync })
}

fn dsl(g: &GlobalProtocol) -> String {
    format!("{g};")
}

/// The report under construction: the shared JSON keys, command-specific
/// extras and the text rendering.
struct Report {
    json: serde_json::Map<String, Value>,
    text: String,
}

impl Report {
    fn new(l: &Loaded) -> Self {
        let mut json = serde_json::Map::new();
        json.insert("protocol".into(), json!(dsl(&l.protocol)));
        json.insert("refined".into(), Value::Null);
        json.insert("guards".into(), json!([]));
        json.insert("projections".into(), json!({ "party": {}, "endpoint": {} }));
        json.insert("simReports".into(), json!([]));
        Report { json, text: String::new() }
    }

    fn set(&mut self, key: &str, v: Value) {
        self.json.insert(key.into(), v);
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.text.clone(),
            Format::Json => format!("{:#}\n", Value::Object(self.json.clone())),
        }
    }
}

fn wf_report(l: &Loaded, wf: &mercurius_wellformed::WfReport, format: Format) -> RunResult {
    let mut r = Report::new(l);
    r.set(
        "wellformed",
        json!({
            "ok": wf.ok,
            "violations": wf.violations.iter().map(|v| json!({
                "rule": v.rule.to_string(), "location": v.location, "detail": v.detail,
            })).collect::<Vec<_>>(),
            "treeShareRequired": wf.tree_share_required,
        }),
    );
    if wf.ok {
        r.line("well-formed");
    } else {
        r.line(format!("not well-formed: {} violation(s)", wf.violations.len()));
        for v in &wf.violations {
            r.line(format!("  {v}"));
        }
    }
    for loc in &wf.tree_share_required {
        r.line(format!("  choice with a silent branch at {loc} (tree shares required)"));
    }
    RunResult { code: if wf.ok { 0 } else { 1 }, output: r.render(format) }
}

fn stage(l: &Loaded, cfg: &RunConfig, r: &mut Report) -> Result<i32, String> {
    r.set("refined", json!(dsl(&l.refined)));
    match &cfg.command {
        Command::CheckWf => unreachable!("handled before refinement"),
        Command::Refine => {
            let mut out = ProtocolFile::from_protocol(l.refined.clone());
            out.syncs = l.file.syncs.clone();
            out.programs = l.file.programs.clone();
            r.line(serialize(&out).trim_end());
            Ok(0)
        }
        Command::Project { party, channel, all } => project(l, party.as_ref(), channel.as_ref(), *all, r),
        Command::CheckRace => {
            let report = check_race_freedom(&l.refined, &l.sync).map_err(|e| e.to_string())?;
            guards(&report, r);
            Ok(if report.race_free() { 0 } else { 1 })
        }
        Command::CheckGraph { dot } => {
            let graph = ProtocolGraph::new(&l.protocol);
            let pairs = |s: std::collections::BTreeSet<_>| {
                s.into_iter().map(|(a, b)| format!("{a}->{b}")).collect::<Vec<_>>()
            };
            let (edges, adjacent, linked) =
                (pairs(graph.edges()), pairs(graph.adjacent_pairs()), pairs(graph.linked_pairs()));
            r.set("graph", json!({ "edges": edges, "adjacent": adjacent, "linked": linked, "dot": graph.to_dot() }));
            if *dot {
                r.line(graph.to_dot().trim_end());
            } else {
                r.line(format!("edges:    {}", edges.join(" ")));
                r.line(format!("adjacent: {}", adjacent.join(" ")));
                r.line(format!("linked:   {}", linked.join(" ")));
            }
            Ok(0)
        }
        Command::CheckModular { def, usage } => modular(l, def.as_deref(), usage.as_deref(), r),
        Command::Simulate { synthesize } => simulate(l, *synthesize, &cfg.bounds, r),
        Command::Explain { fact } => explain(l, fact, r),
    }
}

fn project(
    l: &Loaded,
    party: Option<&Party>,
    channel: Option<&Channel>,
    all: bool,
    r: &mut Report,
) -> Result<i32, String> {
    let parties = match party {
        Some(p) => vec![p.clone()],
        None => l.refined.parties(),
    };
    let mut party_json = serde_json::Map::new();
    let mut endpoint_json = serde_json::Map::new();
    for p in &parties {
        let local = project_party(&l.refined, p).map_err(|e| e.to_string())?;
        party_json.insert(p.to_string(), json!(local.body.to_string()));
        let chans: Vec<Channel> = match channel {
            Some(c) => vec![c.clone()],
            None => local.channels().into_iter().collect(),
        };
        let mut eps = serde_json::Map::new();
        for c in &chans {
            let ep = project_endpoint(&local, c);
            eps.insert(c.to_string(), json!(ep.body.to_string()));
            if channel.is_some() || all {
                r.line(format!("{p}#{c}: {}", ep.body));
            }
        }
        endpoint_json.insert(p.to_string(), Value::Object(eps));
        if channel.is_none() {
            r.line(format!("{p}: {}", local.body));
        }
    }
    r.set("projections", json!({ "party": party_json, "endpoint": endpoint_json }));
    if all {
        let shared = project_all(&l.refined).body.to_string();
        r.line(format!("shared: {shared}"));
        r.set("shared", json!(shared));
    }
    Ok(0)
}

fn guards(report: &GuardReport, r: &mut Report) {
    let mut entries = Vec::new();
    for e in &report.entries {
        let share = if e.share.is_full() { String::new() } else { format!(" @{}", e.share) };
        r.line(format!("{}{share}  {}  (from guard({}))", e.guard, e.status, e.source));
        let witness = match &e.witness {
            Witness::Derivation(d) => {
                json!({ "derivation": d.to_string(), "rules": d.rules().iter().map(|x| x.to_string()).collect::<Vec<_>>() })
            }
            Witness::Holds => json!("holds"),
            Witness::Missing(m) => {
                json!({ "missing": m.iter().map(|(a, b)| format!("{a} <HB {b}")).collect::<Vec<_>>() })
            }
        };
        entries.push(json!({
            "assertion": e.guard.to_string(),
            "status": e.status.to_string(),
            "provenance": format!("guard({})", e.source),
            "share": e.share.to_string(),
            "witness": witness,
        }));
    }
    let pending = report.needs_sync().len();
    if pending == 0 {
        r.line("race free");
    } else {
        r.line(format!("{pending} guard component(s) need synchronisation"));
    }
    r.set("guards", Value::Array(entries));
    r.set("raceFree", json!(pending == 0));
}

fn modular(l: &Loaded, def: Option<&str>, usage: Option<&str>, r: &mut Report) -> Result<i32, String> {
    let err = |e: mercurius_modular::ModularError| e.to_string();
    let mut code = 0;
    let names: Vec<String> = l.lib.defs().map(|d| d.name.clone()).collect();
    let (conds, users): (Vec<String>, Vec<String>) = match (def, usage) {
        (None, None) => (names.clone(), names.clone()),
        (d, u) => (d.map(str::to_string).into_iter().collect(), u.map(str::to_string).into_iter().collect()),
    };
    let mut cond_json = serde_json::Map::new();
    for name in &conds {
        let c = derive_presync(&l.lib, name).map_err(err)?;
        r.line(format!("presync({name}) = {c}"));
        cond_json.insert(name.clone(), json!(c.to_string()));
    }
    let mut usage_json = Vec::new();
    for name in &users {
        for u in check_usages(&l.lib, name).map_err(err)? {
            let verdict = if u.holds { "holds" } else { "FAILS" };
            r.line(format!("{name}: {} {verdict}", u.site.invoke));
            if !u.holds {
                code = 1;
            }
            usage_json.push(json!({ "in": name, "invoke": u.site.invoke.to_string(), "holds": u.holds }));
        }
    }
    let mut rec_json = serde_json::Map::new();
    for name in &users {
        let recursive = check_usages(&l.lib, name).map_err(err)?.iter().any(|u| &u.site.invoke.name == name);
        if recursive {
            let ok = check_recursion(&l.lib, name).map_err(err)?;
            r.line(format!("recursion({name}) = {ok}"));
            code = code.max(if ok { 0 } else { 1 });
            rec_json.insert(name.clone(), json!(ok));
        }
    }
    r.set("modular", json!({ "conditions": cond_json, "usages": usage_json, "recursion": rec_json }));
    Ok(code)
}

/// A simulation report in JSON form.
pub fn sim_json(s: &SimReport) -> Value {
    json!({
        "outcome": s.outcome.to_string(),
        "detail": s.detail,
        "statesExplored": s.states_explored,
        "completeTraces": s.complete_traces,
        "trace": s.trace.iter().map(|t| json!({
            "thread": t.thread, "choice": t.choice, "action": t.action,
        })).collect::<Vec<_>>(),
    })
}

fn simulate(l: &Loaded, synthesize: bool, bounds: &Bounds, r: &mut Report) -> Result<i32, String> {
    let programs = if synthesize {
        synthesize_programs(&l.refined).map_err(|e| e.to_string())?
    } else if l.file.programs.is_empty() && !l.refined.parties().is_empty() {
        return Err("the file has no `impl` blocks (use --synthesize)".into());
    } else {
        l.file.programs.clone()
    };
    let sim = Simulation::new(&l.refined, &programs).map_err(|e| e.to_string())?;
    let report = sim.explore(bounds);
    r.line(format!(
        "{} after {} state(s), {} complete run(s)",
        report.outcome, report.states_explored, report.complete_traces
    ));
    if !report.detail.is_empty() {
        r.line(format!("  {}", report.detail));
    }
    for (i, step) in report.trace.iter().enumerate() {
        r.line(format!("  {:>3}. {step}", i + 1));
    }
    r.set("simReports", json!([sim_json(&report)]));
    Ok(if report.outcome == mercurius_sim::Outcome::Safe { 0 } else { 1 })
}

fn explain(l: &Loaded, fact: &str, r: &mut Report) -> Result<i32, String> {
    let assertion = parse_assertion(fact).map_err(|e| format!("invalid fact `{fact}`: {e}"))?;
    let decomposed = ord_decompose(&assertion, &l.refined).map_err(|e| e.to_string())?;
    let mut store = assumptions_of(&l.refined).closure().map_err(|e| e.to_string())?;
    for (a, b) in &l.sync {
        store = store.add_sync(a.clone(), b.clone()).map_err(|e| e.to_string())?;
    }
    let mut code = 0;
    let mut out = Vec::new();
    for c in decomposed.conjuncts() {
        let Assertion::Ord(o) = c else {
            return Err(format!("`{c}` is not an ordering between events"));
        };
        let found = [o.kind, OrdKind::HB]
            .into_iter()
            .find_map(|k| store.explain(&Fact::new(k, o.from.clone(), o.to.clone())));
        match found {
            Some(d) => {
                r.line(format!("{c}: entailed"));
                r.text.push_str(&indent(&d.to_string()));
                let rules: Vec<String> =
                    d.rules().iter().filter(|x| **x != Rule::Given).map(|x| x.to_string()).collect();
                r.line(format!("  rules: {}", rules.join(", ")));
                out.push(json!({ "fact": c.to_string(), "entailed": true, "derivation": d.to_string(), "rules": rules }));
            }
            None => {
                code = 1;
                r.line(format!("{c}: not entailed"));
                out.push(json!({ "fact": c.to_string(), "entailed": false }));
            }
        }
    }
    r.set("explanations", Value::Array(out));
    Ok(code)
}

fn indent(s: &str) -> String {
    let mut out = String::new();
    for line in s.lines() {
        let _ = writeln!(out, "  {line}");
    }
    out
}
