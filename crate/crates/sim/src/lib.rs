//! Bounded exhaustive-interleaving simulation of party programs.
//!
//! Party programs (`impl P { … }`) run against FIFO channel queues and
//! `notifyAll`/`wait` events.  Every send and receive advances the cursor
//! of the acting party's endpoint specification for that channel, so the
//! simulator doubles as a dynamic oracle:
//!
//! * **ProtErr** — an action the endpoint does not allow at this point (or
//!   whose event guards do not hold yet), a `match` without an applicable
//!   arm, or a party that terminates with an unfinished endpoint;
//! * **RaceErr** — a receive dequeues a message other than the one its
//!   endpoint expects, or an event occurs after an event it must precede
//!   according to a race-freedom guard of the refined protocol;
//! * **ResErr** — a received value is forwarded twice;
//! * **LeakErr** — a channel is closed with messages still queued;
//! * **DeadlockErr** — no thread can move although some have not finished.
//!
//! [`Simulation::explore`] enumerates schedules depth first over hashed
//! machine states and returns the first error with its schedule, or `Safe`
//! when the state space was exhausted within the bounds.  A `par` block is
//! joined as soon as both threads finish; the join is not a scheduling
//! step.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use mercurius_ast::{
    ord_decompose, Assertion, AstError, Channel, Event, Expr, GlobalProtocol, Label, Msg, Party,
    PartyProgram, Pattern, Stmt, Value,
};
use mercurius_par::Mode;
use mercurius_project::{
    project_endpoints, project_party, Dir, EndpointAction, LocalAction, ProjectError, Spec,
};
use mercurius_refine::{check_race_freedom, guards_of, RefineError};
use thiserror::Error;

/// Errors raised while setting up a simulation.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("no program given for party {0}")]
    MissingProgram(Party),
    #[error("program for {0}, which takes no part in the protocol")]
    UnknownParty(Party),
    #[error("cannot synthesise a program for {party}: {reason}")]
    NotImplementable { party: Party, reason: String },
    #[error("invalid bounds `{0}`: expected comma-separated key=value with keys steps, states, unroll")]
    Bounds(String),
    /// The static checker declared the protocol race free but a run
    /// violated it.
    #[error("soundness violation: statically race free, but simulation reports {outcome}: {detail}")]
    SoundnessViolation { outcome: Outcome, detail: String },
    #[error(transparent)]
    Project(#[from] ProjectError),
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error(transparent)]
    Ast(#[from] AstError),
}

/// Exploration limits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bounds {
    /// Maximal schedule length.
    pub max_steps: usize,
    /// Maximal number of distinct states visited.
    pub max_states: usize,
    /// Unrolling depth for recursive protocol definitions.
    pub unroll: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { max_steps: 2000, max_states: 200_000, unroll: 2 }
    }
}

impl FromStr for Bounds {
    type Err = SimError;

    /// Parses `steps=2000,states=100000,unroll=2`; omitted keys keep their
    /// defaults.
    fn from_str(s: &str) -> Result<Self, SimError> {
        let mut b = Bounds::default();
        for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let bad = || SimError::Bounds(s.to_string());
            let (k, v) = item.split_once('=').ok_or_else(bad)?;
            let v: usize = v.trim().parse().map_err(|_| bad())?;
            match k.trim() {
                "steps" => b.max_steps = v,
                "states" => b.max_states = v,
                "unroll" => b.unroll = v,
                _ => return Err(bad()),
            }
        }
        Ok(b)
    }
}

/// The verdict of an exploration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Safe,
    RaceErr,
    ProtErr,
    ResErr,
    LeakErr,
    DeadlockErr,
    /// The bounds were hit before the state space was exhausted.
    BoundExceeded,
}

impl Outcome {
    pub fn is_error(self) -> bool {
        !matches!(self, Outcome::Safe | Outcome::BoundExceeded)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Safe => "Safe",
            Outcome::RaceErr => "RaceErr",
            Outcome::ProtErr => "ProtErr",
            Outcome::ResErr => "ResErr",
            Outcome::LeakErr => "LeakErr",
            Outcome::DeadlockErr => "DeadlockErr",
            Outcome::BoundExceeded => "BoundExceeded",
        })
    }
}

/// One scheduling step: the thread that moved, which of its alternatives
/// it took (internal choices have several) and a rendering of the action.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TraceStep {
    /// `P` for the main thread of party `P`, `P.0.1` for nested `par`
    /// threads.
    pub thread: String,
    pub choice: usize,
    pub action: String,
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.thread, self.action)
    }
}

/// Result of [`Simulation::explore`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimReport {
    pub outcome: Outcome,
    /// The schedule leading to the error (empty for `Safe`).
    pub trace: Vec<TraceStep>,
    pub detail: String,
    /// Distinct machine states visited.
    pub states_explored: usize,
    /// Distinct final states reached.
    pub complete_traces: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Binding {
    value: Value,
    sent: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Thread {
    /// Remaining statements, next one last.
    code: Vec<Stmt>,
    store: BTreeMap<String, Binding>,
}

impl Thread {
    fn new(body: &[Stmt], store: BTreeMap<String, Binding>) -> Self {
        Thread { code: body.iter().rev().cloned().collect(), store }
    }

    fn done(&self) -> bool {
        self.code.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Proc {
    Run(Thread),
    /// Two forked threads and the continuation run after both finish.
    Fork(Box<Proc>, Box<Proc>, Thread),
}

impl Proc {
    fn done(&self) -> bool {
        matches!(self, Proc::Run(t) if t.done())
    }

    /// Joins finished forks bottom-up.
    fn normalize(self) -> Proc {
        match self {
            Proc::Fork(a, b, mut cont) => {
                let (a, b) = (a.normalize(), b.normalize());
                match (a, b) {
                    (Proc::Run(x), Proc::Run(y)) if x.done() && y.done() => {
                        for (k, v) in x.store.into_iter().chain(y.store) {
                            let e = cont.store.entry(k).or_insert_with(|| v.clone());
                            e.value = v.value;
                            e.sent |= v.sent;
                        }
                        Proc::Run(cont)
                    }
                    (a, b) => Proc::Fork(Box::new(a), Box::new(b), cont),
                }
            }
            run => run,
        }
    }

    fn leaves<'a>(&'a self, path: &mut Vec<u8>, out: &mut Vec<(Vec<u8>, &'a Thread)>) {
        match self {
            Proc::Run(t) => out.push((path.clone(), t)),
            Proc::Fork(a, b, _) => {
                for (i, p) in [a, b].into_iter().enumerate() {
                    path.push(i as u8);
                    p.leaves(path, out);
                    path.pop();
                }
            }
        }
    }

    fn replace(&self, path: &[u8], new: Proc) -> Proc {
        match (self, path.split_first()) {
            (_, None) => new,
            (Proc::Fork(a, b, c), Some((&i, rest))) => {
                if i == 0 {
                    Proc::Fork(Box::new(a.replace(rest, new)), b.clone(), c.clone())
                } else {
                    Proc::Fork(a.clone(), Box::new(b.replace(rest, new)), c.clone())
                }
            }
            (Proc::Run(_), Some(_)) => unreachable!("thread paths address forks"),
        }
    }
}

type Cursor = Spec<EndpointAction>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct State {
    procs: BTreeMap<Party, Proc>,
    queues: BTreeMap<Channel, VecDeque<(Value, Label)>>,
    occurred: BTreeSet<Event>,
    fired: BTreeSet<String>,
    cursors: BTreeMap<(Party, Channel), Cursor>,
}

enum Step {
    Next(State, String),
    Fail(Outcome, String, String),
}

/// A prepared simulation: programs, endpoint cursors and the event pairs
/// that the race-freedom guards of the protocol order.
#[derive(Clone, Debug)]
pub struct Simulation {
    init: State,
    /// `(x, y)`: `x` must not occur after `y`.
    ordered: Vec<(Event, Event)>,
}

fn msg_matches(m: &Msg, v: &Value) -> bool {
    m.tag == v.tag && m.interval.is_none_or(|iv| iv.contains(v.num))
}

impl Simulation {
    /// Prepares the simulation of `programs` against the refined protocol
    /// `refined`.  Every party of the protocol needs a program.
    pub fn new(refined: &GlobalProtocol, programs: &[PartyProgram]) -> Result<Self, SimError> {
        let parties: BTreeSet<Party> = refined.parties().into_iter().collect();
        for p in programs {
            if !parties.contains(&p.party) {
                return Err(SimError::UnknownParty(p.party.clone()));
            }
        }
        let mut procs = BTreeMap::new();
        for party in &parties {
            let prog = programs
                .iter()
                .find(|p| &p.party == party)
                .ok_or_else(|| SimError::MissingProgram(party.clone()))?;
            procs.insert(party.clone(), Proc::Run(Thread::new(&prog.body, BTreeMap::new())));
        }
        let mut cursors = BTreeMap::new();
        for (party, eps) in project_endpoints(refined)? {
            for (chan, ep) in eps {
                cursors.insert((party.clone(), chan), ep.body);
            }
        }
        let queues = refined.channels().into_iter().map(|c| (c, VecDeque::new())).collect();
        let mut ordered = Vec::new();
        for g in guards_of(refined) {
            for c in ord_decompose(&g, refined)?.conjuncts() {
                if let Assertion::Ord(o) = c {
                    ordered.push((o.from.clone(), o.to.clone()));
                }
            }
        }
        ordered.sort();
        ordered.dedup();
        let init = State {
            procs,
            queues,
            occurred: BTreeSet::new(),
            fired: BTreeSet::new(),
            cursors,
        };
        Ok(Simulation { init, ordered })
    }

    fn record(&self, st: &mut State, e: Event) -> Result<(), String> {
        for (x, y) in &self.ordered {
            if *x == e && st.occurred.contains(y) {
                return Err(format!("{x} occurred after {y}, which it must happen before"));
            }
        }
        st.occurred.insert(e);
        Ok(())
    }

    /// All moves from `st`.
    fn successors(&self, st: &State) -> Vec<(String, Step)> {
        let mut out = Vec::new();
        for (party, proc) in &st.procs {
            let mut leaves = Vec::new();
            proc.leaves(&mut Vec::new(), &mut leaves);
            for (path, thread) in leaves {
                let Some(stmt) = thread.code.last() else { continue };
                let id = std::iter::once(party.to_string())
                    .chain(path.iter().map(|i| i.to_string()))
                    .collect::<Vec<_>>()
                    .join(".");
                for step in self.exec(st, party, &path, thread, stmt) {
                    out.push((id.clone(), step));
                }
            }
        }
        out
    }

    fn exec(&self, st: &State, party: &Party, path: &[u8], thread: &Thread, stmt: &Stmt) -> Vec<Step> {
        let mut rest = thread.clone();
        rest.code.pop();
        // The state after replacing this thread by `t` (or by a fork).
        let with = |proc: Proc| {
            let mut s = st.clone();
            let p = s.procs[party].replace(path, proc).normalize();
            s.procs.insert(party.clone(), p);
            s
        };
        let fail = |o: Outcome, action: String, d: String| vec![Step::Fail(o, action, d)];
        let sat = |a: &Assertion| match a {
            Assertion::Occ(e) => st.occurred.contains(e),
            _ => true,
        };
        match stmt {
            Stmt::Skip => vec![Step::Next(with(Proc::Run(rest)), "skip".into())],
            Stmt::NotifyAll(e) => {
                let mut s = with(Proc::Run(rest));
                s.fired.insert(e.clone());
                vec![Step::Next(s, format!("notifyAll {e}"))]
            }
            Stmt::Wait(e) => {
                if st.fired.contains(e) {
                    vec![Step::Next(with(Proc::Run(rest)), format!("wait {e}"))]
                } else {
                    vec![]
                }
            }
            Stmt::Open { chan, .. } => {
                let mut s = with(Proc::Run(rest));
                s.queues.entry(chan.clone()).or_default();
                vec![Step::Next(s, format!("open {chan}"))]
            }
            Stmt::Close { chan } => {
                let action = format!("close {chan}");
                match st.queues.get(chan) {
                    None => fail(Outcome::ProtErr, action, format!("{chan} is already closed")),
                    Some(q) if !q.is_empty() => {
                        fail(Outcome::LeakErr, action, format!("{chan} closed with {} queued message(s)", q.len()))
                    }
                    Some(_) => {
                        let mut s = with(Proc::Run(rest));
                        s.queues.remove(chan);
                        vec![Step::Next(s, action)]
                    }
                }
            }
            Stmt::Par(a, b) => {
                let fork = Proc::Fork(
                    Box::new(Proc::Run(Thread::new(a, rest.store.clone()))),
                    Box::new(Proc::Run(Thread::new(b, rest.store.clone()))),
                    rest,
                );
                vec![Step::Next(with(fork), "fork".into())]
            }
            Stmt::Choose(branches) => branches
                .iter()
                .enumerate()
                .map(|(i, body)| {
                    let mut t = rest.clone();
                    t.code.extend(body.iter().rev().cloned());
                    Step::Next(with(Proc::Run(t)), format!("choose branch {}", i + 1))
                })
                .collect(),
            Stmt::Match { var, arms } => {
                let action = format!("match {var}");
                let Some(b) = thread.store.get(var) else {
                    return fail(Outcome::ProtErr, action, format!("{var} is unbound"));
                };
                match arms.iter().find(|(p, _): &&(Pattern, Vec<Stmt>)| p.matches(&b.value)) {
                    Some((p, body)) => {
                        let mut t = rest;
                        t.code.extend(body.iter().rev().cloned());
                        vec![Step::Next(with(Proc::Run(t)), format!("match {var} => {}", p.tag))]
                    }
                    None => fail(Outcome::ProtErr, action, format!("no arm of `match {var}` accepts {}", b.value)),
                }
            }
            Stmt::Send { chan, expr } => {
                let value = match expr {
                    Expr::Lit(v) => v.clone(),
                    Expr::Var(x) => match rest.store.get_mut(x) {
                        None => return fail(Outcome::ProtErr, format!("send {chan} {x}"), format!("{x} is unbound")),
                        Some(b) if b.sent => {
                            return fail(
                                Outcome::ResErr,
                                format!("send {chan} {x}"),
                                format!("{x} = {} was already sent", b.value),
                            )
                        }
                        Some(b) => {
                            b.sent = true;
                            b.value.clone()
                        }
                    },
                };
                let action = format!("send {chan} {value}");
                if !st.queues.contains_key(chan) {
                    return fail(Outcome::ProtErr, action, format!("{chan} is closed"));
                }
                let Some(cursor) = st.cursors.get(&(party.clone(), chan.clone())) else {
                    return fail(Outcome::ProtErr, action, format!("{party} has no role on {chan}"));
                };
                let matching = |sat: &dyn Fn(&Assertion) -> bool| -> Vec<(EndpointAction, Cursor)> {
                    cursor
                        .step(sat)
                        .into_iter()
                        .filter(|(a, _)| a.dir == Dir::Send && msg_matches(&a.msg, &value))
                        .collect()
                };
                let moves = matching(&sat);
                if moves.is_empty() {
                    let detail = if matching(&|_| true).is_empty() {
                        format!("the endpoint of {party} on {chan} does not allow sending {value} now (expects {cursor})")
                    } else {
                        format!("{party} sends {value} on {chan} before its earlier events (expects {cursor})")
                    };
                    return fail(Outcome::ProtErr, action, detail);
                }
                moves
                    .into_iter()
                    .map(|(a, residual)| {
                        let mut s = with(Proc::Run(rest.clone()));
                        s.cursors.insert((party.clone(), chan.clone()), residual);
                        s.queues.get_mut(chan).expect("open").push_back((value.clone(), a.label.clone()));
                        let act = format!("{action} @{}", a.label);
                        match self.record(&mut s, Event::new(party.clone(), a.label)) {
                            Ok(()) => Step::Next(s, act),
                            Err(d) => Step::Fail(Outcome::RaceErr, act, d),
                        }
                    })
                    .collect()
            }
            Stmt::Recv { chan, var } => {
                let action = format!("recv {chan} {var}");
                let Some(queue) = st.queues.get(chan) else {
                    return fail(Outcome::ProtErr, action, format!("{chan} is closed"));
                };
                let Some((value, sent_as)) = queue.front().cloned() else { return vec![] };
                let Some(cursor) = st.cursors.get(&(party.clone(), chan.clone())) else {
                    return fail(Outcome::ProtErr, action, format!("{party} has no role on {chan}"));
                };
                let recvs: Vec<(EndpointAction, Cursor)> =
                    cursor.step(&sat).into_iter().filter(|(a, _)| a.dir == Dir::Recv).collect();
                let action = format!("{action} = {value}");
                let Some((a, residual)) = recvs.iter().find(|(a, _)| a.label == sent_as).cloned() else {
                    if !recvs.is_empty() {
                        let expected: Vec<String> =
                            recvs.iter().map(|(a, _)| format!("{}@{}", a.msg, a.label)).collect();
                        return fail(
                            Outcome::RaceErr,
                            action,
                            format!(
                                "{party} expected {} on {chan} but dequeued {value} sent as {sent_as}",
                                expected.join(" or ")
                            ),
                        );
                    }
                    let any = cursor.step(&|_| true).into_iter().any(|(a, _)| a.dir == Dir::Recv);
                    let detail = if any {
                        format!("{party} receives on {chan} before its earlier events (expects {cursor})")
                    } else {
                        format!("the endpoint of {party} on {chan} does not allow a receive now (expects {cursor})")
                    };
                    return fail(Outcome::ProtErr, action, detail);
                };
                let mut t = rest;
                t.store.insert(var.clone(), Binding { value, sent: false });
                let mut s = with(Proc::Run(t));
                s.queues.get_mut(chan).expect("open").pop_front();
                s.cursors.insert((party.clone(), chan.clone()), residual);
                let act = format!("{action} @{}", a.label);
                match self.record(&mut s, Event::new(party.clone(), a.label)) {
                    Ok(()) => vec![Step::Next(s, act)],
                    Err(d) => vec![Step::Fail(Outcome::RaceErr, act, d)],
                }
            }
        }
    }

    /// Classifies a state without successors.
    fn stuck(&self, st: &State) -> (Outcome, String) {
        let sat = |a: &Assertion| match a {
            Assertion::Occ(e) => st.occurred.contains(e),
            _ => true,
        };
        for (party, proc) in &st.procs {
            if !proc.done() {
                continue;
            }
            for ((p, c), cursor) in &st.cursors {
                if p == party && !cursor.passable(&sat) {
                    return (
                        Outcome::ProtErr,
                        format!("{party} terminated with an unfinished endpoint on {c}: {cursor}"),
                    );
                }
            }
        }
        if st.procs.values().all(Proc::done) {
            return (Outcome::Safe, String::new());
        }
        let mut waiting = Vec::new();
        for (party, proc) in &st.procs {
            let mut leaves = Vec::new();
            proc.leaves(&mut Vec::new(), &mut leaves);
            for (_, t) in leaves {
                match t.code.last() {
                    Some(Stmt::Wait(e)) => waiting.push(format!("{party} waits for {e}")),
                    Some(Stmt::Recv { chan, .. }) => waiting.push(format!("{party} receives on empty {chan}")),
                    _ => {}
                }
            }
        }
        (Outcome::DeadlockErr, format!("no thread can move: {}", waiting.join(", ")))
    }

    /// Depth-first exploration of all schedules within `bounds`.
    pub fn explore(&self, bounds: &Bounds) -> SimReport {
        // Trace steps are kept in an arena; each stack entry points to the
        // step that produced it.
        let mut arena: Vec<(Option<usize>, TraceStep)> = Vec::new();
        let trace_of = |arena: &Vec<(Option<usize>, TraceStep)>, mut at: Option<usize>| {
            let mut v = Vec::new();
            while let Some(i) = at {
                v.push(arena[i].1.clone());
                at = arena[i].0;
            }
            v.reverse();
            v
        };
        let mut visited: HashSet<State> = HashSet::new();
        let mut stack = vec![(self.init.clone(), 0usize, None::<usize>)];
        visited.insert(self.init.clone());
        let mut complete = 0;
        let mut truncated = false;
        while let Some((st, depth, at)) = stack.pop() {
            let succ = self.successors(&st);
            if succ.is_empty() {
                let (outcome, detail) = self.stuck(&st);
                if outcome.is_error() {
                    return SimReport {
                        outcome,
                        trace: trace_of(&arena, at),
                        detail,
                        states_explored: visited.len(),
                        complete_traces: complete,
                    };
                }
                complete += 1;
                continue;
            }
            if depth >= bounds.max_steps {
                truncated = true;
                continue;
            }
            // Push in reverse so the first successor is explored first.
            let mut per_thread: BTreeMap<String, usize> = BTreeMap::new();
            let mut next = Vec::new();
            for (thread, step) in succ {
                let k = per_thread.entry(thread.clone()).or_default();
                let choice = *k;
                *k += 1;
                match step {
                    Step::Fail(outcome, action, detail) => {
                        arena.push((at, TraceStep { thread, choice, action }));
                        return SimReport {
                            outcome,
                            trace: trace_of(&arena, Some(arena.len() - 1)),
                            detail,
                            states_explored: visited.len(),
                            complete_traces: complete,
                        };
                    }
                    Step::Next(s, action) => next.push((s, TraceStep { thread, choice, action })),
                }
            }
            for (s, step) in next.into_iter().rev() {
                if visited.len() >= bounds.max_states {
                    truncated = true;
                    break;
                }
                if visited.insert(s.clone()) {
                    arena.push((at, step));
                    stack.push((s, depth + 1, Some(arena.len() - 1)));
                }
            }
        }
        SimReport {
            outcome: if truncated { Outcome::BoundExceeded } else { Outcome::Safe },
            trace: vec![],
            detail: if truncated { "bounds reached before the state space was exhausted".into() } else { String::new() },
            states_explored: visited.len(),
            complete_traces: complete,
        }
    }

    /// Replays a schedule step by step.  Returns the outcome reached when
    /// the schedule ends (`Safe` if the run is complete and correct), or
    /// `None` if the schedule does not fit the programs.
    pub fn replay(&self, schedule: &[TraceStep]) -> Option<(Outcome, String)> {
        let mut st = self.init.clone();
        for step in schedule {
            let succ: Vec<(String, Step)> =
                self.successors(&st).into_iter().filter(|(t, _)| *t == step.thread).collect();
            match succ.into_iter().nth(step.choice)?.1 {
                Step::Fail(o, _, d) => return Some((o, d)),
                Step::Next(s, _) => st = s,
            }
        }
        if self.successors(&st).is_empty() {
            Some(self.stuck(&st))
        } else {
            Some((Outcome::Safe, "schedule ended before the run finished".into()))
        }
    }
}

/// Prepares and explores in one call.
pub fn explore(
    refined: &GlobalProtocol,
    programs: &[PartyProgram],
    bounds: &Bounds,
) -> Result<SimReport, SimError> {
    Ok(Simulation::new(refined, programs)?.explore(bounds))
}

/// Explores independent jobs, in parallel when the `parallel` feature is on.
pub fn explore_many(
    mode: Mode,
    jobs: &[(GlobalProtocol, Vec<PartyProgram>)],
    bounds: &Bounds,
) -> Vec<Result<SimReport, SimError>> {
    mercurius_par::map_in(mode, jobs, |(g, progs)| explore(g, progs, bounds))
}

/// Synthesises one program per party that follows its projection of `g`:
/// sends carry the tag of the message (and the lower end of its range),
/// a choice is an internal `choose` at the party sending its first message
/// and a `recv` followed by a `match` at the party receiving it.
pub fn synthesize_programs(g: &GlobalProtocol) -> Result<Vec<PartyProgram>, SimError> {
    g.parties()
        .into_iter()
        .map(|party| {
            let local = project_party(g, &party)?;
            let body = synth(&local.body, &party)?;
            Ok(PartyProgram { party, body })
        })
        .collect()
}

fn first_actions(s: &Spec<LocalAction>) -> Vec<&LocalAction> {
    s.step(&|_| true)
        .into_iter()
        .filter_map(|(a, _)| s.actions().into_iter().find(|x| **x == a))
        .collect()
}

fn value_of(m: &Msg) -> Value {
    Value { tag: m.tag.clone(), num: m.interval.map_or(0, |iv| iv.lo) }
}

fn var_of(l: &Label) -> String {
    format!("x{}", l.to_string().replace('#', "_"))
}

fn synth(s: &Spec<LocalAction>, party: &Party) -> Result<Vec<Stmt>, SimError> {
    Ok(match s {
        Spec::Emp | Spec::Guard(_) | Spec::Assume(_) => vec![],
        Spec::Act(a) => vec![match a.dir {
            Dir::Send => Stmt::Send { chan: a.chan.clone(), expr: Expr::Lit(value_of(&a.msg)) },
            Dir::Recv => Stmt::Recv { chan: a.chan.clone(), var: var_of(&a.label) },
        }],
        Spec::Seq(x, y) => {
            let mut v = synth(x, party)?;
            v.extend(synth(y, party)?);
            v
        }
        Spec::Par(x, y) => vec![Stmt::Par(synth(x, party)?, synth(y, party)?)],
        Spec::Or(..) => {
            let mut branches = Vec::new();
            fn flatten<'a>(s: &'a Spec<LocalAction>, out: &mut Vec<&'a Spec<LocalAction>>) {
                match s {
                    Spec::Or(x, y) => {
                        flatten(x, out);
                        flatten(y, out);
                    }
                    other => out.push(other),
                }
            }
            flatten(s, &mut branches);
            let heads: Vec<Vec<&LocalAction>> = branches.iter().map(|b| first_actions(b)).collect();
            let unfit = || SimError::NotImplementable {
                party: party.clone(),
                reason: format!("the choice `{s}` does not start with one action per branch"),
            };
            if heads.iter().any(|h| h.len() != 1) {
                return Err(unfit());
            }
            let dirs: BTreeSet<Dir> = heads.iter().map(|h| h[0].dir).collect();
            let chans: BTreeSet<&Channel> = heads.iter().map(|h| &h[0].chan).collect();
            if dirs.len() != 1 || chans.len() != 1 {
                return Err(unfit());
            }
            if dirs.contains(&Dir::Send) {
                vec![Stmt::Choose(branches.iter().map(|b| synth(b, party)).collect::<Result<_, _>>()?)]
            } else {
                let chan = heads[0][0].chan.clone();
                let var = format!("sel{}", var_of(&heads[0][0].label));
                let mut arms = Vec::new();
                for (b, h) in branches.iter().zip(&heads) {
                    // Drop the shared receive from the branch.
                    let rest = b
                        .step(&|_| true)
                        .into_iter()
                        .find(|(a, _)| a == h[0])
                        .map(|(_, r)| r)
                        .ok_or_else(unfit)?;
                    arms.push((
                        Pattern { tag: h[0].msg.tag.clone(), interval: h[0].msg.interval },
                        synth(&rest, party)?,
                    ));
                }
                vec![Stmt::Recv { chan, var: var.clone() }, Stmt::Match { var, arms }]
            }
        }
    })
}

/// The static verdict next to the dynamic one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrossValidation {
    /// Every guard is discharged, implicitly or by the given sync edges.
    pub static_race_free: bool,
    pub report: SimReport,
}

impl CrossValidation {
    /// Whether the simulation found a race on a statically racy protocol.
    pub fn race_witnessed(&self) -> bool {
        !self.static_race_free && self.report.outcome == Outcome::RaceErr
    }
}

/// Compares the static race-freedom verdict with exhaustive simulation.
/// A statically race-free protocol whose simulation reports a race or a
/// protocol error is a [`SimError::SoundnessViolation`].
pub fn cross_validate(
    refined: &GlobalProtocol,
    programs: &[PartyProgram],
    sync: &[(Event, Event)],
    bounds: &Bounds,
) -> Result<CrossValidation, SimError> {
    let static_race_free = check_race_freedom(refined, sync)?.race_free();
    let report = explore(refined, programs, bounds)?;
    if static_race_free && matches!(report.outcome, Outcome::RaceErr | Outcome::ProtErr) {
        return Err(SimError::SoundnessViolation { outcome: report.outcome, detail: report.detail });
    }
    Ok(CrossValidation { static_race_free, report })
}
