//! Random generators shared by the test suites.
//!
//! * [`random_wf_protocol`] builds well-formed global protocols: concurrent
//!   operands use disjoint channel sets, and every choice has a common first
//!   sender, receiver and channel, mutually exclusive first tags and a body
//!   restricted to the two peers.
//! * [`random_file`] builds arbitrary (not necessarily well-formed) files
//!   exercising every syntactic form, for parser round trips.
//! * [`random_store`] and [`random_share`] feed the ordering and tree-share
//!   oracles.
//!
//! Every generator is driven by a seeded [`StdRng`] so failures replay; the
//! `*_strategy` functions wrap them for proptest.

use mercurius_ast::{
    Assertion, Channel, Event, Expr, GlobalProtocol, Interval, Invoke, Label, Msg, OrdKind,
    Ordering, Party, PartyProgram, Pattern, ProtocolDef, ProtocolFile, Stmt, Transmission,
    TreeShare, Value,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

/// Parties used by the well-formed generator.
pub const PARTIES: [&str; 4] = ["A", "B", "C", "D"];
/// Channels used by the well-formed generator.
pub const CHANNELS: [&str; 3] = ["c1", "c2", "c3"];

/// A seeded generator.
pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// A random well-formed protocol with between 1 and `max_tx` transmissions,
/// labelled `1, 2, …` in textual order.
pub fn random_wf_protocol(rng: &mut StdRng, max_tx: usize) -> GlobalProtocol {
    let n = rng.random_range(1..=max_tx.max(1));
    let parties: Vec<Party> = PARTIES.iter().map(|p| Party::new(*p)).collect();
    let chans: Vec<Channel> = CHANNELS.iter().map(|c| Channel::new(*c)).collect();
    let mut next = 0;
    let g = gen_wf(rng, n, &parties, &chans, &mut next);
    debug_assert_eq!(g.transmissions().len(), n);
    g
}

fn fresh(next: &mut u32) -> Label {
    *next += 1;
    Label::of(*next)
}

fn pick<'a, T>(rng: &mut StdRng, v: &'a [T]) -> &'a T {
    &v[rng.random_range(0..v.len())]
}

fn peers(rng: &mut StdRng, parties: &[Party]) -> (Party, Party) {
    let mut ps = parties.to_vec();
    ps.shuffle(rng);
    (ps[0].clone(), ps[1].clone())
}

fn gen_wf(
    rng: &mut StdRng,
    n: usize,
    parties: &[Party],
    chans: &[Channel],
    next: &mut u32,
) -> GlobalProtocol {
    if n == 1 {
        let (s, r) = peers(rng, parties);
        let c = pick(rng, chans).clone();
        let tag = format!("t{}", rng.random_range(1..=3));
        return GlobalProtocol::Trans(Transmission::new(s, r, c, Msg::tag(tag), fresh(next)));
    }
    let k = rng.random_range(1..n);
    match rng.random_range(0..6) {
        0 | 1 if chans.len() >= 2 => {
            // Concurrency over disjoint channel sets.
            let mut cs = chans.to_vec();
            cs.shuffle(rng);
            let cut = rng.random_range(1..cs.len());
            let (left, right) = cs.split_at(cut);
            let a = gen_wf(rng, k, parties, left, next);
            let b = gen_wf(rng, n - k, parties, right, next);
            GlobalProtocol::par(a, b)
        }
        2 => {
            // Choice between two branches opened by the same peers on the
            // same channel with distinct tags.
            let (s, r) = peers(rng, parties);
            let c = pick(rng, chans).clone();
            let pair = [s.clone(), r.clone()];
            let branch = |rng: &mut StdRng, size: usize, tag: &str, next: &mut u32| {
                let first = GlobalProtocol::Trans(Transmission::new(
                    s.clone(),
                    r.clone(),
                    c.clone(),
                    Msg::tag(tag),
                    fresh(next),
                ));
                if size == 1 {
                    first
                } else {
                    GlobalProtocol::seq(first, gen_wf(rng, size - 1, &pair, chans, next))
                }
            };
            let a = branch(rng, k, "Yes", next);
            let b = branch(rng, n - k, "No", next);
            GlobalProtocol::choice(a, b)
        }
        _ => {
            let a = gen_wf(rng, k, parties, chans, next);
            let b = gen_wf(rng, n - k, parties, chans, next);
            GlobalProtocol::seq(a, b)
        }
    }
}

/// Proptest strategy over [`random_wf_protocol`] (seed-driven, no shrinking).
pub fn wf_protocol_strategy(max_tx: usize) -> impl Strategy<Value = GlobalProtocol> {
    any::<u64>().prop_map(move |seed| random_wf_protocol(&mut rng(seed), max_tx))
}

/// A random tree share of at most the given depth, in canonical form.
pub fn random_share(rng: &mut StdRng, depth: u32) -> TreeShare {
    if depth == 0 || rng.random_bool(0.35) {
        TreeShare::Leaf(rng.random_bool(0.5))
    } else {
        TreeShare::node(random_share(rng, depth - 1), random_share(rng, depth - 1))
    }
}

/// Proptest strategy over canonical tree shares of depth ≤ 4.
pub fn share_strategy() -> impl Strategy<Value = TreeShare> {
    any::<u64>().prop_map(|seed| random_share(&mut rng(seed), 4))
}

/// A random ordering store over at most `max_events` events: CB facts relate
/// the two halves of a transmission, HB and WHB facts mostly follow a hidden
/// topological order, and with small probability an HB fact goes backwards
/// (so that some stores are cyclic).
pub fn random_store(rng: &mut StdRng, max_events: usize) -> Vec<Ordering> {
    let n_tx = rng.random_range(1..=(max_events / 2).max(1));
    let mut events = Vec::new();
    let mut facts = Vec::new();
    for i in 1..=n_tx {
        let (s, r) = peers(rng, &PARTIES.iter().map(|p| Party::new(*p)).collect::<Vec<_>>());
        let l = Label::of(i as u32);
        let (se, re) = (Event::new(s, l.clone()), Event::new(r, l));
        if rng.random_bool(0.6) {
            facts.push(Ordering::cb(se.clone(), re.clone()));
        }
        events.push(se);
        events.push(re);
    }
    let mut order = events.clone();
    order.shuffle(rng);
    let m = rng.random_range(0..=2 * events.len());
    for _ in 0..m {
        let i = rng.random_range(0..order.len());
        let j = rng.random_range(0..order.len());
        if i == j {
            continue;
        }
        let (a, b) = if i < j || rng.random_bool(0.03) {
            (order[i].clone(), order[j].clone())
        } else {
            (order[j].clone(), order[i].clone())
        };
        let kind = if rng.random_bool(0.2) { OrdKind::WHB } else { OrdKind::HB };
        facts.push(Ordering::new(kind, a, b));
    }
    facts
}

/// A random file exercising every syntactic form: definitions with
/// parameters and invocations, bare `emp`, assumptions and guards over all
/// assertion forms, share annotations, intervals, sync edges and programs.
/// Labels are unique within each definition.
pub fn random_file(rng: &mut StdRng) -> ProtocolFile {
    let n_defs = rng.random_range(1..=3);
    let mut defs: Vec<ProtocolDef> = Vec::new();
    for d in 0..n_defs {
        let np = rng.random_range(0..=3);
        let nc = rng.random_range(0..=2);
        let mut next = 0;
        let body = gen_any(rng, 3, &defs, &mut next);
        defs.push(ProtocolDef {
            name: format!("P{d}"),
            parties: (0..np).map(|i| Party::new(format!("X{i}"))).collect(),
            channels: (0..nc).map(|i| Channel::new(format!("k{i}"))).collect(),
            body,
        });
    }
    let main = pick(rng, &defs).name.clone();
    let syncs = (0..rng.random_range(0..=2)).map(|_| (random_event(rng), random_event(rng))).collect();
    let programs = (0..rng.random_range(0..=2))
        .map(|i| {
            let mut bound = Vec::new();
            PartyProgram { party: Party::new(PARTIES[i]), body: gen_stmts(rng, 2, &mut bound) }
        })
        .collect();
    ProtocolFile { defs, main, syncs, programs }
}

/// Proptest strategy over [`random_file`].
pub fn file_strategy() -> impl Strategy<Value = ProtocolFile> {
    any::<u64>().prop_map(|seed| random_file(&mut rng(seed)))
}

fn random_label(rng: &mut StdRng) -> Label {
    let len = rng.random_range(1..=3);
    Label::new((0..len).map(|_| rng.random_range(1..=9)).collect())
}

fn random_event(rng: &mut StdRng) -> Event {
    Event::new(Party::new(*pick(rng, &PARTIES)), random_label(rng))
}

fn random_assertion(rng: &mut StdRng, depth: u32) -> Assertion {
    let leaf = depth == 0 || rng.random_bool(0.5);
    match rng.random_range(0..if leaf { 5 } else { 7 }) {
        0 => Assertion::Occ(random_event(rng)),
        1 => Assertion::Not(random_event(rng)),
        2 => {
            let kind = *pick(rng, &[OrdKind::CB, OrdKind::HB, OrdKind::WHB]);
            let mut o = Ordering::new(kind, random_event(rng), random_event(rng));
            if rng.random_bool(0.3) {
                o.share = Some(random_share(rng, 3));
            }
            Assertion::Ord(o)
        }
        3 => Assertion::OrdT {
            kind: *pick(rng, &[OrdKind::CB, OrdKind::HB, OrdKind::WHB]),
            from: random_label(rng),
            to: random_label(rng),
        },
        4 => {
            let (s, r) = peers(rng, &PARTIES.iter().map(|p| Party::new(*p)).collect::<Vec<_>>());
            Assertion::Transmitted { sender: s, receiver: r, label: random_label(rng) }
        }
        5 => Assertion::and(random_assertion(rng, depth - 1), random_assertion(rng, depth - 1)),
        _ => Assertion::Implies(random_event(rng), Box::new(random_assertion(rng, depth - 1))),
    }
}

fn gen_any(rng: &mut StdRng, depth: u32, defs: &[ProtocolDef], next: &mut u32) -> GlobalProtocol {
    let leaf = depth == 0 || rng.random_bool(0.3);
    match rng.random_range(0..if leaf { 5 } else { 8 }) {
        0 => GlobalProtocol::Emp,
        1 => GlobalProtocol::Assume(random_assertion(rng, 2)),
        2 => GlobalProtocol::Guard(random_assertion(rng, 2)),
        3 if !defs.is_empty() => {
            let d = pick(rng, defs);
            *next += 1;
            let label = Label::of(*next);
            GlobalProtocol::Invoke(Invoke {
                name: d.name.clone(),
                parties: (0..d.parties.len()).map(|_| Party::new(*pick(rng, &PARTIES))).collect(),
                channels: (0..d.channels.len())
                    .map(|_| Channel::new(*pick(rng, &CHANNELS)))
                    .collect(),
                label,
            })
        }
        3 | 4 => {
            let (s, r) = peers(rng, &PARTIES.iter().map(|p| Party::new(*p)).collect::<Vec<_>>());
            let mut msg = Msg::tag(*pick(rng, &["Order", "Price", "t1"]));
            if rng.random_bool(0.3) {
                msg.var = "x".into();
            }
            if rng.random_bool(0.3) {
                let lo = rng.random_range(-5..5);
                msg.interval = Some(Interval::new(lo, lo + rng.random_range(0..5)));
            }
            *next += 1;
            // Occasionally use an explicit, out-of-order label.
            let label = if rng.random_bool(0.2) { Label::of(*next + 100) } else { Label::of(*next) };
            GlobalProtocol::Trans(Transmission::new(
                s,
                r,
                Channel::new(*pick(rng, &CHANNELS)),
                msg,
                label,
            ))
        }
        5 => GlobalProtocol::seq(gen_any(rng, depth - 1, defs, next), gen_any(rng, depth - 1, defs, next)),
        6 => GlobalProtocol::par(gen_any(rng, depth - 1, defs, next), gen_any(rng, depth - 1, defs, next)),
        _ => GlobalProtocol::choice(
            gen_any(rng, depth - 1, defs, next),
            gen_any(rng, depth - 1, defs, next),
        ),
    }
}

fn gen_stmts(rng: &mut StdRng, depth: u32, bound: &mut Vec<String>) -> Vec<Stmt> {
    let n = rng.random_range(0..=3);
    (0..n).map(|_| gen_stmt(rng, depth, bound)).collect()
}

fn gen_stmt(rng: &mut StdRng, depth: u32, bound: &mut Vec<String>) -> Stmt {
    let chan = Channel::new(*pick(rng, &CHANNELS));
    let leaf = depth == 0;
    match rng.random_range(0..if leaf { 7 } else { 10 }) {
        0 => {
            let expr = if !bound.is_empty() && rng.random_bool(0.4) {
                Expr::Var(pick(rng, bound).clone())
            } else {
                Expr::Lit(Value { tag: "t1".into(), num: rng.random_range(-3..100) })
            };
            Stmt::Send { chan, expr }
        }
        1 => {
            let var = format!("x{}", rng.random_range(0..3));
            if !bound.contains(&var) {
                bound.push(var.clone());
            }
            Stmt::Recv { chan, var }
        }
        2 => Stmt::Open { chan, parties: vec![Party::new("A"), Party::new("B")] },
        3 => Stmt::Close { chan },
        4 => Stmt::NotifyAll("w".into()),
        5 => Stmt::Wait("w".into()),
        6 => Stmt::Skip,
        7 => Stmt::Par(gen_stmts(rng, depth - 1, bound), gen_stmts(rng, depth - 1, bound)),
        8 => Stmt::Choose(vec![gen_stmts(rng, depth - 1, bound), gen_stmts(rng, depth - 1, bound)]),
        _ => {
            let var = bound.first().cloned().unwrap_or_else(|| "y".into());
            Stmt::Match {
                var,
                arms: vec![
                    (Pattern { tag: "Yes".into(), interval: None }, gen_stmts(rng, depth - 1, bound)),
                    (
                        Pattern { tag: "No".into(), interval: Some(Interval::new(0, 5)) },
                        gen_stmts(rng, depth - 1, bound),
                    ),
                ],
            }
        }
    }
}
