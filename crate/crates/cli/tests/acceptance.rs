//! The acceptance suite: one check per acceptance criterion, each printed as
//! a PASS/FAIL line.  Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use mercurius_ast::{
    Assertion, Channel, Event, GlobalProtocol, Label, OrdKind, Ordering, Party, ProtocolFile,
    Transmission,
};
use mercurius_cli::{run_text, Command, Format, RunConfig};
use mercurius_graph::ProtocolGraph;
use mercurius_modular::{check_recursion, check_usages, derive_presync, Library};
use mercurius_orderings::{assumptions_of, Fact, OrderStore, Rule};
use mercurius_parser::{parse, parse_assertion, parse_event, parse_protocol};
use mercurius_project::{
    project_channel, project_endpoint, project_endpoints, project_party, Dir, EndpointAction, Spec,
};
use mercurius_refine::{check_race_freedom, refine_protocol, share_map, GuardStatus, Witness};
use mercurius_sim::{cross_validate, explore, synthesize_programs, Bounds, Outcome, SimError};
use mercurius_testkit::{random_share, random_store, random_wf_protocol, rng};
use mercurius_treeshare::{fractional_closure, ts_and, ts_or, ShareFact, TreeShare};

const TWO_BUYER: &str = include_str!("../../../corpus/two_buyer.mpp");
const OVERVIEW: &str = include_str!("../../../corpus/overview.mpp");
const INTRO_RACE: &str = include_str!("../../../corpus/intro_race.mpp");
const INTRO_SYNC: &str = include_str!("../../../corpus/intro_sync.mpp");
const MODULAR: &str = include_str!("../../../corpus/modular.mpp");
const CHOICE_EMP: &str = include_str!("../../../corpus/choice_emp.mpp");

fn file(text: &str) -> ProtocolFile {
    parse(text).unwrap()
}

fn main_body(text: &str) -> GlobalProtocol {
    file(text).main_def().unwrap().body.clone()
}

fn a(s: &str) -> Assertion {
    parse_assertion(s).unwrap()
}

fn ev(s: &str) -> Event {
    parse_event(s).unwrap()
}

fn random_corpus() -> Vec<GlobalProtocol> {
    (0..500).map(|s| random_wf_protocol(&mut rng(s), 6)).collect()
}

// ---------------------------------------------------------------------------
// 1. Two-buyer reproduction

/// The refined two-buyer protocol as listed for the running example.
const TWO_BUYER_REFINED: &str = "
    B1->S:s<v.Order>; assume(B1->S:1);
    ( S->B1:b1<v.Price>; assume(S->B1:2); assume(S^1 <HB S^2); assume(B1^1 <HB B1^2)
    * S->B2:b2<v.Price>; assume(S->B2:3); assume(S^1 <HB S^3) );
    B1->B2:b2<v.Amt>; assume(B1->B2:4); assume(B1^2 <HB B1^4); assume(B2^3 <HB B2^4); guard(3 <HB 4);
    ( B2->S:s<v.No>; assume(B2->S:5); assume(B2^4 <HB B2^5);
        assume(S^2 <HB S^5); assume(S^3 <HB S^5); guard(1 <HB 5)
    \\/ B2->S:s<v.Yes>; assume(B2->S:6); assume(B2^4 <HB B2^6);
        assume(S^2 <HB S^6); assume(S^3 <HB S^6); guard(1 <HB 6);
      B2->S:s<v.Addr>; assume(B2->S:7); assume(B2^6 <HB B2^7); assume(S^6 <HB S^7); guard(6 <HB 7) )";

/// Drops ordering annotations, keeping actions and event guards/assumptions.
fn events_only<A: Clone>(s: &Spec<A>) -> Spec<A> {
    match s {
        Spec::Seq(x, y) => Spec::seq(events_only(x), events_only(y)),
        Spec::Par(x, y) => Spec::par(events_only(x), events_only(y)),
        Spec::Or(x, y) => Spec::or(events_only(x), events_only(y)),
        Spec::Guard(Assertion::Occ(_)) | Spec::Assume(Assertion::Occ(_)) => s.clone(),
        Spec::Guard(_) | Spec::Assume(_) => Spec::Emp,
        other => other.clone(),
    }
}

fn criterion_1() -> String {
    let g = main_body(TWO_BUYER);
    let start = Instant::now();
    let refined = refine_protocol(&g);
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "refinement took {elapsed:?}");
    let expected = parse_protocol(TWO_BUYER_REFINED).unwrap();
    assert_eq!(refined, expected, "\n got: {refined}\nwant: {expected}");
    assert_eq!(refined.canonical(), expected.canonical());

    // Projections: actions with their event assumptions and event guards.
    let parties = [
        ("B1", "!s<v.Order>; assume(B1^1); ?b1<v.Price>; assume(B1^2); !b2<v.Amt>; assume(B1^4)"),
        (
            "B2",
            "?b2<v.Price>; assume(B2^3); ?b2<v.Amt>; assume(B2^4); \
             (!s<v.No>; assume(B2^5) \\/ !s<v.Yes>; assume(B2^6); !s<v.Addr>; assume(B2^7))",
        ),
        (
            "S",
            "?s<v.Order>; assume(S^1); (!b1<v.Price>; assume(S^2) * !b2<v.Price>; assume(S^3)); \
             (?s<v.No>; assume(S^5) \\/ ?s<v.Yes>; assume(S^6); ?s<v.Addr>; assume(S^7))",
        ),
    ];
    let endpoints = [
        ("B1", "s", "!v.Order; assume(B1^1)"),
        ("B1", "b1", "guard(B1^1); ?v.Price; assume(B1^2)"),
        ("B1", "b2", "guard(B1^2); !v.Amt; assume(B1^4)"),
        ("B2", "b2", "?v.Price; assume(B2^3); ?v.Amt; assume(B2^4)"),
        ("B2", "s", "guard(B2^4); (!v.No; assume(B2^5) \\/ !v.Yes; assume(B2^6); !v.Addr; assume(B2^7))"),
        ("S", "b1", "guard(S^1); !v.Price; assume(S^2)"),
        // Nothing follows the send on b2, so no guard on S^2 is projected
        // onto this endpoint.
        ("S", "b2", "guard(S^1); !v.Price; assume(S^3)"),
        (
            "S",
            "s",
            "?v.Order; assume(S^1); (guard(S^2) * guard(S^3)); \
             (?v.No; assume(S^5) \\/ ?v.Yes; assume(S^6); ?v.Addr; assume(S^7))",
        ),
    ];
    for (p, want) in parties {
        let got = events_only(&project_party(&refined, &Party::new(p)).unwrap().body);
        assert_eq!(got.to_string(), want, "party {p}");
        assert_eq!(got.canonical(), got.canonical().canonical());
    }
    for (p, c, want) in endpoints {
        let local = project_party(&refined, &Party::new(p)).unwrap();
        let got = events_only(&project_endpoint(&local, &Channel::new(c)).body);
        assert_eq!(got.to_string(), want, "endpoint {p}#{c}");
    }

    // Race guards, by the party that must prove a component of them.  The
    // guard between 3 and 4 has no component ending at S, so S proves none.
    let report = check_race_freedom(&refined, &[]).unwrap();
    let mut owed: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for e in &report.entries {
        if let Assertion::Ord(o) = &e.guard {
            owed.entry(o.to.party.to_string()).or_default().insert(e.source.to_string());
        }
    }
    let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    assert_eq!(owed["B1"], set(&["3 <HB 4"]));
    assert_eq!(owed["B2"], set(&["3 <HB 4", "1 <HB 5", "1 <HB 6", "6 <HB 7"]));
    assert_eq!(owed["S"], set(&["1 <HB 5", "1 <HB 6", "6 <HB 7"]));
    // Each projection carries exactly the components it owes.
    for p in ["B1", "B2", "S"] {
        let local = project_party(&refined, &Party::new(p)).unwrap();
        let guards: BTreeSet<String> = local
            .body
            .annotations()
            .into_iter()
            .filter(|(g, x)| *g && matches!(x, Assertion::Ord(_)))
            .map(|(_, x)| x.to_string())
            .collect();
        let expected: BTreeSet<String> = report
            .entries
            .iter()
            .filter(|e| matches!(&e.guard, Assertion::Ord(o) if o.to.party.as_str() == p))
            .map(|e| e.guard.to_string())
            .collect();
        assert_eq!(guards, expected, "guards of {p}");
    }
    format!("refined listing and 3 party + 8 endpoint projections match; refine in {elapsed:?}")
}

// ---------------------------------------------------------------------------
// 2. Overview discharge

fn cli(text: &str, command: Command) -> mercurius_cli::RunResult {
    let cfg = RunConfig {
        input: PathBuf::from("inline.mpp"),
        command,
        sync: vec![],
        bounds: Bounds::default(),
        format: Format::Text,
    };
    run_text(text, &cfg)
}

fn criterion_2() -> String {
    let refined = refine_protocol(&main_body(OVERVIEW));
    let report = check_race_freedom(&refined, &[]).unwrap();
    let comps: BTreeSet<String> = report.entries.iter().map(|e| e.guard.to_string()).collect();
    assert_eq!(comps, ["A^1 <HB B^3", "C^1 <HB C^3"].iter().map(|s| s.to_string()).collect());
    for e in &report.entries {
        assert_eq!(e.source, a("1 <HB 3"));
        assert_eq!(e.status, GuardStatus::Implicit, "{}", e.guard);
    }
    let sender = report.entry(&a("A^1 <HB B^3")).unwrap();
    let Witness::Derivation(d) = &sender.witness else { panic!("no derivation for {}", sender.guard) };
    let rules = d.rules();
    let count = |r: Rule| rules.iter().filter(|x| **x == r).count();
    assert_eq!((count(Rule::CbHb), count(Rule::HbHb)), (1, 1), "{d}");
    let cb = rules.iter().position(|r| *r == Rule::CbHb).unwrap();
    let hb = rules.iter().position(|r| *r == Rule::HbHb).unwrap();
    assert!(cb < hb, "CB-HB must be applied before HB-HB:\n{d}");
    // The same derivation through the command line front end.
    let out = cli(OVERVIEW, Command::Explain { fact: "1 <HB 3".into() });
    assert_eq!(out.code, 0, "{}", out.output);
    assert!(out.output.contains("rules: CB-HB, HB-HB"), "{}", out.output);
    "both components implicit with no sync; witness uses CB-HB then HB-HB once each".into()
}

// ---------------------------------------------------------------------------
// 3. Unsound-rule regression

fn closed(facts: &[(OrdKind, &str, &str)]) -> BTreeSet<Fact<Event>> {
    let mut s = OrderStore::new();
    for (k, x, y) in facts {
        s.add_fact(*k, ev(x), ev(y));
    }
    s.closure().unwrap().closed_facts().into_keys().collect()
}

fn criterion_3() -> String {
    let f = |k, x: &str, y: &str| Fact::new(k, ev(x), ev(y));
    let hb_cb = closed(&[(OrdKind::HB, "B^1", "C^2"), (OrdKind::CB, "C^2", "D^2")]);
    assert_eq!(hb_cb, [f(OrdKind::HB, "B^1", "C^2"), f(OrdKind::CB, "C^2", "D^2")].into());
    let cb_hb = closed(&[(OrdKind::CB, "A^2", "B^2"), (OrdKind::HB, "B^2", "B^3")]);
    assert_eq!(
        cb_hb,
        [f(OrdKind::CB, "A^2", "B^2"), f(OrdKind::HB, "B^2", "B^3"), f(OrdKind::HB, "A^2", "B^3")].into()
    );
    "HB;CB adds nothing, CB;HB adds exactly A^2 <HB B^3".into()
}

// ---------------------------------------------------------------------------
// 4. Intro example

fn criterion_4() -> String {
    let race = file(INTRO_RACE);
    let refined = refine_protocol(&race.main_def().unwrap().body);
    let plain = check_race_freedom(&refined, &[]).unwrap();
    assert_eq!(plain.entry(&a("A^1 <HB B^2")).unwrap().status, GuardStatus::NeedsSync);
    assert!(!plain.race_free());
    let synced = check_race_freedom(&refined, &[(ev("A^1"), ev("B^2"))]).unwrap();
    assert!(synced.race_free());
    for e in &synced.entries {
        assert!(matches!(e.status, GuardStatus::Implicit | GuardStatus::DischargedBySync));
    }
    assert_eq!(synced.entry(&a("A^1 <HB B^2")).unwrap().status, GuardStatus::DischargedBySync);

    let bounds = Bounds::default();
    let a_run = explore(&refined, &race.programs, &bounds).unwrap();
    assert_eq!(a_run.outcome, Outcome::RaceErr, "{}", a_run.detail);
    assert!(a_run.states_explored <= 200, "{} states", a_run.states_explored);
    let sync = file(INTRO_SYNC);
    let refined_b = refine_protocol(&sync.main_def().unwrap().body);
    assert!(check_race_freedom(&refined_b, &sync.syncs).unwrap().race_free());
    let b_run = explore(&refined_b, &sync.programs, &bounds).unwrap();
    assert_eq!(b_run.outcome, Outcome::Safe, "{}", b_run.detail);
    format!(
        "NeedsSync → DischargedBySync; (a) RaceErr after {} states, (b) Safe over {} states",
        a_run.states_explored, b_run.states_explored
    )
}

// ---------------------------------------------------------------------------
// 5. Adjacent guards versus linked pairs

fn hb_both_ends(store: &OrderStore, g: &ProtocolGraph, i: &Label, j: &Label) -> bool {
    let (t1, t2) = (g.transmission(i).unwrap(), g.transmission(j).unwrap());
    store.entails(&Assertion::hb(t1.send(), t2.send())).unwrap()
        && store.entails(&Assertion::hb(t1.recv(), t2.recv())).unwrap()
}

fn criterion_5() -> String {
    let (mut discrepancies, mut free, mut racy) = (0, 0, 0);
    for g in random_corpus() {
        let refined = refine_protocol(&g);
        let adjacent_ok = check_race_freedom(&refined, &[]).unwrap().race_free();
        let store = assumptions_of(&refined).closure().unwrap();
        let graph = ProtocolGraph::new(&g);
        let linked_ok = graph.linked_pairs().iter().all(|(i, j)| hb_both_ends(&store, &graph, i, j));
        discrepancies += (adjacent_ok != linked_ok) as usize;
        if adjacent_ok {
            free += 1;
        } else {
            racy += 1;
        }
    }
    assert_eq!(discrepancies, 0);
    assert!(free > 0 && racy > 0, "{free} race-free, {racy} racy");
    format!("500 protocols ({free} race-free, {racy} racy), 0 discrepancies")
}

// ---------------------------------------------------------------------------
// 6. Projection fidelity

/// Per-party label sequences of the global protocol.
fn global_traces(g: &GlobalProtocol, who: &Party) -> BTreeSet<Vec<Label>> {
    match g {
        GlobalProtocol::Trans(t) if t.involves(who) => [vec![t.label.clone()]].into(),
        GlobalProtocol::Seq(x, y) => {
            let (u, v) = (global_traces(x, who), global_traces(y, who));
            u.iter().flat_map(|p| v.iter().map(move |q| p.iter().chain(q).cloned().collect())).collect()
        }
        GlobalProtocol::Par(x, y) => {
            let (u, v) = (global_traces(x, who), global_traces(y, who));
            let mut out = BTreeSet::new();
            for p in &u {
                for q in &v {
                    interleave(p, q, &mut Vec::new(), &mut out);
                }
            }
            out
        }
        GlobalProtocol::Choice(x, y) => {
            let mut u = global_traces(x, who);
            u.extend(global_traces(y, who));
            u
        }
        _ => [vec![]].into(),
    }
}

fn interleave(u: &[Label], v: &[Label], acc: &mut Vec<Label>, out: &mut BTreeSet<Vec<Label>>) {
    if u.is_empty() && v.is_empty() {
        out.insert(acc.clone());
        return;
    }
    if let Some((x, rest)) = u.split_first() {
        acc.push(x.clone());
        interleave(rest, v, acc, out);
        acc.pop();
    }
    if let Some((y, rest)) = v.split_first() {
        acc.push(y.clone());
        interleave(u, rest, acc, out);
        acc.pop();
    }
}

/// All complete runs of a party's endpoints executed side by side, an
/// action being enabled once the events its guards name have occurred.
fn endpoint_traces(specs: Vec<Spec<EndpointAction>>, who: &Party) -> Option<BTreeSet<Vec<Label>>> {
    fn go(
        specs: Vec<Spec<EndpointAction>>,
        who: &Party,
        trace: &mut Vec<Label>,
        out: &mut BTreeSet<Vec<Label>>,
    ) -> bool {
        let done: BTreeSet<Event> = trace.iter().map(|l| Event::new(who.clone(), l.clone())).collect();
        let sat = |x: &Assertion| match x {
            Assertion::Occ(e) => done.contains(e),
            _ => true,
        };
        let mut moved = false;
        for (i, s) in specs.iter().enumerate() {
            for (act, rest) in s.step(&sat) {
                moved = true;
                let mut next = specs.clone();
                next[i] = rest;
                trace.push(act.label.clone());
                let ok = go(next, who, trace, out);
                trace.pop();
                if !ok {
                    return false;
                }
            }
        }
        if !moved {
            if !specs.iter().all(|s| s.passable(&sat)) {
                return false;
            }
            out.insert(trace.clone());
        }
        true
    }
    let mut out = BTreeSet::new();
    go(specs, who, &mut Vec::new(), &mut out).then_some(out)
}

/// Label sequences accepted by a spec, with guards ignored.
fn language<A: Clone>(s: &Spec<A>, label: &dyn Fn(&A) -> Option<Label>) -> BTreeSet<Vec<Label>> {
    fn go<A: Clone>(s: &Spec<A>, label: &dyn Fn(&A) -> Option<Label>, acc: &mut Vec<Label>, out: &mut BTreeSet<Vec<Label>>) {
        let sat = |_: &Assertion| true;
        if s.passable(&sat) {
            out.insert(acc.clone());
        }
        for (x, rest) in s.step(&sat) {
            let l = label(&x);
            if let Some(l) = &l {
                acc.push(l.clone());
            }
            go(&rest, label, acc, out);
            if l.is_some() {
                acc.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    go(s, label, &mut Vec::new(), &mut out);
    out
}

fn criterion_6() -> String {
    let mut corpus: Vec<GlobalProtocol> = vec![main_body(TWO_BUYER), main_body(OVERVIEW)];
    corpus.extend(random_corpus());
    let (mut checked, mut discrepancies) = (0, 0);
    for g in &corpus {
        let refined = refine_protocol(g);
        let endpoints = project_endpoints(&refined).unwrap();
        for (who, eps) in &endpoints {
            checked += 1;
            let specs = eps.values().map(|e| e.body.clone()).collect();
            if endpoint_traces(specs, who) != Some(global_traces(g, who)) {
                discrepancies += 1;
            }
        }
        for ch in refined.channels() {
            let via_channel = project_channel(&refined, &ch);
            for (who, eps) in &endpoints {
                let Some(ep) = eps.get(&ch) else { continue };
                let c = language(&via_channel.body, &|t: &Transmission| t.involves(who).then(|| t.label.clone()));
                let p = language(&ep.body, &|x: &EndpointAction| Some(x.label.clone()));
                if c != p {
                    discrepancies += 1;
                }
                for x in ep.body.actions() {
                    let t = refined.transmission(&x.label).unwrap();
                    if (x.dir == Dir::Send) != (&t.sender == who) {
                        discrepancies += 1;
                    }
                }
            }
        }
    }
    assert_eq!(discrepancies, 0);
    format!("{checked} party reconstructions and channel cross-checks, 0 discrepancies")
}

// ---------------------------------------------------------------------------
// 7. Modular examples

fn criterion_7() -> String {
    let lib = Library::from_file(&file(MODULAR)).unwrap();
    let cond = derive_presync(&lib, "H0").unwrap();
    let want: BTreeSet<BTreeSet<String>> = [
        ["send(F.Γ(c)) <=HB F.K(A)".to_string()].into(),
        ["recv(F.Γ(c)) <=HB F.K(B)".to_string()].into(),
    ]
    .into();
    assert_eq!(cond.clause_sets(), want);
    let in_h = check_usages(&lib, "H").unwrap();
    assert_eq!(in_h.len(), 1);
    assert!(!in_h[0].holds, "H0 inside H must fail");
    let in_h1 = check_usages(&lib, "H1").unwrap();
    assert_eq!(in_h1.len(), 1);
    assert!(in_h1[0].holds, "H0 inside H1 must hold");
    assert!(check_recursion(&lib, "H5").unwrap());
    format!("presync(H0) = {cond}; usage fails in H, holds in H1; H5 recursion safe")
}

// ---------------------------------------------------------------------------
// 8. Tree shares

fn criterion_8() -> String {
    // Shares of the optional-middle-step protocol: the middle transmission
    // runs on the left half, the others on every execution.
    let shares = share_map(&main_body(CHOICE_EMP));
    let (l, f) = (TreeShare::left(), TreeShare::full());
    assert_eq!(shares[&Label::of(1)], f);
    assert_eq!(shares[&Label::of(2)], l);
    assert_eq!(shares[&Label::of(3)], f);
    let share = |x: u32, y: u32| ts_and(&shares[&Label::of(x)], &shares[&Label::of(y)]);
    let facts = vec![ShareFact::new("T1", "T2", share(1, 2)), ShareFact::new("T2", "T3", share(2, 3))];
    let closure = fractional_closure(&facts);
    assert!(closure.contains(&ShareFact::new("T1", "T3", l.clone())), "{closure:?}");
    // The silent branch orders T1 directly before T3 on the right half.
    let mut both = facts.clone();
    both.push(ShareFact::new("T1", "T3", TreeShare::right()));
    let closure = fractional_closure(&both);
    assert!(closure.contains(&ShareFact::new("T1", "T3", f.clone())), "{closure:?}");

    // Lattice laws over 1000 random canonical shares.
    let mut r = rng(8);
    let shares: Vec<TreeShare> = (0..1000).map(|_| random_share(&mut r, 5)).collect();
    let (zero, full) = (TreeShare::zero(), TreeShare::full());
    for (i, x) in shares.iter().enumerate() {
        let y = &shares[(i * 7 + 3) % shares.len()];
        let z = &shares[(i * 13 + 5) % shares.len()];
        assert!(x.is_canonical());
        assert_eq!(ts_and(x, y), ts_and(y, x));
        assert_eq!(ts_or(x, y), ts_or(y, x));
        assert_eq!(ts_and(x, &ts_and(y, z)), ts_and(&ts_and(x, y), z));
        assert_eq!(ts_or(x, &ts_or(y, z)), ts_or(&ts_or(x, y), z));
        assert_eq!(ts_and(x, x), *x);
        assert_eq!(ts_or(x, x), *x);
        assert_eq!(ts_and(x, &ts_or(x, y)), *x);
        assert_eq!(ts_or(x, &ts_and(x, y)), *x);
        assert_eq!(ts_and(x, &full), *x);
        assert_eq!(ts_or(x, &zero), *x);
        assert_eq!(x.le(y), ts_and(x, y) == *x);
        assert!(ts_and(x, y).is_canonical() && ts_or(x, y).is_canonical());
    }
    "T1≺T3 on L, then on F with the silent branch; lattice laws hold on 1000 shares".into()
}

// ---------------------------------------------------------------------------
// 9. Closure oracle

/// Saturation by brute force: compose every pair of facts until nothing
/// new appears.  `None` for stores with an HB cycle.
fn naive_closure(facts: &[Ordering]) -> Option<BTreeSet<(OrdKind, Event, Event)>> {
    let mut set: BTreeSet<(OrdKind, Event, Event)> =
        facts.iter().map(|o| (o.kind, o.from.clone(), o.to.clone())).collect();
    loop {
        let mut new = Vec::new();
        for (k1, x, y) in &set {
            for (k2, y2, z) in &set {
                if y != y2 {
                    continue;
                }
                use OrdKind::*;
                let k = match (k1, k2) {
                    (HB, HB) | (CB, HB) | (HB, WHB) | (WHB, HB) => HB,
                    (WHB, WHB) => WHB,
                    _ => continue,
                };
                let f = (k, x.clone(), z.clone());
                if !set.contains(&f) {
                    new.push(f);
                }
            }
        }
        if new.is_empty() {
            break;
        }
        set.extend(new);
    }
    (!set.iter().any(|(k, x, y)| *k == OrdKind::HB && x == y)).then_some(set)
}

fn criterion_9() -> String {
    let start = Instant::now();
    let mut cyclic = 0;
    for seed in 0..1000 {
        let facts = random_store(&mut rng(seed), 12);
        let mut s = OrderStore::new();
        for o in &facts {
            s.add_ordering(o);
        }
        let optimized = s.close().ok().map(|_| s.closed_facts().into_keys().map(|f| (f.kind, f.from, f.to)).collect());
        cyclic += optimized.is_none() as usize;
        assert_eq!(optimized, naive_closure(&facts), "seed {seed}: {facts:?}");
    }
    format!("1000 stores ({cyclic} cyclic) equal the naive fixpoint in {:?}", start.elapsed())
}

// ---------------------------------------------------------------------------
// 10. Soundness cross-validation

fn criterion_10() -> String {
    let bounds = Bounds::default();
    let mut corpus_runs = Vec::new();
    for text in [TWO_BUYER, OVERVIEW, INTRO_RACE, INTRO_SYNC] {
        let f = file(text);
        let refined = refine_protocol(&f.main_def().unwrap().body);
        corpus_runs.push(cross_validate(&refined, &f.programs, &f.syncs, &bounds));
    }
    let mut random_runs = Vec::new();
    for g in random_corpus() {
        let refined = refine_protocol(&g);
        if let Ok(programs) = synthesize_programs(&refined) {
            random_runs.push(cross_validate(&refined, &programs, &[], &bounds));
        }
    }
    // A soundness violation counts as a statically race-free run.
    let tally = |runs: &[Result<mercurius_sim::CrossValidation, SimError>]| {
        let (mut race_free, mut violations) = (0, 0);
        for r in runs {
            match r {
                Ok(cv) => race_free += cv.static_race_free as usize,
                Err(SimError::SoundnessViolation { .. }) => {
                    race_free += 1;
                    violations += 1;
                }
                Err(e) => panic!("{e}"),
            }
        }
        (race_free, violations)
    };
    let (corpus_race_free, corpus_violations) = tally(&corpus_runs);
    let (random_race_free, random_violations) = tally(&random_runs);
    assert!(corpus_race_free >= 2, "overview and the synchronised intro are race free");
    let race_free = corpus_race_free + random_race_free;
    let violations = corpus_violations + random_violations;
    assert_eq!(violations, 0);
    assert!(race_free >= 100, "only {race_free} statically race-free runs");
    format!("{race_free} statically race-free protocols simulated ({corpus_race_free} from the corpus), 0 soundness violations")
}

// ---------------------------------------------------------------------------

#[test]
fn acceptance_criteria() {
    let criteria: [(u32, &str, fn() -> String); 10] = [
        (1, "two-buyer reproduction", criterion_1),
        (2, "overview discharge", criterion_2),
        (3, "unsound-rule regression", criterion_3),
        (4, "intro example", criterion_4),
        (5, "adjacent guards vs linked pairs", criterion_5),
        (6, "projection fidelity", criterion_6),
        (7, "modular examples", criterion_7),
        (8, "tree shares", criterion_8),
        (9, "closure oracle", criterion_9),
        (10, "soundness cross-validation", criterion_10),
    ];
    let suite = Instant::now();
    let mut results = Vec::new();
    for (n, name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).map_err(|e| {
            e.downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())
        });
        results.push((n, name, outcome));
    }
    let total = suite.elapsed();
    // The whole suite must finish within a minute.
    if total > Duration::from_secs(60) {
        let entry = results.iter_mut().find(|r| r.0 == 9).unwrap();
        entry.2 = Err(format!("suite took {total:?}, over 60 s"));
    }
    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {n:>2} {name}: {}", msg.lines().next().unwrap_or_default());
            }
        }
    }
    println!("suite runtime {total:?}");
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
