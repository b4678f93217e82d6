use std::collections::{BTreeMap, BTreeSet};

use mercurius_ast::{Assertion, Channel, Event, GlobalProtocol, Label, OrdKind, Party};
use mercurius_parser::parse;
use mercurius_project::{
    project_all, project_channel, project_endpoint, project_endpoints, project_party, Dir,
    ProjectError, Spec,
};
use mercurius_refine::refine_protocol;
use mercurius_testkit::{random_wf_protocol, rng};

fn refined(name: &str) -> GlobalProtocol {
    let text = match name {
        "two_buyer" => include_str!("../../../corpus/two_buyer.mpp"),
        "overview" => include_str!("../../../corpus/overview.mpp"),
        _ => unreachable!(),
    };
    refine_protocol(&parse(text).unwrap().main_def().unwrap().body)
}

fn p(s: &str) -> Party {
    Party::new(s)
}

fn c(s: &str) -> Channel {
    Channel::new(s)
}

fn party(g: &GlobalProtocol, who: &str) -> String {
    project_party(g, &p(who)).unwrap().body.to_string()
}

fn endpoint(g: &GlobalProtocol, who: &str, chan: &str) -> String {
    project_endpoint(&project_party(g, &p(who)).unwrap(), &c(chan)).body.to_string()
}

#[test]
fn two_buyer_party_projections() {
    let g = refined("two_buyer");
    assert_eq!(
        party(&g, "B1"),
        "!s<v.Order>; assume(B1^1); ?b1<v.Price>; assume(B1^2); !b2<v.Amt>; assume(B1^4); \
         guard(S^3 <HB B1^4); assume(B2^3 <HB B2^4)"
    );
    assert_eq!(
        party(&g, "B2"),
        "?b2<v.Price>; assume(B2^3); ?b2<v.Amt>; assume(B2^4); \
         assume(S^3 <HB B1^4); guard(B2^3 <HB B2^4); \
         (!s<v.No>; assume(B2^5); guard(B1^1 <HB B2^5); assume(S^1 <HB S^5) \
         \\/ !s<v.Yes>; assume(B2^6); guard(B1^1 <HB B2^6); assume(S^1 <HB S^6); \
         !s<v.Addr>; assume(B2^7); guard(B2^6 <HB B2^7); assume(S^6 <HB S^7))"
    );
    // No component of the guard between 3 and 4 is attributable to S.
    assert_eq!(
        party(&g, "S"),
        "?s<v.Order>; assume(S^1); (!b1<v.Price>; assume(S^2) * !b2<v.Price>; assume(S^3)); \
         assume(S^3 <HB B1^4); assume(B2^3 <HB B2^4); \
         (?s<v.No>; assume(S^5); assume(B1^1 <HB B2^5); guard(S^1 <HB S^5) \
         \\/ ?s<v.Yes>; assume(S^6); assume(B1^1 <HB B2^6); guard(S^1 <HB S^6); \
         ?s<v.Addr>; assume(S^7); assume(B2^6 <HB B2^7); guard(S^6 <HB S^7))"
    );
}

#[test]
fn two_buyer_endpoint_projections() {
    let g = refined("two_buyer");
    assert_eq!(endpoint(&g, "B1", "s"), "!v.Order; assume(B1^1)");
    assert_eq!(endpoint(&g, "B1", "b1"), "guard(B1^1); ?v.Price; assume(B1^2)");
    assert_eq!(
        endpoint(&g, "B1", "b2"),
        "guard(B1^2); !v.Amt; assume(B1^4); guard(S^3 <HB B1^4); assume(B2^3 <HB B2^4)"
    );
    assert_eq!(
        endpoint(&g, "B2", "b2"),
        "?v.Price; assume(B2^3); ?v.Amt; assume(B2^4); assume(S^3 <HB B1^4); guard(B2^3 <HB B2^4)"
    );
    assert_eq!(
        endpoint(&g, "B2", "s"),
        "guard(B2^4); (!v.No; assume(B2^5); guard(B1^1 <HB B2^5); assume(S^1 <HB S^5) \
         \\/ !v.Yes; assume(B2^6); guard(B1^1 <HB B2^6); assume(S^1 <HB S^6); \
         !v.Addr; assume(B2^7); guard(B2^6 <HB B2^7); assume(S^6 <HB S^7))"
    );
    assert_eq!(
        endpoint(&g, "S", "s"),
        "?v.Order; assume(S^1); (guard(S^2) * guard(S^3)); \
         (?v.No; assume(S^5); assume(B1^1 <HB B2^5); guard(S^1 <HB S^5) \
         \\/ ?v.Yes; assume(S^6); assume(B1^1 <HB B2^6); guard(S^1 <HB S^6); \
         ?v.Addr; assume(S^7); assume(B2^6 <HB B2^7); guard(S^6 <HB S^7))"
    );
    assert_eq!(endpoint(&g, "S", "b1"), "guard(S^1); !v.Price; assume(S^2)");
    assert_eq!(
        endpoint(&g, "S", "b2"),
        "guard(S^1); !v.Price; assume(S^3); assume(S^3 <HB B1^4); assume(B2^3 <HB B2^4)"
    );
    // A channel the party never uses.
    assert_eq!(endpoint(&g, "B1", "zz"), "emp");
}

#[test]
fn canonical_form_ignores_operand_order() {
    let g = refined("two_buyer");
    let s = project_party(&g, &p("S")).unwrap().body;
    let swapped = match &s {
        Spec::Seq(a, rest) => match &**rest {
            Spec::Seq(b, rest) => match &**rest {
                Spec::Seq(par, tail) => match &**par {
                    Spec::Par(x, y) => Spec::seq(
                        (**a).clone(),
                        Spec::seq(
                            (**b).clone(),
                            Spec::seq(Spec::par((**y).clone(), (**x).clone()), (**tail).clone()),
                        ),
                    ),
                    _ => panic!(),
                },
                _ => panic!(),
            },
            _ => panic!(),
        },
        _ => panic!(),
    };
    assert_ne!(s, swapped);
    assert_eq!(s.canonical(), swapped.canonical());
}

#[test]
fn trivial_projections() {
    assert_eq!(project_party(&GlobalProtocol::Emp, &p("A")).unwrap().body, Spec::Emp);
    let g = refined("overview");
    assert_eq!(project_party(&g, &p("Z")), Err(ProjectError::UnknownParty(p("Z"))));
    assert_eq!(project_channel(&g, &c("nope")).body, Spec::Emp);
}

#[test]
fn overview_channel_projections() {
    let g = refined("overview");
    assert_eq!(
        project_channel(&g, &c("c")).body.to_string(),
        "A->C:c<v.t1>@1; assume(A->C:1); guard(B^2); B->C:c<v.t3>@3; assume(B->C:3); \
         assume(B^2 <HB B^3); assume(C^1 <HB C^3); guard(1 <HB 3)"
    );
    assert_eq!(
        project_channel(&g, &c("c2")).body.to_string(),
        "guard(A^1); A->B:c2<v.t2>@2; assume(A->B:2); assume(A^1 <HB A^2)"
    );
}

#[test]
fn shared_orderings() {
    let g = refined("two_buyer");
    let shared = project_all(&g).body;
    let ann = shared.annotations();
    assert!(ann.iter().all(|(guard, _)| !guard));
    assert_eq!(ann[0].1.to_string(), "B1^1 <CB S^1");
    assert!(ann.iter().any(|(_, a)| a.to_string() == "B1^4 <CB B2^4"));
    assert_eq!(ann.len(), 20);

    let o = project_all(&refined("overview")).body;
    let kinds: Vec<OrdKind> = o
        .annotations()
        .into_iter()
        .map(|(_, a)| match a {
            Assertion::Ord(o) => o.kind,
            _ => panic!(),
        })
        .collect();
    assert_eq!(kinds.iter().filter(|k| **k == OrdKind::CB).count(), 3);
    assert_eq!(kinds.iter().filter(|k| **k == OrdKind::HB).count(), 3);

    let one = refine_protocol(&mercurius_parser::parse_protocol("A->B:c<v.m>").unwrap());
    assert_eq!(project_all(&one).body.annotations().len(), 1);
}

#[test]
fn guard_components_are_partitioned_among_parties() {
    let mut corpus = vec![refined("two_buyer"), refined("overview")];
    corpus.extend((0..200).map(|s| refine_protocol(&random_wf_protocol(&mut rng(s), 8))));
    for g in corpus {
        let locals: Vec<_> = g.parties().iter().map(|q| project_party(&g, q).unwrap()).collect();
        for src in mercurius_refine::guards_of(&g) {
            let comps = mercurius_ast::ord_decompose(&src, &g).unwrap();
            for comp in comps.conjuncts() {
                let Assertion::Ord(o) = comp else { panic!() };
                for l in &locals {
                    let ann = l.body.annotations();
                    let proves = ann.iter().any(|(g, a)| *g && *a == comp);
                    let assumes = ann.iter().any(|(g, a)| !*g && *a == comp);
                    if l.party == o.to.party {
                        assert!(proves && !assumes, "{} should prove {comp} in {g}", l.party);
                    } else {
                        assert!(!proves, "{} must not prove {comp}", l.party);
                    }
                }
            }
        }
    }
}

/// Per-party action sequences of the global protocol.
fn global_traces(g: &GlobalProtocol, who: &Party) -> BTreeSet<Vec<Label>> {
    match g {
        GlobalProtocol::Trans(t) if t.involves(who) => [vec![t.label.clone()]].into(),
        GlobalProtocol::Seq(a, b) => {
            let (x, y) = (global_traces(a, who), global_traces(b, who));
            x.iter()
                .flat_map(|u| y.iter().map(move |v| u.iter().chain(v).cloned().collect()))
                .collect()
        }
        GlobalProtocol::Par(a, b) => {
            let (x, y) = (global_traces(a, who), global_traces(b, who));
            let mut out = BTreeSet::new();
            for u in &x {
                for v in &y {
                    shuffle(u, v, &mut Vec::new(), &mut out);
                }
            }
            out
        }
        GlobalProtocol::Choice(a, b) => {
            let mut x = global_traces(a, who);
            x.extend(global_traces(b, who));
            x
        }
        _ => [vec![]].into(),
    }
}

fn shuffle(u: &[Label], v: &[Label], acc: &mut Vec<Label>, out: &mut BTreeSet<Vec<Label>>) {
    if u.is_empty() && v.is_empty() {
        out.insert(acc.clone());
        return;
    }
    for (first, rest, other, left) in [(u.first(), &u[u.len().min(1)..], v, true), (v.first(), &v[v.len().min(1)..], u, false)] {
        if let Some(x) = first {
            acc.push(x.clone());
            if left {
                shuffle(rest, other, acc, out);
            } else {
                shuffle(other, rest, acc, out);
            }
            acc.pop();
        }
    }
}

/// Maximal runs of a party's endpoint specs executed together: an action
/// is enabled when the event guards before it name events that occurred.
fn endpoint_traces(
    specs: &[Spec<mercurius_project::EndpointAction>],
    who: &Party,
) -> BTreeSet<Vec<Label>> {
    fn go(
        specs: Vec<Spec<mercurius_project::EndpointAction>>,
        who: &Party,
        trace: &mut Vec<Label>,
        out: &mut BTreeSet<Vec<Label>>,
    ) {
        let occurred: BTreeSet<Event> = trace.iter().map(|l| Event::new(who.clone(), l.clone())).collect();
        let sat = |a: &Assertion| match a {
            Assertion::Occ(e) => occurred.contains(e),
            _ => true,
        };
        let mut moved = false;
        for (i, s) in specs.iter().enumerate() {
            for (a, r) in s.step(&sat) {
                moved = true;
                let mut next = specs.clone();
                next[i] = r;
                trace.push(a.label.clone());
                go(next, who, trace, out);
                trace.pop();
            }
        }
        if !moved {
            assert!(specs.iter().all(|s| s.passable(&sat)), "stuck after {trace:?}");
            out.insert(trace.clone());
        }
    }
    let mut out = BTreeSet::new();
    go(specs.to_vec(), who, &mut Vec::new(), &mut out);
    out
}

/// The language of a spec (guards ignored), as label sequences of the
/// actions accepted by `keep`.
fn language<A: Clone>(s: &Spec<A>, label: &dyn Fn(&A) -> Option<Label>) -> BTreeSet<Vec<Label>> {
    fn go<A: Clone>(
        s: &Spec<A>,
        label: &dyn Fn(&A) -> Option<Label>,
        acc: &mut Vec<Label>,
        out: &mut BTreeSet<Vec<Label>>,
    ) {
        let sat = |_: &Assertion| true;
        if s.passable(&sat) {
            out.insert(acc.clone());
        }
        for (a, r) in s.step(&sat) {
            let l = label(&a);
            if let Some(l) = &l {
                acc.push(l.clone());
            }
            go(&r, label, acc, out);
            if l.is_some() {
                acc.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    go(s, label, &mut Vec::new(), &mut out);
    out
}

#[test]
fn endpoint_specs_reproduce_party_behaviour() {
    let mut corpus = vec![refined("two_buyer"), refined("overview")];
    corpus.extend((0..500).map(|s| refine_protocol(&random_wf_protocol(&mut rng(s), 8))));
    let mut discrepancies = 0;
    for g in &corpus {
        let endpoints = project_endpoints(g).unwrap();
        for (who, eps) in &endpoints {
            let specs: Vec<_> = eps.values().map(|e| e.body.clone()).collect();
            if endpoint_traces(&specs, who) != global_traces(g, who) {
                discrepancies += 1;
                eprintln!("party {who} of {g}");
            }
        }
    }
    assert_eq!(discrepancies, 0);
}

#[test]
fn channel_projection_agrees_with_party_then_endpoint() {
    let mut corpus = vec![refined("two_buyer"), refined("overview")];
    corpus.extend((0..500).map(|s| refine_protocol(&random_wf_protocol(&mut rng(s), 8))));
    for g in &corpus {
        let endpoints: BTreeMap<Party, BTreeMap<Channel, _>> = project_endpoints(g).unwrap();
        for ch in g.channels() {
            let cs = project_channel(g, &ch);
            for (who, eps) in &endpoints {
                let Some(ep) = eps.get(&ch) else { continue };
                let via_channel = language(&cs.body, &|t: &mercurius_ast::Transmission| {
                    t.involves(who).then(|| t.label.clone())
                });
                let via_party = language(&ep.body, &|a: &mercurius_project::EndpointAction| {
                    Some(a.label.clone())
                });
                assert_eq!(via_channel, via_party, "{who} on {ch} in {g}");
                // Directions agree with the global roles.
                for a in ep.body.actions() {
                    let t = g.transmission(&a.label).unwrap();
                    assert_eq!(a.dir == Dir::Send, &t.sender == who);
                }
            }
        }
    }
}
