use mercurius_ast::{
    Assertion, Channel, Event, Expr, GlobalProtocol, Label, OrdKind, Party, ProtocolFile, Stmt,
    Transmission,
};
use mercurius_parser::{
    parse, parse_assertion, parse_event, parse_protocol, parse_sync, serialize, ParseError,
};
use proptest::prelude::*;

const TWO_BUYER: &str = include_str!("../../../corpus/two_buyer.mpp");
const MODULAR: &str = include_str!("../../../corpus/modular.mpp");

fn labels(g: &GlobalProtocol) -> Vec<Label> {
    g.transmissions().into_iter().map(|t| t.label).collect()
}

#[test]
fn overview_sequence_gets_positional_labels() {
    let g = parse_protocol("A->C:c<v.t1>; A->B:c2<v.t2>; B->C:c<v.t3>").unwrap();
    assert_eq!(labels(&g), vec![Label::of(1), Label::of(2), Label::of(3)]);
    let items = g.seq_items();
    assert_eq!(items.len(), 3);
    let GlobalProtocol::Trans(t) = items[1] else { panic!("expected a transmission") };
    assert_eq!(t.sender, Party::new("A"));
    assert_eq!(t.receiver, Party::new("B"));
    assert_eq!(t.channel, Channel::new("c2"));
    assert_eq!(t.msg.tag, "t2");
}

#[test]
fn emp_parses_to_emp() {
    assert_eq!(parse_protocol("emp").unwrap(), GlobalProtocol::Emp);
}

#[test]
fn self_transmission_is_rejected() {
    let err = parse_protocol("A->A:c<v.t>").unwrap_err();
    assert!(matches!(err, ParseError::DuplicateParty { ref party, line: 1, col: 1 } if party.as_str() == "A"));
}

#[test]
fn operator_precedence_and_associativity() {
    // `;` binds tighter than `*`, which binds tighter than `\/`.
    let g = parse_protocol("A->B:c<x> ; B->A:c<y> * C->D:d<z> \\/ A->B:e<w>").unwrap();
    let GlobalProtocol::Choice(l, r) = &g else { panic!("top is a choice: {g}") };
    assert!(matches!(**r, GlobalProtocol::Trans(_)));
    let GlobalProtocol::Par(pl, _) = &**l else { panic!("left is a par") };
    assert!(matches!(**pl, GlobalProtocol::Seq(..)));
    // Right associativity.
    let s = parse_protocol("A->B:c<x>; A->B:c<y>; A->B:c<z>").unwrap();
    let GlobalProtocol::Seq(_, rest) = &s else { panic!() };
    assert!(matches!(**rest, GlobalProtocol::Seq(..)));
}

#[test]
fn explicit_labels_override_but_counter_advances() {
    let g = parse_protocol("A->B:c<x>@7; A->B:c<y>; A->B:c<z>@4#2").unwrap();
    assert_eq!(labels(&g), vec![Label::of(7), Label::of(2), Label::new(vec![4, 2])]);
}

#[test]
fn duplicate_label_is_rejected() {
    let err = parse_protocol("A->B:c<x>@2; A->B:c<y>").unwrap_err();
    assert!(matches!(err, ParseError::DuplicateLabel { ref label, .. } if *label == Label::of(2)));
}

#[test]
fn message_forms() {
    let g = parse_protocol("A->B:c<Price>; A->B:c<x.Amt{1..100}>; A->B:c<v.N{-5..-1}>").unwrap();
    let ts = g.transmissions();
    assert_eq!((ts[0].msg.var.as_str(), ts[0].msg.tag.as_str()), ("v", "Price"));
    assert_eq!(ts[1].msg.var, "x");
    assert_eq!(ts[1].msg.interval.map(|i| (i.lo, i.hi)), Some((1, 100)));
    assert_eq!(ts[2].msg.interval.map(|i| (i.lo, i.hi)), Some((-5, -1)));
    assert!(parse_protocol("A->B:c<v.N{3..1}>").is_err());
}

#[test]
fn syntax_errors_carry_positions() {
    let err = parse_protocol("A->B:c<v.t>;\n  A->:c<v.t>").unwrap_err();
    match err {
        ParseError::Syntax { line, col, .. } => assert_eq!((line, col), (2, 6)),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(parse("A->B:c<v.t> $"), Err(ParseError::Syntax { .. })));
}

#[test]
fn two_buyer_file() {
    let f = parse(TWO_BUYER).unwrap();
    assert_eq!(f.main, ProtocolFile::IMPLICIT_MAIN);
    let g = &f.main_def().unwrap().body;
    assert_eq!(labels(g), (1..=7).map(Label::of).collect::<Vec<_>>());
    assert_eq!(f.programs.len(), 3);
    // `send b2 Amt(50)` is a literal; `recv s d; match d` binds d.
    let s = f.programs.iter().find(|p| p.party.as_str() == "S").unwrap();
    assert!(matches!(s.body.last(), Some(Stmt::Match { var, arms }) if var == "d" && arms.len() == 2));
    let b1 = &f.programs[0];
    assert!(matches!(&b1.body[2], Stmt::Send { expr: Expr::Lit(v), .. } if v.tag == "Amt" && v.num == 50));
}

#[test]
fn definitions_invocations_and_main() {
    let f = parse(MODULAR).unwrap();
    assert_eq!(f.main, "H");
    assert_eq!(f.defs.len(), 6);
    let h = f.def("H").unwrap();
    let GlobalProtocol::Seq(_, inv) = &h.body else { panic!() };
    let GlobalProtocol::Invoke(i) = &**inv else { panic!() };
    assert_eq!(i.name, "H0");
    assert_eq!(i.parties, vec![Party::new("B"), Party::new("C")]);
    assert_eq!(i.channels, vec![Channel::new("c")]);
    assert_eq!(i.label, Label::of(2));
    assert!(f.def("H5").unwrap().is_recursive());
}

#[test]
fn invocation_arguments_split_by_arity() {
    let f = parse("def H0(A,B;c) = A->B:c<v.m>; def H(A,B,C;c) = H0(B,C,c);").unwrap();
    let GlobalProtocol::Invoke(i) = &f.def("H").unwrap().body else { panic!() };
    assert_eq!(i.parties.len(), 2);
    assert_eq!(i.channels, vec![Channel::new("c")]);
}

#[test]
fn invocation_errors() {
    let err = parse("def H0(A,B;c) = A->B:c<v.m>; def H(A;c) = H0(A;c);").unwrap_err();
    assert!(matches!(err, ParseError::ArityMismatch { .. }));
    let err = parse("def H(A;c) = Nope(A;c);").unwrap_err();
    assert_eq!(err, ParseError::UnknownDef("Nope".into()));
    let err = parse("def H(A,B;c) = A->B:c<m>; def H(A,B;c) = A->B:c<m>;").unwrap_err();
    assert_eq!(err, ParseError::DuplicateDef("H".into()));
    let err = parse("def H(A,B;c) = A->B:c<m>; main G;").unwrap_err();
    assert_eq!(err, ParseError::UnknownDef("G".into()));
}

#[test]
fn frontier_parameters_are_accepted() {
    let f = parse("def H0(A,B;c)<i,F> = A->B:c<v.m>;").unwrap();
    assert_eq!(f.main, "H0");
}

#[test]
fn assertions() {
    let a = parse_assertion("S^3 <HB B1^4 & B2^3 <HB B2^4").unwrap();
    assert_eq!(a.conjuncts().len(), 2);
    assert_eq!(
        parse_assertion("3 <HB 4").unwrap(),
        Assertion::OrdT { kind: OrdKind::HB, from: Label::of(3), to: Label::of(4) }
    );
    assert_eq!(
        parse_assertion("B1->B2:4").unwrap(),
        Assertion::Transmitted { sender: Party::new("B1"), receiver: Party::new("B2"), label: Label::of(4) }
    );
    let w = parse_assertion("A^1#2 <=HB B^2").unwrap();
    assert!(matches!(w, Assertion::Ord(ref o) if o.kind == OrdKind::WHB));
    let s = parse_assertion("T^1 <HB T^3 @L").unwrap();
    assert!(matches!(s, Assertion::Ord(ref o) if o.share.as_ref().map(|s| s.to_string()) == Some("L".into())));
    let imp = parse_assertion("A^1 => !B^2 & C^3").unwrap();
    assert!(matches!(imp, Assertion::Implies(_, ref rhs) if matches!(**rhs, Assertion::And(..))));
    assert!(parse_assertion("A^1 <XB B^2").is_err());
}

#[test]
fn events_and_sync_edges() {
    assert_eq!(parse_event("B1^4").unwrap(), Event::new(Party::new("B1"), Label::of(4)));
    let (a, b) = parse_sync("A^1<B^2").unwrap();
    assert_eq!((a.to_string(), b.to_string()), ("A^1".into(), "B^2".into()));
    assert!(parse_sync("A^1 <HB B^2").is_ok());
    assert!(parse_sync("A^1 <CB B^2").is_err());
}

#[test]
fn guard_renders_in_dsl_form() {
    let g = GlobalProtocol::seq(
        GlobalProtocol::Trans(Transmission::new("S", "B1", "b1", mercurius_ast::Msg::tag("Price"), Label::of(1))),
        GlobalProtocol::Guard(parse_assertion("S^3 <HB B1^4").unwrap()),
    );
    let text = serialize(&ProtocolFile::from_protocol(g.clone()));
    assert!(text.contains("guard(S^3 <HB B1^4)"), "{text}");
    assert_eq!(parse(&text).unwrap().main_def().unwrap().body, g);
}

#[test]
fn serialize_emp() {
    assert_eq!(serialize(&ProtocolFile::from_protocol(GlobalProtocol::Emp)).trim(), "emp;");
}

#[test]
fn corpus_round_trips() {
    for text in [TWO_BUYER, MODULAR] {
        let f = parse(text).unwrap();
        let once = serialize(&f);
        let again = parse(&once).unwrap();
        assert_eq!(again, f);
        assert_eq!(serialize(&again), once, "canonical text is a fixpoint");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn serialize_then_parse_is_identity(f in mercurius_testkit::file_strategy()) {
        let text = serialize(&f);
        let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, f);
    }

    #[test]
    fn well_formed_protocols_round_trip(g in mercurius_testkit::wf_protocol_strategy(6)) {
        let text = g.to_string();
        prop_assert_eq!(parse_protocol(&text).unwrap(), g);
    }
}
