use mercurius_ast::{
    ord_decompose, Assertion, AstError, Channel, Event, GlobalProtocol, Interval, Label, Msg,
    OrdKind, Ordering, Party, Pattern, Transmission, Value,
};
use proptest::prelude::*;

fn tx(from: &str, to: &str, chan: &str, tag: &str, label: u32) -> GlobalProtocol {
    GlobalProtocol::Trans(Transmission::new(
        Party::new(from),
        Party::new(to),
        Channel::new(chan),
        Msg::tag(tag),
        Label::of(label),
    ))
}

fn ev(p: &str, l: u32) -> Event {
    Event::new(Party::new(p), Label::of(l))
}

/// `A->C:c<v.t1>@1; A->B:c2<v.t2>@2; B->C:c<v.t3>@3`
fn overview() -> GlobalProtocol {
    GlobalProtocol::seq_all([tx("A", "C", "c", "t1", 1), tx("A", "B", "c2", "t2", 2), tx("B", "C", "c", "t3", 3)])
}

#[test]
fn labels_render_hierarchically_and_order_lexicographically() {
    let l = Label::new(vec![2, 1]);
    assert_eq!(l.to_string(), "2#1");
    assert_eq!(Label::of(3).prefixed(&[7, 1]).to_string(), "7#1#3");
    assert_eq!(Label::of(3).prefixed(&[]), Label::of(3));
    assert!(Label::of(2) < Label::new(vec![2, 1]));
    assert!(Label::new(vec![2, 1]) < Label::of(3));
    assert_eq!(Label::try_new(vec![]), None);
    assert_eq!(Label::try_new(vec![1, 0]), None);
}

#[test]
#[should_panic(expected = "positive")]
fn zero_label_segments_are_rejected() {
    Label::new(vec![0]);
}

#[test]
fn transmissions_expose_their_events() {
    let t = Transmission::new(Party::new("A"), Party::new("B"), Channel::new("c"), Msg::tag("m"), Label::of(4));
    assert_eq!(t.send(), ev("A", 4));
    assert_eq!(t.recv(), ev("B", 4));
    assert!(t.involves(&Party::new("B")) && !t.involves(&Party::new("C")));
    assert_eq!(ev("A", 4).to_string(), "A^4");
}

#[test]
fn intervals_and_patterns() {
    let iv = Interval::new(1, 5);
    assert!(iv.contains(1) && iv.contains(5) && !iv.contains(6));
    assert!(iv.overlaps(&Interval::new(5, 9)) && !iv.overlaps(&Interval::new(6, 9)));
    let any_price = Pattern { tag: "Price".into(), interval: None };
    let cheap = Pattern { tag: "Price".into(), interval: Some(Interval::new(0, 10)) };
    let v = Value { tag: "Price".into(), num: 60 };
    assert!(any_price.matches(&v) && !cheap.matches(&v));
    assert!(!any_price.matches(&Value { tag: "Title".into(), num: 0 }));
}

#[test]
fn protocol_queries() {
    let g = overview();
    let names = |v: Vec<Party>| v.into_iter().map(|p| p.to_string()).collect::<Vec<_>>();
    assert_eq!(names(g.parties()), ["A", "B", "C"]);
    assert_eq!(g.channels(), vec![Channel::new("c"), Channel::new("c2")]);
    assert_eq!(g.transmissions().len(), 3);
    assert_eq!(g.transmission(&Label::of(2)).unwrap().receiver, Party::new("B"));
    assert!(g.transmission(&Label::of(9)).is_none());
    assert!(!g.is_silent());
    assert!(GlobalProtocol::seq(GlobalProtocol::Emp, GlobalProtocol::Guard(Assertion::Occ(ev("A", 1)))).is_silent());
}

#[test]
fn transmission_orderings_decompose_into_both_ends() {
    let g = overview();
    let d = ord_decompose(&Assertion::ord_t(Label::of(1), Label::of(3)), &g).unwrap();
    assert_eq!(d.to_string(), "A^1 <HB B^3 & C^1 <HB C^3");
    assert_eq!(d.conjuncts().len(), 2);
    assert_eq!(ord_decompose(&d, &g).unwrap(), d, "idempotent");
    assert_eq!(
        ord_decompose(&Assertion::ord_t(Label::of(1), Label::of(8)), &g),
        Err(AstError::UnknownLabel(Label::of(8)))
    );
}

#[test]
fn assertions_render_their_forms() {
    let o = Ordering::new(OrdKind::CB, ev("A", 1), ev("B", 1));
    assert_eq!(Assertion::ord(o).to_string(), "A^1 <CB B^1");
    assert_eq!(Assertion::Not(ev("A", 1)).to_string(), "!A^1");
    let conj = Assertion::and_all([Assertion::Occ(ev("A", 1)), Assertion::Occ(ev("B", 2)), Assertion::Occ(ev("C", 3))]);
    assert_eq!(conj.unwrap().conjuncts().len(), 3);
    assert!(Assertion::and_all([]).is_none());
}

#[test]
fn canonical_form_ignores_operand_order_of_commutative_operators() {
    let (x, y) = (tx("A", "B", "c", "m", 1), tx("C", "D", "d", "n", 2));
    assert_eq!(
        GlobalProtocol::par(x.clone(), y.clone()).canonical(),
        GlobalProtocol::par(y.clone(), x.clone()).canonical()
    );
    assert_eq!(
        GlobalProtocol::choice(x.clone(), y.clone()).canonical(),
        GlobalProtocol::choice(y.clone(), x.clone()).canonical()
    );
    assert_ne!(
        GlobalProtocol::seq(x.clone(), y.clone()).canonical(),
        GlobalProtocol::seq(y, x).canonical()
    );
}

fn small_protocol() -> impl Strategy<Value = GlobalProtocol> {
    let leaf = (0u32..6, 0usize..3).prop_map(|(l, c)| {
        if l == 0 {
            GlobalProtocol::Emp
        } else {
            tx("A", "B", ["c", "d", "e"][c], "m", l)
        }
    });
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| GlobalProtocol::seq(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| GlobalProtocol::par(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| GlobalProtocol::choice(a, b)),
        ]
    })
}

proptest! {
    #[test]
    fn canonicalisation_is_idempotent(g in small_protocol()) {
        let c = g.canonical();
        prop_assert_eq!(c.canonical(), c);
    }

    #[test]
    fn canonicalisation_keeps_transmissions(g in small_protocol()) {
        let mut before = g.transmissions();
        let mut after = g.canonical().transmissions();
        before.sort();
        after.sort();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn label_order_matches_path_order(a in prop::collection::vec(1u32..5, 1..4), b in prop::collection::vec(1u32..5, 1..4)) {
        prop_assert_eq!(Label::new(a.clone()).cmp(&Label::new(b.clone())), a.cmp(&b));
    }
}
