//! Protocol refinement and race-freedom checking.
//!
//! [`collect`] computes a [`Summary`] bottom-up: the *backtier* (first
//! events per party, first transmissions per channel), the *frontier* (last
//! ones), the ordering assumptions released by the sub-protocol and the
//! race-freedom guards it must discharge.  Sequencing fuses the frontier of
//! the left operand with the backtier of the right one: every pair of
//! same-party events becomes a happens-before assumption and every pair of
//! same-channel transmissions becomes a guard `⊖(i1 ≺HB i2)`.
//!
//! [`refine_protocol`] splices the assumptions and guards into the protocol
//! right after the transmission they are anchored on (the later label they
//! mention).  [`check_race_freedom`] loads the assumptions of a refined
//! protocol into an [`OrderStore`], optionally adds explicit
//! synchronisation edges, and classifies every guard component.
//!
//! Choices with a silent branch (`G \/ emp`) annotate the orderings they
//! give rise to with tree shares: the transmissions of the left branch hold
//! on share `L`, those of the right on `R`, nested choices refine the path.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use mercurius_ast::{
    ord_decompose, AstError, Assertion, Channel, Event, GlobalProtocol, Label, OrdKind, Ordering,
    Party, Transmission,
};
use mercurius_orderings::{assumptions_of, Derivation, Fact, OrderError, OrderStore};
use mercurius_par::Mode;
use mercurius_treeshare::{ts_and, Side, TreeShare};
use thiserror::Error;

/// Errors raised while checking a refined protocol.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RefineError {
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    Ast(#[from] AstError),
}

/// A boundary entry: nothing (`⊥`), one element, the elements of two
/// concurrent sub-protocols (`∗`) or of two alternatives (`∨`).
///
/// `Star` never has `Bot` or `Or` operands: the smart constructors drop
/// empty operands and distribute `∗` over `∨`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EForm<A> {
    Bot,
    Atom(A),
    Star(Box<EForm<A>>, Box<EForm<A>>),
    Or(Box<EForm<A>>, Box<EForm<A>>),
}

impl<A: Clone> EForm<A> {
    pub fn is_bot(&self) -> bool {
        matches!(self, EForm::Bot)
    }

    /// All atoms, left to right.
    pub fn atoms(&self) -> Vec<&A> {
        match self {
            EForm::Bot => vec![],
            EForm::Atom(a) => vec![a],
            EForm::Star(x, y) | EForm::Or(x, y) => {
                let mut v = x.atoms();
                v.extend(y.atoms());
                v
            }
        }
    }

    /// `x ∨ y`; only `⊥ ∨ ⊥` collapses.
    pub fn or(x: Self, y: Self) -> Self {
        if x.is_bot() && y.is_bot() {
            EForm::Bot
        } else {
            EForm::Or(Box::new(x), Box::new(y))
        }
    }

    /// `x ∗ y` with `⊥` as unit, distributing over `∨`.
    pub fn star(x: Self, y: Self) -> Self {
        match (x, y) {
            (EForm::Bot, y) => y,
            (x, EForm::Bot) => x,
            (EForm::Or(a, b), y) => Self::or(Self::star(*a, y.clone()), Self::star(*b, y)),
            (x, EForm::Or(a, b)) => Self::or(Self::star(x.clone(), *a), Self::star(x, *b)),
            (x, y) => EForm::Star(Box::new(x), Box::new(y)),
        }
    }

    /// Sequential fusion: the entry of `primary`, falling back to
    /// `fallback` wherever `primary` is `⊥` — including inside the
    /// alternatives of an `∨`, so that an alternative without the key
    /// exposes the entry of the neighbouring sub-protocol.
    pub fn seq(primary: Self, fallback: &Self) -> Self {
        match primary {
            EForm::Bot => fallback.clone(),
            EForm::Or(a, b) => Self::or(Self::seq(*a, fallback), Self::seq(*b, fallback)),
            x => x,
        }
    }
}

impl<A: fmt::Display> fmt::Display for EForm<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EForm::Bot => write!(f, "⊥"),
            EForm::Atom(a) => write!(f, "{a}"),
            EForm::Star(x, y) => write!(f, "({x} * {y})"),
            EForm::Or(x, y) => write!(f, "({x} \\/ {y})"),
        }
    }
}

/// Per-party event entries and per-channel transmission entries; a missing
/// key stands for `⊥`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Boundary {
    pub rmap: BTreeMap<Party, EForm<Event>>,
    pub cmap: BTreeMap<Channel, EForm<Transmission>>,
}

fn fuse<K: Ord + Clone, A: Clone>(
    x: &BTreeMap<K, EForm<A>>,
    y: &BTreeMap<K, EForm<A>>,
    f: impl Fn(EForm<A>, EForm<A>) -> EForm<A>,
) -> BTreeMap<K, EForm<A>> {
    let keys: BTreeSet<&K> = x.keys().chain(y.keys()).collect();
    keys.into_iter()
        .filter_map(|k| {
            let a = x.get(k).cloned().unwrap_or(EForm::Bot);
            let b = y.get(k).cloned().unwrap_or(EForm::Bot);
            let r = f(a, b);
            (!r.is_bot()).then(|| (k.clone(), r))
        })
        .collect()
}

impl Boundary {
    fn combine(&self, other: &Boundary, op: Op) -> Boundary {
        fn apply<A: Clone>(op: Op, a: EForm<A>, b: EForm<A>) -> EForm<A> {
            match op {
                Op::Seq => EForm::seq(a, &b),
                Op::Star => EForm::star(a, b),
                Op::Or => EForm::or(a, b),
            }
        }
        Boundary {
            rmap: fuse(&self.rmap, &other.rmap, |a, b| apply(op, a, b)),
            cmap: fuse(&self.cmap, &other.cmap, |a, b| apply(op, a, b)),
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rs: Vec<String> = self.rmap.iter().map(|(p, e)| format!("{p}: {e}")).collect();
        let cs: Vec<String> = self
            .cmap
            .iter()
            .map(|(c, e)| format!("{c}: {}", label_form(e)))
            .collect();
        write!(f, "<{{{}}}, {{{}}}>", rs.join(", "), cs.join(", "))
    }
}

fn label_form(e: &EForm<Transmission>) -> String {
    match e {
        EForm::Bot => "⊥".into(),
        EForm::Atom(t) => t.label.to_string(),
        EForm::Star(x, y) => format!("({} * {})", label_form(x), label_form(y)),
        EForm::Or(x, y) => format!("({} \\/ {})", label_form(x), label_form(y)),
    }
}

#[derive(Clone, Copy)]
enum Op {
    Seq,
    Star,
    Or,
}

/// The summary of a sub-protocol.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Summary {
    /// First events/transmissions (the backtier).
    pub back: Boundary,
    /// Last events/transmissions (the frontier).
    pub front: Boundary,
    /// Released ordering assumptions.
    pub assumes: BTreeSet<Assertion>,
    /// Race-freedom guards (transmission-level orderings).
    pub guards: BTreeSet<Assertion>,
}

/// The tree share on which each transmission occurs: the path of left/right
/// steps through the enclosing choices that have a silent branch.
pub fn share_map(g: &GlobalProtocol) -> BTreeMap<Label, TreeShare> {
    fn walk(g: &GlobalProtocol, path: &mut Vec<Side>, out: &mut BTreeMap<Label, TreeShare>) {
        match g {
            GlobalProtocol::Trans(t) => {
                out.insert(t.label.clone(), TreeShare::from_path(path));
            }
            GlobalProtocol::Choice(a, b) if a.is_silent() || b.is_silent() => {
                for (side, branch) in [(Side::Left, a), (Side::Right, b)] {
                    path.push(side);
                    walk(branch, path, out);
                    path.pop();
                }
            }
            GlobalProtocol::Seq(a, b) | GlobalProtocol::Par(a, b) | GlobalProtocol::Choice(a, b) => {
                walk(a, path, out);
                walk(b, path, out);
            }
            _ => {}
        }
    }
    let mut out = BTreeMap::new();
    walk(g, &mut Vec::new(), &mut out);
    out
}

fn share_of(shares: &BTreeMap<Label, TreeShare>, l: &Label) -> TreeShare {
    shares.get(l).cloned().unwrap_or_else(TreeShare::full)
}

/// Summarises `g`.  Assumptions, guards, `emp` and invocations contribute
/// nothing; invocations must be inlined beforehand to be analysed.
pub fn collect(g: &GlobalProtocol) -> Summary {
    collect_with(g, &share_map(g))
}

fn collect_with(g: &GlobalProtocol, shares: &BTreeMap<Label, TreeShare>) -> Summary {
    match g {
        GlobalProtocol::Trans(t) => {
            let rmap = [
                (t.sender.clone(), EForm::Atom(t.send())),
                (t.receiver.clone(), EForm::Atom(t.recv())),
            ]
            .into();
            let cmap = [(t.channel.clone(), EForm::Atom(t.clone()))].into();
            let b = Boundary { rmap, cmap };
            Summary {
                back: b.clone(),
                front: b,
                assumes: [Assertion::transmitted(t)].into(),
                guards: BTreeSet::new(),
            }
        }
        GlobalProtocol::Seq(a, b) => {
            let (s1, s2) = (collect_with(a, shares), collect_with(b, shares));
            let (assumes, guards) = merge_adjacent(&s1.front, &s2.back, shares);
            Summary {
                back: s1.back.combine(&s2.back, Op::Seq),
                front: s2.front.combine(&s1.front, Op::Seq),
                assumes: union([s1.assumes, s2.assumes, assumes]),
                guards: union([s1.guards, s2.guards, guards]),
            }
        }
        GlobalProtocol::Par(a, b) | GlobalProtocol::Choice(a, b) => {
            let op = if matches!(g, GlobalProtocol::Par(..)) { Op::Star } else { Op::Or };
            let (s1, s2) = (collect_with(a, shares), collect_with(b, shares));
            Summary {
                back: s1.back.combine(&s2.back, op),
                front: s1.front.combine(&s2.front, op),
                assumes: union([s1.assumes, s2.assumes]),
                guards: union([s1.guards, s2.guards]),
            }
        }
        _ => Summary::default(),
    }
}

fn union<const N: usize>(sets: [BTreeSet<Assertion>; N]) -> BTreeSet<Assertion> {
    sets.into_iter().flatten().collect()
}

/// Pairs a frontier with the following backtier: same-party events give
/// happens-before assumptions, same-channel transmissions give guards.
/// Every atom of the frontier entry is paired with every atom of the
/// backtier entry (fusion distributes over `∗` and `∨`).
pub fn merge_adjacent(
    front: &Boundary,
    back: &Boundary,
    shares: &BTreeMap<Label, TreeShare>,
) -> (BTreeSet<Assertion>, BTreeSet<Assertion>) {
    let mut assumes = BTreeSet::new();
    let mut guards = BTreeSet::new();
    for (p, f) in &front.rmap {
        let Some(b) = back.rmap.get(p) else { continue };
        for e1 in f.atoms() {
            for e2 in b.atoms() {
                let share = ts_and(&share_of(shares, &e1.label), &share_of(shares, &e2.label));
                if e1 == e2 || share.is_zero() {
                    continue;
                }
                let mut o = Ordering::hb(e1.clone(), e2.clone());
                if !share.is_full() {
                    o = o.with_share(share);
                }
                assumes.insert(Assertion::Ord(o));
            }
        }
    }
    for (c, f) in &front.cmap {
        let Some(b) = back.cmap.get(c) else { continue };
        for t1 in f.atoms() {
            for t2 in b.atoms() {
                if t1.label != t2.label {
                    guards.insert(Assertion::ord_t(t1.label.clone(), t2.label.clone()));
                }
            }
        }
    }
    (assumes, guards)
}

/// The transmission an assumption or guard is spliced after: the later
/// label it mentions.
pub fn anchor(a: &Assertion) -> Option<Label> {
    fn labels(a: &Assertion, out: &mut Vec<Label>) {
        match a {
            Assertion::Transmitted { label, .. } => out.push(label.clone()),
            Assertion::OrdT { from, to, .. } => out.extend([from.clone(), to.clone()]),
            Assertion::And(x, y) => {
                labels(x, out);
                labels(y, out);
            }
            Assertion::Implies(e, x) => {
                out.push(e.label.clone());
                labels(x, out);
            }
            other => out.extend(other.events().into_iter().map(|e| e.label)),
        }
    }
    let mut out = Vec::new();
    labels(a, &mut out);
    out.into_iter().max()
}

/// Refines `g`: every element of `collect(g)` is spliced right after its
/// anchor transmission.  At one anchor the order is: the transmission
/// assumption, the happens-before assumptions of the sender, those of the
/// receiver (each by ascending source label), then the guards by ascending
/// source label.  Sequence spines are kept flat.
pub fn refine_protocol(g: &GlobalProtocol) -> GlobalProtocol {
    let s = collect(g);
    let table: BTreeMap<Label, Transmission> =
        g.transmissions().into_iter().map(|t| (t.label.clone(), t)).collect();
    let mut items: BTreeMap<Label, Vec<(u8, Label, GlobalProtocol)>> = BTreeMap::new();
    let mut place = |a: &Assertion, guard: bool| {
        let Some(at) = anchor(a) else { return };
        let Some(t) = table.get(&at) else { return };
        let (rank, source) = match a {
            _ if guard => (4, source_label(a)),
            Assertion::Transmitted { .. } => (0, at.clone()),
            Assertion::Ord(o) if o.to.party == t.sender => (1, o.from.label.clone()),
            Assertion::Ord(o) if o.to.party == t.receiver => (2, o.from.label.clone()),
            _ => (3, source_label(a)),
        };
        let node = if guard { GlobalProtocol::Guard(a.clone()) } else { GlobalProtocol::Assume(a.clone()) };
        items.entry(at).or_default().push((rank, source, node));
    };
    for a in &s.assumes {
        place(a, false);
    }
    for a in &s.guards {
        place(a, true);
    }
    let items: BTreeMap<Label, Vec<GlobalProtocol>> = items
        .into_iter()
        .map(|(l, mut v)| {
            v.sort_by(|x, y| (x.0, &x.1).cmp(&(y.0, &y.1)).then_with(|| x.2.cmp(&y.2)));
            (l, v.into_iter().map(|(_, _, n)| n).collect())
        })
        .collect();
    splice(g, &items)
}

fn source_label(a: &Assertion) -> Label {
    match a {
        Assertion::OrdT { from, .. } => from.clone(),
        Assertion::Ord(o) => o.from.label.clone(),
        other => anchor(other).unwrap_or_else(|| Label::of(0)),
    }
}

fn splice(g: &GlobalProtocol, items: &BTreeMap<Label, Vec<GlobalProtocol>>) -> GlobalProtocol {
    let with_items = |t: &Transmission| {
        let mut v = vec![GlobalProtocol::Trans(t.clone())];
        v.extend(items.get(&t.label).into_iter().flatten().cloned());
        v
    };
    match g {
        GlobalProtocol::Seq(..) => GlobalProtocol::seq_all(g.seq_items().into_iter().flat_map(|x| match x {
            GlobalProtocol::Trans(t) => with_items(t),
            other => vec![splice(other, items)],
        })),
        GlobalProtocol::Trans(t) => GlobalProtocol::seq_all(with_items(t)),
        GlobalProtocol::Par(a, b) => GlobalProtocol::par(splice(a, items), splice(b, items)),
        GlobalProtocol::Choice(a, b) => GlobalProtocol::choice(splice(a, items), splice(b, items)),
        other => other.clone(),
    }
}

/// How a guard component is discharged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GuardStatus {
    /// Entailed by the orderings implied by message causality alone.
    Implicit,
    /// Entailed only once the explicit synchronisation edges are added.
    DischargedBySync,
    /// Not entailed: explicit synchronisation is required.
    NeedsSync,
}

impl fmt::Display for GuardStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GuardStatus::Implicit => "implicit",
            GuardStatus::DischargedBySync => "discharged-by-sync",
            GuardStatus::NeedsSync => "needs-sync",
        })
    }
}

/// Why a guard component has its status.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Witness {
    /// A derivation of the ordering from the store.
    Derivation(Derivation<Event>),
    /// The component holds without an ordering fact (e.g. an occurrence or
    /// a weak ordering between equal events).
    Holds,
    /// Orderings that could not be proven.
    Missing(Vec<(Event, Event)>),
}

/// One guard component with its verdict.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GuardEntry {
    /// The event-level component that was checked.
    pub guard: Assertion,
    /// The guard of the refined protocol it comes from.
    pub source: Assertion,
    /// The executions on which the component must hold.
    pub share: TreeShare,
    pub status: GuardStatus,
    pub witness: Witness,
}

/// Verdicts for all guards of a refined protocol.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GuardReport {
    pub entries: Vec<GuardEntry>,
}

impl GuardReport {
    /// Whether every guard component is entailed (with or without sync).
    pub fn race_free(&self) -> bool {
        self.entries.iter().all(|e| e.status != GuardStatus::NeedsSync)
    }

    /// The components that still need synchronisation.
    pub fn needs_sync(&self) -> Vec<&GuardEntry> {
        self.entries.iter().filter(|e| e.status == GuardStatus::NeedsSync).collect()
    }

    /// The entry for a component, if present.
    pub fn entry(&self, guard: &Assertion) -> Option<&GuardEntry> {
        self.entries.iter().find(|e| &e.guard == guard)
    }
}

/// The guards of a refined protocol in textual order.
pub fn guards_of(refined: &GlobalProtocol) -> Vec<Assertion> {
    let mut out = Vec::new();
    refined.visit(&mut |n| {
        if let GlobalProtocol::Guard(a) = n {
            out.push(a.clone());
        }
    });
    out
}

/// Checks every guard of `refined` against its assumptions, first alone and
/// then with the synchronisation edges `sync` (each `e1 ≺HB e2`).
pub fn check_race_freedom(
    refined: &GlobalProtocol,
    sync: &[(Event, Event)],
) -> Result<GuardReport, RefineError> {
    check_race_freedom_in(Mode::Auto, refined, sync)
}

/// [`check_race_freedom`] with an explicit parallelism mode.
pub fn check_race_freedom_in(
    mode: Mode,
    refined: &GlobalProtocol,
    sync: &[(Event, Event)],
) -> Result<GuardReport, RefineError> {
    let base = assumptions_of(refined).closure()?;
    let synced = if sync.is_empty() {
        base.clone()
    } else {
        let mut s = base.clone();
        for (a, b) in sync {
            if a == b {
                return Err(OrderError::SelfSync(a.to_string()).into());
            }
            s.add_fact(OrdKind::HB, a.clone(), b.clone());
        }
        s.close()?;
        s
    };
    let shares = share_map(refined);
    let mut components = Vec::new();
    for source in guards_of(refined) {
        let share = match &source {
            Assertion::OrdT { from, to, .. } => ts_and(&share_of(&shares, from), &share_of(&shares, to)),
            _ => TreeShare::full(),
        };
        let decomposed = ord_decompose(&source, refined)?;
        for c in decomposed.conjuncts() {
            components.push((c.clone(), source.clone(), share.clone()));
        }
    }
    let entries = mercurius_par::map_in(mode, &components, |(guard, source, share)| {
        let (status, witness) = if let Some(w) = discharge(&base, guard, share) {
            (GuardStatus::Implicit, w)
        } else if let Some(w) = discharge(&synced, guard, share) {
            (GuardStatus::DischargedBySync, w)
        } else {
            (GuardStatus::NeedsSync, Witness::Missing(missing(&synced, guard, share)))
        };
        GuardEntry { guard: guard.clone(), source: source.clone(), share: share.clone(), status, witness }
    });
    Ok(GuardReport { entries })
}

fn discharge(store: &OrderStore, guard: &Assertion, share: &TreeShare) -> Option<Witness> {
    if !store.entails_on(guard, share).unwrap_or(false) {
        return None;
    }
    Some(match guard {
        Assertion::Ord(o) => [o.kind, OrdKind::HB]
            .into_iter()
            .find_map(|k| store.explain(&Fact::new(k, o.from.clone(), o.to.clone())))
            .map(Witness::Derivation)
            .unwrap_or(Witness::Holds),
        _ => Witness::Holds,
    })
}

fn missing(store: &OrderStore, guard: &Assertion, share: &TreeShare) -> Vec<(Event, Event)> {
    match guard {
        Assertion::Ord(o) => vec![(o.from.clone(), o.to.clone())],
        Assertion::And(a, b) => {
            let mut v = missing(store, a, share);
            v.extend(missing(store, b, share));
            v
        }
        Assertion::Implies(_, a) => missing(store, a, share),
        _ => vec![],
    }
    .into_iter()
    .filter(|(a, b)| !store.entails_ord(OrdKind::HB, a, b, share))
    .collect()
}

/// Refines and checks many protocols (in parallel when enabled).
pub fn batch_check(
    protocols: &[GlobalProtocol],
    sync: &[(Event, Event)],
) -> Vec<Result<(GlobalProtocol, GuardReport), RefineError>> {
    batch_check_in(Mode::Auto, protocols, sync)
}

/// [`batch_check`] with an explicit parallelism mode.
pub fn batch_check_in(
    mode: Mode,
    protocols: &[GlobalProtocol],
    sync: &[(Event, Event)],
) -> Vec<Result<(GlobalProtocol, GuardReport), RefineError>> {
    mercurius_par::map_in(mode, protocols, |g| {
        let r = refine_protocol(g);
        let report = check_race_freedom_in(Mode::Sequential, &r, sync)?;
        Ok((r, report))
    })
}
