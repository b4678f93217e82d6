//! The ordering-constraint store.
//!
//! A store holds occurred nodes and ordering facts (CB, HB, WHB), each
//! annotated with the tree share of executions in which it holds (full by
//! default).  [`OrderStore::close`] saturates the facts with the sound
//! propagation rules
//!
//! | rule      | premises              | conclusion |
//! |-----------|-----------------------|------------|
//! | `HB-HB`   | `a ≺HB b`, `b ≺HB c`  | `a ≺HB c`  |
//! | `CB-HB`   | `a ≺CB b`, `b ≺HB c`  | `a ≺HB c`  |
//! | `HB-WHB`  | `a ≺HB b`, `b ⪯HB c`  | `a ≺HB c`  |
//! | `WHB-HB`  | `a ⪯HB b`, `b ≺HB c`  | `a ≺HB c`  |
//! | `WHB-WHB` | `a ⪯HB b`, `b ⪯HB c`  | `a ⪯HB c`  |
//!
//! Shares meet along a chain and join across derivations of the same fact.
//! The tempting rule `a ≺HB b`, `b ≺CB c` ⊢ `a ≺HB c` is deliberately absent:
//! the receiver of a message on a racy channel may consume an earlier message
//! instead, so the conclusion does not hold when proving race freedom.
//!
//! A derived `a ≺HB a` means the assumptions are contradictory and is
//! reported as [`OrderError::InconsistentStore`].  Every derived fact keeps
//! the rule and premises of its first derivation, so [`OrderStore::explain`]
//! can print a witness tree.
//!
//! The store is generic in its node type so that the modular analysis can
//! mix concrete events with symbolic frontier slots; [`OrderStore<Event>`]
//! additionally evaluates [`Assertion`]s.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Debug, Display};

use mercurius_ast::{Assertion, Event, GlobalProtocol, OrdKind, Ordering};
use mercurius_treeshare::{ts_and, ts_or, TreeShare};
use thiserror::Error;

/// Errors raised by the store.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum OrderError {
    /// The facts imply that a node happens before itself.
    #[error("inconsistent orderings: {0} happens before itself")]
    InconsistentStore(String),
    /// A synchronisation edge from a node to itself.
    #[error("a synchronisation edge needs two distinct events, got {0} twice")]
    SelfSync(String),
    /// Entailment was asked for a transmission-level ordering.
    #[error("transmission-level ordering {0} must be decomposed before evaluation")]
    Undecomposed(String),
}

/// A propagation rule, or `Given` for a fact supplied by the user.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    Given,
    HbHb,
    CbHb,
    HbWhb,
    WhbHb,
    WhbWhb,
}

impl Rule {
    /// The rule applicable to premises of the given kinds, with the kind of
    /// its conclusion.
    pub fn compose(first: OrdKind, second: OrdKind) -> Option<(Rule, OrdKind)> {
        use OrdKind::*;
        match (first, second) {
            (HB, HB) => Some((Rule::HbHb, HB)),
            (CB, HB) => Some((Rule::CbHb, HB)),
            (HB, WHB) => Some((Rule::HbWhb, HB)),
            (WHB, HB) => Some((Rule::WhbHb, HB)),
            (WHB, WHB) => Some((Rule::WhbWhb, WHB)),
            // HB∘CB, CB∘CB, CB∘WHB and WHB∘CB are not sound.
            _ => None,
        }
    }
}

impl Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Given => "given",
            Rule::HbHb => "HB-HB",
            Rule::CbHb => "CB-HB",
            Rule::HbWhb => "HB-WHB",
            Rule::WhbHb => "WHB-HB",
            Rule::WhbWhb => "WHB-WHB",
        })
    }
}

/// An ordering between two nodes, without its share.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fact<N> {
    pub kind: OrdKind,
    pub from: N,
    pub to: N,
}

impl<N> Fact<N> {
    pub fn new(kind: OrdKind, from: N, to: N) -> Self {
        Fact { kind, from, to }
    }
}

impl<N: Display> Display for Fact<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.from, self.kind.symbol(), self.to)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Entry<N> {
    share: TreeShare,
    rule: Rule,
    premises: Option<(Fact<N>, Fact<N>)>,
}

/// A derivation tree witnessing a fact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation<N> {
    pub fact: Fact<N>,
    pub share: TreeShare,
    pub rule: Rule,
    pub premises: Vec<Derivation<N>>,
}

impl<N> Derivation<N> {
    /// The rules used, in post-order (premises before conclusions).
    pub fn rules(&self) -> Vec<Rule> {
        let mut out: Vec<Rule> = self.premises.iter().flat_map(|p| p.rules()).collect();
        out.push(self.rule);
        out
    }
}

impl<N: Display> Derivation<N> {
    fn render(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        write!(f, "{:indent$}{}", "", self.fact, indent = depth * 2)?;
        if !self.share.is_full() {
            write!(f, " @{}", self.share)?;
        }
        writeln!(f, "    [{}]", self.rule)?;
        for p in &self.premises {
            p.render(f, depth + 1)?;
        }
        Ok(())
    }
}

impl<N: Display> Display for Derivation<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.render(f, 0)
    }
}

/// Occurred nodes plus ordering facts, and their closure once computed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderStore<N: Ord = Event> {
    occurred: BTreeSet<N>,
    facts: BTreeMap<Fact<N>, TreeShare>,
    closed: Option<BTreeMap<Fact<N>, Entry<N>>>,
}

impl<N: Ord> Default for OrderStore<N> {
    fn default() -> Self {
        OrderStore { occurred: BTreeSet::new(), facts: BTreeMap::new(), closed: None }
    }
}

impl<N: Ord + Clone + Display + Debug> OrderStore<N> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records that a node has occurred.
    pub fn add_occurred(&mut self, n: N) {
        self.occurred.insert(n);
    }

    /// Adds a fact holding on all executions.  Invalidates the closure.
    pub fn add_fact(&mut self, kind: OrdKind, from: N, to: N) {
        self.add_fact_shared(kind, from, to, TreeShare::full());
    }

    /// Adds a fact holding on the executions described by `share`; a second
    /// addition of the same fact joins the shares.  Zero shares are ignored.
    pub fn add_fact_shared(&mut self, kind: OrdKind, from: N, to: N, share: TreeShare) {
        if share.is_zero() {
            return;
        }
        let slot = self.facts.entry(Fact::new(kind, from, to)).or_insert_with(TreeShare::zero);
        *slot = ts_or(slot, &share);
        self.closed = None;
    }

    pub fn occurred(&self) -> &BTreeSet<N> {
        &self.occurred
    }

    /// The given facts with their shares.
    pub fn facts(&self) -> impl Iterator<Item = (&Fact<N>, &TreeShare)> {
        self.facts.iter()
    }

    pub fn is_closed(&self) -> bool {
        self.closed.is_some()
    }

    /// Saturates the facts (no-op if already closed).
    pub fn close(&mut self) -> Result<(), OrderError> {
        if self.closed.is_none() {
            self.closed = Some(saturate(&self.facts)?);
        }
        Ok(())
    }

    /// A closed copy of the store.
    pub fn closure(&self) -> Result<Self, OrderError> {
        let mut s = self.clone();
        s.close()?;
        Ok(s)
    }

    /// A closed copy with the extra happens-before edge `e1 ≺HB e2`, the
    /// static abstraction of a notify/wait pair.
    pub fn add_sync(&self, e1: N, e2: N) -> Result<Self, OrderError> {
        if e1 == e2 {
            return Err(OrderError::SelfSync(e1.to_string()));
        }
        let mut s = self.clone();
        s.add_fact(OrdKind::HB, e1, e2);
        s.close()?;
        Ok(s)
    }

    fn closed(&self) -> &BTreeMap<Fact<N>, Entry<N>> {
        self.closed.as_ref().expect("store must be closed before querying; call close()")
    }

    /// All facts of the closure with their shares.
    ///
    /// # Panics
    /// Panics if the store has not been closed.
    pub fn closed_facts(&self) -> BTreeMap<Fact<N>, TreeShare> {
        self.closed().iter().map(|(f, e)| (f.clone(), e.share.clone())).collect()
    }

    /// The share on which the closed fact holds (zero if it does not).
    ///
    /// # Panics
    /// Panics if the store has not been closed.
    pub fn share_of(&self, kind: OrdKind, from: &N, to: &N) -> TreeShare {
        self.closed()
            .get(&Fact::new(kind, from.clone(), to.clone()))
            .map(|e| e.share.clone())
            .unwrap_or_else(TreeShare::zero)
    }

    /// Whether `from ≺kind to` holds on (at least) the executions `share`.
    /// A weak ordering is also satisfied by equal nodes or a strict one; a
    /// strict ordering is never satisfied by a weak fact.
    ///
    /// # Panics
    /// Panics if the store has not been closed.
    pub fn entails_ord(&self, kind: OrdKind, from: &N, to: &N, share: &TreeShare) -> bool {
        let held = match kind {
            OrdKind::WHB => {
                if from == to {
                    return true;
                }
                ts_or(&self.share_of(OrdKind::WHB, from, to), &self.share_of(OrdKind::HB, from, to))
            }
            k => self.share_of(k, from, to),
        };
        share.le(&held)
    }

    /// The derivation of a closed fact, if it holds.
    ///
    /// # Panics
    /// Panics if the store has not been closed.
    pub fn explain(&self, fact: &Fact<N>) -> Option<Derivation<N>> {
        let closed = self.closed();
        let e = closed.get(fact)?;
        let premises = match &e.premises {
            Some((a, b)) => vec![self.explain(a)?, self.explain(b)?],
            None => vec![],
        };
        Some(Derivation { fact: fact.clone(), share: e.share.clone(), rule: e.rule, premises })
    }
}

/// Worklist saturation: each time a fact is added or its share grows, it is
/// composed with the facts adjacent to it on both sides.
fn saturate<N: Ord + Clone + Display>(
    given: &BTreeMap<Fact<N>, TreeShare>,
) -> Result<BTreeMap<Fact<N>, Entry<N>>, OrderError> {
    let mut sat = Saturator {
        closed: BTreeMap::new(),
        succ: BTreeMap::new(),
        pred: BTreeMap::new(),
        work: VecDeque::new(),
    };
    for (f, s) in given {
        sat.insert(f.clone(), s.clone(), Rule::Given, None)?;
    }
    while let Some(f) = sat.work.pop_front() {
        let share = sat.closed[&f].share.clone();
        let mut derived = Vec::new();
        // `f` as the left premise.
        for (k2, c) in sat.succ.get(&f.to).into_iter().flatten() {
            if let Some((rule, kind)) = Rule::compose(f.kind, *k2) {
                let g = Fact::new(*k2, f.to.clone(), c.clone());
                let s = ts_and(&share, &sat.closed[&g].share);
                derived.push((Fact::new(kind, f.from.clone(), c.clone()), s, rule, (f.clone(), g)));
            }
        }
        // `f` as the right premise.
        for (k1, a) in sat.pred.get(&f.from).into_iter().flatten() {
            if let Some((rule, kind)) = Rule::compose(*k1, f.kind) {
                let g = Fact::new(*k1, a.clone(), f.from.clone());
                let s = ts_and(&sat.closed[&g].share, &share);
                derived.push((Fact::new(kind, a.clone(), f.to.clone()), s, rule, (g, f.clone())));
            }
        }
        for (fact, s, rule, prem) in derived {
            sat.insert(fact, s, rule, Some(prem))?;
        }
    }
    Ok(sat.closed)
}

struct Saturator<N: Ord> {
    closed: BTreeMap<Fact<N>, Entry<N>>,
    /// `succ[a]` holds `(kind, b)` for every closed fact `a ≺kind b`.
    succ: BTreeMap<N, BTreeSet<(OrdKind, N)>>,
    /// `pred[b]` holds `(kind, a)` for every closed fact `a ≺kind b`.
    pred: BTreeMap<N, BTreeSet<(OrdKind, N)>>,
    work: VecDeque<Fact<N>>,
}

impl<N: Ord + Clone + Display> Saturator<N> {
    fn insert(
        &mut self,
        fact: Fact<N>,
        share: TreeShare,
        rule: Rule,
        premises: Option<(Fact<N>, Fact<N>)>,
    ) -> Result<(), OrderError> {
        if share.is_zero() {
            return Ok(());
        }
        if fact.kind == OrdKind::HB && fact.from == fact.to {
            return Err(OrderError::InconsistentStore(fact.from.to_string()));
        }
        match self.closed.get_mut(&fact) {
            Some(e) => {
                let joined = ts_or(&e.share, &share);
                if joined != e.share {
                    e.share = joined;
                    self.work.push_back(fact);
                }
            }
            None => {
                self.succ.entry(fact.from.clone()).or_default().insert((fact.kind, fact.to.clone()));
                self.pred.entry(fact.to.clone()).or_default().insert((fact.kind, fact.from.clone()));
                self.closed.insert(fact.clone(), Entry { share, rule, premises });
                self.work.push_back(fact);
            }
        }
        Ok(())
    }
}

impl OrderStore<Event> {
    /// Adds an event-level ordering (its share defaults to full).
    pub fn add_ordering(&mut self, o: &Ordering) {
        let share = o.share.clone().unwrap_or_else(TreeShare::full);
        self.add_fact_shared(o.kind, o.from.clone(), o.to.clone(), share);
    }

    /// Loads an assumption: occurrences, orderings and transmission
    /// assumptions (both events occurred, send communicates-before receive).
    pub fn assume(&mut self, a: &Assertion) {
        match a {
            Assertion::Occ(e) => self.add_occurred(e.clone()),
            Assertion::Ord(o) => self.add_ordering(o),
            Assertion::And(x, y) => {
                self.assume(x);
                self.assume(y);
            }
            Assertion::Transmitted { sender, receiver, label } => {
                let s = Event::new(sender.clone(), label.clone());
                let r = Event::new(receiver.clone(), label.clone());
                self.add_occurred(s.clone());
                self.add_occurred(r.clone());
                self.add_fact(OrdKind::CB, s, r);
            }
            // Negations, implications and transmission-level orderings carry
            // no positive facts.
            Assertion::Not(_) | Assertion::Implies(..) | Assertion::OrdT { .. } => {}
        }
    }

    /// Whether the closed store entails the assertion on all executions.
    pub fn entails(&self, a: &Assertion) -> Result<bool, OrderError> {
        self.entails_on(a, &TreeShare::full())
    }

    /// Whether the closed store entails the assertion on the executions
    /// described by `share` (an ordering's own share, if any, takes
    /// precedence).
    ///
    /// # Panics
    /// Panics if the store has not been closed.
    pub fn entails_on(&self, a: &Assertion, share: &TreeShare) -> Result<bool, OrderError> {
        Ok(match a {
            Assertion::Occ(e) => self.occurred.contains(e),
            Assertion::Not(e) => !self.occurred.contains(e),
            Assertion::Ord(o) => {
                let need = o.share.clone().unwrap_or_else(|| share.clone());
                self.entails_ord(o.kind, &o.from, &o.to, &need)
            }
            Assertion::And(x, y) => self.entails_on(x, share)? && self.entails_on(y, share)?,
            Assertion::Implies(e, x) => !self.occurred.contains(e) || self.entails_on(x, share)?,
            Assertion::Transmitted { sender, receiver, label } => {
                let s = Event::new(sender.clone(), label.clone());
                let r = Event::new(receiver.clone(), label.clone());
                self.occurred.contains(&s)
                    && self.occurred.contains(&r)
                    && self.entails_ord(OrdKind::CB, &s, &r, share)
            }
            Assertion::OrdT { .. } => return Err(OrderError::Undecomposed(a.to_string())),
        })
    }
}

/// The (unclosed) store of all assumptions of a refined protocol.  Facts of
/// every choice branch are loaded together: they concern distinct events, so
/// strengthening the state with all of them is safe.
pub fn assumptions_of(g: &GlobalProtocol) -> OrderStore<Event> {
    let mut s = OrderStore::new();
    g.visit(&mut |n| {
        if let GlobalProtocol::Assume(a) = n {
            s.assume(a);
        }
    });
    s
}
