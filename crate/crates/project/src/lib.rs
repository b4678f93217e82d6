//! Projection of refined global protocols.
//!
//! * [`project_party`] keeps the actions of one party, its own event
//!   assumptions `⊕(P^i)`, and splits every guard componentwise: the party
//!   proves (`⊖`) the orderings whose target event is its own and assumes
//!   (`⊕`) the rest — cooperative proving.
//! * [`project_endpoint`] narrows a party spec to one channel.  Event
//!   assumptions about other channels become event guards `⊖(P^i)` so that
//!   the cross-channel order is preserved, and only the last event guard
//!   before each action is kept.
//! * [`project_channel`] narrows the global protocol to one channel
//!   directly, with the same event-guard treatment for every party.
//! * [`project_all`] collects the communicates-before and happens-before
//!   assumptions shared by all parties.
//!
//! All projections produce a [`Spec`], a small regular-expression-like
//! language over actions with guards and assumptions.  [`Spec::step`] and
//! [`Spec::passable`] give it an operational meaning used for execution.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use mercurius_ast::{
    ord_decompose, AstError, Assertion, Channel, Event, GlobalProtocol, Label, Msg, Ordering,
    Party, Transmission,
};
use thiserror::Error;

/// Errors raised by projections.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProjectError {
    #[error("party {0} does not take part in the protocol")]
    UnknownParty(Party),
    #[error(transparent)]
    Ast(#[from] AstError),
}

/// A projected specification over actions `A`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spec<A> {
    Emp,
    Act(A),
    Seq(Box<Spec<A>>, Box<Spec<A>>),
    Par(Box<Spec<A>>, Box<Spec<A>>),
    Or(Box<Spec<A>>, Box<Spec<A>>),
    /// A proof obligation `⊖(Ψ)`; `⊖(P^i)` is an event guard.
    Guard(Assertion),
    /// An assumption `⊕(Ψ)`.
    Assume(Assertion),
}

impl<A: Clone> Spec<A> {
    /// `x; y` with `emp` as unit, kept right-nested.
    pub fn seq(x: Self, y: Self) -> Self {
        match (x, y) {
            (Spec::Emp, y) => y,
            (x, Spec::Emp) => x,
            (Spec::Seq(a, b), y) => Spec::seq(*a, Spec::seq(*b, y)),
            (x, y) => Spec::Seq(Box::new(x), Box::new(y)),
        }
    }

    /// `x * y` with `emp` as unit.
    pub fn par(x: Self, y: Self) -> Self {
        match (x, y) {
            (Spec::Emp, y) => y,
            (x, Spec::Emp) => x,
            (x, y) => Spec::Par(Box::new(x), Box::new(y)),
        }
    }

    /// `x \/ y`; only `emp \/ emp` collapses.
    pub fn or(x: Self, y: Self) -> Self {
        match (x, y) {
            (Spec::Emp, Spec::Emp) => Spec::Emp,
            (x, y) => Spec::Or(Box::new(x), Box::new(y)),
        }
    }

    pub fn seq_all(items: impl IntoIterator<Item = Self>) -> Self {
        let v: Vec<Self> = items.into_iter().collect();
        v.into_iter().rev().fold(Spec::Emp, |acc, x| Spec::seq(x, acc))
    }

    /// All actions, left to right.
    pub fn actions(&self) -> Vec<&A> {
        match self {
            Spec::Act(a) => vec![a],
            Spec::Seq(x, y) | Spec::Par(x, y) | Spec::Or(x, y) => {
                let mut v = x.actions();
                v.extend(y.actions());
                v
            }
            _ => vec![],
        }
    }

    /// All guards and assumptions, left to right, tagged `true` for guards.
    pub fn annotations(&self) -> Vec<(bool, &Assertion)> {
        match self {
            Spec::Guard(a) => vec![(true, a)],
            Spec::Assume(a) => vec![(false, a)],
            Spec::Seq(x, y) | Spec::Par(x, y) | Spec::Or(x, y) => {
                let mut v = x.annotations();
                v.extend(y.annotations());
                v
            }
            _ => vec![],
        }
    }

    /// Whether the spec can finish without another action, given which
    /// guards are satisfied.
    pub fn passable(&self, sat: &dyn Fn(&Assertion) -> bool) -> bool {
        match self {
            Spec::Emp | Spec::Assume(_) => true,
            Spec::Guard(g) => sat(g),
            Spec::Act(_) => false,
            Spec::Seq(x, y) | Spec::Par(x, y) => x.passable(sat) && y.passable(sat),
            Spec::Or(x, y) => x.passable(sat) || y.passable(sat),
        }
    }

    /// Every action enabled now, with the residual spec after taking it.
    /// Guards in front of an action must be satisfied; alternatives stay
    /// open until an action commits to one of them.
    pub fn step(&self, sat: &dyn Fn(&Assertion) -> bool) -> Vec<(A, Spec<A>)> {
        match self {
            Spec::Emp | Spec::Assume(_) | Spec::Guard(_) => vec![],
            Spec::Act(a) => vec![(a.clone(), Spec::Emp)],
            Spec::Seq(x, y) => {
                let mut v: Vec<(A, Spec<A>)> =
                    x.step(sat).into_iter().map(|(a, r)| (a, Spec::seq(r, (**y).clone()))).collect();
                if x.passable(sat) {
                    v.extend(y.step(sat));
                }
                v
            }
            Spec::Par(x, y) => {
                let mut v: Vec<(A, Spec<A>)> =
                    x.step(sat).into_iter().map(|(a, r)| (a, Spec::par(r, (**y).clone()))).collect();
                v.extend(y.step(sat).into_iter().map(|(a, r)| (a, Spec::par((**x).clone(), r))));
                v
            }
            Spec::Or(x, y) => {
                let mut v = x.step(sat);
                v.extend(y.step(sat));
                v
            }
        }
    }
}

impl<A: Clone + fmt::Display> Spec<A> {
    /// Canonical representative: right-nested sequences without `emp`,
    /// operands of `*` and `\/` flattened and sorted by rendering.
    pub fn canonical(&self) -> Self {
        fn flatten<A: Clone>(s: &Spec<A>, par: bool, out: &mut Vec<Spec<A>>) {
            match (s, par) {
                (Spec::Par(x, y), true) | (Spec::Or(x, y), false) => {
                    flatten(x, par, out);
                    flatten(y, par, out);
                }
                _ => out.push(s.clone()),
            }
        }
        match self {
            Spec::Seq(x, y) => Spec::seq(x.canonical(), y.canonical()),
            Spec::Par(..) | Spec::Or(..) => {
                let par = matches!(self, Spec::Par(..));
                let mut items = Vec::new();
                flatten(self, par, &mut items);
                let mut items: Vec<Spec<A>> = items.iter().map(|s| s.canonical()).collect();
                items.sort_by_cached_key(|s| s.to_string());
                let join = if par { Spec::par } else { Spec::or };
                let last = items.pop().unwrap_or(Spec::Emp);
                items.into_iter().rev().fold(last, |acc, x| join(x, acc))
            }
            other => other.clone(),
        }
    }
}

impl<A: fmt::Display> fmt::Display for Spec<A> {
    /// Same concrete syntax as global protocols: `\/` binds loosest, then
    /// `*`, then `;`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn level<A>(s: &Spec<A>) -> u8 {
            match s {
                Spec::Or(..) => 1,
                Spec::Par(..) => 2,
                Spec::Seq(..) => 3,
                _ => 4,
            }
        }
        let binary = |f: &mut fmt::Formatter<'_>, x: &Spec<A>, y: &Spec<A>, op: &str| {
            let k = level(self);
            if level(x) <= k {
                write!(f, "({x})")?;
            } else {
                write!(f, "{x}")?;
            }
            write!(f, "{op}")?;
            if level(y) < k {
                write!(f, "({y})")
            } else {
                write!(f, "{y}")
            }
        };
        match self {
            Spec::Emp => write!(f, "emp"),
            Spec::Act(a) => write!(f, "{a}"),
            Spec::Seq(x, y) => binary(f, x, y, "; "),
            Spec::Par(x, y) => binary(f, x, y, " * "),
            Spec::Or(x, y) => binary(f, x, y, " \\/ "),
            Spec::Guard(a) => write!(f, "guard({a})"),
            Spec::Assume(a) => write!(f, "assume({a})"),
        }
    }
}

/// Direction of a local action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dir {
    Send,
    Recv,
}

impl Dir {
    fn symbol(self) -> char {
        match self {
            Dir::Send => '!',
            Dir::Recv => '?',
        }
    }
}

/// A send `!c<msg>` or receive `?c<msg>` of one party.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalAction {
    pub dir: Dir,
    pub chan: Channel,
    pub msg: Msg,
    pub label: Label,
}

impl fmt::Display for LocalAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}<{}>", self.dir.symbol(), self.chan, self.msg)
    }
}

/// A send `!msg` or receive `?msg` on an implicit channel.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EndpointAction {
    pub dir: Dir,
    pub msg: Msg,
    pub label: Label,
}

impl fmt::Display for EndpointAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.dir.symbol(), self.msg)
    }
}

/// The specification of one party.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalSpec {
    pub party: Party,
    pub body: Spec<LocalAction>,
    /// The channel of every transmission of the global protocol.
    pub chans: BTreeMap<Label, Channel>,
}

impl LocalSpec {
    /// The channels the party acts on.
    pub fn channels(&self) -> BTreeSet<Channel> {
        self.body.actions().into_iter().map(|a| a.chan.clone()).collect()
    }
}

/// The specification of one party on one channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EndpointSpec {
    pub party: Party,
    pub channel: Channel,
    pub body: Spec<EndpointAction>,
}

/// The transmissions of one channel with their annotations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelSpec {
    pub channel: Channel,
    pub body: Spec<Transmission>,
}

/// The ordering assumptions shared by all parties; the body contains only
/// [`Spec::Assume`] nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SharedSpec {
    pub body: Spec<Transmission>,
}

fn chan_table(g: &GlobalProtocol) -> BTreeMap<Label, Channel> {
    g.transmissions().into_iter().map(|t| (t.label, t.channel)).collect()
}

/// The party whose event an assertion component constrains last.
fn target(a: &Assertion) -> Option<Party> {
    match a {
        Assertion::Ord(o) => Some(o.to.party.clone()),
        Assertion::Occ(e) | Assertion::Not(e) => Some(e.party.clone()),
        Assertion::Implies(e, x) => target(x).or_else(|| Some(e.party.clone())),
        Assertion::And(_, y) => target(y),
        Assertion::Transmitted { receiver, .. } => Some(receiver.clone()),
        Assertion::OrdT { .. } => None,
    }
}

/// The label a spec annotation is attached to (the later one it mentions).
fn anchor_label(a: &Assertion) -> Option<Label> {
    match a {
        Assertion::OrdT { from, to, .. } => Some(from.clone().max(to.clone())),
        Assertion::Transmitted { label, .. } => Some(label.clone()),
        Assertion::Ord(o) => Some(o.to.label.clone()),
        other => other.events().into_iter().map(|e| e.label).max(),
    }
}

/// Projects a refined protocol onto party `p`.  A protocol without
/// transmissions projects to `emp` for every party.
pub fn project_party(g: &GlobalProtocol, p: &Party) -> Result<LocalSpec, ProjectError> {
    let parties = g.parties();
    if !parties.is_empty() && !parties.contains(p) {
        return Err(ProjectError::UnknownParty(p.clone()));
    }
    let body = party_rec(g, g, p)?;
    Ok(LocalSpec { party: p.clone(), body, chans: chan_table(g) })
}

fn party_rec(
    whole: &GlobalProtocol,
    g: &GlobalProtocol,
    p: &Party,
) -> Result<Spec<LocalAction>, ProjectError> {
    Ok(match g {
        GlobalProtocol::Trans(t) => {
            let dir = if &t.sender == p {
                Dir::Send
            } else if &t.receiver == p {
                Dir::Recv
            } else {
                return Ok(Spec::Emp);
            };
            Spec::Act(LocalAction { dir, chan: t.channel.clone(), msg: t.msg.clone(), label: t.label.clone() })
        }
        GlobalProtocol::Seq(a, b) => Spec::seq(party_rec(whole, a, p)?, party_rec(whole, b, p)?),
        GlobalProtocol::Par(a, b) => Spec::par(party_rec(whole, a, p)?, party_rec(whole, b, p)?),
        GlobalProtocol::Choice(a, b) => {
            let (x, y) = (party_rec(whole, a, p)?, party_rec(whole, b, p)?);
            if x.actions().is_empty() && y.actions().is_empty() {
                Spec::Emp
            } else {
                Spec::or(x, y)
            }
        }
        GlobalProtocol::Assume(Assertion::Transmitted { sender, receiver, label }) => {
            if sender == p || receiver == p {
                Spec::Assume(Assertion::Occ(Event::new(p.clone(), label.clone())))
            } else {
                Spec::Emp
            }
        }
        GlobalProtocol::Assume(a @ (Assertion::Occ(_) | Assertion::Not(_))) => {
            if target(a).as_ref() == Some(p) {
                Spec::Assume(a.clone())
            } else {
                Spec::Emp
            }
        }
        // Orderings between events are shared by all parties.
        GlobalProtocol::Assume(_) => Spec::Emp,
        GlobalProtocol::Guard(a) => {
            let d = ord_decompose(a, whole)?;
            Spec::seq_all(d.conjuncts().into_iter().map(|c| {
                if target(c).as_ref() == Some(p) {
                    Spec::Guard(c.clone())
                } else {
                    Spec::Assume(c.clone())
                }
            }))
        }
        GlobalProtocol::Emp | GlobalProtocol::Invoke(_) => Spec::Emp,
    })
}

/// Narrows a party spec to channel `c`.  A channel the party does not use
/// yields an `emp` body.
pub fn project_endpoint(l: &LocalSpec, c: &Channel) -> EndpointSpec {
    let on_c = |label: &Label| l.chans.get(label) == Some(c);
    let body = endpoint_rec(&l.body, c, &on_c);
    let party = l.party.clone();
    let (body, _) = prune(&body, BTreeSet::new(), &|_| vec![party.clone()]);
    EndpointSpec { party: l.party.clone(), channel: c.clone(), body }
}

fn endpoint_rec(
    s: &Spec<LocalAction>,
    c: &Channel,
    on_c: &dyn Fn(&Label) -> bool,
) -> Spec<EndpointAction> {
    match s {
        Spec::Emp => Spec::Emp,
        Spec::Act(a) if &a.chan == c => {
            Spec::Act(EndpointAction { dir: a.dir, msg: a.msg.clone(), label: a.label.clone() })
        }
        Spec::Act(_) => Spec::Emp,
        Spec::Seq(x, y) => Spec::seq(endpoint_rec(x, c, on_c), endpoint_rec(y, c, on_c)),
        Spec::Par(x, y) => Spec::par(endpoint_rec(x, c, on_c), endpoint_rec(y, c, on_c)),
        Spec::Or(x, y) => Spec::or(endpoint_rec(x, c, on_c), endpoint_rec(y, c, on_c)),
        Spec::Assume(Assertion::Occ(e)) => {
            if on_c(&e.label) {
                Spec::Assume(Assertion::Occ(e.clone()))
            } else {
                Spec::Guard(Assertion::Occ(e.clone()))
            }
        }
        Spec::Assume(a) | Spec::Guard(a) => {
            if anchor_label(a).is_some_and(|l| on_c(&l)) {
                s_like(s, a)
            } else {
                Spec::Emp
            }
        }
    }
}

fn s_like<A, B>(s: &Spec<A>, a: &Assertion) -> Spec<B> {
    match s {
        Spec::Guard(_) => Spec::Guard(a.clone()),
        _ => Spec::Assume(a.clone()),
    }
}

/// Drops redundant event guards, scanning backwards: an event guard
/// `⊖(P^i)` is kept only if an action of `P` follows it with no other kept
/// guard of `P` in between.  `need` holds the parties with a pending
/// action; the returned set is the pending parties at the front of `s`.
fn prune<A: Clone>(
    s: &Spec<A>,
    need: BTreeSet<Party>,
    actors: &dyn Fn(&A) -> Vec<Party>,
) -> (Spec<A>, BTreeSet<Party>) {
    match s {
        Spec::Act(a) => {
            let mut need = need;
            need.extend(actors(a));
            (s.clone(), need)
        }
        Spec::Guard(Assertion::Occ(e)) => {
            let mut need = need;
            if need.remove(&e.party) {
                (s.clone(), need)
            } else {
                (Spec::Emp, need)
            }
        }
        Spec::Seq(x, y) => {
            let (y2, need) = prune(y, need, actors);
            let (x2, need) = prune(x, need, actors);
            (Spec::seq(x2, y2), need)
        }
        Spec::Par(x, y) | Spec::Or(x, y) => {
            let (x2, mut n1) = prune(x, need.clone(), actors);
            let (y2, n2) = prune(y, need, actors);
            n1.extend(n2);
            let joined = if matches!(s, Spec::Par(..)) { Spec::par(x2, y2) } else { Spec::or(x2, y2) };
            (joined, n1)
        }
        other => (other.clone(), need),
    }
}

/// Projects a refined protocol onto channel `c`, independently of the
/// party projections.  An unused channel yields an `emp` body.
pub fn project_channel(g: &GlobalProtocol, c: &Channel) -> ChannelSpec {
    let chans = chan_table(g);
    let on_c = |label: &Label| chans.get(label) == Some(c);
    let body = channel_rec(g, c, &on_c);
    let (body, _) = prune(&body, BTreeSet::new(), &|t: &Transmission| {
        vec![t.sender.clone(), t.receiver.clone()]
    });
    ChannelSpec { channel: c.clone(), body }
}

fn channel_rec(
    g: &GlobalProtocol,
    c: &Channel,
    on_c: &dyn Fn(&Label) -> bool,
) -> Spec<Transmission> {
    match g {
        GlobalProtocol::Trans(t) if &t.channel == c => Spec::Act(t.clone()),
        GlobalProtocol::Seq(a, b) => Spec::seq(channel_rec(a, c, on_c), channel_rec(b, c, on_c)),
        GlobalProtocol::Par(a, b) => Spec::par(channel_rec(a, c, on_c), channel_rec(b, c, on_c)),
        GlobalProtocol::Choice(a, b) => Spec::or(channel_rec(a, c, on_c), channel_rec(b, c, on_c)),
        GlobalProtocol::Assume(a @ Assertion::Transmitted { sender, receiver, label }) => {
            if on_c(label) {
                Spec::Assume(a.clone())
            } else {
                Spec::seq(
                    Spec::Guard(Assertion::Occ(Event::new(sender.clone(), label.clone()))),
                    Spec::Guard(Assertion::Occ(Event::new(receiver.clone(), label.clone()))),
                )
            }
        }
        GlobalProtocol::Assume(a) | GlobalProtocol::Guard(a) => {
            if anchor_label(a).is_some_and(|l| on_c(&l)) {
                if matches!(g, GlobalProtocol::Guard(_)) {
                    Spec::Guard(a.clone())
                } else {
                    Spec::Assume(a.clone())
                }
            } else {
                Spec::Emp
            }
        }
        _ => Spec::Emp,
    }
}

/// The orderings shared by all parties: the communicates-before fact of
/// every transmission assumption and every ordering assumption, in
/// protocol order.
pub fn project_all(g: &GlobalProtocol) -> SharedSpec {
    fn rec(g: &GlobalProtocol) -> Spec<Transmission> {
        match g {
            GlobalProtocol::Seq(a, b) => Spec::seq(rec(a), rec(b)),
            GlobalProtocol::Par(a, b) => Spec::par(rec(a), rec(b)),
            GlobalProtocol::Choice(a, b) => Spec::or(rec(a), rec(b)),
            GlobalProtocol::Assume(Assertion::Transmitted { sender, receiver, label }) => {
                Spec::Assume(Assertion::Ord(Ordering::cb(
                    Event::new(sender.clone(), label.clone()),
                    Event::new(receiver.clone(), label.clone()),
                )))
            }
            GlobalProtocol::Assume(a @ Assertion::Ord(_)) => Spec::Assume(a.clone()),
            _ => Spec::Emp,
        }
    }
    SharedSpec { body: rec(g) }
}

/// Every endpoint spec of a refined protocol: party → channel → spec.
pub fn project_endpoints(
    g: &GlobalProtocol,
) -> Result<BTreeMap<Party, BTreeMap<Channel, EndpointSpec>>, ProjectError> {
    let mut out = BTreeMap::new();
    for p in g.parties() {
        let l = project_party(g, &p)?;
        let eps = l.channels().into_iter().map(|c| (c.clone(), project_endpoint(&l, &c))).collect();
        out.insert(p, eps);
    }
    Ok(out)
}
