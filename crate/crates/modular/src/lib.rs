//! Modular protocols: parameterised definitions, instantiation with
//! hierarchical labels, the pre-context synchronisation condition and the
//! self-containedness check for tail recursion.
//!
//! A definition `def H(A,B;c) = body` is analysed against a *symbolic*
//! previous state `F`: `F.K(P)` stands for the last event of party `P`
//! before the instance and `F.Γ(c)` for the last transmission on channel
//! `c`.  Fusing `F` with the backtier of the body releases the assumptions
//! `F.K(P) ≺HB e` and raises the guards `F.Γ(c) ≺HB t`.  For every guard
//! [`derive_presync`] searches the ancestors of its target for frontier
//! slots and proposes weak happens-before edges `slot ⪯HB F.K(P)` that, if
//! supplied by the usage context, would discharge it.  The resulting
//! [`PreSyncCondition`] is evaluated at a concrete invocation site by
//! [`check_usage`], and at the recursive call of a tail-recursive
//! definition by [`check_recursion`].
//!
//! [`instantiate`] inlines invocations: the parties and channels are
//! substituted and every label of the instance is prefixed with the label
//! of the invocation site, so `H0(B,C;c)@2` contributes the label `2#1`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use mercurius_ast::{
    Assertion, Channel, Event, GlobalProtocol, Invoke, Label, OrdKind, Ordering, Party,
    ProtocolDef, ProtocolFile, Transmission,
};
use mercurius_orderings::{assumptions_of, Fact, OrderError, OrderStore};
use mercurius_refine::{collect, refine_protocol, share_map, Boundary};
use thiserror::Error;

/// Errors raised by the modular analysis.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ModularError {
    #[error("unknown protocol definition `{0}`")]
    UnknownDef(String),
    #[error("`{name}` expects {expected}, found {found}")]
    ArityMismatch { name: String, expected: String, found: String },
    /// A self-invocation outside tail position, or mutual recursion.
    #[error("unsupported recursion in `{0}`: only tail self-recursion is allowed")]
    UnboundedRecursion(String),
    #[error(transparent)]
    Order(#[from] OrderError),
}

/// A validated table of protocol definitions.
#[derive(Clone, Debug, Default)]
pub struct Library {
    defs: BTreeMap<String, ProtocolDef>,
}

impl Library {
    /// Builds the table, checking that every invocation names a known
    /// definition with the right arity and that recursion is tail
    /// self-recursion only.
    pub fn new(defs: impl IntoIterator<Item = ProtocolDef>) -> Result<Self, ModularError> {
        let lib = Library { defs: defs.into_iter().map(|d| (d.name.clone(), d)).collect() };
        let mut calls: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for d in lib.defs.values() {
            let mut invokes = Vec::new();
            d.body.visit(&mut |g| {
                if let GlobalProtocol::Invoke(i) = g {
                    invokes.push(i);
                }
            });
            for i in invokes {
                let callee = lib.get(&i.name)?;
                if i.parties.len() != callee.parties.len() || i.channels.len() != callee.channels.len() {
                    return Err(ModularError::ArityMismatch {
                        name: i.name.clone(),
                        expected: format!(
                            "{} parties and {} channels",
                            callee.parties.len(),
                            callee.channels.len()
                        ),
                        found: format!("{} parties and {} channels", i.parties.len(), i.channels.len()),
                    });
                }
                if i.name != d.name {
                    calls.entry(d.name.as_str()).or_default().insert(callee.name.as_str());
                }
            }
            if !self_calls_in_tail(&d.body, &d.name) {
                return Err(ModularError::UnboundedRecursion(d.name.clone()));
            }
        }
        // Mutual recursion: a cycle in the call graph without self-loops.
        for start in lib.defs.keys() {
            let mut stack: Vec<&str> = calls.get(start.as_str()).into_iter().flatten().copied().collect();
            let mut seen = BTreeSet::new();
            while let Some(n) = stack.pop() {
                if n == start {
                    return Err(ModularError::UnboundedRecursion(start.clone()));
                }
                if seen.insert(n) {
                    stack.extend(calls.get(n).into_iter().flatten().copied());
                }
            }
        }
        Ok(lib)
    }

    /// The definitions of a parsed file.
    pub fn from_file(file: &ProtocolFile) -> Result<Self, ModularError> {
        Self::new(file.defs.iter().cloned())
    }

    pub fn get(&self, name: &str) -> Result<&ProtocolDef, ModularError> {
        self.defs.get(name).ok_or_else(|| ModularError::UnknownDef(name.to_string()))
    }

    pub fn defs(&self) -> impl Iterator<Item = &ProtocolDef> {
        self.defs.values()
    }
}

/// Whether every self-invocation of `name` sits in tail position: reached
/// only through the right operand of `;` and the branches of `\/`.
fn self_calls_in_tail(g: &GlobalProtocol, name: &str) -> bool {
    fn mentions(g: &GlobalProtocol, name: &str) -> bool {
        let mut found = false;
        g.visit(&mut |x| {
            if let GlobalProtocol::Invoke(i) = x {
                found |= i.name == name;
            }
        });
        found
    }
    match g {
        GlobalProtocol::Seq(a, b) => !mentions(a, name) && self_calls_in_tail(b, name),
        GlobalProtocol::Choice(a, b) => self_calls_in_tail(a, name) && self_calls_in_tail(b, name),
        GlobalProtocol::Par(..) => !mentions(g, name),
        _ => true,
    }
}

/// A substitution of a definition's parameters by actual arguments.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Subst {
    pub parties: BTreeMap<Party, Party>,
    pub channels: BTreeMap<Channel, Channel>,
}

impl Subst {
    /// Maps the parameters of `def` to the given arguments.
    pub fn new(def: &ProtocolDef, parties: &[Party], channels: &[Channel]) -> Result<Self, ModularError> {
        if parties.len() != def.parties.len() || channels.len() != def.channels.len() {
            return Err(ModularError::ArityMismatch {
                name: def.name.clone(),
                expected: format!("{} parties and {} channels", def.parties.len(), def.channels.len()),
                found: format!("{} parties and {} channels", parties.len(), channels.len()),
            });
        }
        Ok(Subst {
            parties: def.parties.iter().cloned().zip(parties.iter().cloned()).collect(),
            channels: def.channels.iter().cloned().zip(channels.iter().cloned()).collect(),
        })
    }

    /// The substitution performed by an invocation of `def`.
    pub fn for_invoke(def: &ProtocolDef, inv: &Invoke) -> Result<Self, ModularError> {
        Self::new(def, &inv.parties, &inv.channels)
    }

    pub fn party(&self, p: &Party) -> Party {
        self.parties.get(p).cloned().unwrap_or_else(|| p.clone())
    }

    pub fn channel(&self, c: &Channel) -> Channel {
        self.channels.get(c).cloned().unwrap_or_else(|| c.clone())
    }
}

/// Substitutes parties and prefixes labels with `root`.
struct Renaming<'a> {
    subst: &'a Subst,
    root: &'a [u32],
}

impl Renaming<'_> {
    fn label(&self, l: &Label) -> Label {
        l.prefixed(self.root)
    }

    fn event(&self, e: &Event) -> Event {
        Event::new(self.subst.party(&e.party), self.label(&e.label))
    }

    fn assertion(&self, a: &Assertion) -> Assertion {
        match a {
            Assertion::Occ(e) => Assertion::Occ(self.event(e)),
            Assertion::Not(e) => Assertion::Not(self.event(e)),
            Assertion::Ord(o) => Assertion::Ord(Ordering {
                kind: o.kind,
                from: self.event(&o.from),
                to: self.event(&o.to),
                share: o.share.clone(),
            }),
            Assertion::And(x, y) => Assertion::and(self.assertion(x), self.assertion(y)),
            Assertion::Implies(e, x) => Assertion::Implies(self.event(e), Box::new(self.assertion(x))),
            Assertion::OrdT { kind, from, to } => {
                Assertion::OrdT { kind: *kind, from: self.label(from), to: self.label(to) }
            }
            Assertion::Transmitted { sender, receiver, label } => Assertion::Transmitted {
                sender: self.subst.party(sender),
                receiver: self.subst.party(receiver),
                label: self.label(label),
            },
        }
    }
}

/// Instantiates definition `name` with the given arguments under label
/// root `root`, inlining every invocation.  Self-invocations are unrolled
/// `unroll` times; beyond that they become `emp`.
pub fn instantiate(
    lib: &Library,
    name: &str,
    parties: &[Party],
    channels: &[Channel],
    root: &[u32],
    unroll: usize,
) -> Result<GlobalProtocol, ModularError> {
    let def = lib.get(name)?;
    let subst = Subst::new(def, parties, channels)?;
    inline(lib, def, &def.body, &subst, root, unroll)
}

/// The body of `name` with its own parameters, invocations of other
/// definitions inlined and self-invocations dropped.
pub fn inline_body(lib: &Library, name: &str) -> Result<GlobalProtocol, ModularError> {
    let def = lib.get(name)?;
    instantiate(lib, name, &def.parties, &def.channels, &[], 0)
}

/// Inlines the invocations of an arbitrary fragment `g` of `def`.
fn inline(
    lib: &Library,
    def: &ProtocolDef,
    g: &GlobalProtocol,
    subst: &Subst,
    root: &[u32],
    unroll: usize,
) -> Result<GlobalProtocol, ModularError> {
    let r = Renaming { subst, root };
    let go = |x: &GlobalProtocol| inline(lib, def, x, subst, root, unroll);
    Ok(match g {
        GlobalProtocol::Emp => GlobalProtocol::Emp,
        GlobalProtocol::Trans(t) => GlobalProtocol::Trans(Transmission {
            sender: subst.party(&t.sender),
            receiver: subst.party(&t.receiver),
            msg: t.msg.clone(),
            channel: subst.channel(&t.channel),
            label: r.label(&t.label),
        }),
        GlobalProtocol::Seq(a, b) => GlobalProtocol::seq(go(a)?, go(b)?),
        GlobalProtocol::Par(a, b) => GlobalProtocol::par(go(a)?, go(b)?),
        GlobalProtocol::Choice(a, b) => GlobalProtocol::choice(go(a)?, go(b)?),
        GlobalProtocol::Assume(a) => GlobalProtocol::Assume(r.assertion(a)),
        GlobalProtocol::Guard(a) => GlobalProtocol::Guard(r.assertion(a)),
        GlobalProtocol::Invoke(i) => {
            let recursive = i.name == def.name;
            if recursive && unroll == 0 {
                return Ok(GlobalProtocol::Emp);
            }
            let callee = lib.get(&i.name)?;
            let parties: Vec<Party> = i.parties.iter().map(|p| subst.party(p)).collect();
            let channels: Vec<Channel> = i.channels.iter().map(|c| subst.channel(c)).collect();
            let inner = Subst::new(callee, &parties, &channels)?;
            let new_root = r.label(&i.label);
            inline(
                lib,
                callee,
                &callee.body,
                &inner,
                new_root.segments(),
                if recursive { unroll - 1 } else { unroll },
            )?
        }
    })
}

/// A node of the symbolic ordering graph: a body event or a slot of the
/// previous-state frontier `F`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Ev(Event),
    /// `F.K(P)`: the last event of party `P` before the instance.
    FK(Party),
    /// `send(F.Γ(c))`: the send of the last transmission on `c`.
    FSend(Channel),
    /// `recv(F.Γ(c))`: its receive.
    FRecv(Channel),
}

impl Node {
    fn is_slot(&self) -> bool {
        !matches!(self, Node::Ev(_))
    }

    /// The concrete events a slot stands for at a usage site with frontier
    /// `front` and substitution `subst`.
    fn resolve(&self, subst: &Subst, front: &Boundary) -> Vec<Event> {
        match self {
            Node::Ev(e) => vec![e.clone()],
            Node::FK(p) => {
                front.rmap.get(&subst.party(p)).map(|f| f.atoms().into_iter().cloned().collect()).unwrap_or_default()
            }
            Node::FSend(c) | Node::FRecv(c) => front
                .cmap
                .get(&subst.channel(c))
                .map(|f| {
                    f.atoms()
                        .into_iter()
                        .map(|t| if matches!(self, Node::FSend(_)) { t.send() } else { t.recv() })
                        .collect()
                })
                .unwrap_or_default(),
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Ev(e) => write!(f, "{e}"),
            Node::FK(p) => write!(f, "F.K({p})"),
            Node::FSend(c) => write!(f, "send(F.Γ({c}))"),
            Node::FRecv(c) => write!(f, "recv(F.Γ({c}))"),
        }
    }
}

/// One clause of a pre-context condition: the guard it protects and the
/// weak happens-before candidates, any one of which discharges it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreClause {
    pub guard: Fact<Node>,
    pub candidates: Vec<Fact<Node>>,
}

impl fmt::Display for PreClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c: Vec<String> = self.candidates.iter().map(|x| x.to_string()).collect();
        write!(f, "{}", c.join(" \\/ "))
    }
}

/// The sufficient condition for a definition to be implicitly
/// synchronised with whatever precedes it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PreSyncCondition {
    pub def: String,
    pub clauses: Vec<PreClause>,
    /// Guards no pre-context edge can discharge; they only hold when the
    /// channel carried nothing before the instance.
    pub no_candidate: Vec<Fact<Node>>,
}

impl PreSyncCondition {
    /// The candidate disjunctions, as sets of rendered orderings.
    pub fn clause_sets(&self) -> BTreeSet<BTreeSet<String>> {
        self.clauses.iter().map(|c| c.candidates.iter().map(|x| x.to_string()).collect()).collect()
    }

    /// Evaluates the condition at a usage site: `front` is the frontier of
    /// the preceding protocol and `store` its ordering assumptions.
    ///
    /// A candidate `X ⪯HB Y` holds when every event `x` that `X` stands
    /// for reaches some event `y` that `Y` stands for: `x = y`, `x ⪯HB y`,
    /// or `x ⪯HB z ≺CB y`.  Since a candidate is only ever composed with a
    /// happens-before edge leaving `y`, the last form is sound by `CB-HB`.
    /// Slots that stand for nothing make a clause vacuous on the left and
    /// unprovable on the right.
    pub fn holds(&self, subst: &Subst, front: &Boundary, store: &OrderStore) -> Result<bool, ModularError> {
        let closed;
        let store = if store.is_closed() {
            store
        } else {
            closed = store.closure()?;
            &closed
        };
        let full = mercurius_ast::TreeShare::full();
        let closed_facts = store.closed_facts();
        let before = |x: &Event, z: &Event| x == z || store.entails_ord(OrdKind::WHB, x, z, &full);
        // `x` reaches everything `y` happens before: directly, or through
        // the send of the message `y` receives.
        let related = |x: &Event, y: &Event| {
            before(x, y)
                || closed_facts.iter().any(|(f, share)| {
                    f.kind == OrdKind::CB && f.to == *y && share.is_full() && before(x, &f.from)
                })
        };
        let candidate = |c: &Fact<Node>| {
            let ys = c.to.resolve(subst, front);
            c.from.resolve(subst, front).iter().all(|x| ys.iter().any(|y| related(x, y)))
        };
        let clauses = self.clauses.iter().all(|cl| {
            cl.guard.from.resolve(subst, front).is_empty() || cl.candidates.iter().any(candidate)
        });
        let bare = self.no_candidate.iter().all(|g| g.from.resolve(subst, front).is_empty());
        Ok(clauses && bare)
    }
}

impl fmt::Display for PreSyncCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.clauses.is_empty() && self.no_candidate.is_empty() {
            return write!(f, "true");
        }
        let mut parts: Vec<String> = self
            .clauses
            .iter()
            .map(|c| if c.candidates.len() > 1 { format!("({c})") } else { c.to_string() })
            .collect();
        parts.extend(self.no_candidate.iter().map(|g| format!("unsatisfiable({g})")));
        write!(f, "{}", parts.join(" & "))
    }
}

/// The symbolic ordering store of a definition body fused with `F`, and
/// the guards the fusion raises.
fn symbolic(body: &GlobalProtocol) -> (OrderStore<Node>, Vec<Fact<Node>>) {
    let s = collect(body);
    let shares = share_map(body);
    let mut store = OrderStore::<Node>::new();
    for (f, share) in assumptions_of(&refine_protocol(body)).facts() {
        store.add_fact_shared(f.kind, Node::Ev(f.from.clone()), Node::Ev(f.to.clone()), share.clone());
    }
    for (p, form) in &s.back.rmap {
        for e in form.atoms() {
            let share = shares.get(&e.label).cloned().unwrap_or_else(mercurius_ast::TreeShare::full);
            store.add_fact_shared(OrdKind::HB, Node::FK(p.clone()), Node::Ev(e.clone()), share);
        }
    }
    let mut guards = Vec::new();
    for (c, form) in &s.back.cmap {
        for t in form.atoms() {
            guards.push(Fact::new(OrdKind::HB, Node::FSend(c.clone()), Node::Ev(t.send())));
            guards.push(Fact::new(OrdKind::HB, Node::FRecv(c.clone()), Node::Ev(t.recv())));
        }
    }
    (store, guards)
}

/// Strict ancestors of `n` along the given (not derived) CB and HB facts.
fn ancestors(store: &OrderStore<Node>, n: &Node) -> BTreeSet<Node> {
    let edges: Vec<(&Node, &Node)> = store
        .facts()
        .filter(|(f, _)| matches!(f.kind, OrdKind::CB | OrdKind::HB))
        .map(|(f, _)| (&f.from, &f.to))
        .collect();
    let mut out = BTreeSet::new();
    let mut stack = vec![n];
    while let Some(x) = stack.pop() {
        for (a, b) in &edges {
            if *b == x && out.insert((*a).clone()) {
                stack.push(a);
            }
        }
    }
    out
}

/// Derives the pre-context condition of definition `name`.
pub fn derive_presync(lib: &Library, name: &str) -> Result<PreSyncCondition, ModularError> {
    let body = inline_body(lib, name)?;
    let shares = share_map(&body);
    let (store, guards) = symbolic(&body);
    let closed = store.closure()?;
    let mut cond = PreSyncCondition { def: name.to_string(), ..Default::default() };
    for guard in guards {
        let share = match &guard.to {
            Node::Ev(e) => shares.get(&e.label).cloned().unwrap_or_else(mercurius_ast::TreeShare::full),
            _ => mercurius_ast::TreeShare::full(),
        };
        // Only frontier ancestors, and only the earliest ones.
        let frontier: BTreeSet<Node> = ancestors(&store, &guard.to).into_iter().filter(Node::is_slot).collect();
        let earliest: Vec<&Node> =
            frontier.iter().filter(|a| ancestors(&store, a).is_disjoint(&frontier)).collect();
        let mut useful = Vec::new();
        for a in earliest {
            let cand = Fact::new(OrdKind::WHB, guard.from.clone(), a.clone());
            let mut trial = closed.clone();
            trial.add_fact(cand.kind, cand.from.clone(), cand.to.clone());
            trial.close()?;
            if trial.entails_ord(OrdKind::HB, &guard.from, &guard.to, &share) {
                useful.push(cand);
            }
        }
        if useful.is_empty() {
            cond.no_candidate.push(guard);
        } else {
            cond.clauses.push(PreClause { guard, candidates: useful });
        }
    }
    Ok(cond)
}

/// Evaluates the pre-context condition of `name` at a usage site.
pub fn check_usage(
    lib: &Library,
    name: &str,
    subst: &Subst,
    usage_frontier: &Boundary,
    usage_store: &OrderStore,
) -> Result<bool, ModularError> {
    derive_presync(lib, name)?.holds(subst, usage_frontier, usage_store)
}

/// An invocation inside a definition with what precedes it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UsageSite {
    pub invoke: Invoke,
    /// The protocol sequenced before the invocation, invocations inlined.
    pub prefix: GlobalProtocol,
}

impl UsageSite {
    /// Frontier of the prefix.
    pub fn frontier(&self) -> Boundary {
        collect(&self.prefix).front
    }

    /// Closed ordering assumptions of the refined prefix.
    pub fn store(&self) -> Result<OrderStore, ModularError> {
        Ok(assumptions_of(&refine_protocol(&self.prefix)).closure()?)
    }
}

/// The invocation sites of definition `name`: each invocation with the
/// part of the body sequenced before it (other operands of `*` and other
/// branches of `\/` are not part of the prefix).
pub fn usage_sites(lib: &Library, name: &str) -> Result<Vec<UsageSite>, ModularError> {
    fn walk(g: &GlobalProtocol, prefix: &GlobalProtocol, out: &mut Vec<(Invoke, GlobalProtocol)>) {
        match g {
            GlobalProtocol::Seq(a, b) => {
                walk(a, prefix, out);
                walk(b, &GlobalProtocol::seq(prefix.clone(), (**a).clone()), out);
            }
            GlobalProtocol::Par(a, b) | GlobalProtocol::Choice(a, b) => {
                walk(a, prefix, out);
                walk(b, prefix, out);
            }
            GlobalProtocol::Invoke(i) => out.push((i.clone(), prefix.clone())),
            _ => {}
        }
    }
    let def = lib.get(name)?;
    let mut raw = Vec::new();
    walk(&def.body, &GlobalProtocol::Emp, &mut raw);
    let identity = Subst::new(def, &def.parties, &def.channels)?;
    raw.into_iter()
        .map(|(invoke, prefix)| {
            Ok(UsageSite { invoke, prefix: simplify(inline(lib, def, &prefix, &identity, &[], 0)?) })
        })
        .collect()
}

/// Drops `emp` operands of sequences.
fn simplify(g: GlobalProtocol) -> GlobalProtocol {
    match g {
        GlobalProtocol::Seq(a, b) => match (simplify(*a), simplify(*b)) {
            (GlobalProtocol::Emp, y) => y,
            (x, GlobalProtocol::Emp) => x,
            (x, y) => GlobalProtocol::seq(x, y),
        },
        other => other,
    }
}

/// The verdict for one invocation site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UsageCheck {
    pub site: UsageSite,
    pub condition: PreSyncCondition,
    pub subst: Subst,
    pub holds: bool,
}

/// Checks every invocation inside definition `name` against the
/// pre-context condition of the invoked definition.
pub fn check_usages(lib: &Library, name: &str) -> Result<Vec<UsageCheck>, ModularError> {
    usage_sites(lib, name)?
        .into_iter()
        .map(|site| {
            let callee = lib.get(&site.invoke.name)?;
            let subst = Subst::for_invoke(callee, &site.invoke)?;
            let condition = derive_presync(lib, &callee.name)?;
            let holds = condition.holds(&subst, &site.frontier(), &site.store()?)?;
            Ok(UsageCheck { site, condition, subst, holds })
        })
        .collect()
}

/// Whether a tail-recursive definition is self-contained: its pre-context
/// condition holds at every recursive invocation given the body up to
/// that point.  Non-recursive definitions are trivially self-contained.
pub fn check_recursion(lib: &Library, name: &str) -> Result<bool, ModularError> {
    Ok(check_usages(lib, name)?.iter().filter(|u| u.site.invoke.name == name).all(|u| u.holds))
}
