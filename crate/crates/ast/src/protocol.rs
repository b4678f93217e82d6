use std::fmt;

use crate::{Assertion, Channel, Event, Label, Party, PartyProgram, Transmission};

/// Invocation of a named protocol definition: `H0(B,C;c)@2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Invoke {
    pub name: String,
    pub parties: Vec<Party>,
    pub channels: Vec<Channel>,
    /// Label of the invocation site; becomes the label root of the instance.
    pub label: Label,
}

impl fmt::Display for Invoke {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, p) in self.parties.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ";")?;
        for (i, c) in self.channels.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")@{}", self.label)
    }
}

/// A global protocol.
///
/// `Par` and `Choice` are binary; n-ary forms are right-nested.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GlobalProtocol {
    Emp,
    Trans(Transmission),
    Seq(Box<GlobalProtocol>, Box<GlobalProtocol>),
    Par(Box<GlobalProtocol>, Box<GlobalProtocol>),
    Choice(Box<GlobalProtocol>, Box<GlobalProtocol>),
    /// An ordering assumption `⊕(Ψ)`.
    Assume(Assertion),
    /// A proof obligation `⊖(Ψ)`.
    Guard(Assertion),
    Invoke(Invoke),
}

impl GlobalProtocol {
    pub fn seq(a: GlobalProtocol, b: GlobalProtocol) -> Self {
        GlobalProtocol::Seq(Box::new(a), Box::new(b))
    }

    pub fn par(a: GlobalProtocol, b: GlobalProtocol) -> Self {
        GlobalProtocol::Par(Box::new(a), Box::new(b))
    }

    pub fn choice(a: GlobalProtocol, b: GlobalProtocol) -> Self {
        GlobalProtocol::Choice(Box::new(a), Box::new(b))
    }

    /// Right-nested sequence of the items; `Emp` for no items.
    pub fn seq_all(items: impl IntoIterator<Item = GlobalProtocol>) -> Self {
        Self::nest(items.into_iter().collect(), Self::seq)
    }

    /// Right-nested concurrent composition; `Emp` for no items.
    pub fn par_all(items: impl IntoIterator<Item = GlobalProtocol>) -> Self {
        Self::nest(items.into_iter().collect(), Self::par)
    }

    /// Right-nested choice; `Emp` for no items.
    pub fn choice_all(items: impl IntoIterator<Item = GlobalProtocol>) -> Self {
        Self::nest(items.into_iter().collect(), Self::choice)
    }

    fn nest(
        mut v: Vec<GlobalProtocol>,
        f: fn(GlobalProtocol, GlobalProtocol) -> GlobalProtocol,
    ) -> Self {
        let Some(mut acc) = v.pop() else { return GlobalProtocol::Emp };
        while let Some(x) = v.pop() {
            acc = f(x, acc);
        }
        acc
    }

    /// All transmissions in left-to-right order (invocations contribute none).
    pub fn transmissions(&self) -> Vec<Transmission> {
        let mut out = Vec::new();
        self.visit(&mut |g| {
            if let GlobalProtocol::Trans(t) = g {
                out.push(t.clone());
            }
        });
        out
    }

    /// Pre-order traversal of all nodes.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a GlobalProtocol)) {
        f(self);
        match self {
            GlobalProtocol::Seq(a, b) | GlobalProtocol::Par(a, b) | GlobalProtocol::Choice(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    /// Whether the protocol contains no transmission and no invocation.
    pub fn is_silent(&self) -> bool {
        let mut silent = true;
        self.visit(&mut |g| {
            if matches!(g, GlobalProtocol::Trans(_) | GlobalProtocol::Invoke(_)) {
                silent = false;
            }
        });
        silent
    }

    /// All parties taking part in some transmission, sorted.
    pub fn parties(&self) -> Vec<Party> {
        let mut v: Vec<Party> = self
            .transmissions()
            .into_iter()
            .flat_map(|t| [t.sender, t.receiver])
            .collect();
        v.sort();
        v.dedup();
        v
    }

    /// All channels used by some transmission, sorted.
    pub fn channels(&self) -> Vec<Channel> {
        let mut v: Vec<Channel> = self.transmissions().into_iter().map(|t| t.channel).collect();
        v.sort();
        v.dedup();
        v
    }

    /// The transmission carrying `label`, if any.
    pub fn transmission(&self, label: &Label) -> Option<Transmission> {
        self.transmissions().into_iter().find(|t| &t.label == label)
    }

    /// The items of a sequence spine (flattening nested sequences).
    pub fn seq_items(&self) -> Vec<&GlobalProtocol> {
        match self {
            GlobalProtocol::Seq(a, b) => {
                let mut v = a.seq_items();
                v.extend(b.seq_items());
                v
            }
            other => vec![other],
        }
    }

    /// Canonical representative of the structural-congruence class:
    /// sequences are right-associated with `Emp` removed as a left identity,
    /// concurrent compositions drop `Emp` operands, and operands of `*` and
    /// `\/` are flattened and sorted by their rendered form.
    pub fn canonical(&self) -> GlobalProtocol {
        match self {
            GlobalProtocol::Seq(..) => {
                let items: Vec<GlobalProtocol> = self
                    .seq_items()
                    .into_iter()
                    .map(|g| g.canonical())
                    .flat_map(|c| c.seq_items().into_iter().cloned().collect::<Vec<_>>())
                    .collect();
                let n = items.len();
                let kept: Vec<GlobalProtocol> = items
                    .into_iter()
                    .enumerate()
                    .filter(|(i, g)| *i + 1 == n || *g != GlobalProtocol::Emp)
                    .map(|(_, g)| g)
                    .collect();
                Self::seq_all(kept)
            }
            GlobalProtocol::Par(..) => {
                let mut items: Vec<GlobalProtocol> = Vec::new();
                self.flatten(&mut items, |g| match g {
                    GlobalProtocol::Par(a, b) => Some((a, b)),
                    _ => None,
                });
                let mut items: Vec<GlobalProtocol> = Self::recanonical(items, |g| match g {
                    GlobalProtocol::Par(a, b) => Some((a, b)),
                    _ => None,
                });
                items.retain(|g| *g != GlobalProtocol::Emp);
                items.sort_by_cached_key(|g| g.to_string());
                Self::par_all(items)
            }
            GlobalProtocol::Choice(..) => {
                let mut items: Vec<GlobalProtocol> = Vec::new();
                self.flatten(&mut items, |g| match g {
                    GlobalProtocol::Choice(a, b) => Some((a, b)),
                    _ => None,
                });
                let mut items = Self::recanonical(items, |g| match g {
                    GlobalProtocol::Choice(a, b) => Some((a, b)),
                    _ => None,
                });
                items.sort_by_cached_key(|g| g.to_string());
                Self::choice_all(items)
            }
            other => other.clone(),
        }
    }

    /// Canonicalises `items` and re-flattens operands that collapsed into
    /// the same operator (e.g. `emp; (a * b)` inside a `*`).
    fn recanonical(
        items: Vec<GlobalProtocol>,
        split: for<'a> fn(&'a GlobalProtocol) -> Option<(&'a Box<GlobalProtocol>, &'a Box<GlobalProtocol>)>,
    ) -> Vec<GlobalProtocol> {
        let mut out = Vec::new();
        for c in items.iter().map(|g| g.canonical()) {
            c.flatten(&mut out, split);
        }
        out
    }

    fn flatten<'a>(
        &'a self,
        out: &mut Vec<GlobalProtocol>,
        split: fn(&'a GlobalProtocol) -> Option<(&'a Box<GlobalProtocol>, &'a Box<GlobalProtocol>)>,
    ) {
        match split(self) {
            Some((a, b)) => {
                a.flatten(out, split);
                b.flatten(out, split);
            }
            None => out.push(self.clone()),
        }
    }

    fn level(&self) -> u8 {
        match self {
            GlobalProtocol::Choice(..) => 1,
            GlobalProtocol::Par(..) => 2,
            GlobalProtocol::Seq(..) => 3,
            _ => 4,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for GlobalProtocol {
    /// Renders the DSL form.  Precedence from loosest to tightest is
    /// `\/`, `*`, `;`; all three associate to the right.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let binary = |f: &mut fmt::Formatter<'_>, a: &GlobalProtocol, b: &GlobalProtocol, op: &str| {
            let k = self.level();
            a.fmt_child(f, a.level() <= k)?;
            write!(f, "{op}")?;
            b.fmt_child(f, b.level() < k)
        };
        match self {
            GlobalProtocol::Emp => write!(f, "emp"),
            GlobalProtocol::Trans(t) => write!(f, "{t}"),
            GlobalProtocol::Seq(a, b) => binary(f, a, b, "; "),
            GlobalProtocol::Par(a, b) => binary(f, a, b, " * "),
            GlobalProtocol::Choice(a, b) => binary(f, a, b, " \\/ "),
            GlobalProtocol::Assume(a) => write!(f, "assume({a})"),
            GlobalProtocol::Guard(a) => write!(f, "guard({a})"),
            GlobalProtocol::Invoke(i) => write!(f, "{i}"),
        }
    }
}

/// A named, parameterised protocol definition `def H(A,B;c) = body;`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProtocolDef {
    pub name: String,
    pub parties: Vec<Party>,
    pub channels: Vec<Channel>,
    pub body: GlobalProtocol,
}

impl ProtocolDef {
    /// Whether the body invokes the definition itself.
    pub fn is_recursive(&self) -> bool {
        let mut rec = false;
        self.body.visit(&mut |g| {
            if let GlobalProtocol::Invoke(i) = g {
                rec |= i.name == self.name;
            }
        });
        rec
    }
}

impl fmt::Display for ProtocolDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "def {}(", self.name)?;
        let ps: Vec<String> = self.parties.iter().map(|p| p.to_string()).collect();
        let cs: Vec<String> = self.channels.iter().map(|c| c.to_string()).collect();
        write!(f, "{};{}) = {};", ps.join(","), cs.join(","), self.body)
    }
}

/// A parsed `.mpp` file: definitions, the main protocol, declared explicit
/// synchronisation edges and optional party programs for simulation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolFile {
    pub defs: Vec<ProtocolDef>,
    pub main: String,
    pub syncs: Vec<(Event, Event)>,
    pub programs: Vec<PartyProgram>,
}

impl ProtocolFile {
    /// Name given to the definition holding a bare top-level protocol.
    pub const IMPLICIT_MAIN: &'static str = "main";

    /// Wraps a single protocol as a file with one parameterless definition.
    pub fn from_protocol(body: GlobalProtocol) -> Self {
        ProtocolFile {
            defs: vec![ProtocolDef {
                name: Self::IMPLICIT_MAIN.into(),
                parties: vec![],
                channels: vec![],
                body,
            }],
            main: Self::IMPLICIT_MAIN.into(),
            syncs: vec![],
            programs: vec![],
        }
    }

    pub fn def(&self, name: &str) -> Option<&ProtocolDef> {
        self.defs.iter().find(|d| d.name == name)
    }

    pub fn main_def(&self) -> Option<&ProtocolDef> {
        self.def(&self.main)
    }
}
