use std::collections::BTreeMap;
use std::fmt;

use mercurius_treeshare::TreeShare;

use crate::{AstError, Event, GlobalProtocol, Label, Party, Transmission};

/// The kind of an ordering between two events.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OrdKind {
    /// Communicates-before: the send of a transmission precedes its receive.
    CB,
    /// Happens-before: a strict temporal precedence.
    HB,
    /// Weak happens-before: happens-before or the same event.
    WHB,
}

impl OrdKind {
    /// The DSL operator: `<CB`, `<HB` or `<=HB`.
    pub fn symbol(self) -> &'static str {
        match self {
            OrdKind::CB => "<CB",
            OrdKind::HB => "<HB",
            OrdKind::WHB => "<=HB",
        }
    }
}

impl fmt::Display for OrdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrdKind::CB => "CB",
            OrdKind::HB => "HB",
            OrdKind::WHB => "WHB",
        })
    }
}

/// An ordering `from ≺kind to`, optionally restricted to a tree share.
/// `share: None` is the full share.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ordering {
    pub kind: OrdKind,
    pub from: Event,
    pub to: Event,
    pub share: Option<TreeShare>,
}

impl Ordering {
    pub fn new(kind: OrdKind, from: Event, to: Event) -> Self {
        Ordering { kind, from, to, share: None }
    }

    pub fn hb(from: Event, to: Event) -> Self {
        Self::new(OrdKind::HB, from, to)
    }

    pub fn cb(from: Event, to: Event) -> Self {
        Self::new(OrdKind::CB, from, to)
    }

    pub fn whb(from: Event, to: Event) -> Self {
        Self::new(OrdKind::WHB, from, to)
    }

    pub fn with_share(mut self, share: TreeShare) -> Self {
        self.share = Some(share);
        self
    }
}

impl fmt::Display for Ordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.from, self.kind.symbol(), self.to)?;
        if let Some(s) = &self.share {
            write!(f, " @{s}")?;
        }
        Ok(())
    }
}

/// Formulas of the ordering-constraints language.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Assertion {
    /// The event has occurred.
    Occ(Event),
    /// The event has not occurred.
    Not(Event),
    /// An event-level ordering.
    Ord(Ordering),
    And(Box<Assertion>, Box<Assertion>),
    /// `E => Ψ`: if `E` has occurred then `Ψ` holds.
    Implies(Event, Box<Assertion>),
    /// A transmission-level ordering `i1 ≺kind i2`, shorthand for ordering
    /// both the sends and the receives of the two transmissions.
    OrdT { kind: OrdKind, from: Label, to: Label },
    /// The occurrence of transmission `i` from `sender` to `receiver`:
    /// both events occurred and the send communicates-before the receive.
    Transmitted { sender: Party, receiver: Party, label: Label },
}

impl Assertion {
    pub fn and(a: Assertion, b: Assertion) -> Self {
        Assertion::And(Box::new(a), Box::new(b))
    }

    /// Right-nested conjunction; `None` for an empty list.
    pub fn and_all(items: impl IntoIterator<Item = Assertion>) -> Option<Self> {
        let mut v: Vec<Assertion> = items.into_iter().collect();
        let mut acc = v.pop()?;
        while let Some(x) = v.pop() {
            acc = Assertion::and(x, acc);
        }
        Some(acc)
    }

    pub fn ord(o: Ordering) -> Self {
        Assertion::Ord(o)
    }

    pub fn hb(from: Event, to: Event) -> Self {
        Assertion::Ord(Ordering::hb(from, to))
    }

    pub fn ord_t(from: Label, to: Label) -> Self {
        Assertion::OrdT { kind: OrdKind::HB, from, to }
    }

    pub fn transmitted(t: &Transmission) -> Self {
        Assertion::Transmitted {
            sender: t.sender.clone(),
            receiver: t.receiver.clone(),
            label: t.label.clone(),
        }
    }

    /// The conjuncts of a (possibly nested) conjunction, left to right.
    pub fn conjuncts(&self) -> Vec<&Assertion> {
        match self {
            Assertion::And(a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            other => vec![other],
        }
    }

    /// The events mentioned by the assertion (transmission-level orderings
    /// mention no events until decomposed).
    pub fn events(&self) -> Vec<Event> {
        match self {
            Assertion::Occ(e) | Assertion::Not(e) => vec![e.clone()],
            Assertion::Ord(o) => vec![o.from.clone(), o.to.clone()],
            Assertion::And(a, b) => {
                let mut v = a.events();
                v.extend(b.events());
                v
            }
            Assertion::Implies(e, a) => {
                let mut v = vec![e.clone()];
                v.extend(a.events());
                v
            }
            Assertion::OrdT { .. } => vec![],
            Assertion::Transmitted { sender, receiver, label } => vec![
                Event::new(sender.clone(), label.clone()),
                Event::new(receiver.clone(), label.clone()),
            ],
        }
    }

    /// Whether the assertion contains transmission-level orderings.
    pub fn has_ord_t(&self) -> bool {
        match self {
            Assertion::OrdT { .. } => true,
            Assertion::And(a, b) => a.has_ord_t() || b.has_ord_t(),
            Assertion::Implies(_, a) => a.has_ord_t(),
            _ => false,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        // prec: 0 = top, 1 = operand of `&` (implications need parens).
        match self {
            Assertion::Occ(e) => write!(f, "{e}"),
            Assertion::Not(e) => write!(f, "!{e}"),
            Assertion::Ord(o) => write!(f, "{o}"),
            Assertion::OrdT { kind, from, to } => write!(f, "{from} {} {to}", kind.symbol()),
            Assertion::Transmitted { sender, receiver, label } => {
                write!(f, "{sender}->{receiver}:{label}")
            }
            Assertion::And(a, b) => {
                if prec > 1 {
                    write!(f, "(")?;
                }
                // Left operands that are conjunctions need parentheses to
                // preserve the tree shape across a round trip.
                if matches!(**a, Assertion::And(..)) {
                    write!(f, "(")?;
                    a.fmt_prec(f, 0)?;
                    write!(f, ")")?;
                } else {
                    a.fmt_prec(f, 1)?;
                }
                write!(f, " & ")?;
                b.fmt_prec(f, 1)?;
                if prec > 1 {
                    write!(f, ")")?;
                }
                Ok(())
            }
            Assertion::Implies(e, a) => {
                if prec > 0 {
                    write!(f, "(")?;
                }
                write!(f, "{e} => ")?;
                a.fmt_prec(f, 0)?;
                if prec > 0 {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Replaces every transmission-level ordering `i1 ≺HB i2` by the
/// event-level conjunction `send(i1) ≺HB send(i2) ∧ recv(i1) ≺HB recv(i2)`,
/// resolving labels against the transmissions of `g`.
///
/// All other nodes are left untouched, so the operation is idempotent.
pub fn ord_decompose(a: &Assertion, g: &GlobalProtocol) -> Result<Assertion, AstError> {
    let table: BTreeMap<Label, Transmission> =
        g.transmissions().into_iter().map(|t| (t.label.clone(), t)).collect();
    decompose_with(a, &table)
}

fn decompose_with(
    a: &Assertion,
    table: &BTreeMap<Label, Transmission>,
) -> Result<Assertion, AstError> {
    Ok(match a {
        Assertion::OrdT { kind, from, to } => {
            let t1 = table.get(from).ok_or_else(|| AstError::UnknownLabel(from.clone()))?;
            let t2 = table.get(to).ok_or_else(|| AstError::UnknownLabel(to.clone()))?;
            Assertion::and(
                Assertion::Ord(Ordering::new(*kind, t1.send(), t2.send())),
                Assertion::Ord(Ordering::new(*kind, t1.recv(), t2.recv())),
            )
        }
        Assertion::And(x, y) => {
            Assertion::and(decompose_with(x, table)?, decompose_with(y, table)?)
        }
        Assertion::Implies(e, x) => Assertion::Implies(e.clone(), Box::new(decompose_with(x, table)?)),
        other => other.clone(),
    })
}
