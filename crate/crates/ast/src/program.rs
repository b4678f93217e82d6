use std::fmt;

use crate::{Channel, Interval, Party};

/// A runtime message value: a tag and an integer payload.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Value {
    pub tag: String,
    pub num: i64,
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.tag, self.num)
    }
}

/// The payload of a send: a literal or a previously received variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Lit(Value),
    Var(String),
}

/// A branch pattern on a received value: its tag and an optional range.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    pub tag: String,
    pub interval: Option<Interval>,
}

impl Pattern {
    pub fn matches(&self, v: &Value) -> bool {
        self.tag == v.tag && self.interval.is_none_or(|iv| iv.contains(v.num))
    }
}

/// Statements of the core party language.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stmt {
    Send { chan: Channel, expr: Expr },
    Recv { chan: Channel, var: String },
    Open { chan: Channel, parties: Vec<Party> },
    Close { chan: Channel },
    NotifyAll(String),
    Wait(String),
    /// Fork two threads and join them.
    Par(Vec<Stmt>, Vec<Stmt>),
    /// Internal (nondeterministic) choice among the branches.
    Choose(Vec<Vec<Stmt>>),
    /// External choice on a received value.
    Match { var: String, arms: Vec<(Pattern, Vec<Stmt>)> },
    Skip,
}

/// The program run by one party: `impl P { … }`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PartyProgram {
    pub party: Party,
    pub body: Vec<Stmt>,
}

fn fmt_block(f: &mut fmt::Formatter<'_>, body: &[Stmt]) -> fmt::Result {
    write!(f, "{{")?;
    for s in body {
        write!(f, " {s}")?;
    }
    write!(f, " }}")
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stmt::Send { chan, expr: Expr::Lit(v) } => write!(f, "send {chan} {v};"),
            Stmt::Send { chan, expr: Expr::Var(x) } => write!(f, "send {chan} {x};"),
            Stmt::Recv { chan, var } => write!(f, "recv {chan} {var};"),
            Stmt::Open { chan, parties } => {
                let ps: Vec<String> = parties.iter().map(|p| p.to_string()).collect();
                write!(f, "open {chan}({});", ps.join(","))
            }
            Stmt::Close { chan } => write!(f, "close {chan};"),
            Stmt::NotifyAll(e) => write!(f, "notifyAll {e};"),
            Stmt::Wait(e) => write!(f, "wait {e};"),
            Stmt::Skip => write!(f, "skip;"),
            Stmt::Par(a, b) => {
                write!(f, "par ")?;
                fmt_block(f, a)?;
                write!(f, " and ")?;
                fmt_block(f, b)
            }
            Stmt::Choose(branches) => {
                write!(f, "choose ")?;
                for (i, b) in branches.iter().enumerate() {
                    if i > 0 {
                        write!(f, " or ")?;
                    }
                    fmt_block(f, b)?;
                }
                Ok(())
            }
            Stmt::Match { var, arms } => {
                write!(f, "match {var} {{")?;
                for (p, body) in arms {
                    write!(f, " {}", p.tag)?;
                    if let Some(iv) = p.interval {
                        write!(f, "{{{}..{}}}", iv.lo, iv.hi)?;
                    }
                    write!(f, " => ")?;
                    fmt_block(f, body)?;
                }
                write!(f, " }}")
            }
        }
    }
}

impl fmt::Display for PartyProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "impl {} ", self.party)?;
        fmt_block(f, &self.body)
    }
}
