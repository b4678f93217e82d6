//! Well-formedness of global protocols.
//!
//! * Concurrency (`WF-PAR`): the two operands of `*` use disjoint channels.
//! * Choice (`WF-CHOICE-(a..f)`): over the first transmissions of both
//!   branches there is (a) one channel, (b) one sender and (c) one receiver;
//!   (d) their messages are pairwise disjoint; (e) both branches involve
//!   only that sender/receiver pair; (f) both branches are themselves well
//!   formed.
//!
//! A choice with a silent branch (`G \/ emp`) is accepted but reported as a
//! note: ordering facts inside it only hold on part of the executions and
//! must be tracked with tree shares.  Assumptions and guards are transparent.

use std::collections::BTreeSet;
use std::fmt;

use mercurius_ast::{GlobalProtocol, Msg, Party};
use mercurius_graph::first;

/// The well-formedness rule a violation refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    Par,
    /// A choice clause, `'a'..='f'`.
    Choice(char),
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Par => write!(f, "WF-PAR"),
            Rule::Choice(c) => write!(f, "WF-CHOICE-({c})"),
        }
    }
}

/// One violated clause.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub rule: Rule,
    /// Path of the offending node from the root: `0`/`1` select the left or
    /// right operand of a binary node; the root is `/`.
    pub location: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.rule, self.location, self.detail)
    }
}

/// Outcome of [`check_wf`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WfReport {
    /// `true` iff `violations` is empty.
    pub ok: bool,
    pub violations: Vec<Violation>,
    /// Locations of choices with a silent branch (tree shares required).
    pub tree_share_required: Vec<String>,
}

/// Whether two messages can never be confused: different tags, or the same
/// tag with disjoint value ranges.
pub fn msg_disjoint(m1: &Msg, m2: &Msg) -> bool {
    if m1.tag != m2.tag {
        return true;
    }
    match (m1.interval, m2.interval) {
        (Some(a), Some(b)) => !a.overlaps(&b),
        _ => false,
    }
}

/// Checks every concurrent composition and choice of `g`.
pub fn check_wf(g: &GlobalProtocol) -> WfReport {
    let mut report = WfReport::default();
    walk(g, &mut String::new(), &mut report);
    report.ok = report.violations.is_empty();
    report
}

fn loc(path: &str) -> String {
    if path.is_empty() {
        "/".into()
    } else {
        path.to_string()
    }
}

fn walk(g: &GlobalProtocol, path: &mut String, report: &mut WfReport) {
    match g {
        GlobalProtocol::Seq(a, b) | GlobalProtocol::Par(a, b) | GlobalProtocol::Choice(a, b) => {
            let before = report.violations.len();
            for (i, child) in [a, b].into_iter().enumerate() {
                let len = path.len();
                path.push_str(&format!("/{i}"));
                walk(child, path, report);
                path.truncate(len);
            }
            let nested = report.violations.len() > before;
            match g {
                GlobalProtocol::Par(..) => check_par(a, b, &loc(path), report),
                GlobalProtocol::Choice(..) => check_choice(a, b, nested, &loc(path), report),
                _ => {}
            }
        }
        _ => {}
    }
}

fn check_par(a: &GlobalProtocol, b: &GlobalProtocol, at: &str, report: &mut WfReport) {
    let ca: BTreeSet<_> = a.channels().into_iter().collect();
    let shared: Vec<String> =
        b.channels().into_iter().filter(|c| ca.contains(c)).map(|c| c.to_string()).collect();
    if !shared.is_empty() {
        report.violations.push(Violation {
            rule: Rule::Par,
            location: at.into(),
            detail: format!("channel(s) {} used by both operands", shared.join(", ")),
        });
    }
}

fn check_choice(
    a: &GlobalProtocol,
    b: &GlobalProtocol,
    nested: bool,
    at: &str,
    report: &mut WfReport,
) {
    let mut push = |clause: char, detail: String| {
        report.violations.push(Violation { rule: Rule::Choice(clause), location: at.into(), detail })
    };
    if nested {
        push('f', "a branch is not well formed".into());
    }
    if a.is_silent() || b.is_silent() {
        report.tree_share_required.push(at.into());
        return;
    }
    let firsts: Vec<_> = first(a).into_iter().chain(first(b)).collect();
    let distinct = |f: &dyn Fn(&mercurius_ast::Transmission) -> String| {
        firsts.iter().map(f).collect::<BTreeSet<String>>()
    };
    let chans = distinct(&|t| t.channel.to_string());
    if chans.len() > 1 {
        push('a', format!("first transmissions use channels {}", join(&chans)));
    }
    let senders = distinct(&|t| t.sender.to_string());
    if senders.len() > 1 {
        push('b', format!("first transmissions have senders {}", join(&senders)));
    }
    let receivers = distinct(&|t| t.receiver.to_string());
    if receivers.len() > 1 {
        push('c', format!("first transmissions have receivers {}", join(&receivers)));
    }
    for (i, t1) in firsts.iter().enumerate() {
        for t2 in &firsts[i + 1..] {
            if t1.label != t2.label && !msg_disjoint(&t1.msg, &t2.msg) {
                push(
                    'd',
                    format!("messages of {} and {} are not disjoint ({} / {})", t1.label, t2.label, t1.msg, t2.msg),
                );
            }
        }
    }
    let pair: BTreeSet<Party> =
        firsts.first().map(|t| [t.sender.clone(), t.receiver.clone()].into()).unwrap_or_default();
    for (side, branch) in [("left", a), ("right", b)] {
        let extra: Vec<String> = branch
            .parties()
            .into_iter()
            .filter(|p| !pair.contains(p))
            .map(|p| p.to_string())
            .collect();
        if !extra.is_empty() {
            push('e', format!("{side} branch involves {} beyond the choice peers", extra.join(", ")));
        }
    }
}

fn join(s: &BTreeSet<String>) -> String {
    s.iter().cloned().collect::<Vec<_>>().join(", ")
}
