//! Transmission sets and the sequencing graph of a global protocol.
//!
//! * [`tr`], [`first`] and [`Events::ev`] collect the transmissions, the
//!   possible first transmissions and the events of a protocol.
//! * [`ProtocolGraph`] is the DAG over transmission labels whose edges are
//!   the sequencing pairs: `G1; G2` orders every transmission of `G1` before
//!   every transmission of `G2`, while `*` and `\/` add no cross edges.  It
//!   answers `sequenced`, `adjacent` (same channel, sequenced, nothing on the
//!   channel strictly in between) and `linked` (transitive closure of
//!   adjacency), and renders itself as Graphviz DOT.
//!
//! Invocations are opaque here: they contribute no transmissions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use mercurius_ast::{Assertion, Event, GlobalProtocol, Label, Transmission};
use petgraph::algo::has_path_connecting;
use petgraph::graph::{DiGraph, NodeIndex};
use thiserror::Error;

/// Errors raised by graph queries.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown transmission label {0}")]
    UnknownLabel(Label),
}

/// All transmissions of the protocol, ordered by label.
pub fn tr(g: &GlobalProtocol) -> BTreeSet<Transmission> {
    g.transmissions().into_iter().collect()
}

/// The possible first transmissions: `first(G1;G2) = first(G1)` (falling
/// through a silent `G1`), and the union of both operands for `*` and `\/`.
pub fn first(g: &GlobalProtocol) -> BTreeSet<Transmission> {
    match g {
        GlobalProtocol::Trans(t) => BTreeSet::from([t.clone()]),
        GlobalProtocol::Seq(a, b) => {
            let f = first(a);
            if f.is_empty() {
                first(b)
            } else {
                f
            }
        }
        GlobalProtocol::Par(a, b) | GlobalProtocol::Choice(a, b) => {
            let mut f = first(a);
            f.extend(first(b));
            f
        }
        _ => BTreeSet::new(),
    }
}

/// Things that mention events.
pub trait Events {
    /// The set of events mentioned.
    fn ev(&self) -> BTreeSet<Event>;
}

impl Events for Transmission {
    fn ev(&self) -> BTreeSet<Event> {
        self.events().into_iter().collect()
    }
}

impl Events for Assertion {
    fn ev(&self) -> BTreeSet<Event> {
        self.events().into_iter().collect()
    }
}

impl Events for GlobalProtocol {
    /// Events of transmissions, assumptions and guards.
    fn ev(&self) -> BTreeSet<Event> {
        let mut out = BTreeSet::new();
        self.visit(&mut |g| match g {
            GlobalProtocol::Trans(t) => out.extend(t.ev()),
            GlobalProtocol::Assume(a) | GlobalProtocol::Guard(a) => out.extend(a.ev()),
            _ => {}
        });
        out
    }
}

/// The sequencing DAG of a protocol.
#[derive(Debug, Clone)]
pub struct ProtocolGraph {
    graph: DiGraph<Transmission, ()>,
    index: BTreeMap<Label, NodeIndex>,
    /// `reach[i]` holds the labels reachable from `i` by a non-empty path.
    reach: BTreeMap<Label, BTreeSet<Label>>,
}

impl ProtocolGraph {
    /// Builds the graph of `g`.
    pub fn new(g: &GlobalProtocol) -> Self {
        let mut graph = DiGraph::new();
        let mut index = BTreeMap::new();
        for t in g.transmissions() {
            let label = t.label.clone();
            index.insert(label, graph.add_node(t));
        }
        let mut edges = BTreeSet::new();
        seq_edges(g, &mut edges);
        for (a, b) in &edges {
            graph.add_edge(index[a], index[b], ());
        }
        let reach = index
            .iter()
            .map(|(l, &from)| {
                let targets = index
                    .iter()
                    .filter(|(_, &to)| to != from && has_path_connecting(&graph, from, to, None))
                    .map(|(m, _)| m.clone())
                    .collect();
                (l.clone(), targets)
            })
            .collect();
        ProtocolGraph { graph, index, reach }
    }

    /// The transmissions, ordered by label.
    pub fn transmissions(&self) -> impl Iterator<Item = &Transmission> {
        self.index.values().map(|&i| &self.graph[i])
    }

    /// The transmission carrying `l`.
    pub fn transmission(&self, l: &Label) -> Result<&Transmission, GraphError> {
        self.index
            .get(l)
            .map(|&i| &self.graph[i])
            .ok_or_else(|| GraphError::UnknownLabel(l.clone()))
    }

    /// The sequencing edges as label pairs.
    pub fn edges(&self) -> BTreeSet<(Label, Label)> {
        self.graph
            .edge_indices()
            .filter_map(|e| self.graph.edge_endpoints(e))
            .map(|(a, b)| (self.graph[a].label.clone(), self.graph[b].label.clone()))
            .collect()
    }

    /// Whether a path leads from `i1` to `i2`.
    pub fn sequenced(&self, i1: &Label, i2: &Label) -> Result<bool, GraphError> {
        self.transmission(i2)?;
        let r = self.reach.get(i1).ok_or_else(|| GraphError::UnknownLabel(i1.clone()))?;
        Ok(r.contains(i2))
    }

    /// Whether `i1` and `i2` share a channel, are sequenced, and no
    /// transmission on that channel lies strictly between them.
    pub fn adjacent(&self, i1: &Label, i2: &Label) -> Result<bool, GraphError> {
        let (t1, t2) = (self.transmission(i1)?, self.transmission(i2)?);
        if t1.channel != t2.channel || !self.sequenced(i1, i2)? {
            return Ok(false);
        }
        let between = self.transmissions().any(|t| {
            t.channel == t1.channel && self.reach[i1].contains(&t.label) && self.reach[&t.label].contains(i2)
        });
        Ok(!between)
    }

    /// Whether `i2` is reachable from `i1` through a chain of adjacent pairs.
    pub fn linked(&self, i1: &Label, i2: &Label) -> Result<bool, GraphError> {
        self.transmission(i1)?;
        self.transmission(i2)?;
        let adj = self.adjacent_pairs();
        let mut seen = BTreeSet::new();
        let mut stack = vec![i1.clone()];
        while let Some(x) = stack.pop() {
            for (a, b) in &adj {
                if *a == x && seen.insert(b.clone()) {
                    if b == i2 {
                        return Ok(true);
                    }
                    stack.push(b.clone());
                }
            }
        }
        Ok(false)
    }

    /// All adjacent pairs.
    pub fn adjacent_pairs(&self) -> BTreeSet<(Label, Label)> {
        let mut out = BTreeSet::new();
        for a in self.index.keys() {
            for b in &self.reach[a] {
                if self.adjacent(a, b).unwrap_or(false) {
                    out.insert((a.clone(), b.clone()));
                }
            }
        }
        out
    }

    /// All linked pairs: the transitive closure of [`adjacent_pairs`].
    ///
    /// [`adjacent_pairs`]: ProtocolGraph::adjacent_pairs
    pub fn linked_pairs(&self) -> BTreeSet<(Label, Label)> {
        let mut closed = self.adjacent_pairs();
        loop {
            let extra: Vec<(Label, Label)> = closed
                .iter()
                .flat_map(|(a, b)| {
                    closed.iter().filter(move |(c, _)| c == b).map(move |(_, d)| (a.clone(), d.clone()))
                })
                .filter(|p| !closed.contains(p))
                .collect();
            if extra.is_empty() {
                return closed;
            }
            closed.extend(extra);
        }
    }

    /// Graphviz rendering; adjacent pairs are drawn bold.
    pub fn to_dot(&self) -> String {
        let adj = self.adjacent_pairs();
        let mut s = String::from("digraph protocol {\n  rankdir=LR;\n");
        for t in self.transmissions() {
            let _ = writeln!(
                s,
                "  \"{}\" [label=\"{}: {}->{} on {} <{}>\"];",
                t.label, t.label, t.sender, t.receiver, t.channel, t.msg
            );
        }
        for (a, b) in self.edges() {
            let style = if adj.contains(&(a.clone(), b.clone())) { " [style=bold]" } else { "" };
            let _ = writeln!(s, "  \"{a}\" -> \"{b}\"{style};");
        }
        s.push_str("}\n");
        s
    }
}

fn seq_edges(g: &GlobalProtocol, out: &mut BTreeSet<(Label, Label)>) {
    match g {
        GlobalProtocol::Seq(a, b) => {
            for x in tr(a) {
                for y in tr(b) {
                    out.insert((x.label.clone(), y.label.clone()));
                }
            }
            seq_edges(a, out);
            seq_edges(b, out);
        }
        GlobalProtocol::Par(a, b) | GlobalProtocol::Choice(a, b) => {
            seq_edges(a, out);
            seq_edges(b, out);
        }
        _ => {}
    }
}
