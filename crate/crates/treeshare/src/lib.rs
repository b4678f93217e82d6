//! Tree-share algebra.
//!
//! A tree share is a binary tree with Boolean leaves describing *which part*
//! of a disjunctive execution space an ordering fact covers.  The full share
//! (`1`, rendered `F`) denotes a must-ordering; the empty share (`0`) denotes
//! a fact that never holds.  Shares are kept in canonical form: no internal
//! node has two identical leaf children, i.e. `(0,0)` collapses to `0` and
//! `(1,1)` collapses to `1`.
//!
//! The module also provides [`fractional_closure`], which saturates a set of
//! happens-before facts annotated with shares under the fractional
//! transitivity rule (shares meet along a chain) and the conjunctive
//! combination rule (shares of the same ordering join).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// A canonical binary Boolean tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TreeShare {
    /// A leaf: `false` is the empty share, `true` the full share.
    Leaf(bool),
    /// An internal node splitting the space into a left and a right half.
    Node(Box<TreeShare>, Box<TreeShare>),
}

/// Which half of a share a branch occupies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

impl TreeShare {
    /// The full share `F`.
    pub fn full() -> Self {
        TreeShare::Leaf(true)
    }

    /// The empty share `0`.
    pub fn zero() -> Self {
        TreeShare::Leaf(false)
    }

    /// The left half `L = (1,0)`.
    pub fn left() -> Self {
        TreeShare::node(Self::full(), Self::zero())
    }

    /// The right half `R = (0,1)`.
    pub fn right() -> Self {
        TreeShare::node(Self::zero(), Self::full())
    }

    /// Builds a node and canonicalizes it.
    pub fn node(l: TreeShare, r: TreeShare) -> Self {
        match (&l, &r) {
            (TreeShare::Leaf(a), TreeShare::Leaf(b)) if a == b => TreeShare::Leaf(*a),
            _ => TreeShare::Node(Box::new(l), Box::new(r)),
        }
    }

    /// The share selecting the sub-region reached by following `path` from
    /// the root: `[]` is full, `[Left]` is `L`, `[Right, Left]` is `(0,L)`.
    pub fn from_path(path: &[Side]) -> Self {
        match path.split_first() {
            None => Self::full(),
            Some((Side::Left, rest)) => Self::node(Self::from_path(rest), Self::zero()),
            Some((Side::Right, rest)) => Self::node(Self::zero(), Self::from_path(rest)),
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self, TreeShare::Leaf(true))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, TreeShare::Leaf(false))
    }

    /// Re-applies the canonicalization rules bottom-up.
    pub fn canonical(&self) -> Self {
        match self {
            TreeShare::Leaf(b) => TreeShare::Leaf(*b),
            TreeShare::Node(l, r) => TreeShare::node(l.canonical(), r.canonical()),
        }
    }

    /// Whether the tree is already canonical.
    pub fn is_canonical(&self) -> bool {
        match self {
            TreeShare::Leaf(_) => true,
            TreeShare::Node(l, r) => {
                !matches!((&**l, &**r), (TreeShare::Leaf(a), TreeShare::Leaf(b)) if a == b)
                    && l.is_canonical()
                    && r.is_canonical()
            }
        }
    }

    /// `self ⊑ other`: every part covered by `self` is covered by `other`.
    pub fn le(&self, other: &TreeShare) -> bool {
        &ts_and(self, other) == self
    }

    fn split(&self) -> (TreeShare, TreeShare) {
        match self {
            TreeShare::Leaf(b) => (TreeShare::Leaf(*b), TreeShare::Leaf(*b)),
            TreeShare::Node(l, r) => ((**l).clone(), (**r).clone()),
        }
    }
}

/// Meet of two shares: `0 ∧ _ = 0`, `1 ∧ x = x`, componentwise on nodes.
pub fn ts_and(a: &TreeShare, b: &TreeShare) -> TreeShare {
    match (a, b) {
        (TreeShare::Leaf(false), _) | (_, TreeShare::Leaf(false)) => TreeShare::zero(),
        (TreeShare::Leaf(true), x) | (x, TreeShare::Leaf(true)) => x.canonical(),
        _ => {
            let (al, ar) = a.split();
            let (bl, br) = b.split();
            TreeShare::node(ts_and(&al, &bl), ts_and(&ar, &br))
        }
    }
}

/// Join of two shares: `1 ∨ _ = 1`, `0 ∨ x = x`, componentwise on nodes.
pub fn ts_or(a: &TreeShare, b: &TreeShare) -> TreeShare {
    match (a, b) {
        (TreeShare::Leaf(true), _) | (_, TreeShare::Leaf(true)) => TreeShare::full(),
        (TreeShare::Leaf(false), x) | (x, TreeShare::Leaf(false)) => x.canonical(),
        _ => {
            let (al, ar) = a.split();
            let (bl, br) = b.split();
            TreeShare::node(ts_or(&al, &bl), ts_or(&ar, &br))
        }
    }
}

impl Default for TreeShare {
    fn default() -> Self {
        TreeShare::full()
    }
}

impl fmt::Display for TreeShare {
    /// Renders `F`, `0`, a path of `L`/`R` steps (e.g. `LR`), or a nested
    /// pair `(a,b)` when the share is not a single path.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn path(t: &TreeShare, acc: &mut String) -> bool {
            match t {
                TreeShare::Leaf(true) => true,
                TreeShare::Leaf(false) => false,
                TreeShare::Node(l, r) => match (&**l, &**r) {
                    (x, TreeShare::Leaf(false)) => {
                        acc.push('L');
                        path(x, acc)
                    }
                    (TreeShare::Leaf(false), x) => {
                        acc.push('R');
                        path(x, acc)
                    }
                    _ => false,
                },
            }
        }
        match self {
            TreeShare::Leaf(true) => write!(f, "F"),
            TreeShare::Leaf(false) => write!(f, "0"),
            TreeShare::Node(l, r) => {
                let mut acc = String::new();
                if path(self, &mut acc) {
                    write!(f, "{acc}")
                } else {
                    write!(f, "({l},{r})")
                }
            }
        }
    }
}

/// Error returned when a share literal cannot be parsed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareParseError(pub String);

impl fmt::Display for ShareParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid tree-share literal: {}", self.0)
    }
}

impl std::error::Error for ShareParseError {}

impl FromStr for TreeShare {
    type Err = ShareParseError;

    /// Parses `F`/`1`, `0`, `L`/`R` paths such as `LL` or `RL`, and nested
    /// pairs such as `(L,R)` or `(F,(0,R))`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut pos = 0;
        let t = parse_share(&chars, &mut pos).ok_or_else(|| ShareParseError(s.to_string()))?;
        if pos != chars.len() {
            return Err(ShareParseError(s.to_string()));
        }
        Ok(t)
    }
}

fn parse_share(c: &[char], pos: &mut usize) -> Option<TreeShare> {
    match c.get(*pos)? {
        'F' | '1' => {
            *pos += 1;
            Some(TreeShare::full())
        }
        '0' => {
            *pos += 1;
            Some(TreeShare::zero())
        }
        'L' | 'R' => {
            let mut path = Vec::new();
            while let Some(ch) = c.get(*pos) {
                match ch {
                    'L' => path.push(Side::Left),
                    'R' => path.push(Side::Right),
                    _ => break,
                }
                *pos += 1;
            }
            Some(TreeShare::from_path(&path))
        }
        '(' => {
            *pos += 1;
            let l = parse_share(c, pos)?;
            if c.get(*pos)? != &',' {
                return None;
            }
            *pos += 1;
            let r = parse_share(c, pos)?;
            if c.get(*pos)? != &')' {
                return None;
            }
            *pos += 1;
            Some(TreeShare::node(l, r))
        }
        _ => None,
    }
}

/// A happens-before fact `from ≺HB to` holding on the share `share`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShareFact<N> {
    pub from: N,
    pub to: N,
    pub share: TreeShare,
}

impl<N> ShareFact<N> {
    pub fn new(from: N, to: N, share: TreeShare) -> Self {
        ShareFact { from, to, share }
    }
}

/// Saturates share-annotated happens-before facts.
///
/// Rules, applied to a fixpoint:
/// * chaining: `a ≺ b @ s1` and `b ≺ c @ s2` give `a ≺ c @ (s1 ∧ s2)`;
/// * combination: two facts over the same endpoints merge to the join of
///   their shares.
///
/// Facts whose share is zero are dropped.  The result is sorted by
/// endpoints and contains one fact per ordered pair.
pub fn fractional_closure<N: Ord + Clone>(facts: &[ShareFact<N>]) -> Vec<ShareFact<N>> {
    let mut map: BTreeMap<(N, N), TreeShare> = BTreeMap::new();
    for f in facts {
        let s = f.share.canonical();
        if s.is_zero() {
            continue;
        }
        let e = map.entry((f.from.clone(), f.to.clone())).or_insert_with(TreeShare::zero);
        *e = ts_or(e, &s);
    }
    loop {
        let mut changed = false;
        let snapshot: Vec<((N, N), TreeShare)> =
            map.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        for ((a, b), s1) in &snapshot {
            for ((b2, c), s2) in snapshot.iter().filter(|((x, _), _)| x == b) {
                debug_assert!(b2 == b);
                let s = ts_and(s1, s2);
                if s.is_zero() {
                    continue;
                }
                let e = map.entry((a.clone(), c.clone())).or_insert_with(TreeShare::zero);
                let joined = ts_or(e, &s);
                if &joined != e {
                    *e = joined;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    map.into_iter()
        .map(|((from, to), share)| ShareFact { from, to, share })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip() {
        for s in ["F", "0", "L", "R", "LL", "RL", "(L,R)", "(LR,RL)"] {
            let t: TreeShare = s.parse().unwrap();
            let back: TreeShare = t.to_string().parse().unwrap();
            assert_eq!(t, back, "{s}");
        }
        assert_eq!("(L,R)".parse::<TreeShare>().unwrap().to_string(), "(L,R)");
        assert_eq!("(1,1)".parse::<TreeShare>().unwrap(), TreeShare::full());
        assert!("(L".parse::<TreeShare>().is_err());
    }

    #[test]
    fn meet_and_join_of_halves() {
        assert_eq!(ts_and(&TreeShare::left(), &TreeShare::right()), TreeShare::zero());
        assert_eq!(ts_or(&TreeShare::left(), &TreeShare::right()), TreeShare::full());
    }
}
