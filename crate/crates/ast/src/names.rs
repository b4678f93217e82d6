use std::fmt;

/// A hierarchical transmission label `n1#n2#…`.
///
/// Labels of nested protocol instances are formed by prefixing the local
/// label with the label of the invocation site, which keeps labels unique
/// across instantiations.  Ordering is lexicographic on the path.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(Vec<u32>);

impl Label {
    /// Builds a label from a non-empty path of positive segments.
    ///
    /// # Panics
    /// Panics if the path is empty or contains a zero segment.
    pub fn new(path: Vec<u32>) -> Self {
        assert!(!path.is_empty(), "label path must be non-empty");
        assert!(path.iter().all(|&s| s >= 1), "label segments must be positive");
        Label(path)
    }

    /// A single-segment label.
    pub fn of(n: u32) -> Self {
        Label::new(vec![n])
    }

    /// Builds a label from a path, returning `None` if it is not valid.
    pub fn try_new(path: Vec<u32>) -> Option<Self> {
        (!path.is_empty() && path.iter().all(|&s| s >= 1)).then_some(Label(path))
    }

    pub fn segments(&self) -> &[u32] {
        &self.0
    }

    /// `root#self`: the label of this local label inside an instance rooted
    /// at `root`.  An empty root leaves the label unchanged.
    pub fn prefixed(&self, root: &[u32]) -> Label {
        let mut path = root.to_vec();
        path.extend_from_slice(&self.0);
        Label(path)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "#")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

macro_rules! name_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(String);

        impl $name {
            /// # Panics
            /// Panics if the name is empty.
            pub fn new(name: impl Into<String>) -> Self {
                let name = name.into();
                assert!(!name.is_empty(), concat!(stringify!($name), " name must be non-empty"));
                $name(name)
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name::new(s)
            }
        }
    };
}

name_type!(
    /// A protocol participant (role).
    Party
);
name_type!(
    /// A logical FIFO channel.
    Channel
);

/// The send or receive half of a transmission, seen at one party: `P^i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Event {
    pub party: Party,
    pub label: Label,
}

impl Event {
    pub fn new(party: impl Into<Party>, label: Label) -> Self {
        Event { party: party.into(), label }
    }
}

impl From<String> for Party {
    fn from(s: String) -> Self {
        Party::new(s)
    }
}

impl From<String> for Channel {
    fn from(s: String) -> Self {
        Channel::new(s)
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{}", self.party, self.label)
    }
}

/// A closed, non-empty integer interval `lo..hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    pub lo: i64,
    pub hi: i64,
}

impl Interval {
    /// # Panics
    /// Panics if `lo > hi`.
    pub fn new(lo: i64, hi: i64) -> Self {
        assert!(lo <= hi, "interval must be non-empty");
        Interval { lo, hi }
    }

    pub fn contains(&self, v: i64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

/// A message `v.Tag{lo..hi}`: a bound variable, a tag naming the kind of
/// payload, and an optional integer range constraining the value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Msg {
    pub var: String,
    pub tag: String,
    pub interval: Option<Interval>,
}

impl Msg {
    /// A message with variable `v` and no value constraint.
    pub fn tag(tag: impl Into<String>) -> Self {
        Msg { var: "v".into(), tag: tag.into(), interval: None }
    }

    pub fn with_interval(mut self, lo: i64, hi: i64) -> Self {
        self.interval = Some(Interval::new(lo, hi));
        self
    }
}

impl fmt::Display for Msg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.var, self.tag)?;
        if let Some(iv) = self.interval {
            write!(f, "{{{}..{}}}", iv.lo, iv.hi)?;
        }
        Ok(())
    }
}

/// One labelled asynchronous message `S->R:c<msg>@i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transmission {
    pub sender: Party,
    pub receiver: Party,
    pub msg: Msg,
    pub channel: Channel,
    pub label: Label,
}

impl Transmission {
    /// # Panics
    /// Panics if sender and receiver coincide (transmissions are irreflexive).
    pub fn new(
        sender: impl Into<Party>,
        receiver: impl Into<Party>,
        channel: impl Into<Channel>,
        msg: Msg,
        label: Label,
    ) -> Self {
        let (sender, receiver) = (sender.into(), receiver.into());
        assert!(sender != receiver, "a transmission needs distinct peers");
        Transmission { sender, receiver, msg, channel: channel.into(), label }
    }

    /// The send event `S^i`.
    pub fn send(&self) -> Event {
        Event { party: self.sender.clone(), label: self.label.clone() }
    }

    /// The receive event `R^i`.
    pub fn recv(&self) -> Event {
        Event { party: self.receiver.clone(), label: self.label.clone() }
    }

    pub fn events(&self) -> [Event; 2] {
        [self.send(), self.recv()]
    }

    /// Whether the party takes part in this transmission.
    pub fn involves(&self, p: &Party) -> bool {
        &self.sender == p || &self.receiver == p
    }
}

impl fmt::Display for Transmission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}->{}:{}<{}>@{}",
            self.sender, self.receiver, self.channel, self.msg, self.label
        )
    }
}
