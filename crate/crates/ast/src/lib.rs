//! Core domain types shared by every stage of the toolkit.
//!
//! A global protocol is a tree of labelled transmissions composed with
//! sequencing (`;`), concurrency (`*`) and choice (`\/`), optionally
//! decorated with ordering assumptions (`assume(..)`) and race-freedom proof
//! obligations (`guard(..)`).  Events are the send or receive halves of a
//! transmission at a given party.  Orderings relate events by
//! communicates-before (CB), happens-before (HB) or weak happens-before
//! (WHB).
//!
//! All values are immutable and cheap to clone; rendering via [`Display`]
//! produces the textual DSL accepted by the parser.
//!
//! [`Display`]: std::fmt::Display

mod assertion;
mod names;
mod program;
mod protocol;

pub use assertion::{ord_decompose, Assertion, OrdKind, Ordering};
pub use names::{Channel, Event, Interval, Label, Msg, Party, Transmission};
pub use program::{Expr, PartyProgram, Pattern, Stmt, Value};
pub use protocol::{GlobalProtocol, Invoke, ProtocolDef, ProtocolFile};
pub use mercurius_treeshare::TreeShare;

use thiserror::Error;

/// Errors raised by operations on core types.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AstError {
    #[error("unknown transmission label {0}")]
    UnknownLabel(Label),
}
