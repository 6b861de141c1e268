//! Identities, message records, wire headers and their codecs.
//!
//! Every header encodes to a fixed number of bytes in network byte order,
//! independent of field values.

mod buffer;
mod header;
mod serial;

pub use buffer::WireBuffer;
pub use header::{
    decode_basp, encode_basp, BaspHeader, OrderingHeader, ReliabilityHeader, SliceHeader,
    ReliabilityKind,
};
pub use serial::{seq_is_before, serial_distance};

use bytes::Bytes;
use std::fmt;

/// Identity of an actor endpoint, carried as 8 big-endian bytes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActorId(pub u64);

impl fmt::Display for ActorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "actor#{}", self.0)
    }
}

/// Opaque identity of a node (one process instance).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u64);

impl NodeId {
    /// Returns an id that is unique within this process.
    pub fn next() -> NodeId {
        use std::sync::atomic::{AtomicU64, Ordering};
        static NEXT: AtomicU64 = AtomicU64::new(1);
        NodeId(NEXT.fetch_add(1, Ordering::Relaxed))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node#{}", self.0)
    }
}

/// An application message travelling through a layer stack.
///
/// The payload is reference counted so that the receive path can hand out
/// views into the transport's receive buffer without copying.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Message {
    pub source: ActorId,
    pub destination: ActorId,
    pub payload: Bytes,
}

impl Message {
    pub fn new(source: ActorId, destination: ActorId, payload: impl Into<Bytes>) -> Message {
        Message {
            source,
            destination,
            payload: payload.into(),
        }
    }

    /// A message without addressing, as produced by a raw stack.
    pub fn raw(payload: impl Into<Bytes>) -> Message {
        Message::new(ActorId(0), ActorId(0), payload)
    }
}

/// Failure to decode a fixed-size header.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("incomplete header: need {needed} bytes, have {available}")]
    Incomplete { needed: usize, available: usize },
    #[error("invalid {field}: {value}")]
    Invalid { field: &'static str, value: u64 },
}
