//! Protocol layers and their composition into a protocol policy.
//!
//! A [`LayerStack`] is an ordered list of byte-unit layers (outermost first)
//! on top of a [`Framing`] that converts between [`Message`]s and bytes.
//! Sending runs the framing and then the layers from innermost to outermost;
//! receiving runs them in exactly the reverse order.
//!
//! [`Message`]: crate::wire::Message

mod framing;
mod heartbeat;
mod ordering;
mod preset;
mod reliability;
mod slicing;
mod stack;

pub use framing::{encode_stream_message, Framing, StreamParser};
pub use heartbeat::{HeartbeatLayer, Liveness};
pub use ordering::{OrderingBuffer, OrderingLayer, Stash};
pub use preset::{Preset, StackConfig};
pub use reliability::ReliabilityLayer;
pub use slicing::SlicingLayer;
pub use stack::{LayerStack, StackBuilder, StackError, StackStats};

use crate::time::Time;
use crate::wire::{DecodeError, WireBuffer};
use bytes::Bytes;
use std::any::Any;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LayerError {
    #[error("malformed {layer} header: {source}")]
    MalformedHeader {
        layer: &'static str,
        source: DecodeError,
    },
    #[error("unit of {size} bytes exceeds limit of {limit}")]
    PayloadTooLarge { size: usize, limit: usize },
    #[error("retransmission window full")]
    WindowFull,
}

impl LayerError {
    pub(crate) fn malformed(layer: &'static str, source: DecodeError) -> Self {
        LayerError::MalformedHeader { layer, source }
    }
}

/// Per-call context handed to a layer.
pub struct LayerCx<'a> {
    pub now: Time,
    /// Header bytes the layers outside this one will prepend to each unit
    /// this layer emits downwards.
    pub headroom: usize,
    /// Receive-side payload bytes copied so far.
    pub copies: &'a mut u64,
    /// Units travelling towards the transport (sends, replies, retransmits).
    pub down: &'a mut Vec<WireBuffer>,
}

impl LayerCx<'_> {
    /// A fresh unit with enough headroom for this layer's header and all
    /// outer headers.
    pub fn unit(&self, own_header: usize, body: &[u8]) -> WireBuffer {
        let mut unit = WireBuffer::with_headroom(self.headroom + own_header, body.len());
        unit.put_header(body);
        unit
    }
}

/// One protocol layer in a [`LayerStack`].
pub trait Layer: Send + 'static {
    fn name(&self) -> &'static str;

    /// Bytes this layer prepends to every unit it emits.
    fn header_len(&self) -> usize;

    /// Processes an outgoing unit, pushing the result(s) to `cx.down`.
    fn on_send(&mut self, unit: WireBuffer, cx: &mut LayerCx<'_>) -> Result<(), LayerError>;

    /// Processes an incoming unit, pushing deliverable inner units to `up`.
    fn on_receive(
        &mut self,
        unit: Bytes,
        cx: &mut LayerCx<'_>,
        up: &mut Vec<Bytes>,
    ) -> Result<(), LayerError>;

    /// Called once `now` has reached [`Layer::next_deadline`].
    fn on_timeout(&mut self, _cx: &mut LayerCx<'_>, _up: &mut Vec<Bytes>) {}

    fn next_deadline(&self) -> Option<Time> {
        None
    }

    /// True for layers that split one unit into several bounded ones. Size
    /// limits are enforced by such a layer instead of by the stack.
    fn splits_units(&self) -> bool {
        false
    }

    fn as_any(&self) -> &dyn Any;

    fn as_any_mut(&mut self) -> &mut dyn Any;
}
