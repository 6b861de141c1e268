use super::{Framing, Layer, LayerCx, LayerError};
use crate::time::Time;
use crate::transport::{UnitKind, UDP_MAX_PAYLOAD};
use crate::wire::{Message, WireBuffer};
use bytes::Bytes;

/// Counters kept by a stack across calls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StackStats {
    /// Payload bytes copied on the receive path.
    pub copies: u64,
    /// Payload bytes copied into send buffers.
    pub send_copies: u64,
    /// Framing reads (header or payload) on the receive path.
    pub reads: u64,
    /// Units dropped because some layer could not parse them.
    pub malformed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StackError {
    #[error("stream stacks cannot carry unit layers (got {0})")]
    LayersOnStream(&'static str),
    #[error("{framing} framing does not fit a {kind:?} transport")]
    FramingMismatch { framing: &'static str, kind: UnitKind },
}

/// A protocol policy: framing plus an ordered list of layers.
pub struct LayerStack {
    kind: UnitKind,
    framing: Framing,
    layers: Vec<Box<dyn Layer>>,
    // headroom[i]: header bytes added by layers[..i]
    headroom: Vec<usize>,
    total_headroom: usize,
    max_unit: Option<usize>,
    split_at: Option<usize>,
    outbound: Vec<Bytes>,
    stats: StackStats,
}

impl std::fmt::Debug for LayerStack {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LayerStack")
            .field("kind", &self.kind)
            .field("layers", &self.layer_names())
            .field("stats", &self.stats)
            .finish()
    }
}

pub struct StackBuilder {
    kind: UnitKind,
    framing: Framing,
    layers: Vec<Box<dyn Layer>>,
    max_unit: Option<usize>,
}

impl StackBuilder {
    /// Adds a layer inside all layers added so far.
    pub fn layer(mut self, layer: impl Layer) -> Self {
        self.layers.push(Box::new(layer));
        self
    }

    pub fn boxed_layer(mut self, layer: Box<dyn Layer>) -> Self {
        self.layers.push(layer);
        self
    }

    pub fn framing(mut self, framing: Framing) -> Self {
        self.framing = framing;
        self
    }

    /// BASP framing in the variant matching the transport kind.
    pub fn basp(self) -> Self {
        let framing = match self.kind {
            UnitKind::Stream => Framing::basp_stream(),
            UnitKind::Datagram => Framing::BaspDatagram,
        };
        self.framing(framing)
    }

    /// Largest unit the transport accepts.
    pub fn max_unit(mut self, limit: usize) -> Self {
        self.max_unit = Some(limit);
        self
    }

    pub fn build(self) -> Result<LayerStack, StackError> {
        match (self.kind, &self.framing) {
            (UnitKind::Stream, _) if !self.layers.is_empty() => {
                return Err(StackError::LayersOnStream(self.layers[0].name()))
            }
            (UnitKind::Stream, Framing::BaspDatagram) | (UnitKind::Datagram, Framing::BaspStream(_)) => {
                return Err(StackError::FramingMismatch {
                    framing: self.framing.name(),
                    kind: self.kind,
                })
            }
            _ => {}
        }
        let mut headroom = Vec::with_capacity(self.layers.len());
        let mut total = 0;
        for layer in &self.layers {
            headroom.push(total);
            total += layer.header_len();
        }
        let split_at = self.layers.iter().rposition(|l| l.splits_units());
        Ok(LayerStack {
            kind: self.kind,
            total_headroom: total + self.framing.header_len(),
            framing: self.framing,
            layers: self.layers,
            headroom,
            max_unit: self.max_unit,
            split_at,
            outbound: Vec::new(),
            stats: StackStats::default(),
        })
    }
}

impl LayerStack {
    /// Starts a stack for the given transport kind. Datagram stacks default
    /// to the UDP payload limit.
    pub fn builder(kind: UnitKind) -> StackBuilder {
        StackBuilder {
            kind,
            framing: Framing::Raw,
            layers: Vec::new(),
            max_unit: match kind {
                UnitKind::Stream => None,
                UnitKind::Datagram => Some(UDP_MAX_PAYLOAD),
            },
        }
    }

    pub fn kind(&self) -> UnitKind {
        self.kind
    }

    pub fn framing(&self) -> &Framing {
        &self.framing
    }

    /// Layer names, outermost first, followed by the framing.
    pub fn layer_names(&self) -> Vec<&'static str> {
        self.layers
            .iter()
            .map(|l| l.name())
            .chain(std::iter::once(self.framing.name()))
            .collect()
    }

    /// Bytes of headers added to a message that is not sliced.
    pub fn overhead(&self) -> usize {
        self.total_headroom
    }

    pub fn layer<T: Layer>(&self) -> Option<&T> {
        self.layers.iter().find_map(|l| l.as_any().downcast_ref::<T>())
    }

    pub fn layer_mut<T: Layer>(&mut self) -> Option<&mut T> {
        self.layers
            .iter_mut()
            .find_map(|l| l.as_any_mut().downcast_mut::<T>())
    }

    pub fn stats(&self) -> StackStats {
        self.stats
    }

    pub fn reset_stats(&mut self) {
        self.stats = StackStats::default();
    }

    /// Runs a message through every layer, innermost first, and returns the
    /// wire units to hand to the transport.
    pub fn send(&mut self, msg: &Message, now: Time) -> Result<Vec<Bytes>, LayerError> {
        let mut units = Vec::with_capacity(1);
        self.send_into(msg, now, &mut units)?;
        Ok(units.into_iter().map(WireBuffer::into_bytes).collect())
    }

    pub fn send_into(
        &mut self,
        msg: &Message,
        now: Time,
        out: &mut Vec<WireBuffer>,
    ) -> Result<(), LayerError> {
        let unit = self.framing.encode(msg, self.total_headroom)?;
        self.stats.send_copies += unit.copy_count();
        if let (Some(limit), None) = (self.max_unit, self.split_at) {
            let size = unit.len() + self.total_headroom - self.framing.header_len();
            if size > limit {
                return Err(LayerError::PayloadTooLarge { size, limit });
            }
        }
        if self.layers.is_empty() {
            out.push(unit);
            return Ok(());
        }
        let mut units = vec![unit];
        let mut copies = 0;
        for i in (0..self.layers.len()).rev() {
            let mut next = Vec::with_capacity(units.len());
            let mut cx = LayerCx {
                now,
                headroom: self.headroom[i],
                copies: &mut copies,
                down: &mut next,
            };
            for unit in units {
                self.layers[i].on_send(unit, &mut cx)?;
            }
            units = next;
        }
        out.extend(units);
        Ok(())
    }

    /// Runs one received unit (or stream chunk) through the layers,
    /// outermost first, appending deliverable messages to `out`.
    ///
    /// Units some layer wants sent back (acknowledgements) are queued and
    /// can be collected with [`LayerStack::drain_outbound`]. On error the
    /// offending unit is dropped; messages decoded before the error are
    /// still appended.
    pub fn receive(&mut self, unit: Bytes, now: Time, out: &mut Vec<Message>) -> Result<(), LayerError> {
        if self.layers.is_empty() {
            return match self.framing.decode(unit, &mut self.stats.copies, out) {
                Ok(reads) => {
                    self.stats.reads += reads;
                    Ok(())
                }
                Err(e) => {
                    self.stats.malformed += 1;
                    Err(e)
                }
            };
        }
        let mut first_err = None;
        self.deliver_from(0, vec![unit], now, out, &mut first_err);
        self.finish(first_err)
    }

    /// Convenience wrapper around [`LayerStack::receive`].
    pub fn receive_vec(&mut self, unit: Bytes, now: Time) -> Result<Vec<Message>, LayerError> {
        let mut out = Vec::new();
        self.receive(unit, now, &mut out)?;
        Ok(out)
    }

    /// Earliest time at which some layer wants [`LayerStack::on_timeout`].
    pub fn next_deadline(&self) -> Option<Time> {
        self.layers.iter().filter_map(|l| l.next_deadline()).min()
    }

    /// Fires every layer timeout that is due at `now`. Messages released by
    /// the timeouts are appended to `out`; retransmissions are queued as
    /// outbound units.
    pub fn on_timeout(&mut self, now: Time, out: &mut Vec<Message>) -> Result<(), LayerError> {
        let mut first_err = None;
        for i in 0..self.layers.len() {
            if !self.layers[i].next_deadline().is_some_and(|d| d <= now) {
                continue;
            }
            let mut up = Vec::new();
            let mut down = Vec::new();
            let mut cx = LayerCx {
                now,
                headroom: self.headroom[i],
                copies: &mut self.stats.copies,
                down: &mut down,
            };
            self.layers[i].on_timeout(&mut cx, &mut up);
            self.push_down(i, down, now);
            if !up.is_empty() {
                self.deliver_from(i + 1, up, now, out, &mut first_err);
            }
        }
        self.finish(first_err)
    }

    pub fn has_outbound(&self) -> bool {
        !self.outbound.is_empty()
    }

    /// Takes the units queued for the transport by receive and timeout
    /// processing.
    pub fn drain_outbound(&mut self) -> Vec<Bytes> {
        std::mem::take(&mut self.outbound)
    }

    fn finish(&mut self, first_err: Option<LayerError>) -> Result<(), LayerError> {
        match first_err {
            Some(e) => {
                self.stats.malformed += 1;
                Err(e)
            }
            None => Ok(()),
        }
    }

    fn deliver_from(
        &mut self,
        start: usize,
        mut units: Vec<Bytes>,
        now: Time,
        out: &mut Vec<Message>,
        first_err: &mut Option<LayerError>,
    ) {
        for i in start..self.layers.len() {
            let mut next = Vec::with_capacity(units.len());
            let mut down = Vec::new();
            let mut cx = LayerCx {
                now,
                headroom: self.headroom[i],
                copies: &mut self.stats.copies,
                down: &mut down,
            };
            for unit in units {
                if let Err(e) = self.layers[i].on_receive(unit, &mut cx, &mut next) {
                    first_err.get_or_insert(e);
                }
            }
            self.push_down(i, down, now);
            units = next;
        }
        for unit in units {
            match self.framing.decode(unit, &mut self.stats.copies, out) {
                Ok(reads) => self.stats.reads += reads,
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
    }

    /// Sends units produced by `layers[from]` through the layers outside it.
    fn push_down(&mut self, from: usize, mut units: Vec<WireBuffer>, now: Time) {
        if units.is_empty() {
            return;
        }
        let mut copies = 0;
        for i in (0..from).rev() {
            let mut next = Vec::with_capacity(units.len());
            let mut cx = LayerCx {
                now,
                headroom: self.headroom[i],
                copies: &mut copies,
                down: &mut next,
            };
            for unit in units {
                if let Err(e) = self.layers[i].on_send(unit, &mut cx) {
                    log::warn!("dropping outbound unit at {}: {e}", self.layers[i].name());
                }
            }
            units = next;
        }
        self.outbound
            .extend(units.into_iter().map(WireBuffer::into_bytes));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{HeartbeatLayer, OrderingLayer, ReliabilityLayer, SlicingLayer};
    use crate::wire::{ActorId, BaspHeader};
    use std::time::Duration;

    const T0: Duration = Duration::ZERO;

    fn full() -> LayerStack {
        LayerStack::builder(UnitKind::Datagram)
            .layer(HeartbeatLayer::default())
            .layer(ReliabilityLayer::default())
            .layer(OrderingLayer::default())
            .basp()
            .build()
            .unwrap()
    }

    fn msg(payload: &'static [u8]) -> Message {
        Message::new(ActorId(3), ActorId(4), Bytes::from_static(payload))
    }

    #[test]
    fn outermost_header_comes_first() {
        let mut stack = full();
        assert_eq!(stack.layer_names(), ["heartbeat", "reliability", "ordering", "basp-datagram"]);
        assert_eq!(stack.overhead(), 1 + 3 + 2 + 20);
        let unit = stack.send(&msg(b"abc"), T0).unwrap().remove(0);
        assert_eq!(unit.len(), 26 + 3);
        assert_eq!(unit[0], 0, "heartbeat data tag");
        assert_eq!(&unit[1..4], &[0, 0, 0], "reliability data, seq 0");
        assert_eq!(&unit[4..6], &[0, 0], "ordering seq 0");
        let basp = BaspHeader::decode(&unit[6..26]).unwrap();
        assert_eq!(basp.payload_size, 3);
        assert_eq!(&unit[26..], b"abc");
    }

    #[test]
    fn receive_reverses_send() {
        let (mut a, mut b) = (full(), full());
        for body in [&b"one"[..], b"two", b""] {
            let m = Message::new(ActorId(1), ActorId(2), Bytes::copy_from_slice(body));
            let unit = a.send(&m, T0).unwrap().remove(0);
            assert_eq!(b.receive_vec(unit, T0).unwrap(), vec![m]);
        }
        assert_eq!(b.stats().copies, 0);
    }

    #[test]
    fn acks_pass_through_outer_layers() {
        let (mut a, mut b) = (full(), full());
        let unit = a.send(&msg(b"x"), T0).unwrap().remove(0);
        b.receive_vec(unit, T0).unwrap();
        let acks = b.drain_outbound();
        assert_eq!(acks.len(), 1);
        assert_eq!(acks[0][0], 0, "ack carries the heartbeat tag");
        assert_eq!(acks[0].len(), 1 + 3);
        assert!(a.receive_vec(acks[0].clone(), T0).unwrap().is_empty());
        assert_eq!(a.layer::<ReliabilityLayer>().unwrap().unacked_len(), 0);
    }

    #[test]
    fn oversized_rejected_before_layers_run() {
        let mut stack = LayerStack::builder(UnitKind::Datagram)
            .layer(OrderingLayer::default())
            .basp()
            .build()
            .unwrap();
        let big = Message::new(ActorId(1), ActorId(2), vec![0u8; UDP_MAX_PAYLOAD]);
        let err = stack.send(&big, T0).unwrap_err();
        assert_eq!(
            err,
            LayerError::PayloadTooLarge {
                size: UDP_MAX_PAYLOAD + 22,
                limit: UDP_MAX_PAYLOAD
            }
        );
        assert_eq!(stack.layer::<OrderingLayer>().unwrap().next_send(), 0);
    }

    #[test]
    fn slicing_lifts_the_unit_limit() {
        let build = || {
            LayerStack::builder(UnitKind::Datagram)
                .layer(SlicingLayer::new(1400))
                .basp()
                .build()
                .unwrap()
        };
        let (mut a, mut b) = (build(), build());
        let big = Message::new(ActorId(1), ActorId(2), vec![7u8; 100_000]);
        let units = a.send(&big, T0).unwrap();
        assert!(units.iter().all(|u| u.len() <= 1400));
        let mut out = Vec::new();
        for u in units {
            b.receive(u, T0, &mut out).unwrap();
        }
        assert_eq!(out, vec![big]);
    }

    #[test]
    fn builder_rejects_bad_combinations() {
        let err = LayerStack::builder(UnitKind::Stream)
            .layer(OrderingLayer::default())
            .basp()
            .build()
            .unwrap_err();
        assert_eq!(err, StackError::LayersOnStream("ordering"));
        let err = LayerStack::builder(UnitKind::Stream)
            .framing(Framing::BaspDatagram)
            .build()
            .unwrap_err();
        assert!(matches!(err, StackError::FramingMismatch { .. }));
    }

    #[test]
    fn malformed_unit_counted_and_dropped() {
        let mut stack = full();
        assert!(stack.receive_vec(Bytes::from_static(&[0, 0]), T0).is_err());
        assert_eq!(stack.stats().malformed, 1);
    }

    #[test]
    fn stream_stack_reassembles_chunks() {
        let build = || LayerStack::builder(UnitKind::Stream).basp().build().unwrap();
        let (mut a, mut b) = (build(), build());
        let bytes: Vec<u8> = [msg(b"hello"), msg(b"world")]
            .iter()
            .flat_map(|m| a.send(m, T0).unwrap().remove(0).to_vec())
            .collect();
        let mut out = Vec::new();
        for chunk in bytes.chunks(7) {
            b.receive(Bytes::copy_from_slice(chunk), T0, &mut out).unwrap();
        }
        assert_eq!(out, vec![msg(b"hello"), msg(b"world")]);
        assert_eq!(b.stats().reads, 4);
    }

    #[test]
    fn timeout_releases_buffered_message() {
        let (mut a, mut b) = (full(), full());
        let first = a.send(&msg(b"0"), T0).unwrap().remove(0);
        let second = a.send(&msg(b"1"), T0).unwrap().remove(0);
        drop(first);
        assert!(b.receive_vec(second, T0).unwrap().is_empty());
        let deadline = b.next_deadline().unwrap();
        let mut out = Vec::new();
        b.on_timeout(deadline, &mut out).unwrap();
        assert!(out.is_empty() || out == vec![msg(b"1")]);
        // heartbeat deadline may come first; fire until the ordering layer flushes
        while out.is_empty() {
            let d = b.next_deadline().unwrap();
            b.on_timeout(d, &mut out).unwrap();
        }
        assert_eq!(out, vec![msg(b"1")]);
        assert_eq!(b.layer::<OrderingLayer>().unwrap().buffer().abandoned(), 1);
    }
}
