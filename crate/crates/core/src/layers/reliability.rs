use super::{Layer, LayerCx, LayerError};
use crate::time::Time;
use crate::wire::{ReliabilityHeader, ReliabilityKind, WireBuffer};
use bytes::Bytes;
use std::any::Any;
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::time::Duration;

/// Largest number of unacknowledged units; keeps the serial window
/// unambiguous.
const WINDOW: usize = 1 << 15;

#[derive(Debug)]
struct Unacked {
    wire: Bytes,
    deadline: Time,
}

/// Per-unit acknowledgement with a fixed retransmit timeout.
///
/// Every DATA unit is acknowledged individually, including duplicates. The
/// receiver remembers the most recent 2^15 delivered serials to suppress
/// duplicates.
#[derive(Debug)]
pub struct ReliabilityLayer {
    next_send_seq: u16,
    rto: Duration,
    unacked: HashMap<u16, Unacked>,
    deadlines: BTreeSet<(Time, u16)>,
    delivered: HashSet<u16>,
    delivered_order: VecDeque<u16>,
    retransmissions: u64,
    duplicates: u64,
    acks_sent: u64,
}

impl ReliabilityLayer {
    pub const DEFAULT_RTO: Duration = Duration::from_millis(40);

    pub fn new(rto: Duration) -> ReliabilityLayer {
        ReliabilityLayer {
            next_send_seq: 0,
            rto,
            unacked: HashMap::new(),
            deadlines: BTreeSet::new(),
            delivered: HashSet::new(),
            delivered_order: VecDeque::new(),
            retransmissions: 0,
            duplicates: 0,
            acks_sent: 0,
        }
    }

    /// Starts the send sequence at `seq` instead of zero.
    pub fn with_initial_seq(mut self, seq: u16) -> Self {
        self.next_send_seq = seq;
        self
    }

    pub fn rto(&self) -> Duration {
        self.rto
    }

    pub fn next_send_seq(&self) -> u16 {
        self.next_send_seq
    }

    pub fn unacked_len(&self) -> usize {
        self.unacked.len()
    }

    pub fn is_unacked(&self, seq: u16) -> bool {
        self.unacked.contains_key(&seq)
    }

    pub fn retransmissions(&self) -> u64 {
        self.retransmissions
    }

    pub fn duplicates(&self) -> u64 {
        self.duplicates
    }

    pub fn acks_sent(&self) -> u64 {
        self.acks_sent
    }

    fn record_delivered(&mut self, seq: u16) -> bool {
        if !self.delivered.insert(seq) {
            return false;
        }
        self.delivered_order.push_back(seq);
        if self.delivered_order.len() > WINDOW {
            if let Some(old) = self.delivered_order.pop_front() {
                self.delivered.remove(&old);
            }
        }
        true
    }
}

impl Default for ReliabilityLayer {
    fn default() -> Self {
        ReliabilityLayer::new(Self::DEFAULT_RTO)
    }
}

impl Layer for ReliabilityLayer {
    fn name(&self) -> &'static str {
        "reliability"
    }

    fn header_len(&self) -> usize {
        ReliabilityHeader::LEN
    }

    fn on_send(&mut self, mut unit: WireBuffer, cx: &mut LayerCx<'_>) -> Result<(), LayerError> {
        if self.unacked.len() >= WINDOW {
            return Err(LayerError::WindowFull);
        }
        let seq = self.next_send_seq;
        unit.prepend(&ReliabilityHeader::data(seq).to_bytes());
        let deadline = cx.now + self.rto;
        self.unacked.insert(
            seq,
            Unacked {
                wire: Bytes::copy_from_slice(unit.as_slice()),
                deadline,
            },
        );
        self.deadlines.insert((deadline, seq));
        self.next_send_seq = seq.wrapping_add(1);
        cx.down.push(unit);
        Ok(())
    }

    fn on_receive(
        &mut self,
        unit: Bytes,
        cx: &mut LayerCx<'_>,
        up: &mut Vec<Bytes>,
    ) -> Result<(), LayerError> {
        let header =
            ReliabilityHeader::decode(&unit).map_err(|e| LayerError::malformed("reliability", e))?;
        match header.kind {
            ReliabilityKind::Data => {
                let ack = cx.unit(0, &ReliabilityHeader::ack(header.sequence).to_bytes());
                cx.down.push(ack);
                self.acks_sent += 1;
                if self.record_delivered(header.sequence) {
                    up.push(unit.slice(ReliabilityHeader::LEN..));
                } else {
                    self.duplicates += 1;
                }
            }
            ReliabilityKind::Ack => {
                if let Some(entry) = self.unacked.remove(&header.sequence) {
                    self.deadlines.remove(&(entry.deadline, header.sequence));
                }
            }
        }
        Ok(())
    }

    fn on_timeout(&mut self, cx: &mut LayerCx<'_>, _up: &mut Vec<Bytes>) {
        let due: Vec<(Time, u16)> = self
            .deadlines
            .range(..=(cx.now, u16::MAX))
            .copied()
            .collect();
        for key @ (_, seq) in due {
            self.deadlines.remove(&key);
            let entry = self.unacked.get_mut(&seq).expect("deadline without unacked entry");
            entry.deadline = cx.now + self.rto;
            self.deadlines.insert((entry.deadline, seq));
            cx.down.push(cx_unit(cx.headroom, &entry.wire));
            self.retransmissions += 1;
        }
    }

    fn next_deadline(&self) -> Option<Time> {
        self.deadlines.first().map(|&(t, _)| t)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

fn cx_unit(headroom: usize, wire: &[u8]) -> WireBuffer {
    let mut unit = WireBuffer::with_headroom(headroom, wire.len());
    unit.put_header(wire);
    unit
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Harness {
        copies: u64,
        down: Vec<WireBuffer>,
    }

    impl Harness {
        fn new() -> Self {
            Harness {
                copies: 0,
                down: Vec::new(),
            }
        }

        fn cx(&mut self, now_ms: u64) -> LayerCx<'_> {
            LayerCx {
                now: Duration::from_millis(now_ms),
                headroom: 0,
                copies: &mut self.copies,
                down: &mut self.down,
            }
        }

        fn take(&mut self) -> Vec<Vec<u8>> {
            self.down.drain(..).map(|u| u.as_slice().to_vec()).collect()
        }
    }

    fn send(layer: &mut ReliabilityLayer, h: &mut Harness, now_ms: u64, body: &[u8]) -> Vec<u8> {
        layer.on_send(WireBuffer::from(body), &mut h.cx(now_ms)).unwrap();
        h.take().pop().unwrap()
    }

    fn receive(layer: &mut ReliabilityLayer, h: &mut Harness, unit: &[u8]) -> (Vec<Bytes>, Vec<Vec<u8>>) {
        let mut up = Vec::new();
        layer
            .on_receive(Bytes::copy_from_slice(unit), &mut h.cx(0), &mut up)
            .unwrap();
        (up, h.take())
    }

    #[test]
    fn sequences_start_at_zero() {
        let mut layer = ReliabilityLayer::default();
        let mut h = Harness::new();
        assert_eq!(send(&mut layer, &mut h, 0, b"a"), vec![0, 0, 0, b'a']);
        assert_eq!(send(&mut layer, &mut h, 0, b"b"), vec![0, 0, 1, b'b']);
        assert_eq!(layer.unacked_len(), 2);
    }

    #[test]
    fn fresh_and_duplicate_data() {
        let mut layer = ReliabilityLayer::default();
        let mut h = Harness::new();
        let (up, replies) = receive(&mut layer, &mut h, &[0, 0, 0, b'x']);
        assert_eq!(up, vec![Bytes::from_static(b"x")]);
        assert_eq!(replies, vec![vec![1, 0, 0]]);
        let (up, replies) = receive(&mut layer, &mut h, &[0, 0, 0, b'x']);
        assert!(up.is_empty());
        assert_eq!(replies, vec![vec![1, 0, 0]]);
        assert_eq!(layer.duplicates(), 1);
    }

    #[test]
    fn ack_stops_retransmission() {
        let mut layer = ReliabilityLayer::default().with_initial_seq(7);
        let mut h = Harness::new();
        send(&mut layer, &mut h, 0, b"p");
        assert!(layer.is_unacked(7));
        receive(&mut layer, &mut h, &[1, 0, 7]);
        assert!(!layer.is_unacked(7));
        assert_eq!(layer.next_deadline(), None);
        layer.on_timeout(&mut h.cx(1000), &mut Vec::new());
        assert!(h.take().is_empty());
    }

    #[test]
    fn retransmits_at_fixed_spacing() {
        let mut layer = ReliabilityLayer::default();
        let mut h = Harness::new();
        let wire = send(&mut layer, &mut h, 0, b"q");
        assert_eq!(layer.next_deadline(), Some(Duration::from_millis(40)));

        layer.on_timeout(&mut h.cx(39), &mut Vec::new());
        assert!(h.take().is_empty());

        let mut fired_at = Vec::new();
        let mut now = 0;
        while fired_at.len() < 3 {
            now = layer.next_deadline().unwrap().as_millis() as u64;
            layer.on_timeout(&mut h.cx(now), &mut Vec::new());
            let out = h.take();
            assert_eq!(out, vec![wire.clone()]);
            fired_at.push(now);
        }
        assert_eq!(fired_at, vec![40, 80, 120]);
        assert_eq!(layer.retransmissions(), 3);
        assert_eq!(layer.next_deadline(), Some(Duration::from_millis(now + 40)));
    }

    #[test]
    fn sequence_wraps() {
        let mut sender = ReliabilityLayer::default().with_initial_seq(0xFFFF);
        let mut receiver = ReliabilityLayer::default();
        let mut h = Harness::new();
        let a = send(&mut sender, &mut h, 0, b"a");
        let b = send(&mut sender, &mut h, 0, b"b");
        assert_eq!(&a[..3], &[0, 0xFF, 0xFF]);
        assert_eq!(&b[..3], &[0, 0, 0]);
        for unit in [&a, &b] {
            let (up, acks) = receive(&mut receiver, &mut h, unit);
            assert_eq!(up.len(), 1);
            for ack in acks {
                receive(&mut sender, &mut h, &ack);
            }
        }
        assert_eq!(sender.unacked_len(), 0);
    }

    #[test]
    fn window_full() {
        let mut layer = ReliabilityLayer::default();
        let mut h = Harness::new();
        for _ in 0..WINDOW {
            send(&mut layer, &mut h, 0, b"");
        }
        let err = layer.on_send(WireBuffer::new(), &mut h.cx(0));
        assert_eq!(err, Err(LayerError::WindowFull));
    }

    #[test]
    fn short_unit_is_malformed() {
        let mut layer = ReliabilityLayer::default();
        let mut h = Harness::new();
        let err = layer.on_receive(Bytes::from_static(&[0, 1]), &mut h.cx(0), &mut Vec::new());
        assert!(matches!(err, Err(LayerError::MalformedHeader { layer: "reliability", .. })));
    }
}
