//! Helpers and reference models shared by the integration tests.
#![allow(dead_code)]

use bytes::Bytes;
use layered_net::layers::{HeartbeatLayer, Layer, OrderingLayer, ReliabilityLayer, SlicingLayer};
use layered_net::transport::UnitKind;
use layered_net::wire::{ActorId, Message};
use layered_net::LayerStack;
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::BTreeSet;
use std::time::Duration;

/// Layers a random composition may contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerPick {
    Heartbeat,
    Reliability,
    Ordering,
    Slicing(usize),
}

impl LayerPick {
    fn build(self) -> Box<dyn Layer> {
        match self {
            LayerPick::Heartbeat => Box::new(HeartbeatLayer::default()),
            LayerPick::Reliability => Box::new(ReliabilityLayer::default()),
            LayerPick::Ordering => Box::new(OrderingLayer::default()),
            LayerPick::Slicing(mtu) => Box::new(SlicingLayer::new(mtu)),
        }
    }
}

/// A stack description that can be built twice, once per side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Composition {
    pub kind: UnitKind,
    pub basp: bool,
    /// Outermost first.
    pub layers: Vec<LayerPick>,
}

impl Composition {
    pub fn random(rng: &mut impl Rng) -> Composition {
        let kind = if rng.gen_bool(0.2) {
            UnitKind::Stream
        } else {
            UnitKind::Datagram
        };
        let mut layers = Vec::new();
        if kind == UnitKind::Datagram {
            let mut pool = vec![
                LayerPick::Heartbeat,
                LayerPick::Reliability,
                LayerPick::Ordering,
                LayerPick::Slicing(rng.gen_range(64..=1400)),
            ];
            pool.shuffle(rng);
            let n = rng.gen_range(0..=pool.len());
            layers = pool[..n].to_vec();
        }
        Composition {
            kind,
            basp: kind == UnitKind::Stream || rng.gen_bool(0.7),
            layers,
        }
    }

    pub fn build(&self) -> LayerStack {
        let mut b = LayerStack::builder(self.kind);
        for &l in &self.layers {
            b = b.boxed_layer(l.build());
        }
        if self.basp {
            b = b.basp();
        }
        b.build().expect("valid composition")
    }

    /// Largest payload the composition accepts in one message.
    pub fn payload_limit(&self) -> usize {
        let sliced = self.layers.iter().find_map(|l| match l {
            LayerPick::Slicing(mtu) => Some(*mtu),
            _ => None,
        });
        match sliced {
            // leave room for the headers of layers inside the slicer
            Some(mtu) => (255 * (mtu - 4) - 64).min(16 * 1024),
            None => 4096,
        }
    }
}

pub fn payload_with_id(id: u32, len: usize) -> Bytes {
    let mut v = vec![0u8; len.max(4)];
    v[..4].copy_from_slice(&id.to_be_bytes());
    for (i, b) in v[4..].iter_mut().enumerate() {
        *b = (i as u32).wrapping_mul(31).wrapping_add(id) as u8;
    }
    Bytes::from(v)
}

pub fn id_of(payload: &[u8]) -> u32 {
    u32::from_be_bytes(payload[..4].try_into().unwrap())
}

pub fn msg(id: u32, len: usize) -> Message {
    Message::new(ActorId(u64::from(id) + 1), ActorId(7), payload_with_id(id, len))
}

/// Sends `msgs` from `tx` to `rx` over a perfect in-order link, relaying any
/// acknowledgements back, and returns what `rx` delivers.
pub fn relay(tx: &mut LayerStack, rx: &mut LayerStack, msgs: &[Message]) -> Vec<Message> {
    let now = Duration::ZERO;
    let mut delivered = Vec::new();
    let mut back = Vec::new();
    for m in msgs {
        for unit in tx.send(m, now).expect("send") {
            rx.receive(unit, now, &mut delivered).expect("receive");
        }
        for ack in rx.drain_outbound() {
            tx.receive(ack, now, &mut back).expect("ack");
        }
    }
    assert!(back.is_empty(), "acknowledgements must not surface as messages");
    delivered
}

/// Brute-force model of the ordering rule: deliver consecutive serials, hold
/// up to `max_pending` early ones, and when the buffer overflows or times
/// out resume at the smallest buffered serial, abandoning the gap.
///
/// Serials are plain integers here (no wrap), which is all the small
/// permutations need.
#[derive(Debug, Default)]
pub struct OrderingOracle {
    next: u32,
    pending: BTreeSet<u32>,
    max_pending: usize,
    pub abandoned: u32,
    pub emitted: Vec<u32>,
}

impl OrderingOracle {
    pub fn new(max_pending: usize) -> Self {
        OrderingOracle {
            max_pending,
            ..Default::default()
        }
    }

    fn drain_run(&mut self) {
        while self.pending.remove(&self.next) {
            self.emitted.push(self.next);
            self.next += 1;
        }
    }

    fn resume_at_smallest(&mut self) {
        if let Some(&first) = self.pending.iter().next() {
            self.abandoned += first - self.next;
            self.next = first;
            self.drain_run();
        }
    }

    pub fn arrive(&mut self, s: u32) {
        if s < self.next || self.pending.contains(&s) {
            return;
        }
        if s == self.next {
            self.emitted.push(s);
            self.next += 1;
            self.drain_run();
            return;
        }
        self.pending.insert(s);
        if self.pending.len() > self.max_pending {
            self.resume_at_smallest();
        }
    }

    /// One delivery timeout.
    pub fn timeout(&mut self) {
        self.resume_at_smallest();
    }

    pub fn has_pending(&self) -> bool {
        !self.pending.is_empty()
    }
}

/// Every ordering of `n` items.
pub fn permutations(items: &[u32]) -> Vec<Vec<u32>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Every subset of `0..n` with at most `k` elements.
pub fn small_subsets(n: u32, k: usize) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for i in 0..n {
        let mut more = Vec::new();
        for s in &out {
            if s.len() < k {
                let mut t = s.clone();
                t.push(i);
                more.push(t);
            }
        }
        out.extend(more);
    }
    out
}
