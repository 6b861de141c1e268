use super::{Layer, LayerCx, LayerError};
use crate::time::Time;
use crate::wire::{seq_is_before, serial_distance, OrderingHeader, WireBuffer};
use bytes::Bytes;
use std::any::Any;
use std::collections::BTreeMap;
use std::time::Duration;

/// Items the ordering buffer holds on to must be detached from the receive
/// buffer they were read from.
pub trait Stash: Sized {
    /// Returns an owned copy and the number of payload bytes copied.
    fn stash(self) -> (Self, u64);
}

impl Stash for Bytes {
    fn stash(self) -> (Self, u64) {
        let len = self.len() as u64;
        (Bytes::copy_from_slice(&self), len)
    }
}

/// FIFO reordering over 16-bit serials with a bounded pending buffer.
///
/// Missing serials are given up on when the pending buffer would overflow or
/// when the delivery timeout expires. In both cases delivery resumes at the
/// smallest buffered serial and the serials skipped over are abandoned.
#[derive(Debug)]
pub struct OrderingBuffer<T> {
    next_expected: u16,
    pending: BTreeMap<u16, T>,
    max_pending: usize,
    delivery_timeout: Duration,
    deadline: Option<Time>,
    abandoned: u64,
    late: u64,
    copies: u64,
}

impl<T: Stash> OrderingBuffer<T> {
    pub fn new(max_pending: usize, delivery_timeout: Duration) -> Self {
        Self::starting_at(0, max_pending, delivery_timeout)
    }

    pub fn starting_at(next_expected: u16, max_pending: usize, delivery_timeout: Duration) -> Self {
        OrderingBuffer {
            next_expected,
            pending: BTreeMap::new(),
            max_pending,
            delivery_timeout,
            deadline: None,
            abandoned: 0,
            late: 0,
            copies: 0,
        }
    }

    pub fn next_expected(&self) -> u16 {
        self.next_expected
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Buffered serials in delivery order.
    pub fn pending_serials(&self) -> Vec<u16> {
        let mut serials: Vec<u16> = self.pending.keys().copied().collect();
        serials.sort_by_key(|&s| serial_distance(self.next_expected, s));
        serials
    }

    /// Serials skipped by forced flushes.
    pub fn abandoned(&self) -> u64 {
        self.abandoned
    }

    /// Arrivals dropped because they were behind `next_expected` or already
    /// buffered.
    pub fn late(&self) -> u64 {
        self.late
    }

    /// Payload bytes copied into the pending buffer.
    pub fn copies(&self) -> u64 {
        self.copies
    }

    pub fn deadline(&self) -> Option<Time> {
        self.deadline
    }

    pub fn on_receive(&mut self, seq: u16, item: T, now: Time, out: &mut Vec<T>) {
        if seq == self.next_expected {
            out.push(item);
            self.next_expected = self.next_expected.wrapping_add(1);
            self.drain_run(out);
        } else if seq_is_before(seq, self.next_expected) || self.pending.contains_key(&seq) {
            self.late += 1;
        } else if self.pending.len() < self.max_pending {
            self.stash(seq, item);
        } else {
            // Overflow. The newcomer takes part in the flush so it is only
            // copied if it is not part of the resumed run.
            let start = match self.smallest_pending() {
                Some(s) if serial_distance(self.next_expected, s) < serial_distance(self.next_expected, seq) => s,
                _ => seq,
            };
            self.skip_to(start);
            let mut newcomer = Some(item);
            loop {
                if self.next_expected == seq {
                    out.push(newcomer.take().expect("newcomer consumed once"));
                } else if let Some(buffered) = self.pending.remove(&self.next_expected) {
                    out.push(buffered);
                } else {
                    break;
                }
                self.next_expected = self.next_expected.wrapping_add(1);
            }
            if let Some(item) = newcomer {
                self.stash(seq, item);
            }
        }
        self.update_deadline(now);
    }

    pub fn on_timeout(&mut self, now: Time, out: &mut Vec<T>) {
        match self.deadline {
            Some(deadline) if deadline <= now => {}
            _ => return,
        }
        if let Some(start) = self.smallest_pending() {
            self.skip_to(start);
            self.drain_run(out);
        }
        self.deadline = None;
        self.update_deadline(now);
    }

    fn stash(&mut self, seq: u16, item: T) {
        let (owned, copied) = item.stash();
        self.copies += copied;
        self.pending.insert(seq, owned);
    }

    fn smallest_pending(&self) -> Option<u16> {
        self.pending
            .range(self.next_expected..)
            .next()
            .or_else(|| self.pending.range(..self.next_expected).next())
            .map(|(&s, _)| s)
    }

    fn skip_to(&mut self, start: u16) {
        self.abandoned += serial_distance(self.next_expected, start) as u64;
        self.next_expected = start;
    }

    fn drain_run(&mut self, out: &mut Vec<T>) {
        while let Some(item) = self.pending.remove(&self.next_expected) {
            out.push(item);
            self.next_expected = self.next_expected.wrapping_add(1);
        }
    }

    fn update_deadline(&mut self, now: Time) {
        if self.pending.is_empty() {
            self.deadline = None;
        } else if self.deadline.is_none() {
            self.deadline = Some(now + self.delivery_timeout);
        }
    }
}

/// Prepends a 16-bit sequence number and restores send order on receipt.
#[derive(Debug)]
pub struct OrderingLayer {
    next_send: u16,
    buffer: OrderingBuffer<Bytes>,
}

impl OrderingLayer {
    pub const DEFAULT_MAX_PENDING: usize = 5;
    pub const DEFAULT_DELIVERY_TIMEOUT: Duration = Duration::from_millis(100);

    pub fn new(max_pending: usize, delivery_timeout: Duration) -> OrderingLayer {
        OrderingLayer {
            next_send: 0,
            buffer: OrderingBuffer::new(max_pending, delivery_timeout),
        }
    }

    pub fn buffer(&self) -> &OrderingBuffer<Bytes> {
        &self.buffer
    }

    pub fn next_send(&self) -> u16 {
        self.next_send
    }
}

impl Default for OrderingLayer {
    fn default() -> Self {
        OrderingLayer::new(Self::DEFAULT_MAX_PENDING, Self::DEFAULT_DELIVERY_TIMEOUT)
    }
}

impl Layer for OrderingLayer {
    fn name(&self) -> &'static str {
        "ordering"
    }

    fn header_len(&self) -> usize {
        OrderingHeader::LEN
    }

    fn on_send(&mut self, mut unit: WireBuffer, cx: &mut LayerCx<'_>) -> Result<(), LayerError> {
        let header = OrderingHeader {
            sequence: self.next_send,
        };
        unit.prepend(&header.to_bytes());
        self.next_send = self.next_send.wrapping_add(1);
        cx.down.push(unit);
        Ok(())
    }

    fn on_receive(
        &mut self,
        unit: Bytes,
        cx: &mut LayerCx<'_>,
        up: &mut Vec<Bytes>,
    ) -> Result<(), LayerError> {
        let header = OrderingHeader::decode(&unit).map_err(|e| LayerError::malformed("ordering", e))?;
        let copied = self.buffer.copies();
        self.buffer
            .on_receive(header.sequence, unit.slice(OrderingHeader::LEN..), cx.now, up);
        *cx.copies += self.buffer.copies() - copied;
        Ok(())
    }

    fn on_timeout(&mut self, cx: &mut LayerCx<'_>, up: &mut Vec<Bytes>) {
        self.buffer.on_timeout(cx.now, up);
    }

    fn next_deadline(&self) -> Option<Time> {
        self.buffer.deadline()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
