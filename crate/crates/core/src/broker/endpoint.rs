use super::{Behavior, BehaviorCx, BrokerEvent, OwnerCheck};
use crate::layers::{HeartbeatLayer, LayerStack, Liveness};
use crate::time::Time;
use crate::transport::{Transport, TransportError, WRITE_WATERMARK};
use crate::wire::{Message, NodeId};
use bytes::Bytes;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BrokerStats {
    /// Behavior invocations with a message.
    pub delivered: u64,
    /// Messages passed to the stack for sending.
    pub sent: u64,
    /// Units dropped because the stack could not parse them.
    pub malformed: u64,
    /// Transport reads that returned data.
    pub reads: u64,
}

/// Binds one transport policy and one protocol policy behind a message
/// interface.
pub struct EndpointBroker<T, B> {
    transport: T,
    stack: LayerStack,
    behavior: B,
    peer: NodeId,
    closed: bool,
    suspected: bool,
    backlogged: bool,
    stats: BrokerStats,
    owner: OwnerCheck,
    inbox: Vec<Message>,
    outbox: Vec<Message>,
}

impl<T: Transport, B: Behavior> EndpointBroker<T, B> {
    pub fn new(transport: T, stack: LayerStack, behavior: B) -> Self {
        debug_assert_eq!(transport.kind(), stack.kind(), "transport and stack kinds differ");
        EndpointBroker {
            transport,
            stack,
            behavior,
            peer: NodeId::next(),
            closed: false,
            suspected: false,
            backlogged: false,
            stats: BrokerStats::default(),
            owner: OwnerCheck::default(),
            inbox: Vec::new(),
            outbox: Vec::new(),
        }
    }

    pub fn with_peer(mut self, peer: NodeId) -> Self {
        self.peer = peer;
        self
    }

    pub fn peer(&self) -> NodeId {
        self.peer
    }

    pub fn stats(&self) -> BrokerStats {
        self.stats
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn stack(&self) -> &LayerStack {
        &self.stack
    }

    pub fn stack_mut(&mut self) -> &mut LayerStack {
        &mut self.stack
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn transport_mut(&mut self) -> &mut T {
        &mut self.transport
    }

    pub fn behavior(&self) -> &B {
        &self.behavior
    }

    pub fn behavior_mut(&mut self) -> &mut B {
        &mut self.behavior
    }

    /// Binds the broker to the calling thread.
    pub(crate) fn adopt(&mut self) {
        self.owner.adopt();
    }

    pub fn next_deadline(&self) -> Option<Time> {
        self.stack.next_deadline()
    }

    /// Runs `msg` through the stack and writes the resulting units.
    /// Failures are reported to the behavior as events.
    pub fn send(&mut self, msg: Message, now: Time) {
        self.owner.check();
        self.outbox.push(msg);
        self.flush_outbox(now);
    }

    /// Reads everything the transport has and dispatches the decoded
    /// messages.
    pub fn on_readable(&mut self, now: Time) {
        self.owner.check();
        while !self.closed {
            match self.transport.read() {
                Ok(Some(unit)) => {
                    self.stats.reads += 1;
                    self.on_unit(unit, now);
                }
                Ok(None) => break,
                Err(TransportError::Closed) => self.mark_closed(now),
                Err(e) => {
                    log::warn!("read from {} failed: {e}", self.peer);
                    self.mark_closed(now);
                }
            }
        }
    }

    /// Feeds one unit that was read elsewhere (a demultiplexed datagram).
    pub fn on_unit(&mut self, unit: Bytes, now: Time) {
        self.owner.check();
        let mut inbox = std::mem::take(&mut self.inbox);
        if let Err(e) = self.stack.receive(unit, now, &mut inbox) {
            self.stats.malformed += 1;
            log::debug!("dropping unit from {}: {e}", self.peer);
        }
        self.dispatch(&mut inbox, now);
        self.inbox = inbox;
        self.flush_stack(now);
    }

    pub fn on_writable(&mut self, now: Time) {
        self.owner.check();
        if let Err(e) = self.transport.flush() {
            log::debug!("flush to {} failed: {e}", self.peer);
            self.mark_closed(now);
        }
    }

    /// Fires due layer timeouts.
    pub fn on_timer(&mut self, now: Time) {
        self.owner.check();
        let mut inbox = std::mem::take(&mut self.inbox);
        if let Err(e) = self.stack.on_timeout(now, &mut inbox) {
            self.stats.malformed += 1;
            log::debug!("dropping released unit from {}: {e}", self.peer);
        }
        self.dispatch(&mut inbox, now);
        self.inbox = inbox;
        self.flush_stack(now);
        let suspected = self
            .stack
            .layer::<HeartbeatLayer>()
            .is_some_and(|h| h.liveness(now) == Liveness::Suspected);
        if suspected && !self.suspected {
            self.notify(BrokerEvent::PeerSuspected, now);
        }
        self.suspected = suspected;
    }

    /// Reports a closed peer to the behavior and stops reading.
    pub fn close(&mut self, now: Time) {
        self.mark_closed(now);
    }

    fn dispatch(&mut self, inbox: &mut Vec<Message>, now: Time) {
        for msg in inbox.drain(..) {
            self.stats.delivered += 1;
            let mut cx = BehaviorCx::new(now, &mut self.outbox);
            self.behavior.on_message(msg, &mut cx);
        }
        self.flush_outbox(now);
    }

    fn notify(&mut self, event: BrokerEvent, now: Time) {
        let mut cx = BehaviorCx::new(now, &mut self.outbox);
        self.behavior.on_event(event, &mut cx);
        self.flush_outbox(now);
    }

    fn flush_outbox(&mut self, now: Time) {
        while !self.outbox.is_empty() {
            let pending = std::mem::take(&mut self.outbox);
            for msg in pending {
                if self.closed {
                    self.notify_closed(now);
                    continue;
                }
                self.stats.sent += 1;
                match self.stack.send(&msg, now) {
                    Ok(units) => self.write_units(units, now),
                    Err(e) => {
                        let mut cx = BehaviorCx::new(now, &mut self.outbox);
                        self.behavior.on_event(BrokerEvent::SendFailed(e), &mut cx);
                    }
                }
            }
        }
        self.flush_stack(now);
    }

    fn flush_stack(&mut self, now: Time) {
        if self.stack.has_outbound() {
            let units = self.stack.drain_outbound();
            self.write_units(units, now);
        }
    }

    fn write_units(&mut self, units: Vec<Bytes>, now: Time) {
        for unit in units {
            if self.closed {
                return;
            }
            match self.transport.write(unit) {
                Ok(()) => {}
                Err(TransportError::Closed) => self.mark_closed(now),
                Err(e) => log::warn!("write to {} failed: {e}", self.peer),
            }
        }
        let queued = self.transport.queued();
        if queued >= WRITE_WATERMARK && !self.backlogged {
            self.backlogged = true;
            let mut cx = BehaviorCx::new(now, &mut self.outbox);
            self.behavior.on_event(BrokerEvent::WriteBacklog(queued), &mut cx);
        } else if queued < WRITE_WATERMARK {
            self.backlogged = false;
        }
    }

    fn mark_closed(&mut self, now: Time) {
        if !self.closed {
            self.closed = true;
            self.notify_closed(now);
        }
    }

    fn notify_closed(&mut self, now: Time) {
        let mut cx = BehaviorCx::new(now, &mut self.outbox);
        self.behavior.on_event(BrokerEvent::PeerClosed, &mut cx);
        // nothing can be sent on a closed endpoint
        self.outbox.clear();
    }
}
