use super::clock::VirtualClock;
use super::link::{Direction, Link, LinkModel};
use crate::broker::{Behavior, EndpointBroker};
use crate::layers::LayerStack;
use crate::time::Time;
use crate::transport::MockTransport;
use crate::wire::Message;
use bytes::Bytes;
use std::time::Duration;

/// Virtual time allowed to pass without any message delivery before a run
/// is declared stalled.
pub const DEFAULT_STALL_LIMIT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("simulation stalled at {at:?}: no delivery for {idle:?}")]
    Stalled { at: Time, idle: Duration },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimStats {
    /// Units handed to the link.
    pub units_sent: u64,
    /// Units that reached the far transport.
    pub units_delivered: u64,
    /// Timer callbacks fired on either broker.
    pub timer_fires: u64,
}

struct Arrival {
    to: usize,
    unit: Bytes,
}

/// Two endpoint brokers over mock transports joined by an impaired [`Link`].
pub struct SimPair<B> {
    clock: VirtualClock<Arrival>,
    link: Link,
    nodes: [EndpointBroker<MockTransport, B>; 2],
    stats: SimStats,
    stall_limit: Duration,
    last_progress: Time,
    delivered_seen: u64,
}

impl<B: Behavior> SimPair<B> {
    /// Builds a pair. Both stacks must use the same unit kind.
    pub fn new(model: LinkModel, a: (LayerStack, B), b: (LayerStack, B)) -> Self {
        let node = |(stack, behavior): (LayerStack, B)| {
            EndpointBroker::new(MockTransport::new(stack.kind()), stack, behavior)
        };
        SimPair {
            clock: VirtualClock::new(),
            link: Link::new(model),
            nodes: [node(a), node(b)],
            stats: SimStats::default(),
            stall_limit: DEFAULT_STALL_LIMIT,
            last_progress: Duration::ZERO,
            delivered_seen: 0,
        }
    }

    pub fn with_stall_limit(mut self, limit: Duration) -> Self {
        self.stall_limit = limit;
        self
    }

    pub fn now(&self) -> Time {
        self.clock.now()
    }

    pub fn stats(&self) -> SimStats {
        self.stats
    }

    pub fn link(&self) -> &Link {
        &self.link
    }

    pub fn node(&self, i: usize) -> &EndpointBroker<MockTransport, B> {
        &self.nodes[i]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut EndpointBroker<MockTransport, B> {
        &mut self.nodes[i]
    }

    /// Sends `msg` from node `from` (0 or 1) at the current virtual time.
    pub fn send(&mut self, from: usize, msg: Message) {
        let now = self.now();
        self.nodes[from].send(msg, now);
        self.pump();
    }

    /// Runs until `done` holds, nothing is left to do, or the run stalls.
    /// Returns the virtual time at which `done` first held.
    pub fn run_until<F>(&mut self, mut done: F) -> Result<Time, SimError>
    where
        F: FnMut(&[EndpointBroker<MockTransport, B>; 2]) -> bool,
    {
        loop {
            self.pump();
            if done(&self.nodes) {
                return Ok(self.now());
            }
            if !self.step()? {
                return Err(SimError::Stalled {
                    at: self.now(),
                    idle: self.now() - self.last_progress,
                });
            }
        }
    }

    /// Processes everything due within the next `duration` of virtual time.
    pub fn run_for(&mut self, duration: Duration) -> Result<(), SimError> {
        let end = self.now() + duration;
        loop {
            self.pump();
            match self.next_step_time() {
                Some(t) if t <= end => {
                    self.step()?;
                }
                _ => break,
            }
        }
        self.clock.advance_to(end);
        Ok(())
    }

    fn next_timer(&self) -> Option<(Time, usize)> {
        (0..2)
            .filter_map(|i| self.nodes[i].next_deadline().map(|t| (t, i)))
            .min()
    }

    fn next_step_time(&self) -> Option<Time> {
        match (self.clock.next_event_time(), self.next_timer()) {
            (Some(a), Some((t, _))) => Some(a.min(t)),
            (a, t) => a.or(t.map(|(t, _)| t)),
        }
    }

    /// Executes the earliest pending action. Deliveries win ties with
    /// timers. Returns false when nothing is pending.
    fn step(&mut self) -> Result<bool, SimError> {
        let arrival = self.clock.next_event_time();
        let timer = self.next_timer();
        let next = match (arrival, timer) {
            (None, None) => return Ok(false),
            (Some(a), Some((t, _))) => a.min(t),
            (Some(a), None) => a,
            (None, Some((t, _))) => t,
        };
        let next = next.max(self.now());
        if next - self.last_progress > self.stall_limit {
            return Err(SimError::Stalled {
                at: next,
                idle: next - self.last_progress,
            });
        }
        let deliver_first = match (arrival, timer) {
            (Some(a), Some((t, _))) => a <= t,
            (arrival, _) => arrival.is_some(),
        };
        if deliver_first {
            let (at, Arrival { to, unit }) = self.clock.pop_until(next).expect("arrival is due");
            self.stats.units_delivered += 1;
            let node = &mut self.nodes[to];
            node.transport_mut().prepare(unit);
            node.on_readable(at.max(self.clock.now()));
        } else if let Some((t, i)) = timer {
            let t = t.max(self.now());
            self.clock.advance_to(t);
            self.stats.timer_fires += 1;
            self.nodes[i].on_timer(t);
        }
        let delivered = self.nodes[0].stats().delivered + self.nodes[1].stats().delivered;
        if delivered != self.delivered_seen {
            self.delivered_seen = delivered;
            self.last_progress = self.now();
        }
        Ok(true)
    }

    /// Moves units written by either broker onto the link.
    fn pump(&mut self) {
        let now = self.now();
        for from in 0..2 {
            let units = self.nodes[from].transport_mut().take_captured();
            let dir = Direction::from_node(from);
            for unit in units {
                self.stats.units_sent += 1;
                for at in self.link.transmit(dir, now) {
                    self.clock.schedule_at(
                        at,
                        Arrival {
                            to: 1 - from,
                            unit: unit.clone(),
                        },
                    );
                }
            }
        }
    }
}

impl<B> std::fmt::Debug for SimPair<B> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimPair")
            .field("now", &self.clock.now())
            .field("in_flight", &self.clock.len())
            .field("stats", &self.stats)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::broker::{BehaviorCx, BrokerEvent};
    use crate::layers::{Preset, ReliabilityLayer, StackConfig};
    use crate::transport::UnitKind;
    use crate::wire::ActorId;

    #[derive(Default)]
    struct Log {
        got: Vec<(Time, Bytes)>,
        events: Vec<BrokerEvent>,
    }

    impl Behavior for Log {
        fn on_message(&mut self, msg: Message, cx: &mut BehaviorCx<'_>) {
            self.got.push((cx.now(), msg.payload));
        }

        fn on_event(&mut self, event: BrokerEvent, _cx: &mut BehaviorCx<'_>) {
            self.events.push(event);
        }
    }

    fn ms(v: u64) -> Duration {
        Duration::from_millis(v)
    }

    fn msg(body: &'static [u8]) -> Message {
        Message::new(ActorId(1), ActorId(2), Bytes::from_static(body))
    }

    fn pair(preset: Preset, model: LinkModel) -> SimPair<Log> {
        let cfg = StackConfig::default();
        let stack = || preset.build(UnitKind::Datagram, &cfg).unwrap();
        SimPair::new(model, (stack(), Log::default()), (stack(), Log::default()))
    }

    #[test]
    fn delivers_after_delay() {
        let mut sim = pair(Preset::Basp, LinkModel::lossy(0.0, ms(7), 0));
        sim.send(0, msg(b"hi"));
        let t = sim
            .run_until(|n| n[1].behavior().got.len() == 1)
            .unwrap();
        assert_eq!(t, ms(7));
        assert_eq!(sim.node(1).behavior().got[0].1, Bytes::from_static(b"hi"));
    }

    #[test]
    fn lossy_link_recovered_by_reliability() {
        let mut sim = pair(Preset::Rudp, LinkModel::lossy(0.3, ms(1), 11));
        for _ in 0..50 {
            sim.send(0, msg(b"x"));
        }
        sim.run_until(|n| n[1].behavior().got.len() == 50).unwrap();
        sim.run_until(|n| n[0].stack().layer::<ReliabilityLayer>().unwrap().unacked_len() == 0)
            .unwrap();
        assert!(sim.stats().timer_fires > 0);
    }

    #[test]
    fn retransmission_and_arrivals_in_timestamp_order() {
        // first copy dropped, the retransmission at 40 ms must arrive
        // at 40 ms + delay, and time never goes backwards
        let mut sim = pair(Preset::Rudp, LinkModel::lossy(0.5, ms(3), 2));
        for _ in 0..20 {
            sim.send(0, msg(b"y"));
        }
        let mut last = Duration::ZERO;
        while sim.step().unwrap() {
            assert!(sim.now() >= last);
            last = sim.now();
            sim.pump();
        }
        let got = &sim.node(1).behavior().got;
        assert_eq!(got.len(), 20);
        for (t, _) in got {
            let rem = t.as_millis() % 40;
            assert_eq!(rem, 3, "arrival at {t:?} not delay after a multiple of the RTO");
        }
    }

    #[test]
    fn total_loss_stalls() {
        let mut sim = pair(Preset::Rudp, LinkModel::lossy(1.0, ms(1), 0)).with_stall_limit(ms(500));
        sim.send(0, msg(b"z"));
        let err = sim.run_until(|n| !n[1].behavior().got.is_empty()).unwrap_err();
        let SimError::Stalled { at, .. } = err;
        assert!(at > ms(500));
    }

    #[test]
    fn idle_run_for_advances_clock() {
        let mut sim = pair(Preset::Basp, LinkModel::default());
        sim.run_for(ms(250)).unwrap();
        assert_eq!(sim.now(), ms(250));
    }
}
