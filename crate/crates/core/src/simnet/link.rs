use crate::time::Time;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkMode {
    /// Units are dropped, delayed and duplicated independently.
    Datagram,
    /// A crude stand-in for TCP: lost units are retransmitted by the link
    /// itself with a backoff that doubles from `min_rto` up to `max_rto`,
    /// and delivery is in order. Not a model of any real TCP stack.
    EmulatedStream { min_rto: Duration, max_rto: Duration },
}

impl LinkMode {
    pub fn emulated_stream(min_rto: Duration) -> LinkMode {
        LinkMode::EmulatedStream {
            min_rto,
            max_rto: Duration::from_secs(60),
        }
    }
}

/// Impairments applied to each direction of a link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    /// Probability that a unit is dropped.
    pub loss: f64,
    /// One-way latency.
    pub delay: Duration,
    pub seed: u64,
    /// Extra delay drawn uniformly from `[0, reorder_jitter]` per unit.
    pub reorder_jitter: Duration,
    /// Probability that a delivered unit arrives twice.
    pub duplicate: f64,
    pub mode: LinkMode,
}

impl Default for LinkModel {
    fn default() -> Self {
        LinkModel {
            loss: 0.0,
            delay: Duration::ZERO,
            seed: 0,
            reorder_jitter: Duration::ZERO,
            duplicate: 0.0,
            mode: LinkMode::Datagram,
        }
    }
}

impl LinkModel {
    pub fn lossy(loss: f64, delay: Duration, seed: u64) -> LinkModel {
        LinkModel {
            loss,
            delay,
            seed,
            ..LinkModel::default()
        }
    }

    pub fn with_jitter(mut self, jitter: Duration) -> Self {
        self.reorder_jitter = jitter;
        self
    }

    pub fn with_duplication(mut self, probability: f64) -> Self {
        self.duplicate = probability;
        self
    }

    pub fn with_mode(mut self, mode: LinkMode) -> Self {
        self.mode = mode;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    AToB,
    BToA,
}

impl Direction {
    pub fn index(self) -> usize {
        match self {
            Direction::AToB => 0,
            Direction::BToA => 1,
        }
    }

    /// Direction of traffic sent by node `from` (0 or 1).
    pub fn from_node(from: usize) -> Direction {
        if from == 0 {
            Direction::AToB
        } else {
            Direction::BToA
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub sent: u64,
    pub dropped: u64,
    pub duplicated: u64,
    /// Retransmissions performed inside an emulated stream.
    pub stream_retransmissions: u64,
}

const MAX_STREAM_ATTEMPTS: u32 = 64;

/// A bidirectional impaired link. Each direction draws from its own seeded
/// random stream, so traces depend only on the model and the traffic.
#[derive(Debug)]
pub struct Link {
    model: LinkModel,
    rngs: [ChaCha8Rng; 2],
    last_delivery: [Time; 2],
    stats: [LinkStats; 2],
}

impl Link {
    pub fn new(model: LinkModel) -> Link {
        let rng = |stream: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
            rng.set_stream(stream);
            rng
        };
        Link {
            rngs: [rng(0), rng(1)],
            model,
            last_delivery: [Duration::ZERO; 2],
            stats: [LinkStats::default(); 2],
        }
    }

    pub fn model(&self) -> &LinkModel {
        &self.model
    }

    pub fn stats(&self, dir: Direction) -> LinkStats {
        self.stats[dir.index()]
    }

    /// Decides the fate of one unit sent at `now`: the returned delivery
    /// times are empty for a drop and hold two entries for a duplicate.
    pub fn transmit(&mut self, dir: Direction, now: Time) -> Vec<Time> {
        let i = dir.index();
        self.stats[i].sent += 1;
        match self.model.mode {
            LinkMode::Datagram => self.transmit_datagram(i, now),
            LinkMode::EmulatedStream { min_rto, max_rto } => self.transmit_stream(i, now, min_rto, max_rto),
        }
    }

    fn transmit_datagram(&mut self, i: usize, now: Time) -> Vec<Time> {
        let model = &self.model;
        let rng = &mut self.rngs[i];
        if rng.gen::<f64>() < model.loss {
            self.stats[i].dropped += 1;
            return Vec::new();
        }
        let first = now + model.delay + jitter(rng, model.reorder_jitter);
        let mut times = vec![first];
        if model.duplicate > 0.0 && rng.gen::<f64>() < model.duplicate {
            self.stats[i].duplicated += 1;
            times.push(now + model.delay + jitter(rng, model.reorder_jitter));
        }
        times
    }

    fn transmit_stream(&mut self, i: usize, now: Time, min_rto: Duration, max_rto: Duration) -> Vec<Time> {
        let rng = &mut self.rngs[i];
        let mut sent_at = now;
        let mut rto = min_rto;
        let mut attempts = 0;
        while rng.gen::<f64>() < self.model.loss {
            attempts += 1;
            if attempts >= MAX_STREAM_ATTEMPTS {
                self.stats[i].dropped += 1;
                return Vec::new();
            }
            self.stats[i].stream_retransmissions += 1;
            sent_at += rto;
            rto = (rto * 2).min(max_rto);
        }
        let at = (sent_at + self.model.delay).max(self.last_delivery[i]);
        self.last_delivery[i] = at;
        vec![at]
    }
}

fn jitter(rng: &mut ChaCha8Rng, max: Duration) -> Duration {
    if max.is_zero() {
        Duration::ZERO
    } else {
        Duration::from_nanos(rng.gen_range(0..=max.as_nanos() as u64))
    }
}
