//! Benchmark experiments producing [`BenchRecord`] rows.
//!
//! * `send`: cost of preparing one message for sending, per stack and
//!   payload size, plus bytes on the wire.
//! * `recv`: cost of processing one received in-order unit, with the copy
//!   and read counters.
//! * `sequence`: an ordering stack handling ten messages that arrive in
//!   order, with one late, or with one dropped.
//! * `pingpong`: two brokers bouncing a message `count` times over a lossy
//!   simulated link (or loopback sockets).

mod micro;
mod pingpong;
mod record;
mod sequence;
pub mod stats;

pub use pingpong::{expected_completion, pingpong_run, PingPong, PingPongRun};
pub use record::{find, read_csv, write_csv, BenchRecord, COLUMNS};
pub use sequence::{arrival_order, replay, SequenceOutcome};

use crate::layers::Preset;
use crate::simnet::SimError;
use crate::transport::UnitKind;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Send,
    Recv,
    Sequence,
    PingPong,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Send => "send",
            Experiment::Recv => "recv",
            Experiment::Sequence => "sequence",
            Experiment::PingPong => "pingpong",
        }
    }
}

/// A stack selectable on the command line: a layer preset, or `tcp` for a
/// BASP stream over an emulated (simulated) or real TCP connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StackChoice {
    Preset(Preset),
    Tcp,
}

impl FromStr for StackChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "tcp" {
            return Ok(StackChoice::Tcp);
        }
        s.parse::<Preset>()
            .map(StackChoice::Preset)
            .map_err(|_| format!("unknown stack `{s}`"))
    }
}

impl fmt::Display for StackChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StackChoice::Preset(p) => p.fmt(f),
            StackChoice::Tcp => f.write_str("tcp"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Ordered,
    Late,
    Dropped,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Ordered, Scenario::Late, Scenario::Dropped];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Ordered => "ordered",
            Scenario::Late => "late",
            Scenario::Dropped => "dropped",
        }
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Stalled(#[from] SimError),
    #[error("layer error: {0}")]
    Layer(#[from] crate::layers::LayerError),
    #[error("real-socket run failed: {0}")]
    Sockets(String),
}

impl BenchError {
    /// Whether the failure is the caller's fault rather than the
    /// experiment's.
    pub fn is_usage(&self) -> bool {
        matches!(self, BenchError::InvalidConfig(_))
    }
}

pub const DEFAULT_PAYLOAD_SIZES: [usize; 7] = [128, 256, 512, 1024, 2048, 4096, 8192];

/// Loss grid used by `pingpong` when no loss is given: 0 to 10 % in 1 %
/// steps.
pub fn default_loss_grid() -> Vec<f64> {
    (0..=10).map(|i| f64::from(i) / 100.0).collect()
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub experiment: Experiment,
    /// Stacks to measure; empty selects the experiment's defaults.
    pub stacks: Vec<StackChoice>,
    pub payload_sizes: Vec<usize>,
    pub repetitions: u32,
    /// Empty selects all scenarios.
    pub scenarios: Vec<Scenario>,
    /// Empty selects [`default_loss_grid`].
    pub losses: Vec<f64>,
    pub delay: Duration,
    pub count: u32,
    pub rto: Duration,
    pub seed: u64,
    pub real_sockets: bool,
    /// Adds wall-clock rows to `sequence`, whose output is otherwise
    /// deterministic.
    pub timing: bool,
    /// Calls per repetition in `send` and `recv`.
    pub iterations: u32,
}

impl BenchConfig {
    pub fn new(experiment: Experiment) -> BenchConfig {
        BenchConfig {
            experiment,
            stacks: Vec::new(),
            payload_sizes: DEFAULT_PAYLOAD_SIZES.to_vec(),
            repetitions: 10,
            scenarios: Vec::new(),
            losses: Vec::new(),
            delay: Duration::ZERO,
            count: 4000,
            rto: Duration::from_millis(40),
            seed: 1,
            real_sockets: false,
            timing: false,
            iterations: 4000,
        }
    }

    pub(crate) fn stacks_or(&self, defaults: &[StackChoice]) -> Vec<StackChoice> {
        if self.stacks.is_empty() {
            defaults.to_vec()
        } else {
            self.stacks.clone()
        }
    }

    pub(crate) fn scenarios(&self) -> Vec<Scenario> {
        if self.scenarios.is_empty() {
            Scenario::ALL.to_vec()
        } else {
            self.scenarios.clone()
        }
    }

    pub(crate) fn losses(&self) -> Vec<f64> {
        if self.losses.is_empty() {
            default_loss_grid()
        } else {
            self.losses.clone()
        }
    }

    fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::InvalidConfig(msg));
        if self.payload_sizes.is_empty() {
            return bad("no payload sizes".into());
        }
        if self.repetitions == 0 || self.iterations == 0 {
            return bad("repetitions and iterations must be positive".into());
        }
        if let Some(l) = self.losses.iter().find(|l| !(0.0..1.0).contains(*l)) {
            return bad(format!("loss {l} outside [0, 1)"));
        }
        if self.experiment == Experiment::PingPong && (self.count < 2 || self.count % 2 != 0) {
            return bad(format!("count {} must be even and at least 2", self.count));
        }
        Ok(())
    }
}

pub(crate) fn kind_name(kind: UnitKind) -> &'static str {
    match kind {
        UnitKind::Datagram => "datagram",
        UnitKind::Stream => "stream",
    }
}

/// Runs the configured experiment.
pub fn run(cfg: &BenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    cfg.validate()?;
    let mut records = payload_warnings(cfg);
    records.extend(match cfg.experiment {
        Experiment::Send => micro::run_send(cfg)?,
        Experiment::Recv => micro::run_recv(cfg)?,
        Experiment::Sequence => sequence::run_sequence(cfg)?,
        Experiment::PingPong => pingpong::run_pingpong(cfg)?,
    });
    Ok(records)
}

/// Payload sizes outside the powers of two from 128 to 8192 are accepted
/// but flagged with a warning row.
fn payload_warnings(cfg: &BenchConfig) -> Vec<BenchRecord> {
    cfg.payload_sizes
        .iter()
        .filter(|&&p| !DEFAULT_PAYLOAD_SIZES.contains(&p))
        .map(|&p| {
            log::warn!("payload size {p} is not a power of two in [128, 8192]");
            BenchRecord {
                payload_size: Some(p),
                ..BenchRecord::new(cfg.experiment.name(), "")
            }
            .metric("warning_nonstandard_payload", p as f64, "bytes")
        })
        .collect()
}

/// Derives the seed of repetition `rep` from the base seed.
pub fn derive_seed(base: u64, rep: u32) -> u64 {
    // splitmix64 finalizer
    let mut z = base.wrapping_add(u64::from(rep).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
