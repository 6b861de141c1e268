use super::{derive_seed, BenchConfig, BenchError, BenchRecord, StackChoice};
use crate::broker::{Behavior, BehaviorCx, BrokerEvent, Multiplexer};
use crate::layers::{LayerStack, Preset, ReliabilityLayer, StackConfig};
use crate::simnet::{Direction, LinkMode, LinkModel, SimPair};
use crate::transport::{UdpTransport, UnitKind};
use crate::wire::{ActorId, Message};
use bytes::Bytes;
use std::net::SocketAddr;
use std::sync::mpsc;
use std::time::{Duration, Instant};

/// Bounces a message with its peer until it has sent and received `quota`
/// messages.
pub struct PingPong {
    quota: u64,
    sent: u64,
    received: u64,
    payload: Bytes,
    done: Option<mpsc::Sender<()>>,
}

impl PingPong {
    pub fn new(quota: u64, payload: Bytes) -> PingPong {
        PingPong {
            quota,
            sent: 0,
            received: 0,
            payload,
            done: None,
        }
    }

    /// Signals on `done` once the quota of received messages is reached.
    pub fn notify(mut self, done: mpsc::Sender<()>) -> Self {
        self.done = Some(done);
        self
    }

    pub fn received(&self) -> u64 {
        self.received
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn is_done(&self) -> bool {
        self.received >= self.quota
    }

    /// The opening message; counts as sent.
    pub fn serve(&mut self) -> Message {
        self.sent += 1;
        Message::new(ActorId(1), ActorId(2), self.payload.clone())
    }
}

impl Behavior for PingPong {
    fn on_message(&mut self, _msg: Message, cx: &mut BehaviorCx<'_>) {
        self.received += 1;
        if self.sent < self.quota {
            self.sent += 1;
            cx.send(Message::new(ActorId(1), ActorId(2), self.payload.clone()));
        }
        if self.is_done() {
            if let Some(done) = self.done.take() {
                let _ = done.send(());
            }
        }
    }

    fn on_event(&mut self, event: BrokerEvent, _cx: &mut BehaviorCx<'_>) {
        log::warn!("ping-pong endpoint event: {event:?}");
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PingPongRun {
    pub completion: Duration,
    pub retransmissions: u64,
    pub duplicates: u64,
    pub delivered: [u64; 2],
}

fn sim_stack(choice: StackChoice, rto: Duration) -> Result<(LayerStack, LinkMode), BenchError> {
    let cfg = StackConfig {
        rto,
        ..StackConfig::default()
    };
    match choice {
        StackChoice::Preset(p @ (Preset::Rudp | Preset::Roudp | Preset::UdpDefault)) => {
            Ok((p.build(UnitKind::Datagram, &cfg).expect("datagram preset"), LinkMode::Datagram))
        }
        StackChoice::Tcp => Ok((
            Preset::Basp.build(UnitKind::Stream, &cfg).expect("stream basp"),
            LinkMode::emulated_stream(rto),
        )),
        other => Err(BenchError::InvalidConfig(format!(
            "pingpong needs rudp, roudp, udp or tcp, got `{other}`"
        ))),
    }
}

/// One simulated ping-pong of `count` messages.
pub fn pingpong_run(
    choice: StackChoice,
    count: u32,
    payload: usize,
    loss: f64,
    delay: Duration,
    rto: Duration,
    seed: u64,
) -> Result<PingPongRun, BenchError> {
    let quota = u64::from(count / 2);
    let body = Bytes::from(vec![0x5A; payload]);
    let (stack_a, mode) = sim_stack(choice, rto)?;
    let (stack_b, _) = sim_stack(choice, rto)?;
    let model = LinkModel::lossy(loss, delay, seed).with_mode(mode);
    let mut sim = SimPair::new(
        model,
        (stack_a, PingPong::new(quota, body.clone())),
        (stack_b, PingPong::new(quota, body)),
    );
    let first = sim.node_mut(0).behavior_mut().serve();
    sim.send(0, first);
    let completion = sim.run_until(|n| n[0].behavior().is_done() && n[1].behavior().is_done())?;

    let (mut retransmissions, mut duplicates) = (0, 0);
    for i in 0..2 {
        if let Some(r) = sim.node(i).stack().layer::<ReliabilityLayer>() {
            retransmissions += r.retransmissions();
            duplicates += r.duplicates();
        }
    }
    if choice == StackChoice::Tcp {
        retransmissions = [Direction::AToB, Direction::BToA]
            .iter()
            .map(|&d| sim.link().stats(d).stream_retransmissions)
            .sum();
    }
    Ok(PingPongRun {
        completion,
        retransmissions,
        duplicates,
        delivered: [sim.node(0).behavior().received(), sim.node(1).behavior().received()],
    })
}

fn real_run(choice: StackChoice, count: u32, payload: usize, rto: Duration) -> Result<PingPongRun, BenchError> {
    let fail = |e: &dyn std::fmt::Display| BenchError::Sockets(e.to_string());
    let quota = u64::from(count / 2);
    let body = Bytes::from(vec![0x5A; payload]);
    let cfg = StackConfig {
        rto,
        ..StackConfig::default()
    };
    let (kind, preset) = match choice {
        StackChoice::Tcp => (UnitKind::Stream, Preset::Basp),
        StackChoice::Preset(p @ (Preset::Rudp | Preset::Roudp | Preset::UdpDefault)) => (UnitKind::Datagram, p),
        other => {
            return Err(BenchError::InvalidConfig(format!(
                "pingpong needs rudp, roudp, udp or tcp, got `{other}`"
            )))
        }
    };
    let stack = move || preset.build(kind, &cfg).expect("preset supports kind");
    let (done_tx, done_rx) = mpsc::channel();
    let any: SocketAddr = "127.0.0.1:0".parse().expect("literal address");

    let mut mux_b = Multiplexer::new().map_err(|e| fail(&e))?;
    let responder = {
        let done = done_tx.clone();
        let body = body.clone();
        let stack = stack.clone();
        let mut taken = false;
        move |_peer: SocketAddr| -> Option<(LayerStack, Box<dyn Behavior>)> {
            if std::mem::replace(&mut taken, true) {
                return None;
            }
            let behavior = PingPong::new(quota, body.clone()).notify(done.clone());
            Some((stack(), Box::new(behavior)))
        }
    };
    let b_addr = match kind {
        UnitKind::Datagram => mux_b.bind_udp(any, responder),
        UnitKind::Stream => mux_b.listen_tcp(any, responder),
    }
    .map_err(|e| fail(&e))?;

    let mut mux_a = Multiplexer::new().map_err(|e| fail(&e))?;
    let mut initiator = PingPong::new(quota, body).notify(done_tx);
    let first = initiator.serve();
    let a_id = match kind {
        UnitKind::Datagram => {
            let transport = UdpTransport::connect(any, b_addr).map_err(|e| fail(&e))?;
            mux_a
                .add_endpoint(Box::new(transport), stack(), Box::new(initiator))
                .map_err(|e| fail(&e))?
        }
        UnitKind::Stream => mux_a
            .connect_tcp(b_addr, stack(), Box::new(initiator))
            .ok_or_else(|| BenchError::Sockets(format!("connect to {b_addr} failed")))?,
    };

    let (handle_b, join_b) = mux_b.spawn();
    let (handle_a, join_a) = mux_a.spawn();
    let start = Instant::now();
    handle_a.send(a_id, first);
    let outcome = (0..2).try_for_each(|_| done_rx.recv_timeout(Duration::from_secs(120)));
    let completion = start.elapsed();
    handle_a.shutdown();
    handle_b.shutdown();
    let _ = join_a.join();
    let _ = join_b.join();
    outcome.map_err(|_| BenchError::Sockets("ping-pong did not finish within 120 s".into()))?;
    Ok(PingPongRun {
        completion,
        retransmissions: 0,
        duplicates: 0,
        delivered: [quota, quota],
    })
}

const PINGPONG_DEFAULTS: [StackChoice; 3] = [
    StackChoice::Preset(Preset::Rudp),
    StackChoice::Preset(Preset::Roudp),
    StackChoice::Tcp,
];

pub(crate) fn run_pingpong(cfg: &BenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    let losses = if cfg.real_sockets {
        if cfg.losses.iter().any(|&l| l > 0.0) || !cfg.delay.is_zero() {
            return Err(BenchError::InvalidConfig(
                "real sockets run without loss or added delay".into(),
            ));
        }
        vec![0.0]
    } else {
        cfg.losses()
    };
    let payload = cfg.payload_sizes[0];
    let delay_ms = cfg.delay.as_secs_f64() * 1e3;
    let mut records = Vec::new();
    for choice in cfg.stacks_or(&PINGPONG_DEFAULTS) {
        let label = match (choice, cfg.real_sockets) {
            (StackChoice::Tcp, false) => "tcp-emulated".to_owned(),
            (StackChoice::Tcp, true) => "tcp".to_owned(),
            (c, real) => format!("{}/{c}", if real { "udp" } else { "sim" }),
        };
        for &loss in &losses {
            let base = BenchRecord {
                payload_size: Some(payload),
                loss: Some(loss),
                delay: Some(delay_ms),
                ..BenchRecord::new("pingpong", &label)
            };
            let mut times = Vec::new();
            let mut retransmissions = Vec::new();
            for rep in 0..cfg.repetitions {
                let run = if cfg.real_sockets {
                    real_run(choice, cfg.count, payload, cfg.rto)?
                } else {
                    let seed = derive_seed(cfg.seed, rep);
                    pingpong_run(choice, cfg.count, payload, loss, cfg.delay, cfg.rto, seed)?
                };
                let secs = run.completion.as_secs_f64();
                times.push(secs);
                retransmissions.push(run.retransmissions as f64);
                let row = base.run(rep);
                records.push(row.metric("completion_time", secs, "s"));
                records.push(row.metric("retransmissions", run.retransmissions as f64, "units"));
                records.push(row.metric("duplicates_suppressed", run.duplicates as f64, "units"));
                records.push(row.metric("delivered_a", run.delivered[0] as f64, "messages"));
                records.push(row.metric("delivered_b", run.delivered[1] as f64, "messages"));
            }
            use super::stats::{mean, percentile};
            records.push(base.metric("mean_completion_time", mean(&times), "s"));
            records.push(base.metric("p5_completion_time", percentile(&times, 5.0), "s"));
            records.push(base.metric("p95_completion_time", percentile(&times, 95.0), "s"));
            records.push(base.metric("mean_retransmissions", mean(&retransmissions), "units"));
            if !cfg.real_sockets {
                let model = expected_completion(cfg.count, loss, cfg.delay, cfg.rto);
                records.push(base.metric("model_completion_time", model, "s"));
            }
        }
    }
    Ok(records)
}

/// Expected completion time when each lost data transmission costs one RTO:
/// `count * delay + count * p / (1 - p) * rto`, in seconds.
pub fn expected_completion(count: u32, loss: f64, delay: Duration, rto: Duration) -> f64 {
    let n = f64::from(count);
    n * delay.as_secs_f64() + n * loss / (1.0 - loss) * rto.as_secs_f64()
}

#[cfg(test)]
mod tests {
    use super::*;

    const RTO: Duration = Duration::from_millis(40);

    #[test]
    fn lossless_zero_delay_takes_no_time() {
        let run = pingpong_run(StackChoice::Preset(Preset::Rudp), 4000, 64, 0.0, Duration::ZERO, RTO, 1).unwrap();
        assert_eq!(run.completion, Duration::ZERO);
        assert_eq!(run.retransmissions, 0);
        assert_eq!(run.delivered, [2000, 2000]);
    }

    #[test]
    fn delay_offset_is_exact() {
        for choice in [StackChoice::Preset(Preset::Roudp), StackChoice::Tcp] {
            let run = pingpong_run(choice, 400, 64, 0.0, Duration::from_millis(10), RTO, 1).unwrap();
            assert_eq!(run.completion, Duration::from_secs(4));
        }
    }

    #[test]
    fn lossy_run_retransmits_and_conserves() {
        for choice in PINGPONG_DEFAULTS {
            let run = pingpong_run(choice, 400, 64, 0.2, Duration::ZERO, RTO, 3).unwrap();
            assert!(run.retransmissions > 0);
            assert_eq!(run.delivered, [200, 200]);
        }
    }

    #[test]
    fn model_at_five_percent() {
        let secs = expected_completion(4000, 0.05, Duration::ZERO, RTO);
        assert!((secs - 8.421_052_6).abs() < 1e-6);
        assert_eq!(expected_completion(4000, 0.0, Duration::from_millis(10), RTO), 40.0);
    }

    #[test]
    fn udp_loopback() {
        let run = real_run(StackChoice::Preset(Preset::Rudp), 200, 64, RTO).unwrap();
        assert_eq!(run.delivered, [100, 100]);
    }

    #[test]
    fn tcp_loopback() {
        let run = real_run(StackChoice::Tcp, 200, 64, RTO).unwrap();
        assert!(run.completion > Duration::ZERO);
    }
}
