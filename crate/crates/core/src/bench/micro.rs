use super::{kind_name, BenchConfig, BenchError, BenchRecord, Experiment, StackChoice};
use crate::layers::{LayerStack, Preset, StackConfig};
use crate::transport::{MockTransport, Transport, UnitKind};
use crate::wire::{ActorId, Message};
use bytes::Bytes;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;
use std::hint::black_box;
use std::time::{Duration, Instant};

const MICRO_DEFAULTS: [StackChoice; 4] = [
    StackChoice::Preset(Preset::Raw),
    StackChoice::Preset(Preset::Basp),
    StackChoice::Preset(Preset::Ordering),
    StackChoice::Preset(Preset::OrderingBasp),
];

/// A repetition is split into this many batches and reports the fastest,
/// which filters out preemption and interrupts.
const SUB_BATCHES: usize = 5;

/// Sent units stay alive this long, as in a transport write queue, before
/// their buffers are released.
const QUEUED_UNITS: usize = 256;

struct Target {
    label: String,
    preset: Preset,
    kind: UnitKind,
}

/// Every (kind, preset) pair the selected stacks support.
fn targets(cfg: &BenchConfig) -> Result<Vec<Target>, BenchError> {
    let mut out = Vec::new();
    for kind in [UnitKind::Datagram, UnitKind::Stream] {
        for choice in cfg.stacks_or(&MICRO_DEFAULTS) {
            let StackChoice::Preset(preset) = choice else {
                return Err(BenchError::InvalidConfig(format!(
                    "stack `{choice}` only applies to pingpong"
                )));
            };
            if preset.supports(kind) {
                out.push(Target {
                    label: format!("{}/{}", kind_name(kind), preset),
                    preset,
                    kind,
                });
            }
        }
    }
    Ok(out)
}

fn build(t: &Target) -> LayerStack {
    t.preset
        .build(t.kind, &StackConfig::default())
        .expect("preset supports kind")
}

/// Payload indices in a fresh order per repetition, so slow drift does not
/// turn into a slope.
fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

pub(crate) fn message(payload: usize) -> Message {
    Message::new(ActorId(1), ActorId(2), Bytes::from(vec![0xA5; payload]))
}

/// Per-message nanoseconds for each target, payload and repetition.
type Samples = Vec<Vec<Vec<f64>>>;

fn summarize(
    cfg: &BenchConfig,
    targets: &[Target],
    samples: &Samples,
    mut extra: impl FnMut(usize, usize, &BenchRecord, &mut Vec<BenchRecord>),
) -> Vec<BenchRecord> {
    let mut records = Vec::new();
    for (ti, t) in targets.iter().enumerate() {
        for (pi, &payload) in cfg.payload_sizes.iter().enumerate() {
            let base = BenchRecord {
                payload_size: Some(payload),
                ..BenchRecord::new(cfg.experiment.name(), &t.label)
            };
            let runs = &samples[ti][pi];
            for (rep, &ns) in runs.iter().enumerate() {
                records.push(base.metric("time_per_message", ns, "ns").run(rep as u32));
            }
            records.push(base.metric("mean_time_per_message", super::stats::mean(runs), "ns"));
            records.push(base.metric("sd_time_per_message", super::stats::std_dev(runs), "ns"));
            records.push(base.metric("median_time_per_message", super::stats::percentile(runs, 50.0), "ns"));
            extra(ti, pi, &base, &mut records);
        }
    }
    records
}

pub(crate) fn run_send(cfg: &BenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    debug_assert_eq!(cfg.experiment, Experiment::Send);
    let targets = targets(cfg)?;
    let mut stacks: Vec<LayerStack> = targets.iter().map(build).collect();
    let msgs: Vec<Message> = cfg.payload_sizes.iter().map(|&p| message(p)).collect();
    let batch = (cfg.iterations as usize).div_ceil(SUB_BATCHES);
    let mut samples: Samples = vec![vec![Vec::new(); msgs.len()]; targets.len()];
    let mut wire = vec![vec![0u64; msgs.len()]; targets.len()];
    let mut copied = vec![vec![0u64; msgs.len()]; targets.len()];

    for (ti, stack) in stacks.iter_mut().enumerate() {
        for (pi, msg) in msgs.iter().enumerate() {
            stack.reset_stats();
            let mut transport = MockTransport::new(stack.kind());
            for unit in stack.send(msg, Duration::ZERO)? {
                transport.write(unit).expect("mock transport accepts writes");
            }
            wire[ti][pi] = transport.written_bytes();
            copied[ti][pi] = stack.stats().send_copies;
        }
    }
    let mut out = Vec::with_capacity(4);
    let mut queue = VecDeque::with_capacity(QUEUED_UNITS + 4);
    // one warm-up round, then repetitions interleaved across stacks
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for rep in 0..=cfg.repetitions {
        for pi in shuffled(msgs.len(), &mut rng) {
            let msg = &msgs[pi];
            for (ti, stack) in stacks.iter_mut().enumerate() {
                let mut best = f64::INFINITY;
                for _ in 0..SUB_BATCHES {
                    let start = Instant::now();
                    for _ in 0..batch {
                        stack.send_into(msg, Duration::ZERO, &mut out)?;
                        if queue.len() >= QUEUED_UNITS {
                            queue.pop_front();
                        }
                        queue.extend(black_box(&mut out).drain(..));
                    }
                    best = best.min(start.elapsed().as_nanos() as f64 / batch as f64);
                }
                if rep > 0 {
                    samples[ti][pi].push(best);
                }
            }
        }
    }
    Ok(summarize(cfg, &targets, &samples, |ti, pi, base, records| {
        records.push(base.metric("bytes_on_wire", wire[ti][pi] as f64, "bytes"));
        records.push(base.metric("copied_bytes_per_message", copied[ti][pi] as f64, "bytes"));
    }))
}

pub(crate) fn run_recv(cfg: &BenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    debug_assert_eq!(cfg.experiment, Experiment::Recv);
    let targets = targets(cfg)?;
    let mut senders: Vec<LayerStack> = targets.iter().map(build).collect();
    let mut receivers: Vec<LayerStack> = targets.iter().map(build).collect();
    let msgs: Vec<Message> = cfg.payload_sizes.iter().map(|&p| message(p)).collect();
    let iters = cfg.iterations;
    let mut samples: Samples = vec![vec![Vec::new(); msgs.len()]; targets.len()];
    let mut copies = vec![vec![0f64; msgs.len()]; targets.len()];
    let mut reads = vec![vec![0f64; msgs.len()]; targets.len()];
    let mut out = Vec::with_capacity(4);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for rep in 0..=cfg.repetitions {
        for pi in shuffled(msgs.len(), &mut rng) {
            let msg = &msgs[pi];
            for ti in 0..targets.len() {
                let (tx, rx) = (&mut senders[ti], &mut receivers[ti]);
                rx.reset_stats();
                let mut total = Duration::ZERO;
                for _ in 0..iters {
                    // prepared outside the timed region; the sender keeps the
                    // sequence numbers in step with the receiver
                    let unit = tx.send(msg, Duration::ZERO)?.pop().expect("one unit");
                    let start = Instant::now();
                    rx.receive(unit, Duration::ZERO, &mut out)?;
                    total += start.elapsed();
                    debug_assert_eq!(out.len(), 1);
                    out.clear();
                }
                let stats = rx.stats();
                if rep > 0 {
                    samples[ti][pi].push(total.as_nanos() as f64 / f64::from(iters));
                }
                copies[ti][pi] += stats.copies as f64;
                reads[ti][pi] = stats.reads as f64 / f64::from(iters);
            }
        }
    }
    let calls = f64::from(iters) * f64::from(cfg.repetitions + 1);
    Ok(summarize(cfg, &targets, &samples, |ti, pi, base, records| {
        records.push(base.metric("copied_bytes_per_message", copies[ti][pi] / calls, "bytes"));
        records.push(base.metric("reads_per_message", reads[ti][pi], "reads"));
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::find;

    fn quick(experiment: Experiment) -> BenchConfig {
        let mut cfg = BenchConfig::new(experiment);
        cfg.repetitions = 2;
        cfg.iterations = 20;
        cfg.payload_sizes = vec![128, 1024];
        cfg
    }

    fn value(records: &[BenchRecord], metric: &str, stack: &str, payload: usize) -> f64 {
        find(records, metric, |r| r.stack == stack && r.payload_size == Some(payload))
            .next()
            .unwrap_or_else(|| panic!("{metric} {stack} {payload}"))
            .value
    }

    #[test]
    fn send_bytes_on_wire() {
        let records = run_send(&quick(Experiment::Send)).unwrap();
        assert_eq!(value(&records, "bytes_on_wire", "datagram/raw", 128), 128.0);
        assert_eq!(value(&records, "bytes_on_wire", "datagram/basp", 128), 148.0);
        assert_eq!(value(&records, "bytes_on_wire", "datagram/ordering", 128), 130.0);
        assert_eq!(value(&records, "bytes_on_wire", "datagram/ordering_basp", 128), 150.0);
        assert_eq!(value(&records, "bytes_on_wire", "stream/basp", 1024), 1044.0);
        assert_eq!(value(&records, "copied_bytes_per_message", "datagram/basp", 1024), 1024.0);
    }

    #[test]
    fn recv_counters() {
        let records = run_recv(&quick(Experiment::Recv)).unwrap();
        for r in find(&records, "copied_bytes_per_message", |_| true) {
            assert_eq!(r.value, 0.0, "{}", r.stack);
        }
        assert_eq!(value(&records, "reads_per_message", "stream/basp", 128), 2.0);
        assert_eq!(value(&records, "reads_per_message", "datagram/basp", 128), 1.0);
        assert_eq!(value(&records, "reads_per_message", "datagram/ordering_basp", 1024), 1.0);
    }

    #[test]
    fn tcp_rejected_outside_pingpong() {
        let mut cfg = quick(Experiment::Send);
        cfg.stacks = vec![StackChoice::Tcp];
        assert!(run_send(&cfg).unwrap_err().is_usage());
    }
}
