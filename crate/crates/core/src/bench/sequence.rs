use super::micro::message;
use super::{BenchConfig, BenchError, BenchRecord, Scenario, StackChoice};
use crate::layers::{LayerStack, OrderingLayer, Preset, StackConfig};
use crate::transport::UnitKind;
use std::time::{Duration, Instant};

pub const SEQUENCE_LEN: u16 = 10;

/// Indices of the ten sent messages in the order they arrive.
pub fn arrival_order(scenario: Scenario) -> Vec<u16> {
    let mut order: Vec<u16> = (0..SEQUENCE_LEN).collect();
    match scenario {
        Scenario::Ordered => {}
        Scenario::Late => order.swap(1, 2),
        Scenario::Dropped => {
            order.remove(1);
        }
    }
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceOutcome {
    pub delivered: u64,
    pub abandoned: u64,
    pub copied_bytes: u64,
    /// Buffered units copied, each being one payload plus its inner framing.
    pub copied_units: u64,
    pub elapsed: Duration,
}

const SEQUENCE_DEFAULTS: [StackChoice; 2] = [
    StackChoice::Preset(Preset::Ordering),
    StackChoice::Preset(Preset::OrderingBasp),
];

fn check_stack(choice: StackChoice) -> Result<Preset, BenchError> {
    match choice {
        StackChoice::Preset(p @ (Preset::Ordering | Preset::OrderingBasp | Preset::Roudp)) => Ok(p),
        other => Err(BenchError::InvalidConfig(format!(
            "sequence needs a stack with ordering and no slicing, got `{other}`"
        ))),
    }
}

/// Replays one scenario through a fresh receiving stack.
pub fn replay(preset: Preset, scenario: Scenario, payload: usize) -> Result<SequenceOutcome, BenchError> {
    let cfg = StackConfig::default();
    let build = || -> LayerStack { preset.build(UnitKind::Datagram, &cfg).expect("datagram preset") };
    let (mut tx, mut rx) = (build(), build());
    let msg = message(payload);
    let units = (0..SEQUENCE_LEN)
        .map(|_| tx.send(&msg, Duration::ZERO).map(|mut u| u.remove(0)))
        .collect::<Result<Vec<_>, _>>()?;
    let arrivals: Vec<_> = arrival_order(scenario)
        .into_iter()
        .map(|i| units[usize::from(i)].clone())
        .collect();

    let mut out = Vec::with_capacity(usize::from(SEQUENCE_LEN));
    let start = Instant::now();
    for unit in arrivals {
        rx.receive(unit, Duration::ZERO, &mut out)?;
    }
    let elapsed = start.elapsed();
    // release anything still buffered once the delivery timeout expires
    if let Some(deadline) = rx.next_deadline() {
        rx.on_timeout(deadline, &mut out)?;
    }

    let ordering = rx.layer::<OrderingLayer>().expect("ordering layer").buffer();
    let copied_bytes = rx.stats().copies;
    let inner = (payload + rx.framing().header_len()) as u64;
    Ok(SequenceOutcome {
        delivered: out.len() as u64,
        abandoned: ordering.abandoned(),
        copied_bytes,
        copied_units: copied_bytes / inner,
        elapsed,
    })
}

pub(crate) fn run_sequence(cfg: &BenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    let presets = cfg
        .stacks_or(&SEQUENCE_DEFAULTS)
        .into_iter()
        .map(check_stack)
        .collect::<Result<Vec<_>, _>>()?;
    let mut records = Vec::new();
    for preset in presets {
        let label = format!("datagram/{preset}");
        for &payload in &cfg.payload_sizes {
            for scenario in cfg.scenarios() {
                let base = BenchRecord {
                    payload_size: Some(payload),
                    scenario: Some(scenario.name().into()),
                    ..BenchRecord::new("sequence", &label)
                };
                let first = replay(preset, scenario, payload)?;
                records.push(base.metric("delivered", first.delivered as f64, "messages"));
                records.push(base.metric("abandoned", first.abandoned as f64, "messages"));
                records.push(base.metric("copied_bytes", first.copied_bytes as f64, "bytes"));
                records.push(base.metric("copied_units", first.copied_units as f64, "units"));
                if cfg.timing {
                    let mut times = Vec::new();
                    for rep in 0..cfg.repetitions {
                        let outcome = replay(preset, scenario, payload)?;
                        let ns = outcome.elapsed.as_nanos() as f64;
                        times.push(ns);
                        records.push(base.metric("total_time", ns, "ns").run(rep));
                    }
                    records.push(base.metric("mean_total_time", super::stats::mean(&times), "ns"));
                    records.push(base.metric("sd_total_time", super::stats::std_dev(&times), "ns"));
                }
            }
        }
    }
    Ok(records)
}
