use serde::{Deserialize, Serialize};
use std::io;

/// One CSV row: a single metric of one configuration and run. Summary rows
/// leave `run_index` empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub experiment: String,
    pub stack: String,
    pub payload_size: Option<usize>,
    pub scenario: Option<String>,
    pub loss: Option<f64>,
    /// One-way delay in milliseconds.
    pub delay: Option<f64>,
    pub run_index: Option<u32>,
    pub metric_name: String,
    pub value: f64,
    pub unit: String,
}

/// Column order of the CSV header.
pub const COLUMNS: [&str; 10] = [
    "experiment",
    "stack",
    "payload_size",
    "scenario",
    "loss",
    "delay",
    "run_index",
    "metric_name",
    "value",
    "unit",
];

impl BenchRecord {
    pub fn new(experiment: &str, stack: &str) -> BenchRecord {
        BenchRecord {
            experiment: experiment.to_owned(),
            stack: stack.to_owned(),
            payload_size: None,
            scenario: None,
            loss: None,
            delay: None,
            run_index: None,
            metric_name: String::new(),
            value: 0.0,
            unit: String::new(),
        }
    }

    /// A copy with the metric fields replaced.
    pub fn metric(&self, name: &str, value: f64, unit: &str) -> BenchRecord {
        BenchRecord {
            metric_name: name.to_owned(),
            value,
            unit: unit.to_owned(),
            ..self.clone()
        }
    }

    pub fn run(&self, index: u32) -> BenchRecord {
        BenchRecord {
            run_index: Some(index),
            ..self.clone()
        }
    }
}

pub fn write_csv<W: io::Write>(records: &[BenchRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(COLUMNS)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(input: R) -> csv::Result<Vec<BenchRecord>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Rows of `metric` that also match `filter`.
pub fn find<'a>(
    records: &'a [BenchRecord],
    metric: &'a str,
    mut filter: impl FnMut(&BenchRecord) -> bool + 'a,
) -> impl Iterator<Item = &'a BenchRecord> + 'a {
    records
        .iter()
        .filter(move |r| r.metric_name == metric && filter(r))
}
