//! Drives the experiment harness from code and prints its CSV records.

use layered_net::bench::{run, write_csv, BenchConfig, Experiment, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = BenchConfig::new(Experiment::Sequence);
    cfg.scenarios = vec![Scenario::Late, Scenario::Dropped];
    let records = run(&cfg)?;
    write_csv(&records, std::io::stdout().lock())?;
    Ok(())
}
