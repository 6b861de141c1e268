use clap::{Args, Parser, Subcommand};
use layered_net::bench::{self, BenchConfig, Experiment, Scenario, StackChoice};
use std::fs::File;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

/// Micro-benchmarks and lossy-link experiments for layered protocol stacks.
#[derive(Parser)]
#[command(name = "bench", version)]
struct Cli {
    #[command(subcommand)]
    experiment: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Cost of preparing a message for sending.
    Send,
    /// Cost of processing one received message.
    Recv,
    /// Ordering layer handling ten messages (ordered, late, dropped).
    Sequence,
    /// Two brokers bouncing a message over a lossy link.
    Pingpong,
}

#[derive(Args)]
struct Opts {
    /// Stack to measure; repeat for several [default: per experiment]
    #[arg(long, global = true)]
    stack: Vec<StackChoice>,
    /// Payload size in bytes; repeat for several [default: 128..8192]
    #[arg(long, global = true)]
    payload: Vec<usize>,
    #[arg(long, global = true, default_value_t = 10)]
    reps: u32,
    /// Sequence scenario; repeat for several [default: all]
    #[arg(long, global = true)]
    scenario: Vec<Scenario>,
    /// Loss probability; repeat for several [default: 0.00..0.10]
    #[arg(long, global = true)]
    loss: Vec<f64>,
    /// One-way delay in milliseconds.
    #[arg(long, global = true, default_value_t = 0.0)]
    delay: f64,
    /// Messages per ping-pong run.
    #[arg(long, global = true, default_value_t = 4000)]
    count: u32,
    /// Retransmission timeout in milliseconds.
    #[arg(long, global = true, default_value_t = 40.0)]
    rto: f64,
    #[arg(long, global = true, env = "BENCH_SEED", default_value_t = 1)]
    seed: u64,
    /// CSV output path [default: stdout]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Ping-pong over loopback sockets instead of the simulator.
    #[arg(long, global = true)]
    real_sockets: bool,
    /// Include wall-clock rows in sequence output.
    #[arg(long, global = true)]
    timing: bool,
    /// Calls per repetition for send and recv.
    #[arg(long, global = true, default_value_t = 4000)]
    iterations: u32,
}

fn millis(v: f64, flag: &str) -> Result<Duration, String> {
    Duration::try_from_secs_f64(v / 1e3).map_err(|e| format!("--{flag} {v}: {e}"))
}

fn config(cli: Cli) -> Result<(BenchConfig, Option<PathBuf>), String> {
    let experiment = match cli.experiment {
        Command::Send => Experiment::Send,
        Command::Recv => Experiment::Recv,
        Command::Sequence => Experiment::Sequence,
        Command::Pingpong => Experiment::PingPong,
    };
    let o = cli.opts;
    let mut cfg = BenchConfig::new(experiment);
    cfg.stacks = o.stack;
    if !o.payload.is_empty() {
        cfg.payload_sizes = o.payload;
    }
    cfg.repetitions = o.reps;
    cfg.scenarios = o.scenario;
    cfg.losses = o.loss;
    cfg.delay = millis(o.delay, "delay")?;
    cfg.count = o.count;
    cfg.rto = millis(o.rto, "rto")?;
    cfg.seed = o.seed;
    cfg.real_sockets = o.real_sockets;
    cfg.timing = o.timing;
    cfg.iterations = o.iterations;
    Ok((cfg, o.out))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (cfg, out) = match config(cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let records = match bench::run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if e.is_usage() { 2 } else { 1 });
        }
    };
    let written = match out {
        Some(path) => File::create(&path)
            .map_err(csv::Error::from)
            .and_then(|f| bench::write_csv(&records, f)),
        None => bench::write_csv(&records, io::stdout().lock()),
    };
    if let Err(e) = written {
        eprintln!("error: writing CSV: {e}");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
