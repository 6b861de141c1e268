//! Ping-pong completion time over a lossy simulated link, next to the
//! simple cost model `n * delay + n * p / (1 - p) * rto`.

use layered_net::bench::{expected_completion, pingpong_run, StackChoice};
use layered_net::Preset;
use std::time::Duration;

fn main() {
    let (count, delay, rto) = (4000, Duration::from_millis(1), Duration::from_millis(40));
    println!("{:>5} {:>12} {:>10} {:>8}", "loss", "roudp (s)", "model (s)", "retrans");
    for loss in [0.0, 0.02, 0.05, 0.1] {
        let run = pingpong_run(StackChoice::Preset(Preset::Roudp), count, 64, loss, delay, rto, 7)
            .expect("simulation completes");
        let model = expected_completion(count, loss, delay, rto);
        println!(
            "{loss:>5.2} {:>12.3} {model:>10.3} {:>8}",
            run.completion.as_secs_f64(),
            run.retransmissions
        );
    }
    let tcp = pingpong_run(StackChoice::Tcp, count, 64, 0.05, delay, rto, 7).unwrap();
    println!("emulated tcp at 0.05: {:.3} s", tcp.completion.as_secs_f64());
}
