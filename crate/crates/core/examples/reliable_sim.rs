//! Reliable, ordered delivery over a simulated link that drops, delays,
//! reorders and duplicates datagrams. Runs in virtual time.

use layered_net::broker::{Behavior, BehaviorCx};
use layered_net::layers::ReliabilityLayer;
use layered_net::simnet::{Direction, LinkModel, SimPair};
use layered_net::{ActorId, Message, Preset, StackConfig, UnitKind};
use std::time::Duration;

#[derive(Default)]
struct Counter(Vec<u32>);

impl Behavior for Counter {
    fn on_message(&mut self, msg: Message, _cx: &mut BehaviorCx<'_>) {
        self.0.push(u32::from_be_bytes(msg.payload[..4].try_into().unwrap()));
    }
}

fn main() {
    let model = LinkModel::lossy(0.2, Duration::from_millis(5), 42)
        .with_jitter(Duration::from_millis(10))
        .with_duplication(0.05);
    let cfg = StackConfig::default();
    let side = || (Preset::Rudp.build(UnitKind::Datagram, &cfg).unwrap(), Counter::default());
    let mut sim = SimPair::new(model, side(), side());

    for i in 0..1000u32 {
        sim.send(0, Message::new(ActorId(1), ActorId(2), i.to_be_bytes().to_vec()));
    }
    let done = sim
        .run_until(|nodes| nodes[1].behavior().0.len() == 1000)
        .expect("link never stalls for long");

    let rel = sim.node(0).stack().layer::<ReliabilityLayer>().unwrap();
    let got = &sim.node(1).behavior().0;
    println!("all 1000 delivered after {done:?} of virtual time");
    println!("retransmissions: {}", rel.retransmissions());
    println!("link drops a->b: {}", sim.link().stats(Direction::AToB).dropped);
    let mut unique = got.clone();
    unique.sort_unstable();
    unique.dedup();
    println!("distinct messages: {}", unique.len());
    // rudp has no ordering layer, so jitter shows up as reordering
    println!("delivered out of send order: {}", got.windows(2).filter(|w| w[0] > w[1]).count());
}
