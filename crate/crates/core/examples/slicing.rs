//! Messages larger than one datagram are sliced to fit the MTU and
//! reassembled on the other side, even when slices arrive shuffled.

use layered_net::layers::SlicingLayer;
use layered_net::{ActorId, LayerStack, Message, UnitKind};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Duration;

fn stack(mtu: usize) -> LayerStack {
    LayerStack::builder(UnitKind::Datagram)
        .layer(SlicingLayer::new(mtu))
        .basp()
        .build()
        .unwrap()
}

fn main() {
    let now = Duration::ZERO;
    let mtu = 1200;
    let (mut tx, mut rx) = (stack(mtu), stack(mtu));
    let payload: Vec<u8> = (0..200_000u32).map(|i| (i % 251) as u8).collect();
    let msg = Message::new(ActorId(1), ActorId(2), payload);

    let mut units = tx.send(&msg, now).unwrap();
    println!(
        "{} byte message -> {} slices of at most {} bytes",
        msg.payload.len(),
        units.len(),
        units.iter().map(|u| u.len()).max().unwrap()
    );
    units.shuffle(&mut ChaCha8Rng::seed_from_u64(1));

    let mut out = Vec::new();
    for unit in units {
        rx.receive(unit, now, &mut out).unwrap();
    }
    println!("reassembled: {}", out == [msg]);
    println!("largest message for mtu {mtu}: {} bytes", tx.layer::<SlicingLayer>().unwrap().max_unit());
}
