//! Datagrams arriving out of order are held back by the ordering layer. A
//! lost one is skipped once the delivery timeout expires.

use layered_net::layers::OrderingLayer;
use layered_net::{ActorId, Message, Preset, StackConfig, UnitKind};
use std::time::Duration;

fn main() {
    let cfg = StackConfig::default();
    let mut tx = Preset::OrderingBasp.build(UnitKind::Datagram, &cfg).unwrap();
    let mut rx = Preset::OrderingBasp.build(UnitKind::Datagram, &cfg).unwrap();

    let units: Vec<_> = (0..6u8)
        .map(|i| {
            let msg = Message::new(ActorId(1), ActorId(2), vec![i]);
            tx.send(&msg, Duration::ZERO).unwrap().remove(0)
        })
        .collect();

    // 1 and 0 swapped, 3 never arrives
    let mut now = Duration::ZERO;
    for i in [1, 0, 2, 4, 5] {
        now += Duration::from_millis(1);
        let got: Vec<u8> = rx.receive_vec(units[i].clone(), now).unwrap().iter().map(|m| m.payload[0]).collect();
        println!("t={now:?} arrived {i}, delivered {got:?}");
    }

    let deadline = rx.next_deadline().expect("4 and 5 are buffered");
    let mut out = Vec::new();
    rx.on_timeout(deadline, &mut out).unwrap();
    let got: Vec<u8> = out.iter().map(|m| m.payload[0]).collect();
    println!("t={deadline:?} timeout, delivered {got:?}");

    let ordering = rx.layer::<OrderingLayer>().unwrap().buffer();
    println!("abandoned: {}, late: {}", ordering.abandoned(), ordering.late());
}
