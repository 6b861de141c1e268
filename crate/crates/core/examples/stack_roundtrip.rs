//! Builds two copies of a layer stack and passes messages between them by
//! hand, printing the wire units.

use layered_net::{ActorId, LayerStack, Message, Preset, StackConfig, UnitKind};
use std::time::Duration;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect::<Vec<_>>().join(" ")
}

fn main() {
    let now = Duration::ZERO;
    let cfg = StackConfig::default();
    for preset in [Preset::Basp, Preset::OrderingBasp, Preset::Roudp] {
        let mut alice: LayerStack = preset.build(UnitKind::Datagram, &cfg).unwrap();
        let mut bob = preset.build(UnitKind::Datagram, &cfg).unwrap();
        println!("{preset}: layers {:?}, {} header bytes", alice.layer_names(), alice.overhead());

        let msg = Message::new(ActorId(1), ActorId(2), &b"hello"[..]);
        for unit in alice.send(&msg, now).unwrap() {
            println!("  wire: {}", hex(&unit));
            let got = bob.receive_vec(unit, now).unwrap();
            println!("  delivered: {:?}", got);
        }
        for ack in bob.drain_outbound() {
            println!("  ack:  {}", hex(&ack));
            alice.receive_vec(ack, now).unwrap();
        }
    }
}
