//! A user-defined layer: a one-byte XOR checksum that drops corrupted
//! units. It composes with the built-in layers like any other.

use bytes::Bytes;
use layered_net::layers::{Layer, LayerCx, LayerError, OrderingLayer};
use layered_net::wire::WireBuffer;
use layered_net::{ActorId, LayerStack, Message, UnitKind};
use std::any::Any;
use std::time::Duration;

#[derive(Default)]
struct Checksum {
    rejected: u64,
}

fn xor(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0, |acc, b| acc ^ b)
}

impl Layer for Checksum {
    fn name(&self) -> &'static str {
        "checksum"
    }

    fn header_len(&self) -> usize {
        1
    }

    fn on_send(&mut self, mut unit: WireBuffer, cx: &mut LayerCx<'_>) -> Result<(), LayerError> {
        let sum = xor(unit.as_slice());
        unit.prepend(&[sum]);
        cx.down.push(unit);
        Ok(())
    }

    fn on_receive(&mut self, unit: Bytes, _cx: &mut LayerCx<'_>, up: &mut Vec<Bytes>) -> Result<(), LayerError> {
        match unit.split_first() {
            Some((&sum, body)) if sum == xor(body) => up.push(unit.slice(1..)),
            _ => self.rejected += 1,
        }
        Ok(())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

fn stack() -> LayerStack {
    LayerStack::builder(UnitKind::Datagram)
        .layer(Checksum::default())
        .layer(OrderingLayer::default())
        .basp()
        .build()
        .unwrap()
}

fn main() {
    let now = Duration::ZERO;
    let (mut tx, mut rx) = (stack(), stack());
    println!("layers: {:?}", tx.layer_names());

    let good = tx.send(&Message::new(ActorId(1), ActorId(2), &b"intact"[..]), now).unwrap().remove(0);
    let bad = tx.send(&Message::new(ActorId(1), ActorId(2), &b"flipped"[..]), now).unwrap().remove(0);
    let mut bad = bad.to_vec();
    *bad.last_mut().unwrap() ^= 0x01;

    println!("intact:  {:?}", rx.receive_vec(good, now).unwrap());
    println!("flipped: {:?}", rx.receive_vec(Bytes::from(bad), now).unwrap());
    println!("rejected by checksum: {}", rx.layer::<Checksum>().unwrap().rejected);
}
