mod common;

use common::{id_of, msg, relay, Composition};
use layered_net::layers::{OrderingLayer, SlicingLayer};
use layered_net::wire::{ActorId, Message};
use layered_net::{LayerStack, Preset, StackConfig, UnitKind};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Duration;

const T0: Duration = Duration::ZERO;

fn sliced(mtu: usize) -> LayerStack {
    LayerStack::builder(UnitKind::Datagram)
        .layer(SlicingLayer::new(mtu))
        .basp()
        .build()
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn random_compositions_roundtrip(seed in any::<u64>(), lens in prop::collection::vec(0usize..1.0e4 as usize, 1..8)) {
        let comp = Composition::random(&mut ChaCha8Rng::seed_from_u64(seed));
        let (mut tx, mut rx) = (comp.build(), comp.build());
        let msgs: Vec<Message> = lens
            .iter()
            .enumerate()
            .map(|(i, &len)| msg(i as u32, len.min(comp.payload_limit())))
            .collect();
        let got = relay(&mut tx, &mut rx, &msgs);
        if comp.basp {
            prop_assert_eq!(got, msgs);
        } else {
            // raw framing carries no actor ids
            let payloads = |v: &[Message]| v.iter().map(|m| m.payload.clone()).collect::<Vec<_>>();
            prop_assert_eq!(payloads(&got), payloads(&msgs));
        }
    }

    #[test]
    fn slices_reassemble_in_any_order(len in 0usize..20_000, mtu in 64usize..1500, seed in any::<u64>()) {
        let (mut tx, mut rx) = (sliced(mtu), sliced(mtu));
        let m = msg(1, len);
        let mut units = tx.send(&m, T0).unwrap();
        prop_assert!(units.len() <= 255);
        prop_assert!(units.iter().all(|u| u.len() <= mtu));
        use rand::seq::SliceRandom;
        units.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut out = Vec::new();
        for u in units {
            rx.receive(u, T0, &mut out).unwrap();
        }
        prop_assert_eq!(out, vec![m]);
    }

    #[test]
    fn ordering_never_reorders(perm in Just((0u32..5).collect::<Vec<_>>()).prop_shuffle()) {
        let build = || Preset::OrderingBasp.build(UnitKind::Datagram, &StackConfig::default()).unwrap();
        let (mut tx, mut rx) = (build(), build());
        let units: Vec<_> = (0..5).map(|i| tx.send(&msg(i, 16), T0).unwrap().remove(0)).collect();
        let mut out = Vec::new();
        for &i in &perm {
            rx.receive(units[i as usize].clone(), T0, &mut out).unwrap();
        }
        let ids: Vec<u32> = out.iter().map(|m| id_of(&m.payload)).collect();
        prop_assert_eq!(ids, vec![0, 1, 2, 3, 4]);
        prop_assert!(rx.next_deadline().is_none());
    }
}

#[test]
fn ordering_survives_serial_wraparound() {
    let build = || Preset::OrderingBasp.build(UnitKind::Datagram, &StackConfig::default()).unwrap();
    let (mut tx, mut rx) = (build(), build());
    let mut out = Vec::new();
    for i in 0..u32::from(u16::MAX) - 2 {
        rx.receive(tx.send(&msg(i, 4), T0).unwrap().remove(0), T0, &mut out).unwrap();
    }
    out.clear();
    let units: Vec<_> = (0..6).map(|i| tx.send(&msg(i, 8), T0).unwrap().remove(0)).collect();
    for i in [1, 0, 3, 2, 5, 4] {
        rx.receive(units[i].clone(), T0, &mut out).unwrap();
    }
    let ids: Vec<u32> = out.iter().map(|m| id_of(&m.payload)).collect();
    assert_eq!(ids, [0, 1, 2, 3, 4, 5]);
    assert_eq!(rx.layer::<OrderingLayer>().unwrap().buffer().abandoned(), 0);
}

#[test]
fn empty_payload_roundtrips_every_preset() {
    let cfg = StackConfig::default();
    for p in Preset::ALL {
        for kind in [UnitKind::Datagram, UnitKind::Stream] {
            // without BASP there are no actor ids to compare
            if !p.supports(kind) || matches!(p, Preset::Raw | Preset::Ordering) {
                continue;
            }
            let (mut tx, mut rx) = (p.build(kind, &cfg).unwrap(), p.build(kind, &cfg).unwrap());
            let m = Message::new(ActorId(1), ActorId(2), Vec::new());
            let got = relay(&mut tx, &mut rx, std::slice::from_ref(&m));
            assert_eq!(got, vec![m], "{p} {kind:?}");
        }
    }
}
