//! Failure detection: a heartbeat layer beats once per interval and the
//! broker reports the peer as suspected after three silent intervals.

use layered_net::broker::{Behavior, BehaviorCx, BrokerEvent, EndpointBroker};
use layered_net::layers::{HeartbeatLayer, Liveness};
use layered_net::transport::MockTransport;
use layered_net::{Message, Preset, StackConfig, UnitKind};
use std::time::Duration;

struct Watch(&'static str);

impl Behavior for Watch {
    fn on_message(&mut self, _msg: Message, _cx: &mut BehaviorCx<'_>) {}

    fn on_event(&mut self, event: BrokerEvent, cx: &mut BehaviorCx<'_>) {
        println!("t={:?} {} got {event:?}", cx.now(), self.0);
    }
}

fn main() {
    let cfg = StackConfig {
        heartbeat: true,
        ..StackConfig::default()
    };
    let stack = || Preset::Basp.build(UnitKind::Datagram, &cfg).unwrap();
    let mut a = EndpointBroker::new(MockTransport::datagram(), stack(), Watch("a"));
    let mut b = EndpointBroker::new(MockTransport::datagram(), stack(), Watch("b"));
    a.stack_mut().layer_mut::<HeartbeatLayer>().unwrap().start(Duration::ZERO);
    b.stack_mut().layer_mut::<HeartbeatLayer>().unwrap().start(Duration::ZERO);

    // b answers for two seconds, then goes silent
    let mut now = Duration::ZERO;
    while now < Duration::from_secs(6) {
        now = [a.next_deadline(), b.next_deadline()].into_iter().flatten().min().unwrap();
        a.on_timer(now);
        b.on_timer(now);
        let beats = b.transport_mut().take_captured();
        if now <= Duration::from_secs(2) {
            for beat in beats {
                a.on_unit(beat, now);
            }
        }
        for beat in a.transport_mut().take_captured() {
            b.on_unit(beat, now);
        }
        let liveness = a.stack().layer::<HeartbeatLayer>().unwrap().liveness(now);
        println!("t={now:?} a sees b as {liveness:?}");
        if liveness == Liveness::Suspected {
            break;
        }
    }
}
