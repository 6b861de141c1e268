//! One UDP socket serving several peers: the accept broker spawns an
//! endpoint broker, with its own reliable stack, per datagram source.

use layered_net::broker::{Behavior, BehaviorCx, FnBehavior, Multiplexer};
use layered_net::transport::UdpTransport;
use layered_net::{ActorId, Message, Preset, StackConfig, UnitKind};
use std::sync::mpsc;
use std::time::Duration;

struct Forward(usize, mpsc::Sender<(usize, Message)>);

impl Behavior for Forward {
    fn on_message(&mut self, msg: Message, _cx: &mut BehaviorCx<'_>) {
        let _ = self.1.send((self.0, msg));
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let stack = || Preset::Roudp.build(UnitKind::Datagram, &StackConfig::default()).unwrap();

    let mut server = Multiplexer::new()?;
    let addr = server.bind_udp("127.0.0.1:0".parse()?, move |peer| {
        println!("server: new peer {peer}");
        let greet: Box<dyn Behavior> = Box::new(FnBehavior(|m: Message, cx: &mut BehaviorCx<'_>| {
            let mut reply = b"hi ".to_vec();
            reply.extend_from_slice(&m.payload);
            cx.send(Message::new(m.destination, m.source, reply));
        }));
        Some((stack(), greet))
    })?;
    let (server, server_thread) = server.spawn();

    let (tx, rx) = mpsc::channel();
    let mut clients = Multiplexer::new()?;
    let mut ids = Vec::new();
    for n in 0..3 {
        let transport = UdpTransport::connect("127.0.0.1:0".parse()?, addr)?;
        ids.push(clients.add_endpoint(Box::new(transport), stack(), Box::new(Forward(n, tx.clone())))?);
    }
    let (clients, clients_thread) = clients.spawn();
    for (n, id) in ids.iter().enumerate() {
        clients.send(*id, Message::new(ActorId(n as u64), ActorId(0), format!("client {n}").into_bytes()));
    }
    for _ in 0..3 {
        let (n, reply) = rx.recv_timeout(Duration::from_secs(5))?;
        println!("client {n}: {:?}", String::from_utf8_lossy(&reply.payload));
    }

    let (count_tx, count_rx) = mpsc::channel();
    server.exec(move |m| count_tx.send(m.broker_count()).unwrap());
    println!("server brokers: {}", count_rx.recv_timeout(Duration::from_secs(5))?);

    clients.shutdown();
    server.shutdown();
    clients_thread.join().unwrap()?;
    server_thread.join().unwrap()?;
    Ok(())
}
