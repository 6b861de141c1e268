//! An echo server and a client on real TCP sockets, each driven by its own
//! multiplexer thread.

use layered_net::broker::{Behavior, BehaviorCx, FnBehavior, Multiplexer};
use layered_net::{ActorId, Message, Preset, StackConfig, UnitKind};
use std::sync::mpsc;
use std::time::Duration;

struct Print(mpsc::Sender<Message>);

impl Behavior for Print {
    fn on_message(&mut self, msg: Message, _cx: &mut BehaviorCx<'_>) {
        let _ = self.0.send(msg);
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let stack = || Preset::Basp.build(UnitKind::Stream, &StackConfig::default()).unwrap();

    let mut server = Multiplexer::new()?;
    let addr = server.listen_tcp("127.0.0.1:0".parse()?, move |peer| {
        println!("server: accepted {peer}");
        let echo: Box<dyn Behavior> = Box::new(FnBehavior(|m: Message, cx: &mut BehaviorCx<'_>| cx.send(m)));
        Some((stack(), echo))
    })?;
    let (server, server_thread) = server.spawn();

    let (tx, rx) = mpsc::channel();
    let mut client = Multiplexer::new()?;
    let peer = client
        .connect_tcp(addr, stack(), Box::new(Print(tx)))
        .ok_or("connect failed")?;
    let (client, client_thread) = client.spawn();

    for word in ["alpha", "beta", "gamma"] {
        client.send(peer, Message::new(ActorId(1), ActorId(2), word.as_bytes().to_vec()));
    }
    for _ in 0..3 {
        let reply = rx.recv_timeout(Duration::from_secs(5))?;
        println!("client: echo {:?}", String::from_utf8_lossy(&reply.payload));
    }

    client.shutdown();
    server.shutdown();
    client_thread.join().unwrap()?;
    server_thread.join().unwrap()?;
    Ok(())
}
