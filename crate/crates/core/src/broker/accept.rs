use super::{Behavior, EndpointBroker};
use crate::layers::LayerStack;
use crate::time::Time;
use crate::transport::{Transport, TcpTransport, UdpPeerTransport};
use mio::net::{TcpListener, UdpSocket};
use std::collections::HashMap;
use std::io;
use std::net::SocketAddr;
use std::sync::Arc;

pub(crate) type DynBroker = EndpointBroker<Box<dyn Transport>, Box<dyn Behavior>>;

/// Decides how to react to a new connection or datagram source: return the
/// protocol policy and behavior for the spawned broker, or `None` to
/// reject.
pub trait AcceptPolicy: Send + 'static {
    fn accept(&mut self, peer: SocketAddr) -> Option<(LayerStack, Box<dyn Behavior>)>;
}

impl<F> AcceptPolicy for F
where
    F: FnMut(SocketAddr) -> Option<(LayerStack, Box<dyn Behavior>)> + Send + 'static,
{
    fn accept(&mut self, peer: SocketAddr) -> Option<(LayerStack, Box<dyn Behavior>)> {
        self(peer)
    }
}

/// Accepts TCP connections and hands each one to a new endpoint broker.
pub struct TcpAcceptBroker {
    listener: TcpListener,
    policy: Box<dyn AcceptPolicy>,
    accepted: u64,
}

impl TcpAcceptBroker {
    pub fn new(listener: TcpListener, policy: impl AcceptPolicy) -> Self {
        TcpAcceptBroker {
            listener,
            policy: Box::new(policy),
            accepted: 0,
        }
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub(crate) fn listener_mut(&mut self) -> &mut TcpListener {
        &mut self.listener
    }

    /// Accepts every pending connection. Accept failures are logged and the
    /// listener keeps going.
    pub(crate) fn on_readable(&mut self) -> Vec<DynBroker> {
        let mut spawned = Vec::new();
        loop {
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    let _ = stream.set_nodelay(true);
                    match self.policy.accept(peer) {
                        Some((stack, behavior)) => {
                            self.accepted += 1;
                            let transport: Box<dyn Transport> = Box::new(TcpTransport::new(stream));
                            spawned.push(EndpointBroker::new(transport, stack, behavior));
                        }
                        None => log::debug!("accept policy rejected {peer}"),
                    }
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => break,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    break;
                }
            }
        }
        spawned
    }
}

/// Multiplexes one UDP socket over many peers, spawning an endpoint broker
/// for every new source address.
pub struct UdpAcceptBroker {
    socket: Arc<UdpSocket>,
    policy: Box<dyn AcceptPolicy>,
    peers: HashMap<SocketAddr, DynBroker>,
    rejected: HashMap<SocketAddr, ()>,
    buf: Box<[u8]>,
}

impl UdpAcceptBroker {
    /// `socket` must already be registered with the poller.
    pub fn new(socket: UdpSocket, policy: impl AcceptPolicy) -> Self {
        UdpAcceptBroker {
            socket: Arc::new(socket),
            policy: Box::new(policy),
            peers: HashMap::new(),
            rejected: HashMap::new(),
            buf: vec![0; 65_536].into_boxed_slice(),
        }
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    pub fn peer_count(&self) -> usize {
        self.peers.len()
    }

    pub(crate) fn peer_mut(&mut self, addr: &SocketAddr) -> Option<&mut DynBroker> {
        self.peers.get_mut(addr)
    }

    pub(crate) fn peer(&self, addr: &SocketAddr) -> Option<&DynBroker> {
        self.peers.get(addr)
    }

    pub(crate) fn adopt(&mut self) {
        self.peers.values_mut().for_each(DynBroker::adopt);
    }

    /// Reads all pending datagrams. Returns the addresses of newly spawned
    /// peers.
    pub(crate) fn on_readable(&mut self, now: Time) -> Vec<SocketAddr> {
        let mut spawned = Vec::new();
        loop {
            let (unit, from) = match crate::transport::recv_from(&self.socket, &mut self.buf) {
                Ok(Some(received)) => received,
                Ok(None) => break,
                Err(e) => {
                    log::debug!("udp receive failed: {e}");
                    continue;
                }
            };
            if self.rejected.contains_key(&from) {
                continue;
            }
            if !self.peers.contains_key(&from) {
                match self.policy.accept(from) {
                    Some((stack, behavior)) => {
                        let transport: Box<dyn Transport> =
                            Box::new(UdpPeerTransport::new(self.socket.clone(), from));
                        let mut broker = EndpointBroker::new(transport, stack, behavior);
                        broker.adopt();
                        self.peers.insert(from, broker);
                        spawned.push(from);
                    }
                    None => {
                        self.rejected.insert(from, ());
                        continue;
                    }
                }
            }
            self.peers.get_mut(&from).expect("present").on_unit(unit, now);
        }
        spawned
    }

    pub(crate) fn next_deadline(&self) -> Option<Time> {
        self.peers.values().filter_map(|b| b.next_deadline()).min()
    }

    pub(crate) fn on_timer(&mut self, now: Time) {
        for broker in self.peers.values_mut() {
            if broker.next_deadline().is_some_and(|d| d <= now) {
                broker.on_timer(now);
            }
        }
    }
}
