use super::{check_datagram, Transport, TransportError, UnitKind};
use bytes::Bytes;
use mio::net::UdpSocket;
use std::io;
use std::net::SocketAddr;
use std::sync::Arc;

const RECV_BUF: usize = 65_536;

/// Binds a non-blocking UDP socket.
pub fn udp_bind(addr: SocketAddr) -> Result<UdpSocket, TransportError> {
    let socket = std::net::UdpSocket::bind(addr)?;
    socket.set_nonblocking(true)?;
    Ok(UdpSocket::from_std(socket))
}

fn recv_result(result: io::Result<usize>, buf: &[u8]) -> Result<Option<Bytes>, TransportError> {
    match result {
        Ok(n) => Ok(Some(Bytes::copy_from_slice(&buf[..n]))),
        Err(e) if e.kind() == io::ErrorKind::WouldBlock => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn send_result(result: io::Result<usize>) -> Result<(), TransportError> {
    match result {
        Ok(_) => Ok(()),
        // UDP may drop when the socket buffer is full
        Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
            log::debug!("udp send buffer full, datagram dropped");
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

/// Datagram transport over a UDP socket connected to one peer.
#[derive(Debug)]
pub struct UdpTransport {
    socket: UdpSocket,
    buf: Box<[u8]>,
}

impl UdpTransport {
    /// Binds to `local` and restricts traffic to `peer`.
    pub fn connect(local: SocketAddr, peer: SocketAddr) -> Result<UdpTransport, TransportError> {
        let socket = udp_bind(local)?;
        socket.connect(peer)?;
        Ok(UdpTransport::new(socket))
    }

    pub fn new(socket: UdpSocket) -> UdpTransport {
        UdpTransport {
            socket,
            buf: vec![0; RECV_BUF].into_boxed_slice(),
        }
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }
}

impl Transport for UdpTransport {
    fn kind(&self) -> UnitKind {
        UnitKind::Datagram
    }

    fn write(&mut self, unit: Bytes) -> Result<(), TransportError> {
        check_datagram(&unit)?;
        send_result(self.socket.send(&unit))
    }

    fn read(&mut self) -> Result<Option<Bytes>, TransportError> {
        let result = self.socket.recv(&mut self.buf);
        match recv_result(result, &self.buf) {
            // an ICMP port unreachable from a previous send; not fatal for UDP
            Err(TransportError::ConnectionRefused) => Ok(None),
            other => other,
        }
    }

    fn source(&mut self) -> Option<&mut dyn mio::event::Source> {
        Some(&mut self.socket)
    }
}

/// Sending half for one peer of a shared, unconnected socket. Inbound
/// datagrams are read and demultiplexed by whoever owns the socket.
#[derive(Debug, Clone)]
pub struct UdpPeerTransport {
    socket: Arc<UdpSocket>,
    peer: SocketAddr,
}

impl UdpPeerTransport {
    pub fn new(socket: Arc<UdpSocket>, peer: SocketAddr) -> UdpPeerTransport {
        UdpPeerTransport { socket, peer }
    }

    pub fn peer(&self) -> SocketAddr {
        self.peer
    }
}

impl Transport for UdpPeerTransport {
    fn kind(&self) -> UnitKind {
        UnitKind::Datagram
    }

    fn write(&mut self, unit: Bytes) -> Result<(), TransportError> {
        check_datagram(&unit)?;
        send_result(self.socket.send_to(&unit, self.peer))
    }

    fn read(&mut self) -> Result<Option<Bytes>, TransportError> {
        Ok(None)
    }
}

/// Receives one datagram from a shared socket along with its source.
pub fn recv_from(socket: &UdpSocket, buf: &mut [u8]) -> Result<Option<(Bytes, SocketAddr)>, TransportError> {
    match socket.recv_from(buf) {
        Ok((n, from)) => Ok(Some((Bytes::copy_from_slice(&buf[..n]), from))),
        Err(e) if e.kind() == io::ErrorKind::WouldBlock => Ok(None),
        Err(e) => Err(e.into()),
    }
}
