//! Transport policies: moving wire units to and from an endpoint.
//!
//! Stream transports preserve byte order and never lose bytes within a
//! connection. Datagram transports may drop, reorder or duplicate units but
//! never split or corrupt them.

mod mock;
mod tcp;
mod udp;

pub use mock::MockTransport;
pub use tcp::{tcp_connect, tcp_listen, TcpTransport};
pub(crate) use udp::recv_from;
pub use udp::{udp_bind, UdpPeerTransport, UdpTransport};

use bytes::Bytes;
use std::io;

/// Largest UDP payload over IPv4.
pub const UDP_MAX_PAYLOAD: usize = 65_507;

/// Queued outbound bytes above which a transport reports back pressure.
pub const WRITE_WATERMARK: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnitKind {
    Stream,
    Datagram,
}

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("endpoint closed")]
    Closed,
    #[error("unit of {size} bytes exceeds datagram limit of {limit}")]
    PayloadTooLarge { size: usize, limit: usize },
    #[error("address in use: {0}")]
    AddressInUse(io::Error),
    #[error("connection refused")]
    ConnectionRefused,
    #[error("unreachable: {0}")]
    Unreachable(io::Error),
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for TransportError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::AddrInUse => TransportError::AddressInUse(e),
            io::ErrorKind::ConnectionRefused => TransportError::ConnectionRefused,
            io::ErrorKind::ConnectionReset
            | io::ErrorKind::ConnectionAborted
            | io::ErrorKind::BrokenPipe
            | io::ErrorKind::UnexpectedEof => TransportError::Closed,
            io::ErrorKind::HostUnreachable
            | io::ErrorKind::NetworkUnreachable
            | io::ErrorKind::AddrNotAvailable => TransportError::Unreachable(e),
            _ => TransportError::Io(e),
        }
    }
}

/// Reads and writes wire units on one endpoint.
///
/// Implementations never block: `read` returns `Ok(None)` when nothing is
/// available and `write` queues whatever the socket does not take.
pub trait Transport: Send {
    fn kind(&self) -> UnitKind;

    fn write(&mut self, unit: Bytes) -> Result<(), TransportError>;

    /// Returns the next datagram or stream chunk, or `None` if no data is
    /// available right now.
    fn read(&mut self) -> Result<Option<Bytes>, TransportError>;

    /// Pushes queued outbound bytes to the socket.
    fn flush(&mut self) -> Result<(), TransportError> {
        Ok(())
    }

    /// Bytes accepted by `write` but not yet handed to the socket.
    fn queued(&self) -> usize {
        0
    }

    /// The pollable socket, if any.
    fn source(&mut self) -> Option<&mut dyn mio::event::Source> {
        None
    }
}

impl Transport for Box<dyn Transport> {
    fn kind(&self) -> UnitKind {
        (**self).kind()
    }

    fn write(&mut self, unit: Bytes) -> Result<(), TransportError> {
        (**self).write(unit)
    }

    fn read(&mut self) -> Result<Option<Bytes>, TransportError> {
        (**self).read()
    }

    fn flush(&mut self) -> Result<(), TransportError> {
        (**self).flush()
    }

    fn queued(&self) -> usize {
        (**self).queued()
    }

    fn source(&mut self) -> Option<&mut dyn mio::event::Source> {
        (**self).source()
    }
}

pub(crate) fn check_datagram(unit: &[u8]) -> Result<(), TransportError> {
    if unit.len() > UDP_MAX_PAYLOAD {
        return Err(TransportError::PayloadTooLarge {
            size: unit.len(),
            limit: UDP_MAX_PAYLOAD,
        });
    }
    Ok(())
}
