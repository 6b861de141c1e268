use super::{Transport, TransportError, UnitKind, WRITE_WATERMARK};
use bytes::{Buf, Bytes, BytesMut};
use mio::net::{TcpListener, TcpStream};
use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::net::SocketAddr;

const READ_CHUNK: usize = 64 * 1024;

/// Connects to `addr`, blocking until the handshake completes, and returns
/// a non-blocking transport.
pub fn tcp_connect(addr: SocketAddr) -> Result<TcpTransport, TransportError> {
    let stream = std::net::TcpStream::connect(addr)?;
    stream.set_nonblocking(true)?;
    stream.set_nodelay(true)?;
    Ok(TcpTransport::new(TcpStream::from_std(stream)))
}

/// Binds a non-blocking listener.
pub fn tcp_listen(addr: SocketAddr) -> Result<TcpListener, TransportError> {
    let listener = std::net::TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    Ok(TcpListener::from_std(listener))
}

/// Stream transport over a TCP connection.
#[derive(Debug)]
pub struct TcpTransport {
    stream: TcpStream,
    read_buf: BytesMut,
    write_queue: VecDeque<Bytes>,
    queued: usize,
    closed: bool,
}

impl TcpTransport {
    pub fn new(stream: TcpStream) -> TcpTransport {
        TcpTransport {
            stream,
            read_buf: BytesMut::new(),
            write_queue: VecDeque::new(),
            queued: 0,
            closed: false,
        }
    }

    pub fn peer_addr(&self) -> io::Result<SocketAddr> {
        self.stream.peer_addr()
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.stream.local_addr()
    }

    fn fail(&mut self, e: io::Error) -> TransportError {
        let err = TransportError::from(e);
        if matches!(err, TransportError::Closed) {
            self.closed = true;
        }
        err
    }
}

impl Transport for TcpTransport {
    fn kind(&self) -> UnitKind {
        UnitKind::Stream
    }

    fn write(&mut self, unit: Bytes) -> Result<(), TransportError> {
        if self.closed {
            return Err(TransportError::Closed);
        }
        if unit.is_empty() {
            return Ok(());
        }
        let was_below = self.queued < WRITE_WATERMARK;
        self.queued += unit.len();
        self.write_queue.push_back(unit);
        if was_below && self.queued >= WRITE_WATERMARK {
            log::warn!("tcp write queue above {WRITE_WATERMARK} bytes");
        }
        self.flush()
    }

    fn read(&mut self) -> Result<Option<Bytes>, TransportError> {
        if self.closed {
            return Err(TransportError::Closed);
        }
        self.read_buf.resize(READ_CHUNK, 0);
        loop {
            match self.stream.read(&mut self.read_buf) {
                Ok(0) => {
                    self.closed = true;
                    return Err(TransportError::Closed);
                }
                Ok(n) => return Ok(Some(self.read_buf.split_to(n).freeze())),
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => return Ok(None),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(self.fail(e)),
            }
        }
    }

    fn flush(&mut self) -> Result<(), TransportError> {
        while let Some(front) = self.write_queue.front_mut() {
            match self.stream.write(front) {
                Ok(0) => return Err(self.fail(io::ErrorKind::WriteZero.into())),
                Ok(n) => {
                    self.queued -= n;
                    front.advance(n);
                    if front.is_empty() {
                        self.write_queue.pop_front();
                    }
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => break,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(self.fail(e)),
            }
        }
        Ok(())
    }

    fn queued(&self) -> usize {
        self.queued
    }

    fn source(&mut self) -> Option<&mut dyn mio::event::Source> {
        Some(&mut self.stream)
    }
}
