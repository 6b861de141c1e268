use super::{check_datagram, Transport, TransportError, UnitKind};
use bytes::Bytes;
use std::collections::VecDeque;

/// In-memory transport: reads return prepared units in order, writes are
/// captured.
#[derive(Debug)]
pub struct MockTransport {
    kind: UnitKind,
    inbound: VecDeque<Bytes>,
    outbound: Vec<Bytes>,
    reads: u64,
    written_bytes: u64,
    closed: bool,
}

impl MockTransport {
    pub fn new(kind: UnitKind) -> MockTransport {
        MockTransport {
            kind,
            inbound: VecDeque::new(),
            outbound: Vec::new(),
            reads: 0,
            written_bytes: 0,
            closed: false,
        }
    }

    pub fn datagram() -> MockTransport {
        MockTransport::new(UnitKind::Datagram)
    }

    pub fn stream() -> MockTransport {
        MockTransport::new(UnitKind::Stream)
    }

    /// Queues a unit for the next `read`.
    pub fn prepare(&mut self, unit: impl Into<Bytes>) {
        self.inbound.push_back(unit.into());
    }

    pub fn pending_inbound(&self) -> usize {
        self.inbound.len()
    }

    pub fn captured(&self) -> &[Bytes] {
        &self.outbound
    }

    pub fn take_captured(&mut self) -> Vec<Bytes> {
        std::mem::take(&mut self.outbound)
    }

    /// Successful `read` calls that returned data.
    pub fn reads(&self) -> u64 {
        self.reads
    }

    pub fn written_bytes(&self) -> u64 {
        self.written_bytes
    }

    /// Makes every later read and write fail with `Closed`.
    pub fn close(&mut self) {
        self.closed = true;
    }
}

impl Transport for MockTransport {
    fn kind(&self) -> UnitKind {
        self.kind
    }

    fn write(&mut self, unit: Bytes) -> Result<(), TransportError> {
        if self.closed {
            return Err(TransportError::Closed);
        }
        if self.kind == UnitKind::Datagram {
            check_datagram(&unit)?;
        }
        self.written_bytes += unit.len() as u64;
        self.outbound.push(unit);
        Ok(())
    }

    fn read(&mut self) -> Result<Option<Bytes>, TransportError> {
        if self.closed {
            return Err(TransportError::Closed);
        }
        let unit = self.inbound.pop_front();
        if unit.is_some() {
            self.reads += 1;
        }
        Ok(unit)
    }
}
