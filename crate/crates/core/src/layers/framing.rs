use super::LayerError;
use crate::wire::{ActorId, BaspHeader, Message, WireBuffer};
use bytes::{Buf, Bytes, BytesMut};

/// The innermost part of a stack, converting between messages and bytes.
#[derive(Debug)]
pub enum Framing {
    /// Payload only. Received messages carry zero actor ids.
    Raw,
    /// One BASP message per unit.
    BaspDatagram,
    /// BASP messages parsed out of a byte stream.
    BaspStream(StreamParser),
}

impl Framing {
    pub fn basp_stream() -> Framing {
        Framing::BaspStream(StreamParser::new())
    }

    pub fn header_len(&self) -> usize {
        match self {
            Framing::Raw => 0,
            Framing::BaspDatagram | Framing::BaspStream(_) => BaspHeader::LEN,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Framing::Raw => "raw",
            Framing::BaspDatagram => "basp-datagram",
            Framing::BaspStream(_) => "basp-stream",
        }
    }

    pub(crate) fn encode(&self, msg: &Message, headroom: usize) -> Result<WireBuffer, LayerError> {
        let len = msg.payload.len();
        match self {
            Framing::Raw => {
                let mut unit = WireBuffer::with_headroom(headroom, len);
                unit.put_payload(&msg.payload);
                Ok(unit)
            }
            Framing::BaspDatagram | Framing::BaspStream(_) => {
                let payload_size = u32::try_from(len).map_err(|_| LayerError::PayloadTooLarge {
                    size: len,
                    limit: u32::MAX as usize,
                })?;
                let header = BaspHeader {
                    source: msg.source,
                    destination: msg.destination,
                    payload_size,
                };
                let mut unit = WireBuffer::with_headroom(headroom, BaspHeader::LEN + len);
                crate::wire::encode_basp(&header, &mut unit);
                unit.put_payload(&msg.payload);
                Ok(unit)
            }
        }
    }

    /// Decodes one unit (or stream chunk). Returns the number of reads
    /// performed.
    pub(crate) fn decode(
        &mut self,
        unit: Bytes,
        copies: &mut u64,
        out: &mut Vec<Message>,
    ) -> Result<u64, LayerError> {
        match self {
            Framing::Raw => {
                out.push(Message::raw(unit));
                Ok(1)
            }
            Framing::BaspDatagram => {
                let header = BaspHeader::decode(&unit).map_err(|e| LayerError::malformed("basp", e))?;
                let body = unit.len() - BaspHeader::LEN;
                if header.payload_size as usize != body {
                    return Err(LayerError::malformed(
                        "basp",
                        crate::wire::DecodeError::Invalid {
                            field: "payload size",
                            value: header.payload_size as u64,
                        },
                    ));
                }
                out.push(Message {
                    source: header.source,
                    destination: header.destination,
                    payload: unit.slice(BaspHeader::LEN..),
                });
                Ok(1)
            }
            Framing::BaspStream(parser) => {
                let before = parser.reads;
                let copied = parser.copies;
                parser.feed(unit, out);
                *copies += parser.copies - copied;
                Ok(parser.reads - before)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Phase {
    Header,
    Payload(BaspHeader),
}

/// Incremental parser for BASP messages on a byte stream.
///
/// Each message takes two reads: one for the 20 header bytes and one for the
/// payload the header announces. Bytes that arrive split across chunks are
/// accumulated; a payload that is fully contained in one chunk is handed out
/// without copying.
#[derive(Debug)]
pub struct StreamParser {
    phase: Phase,
    acc: BytesMut,
    reads: u64,
    copies: u64,
}

impl Default for StreamParser {
    fn default() -> Self {
        Self::new()
    }
}

impl StreamParser {
    pub fn new() -> StreamParser {
        StreamParser {
            phase: Phase::Header,
            acc: BytesMut::new(),
            reads: 0,
            copies: 0,
        }
    }

    /// Number of completed header and payload reads.
    pub fn reads(&self) -> u64 {
        self.reads
    }

    /// Payload bytes copied because they straddled chunk boundaries.
    pub fn copies(&self) -> u64 {
        self.copies
    }

    /// Bytes held back waiting for the rest of a header or payload.
    pub fn buffered(&self) -> usize {
        self.acc.len()
    }

    pub fn feed(&mut self, mut chunk: Bytes, out: &mut Vec<Message>) {
        loop {
            match self.phase {
                Phase::Header => {
                    let header_bytes = if self.acc.is_empty() && chunk.len() >= BaspHeader::LEN {
                        chunk.split_to(BaspHeader::LEN)
                    } else {
                        let take = (BaspHeader::LEN - self.acc.len()).min(chunk.len());
                        self.acc.extend_from_slice(&chunk[..take]);
                        chunk.advance(take);
                        if self.acc.len() < BaspHeader::LEN {
                            return;
                        }
                        self.acc.split().freeze()
                    };
                    let header = BaspHeader::decode(&header_bytes).expect("20 header bytes present");
                    self.reads += 1;
                    self.phase = Phase::Payload(header);
                }
                Phase::Payload(header) => {
                    let size = header.payload_size as usize;
                    let payload = if self.acc.is_empty() && chunk.len() >= size {
                        chunk.split_to(size)
                    } else {
                        let take = (size - self.acc.len()).min(chunk.len());
                        self.acc.extend_from_slice(&chunk[..take]);
                        self.copies += take as u64;
                        chunk.advance(take);
                        if self.acc.len() < size {
                            return;
                        }
                        self.acc.split().freeze()
                    };
                    self.reads += 1;
                    self.phase = Phase::Header;
                    out.push(Message {
                        source: header.source,
                        destination: header.destination,
                        payload,
                    });
                }
            }
            if chunk.is_empty() && matches!(self.phase, Phase::Header) {
                return;
            }
        }
    }
}

/// Encodes a message for a BASP stream without going through a stack.
pub fn encode_stream_message(source: ActorId, destination: ActorId, payload: &[u8]) -> Vec<u8> {
    let header = BaspHeader {
        source,
        destination,
        payload_size: payload.len() as u32,
    };
    let mut out = header.to_bytes().to_vec();
    out.extend_from_slice(payload);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(src: u64, dst: u64, payload: &[u8]) -> Message {
        Message::new(ActorId(src), ActorId(dst), payload.to_vec())
    }

    fn feed_partitioned(stream: &[u8], cuts: &[usize]) -> Vec<Message> {
        let mut parser = StreamParser::new();
        let mut out = Vec::new();
        let mut prev = 0;
        for &cut in cuts.iter().chain(std::iter::once(&stream.len())) {
            parser.feed(Bytes::copy_from_slice(&stream[prev..cut]), &mut out);
            prev = cut;
        }
        out
    }

    #[test]
    fn one_byte_chunks_match_whole_buffer() {
        let m = msg(1, 2, b"hello stream");
        let stream = encode_stream_message(m.source, m.destination, &m.payload);
        let whole = feed_partitioned(&stream, &[]);
        let cuts: Vec<usize> = (1..stream.len()).collect();
        let bytewise = feed_partitioned(&stream, &cuts);
        assert_eq!(whole, vec![m.clone()]);
        assert_eq!(bytewise, vec![m]);
    }

    #[test]
    fn every_single_split_point() {
        let m = msg(9, 8, b"0123456789");
        let stream = encode_stream_message(m.source, m.destination, &m.payload);
        for cut in 0..=stream.len() {
            assert_eq!(feed_partitioned(&stream, &[cut]), vec![m.clone()], "cut at {cut}");
        }
    }

    #[test]
    fn two_messages_in_one_chunk() {
        let a = msg(1, 2, b"first");
        let b = msg(3, 4, b"");
        let mut stream = encode_stream_message(a.source, a.destination, &a.payload);
        stream.extend(encode_stream_message(b.source, b.destination, &b.payload));
        assert_eq!(feed_partitioned(&stream, &[]), vec![a, b]);
    }

    #[test]
    fn empty_chunk_changes_nothing() {
        let mut parser = StreamParser::new();
        let mut out = Vec::new();
        parser.feed(Bytes::new(), &mut out);
        assert!(out.is_empty());
        assert_eq!(parser.reads(), 0);
        assert_eq!(parser.buffered(), 0);
    }

    #[test]
    fn two_reads_per_message_and_no_copies_when_whole() {
        let stream = encode_stream_message(ActorId(1), ActorId(2), &[7u8; 300]);
        let mut parser = StreamParser::new();
        let mut out = Vec::new();
        parser.feed(Bytes::from(stream), &mut out);
        assert_eq!(out.len(), 1);
        assert_eq!(parser.reads(), 2);
        assert_eq!(parser.copies(), 0);
    }

    #[test]
    fn datagram_size_mismatch_is_malformed() {
        let mut framing = Framing::BaspDatagram;
        let mut unit = encode_stream_message(ActorId(1), ActorId(2), b"abc");
        unit.push(0);
        let mut copies = 0;
        let err = framing.decode(Bytes::from(unit), &mut copies, &mut Vec::new());
        assert!(matches!(err, Err(LayerError::MalformedHeader { .. })));
    }
}
