use super::{ActorId, DecodeError, WireBuffer};

fn require(input: &[u8], needed: usize) -> Result<(), DecodeError> {
    if input.len() < needed {
        return Err(DecodeError::Incomplete {
            needed,
            available: input.len(),
        });
    }
    Ok(())
}

fn be_u16(b: &[u8]) -> u16 {
    u16::from_be_bytes([b[0], b[1]])
}

fn be_u32(b: &[u8]) -> u32 {
    u32::from_be_bytes(b[..4].try_into().unwrap())
}

fn be_u64(b: &[u8]) -> u64 {
    u64::from_be_bytes(b[..8].try_into().unwrap())
}

/// Framing header: source actor, destination actor, payload size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BaspHeader {
    pub source: ActorId,
    pub destination: ActorId,
    pub payload_size: u32,
}

impl BaspHeader {
    pub const LEN: usize = 20;

    pub fn to_bytes(&self) -> [u8; Self::LEN] {
        let mut out = [0u8; Self::LEN];
        out[0..8].copy_from_slice(&self.source.0.to_be_bytes());
        out[8..16].copy_from_slice(&self.destination.0.to_be_bytes());
        out[16..20].copy_from_slice(&self.payload_size.to_be_bytes());
        out
    }

    pub fn decode(input: &[u8]) -> Result<Self, DecodeError> {
        require(input, Self::LEN)?;
        Ok(BaspHeader {
            source: ActorId(be_u64(&input[0..8])),
            destination: ActorId(be_u64(&input[8..16])),
            payload_size: be_u32(&input[16..20]),
        })
    }
}

/// Appends the 20 header bytes to `out` and returns the number written.
///
/// Header bytes are not payload, so the buffer's copy counter is untouched.
pub fn encode_basp(header: &BaspHeader, out: &mut WireBuffer) -> usize {
    out.put_header(&header.to_bytes());
    BaspHeader::LEN
}

/// Parses a header from the front of `input`, returning it with the number
/// of bytes consumed.
pub fn decode_basp(input: &[u8]) -> Result<(BaspHeader, usize), DecodeError> {
    BaspHeader::decode(input).map(|h| (h, BaspHeader::LEN))
}

/// Sequence number prepended by the ordering layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OrderingHeader {
    pub sequence: u16,
}

impl OrderingHeader {
    pub const LEN: usize = 2;

    pub fn to_bytes(&self) -> [u8; Self::LEN] {
        self.sequence.to_be_bytes()
    }

    pub fn decode(input: &[u8]) -> Result<Self, DecodeError> {
        require(input, Self::LEN)?;
        Ok(OrderingHeader {
            sequence: be_u16(input),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReliabilityKind {
    Data,
    Ack,
}

/// Header of the reliability layer: one kind byte and a sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReliabilityHeader {
    pub kind: ReliabilityKind,
    pub sequence: u16,
}

impl ReliabilityHeader {
    pub const LEN: usize = 3;

    pub fn data(sequence: u16) -> Self {
        ReliabilityHeader {
            kind: ReliabilityKind::Data,
            sequence,
        }
    }

    pub fn ack(sequence: u16) -> Self {
        ReliabilityHeader {
            kind: ReliabilityKind::Ack,
            sequence,
        }
    }

    pub fn to_bytes(&self) -> [u8; Self::LEN] {
        let kind = match self.kind {
            ReliabilityKind::Data => 0x00,
            ReliabilityKind::Ack => 0x01,
        };
        let [hi, lo] = self.sequence.to_be_bytes();
        [kind, hi, lo]
    }

    pub fn decode(input: &[u8]) -> Result<Self, DecodeError> {
        require(input, Self::LEN)?;
        let kind = match input[0] {
            0x00 => ReliabilityKind::Data,
            0x01 => ReliabilityKind::Ack,
            other => {
                return Err(DecodeError::Invalid {
                    field: "reliability kind",
                    value: other as u64,
                })
            }
        };
        Ok(ReliabilityHeader {
            kind,
            sequence: be_u16(&input[1..3]),
        })
    }
}

/// Header of one slice of a larger unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceHeader {
    pub message_id: u16,
    pub slice_index: u8,
    pub slice_count: u8,
}

impl SliceHeader {
    pub const LEN: usize = 4;

    pub fn to_bytes(&self) -> [u8; Self::LEN] {
        let [hi, lo] = self.message_id.to_be_bytes();
        [hi, lo, self.slice_index, self.slice_count]
    }

    pub fn decode(input: &[u8]) -> Result<Self, DecodeError> {
        require(input, Self::LEN)?;
        let header = SliceHeader {
            message_id: be_u16(input),
            slice_index: input[2],
            slice_count: input[3],
        };
        if header.slice_count == 0 {
            return Err(DecodeError::Invalid {
                field: "slice count",
                value: 0,
            });
        }
        if header.slice_index >= header.slice_count {
            return Err(DecodeError::Invalid {
                field: "slice index",
                value: header.slice_index as u64,
            });
        }
        Ok(header)
    }
}
