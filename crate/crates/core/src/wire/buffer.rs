use bytes::Bytes;

/// A growable byte buffer with reserved headroom for prepending headers.
///
/// `copy_count` tracks how many payload bytes were copied into the buffer.
/// Header writes are not counted. The counter only goes down through
/// [`WireBuffer::reset_copy_count`].
#[derive(Debug, Clone, Default)]
pub struct WireBuffer {
    data: Vec<u8>,
    start: usize,
    headroom: usize,
    copies: u64,
}

impl WireBuffer {
    pub fn new() -> WireBuffer {
        WireBuffer::default()
    }

    /// Creates an empty buffer able to take `headroom` bytes of prepended
    /// headers and `capacity` appended bytes without reallocating.
    pub fn with_headroom(headroom: usize, capacity: usize) -> WireBuffer {
        let mut data = Vec::with_capacity(headroom + capacity);
        data.resize(headroom, 0);
        WireBuffer {
            data,
            start: headroom,
            headroom,
            copies: 0,
        }
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data[self.start..]
    }

    pub fn len(&self) -> usize {
        self.data.len() - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn copy_count(&self) -> u64 {
        self.copies
    }

    pub fn reset_copy_count(&mut self) {
        self.copies = 0;
    }

    /// Drops the contents but keeps capacity, headroom and the copy counter.
    pub fn clear(&mut self) {
        self.data.truncate(self.headroom);
        self.start = self.headroom;
    }

    /// Appends header bytes.
    pub fn put_header(&mut self, bytes: &[u8]) {
        self.data.extend_from_slice(bytes);
    }

    /// Appends payload bytes, counting them as copied.
    pub fn put_payload(&mut self, bytes: &[u8]) {
        self.data.extend_from_slice(bytes);
        self.copies += bytes.len() as u64;
    }

    /// Writes header bytes in front of the current contents.
    pub fn prepend(&mut self, bytes: &[u8]) {
        if bytes.len() <= self.start {
            self.start -= bytes.len();
            self.data[self.start..self.start + bytes.len()].copy_from_slice(bytes);
        } else {
            let mut data = Vec::with_capacity(bytes.len() + self.len());
            data.extend_from_slice(bytes);
            data.extend_from_slice(self.as_slice());
            self.data = data;
            self.start = 0;
            self.headroom = 0;
        }
    }

    pub fn into_bytes(self) -> Bytes {
        let start = self.start;
        Bytes::from(self.data).slice(start..)
    }
}

impl From<&[u8]> for WireBuffer {
    fn from(bytes: &[u8]) -> Self {
        let mut buf = WireBuffer::new();
        buf.put_header(bytes);
        buf
    }
}
