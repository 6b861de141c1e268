use super::{Layer, LayerCx, LayerError};
use crate::wire::{SliceHeader, WireBuffer};
use bytes::{Bytes, BytesMut};
use std::any::Any;
use std::collections::{HashMap, VecDeque};

const MAX_SLICES: usize = u8::MAX as usize;
const MAX_PARTIAL: usize = 64;

#[derive(Debug)]
struct Partial {
    slices: Vec<Option<Bytes>>,
    received: usize,
}

/// Splits units into slices that fit the configured MTU and reassembles them
/// on receipt.
///
/// `mtu` bounds the size of each unit this layer emits, slice header
/// included. Incomplete messages are evicted oldest first once more than 64
/// are in flight.
#[derive(Debug)]
pub struct SlicingLayer {
    mtu: usize,
    next_message_id: u16,
    partial: HashMap<u16, Partial>,
    arrival: VecDeque<u16>,
    discarded: u64,
}

impl SlicingLayer {
    pub const DEFAULT_MTU: usize = 1400;

    pub fn new(mtu: usize) -> SlicingLayer {
        assert!(mtu > SliceHeader::LEN, "mtu must leave room for slice data");
        SlicingLayer {
            mtu,
            next_message_id: 0,
            partial: HashMap::new(),
            arrival: VecDeque::new(),
            discarded: 0,
        }
    }

    pub fn mtu(&self) -> usize {
        self.mtu
    }

    pub fn max_unit(&self) -> usize {
        MAX_SLICES * (self.mtu - SliceHeader::LEN)
    }

    pub fn partial_len(&self) -> usize {
        self.partial.len()
    }

    /// Partial messages thrown away because of conflicting headers or
    /// eviction.
    pub fn discarded(&self) -> u64 {
        self.discarded
    }

    fn drop_partial(&mut self, id: u16) {
        if self.partial.remove(&id).is_some() {
            self.arrival.retain(|&a| a != id);
        }
    }
}

impl Default for SlicingLayer {
    fn default() -> Self {
        SlicingLayer::new(Self::DEFAULT_MTU)
    }
}

impl Layer for SlicingLayer {
    fn name(&self) -> &'static str {
        "slicing"
    }

    fn header_len(&self) -> usize {
        SliceHeader::LEN
    }

    fn on_send(&mut self, mut unit: WireBuffer, cx: &mut LayerCx<'_>) -> Result<(), LayerError> {
        let chunk = self.mtu - SliceHeader::LEN;
        let count = unit.len().div_ceil(chunk).max(1);
        if count > MAX_SLICES {
            return Err(LayerError::PayloadTooLarge {
                size: unit.len(),
                limit: self.max_unit(),
            });
        }
        let message_id = self.next_message_id;
        self.next_message_id = message_id.wrapping_add(1);
        if count == 1 {
            let header = SliceHeader {
                message_id,
                slice_index: 0,
                slice_count: 1,
            };
            unit.prepend(&header.to_bytes());
            cx.down.push(unit);
            return Ok(());
        }
        for (index, body) in unit.as_slice().chunks(chunk).enumerate() {
            let header = SliceHeader {
                message_id,
                slice_index: index as u8,
                slice_count: count as u8,
            };
            let mut slice = WireBuffer::with_headroom(cx.headroom + SliceHeader::LEN, body.len());
            slice.put_header(body);
            slice.prepend(&header.to_bytes());
            cx.down.push(slice);
        }
        Ok(())
    }

    fn on_receive(
        &mut self,
        unit: Bytes,
        cx: &mut LayerCx<'_>,
        up: &mut Vec<Bytes>,
    ) -> Result<(), LayerError> {
        let header = SliceHeader::decode(&unit).map_err(|e| LayerError::malformed("slicing", e))?;
        let body = unit.slice(SliceHeader::LEN..);
        let count = header.slice_count as usize;
        if count == 1 {
            up.push(body);
            return Ok(());
        }
        let id = header.message_id;
        if self.partial.get(&id).is_some_and(|p| p.slices.len() != count) {
            self.drop_partial(id);
            self.discarded += 1;
        }
        if !self.partial.contains_key(&id) {
            if self.partial.len() >= MAX_PARTIAL {
                if let Some(oldest) = self.arrival.pop_front() {
                    self.partial.remove(&oldest);
                    self.discarded += 1;
                }
            }
            self.partial.insert(
                id,
                Partial {
                    slices: vec![None; count],
                    received: 0,
                },
            );
            self.arrival.push_back(id);
        }
        let partial = self.partial.get_mut(&id).expect("inserted above");
        let slot = &mut partial.slices[header.slice_index as usize];
        if slot.is_none() {
            partial.received += 1;
        }
        *slot = Some(body);
        if partial.received == count {
            let partial = self.partial.remove(&id).expect("present");
            self.arrival.retain(|&a| a != id);
            let total = partial.slices.iter().flatten().map(Bytes::len).sum();
            let mut whole = BytesMut::with_capacity(total);
            for slice in partial.slices.iter().flatten() {
                whole.extend_from_slice(slice);
            }
            *cx.copies += total as u64;
            up.push(whole.freeze());
        }
        Ok(())
    }

    fn splits_units(&self) -> bool {
        true
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cx<'a>(copies: &'a mut u64, down: &'a mut Vec<WireBuffer>) -> LayerCx<'a> {
        LayerCx {
            now: Default::default(),
            headroom: 0,
            copies,
            down,
        }
    }

    fn slice(layer: &mut SlicingLayer, unit: &[u8]) -> Vec<Bytes> {
        let (mut copies, mut down) = (0, Vec::new());
        layer.on_send(WireBuffer::from(unit), &mut cx(&mut copies, &mut down)).unwrap();
        down.into_iter().map(WireBuffer::into_bytes).collect()
    }

    fn reassemble(layer: &mut SlicingLayer, units: impl IntoIterator<Item = Bytes>) -> Vec<Vec<Bytes>> {
        let (mut copies, mut down) = (0, Vec::new());
        units
            .into_iter()
            .map(|u| {
                let mut up = Vec::new();
                layer.on_receive(u, &mut cx(&mut copies, &mut down), &mut up).unwrap();
                up
            })
            .collect()
    }

    #[test]
    fn small_unit_is_one_slice() {
        let mut layer = SlicingLayer::new(1400);
        let out = slice(&mut layer, &[5u8; 100]);
        assert_eq!(out.len(), 1);
        assert_eq!(&out[0][..4], &[0, 0, 0, 1]);
        assert_eq!(out[0].len(), 104);
        let mut rx = SlicingLayer::new(1400);
        assert_eq!(reassemble(&mut rx, out), vec![vec![Bytes::from(vec![5u8; 100])]]);
    }

    #[test]
    fn exact_split() {
        let mut layer = SlicingLayer::new(1404);
        let out = slice(&mut layer, &[1u8; 2800]);
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|s| s.len() == 1404));
        assert_eq!(&out[1][..4], &[0, 0, 1, 2]);
    }

    #[test]
    fn message_ids_increment() {
        let mut layer = SlicingLayer::new(100);
        let a = slice(&mut layer, b"a");
        let b = slice(&mut layer, b"b");
        assert_eq!(&a[0][..2], &[0, 0]);
        assert_eq!(&b[0][..2], &[0, 1]);
    }

    #[test]
    fn empty_unit_is_one_empty_slice() {
        let mut layer = SlicingLayer::new(100);
        let out = slice(&mut layer, b"");
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].len(), 4);
    }

    #[test]
    fn too_many_slices() {
        let mut layer = SlicingLayer::new(14);
        assert_eq!(layer.max_unit(), 2550);
        let (mut copies, mut down) = (0, Vec::new());
        let err = layer.on_send(WireBuffer::from(&[0u8; 2551][..]), &mut cx(&mut copies, &mut down));
        assert!(matches!(err, Err(LayerError::PayloadTooLarge { .. })));
        assert!(layer
            .on_send(WireBuffer::from(&[0u8; 2550][..]), &mut cx(&mut copies, &mut down))
            .is_ok());
        assert_eq!(down.len(), 255);
    }

    #[test]
    fn arrival_order_2_0_1() {
        let data: Vec<u8> = (0..250u8).collect();
        let mut tx = SlicingLayer::new(104);
        let out = slice(&mut tx, &data);
        assert_eq!(out.len(), 3);
        let mut rx = SlicingLayer::new(104);
        let emitted = reassemble(&mut rx, [out[2].clone(), out[0].clone(), out[1].clone()]);
        assert!(emitted[0].is_empty() && emitted[1].is_empty());
        assert_eq!(emitted[2], vec![Bytes::from(data)]);
        assert_eq!(rx.partial_len(), 0);
    }

    #[test]
    fn duplicate_slice_is_idempotent() {
        let data = vec![3u8; 300];
        let mut tx = SlicingLayer::new(104);
        let out = slice(&mut tx, &data);
        let mut rx = SlicingLayer::new(104);
        let emitted = reassemble(
            &mut rx,
            [out[0].clone(), out[0].clone(), out[1].clone(), out[2].clone()],
        );
        let total: usize = emitted.iter().map(Vec::len).sum();
        assert_eq!(total, 1);
        assert_eq!(emitted[3], vec![Bytes::from(data)]);
    }

    #[test]
    fn conflicting_count_resets_partial() {
        let mut rx = SlicingLayer::new(100);
        let first = Bytes::from_static(&[0, 9, 0, 3, b'a']);
        let conflicting = Bytes::from_static(&[0, 9, 0, 2, b'x']);
        let rest = Bytes::from_static(&[0, 9, 1, 2, b'y']);
        let emitted = reassemble(&mut rx, [first, conflicting, rest]);
        assert_eq!(rx.discarded(), 1);
        assert_eq!(emitted[2], vec![Bytes::from_static(b"xy")]);
    }

    #[test]
    fn malformed_slice_header() {
        let mut rx = SlicingLayer::new(100);
        let (mut copies, mut down) = (0, Vec::new());
        let err = rx.on_receive(Bytes::from_static(&[0, 0, 0]), &mut cx(&mut copies, &mut down), &mut Vec::new());
        assert!(matches!(err, Err(LayerError::MalformedHeader { layer: "slicing", .. })));
    }
}
