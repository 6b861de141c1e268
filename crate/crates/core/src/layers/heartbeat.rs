use super::{Layer, LayerCx, LayerError};
use crate::time::Time;
use crate::wire::{DecodeError, WireBuffer};
use bytes::Bytes;
use std::any::Any;
use std::time::Duration;

const TAG_DATA: u8 = 0x00;
const TAG_BEAT: u8 = 0x01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Liveness {
    Alive,
    Suspected,
}

/// Failure detector for connectionless transports.
///
/// Tags every unit with one byte (data or heartbeat), sends a heartbeat every
/// `interval`, and suspects the peer once nothing was heard from it for
/// `missed` intervals.
#[derive(Debug)]
pub struct HeartbeatLayer {
    interval: Duration,
    missed: u32,
    last_heard: Option<Time>,
    next_beat: Option<Time>,
    beats_sent: u64,
}

impl HeartbeatLayer {
    pub const DEFAULT_INTERVAL: Duration = Duration::from_secs(1);
    pub const DEFAULT_MISSED: u32 = 3;

    pub fn new(interval: Duration, missed: u32) -> HeartbeatLayer {
        HeartbeatLayer {
            interval,
            missed,
            last_heard: None,
            next_beat: None,
            beats_sent: 0,
        }
    }

    /// Starts the detector's clock. Called implicitly by the first timeout
    /// poll.
    pub fn start(&mut self, now: Time) {
        self.last_heard.get_or_insert(now);
        self.next_beat.get_or_insert(now + self.interval);
    }

    pub fn liveness(&self, now: Time) -> Liveness {
        match self.last_heard {
            Some(heard) if now.saturating_sub(heard) >= self.interval * self.missed => {
                Liveness::Suspected
            }
            _ => Liveness::Alive,
        }
    }

    pub fn beats_sent(&self) -> u64 {
        self.beats_sent
    }
}

impl Default for HeartbeatLayer {
    fn default() -> Self {
        HeartbeatLayer::new(Self::DEFAULT_INTERVAL, Self::DEFAULT_MISSED)
    }
}

impl Layer for HeartbeatLayer {
    fn name(&self) -> &'static str {
        "heartbeat"
    }

    fn header_len(&self) -> usize {
        1
    }

    fn on_send(&mut self, mut unit: WireBuffer, cx: &mut LayerCx<'_>) -> Result<(), LayerError> {
        unit.prepend(&[TAG_DATA]);
        cx.down.push(unit);
        Ok(())
    }

    fn on_receive(
        &mut self,
        unit: Bytes,
        cx: &mut LayerCx<'_>,
        up: &mut Vec<Bytes>,
    ) -> Result<(), LayerError> {
        let tag = *unit.first().ok_or(LayerError::malformed(
            "heartbeat",
            DecodeError::Incomplete {
                needed: 1,
                available: 0,
            },
        ))?;
        self.start(cx.now);
        self.last_heard = Some(cx.now);
        match tag {
            TAG_DATA => up.push(unit.slice(1..)),
            TAG_BEAT => {}
            other => {
                return Err(LayerError::malformed(
                    "heartbeat",
                    DecodeError::Invalid {
                        field: "heartbeat tag",
                        value: other as u64,
                    },
                ))
            }
        }
        Ok(())
    }

    fn on_timeout(&mut self, cx: &mut LayerCx<'_>, _up: &mut Vec<Bytes>) {
        self.start(cx.now);
        if self.next_beat.is_some_and(|t| t <= cx.now) {
            let beat = cx.unit(0, &[TAG_BEAT]);
            cx.down.push(beat);
            self.beats_sent += 1;
            self.next_beat = Some(cx.now + self.interval);
        }
    }

    fn next_deadline(&self) -> Option<Time> {
        Some(self.next_beat.unwrap_or(Duration::ZERO))
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

    fn ms(v: u64) -> Time {
        Duration::from_millis(v)
    }

    fn poll(layer: &mut HeartbeatLayer, now: Time) -> usize {
        let (mut copies, mut down) = (0, Vec::new());
        let mut cx = LayerCx {
            now,
            headroom: 0,
            copies: &mut copies,
            down: &mut down,
        };
        layer.on_timeout(&mut cx, &mut Vec::new());
        down.len()
    }

    fn hear(layer: &mut HeartbeatLayer, now: Time, unit: &'static [u8]) -> Vec<Bytes> {
        let (mut copies, mut down) = (0, Vec::new());
        let mut cx = LayerCx {
            now,
            headroom: 0,
            copies: &mut copies,
            down: &mut down,
        };
        let mut up = Vec::new();
        layer.on_receive(Bytes::from_static(unit), &mut cx, &mut up).unwrap();
        up
    }

    #[test]
    fn traffic_keeps_peer_alive() {
        let mut hb = HeartbeatLayer::default();
        poll(&mut hb, ms(0));
        for t in (0..10_000).step_by(500) {
            assert_eq!(hear(&mut hb, ms(t), &[0, b'x']), vec![Bytes::from_static(b"x")]);
            assert_eq!(hb.liveness(ms(t)), Liveness::Alive);
        }
    }

    #[test]
    fn silence_leads_to_suspicion() {
        let mut hb = HeartbeatLayer::default();
        poll(&mut hb, ms(0));
        assert_eq!(hb.liveness(ms(2999)), Liveness::Alive);
        assert_eq!(hb.liveness(ms(3000)), Liveness::Suspected);
    }

    #[test]
    fn late_unit_restores_liveness() {
        let mut hb = HeartbeatLayer::default();
        poll(&mut hb, ms(0));
        assert_eq!(hb.liveness(ms(2900)), Liveness::Alive);
        assert!(hear(&mut hb, ms(2900), &[1]).is_empty());
        assert_eq!(hb.liveness(ms(5899)), Liveness::Alive);
        assert_eq!(hb.liveness(ms(5900)), Liveness::Suspected);
    }

    #[test]
    fn beats_once_per_interval() {
        let mut hb = HeartbeatLayer::default();
        assert_eq!(poll(&mut hb, ms(0)), 0);
        assert_eq!(hb.next_deadline(), Some(ms(1000)));
        assert_eq!(poll(&mut hb, ms(999)), 0);
        assert_eq!(poll(&mut hb, ms(1000)), 1);
        assert_eq!(poll(&mut hb, ms(1500)), 0);
        assert_eq!(poll(&mut hb, ms(2000)), 1);
        assert_eq!(hb.beats_sent(), 2);
    }
}
