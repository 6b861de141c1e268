use crate::time::Time;
use std::collections::BTreeMap;
use std::time::Duration;

/// Virtual time plus a queue of pending events.
///
/// Time never decreases. Events scheduled for the same instant fire in
/// insertion order.
#[derive(Debug)]
pub struct VirtualClock<E> {
    now: Time,
    pending: BTreeMap<(Time, u64), E>,
    inserted: u64,
}

impl<E> Default for VirtualClock<E> {
    fn default() -> Self {
        VirtualClock {
            now: Duration::ZERO,
            pending: BTreeMap::new(),
            inserted: 0,
        }
    }
}

impl<E> VirtualClock<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> Time {
        self.now
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Schedules `event` at `at`, or now if `at` is in the past.
    pub fn schedule_at(&mut self, at: Time, event: E) {
        let at = at.max(self.now);
        self.pending.insert((at, self.inserted), event);
        self.inserted += 1;
    }

    pub fn schedule_in(&mut self, after: Duration, event: E) {
        self.schedule_at(self.now + after, event);
    }

    pub fn next_event_time(&self) -> Option<Time> {
        self.pending.keys().next().map(|&(t, _)| t)
    }

    /// Moves time forward by `by` and returns every event due by then.
    pub fn advance(&mut self, by: Duration) -> Vec<(Time, E)> {
        self.advance_to(self.now + by)
    }

    pub fn advance_to(&mut self, to: Time) -> Vec<(Time, E)> {
        self.now = self.now.max(to);
        let mut fired = Vec::new();
        while let Some(entry) = self.pending.first_entry() {
            if entry.key().0 > self.now {
                break;
            }
            let ((at, _), event) = entry.remove_entry();
            fired.push((at, event));
        }
        fired
    }

    /// Pops the earliest event if it is due at or before `limit`, moving the
    /// clock to its timestamp.
    pub fn pop_until(&mut self, limit: Time) -> Option<(Time, E)> {
        let entry = self.pending.first_entry()?;
        if entry.key().0 > limit {
            return None;
        }
        let ((at, _), event) = entry.remove_entry();
        self.now = self.now.max(at);
        Some((at, event))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(v: u64) -> Duration {
        Duration::from_millis(v)
    }

    #[test]
    fn advance_zero_fires_only_due() {
        let mut clock = VirtualClock::new();
        clock.schedule_in(ms(0), 'a');
        clock.schedule_in(ms(1), 'b');
        let fired: Vec<char> = clock.advance(ms(0)).into_iter().map(|(_, e)| e).collect();
        assert_eq!(fired, vec!['a']);
    }

    #[test]
    fn fires_on_second_advance() {
        let mut clock = VirtualClock::new();
        clock.schedule_in(ms(40), ());
        assert!(clock.advance(ms(39)).is_empty());
        assert_eq!(clock.advance(ms(1)), vec![(ms(40), ())]);
        assert_eq!(clock.now(), ms(40));
    }

    #[test]
    fn ties_keep_insertion_order() {
        let mut clock = VirtualClock::new();
        for i in 0..5 {
            clock.schedule_at(ms(7), i);
        }
        let fired: Vec<i32> = clock.advance(ms(10)).into_iter().map(|(_, e)| e).collect();
        assert_eq!(fired, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn past_events_are_clamped() {
        let mut clock = VirtualClock::new();
        clock.advance(ms(10));
        clock.schedule_at(ms(5), ());
        assert_eq!(clock.next_event_time(), Some(ms(10)));
    }
}
