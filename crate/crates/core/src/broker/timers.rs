use crate::time::Time;
use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimerId(u64);

/// Deadline-ordered one-shot timers. Timers with equal deadlines fire in
/// insertion order.
#[derive(Debug)]
pub struct TimerQueue<K> {
    by_deadline: BTreeMap<(Time, TimerId), K>,
    deadlines: HashMap<TimerId, Time>,
    next_id: u64,
}

impl<K> Default for TimerQueue<K> {
    fn default() -> Self {
        TimerQueue {
            by_deadline: BTreeMap::new(),
            deadlines: HashMap::new(),
            next_id: 0,
        }
    }
}

impl<K> TimerQueue<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, deadline: Time, key: K) -> TimerId {
        let id = TimerId(self.next_id);
        self.next_id += 1;
        self.by_deadline.insert((deadline, id), key);
        self.deadlines.insert(id, deadline);
        id
    }

    pub fn cancel(&mut self, id: TimerId) -> Option<K> {
        let deadline = self.deadlines.remove(&id)?;
        self.by_deadline.remove(&(deadline, id))
    }

    pub fn next_deadline(&self) -> Option<Time> {
        self.by_deadline.keys().next().map(|&(t, _)| t)
    }

    pub fn len(&self) -> usize {
        self.by_deadline.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_deadline.is_empty()
    }

    /// Removes and returns every timer with a deadline at or before `now`.
    pub fn pop_due(&mut self, now: Time) -> Vec<(TimerId, K)> {
        let mut due = Vec::new();
        while let Some(entry) = self.by_deadline.first_entry() {
            if entry.key().0 > now {
                break;
            }
            let ((_, id), key) = entry.remove_entry();
            self.deadlines.remove(&id);
            due.push((id, key));
        }
        due
    }
}
