//! Per-group synchronization state: the sync slot and the record ring.

use std::collections::VecDeque;

use crate::trace::{Digest, SyscallClass};
use crate::Ticks;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotState {
    Empty,
    ArgsCheckedIn,
    ResultsTurnedIn,
}

/// One synchronized syscall as seen by the leader and its followers.
///
/// Transitions are strictly `Empty → ArgsCheckedIn → ResultsTurnedIn →
/// Empty`; anything else is a protocol bug and panics.
#[derive(Debug, Clone)]
pub struct SyncSlot {
    state: SlotState,
    pub number: u64,
    pub class: SyscallClass,
    pub args: Digest,
    pub result: Digest,
    /// One flag per follower (variant index − 1).
    agreement: Vec<bool>,
}

impl SyncSlot {
    pub fn new(followers: usize) -> Self {
        Self {
            state: SlotState::Empty,
            number: 0,
            class: SyscallClass::IoOther,
            args: Digest(0),
            result: Digest(0),
            agreement: vec![false; followers],
        }
    }

    pub fn state(&self) -> SlotState {
        self.state
    }

    pub fn check_in(&mut self, number: u64, class: SyscallClass, args: Digest) {
        assert_eq!(self.state, SlotState::Empty, "check-in on a busy slot");
        self.number = number;
        self.class = class;
        self.args = args;
        self.agreement.iter_mut().for_each(|f| *f = false);
        self.state = SlotState::ArgsCheckedIn;
    }

    pub fn agree(&mut self, follower: usize) {
        assert_ne!(self.state, SlotState::Empty, "agreement on an empty slot");
        self.agreement[follower] = true;
    }

    pub fn agreed(&self, follower: usize) -> bool {
        self.agreement[follower]
    }

    pub fn all_agreed(&self) -> bool {
        self.agreement.iter().all(|f| *f)
    }

    pub fn turn_in(&mut self, result: Digest) {
        assert_eq!(self.state, SlotState::ArgsCheckedIn, "turn-in without check-in");
        self.result = result;
        self.state = SlotState::ResultsTurnedIn;
    }

    pub fn release(&mut self) {
        assert_eq!(self.state, SlotState::ResultsTurnedIn, "release before turn-in");
        self.state = SlotState::Empty;
    }
}

/// A slot placed in a group's stream, with its protocol timestamps.
#[derive(Debug, Clone)]
pub(crate) struct Record {
    pub ordinal: u64,
    pub slot: SyncSlot,
    pub lockstep: bool,
    pub cost: Ticks,
    pub checked_in_at: Ticks,
    pub published_at: Option<Ticks>,
    /// Latest time at which a follower finished with this record.
    pub done_at: Ticks,
}

/// Bounded queue of records between a group's leader and followers.
///
/// `produced − min(consumed) ≤ capacity` holds at all times: the leader
/// must wait for [`EventRing::has_space`] before pushing.
#[derive(Debug, Clone)]
pub struct EventRing {
    capacity: usize,
    pub(crate) entries: VecDeque<Record>,
    produced: u64,
    consumed: Vec<u64>,
    freed_at: Ticks,
}

impl EventRing {
    pub fn new(capacity: usize, followers: usize) -> Self {
        assert!(capacity >= 1);
        Self { capacity, entries: VecDeque::new(), produced: 0, consumed: vec![0; followers], freed_at: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn produced(&self) -> u64 {
        self.produced
    }

    pub fn consumed(&self, follower: usize) -> u64 {
        self.consumed[follower]
    }

    pub fn min_consumed(&self) -> u64 {
        self.consumed.iter().copied().min().unwrap_or(self.produced)
    }

    pub fn has_space(&self) -> bool {
        self.produced - self.min_consumed() < self.capacity as u64
    }

    /// Time at which the most recent entry left the ring.
    pub fn freed_at(&self) -> Ticks {
        self.freed_at
    }

    pub(crate) fn push(&mut self, record: Record) {
        assert!(self.has_space(), "push into a full ring");
        debug_assert_eq!(record.ordinal, self.produced + 1);
        self.produced += 1;
        self.entries.push_back(record);
    }

    pub(crate) fn get(&self, ordinal: u64) -> Option<&Record> {
        let front = self.entries.front()?.ordinal;
        self.entries.get(ordinal.checked_sub(front)? as usize)
    }

    pub(crate) fn get_mut(&mut self, ordinal: u64) -> Option<&mut Record> {
        let front = self.entries.front()?.ordinal;
        self.entries.get_mut(ordinal.checked_sub(front)? as usize)
    }

    /// Marks `ordinal` consumed by `follower`; entries every follower has
    /// finished with are released.
    pub(crate) fn consume(&mut self, follower: usize, ordinal: u64, at: Ticks) {
        debug_assert_eq!(self.consumed[follower] + 1, ordinal);
        self.consumed[follower] = ordinal;
        if let Some(record) = self.get_mut(ordinal) {
            record.done_at = record.done_at.max(at);
        }
    }

    /// Releases fully consumed, published entries from the front.
    pub(crate) fn reclaim(&mut self) {
        let min = self.min_consumed();
        while let Some(front) = self.entries.front_mut() {
            if front.ordinal > min || front.published_at.is_none() {
                break;
            }
            front.slot.release();
            self.freed_at = self.freed_at.max(front.done_at);
            self.entries.pop_front();
        }
    }
}
