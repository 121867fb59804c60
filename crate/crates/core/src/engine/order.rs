//! Weak determinism: followers replay the leader's lock acquisition order.

use std::collections::BTreeSet;

use crate::trace::LockOp;

/// Execution group id. The initial processes form group 1.
pub type Egid = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LockRequester {
    pub variant: usize,
    pub egid: Egid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admit {
    Proceed,
    Defer,
}

/// Append-only record of which group acquired a locking primitive, in the
/// leader's order, plus one replay cursor per follower variant.
#[derive(Debug, Clone)]
pub struct OrderLog {
    entries: Vec<(Egid, LockOp)>,
    /// Indexed by variant; slot 0 (the leader) is unused.
    cursors: Vec<usize>,
    registered: BTreeSet<Egid>,
}

impl OrderLog {
    pub fn new(variants: usize) -> Self {
        Self { entries: Vec::new(), cursors: vec![0; variants], registered: BTreeSet::new() }
    }

    pub fn register(&mut self, egid: Egid) {
        self.registered.insert(egid);
    }

    pub fn is_registered(&self, egid: Egid) -> bool {
        self.registered.contains(&egid)
    }

    /// Leader-recorded group sequence.
    pub fn sequence(&self) -> Vec<Egid> {
        self.entries.iter().map(|(e, _)| *e).collect()
    }

    pub fn entries(&self) -> &[(Egid, LockOp)] {
        &self.entries
    }

    pub fn cursor(&self, variant: usize) -> usize {
        self.cursors[variant]
    }

    /// Prefix of the sequence that `variant` has replayed so far.
    pub fn replayed(&self, variant: usize) -> Vec<Egid> {
        self.entries[..self.cursors[variant]].iter().map(|(e, _)| *e).collect()
    }

    pub fn next_for(&self, variant: usize) -> Option<Egid> {
        self.entries.get(self.cursors[variant]).map(|(e, _)| *e)
    }
}

/// Leader threads always proceed and append their group; a follower thread
/// proceeds (consuming the entry) only when the next unconsumed entry for
/// its variant is its own group.
pub fn enforce_lock_order(log: &mut OrderLog, requester: LockRequester, op: LockOp) -> Admit {
    debug_assert!(log.is_registered(requester.egid), "lock request from unregistered group");
    if requester.variant == 0 {
        log.entries.push((requester.egid, op));
        return Admit::Proceed;
    }
    if log.next_for(requester.variant) == Some(requester.egid) {
        log.cursors[requester.variant] += 1;
        Admit::Proceed
    } else {
        Admit::Defer
    }
}
