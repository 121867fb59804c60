//! Virtual-time N-version execution engine.
//!
//! Variant 0 is the leader: it executes synchronized syscalls and publishes
//! their results. Followers compare their own syscall number and argument
//! digest against the leader's record and adopt the leader's result
//! instead of executing. Any mismatch aborts every variant.

mod metrics;
mod order;
mod report;
mod sim;
mod slot;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::trace::{Event, SyscallClass};
use crate::Ticks;

pub use metrics::{compute_metrics, ExecutionRecord, GapStats, Metrics, ProcessRecord};
pub use order::{enforce_lock_order, Admit, Egid, LockRequester, OrderLog};
pub use report::{DivergenceKind, ReportParseError, SimulationReport, Verdict};
pub use sim::{run_simulation, BlockedProcess, ProtocolEvent, Simulation};
pub use slot::{EventRing, SlotState, SyncSlot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyncMode {
    /// Every synchronized syscall waits for all followers before executing.
    Strict,
    /// Selected classes lockstep; the rest stream through the ring.
    Selective,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulationConfig {
    pub mode: SyncMode,
    /// Ring entries per execution group (selective mode).
    pub ring_capacity: usize,
    pub handshake_cost: Ticks,
    /// Classes that always lockstep in selective mode.
    pub selected_classes: BTreeSet<SyscallClass>,
    /// Breaks ties between processes that are ready at the same instant.
    pub scheduler_seed: u64,
    /// Units whose report writes should be named in alerts. Units seen in
    /// CHECK events are recognized without being listed.
    pub report_units: Vec<String>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            mode: SyncMode::Strict,
            ring_capacity: 64,
            handshake_cost: 1,
            selected_classes: BTreeSet::from([SyscallClass::IoWrite]),
            scheduler_seed: 0,
            report_units: Vec::new(),
        }
    }
}

impl SimulationConfig {
    pub fn strict() -> Self {
        Self::default()
    }

    pub fn selective(ring_capacity: usize) -> Self {
        Self { mode: SyncMode::Selective, ring_capacity, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.mode == SyncMode::Selective && self.ring_capacity == 0 {
            return Err(SimError::Config("ring capacity must be at least 1 in selective mode".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("lock-order replay stalled with {} blocked processes", blocked.len())]
    Stall { blocked: Vec<BlockedProcess> },
}

/// What the engine does with an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    LockstepSync,
    BufferedSync,
    /// Executed locally by every variant, never compared.
    Ignore,
    /// Syscall outside the main-enter..exit-begin window; executed locally.
    OutOfWindow,
}

/// Classifies an event for synchronization. Only syscalls are ever
/// synchronized; everything else is [`Action::Ignore`].
pub fn classify_event(event: &Event, in_window: bool, config: &SimulationConfig) -> Action {
    let Event::Syscall { class, .. } = event else {
        return Action::Ignore;
    };
    if !in_window {
        return Action::OutOfWindow;
    }
    match (class, config.mode) {
        (SyscallClass::MemMgmt, _) => Action::Ignore,
        (_, SyncMode::Strict) => Action::LockstepSync,
        (class, SyncMode::Selective) if config.selected_classes.contains(class) => Action::LockstepSync,
        (_, SyncMode::Selective) => Action::BufferedSync,
    }
}
