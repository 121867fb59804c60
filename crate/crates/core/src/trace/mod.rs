//! Annotated event traces.
//!
//! A trace is a set of sections, one per process image: the first section
//! is the program's initial process and `fork` events start the others.
//! Variant traces are produced from a base trace by stripping the checks a
//! variant does not own.

mod gen;
mod grammar;
mod synth;

use std::collections::{HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::profile::{OverheadProfile, ProtectionUnit, UnitKind};
use crate::Ticks;

pub use gen::{generate_trace, CostDistribution, WorkloadSpec};
pub use grammar::parse_trace;
pub use synth::{synthesize_variant, synthesize_variant_with, DEFAULT_REPORT_COST};

/// Syscall number used for sanitizer report writes.
pub const REPORT_WRITE_NUM: u64 = 1;

/// Prefix hashed with the unit id to form a report write's argument digest.
pub const REPORT_PREFIX: &str = "report:";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("fork targets unknown trace `{0}`")]
    DanglingFork(String),
    #[error("fork graph contains a cycle through `{0}`")]
    ForkCycle(String),
    #[error("trace `{trace}`: {message}")]
    WindowViolation { trace: String, message: String },
    #[error("unit `{0}` is not covered by the plan")]
    UncoveredUnit(String),
    #[error("variant index {index} out of range for {n} variants")]
    VariantOutOfRange { index: usize, n: usize },
    #[error("invalid workload parameters: {0}")]
    BadParams(String),
}

/// 64-bit FNV-1a digest used as the comparison token for syscall arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub u64);

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn digest_args(bytes: &[u8]) -> Digest {
    let mut state = FNV_OFFSET;
    for &b in bytes {
        state ^= b as u64;
        state = state.wrapping_mul(FNV_PRIME);
    }
    Digest(state)
}

/// Argument digest of the report write for `unit`.
pub fn report_digest(unit: &str) -> Digest {
    digest_args(format!("{REPORT_PREFIX}{unit}").as_bytes())
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SyscallClass {
    IoWrite,
    IoOther,
    MemMgmt,
    Virtual,
}

impl SyscallClass {
    pub const ALL: [SyscallClass; 4] =
        [SyscallClass::IoWrite, SyscallClass::IoOther, SyscallClass::MemMgmt, SyscallClass::Virtual];

    pub fn token(self) -> &'static str {
        match self {
            SyscallClass::IoWrite => "iow",
            SyscallClass::IoOther => "ioo",
            SyscallClass::MemMgmt => "mem",
            SyscallClass::Virtual => "virt",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.token() == token)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LockOp {
    MutexLock,
    MutexUnlock,
    CondWait,
    CondSignal,
    Barrier,
}

impl LockOp {
    pub const ALL: [LockOp; 5] =
        [LockOp::MutexLock, LockOp::MutexUnlock, LockOp::CondWait, LockOp::CondSignal, LockOp::Barrier];

    pub fn token(self) -> &'static str {
        match self {
            LockOp::MutexLock => "mutex-lock",
            LockOp::MutexUnlock => "mutex-unlock",
            LockOp::CondWait => "cond-wait",
            LockOp::CondSignal => "cond-signal",
            LockOp::Barrier => "barrier",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.token() == token)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Event {
    Compute { cost: Ticks },
    /// Sanity-check work owned by a protection unit.
    Check { unit: String, cost: Ticks },
    Syscall { number: u64, class: SyscallClass, args: Digest, result: Digest, cost: Ticks },
    Lock { lock: String, op: LockOp, cost: Ticks },
    Fork { child: String },
    MainEnter,
    ExitBegin,
    /// Input that violates the policy enforced by `unit`.
    Vuln { unit: String },
}

impl Event {
    pub fn cost(&self) -> Ticks {
        match self {
            Event::Compute { cost }
            | Event::Check { cost, .. }
            | Event::Syscall { cost, .. }
            | Event::Lock { cost, .. } => *cost,
            _ => 0,
        }
    }

    pub fn is_report_write(&self) -> bool {
        matches!(self, Event::Syscall { number: REPORT_WRITE_NUM, class: SyscallClass::IoWrite, .. })
    }
}

/// The events of one process image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub id: String,
    pub events: Vec<Event>,
}

/// A validated multi-section trace. `sections()[0]` is the root process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseTrace {
    sections: Vec<Section>,
}

impl BaseTrace {
    /// Validates fork references, acyclicity, and window markers.
    pub fn new(sections: Vec<Section>) -> Result<Self, TraceError> {
        if sections.is_empty() {
            return Err(TraceError::Syntax { line: 0, message: "trace has no sections".into() });
        }
        let mut ids = HashSet::new();
        for section in &sections {
            if section.id.is_empty() || !ids.insert(section.id.as_str()) {
                return Err(TraceError::Syntax {
                    line: 0,
                    message: format!("duplicate or empty trace id `{}`", section.id),
                });
            }
        }
        for section in &sections {
            for event in &section.events {
                if let Event::Fork { child } = event {
                    if !ids.contains(child.as_str()) {
                        return Err(TraceError::DanglingFork(child.clone()));
                    }
                }
            }
        }
        let trace = Self { sections };
        trace.check_acyclic()?;
        for (idx, section) in trace.sections.iter().enumerate() {
            check_window(section, idx == 0)?;
        }
        Ok(trace)
    }

    fn check_acyclic(&self) -> Result<(), TraceError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Fresh,
            Active,
            Done,
        }
        let index: HashMap<&str, usize> =
            self.sections.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
        let mut marks = vec![Mark::Fresh; self.sections.len()];
        fn visit(
            trace: &BaseTrace,
            index: &HashMap<&str, usize>,
            marks: &mut [Mark],
            at: usize,
        ) -> Result<(), TraceError> {
            marks[at] = Mark::Active;
            for child in trace.sections[at].events.iter().filter_map(|e| match e {
                Event::Fork { child } => Some(child.as_str()),
                _ => None,
            }) {
                let next = index[child];
                match marks[next] {
                    Mark::Active => return Err(TraceError::ForkCycle(child.into())),
                    Mark::Fresh => visit(trace, index, marks, next)?,
                    Mark::Done => {}
                }
            }
            marks[at] = Mark::Done;
            Ok(())
        }
        for start in 0..self.sections.len() {
            if marks[start] == Mark::Fresh {
                visit(self, &index, &mut marks, start)?;
            }
        }
        Ok(())
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn root(&self) -> &Section {
        &self.sections[0]
    }

    pub fn id(&self) -> &str {
        &self.sections[0].id
    }

    pub fn section(&self, id: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.id == id)
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.sections.iter().flat_map(|s| s.events.iter())
    }

    /// CHECK events across all sections as (unit, cost) pairs.
    pub fn checks(&self) -> impl Iterator<Item = (&str, Ticks)> {
        self.events().filter_map(|e| match e {
            Event::Check { unit, cost } => Some((unit.as_str(), *cost)),
            _ => None,
        })
    }

    /// Profile implied by the CHECK costs: one unit per id seen in a CHECK
    /// or VULN event, in first-appearance order, with its summed check cost.
    pub fn check_profile(&self) -> OverheadProfile {
        let mut costs: IndexMap<&str, Ticks> = IndexMap::new();
        for event in self.events() {
            match event {
                Event::Check { unit, cost } => *costs.entry(unit.as_str()).or_default() += cost,
                Event::Vuln { unit } => {
                    costs.entry(unit.as_str()).or_default();
                }
                _ => {}
            }
        }
        let units = costs
            .into_iter()
            .map(|(id, cost)| (ProtectionUnit { id: id.to_string(), kind: UnitKind::CodeUnit }, cost));
        OverheadProfile::new(units, 0).expect("ids are unique and non-empty")
    }

    /// Copy with every VULN event removed.
    pub fn without_vulns(&self) -> BaseTrace {
        let sections = self
            .sections
            .iter()
            .map(|s| Section {
                id: s.id.clone(),
                events: s.events.iter().filter(|e| !matches!(e, Event::Vuln { .. })).cloned().collect(),
            })
            .collect();
        BaseTrace { sections }
    }
}

fn check_window(section: &Section, is_root: bool) -> Result<(), TraceError> {
    let violation = |message: &str| TraceError::WindowViolation { trace: section.id.clone(), message: message.into() };
    let mut entered = false;
    let mut exited = false;
    for event in &section.events {
        match event {
            Event::MainEnter => {
                if !is_root {
                    return Err(violation("main-enter outside the root trace"));
                }
                if entered {
                    return Err(violation("more than one main-enter"));
                }
                if exited {
                    return Err(violation("exit-begin before main-enter"));
                }
                entered = true;
            }
            Event::ExitBegin => {
                if exited {
                    return Err(violation("more than one exit-begin"));
                }
                if is_root && !entered {
                    return Err(violation("exit-begin before main-enter"));
                }
                exited = true;
            }
            Event::Vuln { .. } if is_root && !entered => {
                return Err(violation("vuln before main-enter"));
            }
            _ => {}
        }
    }
    if is_root && !entered {
        return Err(violation("missing main-enter"));
    }
    Ok(())
}

/// A base trace after de-instrumentation for one variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantTrace {
    pub variant: usize,
    pub trace: BaseTrace,
}
