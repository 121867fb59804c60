//! Planning and simulation for multi-variant sanitizer deployments.
//!
//! The crate has two halves. The planning half ([`profile`], [`partition`])
//! takes per-unit sanitizer overheads and splits them across `N` program
//! variants so that every unit is instrumented in exactly one variant and
//! the slowest variant is as fast as possible. The execution half
//! ([`trace`], [`engine`]) turns a base event trace plus a plan into `N`
//! de-instrumented variant traces and runs them under a leader/follower
//! syscall synchronization protocol in virtual time, reporting divergence
//! and synchronization cost.
//!
//! All quantities are integer ticks; every operation is deterministic.

pub mod engine;
pub mod partition;
pub mod profile;
pub mod rng;
pub mod trace;

mod text;

pub use engine::{
    classify_event, compute_metrics, enforce_lock_order, run_simulation, Action, Admit,
    DivergenceKind, Egid, ExecutionRecord, LockRequester, Metrics, OrderLog, ProtocolEvent,
    ReportParseError, SimError, Simulation, SimulationConfig, SimulationReport, SyncMode, Verdict,
};
pub use partition::{
    evaluate_plan, oracle_partition, oracle_partition_with, plan_partition, validate_plan,
    OracleLimits, PartitionError, PartitionPlan, PlanScore, Violation, WeightedUnit,
};
pub use profile::{
    derive_overhead, load_catalog, load_profile, load_profile_run, ConflictSet, OverheadProfile,
    ProfileError, ProfileRun, ProtectionUnit, SanitizerCatalog, UnitKind,
};
pub use rng::SplitMix64;
pub use trace::{
    digest_args, generate_trace, parse_trace, report_digest, synthesize_variant, BaseTrace, CostDistribution,
    Digest, Event, LockOp, Section, SyscallClass, TraceError, VariantTrace, WorkloadSpec,
    REPORT_WRITE_NUM,
};

/// Abstract time unit used for every cost and clock in the crate.
pub type Ticks = u64;
