//! De-instrumentation: derive one variant's trace from the base trace.

use super::{report_digest, BaseTrace, Digest, Event, Section, SyscallClass, TraceError, VariantTrace, REPORT_WRITE_NUM};
use crate::partition::PartitionPlan;
use crate::Ticks;

/// Cost charged for a sanitizer report write.
pub const DEFAULT_REPORT_COST: Ticks = 1;

/// [`synthesize_variant_with`] using [`DEFAULT_REPORT_COST`].
pub fn synthesize_variant(base: &BaseTrace, plan: &PartitionPlan, variant: usize) -> Result<VariantTrace, TraceError> {
    synthesize_variant_with(base, plan, variant, DEFAULT_REPORT_COST)
}

/// Keeps the checks `plan` assigns to `variant` and drops the rest.
///
/// A vulnerability trigger owned by this variant becomes a report write
/// and ends the section, since the sanitizer aborts the process. Triggers
/// owned elsewhere are dropped and execution continues. Every other event
/// is copied unchanged.
pub fn synthesize_variant_with(
    base: &BaseTrace,
    plan: &PartitionPlan,
    variant: usize,
    report_cost: Ticks,
) -> Result<VariantTrace, TraceError> {
    if variant >= plan.n() {
        return Err(TraceError::VariantOutOfRange { index: variant, n: plan.n() });
    }
    let owner = |unit: &str| plan.variant_of(unit).ok_or_else(|| TraceError::UncoveredUnit(unit.into()));

    let mut sections = Vec::with_capacity(base.sections().len());
    for section in base.sections() {
        // Coverage is checked over the whole section, including events a
        // truncation would hide.
        for event in &section.events {
            if let Event::Check { unit, .. } | Event::Vuln { unit } = event {
                owner(unit)?;
            }
        }
        let mut events = Vec::with_capacity(section.events.len());
        for event in &section.events {
            match event {
                Event::Check { unit, .. } => {
                    if owner(unit)? == variant {
                        events.push(event.clone());
                    }
                }
                Event::Vuln { unit } => {
                    if owner(unit)? == variant {
                        events.push(Event::Syscall {
                            number: REPORT_WRITE_NUM,
                            class: SyscallClass::IoWrite,
                            args: report_digest(unit),
                            result: Digest(0),
                            cost: report_cost,
                        });
                        break;
                    }
                }
                _ => events.push(event.clone()),
            }
        }
        sections.push(Section { id: section.id.clone(), events });
    }
    Ok(VariantTrace { variant, trace: BaseTrace::new(sections)? })
}
