//! Seeded synthetic workloads.

use super::{BaseTrace, Digest, Event, LockOp, Section, SyscallClass, TraceError};
use crate::rng::SplitMix64;
use crate::Ticks;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostDistribution {
    Uniform,
    /// One unit (`u1`) carries at least 95% of all check cost.
    HeavyTail,
}

/// Workload parameters. Units are named `u1..=u{unit_count}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub unit_count: usize,
    /// Body events per section (markers and forks not counted).
    pub event_count: usize,
    pub syscall_ratio: f64,
    pub lock_ratio: f64,
    pub cost_distribution: CostDistribution,
    pub vuln_units: Vec<String>,
    /// Child sections forked from the root, each with its own body.
    pub children: usize,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            unit_count: 10,
            event_count: 100,
            syscall_ratio: 0.2,
            lock_ratio: 0.0,
            cost_distribution: CostDistribution::Uniform,
            vuln_units: Vec::new(),
            children: 0,
            seed: 1,
        }
    }
}

impl WorkloadSpec {
    fn validate(&self) -> Result<(), TraceError> {
        let bad = |m: String| Err(TraceError::BadParams(m));
        if self.unit_count == 0 {
            return bad("unit-count must be at least 1".into());
        }
        for (name, r) in [("syscall-ratio", self.syscall_ratio), ("lock-ratio", self.lock_ratio)] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} {r} outside [0, 1]"));
            }
        }
        if self.syscall_ratio + self.lock_ratio > 1.0 {
            return bad("syscall-ratio + lock-ratio exceeds 1".into());
        }
        for (i, unit) in self.vuln_units.iter().enumerate() {
            let known = unit
                .strip_prefix('u')
                .and_then(|n| n.parse::<usize>().ok())
                .is_some_and(|n| (1..=self.unit_count).contains(&n) && *unit == format!("u{n}"));
            if !known {
                return bad(format!("vuln unit `{unit}` is not one of u1..u{}", self.unit_count));
            }
            if self.vuln_units[..i].contains(unit) {
                return bad(format!("vuln unit `{unit}` listed twice"));
            }
        }
        Ok(())
    }
}

const HOT_UNIT: usize = 1;
const LOCK_IDS: usize = 4;

struct Generator<'a> {
    spec: &'a WorkloadSpec,
    rng: SplitMix64,
    first_check: bool,
}

impl Generator<'_> {
    fn syscall(&mut self) -> Event {
        let roll = self.rng.below(100);
        let (class, numbers): (SyscallClass, &[u64]) = match roll {
            0..=24 => (SyscallClass::IoWrite, &[1]),
            25..=69 => (SyscallClass::IoOther, &[0, 2, 3, 4]),
            70..=89 => (SyscallClass::MemMgmt, &[9, 11, 12]),
            _ => (SyscallClass::Virtual, &[96, 201]),
        };
        let number = numbers[self.rng.below(numbers.len() as u64) as usize];
        Event::Syscall {
            number,
            class,
            args: Digest(self.rng.next_u64()),
            result: Digest(self.rng.next_u64()),
            cost: self.rng.range_inclusive(1, 10),
        }
    }

    fn check(&mut self) -> Event {
        let n = self.spec.unit_count as u64;
        let (unit, cost) = match self.spec.cost_distribution {
            CostDistribution::Uniform => (self.rng.range_inclusive(1, n), self.rng.range_inclusive(1, 20)),
            CostDistribution::HeavyTail => {
                let hot = self.first_check || n == 1 || self.rng.below(2) == 0;
                let unit = if hot { HOT_UNIT as u64 } else { self.rng.range_inclusive(2, n) };
                (unit, self.rng.range_inclusive(1, 3))
            }
        };
        self.first_check = false;
        Event::Check { unit: format!("u{unit}"), cost }
    }

    fn body(&mut self) -> Vec<Event> {
        let mut events = Vec::with_capacity(self.spec.event_count);
        for _ in 0..self.spec.event_count {
            let r = self.rng.unit_f64();
            let event = if r < self.spec.syscall_ratio {
                self.syscall()
            } else if r < self.spec.syscall_ratio + self.spec.lock_ratio {
                let op = LockOp::ALL[self.rng.below(LockOp::ALL.len() as u64) as usize];
                Event::Lock { lock: format!("m{}", self.rng.below(LOCK_IDS as u64)), op, cost: 1 }
            } else if self.rng.below(2) == 0 {
                self.check()
            } else {
                Event::Compute { cost: self.rng.range_inclusive(1, 50) }
            };
            events.push(event);
        }
        events
    }

    fn report_separator(&mut self) -> Event {
        Event::Syscall {
            number: 1,
            class: SyscallClass::IoWrite,
            args: Digest(self.rng.next_u64()),
            result: Digest(self.rng.next_u64()),
            cost: 1,
        }
    }
}

/// Generates a deterministic trace from `spec`.
///
/// The root section is `main-enter`, the body, then `exit-begin`; child
/// sections (`child1`, ...) are forked at random points of the root body.
/// Each vulnerability unit gets exactly one trigger in the root body, and
/// consecutive triggers are always separated by at least one I/O write so
/// that each trigger falls between distinct synchronization points.
pub fn generate_trace(spec: &WorkloadSpec) -> Result<BaseTrace, TraceError> {
    spec.validate()?;
    let mut g = Generator { spec, rng: SplitMix64::new(spec.seed), first_check: true };

    let mut root = g.body();
    let mut children = Vec::with_capacity(spec.children);
    for i in 1..=spec.children {
        let at = g.rng.below(root.len() as u64 + 1) as usize;
        let id = format!("child{i}");
        root.insert(at, Event::Fork { child: id.clone() });
        children.push(Section { id, events: g.body() });
    }

    if !spec.vuln_units.is_empty() {
        let mut positions: Vec<usize> = spec
            .vuln_units
            .iter()
            .map(|_| g.rng.below(root.len() as u64 + 1) as usize)
            .collect();
        positions.sort_unstable();
        // Insert back to front so earlier positions stay valid.
        let mut placed: Vec<(usize, &String)> = positions.into_iter().zip(&spec.vuln_units).collect();
        placed.reverse();
        for (at, unit) in placed {
            root.insert(at, Event::Vuln { unit: unit.clone() });
        }
        let mut last_vuln: Option<usize> = None;
        let mut i = 0;
        while i < root.len() {
            if let Event::Vuln { .. } = &root[i] {
                if let Some(prev) = last_vuln {
                    let separated = root[prev..i]
                        .iter()
                        .any(|e| matches!(e, Event::Syscall { class: SyscallClass::IoWrite, .. }));
                    if !separated {
                        let sep = g.report_separator();
                        root.insert(i, sep);
                        i += 1;
                    }
                }
                last_vuln = Some(i);
            }
            i += 1;
        }
    }

    let mut sections = vec![Section { id: "main".into(), events: root }];
    sections.extend(children);
    let root = &mut sections[0].events;
    root.insert(0, Event::MainEnter);
    root.push(Event::ExitBegin);

    if spec.cost_distribution == CostDistribution::HeavyTail {
        concentrate_hot_unit(&mut sections);
    }
    BaseTrace::new(sections)
}

/// Raises the hot unit's check costs until it holds ≥ 95% of check cost.
fn concentrate_hot_unit(sections: &mut [Section]) {
    let hot = format!("u{HOT_UNIT}");
    let mut others: Ticks = 0;
    let mut hot_checks: Ticks = 0;
    for event in sections.iter().flat_map(|s| s.events.iter()) {
        if let Event::Check { unit, cost } = event {
            if *unit == hot {
                hot_checks += 1;
            } else {
                others += cost;
            }
        }
    }
    if hot_checks == 0 {
        return;
    }
    // hot ≥ 19 · others  ⇔  hot / (hot + others) ≥ 0.95
    let per_check = (19 * others).div_ceil(hot_checks).max(1);
    for event in sections.iter_mut().flat_map(|s| s.events.iter_mut()) {
        if let Event::Check { unit, cost } = event {
            if *unit == hot {
                *cost = (*cost).max(per_check);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_trace() {
        let spec = WorkloadSpec { seed: 1, event_count: 100, ..Default::default() };
        let a = generate_trace(&spec).unwrap().to_string();
        let b = generate_trace(&spec).unwrap().to_string();
        assert_eq!(a, b);
        let other = generate_trace(&WorkloadSpec { seed: 2, ..spec }).unwrap().to_string();
        assert_ne!(a, other);
    }

    #[test]
    fn heavy_tail_concentrates_check_cost() {
        for seed in 0..20 {
            let spec = WorkloadSpec {
                unit_count: 50,
                event_count: 300,
                cost_distribution: CostDistribution::HeavyTail,
                seed,
                ..Default::default()
            };
            let trace = generate_trace(&spec).unwrap();
            let total: u64 = trace.checks().map(|(_, c)| c).sum();
            let hot: u64 = trace.checks().filter(|(u, _)| *u == "u1").map(|(_, c)| c).sum();
            assert!(hot * 100 >= total * 95, "seed {seed}: {hot}/{total}");
        }
    }

    #[test]
    fn vuln_placed_once_after_main_enter() {
        let spec = WorkloadSpec { vuln_units: vec!["u7".into()], ..Default::default() };
        let trace = generate_trace(&spec).unwrap();
        let events = &trace.root().events;
        let vulns: Vec<usize> =
            events.iter().enumerate().filter(|(_, e)| matches!(e, Event::Vuln { .. })).map(|(i, _)| i).collect();
        assert_eq!(vulns.len(), 1);
        assert_eq!(events[vulns[0]], Event::Vuln { unit: "u7".into() });
        assert!(vulns[0] > 0);
        assert_eq!(events[0], Event::MainEnter);
    }

    #[test]
    fn vulns_are_separated_by_writes() {
        for seed in 0..50 {
            let spec = WorkloadSpec {
                vuln_units: vec!["u1".into(), "u2".into(), "u3".into()],
                event_count: 10,
                syscall_ratio: 0.1,
                seed,
                ..Default::default()
            };
            let trace = generate_trace(&spec).unwrap();
            let mut since_vuln: Option<bool> = None;
            for e in &trace.root().events {
                match e {
                    Event::Vuln { .. } => {
                        assert_ne!(since_vuln, Some(false), "seed {seed}");
                        since_vuln = Some(false);
                    }
                    Event::Syscall { class: SyscallClass::IoWrite, .. } if since_vuln.is_some() => {
                        since_vuln = Some(true);
                    }
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn bad_params() {
        let bad = |spec: WorkloadSpec| assert!(matches!(generate_trace(&spec), Err(TraceError::BadParams(_))));
        bad(WorkloadSpec { unit_count: 0, ..Default::default() });
        bad(WorkloadSpec { syscall_ratio: 0.7, lock_ratio: 0.5, ..Default::default() });
        bad(WorkloadSpec { syscall_ratio: -0.1, ..Default::default() });
        bad(WorkloadSpec { vuln_units: vec!["u99".into()], ..Default::default() });
        bad(WorkloadSpec { vuln_units: vec!["u01".into()], ..Default::default() });
    }

    #[test]
    fn children_are_forked_from_root() {
        let spec = WorkloadSpec { children: 3, lock_ratio: 0.2, ..Default::default() };
        let trace = generate_trace(&spec).unwrap();
        assert_eq!(trace.sections().len(), 4);
        let forks = trace.root().events.iter().filter(|e| matches!(e, Event::Fork { .. })).count();
        assert_eq!(forks, 3);
    }
}
