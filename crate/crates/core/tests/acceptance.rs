//! End-to-end acceptance suite. Prints one line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use splitsan_core::{
    generate_trace, load_catalog, oracle_partition, oracle_partition_with, plan_partition, report_digest,
    run_simulation, synthesize_variant, validate_plan, BaseTrace, CostDistribution, Digest, Event,
    OracleLimits, OverheadProfile, PartitionError, PartitionPlan, ProtectionUnit, ProtocolEvent, Section,
    SimError, Simulation, SimulationConfig, SplitMix64, SyscallClass, UnitKind, VariantTrace, Verdict,
    WeightedUnit, WorkloadSpec,
};

type Outcome = Result<String, String>;

/// Every simulation in the suite goes through here so that determinism and
/// the report identity are checked on all of them.
#[derive(Default)]
struct Audit {
    runs: usize,
    nondeterministic: Vec<String>,
    identity_broken: Vec<String>,
}

impl Audit {
    fn simulate(&mut self, label: &str, variants: &[VariantTrace], config: &SimulationConfig) -> Result<Simulation, SimError> {
        let first = run_simulation(variants, config);
        let second = run_simulation(variants, config);
        self.runs += 1;
        match (&first, &second) {
            (Ok(a), Ok(b)) => {
                if a.report.to_string() != b.report.to_string() || a.log != b.log {
                    self.nondeterministic.push(label.to_string());
                }
                if !a.report.identity_holds() {
                    self.identity_broken.push(label.to_string());
                }
            }
            (Err(a), Err(b)) if a == b => {}
            _ => self.nondeterministic.push(label.to_string()),
        }
        first
    }
}

fn pick<T: Clone>(rng: &mut SplitMix64, items: &[T]) -> T {
    items[rng.below(items.len() as u64) as usize].clone()
}

fn random_units(rng: &mut SplitMix64, count: usize, max_cost: u64) -> Vec<WeightedUnit> {
    (0..count).map(|i| WeightedUnit::new(format!("p{i}"), rng.range_inclusive(1, max_cost))).collect()
}

fn random_plan(rng: &mut SplitMix64, units: &[WeightedUnit], n: usize) -> PartitionPlan {
    let assignment: Vec<(String, usize)> =
        units.iter().map(|u| (u.id.clone(), rng.below(n as u64) as usize)).collect();
    PartitionPlan::from_assignment(units, n, assignment).expect("random assignment is well formed")
}

/// Either the greedy plan or a uniformly random assignment.
fn some_plan(rng: &mut SplitMix64, trace: &BaseTrace, n: usize) -> PartitionPlan {
    let units = trace.check_profile().weighted_units();
    if rng.below(2) == 0 {
        plan_partition(&units, n, None).expect("no conflicts")
    } else {
        random_plan(rng, &units, n)
    }
}

fn variants_of(trace: &BaseTrace, plan: &PartitionPlan) -> Vec<VariantTrace> {
    (0..plan.n()).map(|v| synthesize_variant(trace, plan, v).expect("plan covers the trace")).collect()
}

/// Units the plan distributes are the ones whose report writes can be named.
fn naming(config: &SimulationConfig, plan: &PartitionPlan) -> SimulationConfig {
    SimulationConfig { report_units: plan.assignment().keys().cloned().collect(), ..config.clone() }
}

fn first_vuln(trace: &BaseTrace) -> Option<String> {
    trace.root().events.iter().find_map(|e| match e {
        Event::Vuln { unit } => Some(unit.clone()),
        _ => None,
    })
}

fn vuln_units(rng: &mut SplitMix64, unit_count: usize, k: usize) -> Vec<String> {
    let mut pool: Vec<usize> = (1..=unit_count).collect();
    (0..k.min(unit_count))
        .map(|_| {
            let i = rng.below(pool.len() as u64) as usize;
            format!("u{}", pool.swap_remove(i))
        })
        .collect()
}

/// Greedy makespan against the oracle's, with the classic LPT factor.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(0x0c1);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let count = rng.range_inclusive(2, 12) as usize;
        let n = pick(&mut rng, &[2usize, 3, 4]);
        let units = random_units(&mut rng, count, 100);
        let greedy = plan_partition(&units, n, None).map_err(|e| format!("instance {i}: {e}"))?;
        let oracle = oracle_partition(&units, n, None).map_err(|e| format!("instance {i}: {e}"))?;
        let (g, o) = (greedy.makespan() as u128, oracle.makespan() as u128);
        // g ≤ (4/3 − 1/(3n)) · o  ⇔  3n·g ≤ (4n − 1)·o
        if 3 * n as u128 * g > (4 * n as u128 - 1) * o {
            return Err(format!("instance {i} (n={n}, {count} units): greedy {g} vs oracle {o}"));
        }
        worst = worst.max(g as f64 / o as f64);
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(10) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("200 instances, worst greedy/oracle makespan {worst:.3}, {elapsed:.2?}"))
}

fn criterion_2() -> Outcome {
    let mut rng = SplitMix64::new(0x0c2);
    let mut checked = 0;
    while checked < 1000 {
        let count = rng.range_inclusive(1, 40) as usize;
        let n = rng.range_inclusive(1, 6) as usize;
        let units = random_units(&mut rng, count, 1000);
        let conflicts: splitsan_core::ConflictSet = (0..rng.below(count as u64))
            .filter_map(|_| {
                let a = rng.below(count as u64) as usize;
                let b = rng.below(count as u64) as usize;
                (a != b).then(|| (units[a].id.clone(), units[b].id.clone()))
            })
            .collect();
        let plan = match plan_partition(&units, n, Some(&conflicts)) {
            Ok(plan) => plan,
            Err(PartitionError::Infeasible(_)) => continue,
            Err(e) => return Err(e.to_string()),
        };
        let violations = validate_plan(&plan, &units, Some(&conflicts));
        if !violations.is_empty() {
            let shown: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(format!("plan {checked}: {}", shown.join(" ")));
        }
        checked += 1;
    }
    Ok("1000 greedy plans, 0 violations".into())
}

/// 107 ticks over 50–60 units with a squared-uniform skew.
fn asan_like_profile(rng: &mut SplitMix64) -> OverheadProfile {
    const TOTAL: u64 = 107;
    let count = rng.range_inclusive(50, 60) as usize;
    let raw: Vec<f64> = (0..count).map(|_| rng.unit_f64().powi(2) + 0.01).collect();
    let spare = (TOTAL - count as u64) as f64;
    let sum: f64 = raw.iter().sum();
    let shares: Vec<f64> = raw.iter().map(|r| spare * r / sum).collect();
    let mut costs: Vec<u64> = shares.iter().map(|s| 1 + s.floor() as u64).collect();
    // Largest remainder keeps the total exact.
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| (shares[b] - shares[b].floor()).total_cmp(&(shares[a] - shares[a].floor())));
    let short = TOTAL - costs.iter().sum::<u64>();
    for &i in order.iter().take(short as usize) {
        costs[i] += 1;
    }
    let units = costs
        .into_iter()
        .enumerate()
        .map(|(i, c)| (ProtectionUnit { id: format!("f{i}"), kind: UnitKind::CodeUnit }, c));
    OverheadProfile::new(units, 0).expect("unique ids")
}

fn criterion_3() -> Outcome {
    let mut rng = SplitMix64::new(0x0c3);
    let (mut max2, mut max3) = (0, 0);
    for i in 0..20 {
        let profile = asan_like_profile(&mut rng);
        if profile.o_total() != 107 || profile.units().len() < 50 {
            return Err(format!("profile {i} malformed"));
        }
        let units = profile.weighted_units();
        let m2 = plan_partition(&units, 2, None).map_err(|e| e.to_string())?.makespan();
        let m3 = plan_partition(&units, 3, None).map_err(|e| e.to_string())?.makespan();
        // [53.5, 61.5] and [35.7, 41.1] in tenths of a tick.
        if !(535..=615).contains(&(m2 * 10)) || !(357..=411).contains(&(m3 * 10)) {
            return Err(format!("profile {i}: N=2 max load {m2}, N=3 max load {m3}"));
        }
        max2 = max2.max(m2);
        max3 = max3.max(m3);
    }
    Ok(format!("20 profiles, worst max load N=2 {max2}/107, N=3 {max3}/107"))
}

fn criterion_4() -> Outcome {
    let mut worst = f64::INFINITY;
    for seed in 0..20 {
        let spec = WorkloadSpec {
            unit_count: 12,
            event_count: 200,
            cost_distribution: CostDistribution::HeavyTail,
            seed,
            ..WorkloadSpec::default()
        };
        let trace = generate_trace(&spec).map_err(|e| e.to_string())?;
        let profile = trace.check_profile();
        let units = profile.weighted_units();
        for n in 1..=8 {
            let makespan = plan_partition(&units, n, None).map_err(|e| e.to_string())?.makespan();
            // makespan ≥ 0.95 · o_total
            if makespan * 100 < profile.o_total() * 95 {
                return Err(format!("seed {seed}, N={n}: max load {makespan} of {}", profile.o_total()));
            }
            worst = worst.min(makespan as f64 / profile.o_total() as f64);
        }
    }
    Ok(format!("20 heavy-tail profiles x N=1..8, min max-load share {worst:.3}"))
}

fn ubsan_like_catalog(rng: &mut SplitMix64) -> String {
    let mut text = String::from("catalog-version 1\n");
    for i in 0..19 {
        text.push_str(&format!("san s{i:02} cost {}\n", rng.range_inclusive(1, 40)));
    }
    // Sparse conflicts with degree ≤ 2, so a greedy 3-way placement always
    // has a free variant.
    let mut degree = [0u8; 19];
    for _ in 0..rng.range_inclusive(0, 6) {
        let a = rng.below(19) as usize;
        let b = rng.below(19) as usize;
        if a != b && degree[a] < 2 && degree[b] < 2 {
            degree[a] += 1;
            degree[b] += 1;
            text.push_str(&format!("conflict s{a:02} s{b:02}\n"));
        }
    }
    text.push_str("synergy 0\n");
    text
}

fn criterion_5() -> Outcome {
    let mut rng = SplitMix64::new(0x0c5);
    let limits = OracleLimits { max_units: 19, time_budget: Some(Duration::from_secs(60)) };
    let mut fallbacks = 0;
    let mut worst = 0.0f64;
    for i in 0..10 {
        let catalog = load_catalog(&ubsan_like_catalog(&mut rng)).map_err(|e| e.to_string())?;
        let mut units = catalog.weighted_units();
        let greedy = plan_partition(&units, 3, Some(catalog.conflicts())).map_err(|e| format!("catalog {i}: {e}"))?;
        let violations = validate_plan(&greedy, &units, Some(catalog.conflicts()));
        if !violations.is_empty() {
            return Err(format!("catalog {i}: greedy plan invalid"));
        }
        let (g, o) = match oracle_partition_with(&units, 3, Some(catalog.conflicts()), limits) {
            Ok(oracle) => (greedy.makespan(), oracle.makespan()),
            Err(PartitionError::Timeout) => {
                fallbacks += 1;
                units.sort_by(|a, b| b.cost.cmp(&a.cost).then_with(|| a.id.cmp(&b.id)));
                units.truncate(12);
                let kept: splitsan_core::ConflictSet = catalog
                    .conflicts()
                    .iter()
                    .filter(|(a, b)| units.iter().any(|u| u.id == *a) && units.iter().any(|u| u.id == *b))
                    .map(|(a, b)| (a.to_string(), b.to_string()))
                    .collect();
                let g = plan_partition(&units, 3, Some(&kept)).map_err(|e| e.to_string())?.makespan();
                let o = oracle_partition(&units, 3, Some(&kept)).map_err(|e| e.to_string())?.makespan();
                (g, o)
            }
            Err(e) => return Err(format!("catalog {i}: oracle failed: {e}")),
        };
        if 3 * g > 4 * o {
            return Err(format!("catalog {i}: greedy {g} vs oracle {o}"));
        }
        worst = worst.max(g as f64 / o as f64);
    }
    Ok(format!("10 catalogs of 19 sanitizers, worst greedy/oracle makespan {worst:.3}, {fallbacks} fallbacks"))
}

fn criterion_6(audit: &mut Audit) -> Outcome {
    let mut rng = SplitMix64::new(0x0c6);
    let config = SimulationConfig::strict();
    for i in 0..500 {
        let unit_count = rng.range_inclusive(3, 12) as usize;
        let children = rng.below(3) as usize;
        let k = rng.range_inclusive(1, 3) as usize;
        let spec = WorkloadSpec {
            unit_count,
            event_count: rng.range_inclusive(20, 120) as usize,
            syscall_ratio: 0.25,
            lock_ratio: if children == 0 { 0.1 } else { 0.0 },
            vuln_units: vuln_units(&mut rng, unit_count, k),
            children,
            seed: rng.next_u64(),
            ..WorkloadSpec::default()
        };
        let trace = generate_trace(&spec).map_err(|e| e.to_string())?;
        let n = rng.range_inclusive(2, 4) as usize;
        let plan = some_plan(&mut rng, &trace, n);
        let expected = first_vuln(&trace).expect("scenario has a vuln");

        let sim = audit
            .simulate(&format!("c6 scenario {i}"), &variants_of(&trace, &plan), &naming(&config, &plan))
            .map_err(|e| format!("scenario {i}: {e}"))?;
        match &sim.report.verdict {
            Verdict::Alert { unit: Some(unit), .. } if *unit == expected => {}
            other => {
                return Err(format!(
                    "scenario {i}: expected alert by {expected} (variant {:?}), got {other:?}",
                    plan.variant_of(&expected)
                ))
            }
        }

        let clean = trace.without_vulns();
        let sim = audit
            .simulate(&format!("c6 clean {i}"), &variants_of(&clean, &plan), &config)
            .map_err(|e| format!("clean scenario {i}: {e}"))?;
        if !sim.report.verdict.is_clean() {
            return Err(format!("scenario {i}: false alert {:?}", sim.report.verdict));
        }
    }
    Ok("500 scenarios: 500 alerts naming the first vuln's owner unit, 0 false alerts".into())
}

fn criterion_7(audit: &mut Audit) -> Outcome {
    let mut rng = SplitMix64::new(0x0c7);
    let config = SimulationConfig::selective(64);
    let (mut alerts, mut worst_gap) = (0, 0);
    for i in 0..200 {
        let unit_count = rng.range_inclusive(3, 12) as usize;
        let with_vulns = i % 2 == 0;
        let spec = WorkloadSpec {
            unit_count,
            event_count: rng.range_inclusive(100, 400) as usize,
            syscall_ratio: 0.3,
            // A heavy-tail plan leaves one variant far slower than the rest.
            cost_distribution: if i % 4 >= 2 { CostDistribution::HeavyTail } else { CostDistribution::Uniform },
            vuln_units: if with_vulns {
                let k = rng.range_inclusive(1, 2) as usize;
                vuln_units(&mut rng, unit_count, k)
            } else {
                vec![]
            },
            children: rng.below(2) as usize,
            seed: rng.next_u64(),
            ..WorkloadSpec::default()
        };
        let trace = generate_trace(&spec).map_err(|e| e.to_string())?;
        let n = rng.range_inclusive(2, 4) as usize;
        let plan = some_plan(&mut rng, &trace, n);
        let sim = audit
            .simulate(&format!("c7 run {i}"), &variants_of(&trace, &plan), &naming(&config, &plan))
            .map_err(|e| format!("run {i}: {e}"))?;

        let max_gap = sim.report.max_gap();
        if max_gap > 64 {
            return Err(format!("run {i}: gap {max_gap}"));
        }
        worst_gap = worst_gap.max(max_gap);
        for event in &sim.log {
            if let ProtocolEvent::Consume { class: SyscallClass::IoWrite, gap, ordinal, .. } = event {
                if *gap != 0 {
                    return Err(format!("run {i}: I/O write #{ordinal} consumed at gap {gap}"));
                }
            }
        }

        match (&sim.report.verdict, with_vulns) {
            (Verdict::Clean, false) => {}
            (Verdict::Alert { unit: Some(unit), ordinal, .. }, true) => {
                let expected = first_vuln(&trace).unwrap();
                if *unit != expected {
                    return Err(format!("run {i}: alert names {unit}, expected {expected}"));
                }
                let reports: Vec<Digest> = spec.vuln_units.iter().map(|u| report_digest(u)).collect();
                let late_write = sim.log.iter().any(|e| {
                    matches!(e, ProtocolEvent::Execute { egid: 1, class: SyscallClass::IoWrite, ordinal: o, .. } if o >= ordinal)
                        || matches!(e, ProtocolEvent::Execute { args, .. } if reports.contains(args))
                });
                if late_write {
                    return Err(format!("run {i}: leader executed an I/O write at or past the divergence"));
                }
                alerts += 1;
            }
            (verdict, _) => return Err(format!("run {i}: unexpected verdict {verdict:?}")),
        }
    }
    Ok(format!("200 runs, max gap {worst_gap} <= 64, I/O-write gap 0, {alerts}/100 reports caught before execution"))
}

fn criterion_8(audit: &mut Audit) -> Outcome {
    let mut rng = SplitMix64::new(0x0c8);
    let mut groups_seen = 0;
    let mut replayed = 0;
    for i in 0..100 {
        let spec = WorkloadSpec {
            unit_count: rng.range_inclusive(2, 8) as usize,
            event_count: rng.range_inclusive(30, 150) as usize,
            syscall_ratio: 0.15,
            lock_ratio: 0.15 + 0.15 * rng.unit_f64(),
            children: rng.range_inclusive(1, 3) as usize,
            seed: rng.next_u64(),
            ..WorkloadSpec::default()
        };
        let trace = generate_trace(&spec).map_err(|e| e.to_string())?;
        let n = rng.range_inclusive(2, 4) as usize;
        let plan = some_plan(&mut rng, &trace, n);
        let config = match i % 3 {
            0 => SimulationConfig::strict(),
            1 => SimulationConfig::selective(4),
            _ => SimulationConfig::selective(64),
        };
        let config = SimulationConfig { scheduler_seed: rng.next_u64(), ..config };
        let sim = audit
            .simulate(&format!("c8 trace {i}"), &variants_of(&trace, &plan), &config)
            .map_err(|e| format!("trace {i}: {e}"))?;
        if !sim.report.verdict.is_clean() {
            return Err(format!("trace {i}: {:?}", sim.report.verdict));
        }
        let leader = sim.order_log.sequence();
        for v in 1..n {
            if sim.replayed(v) != leader {
                return Err(format!("trace {i}: variant {v} replayed {:?}, leader {:?}", sim.replayed(v), leader));
            }
        }
        let mut distinct = leader.clone();
        distinct.sort_unstable();
        distinct.dedup();
        groups_seen += usize::from(distinct.len() > 1);
        replayed += sim.report.locks_replayed;
    }
    if groups_seen == 0 {
        return Err("no trace exercised more than one execution group".into());
    }
    Ok(format!("100 traces ({groups_seen} with multi-group lock orders), {replayed} acquisitions replayed in leader order"))
}

fn with_extra_syscall(trace: &BaseTrace, kind: usize, rng: &mut SplitMix64) -> BaseTrace {
    let mut sections: Vec<Section> = trace.sections().to_vec();
    let root = &mut sections[0].events;
    let number = 200 + rng.below(50);
    let args = Digest(rng.next_u64());
    let cost = rng.range_inclusive(1, 5);
    let syscall = |class| Event::Syscall { number, class, args, result: Digest(0), cost };
    match kind {
        0 => root.insert(0, syscall(pick(rng, &[SyscallClass::IoWrite, SyscallClass::IoOther, SyscallClass::Virtual]))),
        1 => root.push(syscall(pick(rng, &[SyscallClass::IoWrite, SyscallClass::IoOther, SyscallClass::MemMgmt]))),
        _ => {
            let enter = root.iter().position(|e| *e == Event::MainEnter).unwrap();
            let exit = root.iter().position(|e| *e == Event::ExitBegin).unwrap();
            let at = rng.range_inclusive(enter as u64 + 1, exit as u64) as usize;
            root.insert(at, syscall(SyscallClass::MemMgmt));
        }
    }
    BaseTrace::new(sections).expect("still well formed")
}

fn criterion_9(audit: &mut Audit) -> Outcome {
    let mut rng = SplitMix64::new(0x0c9);
    for i in 0..50 {
        let spec = WorkloadSpec {
            unit_count: rng.range_inclusive(2, 8) as usize,
            event_count: rng.range_inclusive(20, 100) as usize,
            syscall_ratio: 0.3,
            children: rng.below(2) as usize,
            seed: rng.next_u64(),
            ..WorkloadSpec::default()
        };
        let trace = generate_trace(&spec).map_err(|e| e.to_string())?;
        let n = rng.range_inclusive(2, 3) as usize;
        let plan = some_plan(&mut rng, &trace, n);
        let mut variants = variants_of(&trace, &plan);
        let target = rng.below(n as u64) as usize;
        let kind = i % 3;
        variants[target].trace = with_extra_syscall(&variants[target].trace, kind, &mut rng);
        for config in [SimulationConfig::strict(), SimulationConfig::selective(8)] {
            let sim = audit
                .simulate(&format!("c9 case {i}"), &variants, &config)
                .map_err(|e| format!("case {i}: {e}"))?;
            if !sim.report.verdict.is_clean() {
                let what = ["pre-main", "post-exit", "memory-management"][kind];
                return Err(format!("case {i} ({what} syscall in variant {target}): {:?}", sim.report.verdict));
            }
        }
    }
    Ok("50 paired traces (pre-main, post-exit, memory-management), all clean in strict and selective mode".into())
}

fn criterion_10(audit: &Audit) -> Outcome {
    if !audit.nondeterministic.is_empty() {
        return Err(format!("non-reproducible: {}", audit.nondeterministic.join(", ")));
    }
    if !audit.identity_broken.is_empty() {
        return Err(format!("identity broken: {}", audit.identity_broken.join(", ")));
    }
    if audit.runs == 0 {
        return Err("no simulations were run".into());
    }
    Ok(format!("{} simulations run twice, identical reports and logs, identity exact in every report", audit.runs))
}

fn main() -> ExitCode {
    let mut audit = Audit::default();
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "greedy vs oracle makespan", criterion_1()),
        (2, "plan validity", criterion_2()),
        (3, "moderate-skew profile shape", criterion_3()),
        (4, "heavy-tail profile", criterion_4()),
        (5, "19-sanitizer catalogs", criterion_5()),
    ];
    results.push((6, "strict-mode detection", criterion_6(&mut audit)));
    results.push((7, "selective-mode guarantees", criterion_7(&mut audit)));
    results.push((8, "lock-order replay", criterion_8(&mut audit)));
    results.push((9, "syscall exemptions", criterion_9(&mut audit)));
    results.push((10, "determinism and identity", criterion_10(&audit)));

    let mut failed = 0;
    for (number, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {number:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {number:>2} FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
