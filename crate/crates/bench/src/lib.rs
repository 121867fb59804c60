//! Fixtures shared by the benchmarks.

use splitsan_core::{
    generate_trace, plan_partition, synthesize_variant, SplitMix64, VariantTrace, WeightedUnit, WorkloadSpec,
};

/// `count` units with costs uniform in `1..=max_cost`.
pub fn random_units(count: usize, max_cost: u64, seed: u64) -> Vec<WeightedUnit> {
    let mut rng = SplitMix64::new(seed);
    (0..count).map(|i| WeightedUnit::new(format!("p{i}"), rng.range_inclusive(1, max_cost))).collect()
}

/// Variants of a generated workload under its greedy plan.
pub fn workload_variants(spec: &WorkloadSpec, n: usize) -> Vec<VariantTrace> {
    let trace = generate_trace(spec).expect("valid workload");
    let plan = plan_partition(&trace.check_profile().weighted_units(), n, None).expect("no conflicts");
    (0..n).map(|v| synthesize_variant(&trace, &plan, v).expect("plan covers trace")).collect()
}
