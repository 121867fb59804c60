//! Exhaustive fairness-optimal partitioning for small instances.
//!
//! Variants are interchangeable, so only assignments in restricted growth
//! form are enumerated (each unit uses an existing variant or the next
//! unused one). The lexicographically smallest optimal assignment is always
//! of that form, so the pruning does not change the result. A bound on the
//! final fairness deviation cuts subtrees that cannot beat the incumbent.

use std::time::{Duration, Instant};

use super::{check_units, conflict_adjacency, PartitionError, PartitionPlan, WeightedUnit};
use crate::profile::ConflictSet;

/// Guards for the exponential search.
#[derive(Debug, Clone, Copy)]
pub struct OracleLimits {
    pub max_units: usize,
    pub time_budget: Option<Duration>,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self { max_units: 15, time_budget: None }
    }
}

/// Plan minimizing Σ |load_i − total/n| over all conflict-feasible
/// assignments; ties go to the lexicographically smallest assignment
/// vector (in input order). Limited to 15 units.
pub fn oracle_partition(
    units: &[WeightedUnit],
    n: usize,
    conflicts: Option<&ConflictSet>,
) -> Result<PartitionPlan, PartitionError> {
    oracle_partition_with(units, n, conflicts, OracleLimits::default())
}

/// [`oracle_partition`] with caller-chosen limits.
pub fn oracle_partition_with(
    units: &[WeightedUnit],
    n: usize,
    conflicts: Option<&ConflictSet>,
    limits: OracleLimits,
) -> Result<PartitionPlan, PartitionError> {
    if n == 0 {
        return Err(PartitionError::NoVariants);
    }
    if units.len() > limits.max_units {
        return Err(PartitionError::TooLarge { count: units.len(), limit: limits.max_units });
    }
    check_units(units)?;
    let adjacency = conflict_adjacency(units, conflicts)?;

    let total: i128 = units.iter().map(|u| u.cost as i128).sum();
    let n_i = n as i128;
    // suffix[i] = n · Σ cost[i..]
    let mut suffix = vec![0i128; units.len() + 1];
    for i in (0..units.len()).rev() {
        suffix[i] = suffix[i + 1] + n_i * units[i].cost as i128;
    }

    let mut search = Search {
        units,
        adjacency: &adjacency,
        n,
        suffix,
        scaled: vec![-total; n],
        current: vec![0; units.len()],
        best: None,
        deadline: limits.time_budget.map(|d| Instant::now() + d),
        nodes: 0,
        timed_out: false,
    };
    search.descend(0, 0);
    if search.timed_out {
        return Err(PartitionError::Timeout);
    }
    let (_, best) = search.best.ok_or_else(|| {
        PartitionError::Infeasible(units.first().map(|u| u.id.clone()).unwrap_or_default())
    })?;
    PartitionPlan::from_assignment(units, n, units.iter().map(|u| u.id.clone()).zip(best))
}

struct Search<'a> {
    units: &'a [WeightedUnit],
    adjacency: &'a [Vec<usize>],
    n: usize,
    suffix: Vec<i128>,
    /// n·load_v − total for every variant.
    scaled: Vec<i128>,
    current: Vec<usize>,
    best: Option<(i128, Vec<usize>)>,
    deadline: Option<Instant>,
    nodes: u64,
    timed_out: bool,
}

impl Search<'_> {
    /// Lower bound on the final scaled objective reachable from here.
    fn bound(&self, depth: usize) -> i128 {
        let excess: i128 = self.scaled.iter().map(|&s| s.max(0)).sum();
        let deficit: i128 = self.scaled.iter().map(|&s| (-s).max(0)).sum();
        2 * (excess + (self.suffix[depth] - deficit).max(0))
    }

    fn descend(&mut self, depth: usize, used: usize) {
        if self.timed_out {
            return;
        }
        self.nodes += 1;
        if self.nodes.is_multiple_of(4096) {
            if let Some(deadline) = self.deadline {
                if Instant::now() >= deadline {
                    self.timed_out = true;
                    return;
                }
            }
        }
        if let Some((best, _)) = &self.best {
            if self.bound(depth) >= *best {
                return;
            }
        }
        if depth == self.units.len() {
            let objective: i128 = self.scaled.iter().map(|s| s.abs()).sum();
            self.best = Some((objective, self.current.clone()));
            return;
        }
        let cost = self.n as i128 * self.units[depth].cost as i128;
        let limit = (used + 1).min(self.n);
        for variant in 0..limit {
            let clash = self.adjacency[depth].iter().any(|&j| j < depth && self.current[j] == variant);
            if clash {
                continue;
            }
            self.current[depth] = variant;
            self.scaled[variant] += cost;
            self.descend(depth + 1, used.max(variant + 1));
            self.scaled[variant] -= cost;
        }
    }
}
