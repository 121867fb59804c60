//! Turning an execution record into report figures.

use num_rational::Ratio;

use crate::Ticks;

/// Per-process accounting collected during a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessRecord {
    pub variant: usize,
    /// Own event costs plus own handshakes, starting from the parent's
    /// value at fork time.
    pub busy: Ticks,
    pub handshakes: Ticks,
    /// Time spent blocked on a slot, the ring, or the order log.
    pub waiting: Ticks,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionRecord {
    pub variants: usize,
    pub processes: Vec<ProcessRecord>,
    /// Gap samples per follower, indexed by variant (index 0 unused).
    pub gaps: Vec<Vec<u64>>,
    pub locks_replayed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapStats {
    pub max: u64,
    pub mean: Ratio<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metrics {
    pub finish: Vec<Ticks>,
    pub o_sync: Ticks,
    pub o_overall: Ticks,
    /// (follower variant, stats) for variants 1..n.
    pub gaps: Vec<(usize, GapStats)>,
    pub locks_replayed: u64,
}

/// Finish time of a variant is its slowest process's busy time; the sync
/// overhead is every handshake plus every blocked interval, so
/// `o_overall = max(finish) + o_sync` holds by construction.
pub fn compute_metrics(record: &ExecutionRecord) -> Metrics {
    let mut finish = vec![0; record.variants];
    let mut o_sync: Ticks = 0;
    for p in &record.processes {
        finish[p.variant] = finish[p.variant].max(p.busy);
        o_sync += p.handshakes + p.waiting;
    }
    let gaps = (1..record.variants)
        .map(|v| {
            let samples = record.gaps.get(v).map(Vec::as_slice).unwrap_or(&[]);
            let max = samples.iter().copied().max().unwrap_or(0);
            let mean = if samples.is_empty() {
                Ratio::from_integer(0)
            } else {
                Ratio::new(samples.iter().sum(), samples.len() as u64)
            };
            (v, GapStats { max, mean })
        })
        .collect();
    let slowest = finish.iter().copied().max().unwrap_or(0);
    Metrics { finish, o_sync, o_overall: slowest + o_sync, gaps, locks_replayed: record.locks_replayed }
}
