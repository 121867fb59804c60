//! Discrete-event simulation of the leader/follower protocol.
//!
//! Every process carries its own virtual clock. The scheduler always steps
//! the runnable process with the smallest clock (ties broken by a seeded
//! per-process key), and a blocked process resumes at the latest of its own
//! clock and the virtual time of the event that unblocked it. Host
//! scheduling never enters the picture, so runs are reproducible bit for
//! bit.

use std::collections::{BTreeMap, HashMap};

use super::metrics::{compute_metrics, ExecutionRecord, ProcessRecord};
use super::order::{enforce_lock_order, Admit, Egid, LockRequester, OrderLog};
use super::report::{DivergenceKind, SimulationReport, Verdict};
use super::slot::{EventRing, Record, SyncSlot};
use super::{classify_event, Action, SimError, SimulationConfig, SyncMode};
use crate::rng::SplitMix64;
use crate::trace::{report_digest, Digest, Event, LockOp, SyscallClass, VariantTrace, REPORT_WRITE_NUM};
use crate::Ticks;

const ROOT_GROUP: Egid = 1;

/// Protocol-level log of a run, in processing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtocolEvent {
    CheckIn { egid: Egid, ordinal: u64, number: u64, class: SyscallClass, lockstep: bool, at: Ticks },
    Agree { egid: Egid, ordinal: u64, variant: usize, at: Ticks },
    /// Leader-side execution of a synchronized syscall, starting at `at`.
    Execute { egid: Egid, ordinal: u64, number: u64, class: SyscallClass, args: Digest, lockstep: bool, at: Ticks },
    Consume { egid: Egid, ordinal: u64, variant: usize, class: SyscallClass, lockstep: bool, gap: u64 },
    LockAppend { egid: Egid, op: LockOp },
    LockReplay { variant: usize, egid: Egid, op: LockOp },
    Fork { variant: usize, parent: Egid, child: Egid },
    Alert { egid: Egid, ordinal: u64, variant: usize, kind: DivergenceKind },
}

/// A process left waiting when the run stalled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockedProcess {
    pub variant: usize,
    pub egid: Egid,
    pub trace: String,
    pub waiting_on: String,
}

/// Outcome of [`run_simulation`]: the report plus everything needed to
/// audit it.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub report: SimulationReport,
    pub log: Vec<ProtocolEvent>,
    pub order_log: OrderLog,
    pub record: ExecutionRecord,
}

impl Simulation {
    /// Group sequence consumed by `variant` during lock-order replay.
    pub fn replayed(&self, variant: usize) -> Vec<Egid> {
        self.order_log.replayed(variant)
    }
}

/// Runs `variants` (index 0 leads) under `config`.
pub fn run_simulation(variants: &[VariantTrace], config: &SimulationConfig) -> Result<Simulation, SimError> {
    config.validate()?;
    if variants.len() < 2 {
        return Err(SimError::Config(format!("need at least 2 variants, got {}", variants.len())));
    }
    Engine::new(variants, config).run()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Window {
    PreMain,
    Inside,
    Exited,
}

/// A synchronized syscall as issued by one process.
#[derive(Debug, Clone)]
struct Pending {
    number: u64,
    class: SyscallClass,
    args: Digest,
    result: Digest,
    cost: Ticks,
    lockstep: bool,
}

#[derive(Debug, Clone)]
enum State {
    Runnable,
    AwaitSpace { since: Ticks, pending: Pending },
    AwaitAgreement { since: Ticks, ordinal: u64, result: Digest },
    AwaitCheckIn { since: Ticks, pending: Pending },
    AwaitResult { arrived: Ticks },
    AwaitLock { since: Ticks, op: LockOp, cost: Ticks },
    Done,
}

#[derive(Debug)]
struct Proc {
    variant: usize,
    egid: Egid,
    section: usize,
    pc: usize,
    now: Ticks,
    busy: Ticks,
    handshakes: Ticks,
    waiting: Ticks,
    window: Window,
    forks: usize,
    stream_ended: bool,
    state: State,
    tiebreak: u64,
}

#[derive(Debug)]
struct Group {
    /// Process per variant; `None` until that variant forks into the group.
    members: Vec<Option<usize>>,
    ring: EventRing,
    leader_ended: bool,
    follower_ended: Vec<bool>,
    /// Agreement instants for the outstanding lockstep record.
    agree_at: Vec<Ticks>,
}

struct Engine<'a> {
    variants: &'a [VariantTrace],
    config: &'a SimulationConfig,
    n: usize,
    procs: Vec<Proc>,
    groups: BTreeMap<Egid, Group>,
    fork_map: HashMap<(Egid, usize), Egid>,
    next_egid: Egid,
    order_log: OrderLog,
    lock_times: Vec<Ticks>,
    last_replay_at: Vec<Ticks>,
    gaps: Vec<Vec<u64>>,
    locks_replayed: u64,
    log: Vec<ProtocolEvent>,
    alert: Option<Verdict>,
    rng: SplitMix64,
    report_names: HashMap<Digest, String>,
}

impl<'a> Engine<'a> {
    fn new(variants: &'a [VariantTrace], config: &'a SimulationConfig) -> Self {
        let n = variants.len();
        let mut report_names = HashMap::new();
        let units = config.report_units.iter().map(String::as_str).chain(variants.iter().flat_map(|v| {
            v.trace.events().filter_map(|e| match e {
                Event::Check { unit, .. } | Event::Vuln { unit } => Some(unit.as_str()),
                _ => None,
            })
        }));
        for unit in units {
            report_names.entry(report_digest(unit)).or_insert_with(|| unit.to_string());
        }
        Self {
            variants,
            config,
            n,
            procs: Vec::new(),
            groups: BTreeMap::new(),
            fork_map: HashMap::new(),
            next_egid: ROOT_GROUP,
            order_log: OrderLog::new(n),
            lock_times: Vec::new(),
            last_replay_at: vec![0; n],
            gaps: vec![Vec::new(); n],
            locks_replayed: 0,
            log: Vec::new(),
            alert: None,
            rng: SplitMix64::new(config.scheduler_seed),
            report_names,
        }
    }

    fn run(mut self) -> Result<Simulation, SimError> {
        let root = self.create_group();
        for v in 0..self.n {
            self.spawn(v, 0, root, 0, 0, Window::PreMain);
        }
        loop {
            self.settle();
            if self.alert.is_some() {
                break;
            }
            match self.pick() {
                Some(p) => self.step(p),
                None if self.procs.iter().all(|p| matches!(p.state, State::Done)) => break,
                None if self.lock_divergence() => break,
                None => return Err(SimError::Stall { blocked: self.blocked() }),
            }
            if self.alert.is_some() {
                break;
            }
        }
        Ok(self.finish())
    }

    fn finish(self) -> Simulation {
        let record = ExecutionRecord {
            variants: self.n,
            processes: self
                .procs
                .iter()
                .map(|p| ProcessRecord { variant: p.variant, busy: p.busy, handshakes: p.handshakes, waiting: p.waiting })
                .collect(),
            gaps: self.gaps,
            locks_replayed: self.locks_replayed,
        };
        let verdict = self.alert.unwrap_or(Verdict::Clean);
        let report = SimulationReport::from_metrics(verdict, compute_metrics(&record));
        Simulation { report, log: self.log, order_log: self.order_log, record }
    }

    fn create_group(&mut self) -> Egid {
        let egid = self.next_egid;
        self.next_egid += 1;
        let capacity = match self.config.mode {
            SyncMode::Strict => 1,
            SyncMode::Selective => self.config.ring_capacity,
        };
        let followers = self.n - 1;
        self.groups.insert(
            egid,
            Group {
                members: vec![None; self.n],
                ring: EventRing::new(capacity, followers),
                leader_ended: false,
                follower_ended: vec![false; followers],
                agree_at: vec![0; followers],
            },
        );
        self.order_log.register(egid);
        egid
    }

    fn spawn(&mut self, variant: usize, section: usize, egid: Egid, now: Ticks, busy: Ticks, window: Window) -> usize {
        let id = self.procs.len();
        let tiebreak = self.rng.next_u64();
        self.procs.push(Proc {
            variant,
            egid,
            section,
            pc: 0,
            now,
            busy,
            handshakes: 0,
            waiting: 0,
            window,
            forks: 0,
            stream_ended: false,
            state: State::Runnable,
            tiebreak,
        });
        let group = self.groups.get_mut(&egid).expect("group exists");
        debug_assert!(group.members[variant].is_none());
        group.members[variant] = Some(id);
        if window == Window::Exited {
            self.end_stream(id);
        }
        id
    }

    fn pick(&self) -> Option<usize> {
        self.procs
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p.state, State::Runnable))
            .min_by_key(|(i, p)| (p.now, p.tiebreak, *i))
            .map(|(i, _)| i)
    }

    fn blocked(&self) -> Vec<BlockedProcess> {
        self.procs
            .iter()
            .filter_map(|p| {
                let waiting_on = match &p.state {
                    State::Runnable | State::Done => return None,
                    State::AwaitSpace { .. } => "ring space".to_string(),
                    State::AwaitAgreement { ordinal, .. } => format!("follower agreement on #{ordinal}"),
                    State::AwaitCheckIn { .. } => "leader check-in".to_string(),
                    State::AwaitResult { .. } => "leader result".to_string(),
                    State::AwaitLock { .. } => {
                        format!("order log head {:?}", self.order_log.next_for(p.variant))
                    }
                };
                Some(BlockedProcess {
                    variant: p.variant,
                    egid: p.egid,
                    trace: self.variants[p.variant].trace.sections()[p.section].id.clone(),
                    waiting_on,
                })
            })
            .collect()
    }

    /// At quiescence, a follower asking for an acquisition beyond the end
    /// of the order log wants more locks than its leader took before the
    /// pending syscall: its event sequence diverged. Anything else blocked
    /// is a genuine replay stall.
    fn lock_divergence(&mut self) -> bool {
        let Some(p) = self.procs.iter().position(|p| {
            matches!(p.state, State::AwaitLock { .. }) && self.order_log.next_for(p.variant).is_none()
        }) else {
            return false;
        };
        let (variant, egid) = (self.procs[p].variant, self.procs[p].egid);
        let ring = &self.groups[&egid].ring;
        let ordinal = ring.consumed(variant - 1) + 1;
        let unit = ring.get(ordinal).and_then(|r| self.report_name(r.slot.number, r.slot.class, r.slot.args));
        self.raise(egid, DivergenceKind::Sequence, variant, ordinal, unit);
        true
    }

    fn report_name(&self, number: u64, class: SyscallClass, args: Digest) -> Option<String> {
        if number == REPORT_WRITE_NUM && class == SyscallClass::IoWrite {
            self.report_names.get(&args).cloned()
        } else {
            None
        }
    }

    fn raise(&mut self, egid: Egid, kind: DivergenceKind, variant: usize, ordinal: u64, unit: Option<String>) {
        if self.alert.is_some() {
            return;
        }
        self.log.push(ProtocolEvent::Alert { egid, ordinal, variant, kind });
        self.alert = Some(Verdict::Alert { kind, variant, ordinal, unit });
    }

    fn charge(&mut self, p: usize, cost: Ticks) {
        let proc = &mut self.procs[p];
        proc.now += cost;
        proc.busy += cost;
    }

    fn settle(&mut self) {
        loop {
            let mut progressed = false;
            for p in 0..self.procs.len() {
                if self.alert.is_some() {
                    return;
                }
                progressed |= self.try_resume(p);
            }
            if !progressed {
                return;
            }
        }
    }

    fn try_resume(&mut self, p: usize) -> bool {
        let egid = self.procs[p].egid;
        match self.procs[p].state.clone() {
            State::AwaitSpace { since, pending } => {
                let ring = &self.groups[&egid].ring;
                if !ring.has_space() {
                    return false;
                }
                let resume = since.max(ring.freed_at());
                let proc = &mut self.procs[p];
                proc.waiting += resume - since;
                proc.now = resume;
                proc.state = State::Runnable;
                self.leader_push(p, pending);
                true
            }
            State::AwaitAgreement { since, ordinal, result } => {
                let group = &self.groups[&egid];
                let agreed = group.ring.get(ordinal).is_some_and(|r| r.slot.all_agreed());
                if agreed {
                    self.leader_execute(p, ordinal, since, result);
                }
                agreed
            }
            State::AwaitCheckIn { since, pending } => {
                let f = self.procs[p].variant - 1;
                let group = &self.groups[&egid];
                let next = group.ring.consumed(f) + 1;
                if group.ring.produced() >= next {
                    self.follower_match(p, pending, since, next);
                    true
                } else if group.leader_ended {
                    let unit = self.report_name(pending.number, pending.class, pending.args);
                    self.raise(egid, DivergenceKind::Sequence, f + 1, next, unit);
                    true
                } else {
                    false
                }
            }
            State::AwaitLock { since, op, cost } => {
                let requester = LockRequester { variant: self.procs[p].variant, egid };
                match enforce_lock_order(&mut self.order_log, requester, op) {
                    Admit::Proceed => {
                        self.procs[p].state = State::Runnable;
                        self.replay_lock(p, op, cost, since);
                        true
                    }
                    Admit::Defer => false,
                }
            }
            State::Runnable | State::AwaitResult { .. } | State::Done => false,
        }
    }

    fn step(&mut self, p: usize) {
        let proc = &self.procs[p];
        let events = &self.variants[proc.variant].trace.sections()[proc.section].events;
        let Some(event) = events.get(proc.pc).cloned() else {
            self.end_stream(p);
            self.procs[p].state = State::Done;
            return;
        };
        self.procs[p].pc += 1;
        match &event {
            Event::Compute { cost } | Event::Check { cost, .. } => self.charge(p, *cost),
            Event::MainEnter => self.procs[p].window = Window::Inside,
            Event::ExitBegin => {
                self.procs[p].window = Window::Exited;
                self.end_stream(p);
            }
            Event::Vuln { .. } => {}
            Event::Fork { child } => self.fork(p, child),
            Event::Lock { op, cost, .. } => self.lock(p, *op, *cost),
            Event::Syscall { number, class, args, result, cost } => {
                let in_window = self.procs[p].window == Window::Inside;
                let action = classify_event(&event, in_window, self.config);
                match action {
                    Action::Ignore | Action::OutOfWindow => self.charge(p, *cost),
                    Action::LockstepSync | Action::BufferedSync => {
                        let pending = Pending {
                            number: *number,
                            class: *class,
                            args: *args,
                            result: *result,
                            cost: *cost,
                            lockstep: action == Action::LockstepSync,
                        };
                        if self.procs[p].variant == 0 {
                            self.leader_arrive(p, pending);
                        } else {
                            let now = self.procs[p].now;
                            self.follower_arrive(p, pending, now);
                        }
                    }
                }
            }
        }
    }

    fn fork(&mut self, p: usize, child: &str) {
        let (variant, parent, ordinal) = {
            let proc = &mut self.procs[p];
            proc.forks += 1;
            (proc.variant, proc.egid, proc.forks - 1)
        };
        let egid = match self.fork_map.get(&(parent, ordinal)) {
            Some(&egid) => egid,
            None => {
                let egid = self.create_group();
                self.fork_map.insert((parent, ordinal), egid);
                egid
            }
        };
        let section = self.variants[variant]
            .trace
            .sections()
            .iter()
            .position(|s| s.id == child)
            .expect("fork targets are validated at parse time");
        let (now, busy, window) = (self.procs[p].now, self.procs[p].busy, self.procs[p].window);
        self.log.push(ProtocolEvent::Fork { variant, parent, child: egid });
        self.spawn(variant, section, egid, now, busy, window);
    }

    fn lock(&mut self, p: usize, op: LockOp, cost: Ticks) {
        let (variant, egid, now) = (self.procs[p].variant, self.procs[p].egid, self.procs[p].now);
        match enforce_lock_order(&mut self.order_log, LockRequester { variant, egid }, op) {
            Admit::Proceed if variant == 0 => {
                self.lock_times.push(now);
                self.log.push(ProtocolEvent::LockAppend { egid, op });
                self.charge(p, cost);
            }
            Admit::Proceed => self.replay_lock(p, op, cost, now),
            Admit::Defer => self.procs[p].state = State::AwaitLock { since: now, op, cost },
        }
    }

    /// Follower side of an admitted lock request; the entry was consumed.
    fn replay_lock(&mut self, p: usize, op: LockOp, cost: Ticks, since: Ticks) {
        let (variant, egid) = (self.procs[p].variant, self.procs[p].egid);
        let entry = self.order_log.cursor(variant) - 1;
        let resume = since.max(self.lock_times[entry]).max(self.last_replay_at[variant]);
        self.last_replay_at[variant] = resume;
        let proc = &mut self.procs[p];
        proc.waiting += resume - since;
        proc.now = resume;
        self.locks_replayed += 1;
        self.log.push(ProtocolEvent::LockReplay { variant, egid, op });
        self.charge(p, cost);
    }

    fn leader_arrive(&mut self, p: usize, pending: Pending) {
        let egid = self.procs[p].egid;
        if self.groups[&egid].ring.has_space() {
            self.leader_push(p, pending);
        } else {
            let since = self.procs[p].now;
            self.procs[p].state = State::AwaitSpace { since, pending };
        }
    }

    fn leader_push(&mut self, p: usize, pending: Pending) {
        let egid = self.procs[p].egid;
        let now = self.procs[p].now;
        let h = self.config.handshake_cost;
        let followers = self.n - 1;

        let group = self.groups.get_mut(&egid).expect("group exists");
        let ordinal = group.ring.produced() + 1;
        let mut slot = SyncSlot::new(followers);
        slot.check_in(pending.number, pending.class, pending.args);
        group.ring.push(Record {
            ordinal,
            slot,
            lockstep: pending.lockstep,
            cost: pending.cost,
            checked_in_at: now,
            published_at: None,
            done_at: 0,
        });
        self.log.push(ProtocolEvent::CheckIn {
            egid,
            ordinal,
            number: pending.number,
            class: pending.class,
            lockstep: pending.lockstep,
            at: now,
        });

        // A follower whose stream already ended can never match this record.
        let group = &self.groups[&egid];
        if let Some(f) = (0..followers).find(|&f| group.follower_ended[f] && group.ring.consumed(f) + 1 == ordinal) {
            let unit = self.report_name(pending.number, pending.class, pending.args);
            self.raise(egid, DivergenceKind::Sequence, f + 1, ordinal, unit);
            return;
        }

        if pending.lockstep {
            let group = self.groups.get_mut(&egid).expect("group exists");
            group.agree_at.iter_mut().for_each(|t| *t = 0);
            self.procs[p].state = State::AwaitAgreement { since: now, ordinal, result: pending.result };
        } else {
            self.charge(p, pending.cost + h);
            self.procs[p].handshakes += h;
            let published = self.procs[p].now;
            let record = self.groups.get_mut(&egid).unwrap().ring.get_mut(ordinal).unwrap();
            record.slot.turn_in(pending.result);
            record.published_at = Some(published);
            self.log.push(ProtocolEvent::Execute {
                egid,
                ordinal,
                number: pending.number,
                class: pending.class,
                args: pending.args,
                lockstep: false,
                at: now,
            });
        }
    }

    /// All followers agreed on a lockstep record: execute, turn in the
    /// result, and release the followers.
    fn leader_execute(&mut self, p: usize, ordinal: u64, since: Ticks, result: Digest) {
        let egid = self.procs[p].egid;
        let h = self.config.handshake_cost;
        let group = &self.groups[&egid];
        let agreed_at = group.agree_at.iter().copied().max().unwrap_or(since).max(since);
        let record = group.ring.get(ordinal).expect("outstanding record");
        let (cost, number, class, args) = (record.cost, record.slot.number, record.slot.class, record.slot.args);
        let members: Vec<usize> = group.members[1..].iter().map(|m| m.expect("agreed follower exists")).collect();

        let leader = &mut self.procs[p];
        leader.waiting += agreed_at - since;
        leader.now = agreed_at;
        leader.state = State::Runnable;
        self.charge(p, cost + h);
        self.procs[p].handshakes += h;
        let published = self.procs[p].now;
        self.log.push(ProtocolEvent::Execute { egid, ordinal, number, class, args, lockstep: true, at: agreed_at });

        let mut done_at = 0;
        for q in members {
            let follower = &mut self.procs[q];
            let State::AwaitResult { arrived } = follower.state else {
                unreachable!("agreed follower must be waiting for the result");
            };
            let resume = (arrived + h).max(published);
            follower.waiting += resume - arrived - h;
            follower.busy += h;
            follower.handshakes += h;
            follower.now = resume;
            follower.state = State::Runnable;
            done_at = done_at.max(resume);
        }
        let group = self.groups.get_mut(&egid).expect("group exists");
        let record = group.ring.get_mut(ordinal).expect("outstanding record");
        record.slot.turn_in(result);
        record.published_at = Some(published);
        record.done_at = record.done_at.max(done_at);
        group.ring.reclaim();
    }

    fn follower_arrive(&mut self, p: usize, pending: Pending, arrived: Ticks) {
        let egid = self.procs[p].egid;
        let f = self.procs[p].variant - 1;
        let group = &self.groups[&egid];
        let next = group.ring.consumed(f) + 1;
        if group.ring.produced() >= next {
            self.follower_match(p, pending, arrived, next);
        } else if group.leader_ended {
            let unit = self.report_name(pending.number, pending.class, pending.args);
            self.raise(egid, DivergenceKind::Sequence, f + 1, next, unit);
        } else {
            self.procs[p].state = State::AwaitCheckIn { since: arrived, pending };
        }
    }

    fn follower_match(&mut self, p: usize, pending: Pending, arrived: Ticks, ordinal: u64) {
        let egid = self.procs[p].egid;
        let variant = self.procs[p].variant;
        let f = variant - 1;
        let h = self.config.handshake_cost;
        let record = self.groups[&egid].ring.get(ordinal).expect("record not yet released");

        let kind = if (record.slot.number, record.slot.class) != (pending.number, pending.class) {
            Some(DivergenceKind::Sequence)
        } else if record.slot.args != pending.args {
            Some(DivergenceKind::Argument)
        } else {
            None
        };
        if let Some(kind) = kind {
            let unit = self
                .report_name(record.slot.number, record.slot.class, record.slot.args)
                .or_else(|| self.report_name(pending.number, pending.class, pending.args));
            self.raise(egid, kind, variant, ordinal, unit);
            return;
        }

        let lockstep = record.lockstep;
        let (checked_in_at, published_at) = (record.checked_in_at, record.published_at);
        let group = self.groups.get_mut(&egid).expect("group exists");
        let gap = group.ring.produced() - ordinal;
        self.gaps[variant].push(gap);
        if lockstep {
            let at = arrived.max(checked_in_at);
            group.agree_at[f] = at;
            group.ring.get_mut(ordinal).unwrap().slot.agree(f);
            group.ring.consume(f, ordinal, at);
            self.log.push(ProtocolEvent::Agree { egid, ordinal, variant, at });
            self.procs[p].now = arrived;
            self.procs[p].state = State::AwaitResult { arrived };
        } else {
            let published = published_at.expect("buffered records are published on push");
            let at = arrived.max(published);
            group.ring.get_mut(ordinal).unwrap().slot.agree(f);
            group.ring.consume(f, ordinal, at);
            group.ring.reclaim();
            let proc = &mut self.procs[p];
            proc.waiting += at - arrived;
            proc.now = at + h;
            proc.busy += h;
            proc.handshakes += h;
            proc.state = State::Runnable;
        }
        self.log.push(ProtocolEvent::Consume { egid, ordinal, variant, class: pending.class, lockstep, gap });
    }

    /// The process will issue no further synchronized syscalls.
    fn end_stream(&mut self, p: usize) {
        if self.procs[p].stream_ended {
            return;
        }
        self.procs[p].stream_ended = true;
        let egid = self.procs[p].egid;
        let variant = self.procs[p].variant;
        if variant == 0 {
            self.groups.get_mut(&egid).expect("group exists").leader_ended = true;
            let produced = self.groups[&egid].ring.produced();
            let members = self.groups[&egid].members.clone();
            for q in members.into_iter().skip(1).flatten() {
                if let State::AwaitCheckIn { pending, .. } = &self.procs[q].state {
                    let f = self.procs[q].variant;
                    let next = self.groups[&egid].ring.consumed(f - 1) + 1;
                    if next > produced {
                        let unit = self.report_name(pending.number, pending.class, pending.args);
                        self.raise(egid, DivergenceKind::Sequence, f, next, unit);
                        return;
                    }
                }
            }
        } else {
            let group = self.groups.get_mut(&egid).expect("group exists");
            group.follower_ended[variant - 1] = true;
            let group = &self.groups[&egid];
            let next = group.ring.consumed(variant - 1) + 1;
            if group.ring.produced() >= next {
                let record = group.ring.get(next).expect("unconsumed record is retained");
                let unit = self.report_name(record.slot.number, record.slot.class, record.slot.args);
                self.raise(egid, DivergenceKind::Sequence, variant, next, unit);
            }
        }
    }
}
