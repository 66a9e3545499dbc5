use std::collections::VecDeque;

use super::{
    attempt_local, complete_router_delivery, complete_routerless_delivery, pair_fifo, Bank,
    ClientWait, DeliveryRecord, LinkModel, MeasurementSite, NoiseModel, PairingQueue, Phase,
    ProtocolError, QubitRegister, Side, StoredPair,
};
use crate::config::{Architecture, SimConfig};
use crate::engine::{EventAudit, Scheduler, SimTime};
use crate::fabric::timings;
use crate::qstate::{bell_state, BellOutcome, DensityMatrix};
use crate::rng::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum SimEvent {
    /// Distant attempt boundary on one side: resolve the attempts that just
    /// ended and start the next ones.
    Cycle(Side),
    SwapDone(usize),
    LocalAttemptDone(usize),
    RegisterFree(usize),
}

struct RegisterStreams {
    distant: [RandomStream; 2],
    local: RandomStream,
    bsm: RandomStream,
    readout: RandomStream,
}

impl RegisterStreams {
    fn new(seed: u64, id: usize) -> Self {
        Self {
            distant: [
                RandomStream::new(seed, format!("link.left.reg{id}")),
                RandomStream::new(seed, format!("link.right.reg{id}")),
            ],
            local: RandomStream::new(seed, format!("local.reg{id}")),
            bsm: RandomStream::new(seed, format!("bsm.reg{id}")),
            readout: RandomStream::new(seed, format!("readout.reg{id}")),
        }
    }

    fn site(&mut self) -> MeasurementSite<'_> {
        MeasurementSite {
            bsm: &mut self.bsm,
            readout: &mut self.readout,
        }
    }
}

/// Result of one simulation run.
#[derive(Clone, Debug)]
pub struct SimOutcome {
    pub records: Vec<DeliveryRecord>,
    /// Clock value when the run stopped.
    pub end_time: SimTime,
    pub trace_digest: [u8; 32],
    pub audit: EventAudit,
    pub p_distant: [f64; 2],
    pub p_local: f64,
    /// Distant attempt periods (seconds) on the left and right.
    pub cycle_period: [f64; 2],
}

impl SimOutcome {
    /// Pair rate in Hz. With a pair-count stop the rate is taken between
    /// the first and last completions; with a time stop it is pairs per
    /// simulated second.
    pub fn rate_hz(&self, t_max: Option<f64>) -> f64 {
        match t_max {
            Some(t) => self.records.len() as f64 / t,
            None => {
                let n = self.records.len();
                if n < 2 {
                    return 0.0;
                }
                let first = self
                    .records
                    .iter()
                    .map(|r| r.completion_time)
                    .min()
                    .expect("n >= 2");
                let last = self
                    .records
                    .iter()
                    .map(|r| r.completion_time)
                    .max()
                    .expect("n >= 2");
                let span = last.saturating_sub(first).as_secs();
                if span > 0.0 {
                    (n - 1) as f64 / span
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// Event-driven simulation of one repeater with `m` registers.
pub struct Simulation {
    architecture: Architecture,
    sched: Scheduler<SimEvent>,
    noise: NoiseModel,
    links: [LinkModel; 2],
    local: LinkModel,
    periods: [SimTime; 2],
    t_local: SimTime,
    t_swap: SimTime,
    t_bsm: SimTime,
    flight: [f64; 2],
    latency: [f64; 2],
    latency_decoheres: bool,
    serialize_local: bool,
    regs: Vec<QubitRegister>,
    streams: Vec<RegisterStreams>,
    queue: PairingQueue,
    station: VecDeque<usize>,
    station_busy: bool,
    last_cycle: [Option<SimTime>; 2],
    next_pair_index: u64,
    records: Vec<DeliveryRecord>,
    n_pairs: Option<u64>,
    t_max: SimTime,
    p_distant: [f64; 2],
    p_local: f64,
}

fn secs(t: f64) -> Result<SimTime, ProtocolError> {
    Ok(SimTime::from_secs(t)?)
}

impl Simulation {
    pub fn new(cfg: &SimConfig) -> Result<Self, ProtocolError> {
        cfg.validate()?;
        let noise = NoiseModel::from_config(cfg)?;
        let p_distant = [cfg.p_distant(Side::Left)?, cfg.p_distant(Side::Right)?];
        let p_local = cfg.p_local()?;
        let (tl_dist, t_local) = timings(&cfg.left);
        let (tr_dist, _) = timings(&cfg.right);
        let links = [
            LinkModel::new(p_distant[0], tl_dist),
            LinkModel::new(p_distant[1], tr_dist),
        ];
        let flight = [
            2.0 * cfg.left.length_km * 1e3 / cfg.left.fiber_light_speed,
            2.0 * cfg.right.length_km * 1e3 / cfg.right.fiber_light_speed,
        ];
        let m = cfg.m as usize;
        let regs: Vec<QubitRegister> = match cfg.architecture {
            Architecture::Router => {
                let left = cfg.left_bank_size() as usize;
                (0..m)
                    .map(|id| {
                        QubitRegister::new(id, if id < left { Bank::Left } else { Bank::Right })
                    })
                    .collect()
            }
            Architecture::Routerless => (0..m)
                .map(|id| QubitRegister::new(id, Bank::Unassigned))
                .collect(),
        };
        let streams = (0..m)
            .map(|id| RegisterStreams::new(cfg.master_seed, id))
            .collect();
        Ok(Self {
            architecture: cfg.architecture,
            sched: Scheduler::new().with_trace(),
            noise,
            links,
            local: LinkModel::new(p_local, t_local),
            periods: [secs(tl_dist)?, secs(tr_dist)?],
            t_local: secs(t_local)?,
            t_swap: secs(cfg.timing.swap)?,
            t_bsm: secs(cfg.timing.bsm)?,
            flight,
            latency: flight,
            latency_decoheres: cfg.flags.client_decoherence_during_correction,
            serialize_local: cfg.flags.serialize_local,
            regs,
            streams,
            queue: PairingQueue::new(),
            station: VecDeque::new(),
            station_busy: false,
            last_cycle: [None, None],
            next_pair_index: 0,
            records: Vec::new(),
            n_pairs: cfg.n_pairs,
            t_max: match cfg.t_max {
                Some(t) => secs(t)?,
                None => SimTime::MAX,
            },
            p_distant,
            p_local,
        })
    }

    pub fn registers(&self) -> &[QubitRegister] {
        &self.regs
    }

    fn done(&self) -> bool {
        self.n_pairs.is_some_and(|n| self.records.len() as u64 >= n)
    }

    pub fn run(mut self) -> Result<SimOutcome, ProtocolError> {
        self.sched
            .schedule(SimTime::ZERO, SimEvent::Cycle(Side::Left))?;
        self.sched
            .schedule(SimTime::ZERO, SimEvent::Cycle(Side::Right))?;
        while !self.done() {
            let Some(ev) = self.sched.pop_next(self.t_max) else {
                break;
            };
            self.handle(ev.fire_time, ev.payload)?;
        }
        let end_time = if self.t_max < SimTime::MAX && !self.done() {
            self.t_max
        } else {
            self.sched.now()
        };
        if self.t_max < SimTime::MAX {
            let limit = self.t_max;
            self.records.retain(|r| r.completion_time <= limit);
        }
        if let Some(n) = self.n_pairs {
            self.records.truncate(n as usize);
        }
        Ok(SimOutcome {
            records: self.records,
            end_time,
            trace_digest: self.sched.trace_digest().expect("trace enabled"),
            audit: self.sched.audit(),
            p_distant: self.p_distant,
            p_local: self.p_local,
            cycle_period: [self.periods[0].as_secs(), self.periods[1].as_secs()],
        })
    }

    fn handle(&mut self, now: SimTime, ev: SimEvent) -> Result<(), ProtocolError> {
        match ev {
            SimEvent::Cycle(side) => self.on_cycle(side, now),
            SimEvent::SwapDone(id) => self.on_swap_done(id, now),
            SimEvent::LocalAttemptDone(id) => self.on_local_attempt(id, now),
            SimEvent::RegisterFree(id) => {
                self.regs[id].reset()?;
                let side = self.regs[id].home_side();
                self.make_ready(id, side, now);
                Ok(())
            }
        }
    }

    /// Starts an attempt now if a cycle on `side` begins at this instant;
    /// otherwise the register joins at the next cycle boundary.
    fn make_ready(&mut self, id: usize, side: Side, now: SimTime) {
        self.regs[id].attempt_started = None;
        if self.last_cycle[side.index()] == Some(now) {
            self.regs[id].start_attempt(now);
        }
    }

    fn on_cycle(&mut self, side: Side, now: SimTime) -> Result<(), ProtocolError> {
        let s = side.index();
        self.last_cycle[s] = Some(now);
        for id in 0..self.regs.len() {
            if !self.regs[id].attempts_on(side) {
                continue;
            }
            if self.regs[id].attempt_started.is_some_and(|t| t < now) {
                self.resolve_distant(id, side, now)?;
            }
            let reg = &mut self.regs[id];
            if reg.attempts_on(side) && reg.attempt_started.is_none_or(|t| t < now) {
                reg.start_attempt(now);
            }
        }
        self.sched
            .schedule(now + self.periods[s], SimEvent::Cycle(side))?;
        Ok(())
    }

    fn resolve_distant(
        &mut self,
        id: usize,
        side: Side,
        now: SimTime,
    ) -> Result<(), ProtocolError> {
        let s = side.index();
        match self.regs[id].phase() {
            Phase::IdleAttemptingDistant => {
                let stream = &mut self.streams[id].distant[s];
                if self.regs[id].attempt_distant(
                    &self.links[s],
                    stream,
                    now,
                    self.flight[s],
                    &self.noise,
                )? {
                    self.sched
                        .schedule(now + self.t_swap, SimEvent::SwapDone(id))?;
                }
            }
            Phase::AttemptingSecondSide => {
                let stream = &mut self.streams[id].distant[s];
                if let Some(herald) = self.regs[id].attempt_second_side(
                    &self.links[s],
                    stream,
                    now,
                    self.flight[s],
                    &self.noise,
                )? {
                    self.deliver_routerless(id, herald, now)?;
                }
            }
            phase => {
                return Err(ProtocolError::InvalidTransition {
                    id,
                    action: "resolve a distant attempt",
                    phase,
                })
            }
        }
        Ok(())
    }

    fn on_swap_done(&mut self, id: usize, now: SimTime) -> Result<(), ProtocolError> {
        self.regs[id].swap_to_nuclear(now, self.architecture, &self.noise)?;
        match self.architecture {
            Architecture::Routerless => self.make_ready(id, Side::Right, now),
            Architecture::Router => {
                self.queue.push(&self.regs[id]);
                for (l, r) in pair_fifo(&mut self.queue, &mut self.regs)? {
                    let index = self.next_pair_index;
                    self.next_pair_index += 1;
                    for reg in [l, r] {
                        self.regs[reg].paired_at = Some(now);
                        self.regs[reg].pair_index = Some(index);
                    }
                    self.submit_local(l, now)?;
                }
            }
        }
        Ok(())
    }

    fn submit_local(&mut self, left: usize, now: SimTime) -> Result<(), ProtocolError> {
        if self.serialize_local {
            self.station.push_back(left);
            if !self.station_busy {
                self.next_local(now)?;
            }
        } else {
            self.sched
                .schedule(now + self.t_local, SimEvent::LocalAttemptDone(left))?;
        }
        Ok(())
    }

    fn next_local(&mut self, now: SimTime) -> Result<(), ProtocolError> {
        match self.station.pop_front() {
            Some(left) => {
                self.station_busy = true;
                self.sched
                    .schedule(now + self.t_local, SimEvent::LocalAttemptDone(left))?;
            }
            None => self.station_busy = false,
        }
        Ok(())
    }

    fn on_local_attempt(&mut self, left: usize, now: SimTime) -> Result<(), ProtocolError> {
        let right = self.regs[left]
            .partner()
            .ok_or(ProtocolError::NotPaired(left, left))?;
        let stream = &mut self.streams[left].local;
        let success = attempt_local(
            &mut self.regs,
            (left, right),
            &self.local,
            stream,
            now,
            &self.noise,
        )?;
        if success {
            self.deliver_router(left, right, now)?;
            if self.serialize_local {
                self.next_local(now)?;
            }
        } else if self.serialize_local {
            self.station.push_back(left);
            self.next_local(now)?;
        } else {
            self.sched
                .schedule(now + self.t_local, SimEvent::LocalAttemptDone(left))?;
        }
        Ok(())
    }

    fn wait(&self) -> ClientWait {
        let bsm = self.t_bsm.as_secs();
        let (extra_a, extra_b) = if self.latency_decoheres {
            (self.latency[0], self.latency[1])
        } else {
            (0.0, 0.0)
        };
        ClientWait {
            alice: bsm + extra_a,
            bob: bsm + extra_b,
        }
    }

    fn completion(&self, now: SimTime) -> Result<SimTime, ProtocolError> {
        Ok(now + self.t_bsm + secs(self.latency[0].max(self.latency[1]))?)
    }

    fn fidelity(rho: &DensityMatrix) -> Result<f64, ProtocolError> {
        Ok(rho.fidelity(&bell_state(BellOutcome::PhiPlus))?)
    }

    fn deliver_routerless(
        &mut self,
        id: usize,
        herald: StoredPair,
        now: SimTime,
    ) -> Result<(), ProtocolError> {
        let wait = self.wait();
        let reg = &self.regs[id];
        let stored = reg.stored().ok_or(ProtocolError::MissingState(id))?;
        let ab = complete_routerless_delivery(
            stored,
            &herald,
            &self.noise,
            &mut self.streams[id].site(),
            wait,
        )?;
        let round_start = reg.round_start.unwrap_or(reg.herald_time);
        let record = DeliveryRecord {
            architecture: Architecture::Routerless,
            completion_time: self.completion(now)?,
            fidelity: Self::fidelity(&ab)?,
            idle_cycles_left: now.saturating_sub(reg.success_time).ratio(self.periods[1]),
            idle_cycles_right: 0.0,
            stored_attempts: reg.attempts_while_stored(),
            noise_applications: [stored.noise_applications, 0],
            first_stage_cycles: reg
                .herald_time
                .saturating_sub(round_start)
                .ratio(self.periods[0]),
            registers: (id, None),
            success_times: (reg.success_time, None),
            pair_index: None,
        };
        self.records.push(record);
        self.sched
            .schedule(now + self.t_bsm, SimEvent::RegisterFree(id))?;
        Ok(())
    }

    fn deliver_router(
        &mut self,
        left: usize,
        right: usize,
        now: SimTime,
    ) -> Result<(), ProtocolError> {
        let wait = self.wait();
        let local = self.local.herald_state();
        let (lo, hi) = self.streams.split_at_mut(left.max(right));
        let (ls, rs) = if left < right {
            (&mut lo[left], &mut hi[0])
        } else {
            (&mut hi[0], &mut lo[right])
        };
        let (lr, rr) = (&self.regs[left], &self.regs[right]);
        let l_stored = lr.stored().ok_or(ProtocolError::MissingState(left))?;
        let r_stored = rr.stored().ok_or(ProtocolError::MissingState(right))?;
        let ab = complete_router_delivery(
            l_stored,
            r_stored,
            &local,
            &self.noise,
            &mut ls.site(),
            &mut rs.site(),
            wait,
        )?;
        let paired = lr.paired_at.ok_or(ProtocolError::NotPaired(left, right))?;
        let start = lr
            .round_start
            .unwrap_or(lr.herald_time)
            .min(rr.round_start.unwrap_or(rr.herald_time));
        let record = DeliveryRecord {
            architecture: Architecture::Router,
            completion_time: self.completion(now)?,
            fidelity: Self::fidelity(&ab)?,
            idle_cycles_left: paired
                .saturating_sub(lr.success_time)
                .ratio(self.periods[0]),
            idle_cycles_right: paired
                .saturating_sub(rr.success_time)
                .ratio(self.periods[1]),
            stored_attempts: lr.attempts_while_stored(),
            noise_applications: [l_stored.noise_applications, r_stored.noise_applications],
            first_stage_cycles: lr
                .herald_time
                .max(rr.herald_time)
                .saturating_sub(start)
                .ratio(self.periods[0]),
            registers: (left, Some(right)),
            success_times: (lr.success_time, Some(rr.success_time)),
            pair_index: lr.pair_index,
        };
        self.records.push(record);
        self.sched
            .schedule(now + self.t_bsm, SimEvent::RegisterFree(left))?;
        self.sched
            .schedule(now + self.t_bsm, SimEvent::RegisterFree(right))?;
        Ok(())
    }
}

/// Builds and runs one simulation for `cfg`.
pub fn run_architecture(cfg: &SimConfig) -> Result<SimOutcome, ProtocolError> {
    Simulation::new(cfg)?.run()
}
