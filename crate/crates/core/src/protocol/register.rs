use super::{LinkModel, ProtocolError};
use crate::config::{Architecture, CoherenceSet, SimConfig};
use crate::engine::SimTime;
use crate::noise::{
    attempt_noise_channel, decoherence_channel, gate_noise_channel, CoherenceParams,
};
use crate::qstate::{DensityMatrix, KrausChannel};
use crate::rng::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bank {
    Left,
    Right,
    /// Routerless registers link to both sides.
    Unassigned,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    IdleAttemptingDistant,
    SwappingToNuclear,
    AwaitingPair,
    AttemptingLocal,
    AttemptingSecondSide,
    Delivering,
}

impl Phase {
    pub fn holds_stored_state(self) -> bool {
        matches!(
            self,
            Phase::AwaitingPair
                | Phase::AttemptingLocal
                | Phase::AttemptingSecondSide
                | Phase::Delivering
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MemoryRole {
    Electron,
    Nuclear,
}

/// Precomputed channels shared by every register of one run.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    pub coherence: CoherenceSet,
    pub attempt: KrausChannel,
    pub gate: KrausChannel,
    pub swap: KrausChannel,
    pub eps_ro: f64,
    pub both_nuclei: bool,
}

impl NoiseModel {
    pub fn from_config(cfg: &SimConfig) -> Result<Self, ProtocolError> {
        Ok(Self {
            coherence: cfg.coherence,
            attempt: attempt_noise_channel(&cfg.attempt_noise),
            gate: gate_noise_channel(cfg.op_noise.p_gate, 2)?,
            swap: gate_noise_channel(cfg.op_noise.p_swap, 2)?,
            eps_ro: cfg.op_noise.eps_ro,
            both_nuclei: cfg.flags.both_nuclei_attempt_noise,
        })
    }

    pub fn memory_params(&self, role: MemoryRole) -> &CoherenceParams {
        match role {
            MemoryRole::Electron => &self.coherence.electron,
            MemoryRole::Nuclear => &self.coherence.nuclear,
        }
    }

    /// Applies idle decoherence for `secs` seconds to one qubit.
    pub fn decohere(
        &self,
        rho: DensityMatrix,
        qubit: usize,
        params: &CoherenceParams,
        secs: f64,
    ) -> Result<DensityMatrix, ProtocolError> {
        if secs == 0.0 || params.is_ideal() {
            return Ok(rho);
        }
        Ok(rho.apply_channel(&[qubit], &decoherence_channel(secs, params)?)?)
    }
}

/// A two-qubit state `[client, memory]` held by one register.
#[derive(Clone, Debug)]
pub struct StoredPair {
    pub rho: DensityMatrix,
    pub memory: MemoryRole,
    /// Time up to which idle decoherence has been applied.
    pub synced_at: SimTime,
    /// Number of attempt-noise channels applied to the memory qubit.
    pub noise_applications: u32,
}

impl StoredPair {
    /// Fresh heralded pair; both halves have already waited `flight` seconds
    /// for the herald to arrive.
    pub fn heralded(
        link: &LinkModel,
        now: SimTime,
        flight: f64,
        noise: &NoiseModel,
    ) -> Result<Self, ProtocolError> {
        let rho = noise.decohere(link.herald_state(), 0, &noise.coherence.client, flight)?;
        let rho = noise.decohere(rho, 1, &noise.coherence.electron, flight)?;
        Ok(Self {
            rho,
            memory: MemoryRole::Electron,
            synced_at: now,
            noise_applications: 0,
        })
    }

    /// Applies idle decoherence to both halves up to `to`.
    pub fn advance(&mut self, to: SimTime, noise: &NoiseModel) -> Result<(), ProtocolError> {
        let dt = to.saturating_sub(self.synced_at).as_secs();
        if dt > 0.0 {
            let rho = std::mem::replace(&mut self.rho, DensityMatrix::maximally_mixed(1));
            let rho = noise.decohere(rho, 0, &noise.coherence.client, dt)?;
            self.rho = noise.decohere(rho, 1, noise.memory_params(self.memory), dt)?;
        }
        self.synced_at = self.synced_at.max(to);
        Ok(())
    }

    pub fn apply_attempt_noise(&mut self, noise: &NoiseModel) -> Result<(), ProtocolError> {
        self.rho = self.rho.apply_channel(&[1], &noise.attempt)?;
        self.noise_applications += 1;
        Ok(())
    }
}

/// One electron + nuclear spin register at the repeater.
#[derive(Clone, Debug)]
pub struct QubitRegister {
    pub id: usize,
    pub bank: Bank,
    phase: Phase,
    /// Heralded `[client, electron]` pair while the swap to the nucleus runs.
    broker: Option<StoredPair>,
    stored: Option<StoredPair>,
    partner: Option<usize>,
    attempts_while_stored: u32,
    /// Storage start (swap completion).
    pub success_time: SimTime,
    /// Herald time of the first link of the current round.
    pub herald_time: SimTime,
    /// Start of the first distant attempt of the current round.
    pub round_start: Option<SimTime>,
    /// Start of the attempt currently in flight, if any.
    pub attempt_started: Option<SimTime>,
    pub distant_attempts: u32,
    pub paired_at: Option<SimTime>,
    pub pair_index: Option<u64>,
}

impl QubitRegister {
    pub fn new(id: usize, bank: Bank) -> Self {
        Self {
            id,
            bank,
            phase: Phase::IdleAttemptingDistant,
            broker: None,
            stored: None,
            partner: None,
            attempts_while_stored: 0,
            success_time: SimTime::ZERO,
            herald_time: SimTime::ZERO,
            round_start: None,
            attempt_started: None,
            distant_attempts: 0,
            paired_at: None,
            pair_index: None,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn stored(&self) -> Option<&StoredPair> {
        self.stored.as_ref()
    }

    pub fn partner(&self) -> Option<usize> {
        self.partner
    }

    pub fn attempts_while_stored(&self) -> u32 {
        self.attempts_while_stored
    }

    /// Side whose distant link this register uses first.
    pub fn home_side(&self) -> super::Side {
        match self.bank {
            Bank::Right => super::Side::Right,
            Bank::Left | Bank::Unassigned => super::Side::Left,
        }
    }

    /// Whether the register makes distant attempts on `side` in its current phase.
    pub fn attempts_on(&self, side: super::Side) -> bool {
        match self.phase {
            Phase::IdleAttemptingDistant => self.home_side() == side,
            Phase::AttemptingSecondSide => side == super::Side::Right,
            _ => false,
        }
    }

    fn guard(&self, expected: Phase, action: &'static str) -> Result<(), ProtocolError> {
        if self.phase == expected {
            Ok(())
        } else {
            Err(ProtocolError::InvalidTransition {
                id: self.id,
                action,
                phase: self.phase,
            })
        }
    }

    pub(crate) fn start_attempt(&mut self, at: SimTime) {
        self.attempt_started = Some(at);
        self.round_start.get_or_insert(at);
    }

    /// Resolves one distant attempt on the first link. On success the
    /// heralded `[client, electron]` pair is created and the swap begins.
    pub fn attempt_distant(
        &mut self,
        link: &LinkModel,
        stream: &mut RandomStream,
        now: SimTime,
        flight: f64,
        noise: &NoiseModel,
    ) -> Result<bool, ProtocolError> {
        self.guard(Phase::IdleAttemptingDistant, "attempt distant entanglement")?;
        debug_assert!(self.stored.is_none());
        self.distant_attempts += 1;
        if !stream.bernoulli(link.p_success) {
            return Ok(false);
        }
        self.broker = Some(StoredPair::heralded(link, now, flight, noise)?);
        self.herald_time = now;
        self.attempt_started = None;
        self.phase = Phase::SwappingToNuclear;
        Ok(true)
    }

    /// Moves the heralded entanglement from the electron to the nuclear spin.
    pub fn swap_to_nuclear(
        &mut self,
        now: SimTime,
        architecture: Architecture,
        noise: &NoiseModel,
    ) -> Result<(), ProtocolError> {
        self.guard(Phase::SwappingToNuclear, "swap to the nuclear spin")?;
        let mut pair = self
            .broker
            .take()
            .ok_or(ProtocolError::MissingState(self.id))?;
        pair.advance(now, noise)?;
        pair.rho = pair.rho.apply_channel(&[0, 1], &noise.swap)?;
        pair.memory = MemoryRole::Nuclear;
        self.stored = Some(pair);
        self.success_time = now;
        self.attempts_while_stored = 0;
        self.phase = match architecture {
            Architecture::Router => Phase::AwaitingPair,
            Architecture::Routerless => Phase::AttemptingSecondSide,
        };
        Ok(())
    }

    /// Routerless only: one attempt on the second link while the nucleus
    /// stores the first. Returns the heralded `[client, electron]` pair on success.
    pub fn attempt_second_side(
        &mut self,
        link: &LinkModel,
        stream: &mut RandomStream,
        now: SimTime,
        flight: f64,
        noise: &NoiseModel,
    ) -> Result<Option<StoredPair>, ProtocolError> {
        self.guard(Phase::AttemptingSecondSide, "attempt the second link")?;
        let stored = self
            .stored
            .as_mut()
            .ok_or(ProtocolError::MissingState(self.id))?;
        stored.advance(now, noise)?;
        stored.apply_attempt_noise(noise)?;
        self.attempts_while_stored += 1;
        if !stream.bernoulli(link.p_success) {
            return Ok(None);
        }
        self.attempt_started = None;
        self.phase = Phase::Delivering;
        Ok(Some(StoredPair::heralded(link, now, flight, noise)?))
    }

    pub(crate) fn begin_local(&mut self, partner: usize) {
        self.partner = Some(partner);
        self.phase = Phase::AttemptingLocal;
    }

    /// Returns the register to distant attempts after its Bell measurement.
    pub fn reset(&mut self) -> Result<(), ProtocolError> {
        self.guard(Phase::Delivering, "reset")?;
        *self = QubitRegister::new(self.id, self.bank);
        Ok(())
    }
}

fn two_mut<T>(items: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert_ne!(a, b);
    if a < b {
        let (lo, hi) = items.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = items.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}

/// One local attempt between paired registers. Both stored states are
/// brought up to `now`, then the attempt noise hits the left nucleus, and
/// the right one too when `noise.both_nuclei` is set.
pub fn attempt_local(
    regs: &mut [QubitRegister],
    pair: (usize, usize),
    link: &LinkModel,
    stream: &mut RandomStream,
    now: SimTime,
    noise: &NoiseModel,
) -> Result<bool, ProtocolError> {
    let (left, right) = two_mut(regs, pair.0, pair.1);
    if left.partner != Some(right.id) || right.partner != Some(left.id) {
        return Err(ProtocolError::NotPaired(pair.0, pair.1));
    }
    for (i, reg) in [left, right].into_iter().enumerate() {
        reg.guard(Phase::AttemptingLocal, "attempt local entanglement")?;
        let stored = reg
            .stored
            .as_mut()
            .ok_or(ProtocolError::MissingState(reg.id))?;
        stored.advance(now, noise)?;
        if i == 0 || noise.both_nuclei {
            stored.apply_attempt_noise(noise)?;
        }
        reg.attempts_while_stored += 1;
    }
    let success = stream.bernoulli(link.p_success);
    if success {
        let (left, right) = two_mut(regs, pair.0, pair.1);
        left.phase = Phase::Delivering;
        right.phase = Phase::Delivering;
    }
    Ok(success)
}
