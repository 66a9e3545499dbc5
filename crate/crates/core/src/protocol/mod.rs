//! Repeater protocols: register state machines, FIFO pairing, and the
//! routerless and router orchestrators.

mod delivery;
mod link;
mod pairing;
mod register;
mod sim;

use thiserror::Error;

pub use delivery::{
    complete_router_delivery, complete_routerless_delivery, noisy_bell_measurement, ClientWait,
    MeasurementSite,
};
pub use link::{HeraldedState, LinkModel};
pub use pairing::{pair_fifo, PairingQueue};
pub use register::{attempt_local, Bank, MemoryRole, NoiseModel, Phase, QubitRegister, StoredPair};
pub use sim::{run_architecture, SimOutcome, Simulation};

use crate::config::{Architecture, ConfigError};
use crate::engine::{EngineError, SimTime};
use crate::noise::NoiseError;
use crate::qstate::QStateError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("register {id}: cannot {action} in phase {phase:?}")]
    InvalidTransition {
        id: usize,
        action: &'static str,
        phase: Phase,
    },
    #[error("registers {0} and {1} are not paired with each other")]
    NotPaired(usize, usize),
    #[error("register {0} holds no stored entanglement")]
    MissingState(usize),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    State(#[from] QStateError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// One delivered Alice-Bob pair.
#[derive(Clone, Debug, PartialEq)]
pub struct DeliveryRecord {
    pub architecture: Architecture,
    /// Time the clients hold the corrected pair.
    pub completion_time: SimTime,
    /// Fidelity to Phi+.
    pub fidelity: f64,
    /// Cycles the left (or only) stored qubit waited for the complementary link:
    /// until pairing for the router, until the second herald without one.
    pub idle_cycles_left: f64,
    pub idle_cycles_right: f64,
    /// Electron attempts made by a register while its nuclear spin held entanglement.
    pub stored_attempts: u32,
    /// Attempt-noise applications recorded on the left and right stored states.
    pub noise_applications: [u32; 2],
    /// Distant cycles from the start of the round until both links were heralded
    /// (router) or until the first link was heralded (routerless).
    pub first_stage_cycles: f64,
    pub registers: (usize, Option<usize>),
    /// Storage start times of the left and right registers.
    pub success_times: (SimTime, Option<SimTime>),
    /// Position in the FIFO pairing order (router only).
    pub pair_index: Option<u64>,
}
