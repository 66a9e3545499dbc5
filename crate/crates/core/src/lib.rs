//! Discrete-event simulation of multiplexed quantum repeaters, with and
//! without a photonic router between the memory registers.

pub mod config;
pub mod engine;
pub mod fabric;
pub mod harness;
pub mod noise;
pub mod oracle;
pub mod plot;
pub mod protocol;
pub mod qstate;
pub mod rng;
pub mod stats;

pub use config::{parse_config, Architecture, ConfigError, SimConfig};
pub use engine::{EventAudit, Scheduler, SimTime};
pub use harness::{run_point, sweep, SummaryRow, SweepGrid};
pub use protocol::{run_architecture, DeliveryRecord, SimOutcome};
pub use qstate::{BellOutcome, DensityMatrix};
pub use rng::{derive_seed, RandomStream};
