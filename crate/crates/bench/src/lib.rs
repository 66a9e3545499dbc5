//! Fixtures shared by the criterion benchmarks in `benches/`.

use qrouter::config::{Architecture, SimConfig};
use qrouter::qstate::{bell_state, BellOutcome, DensityMatrix};

pub const BENCH_SEED: u64 = 1729;

/// Default-noise configuration stopped after `n_pairs` deliveries.
pub fn bench_config(architecture: Architecture, m: u32, n_pairs: u64) -> SimConfig {
    let mut c = SimConfig::defaults(architecture, m, BENCH_SEED);
    c.n_pairs = Some(n_pairs);
    c
}

/// Two Phi+ pairs side by side, the input of every entanglement swap.
pub fn swap_input() -> DensityMatrix {
    let phi = bell_state(BellOutcome::PhiPlus);
    phi.tensor(&phi).expect("four qubits fit")
}
