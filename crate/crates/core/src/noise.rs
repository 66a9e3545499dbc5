//! Noise channels acting on register qubits.
//!
//! * memory decoherence: amplitude damping toward |0> at rate `1/T1` composed
//!   with pure dephasing so that coherences decay as `exp(-t/T2)`;
//! * per-attempt noise on a stored nuclear spin:
//!   `rho -> (1-a-b) rho + a Z rho Z + b I/2`;
//! * depolarizing gate noise and classical readout flips.

use thiserror::Error;

use crate::qstate::{BellOutcome, KrausChannel, Pauli, QStateError, C64};
use crate::rng::RandomStream;

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("coherence times must be positive (T1 = {t1}, T2 = {t2})")]
    NonPositiveCoherence { t1: f64, t2: f64 },
    #[error("T2 = {t2} exceeds 2*T1 = {}; the decoherence map would not be completely positive", 2.0 * t1)]
    NotCompletelyPositive { t1: f64, t2: f64 },
    #[error("{name} = {value} is not a probability")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("attempt noise a + b = {0} exceeds 1")]
    AttemptNoiseTooLarge(f64),
    #[error("negative elapsed time {0}")]
    NegativeTime(f64),
    #[error(transparent)]
    State(#[from] QStateError),
}

fn check_prob(name: &'static str, value: f64) -> Result<f64, NoiseError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(NoiseError::InvalidProbability { name, value })
    }
}

/// Memory coherence times in seconds. `f64::INFINITY` disables a decay term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherenceParams {
    pub t1: f64,
    pub t2: f64,
}

impl CoherenceParams {
    pub fn new(t1: f64, t2: f64) -> Result<Self, NoiseError> {
        if t1.is_nan() || t2.is_nan() || t1 <= 0.0 || t2 <= 0.0 {
            return Err(NoiseError::NonPositiveCoherence { t1, t2 });
        }
        if t2 > 2.0 * t1 {
            return Err(NoiseError::NotCompletelyPositive { t1, t2 });
        }
        Ok(Self { t1, t2 })
    }

    pub const fn ideal() -> Self {
        Self {
            t1: f64::INFINITY,
            t2: f64::INFINITY,
        }
    }

    pub fn is_ideal(&self) -> bool {
        self.t1.is_infinite() && self.t2.is_infinite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttemptNoiseParams {
    /// Dephasing probability per attempt.
    pub a: f64,
    /// Depolarizing probability per attempt.
    pub b: f64,
}

impl AttemptNoiseParams {
    pub fn new(a: f64, b: f64) -> Result<Self, NoiseError> {
        check_prob("a", a)?;
        check_prob("b", b)?;
        if a + b > 1.0 {
            return Err(NoiseError::AttemptNoiseTooLarge(a + b));
        }
        Ok(Self { a, b })
    }

    pub fn none() -> Self {
        Self { a: 0.0, b: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpNoiseParams {
    /// Two-qubit depolarizing probability of the gate preceding each Bell measurement.
    pub p_gate: f64,
    /// Independent flip probability of each classical readout bit.
    pub eps_ro: f64,
    /// Two-qubit depolarizing probability of the electron-to-nuclear swap.
    pub p_swap: f64,
}

impl OpNoiseParams {
    pub fn new(p_gate: f64, eps_ro: f64, p_swap: f64) -> Result<Self, NoiseError> {
        Ok(Self {
            p_gate: check_prob("p_gate", p_gate)?,
            eps_ro: check_prob("eps_ro", eps_ro)?,
            p_swap: check_prob("p_swap", p_swap)?,
        })
    }

    pub fn none() -> Self {
        Self {
            p_gate: 0.0,
            eps_ro: 0.0,
            p_swap: 0.0,
        }
    }
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Single-qubit decoherence accumulated over `t` seconds.
pub fn decoherence_channel(t: f64, params: &CoherenceParams) -> Result<KrausChannel, NoiseError> {
    if t.is_nan() || t < 0.0 {
        return Err(NoiseError::NegativeTime(t));
    }
    if params.t2 > 2.0 * params.t1 {
        return Err(NoiseError::NotCompletelyPositive {
            t1: params.t1,
            t2: params.t2,
        });
    }
    let survive = (-t / params.t1).exp();
    let gamma = 1.0 - survive;
    // Amplitude damping alone scales coherences by sqrt(survive); dephasing supplies the rest.
    let mut lambda = (-t / params.t2 + t / (2.0 * params.t1)).exp();
    if lambda > 1.0 {
        if lambda - 1.0 > 1e-12 {
            return Err(NoiseError::NotCompletelyPositive {
                t1: params.t1,
                t2: params.t2,
            });
        }
        lambda = 1.0;
    }
    let zero = real(0.0);
    let amp = [
        vec![real(1.0), zero, zero, real(survive.sqrt())],
        vec![zero, real(gamma.sqrt()), zero, zero],
    ];
    let keep = ((1.0 + lambda) / 2.0).sqrt();
    let flip = ((1.0 - lambda) / 2.0).sqrt();
    let mut ops = Vec::with_capacity(4);
    for a in &amp {
        // I * A and Z * A (Z negates the second row).
        let ia: Vec<C64> = a.iter().map(|x| x * keep).collect();
        let za = vec![a[0] * flip, a[1] * flip, -a[2] * flip, -a[3] * flip];
        for op in [ia, za] {
            if op.iter().any(|x| x.norm() > 0.0) {
                ops.push(op);
            }
        }
    }
    Ok(KrausChannel::new(1, ops)?)
}

/// Noise inflicted on a stored nuclear spin by one electron excitation.
pub fn attempt_noise_channel(params: &AttemptNoiseParams) -> KrausChannel {
    let AttemptNoiseParams { a, b } = *params;
    // b I/2 == b/4 (rho + X rho X + Y rho Y + Z rho Z)
    KrausChannel::pauli_mixture(&[
        (1.0 - a - 0.75 * b, &[Pauli::I]),
        (0.25 * b, &[Pauli::X]),
        (0.25 * b, &[Pauli::Y]),
        (a + 0.25 * b, &[Pauli::Z]),
    ])
    .expect("attempt noise weights are validated")
}

/// Depolarizing channel `rho -> (1-p) rho + p I/2^arity` on `arity` qubits.
pub fn gate_noise_channel(p: f64, arity: usize) -> Result<KrausChannel, NoiseError> {
    check_prob("p", p)?;
    const PAULIS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    let n = 4usize.pow(arity as u32);
    let strings: Vec<Vec<Pauli>> = (0..n)
        .map(|mut idx| {
            let mut s = vec![Pauli::I; arity];
            for slot in s.iter_mut().rev() {
                *slot = PAULIS[idx % 4];
                idx /= 4;
            }
            s
        })
        .collect();
    let share = p / n as f64;
    let terms: Vec<(f64, &[Pauli])> = strings
        .iter()
        .enumerate()
        .map(|(i, s)| (if i == 0 { 1.0 - p + share } else { share }, s.as_slice()))
        .collect();
    Ok(KrausChannel::pauli_mixture(&terms)?)
}

/// Flips each of the two classical bits of a Bell outcome with probability `eps`.
/// Always consumes exactly two draws from `stream`.
pub fn flip_outcome(outcome: BellOutcome, eps: f64, stream: &mut RandomStream) -> BellOutcome {
    let (x, z) = outcome.bits();
    let fx = stream.bernoulli(eps);
    let fz = stream.bernoulli(eps);
    BellOutcome::from_bits(x ^ fx, z ^ fz)
}
