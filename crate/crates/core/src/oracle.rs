//! Closed-form reference values and the scenario runner that compares the
//! simulator against them.

use std::fmt;

use thiserror::Error;

use crate::config::{Architecture, CoherenceSet, SimConfig};
use crate::harness::{delivery_idle_cycles, run_once, HarnessError};
use crate::noise::{AttemptNoiseParams, OpNoiseParams};
use crate::protocol::{DeliveryRecord, Side};
use crate::qstate::{bell_state, BellOutcome, DensityMatrix};
use crate::stats::{mean, sem, z_score};

/// `E[max(G1, G2)]` for independent geometric variables on `{1, 2, ...}`.
pub fn expected_max_geometric(p1: f64, p2: f64) -> f64 {
    1.0 / p1 + 1.0 / p2 - 1.0 / (p1 + p2 - p1 * p2)
}

/// `E[|G1 - G2|]` for independent geometric variables.
pub fn expected_mismatch(p1: f64, p2: f64) -> f64 {
    2.0 * expected_max_geometric(p1, p2) - 1.0 / p1 - 1.0 / p2
}

/// `E[exp(-c G)]` for geometric `G` with success probability `p`.
pub fn geometric_exp_average(p: f64, c: f64) -> f64 {
    let e = (-c).exp();
    p * e / (1.0 - (1.0 - p) * e)
}

/// Fidelity of Phi+ after `n` applications of the attempt-noise channel,
/// anywhere along a chain of ideal swaps. Pauli errors on any link of the
/// chain compose on the final pair, so the state stays Bell-diagonal and
/// its weights evolve linearly.
pub fn attempt_noise_fidelity(params: &AttemptNoiseParams, n: u32) -> f64 {
    let AttemptNoiseParams { a, b } = *params;
    // Weights over (I, X, Y, Z); composing two Paulis is XOR of their
    // (x, z) bits: I=(0,0), X=(1,0), Y=(1,1), Z=(0,1).
    let step = [1.0 - a - 0.75 * b, 0.25 * b, 0.25 * b, a + 0.25 * b];
    let bits = [(0u8, 0u8), (1, 0), (1, 1), (0, 1)];
    let index = |x: u8, z: u8| {
        bits.iter()
            .position(|&v| v == (x, z))
            .expect("all four patterns listed")
    };
    let mut w = [1.0, 0.0, 0.0, 0.0];
    for _ in 0..n {
        let mut next = [0.0; 4];
        for (i, wi) in w.iter().enumerate() {
            for (j, sj) in step.iter().enumerate() {
                next[index(bits[i].0 ^ bits[j].0, bits[i].1 ^ bits[j].1)] += wi * sj;
            }
        }
        w = next;
    }
    w[0]
}

/// Mean router fidelity when the only noise is readout flips with
/// probability `eps` on each of the four reported bits, found by running an
/// ideal double swap under every one of the 16 flip patterns.
pub fn readout_mixture_fidelity(eps: f64) -> f64 {
    let phi = bell_state(BellOutcome::PhiPlus);
    let mut total = 0.0;
    for pattern in 0u32..16 {
        let flips: Vec<bool> = (0..4).map(|k| pattern & (1 << k) != 0).collect();
        let k = flips.iter().filter(|&&f| f).count() as i32;
        let weight = eps.powi(k) * (1.0 - eps).powi(4 - k);
        if weight == 0.0 {
            continue;
        }
        // Average over the true outcomes of both measurements.
        let mut f = 0.0;
        for first in BellOutcome::ALL {
            for second in BellOutcome::ALL {
                f += 0.0625 * double_swap_fidelity(&phi, first, second, &flips);
            }
        }
        total += weight * f;
    }
    total
}

fn flip(o: BellOutcome, fx: bool, fz: bool) -> BellOutcome {
    let (x, z) = o.bits();
    BellOutcome::from_bits(x ^ fx, z ^ fz)
}

fn double_swap_fidelity(
    phi: &DensityMatrix,
    first: BellOutcome,
    second: BellOutcome,
    flips: &[bool],
) -> f64 {
    let rho = phi.tensor(phi).expect("4 qubits");
    let (p1, a_er) = rho.bell_projection((1, 2), first).expect("valid pair");
    if p1 <= 0.0 {
        return 0.0;
    }
    let a_er = a_er
        .pauli_correct(1, flip(first, flips[0], flips[1]))
        .expect("qubit 1");
    let rho = a_er.tensor(phi).expect("4 qubits");
    let (p2, ab) = rho.bell_projection((1, 2), second).expect("valid pair");
    if p2 <= 0.0 {
        return 0.0;
    }
    let ab = ab
        .pauli_correct(1, flip(second, flips[2], flips[3]))
        .expect("qubit 1");
    // Every outcome has probability 1/4, so the uniform average above is exact.
    ab.fidelity(phi).expect("two qubits")
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("unknown oracle scenario `{0}` (known: {known})", known = SCENARIOS.join(", "))]
    UnknownScenario(String),
    #[error("scenario `{scenario}` needs {requirement}")]
    Unsupported {
        scenario: &'static str,
        requirement: String,
    },
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
}

pub const SCENARIOS: [&str; 7] = [
    "order-statistic",
    "mismatch-idle",
    "geometric-attempts",
    "dephasing-average",
    "bell-recursion",
    "readout-mixture",
    "teleportation",
];

/// One compared quantity.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleCheck {
    pub quantity: String,
    pub observed: f64,
    pub expected: f64,
    /// Standard error of `observed`; zero for exact comparisons.
    pub sigma: f64,
    pub z: f64,
    /// Largest tolerated `|z|`, or absolute tolerance for exact checks.
    pub tolerance: f64,
    pub passed: bool,
}

impl OracleCheck {
    pub fn statistical(
        quantity: impl Into<String>,
        samples: &[f64],
        expected: f64,
        max_z: f64,
    ) -> Self {
        let observed = mean(samples);
        let sigma = sem(samples);
        let z = z_score(observed, expected, sigma);
        Self {
            quantity: quantity.into(),
            observed,
            expected,
            sigma,
            z,
            tolerance: max_z,
            passed: z.abs() <= max_z,
        }
    }

    pub fn exact(quantity: impl Into<String>, observed: f64, expected: f64, tol: f64) -> Self {
        Self {
            quantity: quantity.into(),
            observed,
            expected,
            sigma: 0.0,
            z: 0.0,
            tolerance: tol,
            passed: (observed - expected).abs() <= tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub scenario: String,
    pub deliveries: usize,
    pub checks: Vec<OracleCheck>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "scenario {} ({} deliveries)",
            self.scenario, self.deliveries
        )?;
        for c in &self.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            if c.sigma > 0.0 || c.z != 0.0 {
                writeln!(
                    f,
                    "  {verdict} {}: observed {:.6} +/- {:.6}, expected {:.6}, z = {:+.3} (limit {})",
                    c.quantity, c.observed, c.sigma, c.expected, c.z, c.tolerance
                )?;
            } else {
                writeln!(
                    f,
                    "  {verdict} {}: observed {:.12}, expected {:.12} (tolerance {:e})",
                    c.quantity, c.observed, c.expected, c.tolerance
                )?;
            }
        }
        write!(
            f,
            "{}",
            if self.passed() {
                "all checks passed"
            } else {
                "oracle mismatch"
            }
        )
    }
}

fn quiet(cfg: &SimConfig) -> SimConfig {
    let mut c = cfg.clone();
    c.coherence = CoherenceSet::ideal();
    c.attempt_noise = AttemptNoiseParams::none();
    c.op_noise = OpNoiseParams::none();
    c.right = c.left;
    c
}

fn collect(cfg: &SimConfig) -> Result<Vec<DeliveryRecord>, OracleError> {
    let (_, outcome) = run_once(cfg, 0)?;
    Ok(outcome.records)
}

/// Applies the overrides a scenario needs to `base`. The link
/// probabilities, lengths, stop rule and seed come from `base`.
pub fn scenario_config(scenario: &str, base: &SimConfig) -> Result<SimConfig, OracleError> {
    let mut c = quiet(base);
    match scenario {
        "order-statistic" | "mismatch-idle" => {
            c.architecture = Architecture::Router;
            c.m = 2;
            c.left_bank = None;
            if scenario == "mismatch-idle" {
                c.links.p_local = Some(1.0);
            }
        }
        "geometric-attempts" => {}
        "dephasing-average" => {
            c.architecture = Architecture::Routerless;
            c.coherence.nuclear = base.coherence.nuclear;
            c.coherence.nuclear.t1 = f64::INFINITY;
            if !c.coherence.nuclear.t2.is_finite() {
                return Err(OracleError::Unsupported {
                    scenario: "dephasing-average",
                    requirement: "a finite coherence.nuclear.T2".into(),
                });
            }
            c.timing.swap = 0.0;
            c.timing.bsm = 0.0;
        }
        "bell-recursion" => {
            c.architecture = Architecture::Router;
            c.attempt_noise = base.attempt_noise;
            c.flags.both_nuclei_attempt_noise = true;
        }
        "readout-mixture" => {
            c.architecture = Architecture::Router;
            c.op_noise.eps_ro = base.op_noise.eps_ro;
        }
        "teleportation" => {}
        other => return Err(OracleError::UnknownScenario(other.to_string())),
    }
    if c.architecture == Architecture::Router && c.m % 2 == 1 {
        c.m += 1;
    }
    c.validate()?;
    Ok(c)
}

/// Runs `scenario` on top of `base` and compares against its closed form.
pub fn oracle_check(scenario: &str, base: &SimConfig) -> Result<OracleReport, OracleError> {
    let cfg = scenario_config(scenario, base)?;
    let recs = collect(&cfg)?;
    let p = cfg.p_distant(Side::Left)?;
    let pl = cfg.p_local()?;
    let mut checks = Vec::new();
    match scenario {
        "order-statistic" => {
            let xs: Vec<f64> = recs.iter().map(|r| r.first_stage_cycles).collect();
            checks.push(OracleCheck::statistical(
                "mean first-stage cycles",
                &xs,
                expected_max_geometric(p, p),
                3.0,
            ));
        }
        "mismatch-idle" => {
            let xs: Vec<f64> = recs.iter().map(delivery_idle_cycles).collect();
            checks.push(OracleCheck::statistical(
                "mean idle cycles",
                &xs,
                expected_mismatch(p, p),
                3.0,
            ));
        }
        "geometric-attempts" => {
            let xs: Vec<f64> = recs.iter().map(|r| r.stored_attempts as f64).collect();
            let expected = match cfg.architecture {
                Architecture::Router => 1.0 / pl,
                Architecture::Routerless => 1.0 / p,
            };
            checks.push(OracleCheck::statistical(
                "mean stored attempts",
                &xs,
                expected,
                3.0,
            ));
        }
        "dephasing-average" => {
            let t2 = cfg.coherence.nuclear.t2;
            let period = crate::engine::SimTime::from_secs(crate::fabric::timings(&cfg.left).0)
                .map_err(|e| OracleError::Unsupported {
                    scenario: "dephasing-average",
                    requirement: e.to_string(),
                })?;
            let rate = period.as_secs() / t2;
            let xs: Vec<f64> = recs.iter().map(|r| r.fidelity).collect();
            let expected = 0.5 * (1.0 + geometric_exp_average(p, rate));
            checks.push(OracleCheck::statistical(
                "mean fidelity",
                &xs,
                expected,
                3.0,
            ));
            let worst = recs
                .iter()
                .map(|r| {
                    (r.fidelity - 0.5 * (1.0 + (-rate * r.stored_attempts as f64).exp())).abs()
                })
                .fold(0.0, f64::max);
            checks.push(OracleCheck::exact(
                "per-delivery deviation from (1+e^-cG)/2",
                worst,
                0.0,
                1e-10,
            ));
        }
        "bell-recursion" => {
            let worst = recs
                .iter()
                .map(|r| {
                    let n = r.noise_applications[0] + r.noise_applications[1];
                    (r.fidelity - attempt_noise_fidelity(&cfg.attempt_noise, n)).abs()
                })
                .fold(0.0, f64::max);
            checks.push(OracleCheck::exact(
                "per-delivery deviation from recursion",
                worst,
                0.0,
                1e-10,
            ));
            let single = attempt_noise_fidelity(&cfg.attempt_noise, 1);
            let one = crate::noise::attempt_noise_channel(&cfg.attempt_noise);
            let direct = bell_state(BellOutcome::PhiPlus)
                .apply_channel(&[1], &one)
                .and_then(|s| s.fidelity(&bell_state(BellOutcome::PhiPlus)))
                .map_err(|e| OracleError::Unsupported {
                    scenario: "bell-recursion",
                    requirement: e.to_string(),
                })?;
            checks.push(OracleCheck::exact(
                "single application fidelity",
                direct,
                single,
                1e-12,
            ));
        }
        "readout-mixture" => {
            let xs: Vec<f64> = recs.iter().map(|r| r.fidelity).collect();
            let expected = readout_mixture_fidelity(cfg.op_noise.eps_ro);
            checks.push(OracleCheck::statistical(
                "mean fidelity",
                &xs,
                expected,
                3.0,
            ));
        }
        "teleportation" => {
            let worst = recs
                .iter()
                .map(|r| (1.0 - r.fidelity).abs())
                .fold(0.0, f64::max);
            checks.push(OracleCheck::exact("worst infidelity", worst, 0.0, 1e-10));
        }
        _ => unreachable!("scenario_config rejects unknown scenarios"),
    }
    Ok(OracleReport {
        scenario: scenario.to_string(),
        deliveries: recs.len(),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_statistic_value() {
        assert!((expected_max_geometric(0.2, 0.2) - 7.222_222_222_222_222).abs() < 1e-12);
        assert!((expected_mismatch(0.2, 0.2) - 4.444_444_444_444_445).abs() < 1e-12);
        assert!((expected_max_geometric(1.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn recursion_single_step() {
        let f = attempt_noise_fidelity(
            &AttemptNoiseParams {
                a: 1.0 / 4000.0,
                b: 1.0 / 5000.0,
            },
            1,
        );
        assert!((f - 0.9996).abs() < 1e-12);
        assert_eq!(
            attempt_noise_fidelity(&AttemptNoiseParams { a: 0.1, b: 0.1 }, 0),
            1.0
        );
    }

    #[test]
    fn readout_mixture_matches_xor_parity() {
        for eps in [0.0, 0.005, 0.05, 0.5] {
            let parity = (1.0 - eps) * (1.0 - eps) + eps * eps;
            assert!((readout_mixture_fidelity(eps) - parity * parity).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_scenario() {
        let base = SimConfig::defaults(Architecture::Router, 2, 1);
        assert!(matches!(
            oracle_check("nope", &base),
            Err(OracleError::UnknownScenario(_))
        ));
    }
}
