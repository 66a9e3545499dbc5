use num_complex::Complex64;
use proptest::prelude::*;
use qrouter::noise::{
    attempt_noise_channel, decoherence_channel, gate_noise_channel, AttemptNoiseParams,
    CoherenceParams,
};
use qrouter::qstate::{bell_state, BellOutcome, DensityMatrix};

fn amplitudes(n_qubits: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n_qubits).prop_filter_map(
        "nonzero vector",
        |v| {
            let norm = v.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
            (norm > 1e-3).then(|| {
                v.iter()
                    .map(|&(a, b)| Complex64::new(a / norm, b / norm))
                    .collect()
            })
        },
    )
}

fn mixed(n_qubits: usize) -> impl Strategy<Value = DensityMatrix> {
    (amplitudes(n_qubits), amplitudes(n_qubits), 0.0f64..1.0).prop_map(|(a, b, w)| {
        let a = DensityMatrix::from_pure(&a).unwrap();
        let b = DensityMatrix::from_pure(&b).unwrap();
        let data = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| x * w + y * (1.0 - w))
            .collect();
        DensityMatrix::from_matrix(a.n_qubits(), data).unwrap()
    })
}

fn assert_physical(rho: &DensityMatrix) {
    assert!(
        (rho.trace().re - 1.0).abs() < 1e-10,
        "trace {}",
        rho.trace()
    );
    assert!(rho.hermiticity_error() < 1e-10);
    assert!(
        rho.min_eigenvalue() > -1e-10,
        "eigenvalue {}",
        rho.min_eigenvalue()
    );
}

proptest! {
    #[test]
    fn decoherence_keeps_states_physical(
        rho in mixed(2),
        t1 in 0.01f64..10.0,
        ratio in 0.01f64..2.0,
        t in 0.0f64..5.0,
        target in 0usize..2,
    ) {
        let params = CoherenceParams::new(t1, ratio * t1).unwrap();
        let out = rho.apply_channel(&[target], &decoherence_channel(t, &params).unwrap()).unwrap();
        assert_physical(&out);
    }

    #[test]
    fn decoherence_composes_over_time(rho in mixed(1), t1 in 0.1f64..5.0, ratio in 0.05f64..2.0, s in 0.0f64..2.0, t in 0.0f64..2.0) {
        let params = CoherenceParams::new(t1, ratio * t1).unwrap();
        let step = |r: &DensityMatrix, dt| r.apply_channel(&[0], &decoherence_channel(dt, &params).unwrap()).unwrap();
        let two = step(&step(&rho, s), t);
        let one = step(&rho, s + t);
        prop_assert!(two.max_abs_diff(&one) < 1e-12);
    }

    #[test]
    fn attempt_and_gate_noise_keep_states_physical(rho in mixed(2), a in 0.0f64..0.3, b in 0.0f64..0.3, p in 0.0f64..1.0) {
        let attempt = attempt_noise_channel(&AttemptNoiseParams::new(a, b).unwrap());
        assert_physical(&rho.apply_channel(&[1], &attempt).unwrap());
        assert_physical(&rho.apply_channel(&[0, 1], &gate_noise_channel(p, 2).unwrap()).unwrap());
    }

    #[test]
    fn bell_branches_partition_probability(rho in mixed(3)) {
        let total: f64 = BellOutcome::ALL
            .iter()
            .map(|&o| rho.bell_projection((0, 1), o).unwrap().0)
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn corrected_swap_restores_phi_plus(first in 0usize..4, second in 0usize..4) {
        let phi = bell_state(BellOutcome::PhiPlus);
        let (o1, o2) = (BellOutcome::ALL[first], BellOutcome::ALL[second]);
        let (p1, ab) = phi.tensor(&phi).unwrap().bell_projection((1, 2), o1).unwrap();
        prop_assert!((p1 - 0.25).abs() < 1e-12);
        let ab = ab.pauli_correct(1, o1).unwrap();
        prop_assert!((ab.fidelity(&phi).unwrap() - 1.0).abs() < 1e-12);
        let (p2, ac) = ab.tensor(&phi).unwrap().bell_projection((1, 2), o2).unwrap();
        prop_assert!((p2 - 0.25).abs() < 1e-12);
        prop_assert!((ac.pauli_correct(1, o2).unwrap().fidelity(&phi).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn long_storage_relaxes_to_ground() {
    let params = CoherenceParams::new(1.0, 0.5).unwrap();
    let plus = DensityMatrix::from_pure(&[
        Complex64::new(0.5f64.sqrt(), 0.0),
        Complex64::new(0.5f64.sqrt(), 0.0),
    ])
    .unwrap();
    let out = plus
        .apply_channel(&[0], &decoherence_channel(60.0, &params).unwrap())
        .unwrap();
    assert!(out.max_abs_diff(&DensityMatrix::basis(1, 0)) < 1e-12);
}
