use crate::qstate::{bell_state, BellOutcome, DensityMatrix};

/// The two-qubit state produced by a successful herald, after the local
/// frame correction that maps every herald pattern onto Phi+.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HeraldedState {
    PhiPlus,
    /// `F |Phi+><Phi+| + (1-F)/3` times the other three Bell states.
    Werner {
        fidelity: f64,
    },
}

impl HeraldedState {
    pub fn state(&self) -> DensityMatrix {
        match *self {
            HeraldedState::PhiPlus => bell_state(BellOutcome::PhiPlus),
            HeraldedState::Werner { fidelity } => {
                let weights = [
                    fidelity,
                    (1.0 - fidelity) / 3.0,
                    (1.0 - fidelity) / 3.0,
                    (1.0 - fidelity) / 3.0,
                ];
                let mut data = vec![num_complex::Complex64::new(0.0, 0.0); 16];
                for (w, o) in weights.iter().zip(BellOutcome::ALL) {
                    for (d, s) in data.iter_mut().zip(bell_state(o).as_slice()) {
                        *d += s * *w;
                    }
                }
                DensityMatrix::from_matrix(2, data).expect("Werner state is valid")
            }
        }
    }
}

/// Success probability, attempt period, and herald state of one link.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkModel {
    pub p_success: f64,
    /// Seconds per attempt.
    pub attempt_period: f64,
    pub heralded: HeraldedState,
}

impl LinkModel {
    pub fn new(p_success: f64, attempt_period: f64) -> Self {
        assert!(
            p_success > 0.0 && p_success <= 1.0,
            "p_success {p_success} outside (0, 1]"
        );
        assert!(attempt_period > 0.0, "attempt period must be positive");
        Self {
            p_success,
            attempt_period,
            heralded: HeraldedState::PhiPlus,
        }
    }

    pub fn herald_state(&self) -> DensityMatrix {
        self.heralded.state()
    }
}
