//! Dense density matrices for registers of up to four qubits.
//!
//! Qubit 0 is the most significant bit of the basis index, so `a.tensor(&b)`
//! places the qubits of `a` before those of `b`.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::rng::RandomStream;

pub type C64 = Complex64;

pub const MAX_QUBITS: usize = 4;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const TRACE_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-12;
const POSITIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum QStateError {
    #[error("register of {0} qubits exceeds the supported maximum of {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },
    #[error("qubit {0} listed twice")]
    DuplicateTarget(usize),
    #[error("channel acts on {channel} qubits but {targets} targets were given")]
    ArityMismatch { channel: usize, targets: usize },
    #[error("Kraus operators are not complete (deviation {0:e})")]
    IncompleteKraus(f64),
    #[error("state invariant violated: {0}")]
    InvariantViolation(String),
    #[error("Bell measurement needs at least one spectator qubit")]
    NeedsSpectator,
    #[error("sampled a measurement branch with probability {0:e}")]
    ZeroProbabilityBranch(f64),
    #[error("fidelity target is not a pure state (purity {0})")]
    NotPure(f64),
}

/// The four Bell states, also used as Bell-measurement outcomes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BellOutcome {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::PhiPlus,
        BellOutcome::PhiMinus,
        BellOutcome::PsiPlus,
        BellOutcome::PsiMinus,
    ];

    /// The two classical bits `(x, z)` carried by the outcome: `x` selects a
    /// Pauli-X correction, `z` a Pauli-Z correction.
    pub fn bits(self) -> (bool, bool) {
        match self {
            BellOutcome::PhiPlus => (false, false),
            BellOutcome::PsiPlus => (true, false),
            BellOutcome::PhiMinus => (false, true),
            BellOutcome::PsiMinus => (true, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => BellOutcome::PhiPlus,
            (true, false) => BellOutcome::PsiPlus,
            (false, true) => BellOutcome::PhiMinus,
            (true, true) => BellOutcome::PsiMinus,
        }
    }

    /// State vector in the basis |00>, |01>, |10>, |11>.
    pub fn amplitudes(self) -> [C64; 4] {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        match self {
            BellOutcome::PhiPlus => [h, ZERO, ZERO, h],
            BellOutcome::PhiMinus => [h, ZERO, ZERO, -h],
            BellOutcome::PsiPlus => [ZERO, h, h, ZERO],
            BellOutcome::PsiMinus => [ZERO, h, -h, ZERO],
        }
    }
}

impl fmt::Display for BellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BellOutcome::PhiPlus => "Phi+",
            BellOutcome::PhiMinus => "Phi-",
            BellOutcome::PsiPlus => "Psi+",
            BellOutcome::PsiMinus => "Psi-",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> [C64; 4] {
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli::I => [ONE, ZERO, ZERO, ONE],
            Pauli::X => [ZERO, ONE, ONE, ZERO],
            Pauli::Y => [ZERO, -i, i, ZERO],
            Pauli::Z => [ONE, ZERO, ZERO, -ONE],
        }
    }
}

/// Row-major square matrix product of two `d x d` operators.
fn matmul(a: &[C64], b: &[C64], d: usize) -> Vec<C64> {
    let mut out = vec![ZERO; d * d];
    for r in 0..d {
        for k in 0..d {
            let ark = a[r * d + k];
            if ark == ZERO {
                continue;
            }
            for c in 0..d {
                out[r * d + c] += ark * b[k * d + c];
            }
        }
    }
    out
}

fn kron(a: &[C64], da: usize, b: &[C64], db: usize) -> Vec<C64> {
    let d = da * db;
    let mut out = vec![ZERO; d * d];
    for ar in 0..da {
        for ac in 0..da {
            let x = a[ar * da + ac];
            if x == ZERO {
                continue;
            }
            for br in 0..db {
                for bc in 0..db {
                    out[(ar * db + br) * d + ac * db + bc] = x * b[br * db + bc];
                }
            }
        }
    }
    out
}

/// A completely positive trace-preserving map given by Kraus operators.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    arity: usize,
    ops: Vec<Vec<C64>>,
}

impl KrausChannel {
    /// Builds a channel from row-major `2^arity x 2^arity` operators and checks
    /// completeness `sum K^dag K = I` to 1e-10.
    pub fn new(arity: usize, ops: Vec<Vec<C64>>) -> Result<Self, QStateError> {
        if arity == 0 || arity > MAX_QUBITS {
            return Err(QStateError::TooManyQubits(arity));
        }
        let d = 1 << arity;
        let mut sum = vec![ZERO; d * d];
        for k in &ops {
            assert_eq!(k.len(), d * d, "Kraus operator has wrong dimension");
            for r in 0..d {
                for c in 0..d {
                    let mut acc = ZERO;
                    for j in 0..d {
                        acc += k[j * d + r].conj() * k[j * d + c];
                    }
                    sum[r * d + c] += acc;
                }
            }
        }
        let mut dev: f64 = 0.0;
        for r in 0..d {
            for c in 0..d {
                let expect = if r == c { ONE } else { ZERO };
                dev = dev.max((sum[r * d + c] - expect).norm());
            }
        }
        if dev > TRACE_TOL {
            return Err(QStateError::IncompleteKraus(dev));
        }
        Ok(Self { arity, ops })
    }

    pub fn identity(arity: usize) -> Self {
        let d = 1 << arity;
        let mut id = vec![ZERO; d * d];
        for i in 0..d {
            id[i * d + i] = ONE;
        }
        Self {
            arity,
            ops: vec![id],
        }
    }

    /// Mixture of Pauli strings: `rho -> sum_i w_i P_i rho P_i`.
    pub fn pauli_mixture(terms: &[(f64, &[Pauli])]) -> Result<Self, QStateError> {
        let arity = terms.first().map(|t| t.1.len()).unwrap_or(1);
        let mut ops = Vec::with_capacity(terms.len());
        for &(w, paulis) in terms {
            assert_eq!(paulis.len(), arity);
            if w < 0.0 {
                return Err(QStateError::InvariantViolation(format!(
                    "negative Pauli weight {w}"
                )));
            }
            if w == 0.0 {
                continue;
            }
            let mut m = vec![ONE];
            let mut dim = 1;
            for p in paulis {
                m = kron(&m, dim, &p.matrix(), 2);
                dim *= 2;
            }
            let s = w.sqrt();
            ops.push(m.into_iter().map(|x| x * s).collect());
        }
        Self::new(arity, ops)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn operators(&self) -> &[Vec<C64>] {
        &self.ops
    }

    /// `other` applied after `self`, on the same targets.
    pub fn then(&self, other: &KrausChannel) -> Result<KrausChannel, QStateError> {
        if self.arity != other.arity {
            return Err(QStateError::ArityMismatch {
                channel: other.arity,
                targets: self.arity,
            });
        }
        let d = 1 << self.arity;
        let mut ops = Vec::with_capacity(self.ops.len() * other.ops.len());
        for b in &other.ops {
            for a in &self.ops {
                ops.push(matmul(b, a, d));
            }
        }
        KrausChannel::new(self.arity, ops)
    }
}

/// Precomputed index bookkeeping for an operator acting on `targets`.
struct TargetMap {
    /// For each basis index: (index with target bits cleared, target sub-index).
    split: Vec<(usize, usize)>,
    /// For each target sub-index: the bits it sets in a full index.
    spread: Vec<usize>,
}

impl TargetMap {
    fn new(n_qubits: usize, targets: &[usize]) -> Self {
        let d = 1 << n_qubits;
        let k = targets.len();
        let masks: Vec<usize> = targets.iter().map(|&t| 1 << (n_qubits - 1 - t)).collect();
        let clear: usize = masks.iter().sum();
        let spread: Vec<usize> = (0..1usize << k)
            .map(|s| {
                (0..k)
                    .filter(|&j| s & (1 << (k - 1 - j)) != 0)
                    .map(|j| masks[j])
                    .sum()
            })
            .collect();
        let split = (0..d)
            .map(|x| {
                let sub = (0..k)
                    .filter(|&j| x & masks[j] != 0)
                    .map(|j| 1 << (k - 1 - j))
                    .sum();
                (x & !clear, sub)
            })
            .collect();
        Self { split, spread }
    }
}

/// Density matrix over 1 to 4 qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    fn dim_of(n: usize) -> usize {
        1 << n
    }

    /// Builds `|psi><psi|` from an amplitude vector of length `2^n`.
    pub fn from_pure(amps: &[C64]) -> Result<Self, QStateError> {
        let d = amps.len();
        if !d.is_power_of_two() || d < 2 {
            return Err(QStateError::InvariantViolation(format!(
                "vector length {d}"
            )));
        }
        let n = d.trailing_zeros() as usize;
        if n > MAX_QUBITS {
            return Err(QStateError::TooManyQubits(n));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let mut data = vec![ZERO; d * d];
        for r in 0..d {
            for c in 0..d {
                data[r * d + c] = amps[r] * amps[c].conj() / norm;
            }
        }
        Ok(Self { n_qubits: n, data })
    }

    /// Builds a state from a row-major matrix, validating all invariants.
    pub fn from_matrix(n_qubits: usize, data: Vec<C64>) -> Result<Self, QStateError> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(QStateError::TooManyQubits(n_qubits));
        }
        let d = Self::dim_of(n_qubits);
        if data.len() != d * d {
            return Err(QStateError::InvariantViolation(format!(
                "expected {} entries, got {}",
                d * d,
                data.len()
            )));
        }
        let rho = Self { n_qubits, data };
        rho.validate()?;
        Ok(rho)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let d = Self::dim_of(n_qubits);
        let mut data = vec![ZERO; d * d];
        data[index * d + index] = ONE;
        Self { n_qubits, data }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = Self::dim_of(n_qubits);
        let mut data = vec![ZERO; d * d];
        for i in 0..d {
            data[i * d + i] = C64::new(1.0 / d as f64, 0.0);
        }
        Self { n_qubits, data }
    }

    pub fn bell(kind: BellOutcome) -> Self {
        Self::from_pure(&kind.amplitudes()).expect("Bell vectors are valid")
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        Self::dim_of(self.n_qubits)
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim() + c]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn trace(&self) -> C64 {
        let d = self.dim();
        (0..d).map(|i| self.data[i * d + i]).sum()
    }

    /// Largest entry-wise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut e: f64 = 0.0;
        for r in 0..d {
            for c in r..d {
                e = e.max((self.data[r * d + c] - self.data[c * d + r].conj()).norm());
            }
        }
        e
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let d = self.dim();
        let m = DMatrix::from_row_slice(d, d, &self.data);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Number of eigenvalues above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues().iter().filter(|&&x| x > tol).count()
    }

    pub fn purity(&self) -> f64 {
        let d = self.dim();
        let mut p = 0.0;
        for r in 0..d {
            for c in 0..d {
                p += (self.data[r * d + c] * self.data[c * d + r]).re;
            }
        }
        p
    }

    /// Checks Hermiticity, unit trace, and positivity.
    pub fn validate(&self) -> Result<(), QStateError> {
        let h = self.hermiticity_error();
        if h > HERMITIAN_TOL {
            return Err(QStateError::InvariantViolation(format!(
                "not Hermitian ({h:e})"
            )));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(QStateError::InvariantViolation(format!("trace {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(QStateError::InvariantViolation(format!(
                "eigenvalue {min:e}"
            )));
        }
        Ok(())
    }

    /// Maximum entry-wise distance to another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        assert_eq!(self.n_qubits, other.n_qubits);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix, QStateError> {
        let n = self.n_qubits + other.n_qubits;
        if n > MAX_QUBITS {
            return Err(QStateError::TooManyQubits(n));
        }
        Ok(DensityMatrix {
            n_qubits: n,
            data: kron(&self.data, self.dim(), &other.data, other.dim()),
        })
    }

    fn check_targets(&self, targets: &[usize]) -> Result<(), QStateError> {
        for (i, &t) in targets.iter().enumerate() {
            if t >= self.n_qubits {
                return Err(QStateError::QubitOutOfRange {
                    index: t,
                    n_qubits: self.n_qubits,
                });
            }
            if targets[..i].contains(&t) {
                return Err(QStateError::DuplicateTarget(t));
            }
        }
        Ok(())
    }

    /// `K rho K^dag` accumulated into `out`, with `K` acting on the mapped targets.
    fn accumulate_conjugation(&self, map: &TargetMap, k: &[C64], out: &mut [C64]) {
        let d = self.dim();
        let sd = map.spread.len();
        // left = K rho
        let mut left = vec![ZERO; d * d];
        for x in 0..d {
            let (base, sub) = map.split[x];
            let krow = &k[sub * sd..(sub + 1) * sd];
            for (s, &kv) in krow.iter().enumerate() {
                if kv == ZERO {
                    continue;
                }
                let src = (base | map.spread[s]) * d;
                for y in 0..d {
                    left[x * d + y] += kv * self.data[src + y];
                }
            }
        }
        // out += left K^dag
        for y in 0..d {
            let (base, sub) = map.split[y];
            let krow = &k[sub * sd..(sub + 1) * sd];
            for (s, &kv) in krow.iter().enumerate() {
                if kv == ZERO {
                    continue;
                }
                let kc = kv.conj();
                let col = base | map.spread[s];
                for x in 0..d {
                    out[x * d + y] += left[x * d + col] * kc;
                }
            }
        }
    }

    /// Applies `ch` to the listed qubits: `rho -> sum_i K_i rho K_i^dag`.
    pub fn apply_channel(
        &self,
        targets: &[usize],
        ch: &KrausChannel,
    ) -> Result<DensityMatrix, QStateError> {
        if ch.arity() != targets.len() {
            return Err(QStateError::ArityMismatch {
                channel: ch.arity(),
                targets: targets.len(),
            });
        }
        self.check_targets(targets)?;
        let map = TargetMap::new(self.n_qubits, targets);
        let mut out = vec![ZERO; self.data.len()];
        for k in ch.operators() {
            self.accumulate_conjugation(&map, k, &mut out);
        }
        let rho = DensityMatrix {
            n_qubits: self.n_qubits,
            data: out,
        };
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL {
            return Err(QStateError::InvariantViolation(format!(
                "channel changed trace to {tr}"
            )));
        }
        debug_assert!(rho.hermiticity_error() <= HERMITIAN_TOL);
        Ok(rho)
    }

    /// Conjugates by a single operator (for unitaries and corrections).
    pub fn apply_operator(
        &self,
        targets: &[usize],
        op: &[C64],
    ) -> Result<DensityMatrix, QStateError> {
        self.check_targets(targets)?;
        assert_eq!(op.len(), 1 << (2 * targets.len()));
        let map = TargetMap::new(self.n_qubits, targets);
        let mut out = vec![ZERO; self.data.len()];
        self.accumulate_conjugation(&map, op, &mut out);
        Ok(DensityMatrix {
            n_qubits: self.n_qubits,
            data: out,
        })
    }

    /// Reorders qubits so that new qubit `i` is old qubit `order[i]`.
    pub fn permute(&self, order: &[usize]) -> Result<DensityMatrix, QStateError> {
        let n = self.n_qubits;
        if order.len() != n {
            return Err(QStateError::ArityMismatch {
                channel: n,
                targets: order.len(),
            });
        }
        self.check_targets(order)?;
        let d = self.dim();
        let remap = |x: usize| -> usize {
            let mut old = 0;
            for (new_q, &old_q) in order.iter().enumerate() {
                if x & (1 << (n - 1 - new_q)) != 0 {
                    old |= 1 << (n - 1 - old_q);
                }
            }
            old
        };
        let idx: Vec<usize> = (0..d).map(remap).collect();
        let mut data = vec![ZERO; d * d];
        for r in 0..d {
            for c in 0..d {
                data[r * d + c] = self.data[idx[r] * d + idx[c]];
            }
        }
        Ok(DensityMatrix { n_qubits: n, data })
    }

    /// Unnormalized projection of qubits `(i, j)` onto a Bell state; returns
    /// the branch probability and the normalized state of the remaining qubits.
    pub fn bell_projection(
        &self,
        pair: (usize, usize),
        outcome: BellOutcome,
    ) -> Result<(f64, DensityMatrix), QStateError> {
        if self.n_qubits < 3 {
            return Err(QStateError::NeedsSpectator);
        }
        self.check_targets(&[pair.0, pair.1])?;
        let n = self.n_qubits;
        let d = self.dim();
        let rest: Vec<usize> = (0..n).filter(|&q| q != pair.0 && q != pair.1).collect();
        let nr = rest.len();
        let dr = 1 << nr;
        let map = TargetMap::new(n, &[pair.0, pair.1]);
        // Full index for (rest sub-index r, pair sub-index s).
        let rest_spread: Vec<usize> = (0..dr)
            .map(|r| {
                (0..nr)
                    .filter(|&j| r & (1 << (nr - 1 - j)) != 0)
                    .map(|j| 1 << (n - 1 - rest[j]))
                    .sum()
            })
            .collect();
        let beta = outcome.amplitudes();
        let mut red = vec![ZERO; dr * dr];
        for r in 0..dr {
            for rp in 0..dr {
                let mut acc = ZERO;
                for (s, bs) in beta.iter().enumerate() {
                    if *bs == ZERO {
                        continue;
                    }
                    let row = rest_spread[r] | map.spread[s];
                    for (sp, bsp) in beta.iter().enumerate() {
                        if *bsp == ZERO {
                            continue;
                        }
                        let col = rest_spread[rp] | map.spread[sp];
                        acc += bs.conj() * self.data[row * d + col] * bsp;
                    }
                }
                red[r * dr + rp] = acc;
            }
        }
        let prob: f64 = (0..dr).map(|i| red[i * dr + i].re).sum();
        if prob > 0.0 {
            for v in red.iter_mut() {
                *v /= prob;
            }
        }
        Ok((
            prob,
            DensityMatrix {
                n_qubits: nr,
                data: red,
            },
        ))
    }

    /// Samples a Bell measurement on `(i, j)` from the Born probabilities.
    pub fn bell_measure(
        &self,
        pair: (usize, usize),
        stream: &mut RandomStream,
    ) -> Result<(BellOutcome, DensityMatrix), QStateError> {
        let branches = BellOutcome::ALL
            .iter()
            .map(|&o| self.bell_projection(pair, o).map(|(p, s)| (o, p, s)))
            .collect::<Result<Vec<_>, _>>()?;
        let u = stream.uniform();
        let total: f64 = branches.iter().map(|b| b.1.max(0.0)).sum();
        let mut acc = 0.0;
        let last = branches.len() - 1;
        for (i, (o, p, s)) in branches.into_iter().enumerate() {
            acc += p.max(0.0) / total;
            if u < acc || i == last {
                if p <= 1e-15 {
                    return Err(QStateError::ZeroProbabilityBranch(p));
                }
                return Ok((o, s));
            }
        }
        unreachable!("branch loop always returns")
    }

    /// Applies the Pauli correction for `outcome` on `qubit`
    /// (Phi+ -> I, Psi+ -> X, Phi- -> Z, Psi- -> XZ).
    pub fn pauli_correct(
        &self,
        qubit: usize,
        outcome: BellOutcome,
    ) -> Result<DensityMatrix, QStateError> {
        let (x, z) = outcome.bits();
        let mut op = Pauli::I.matrix().to_vec();
        if z {
            op = matmul(&Pauli::Z.matrix(), &op, 2);
        }
        if x {
            op = matmul(&Pauli::X.matrix(), &op, 2);
        }
        self.apply_operator(&[qubit], &op)
    }

    /// `<psi| rho |psi>` for a pure target `|psi><psi|`.
    pub fn fidelity(&self, target: &DensityMatrix) -> Result<f64, QStateError> {
        if target.n_qubits != self.n_qubits {
            return Err(QStateError::ArityMismatch {
                channel: target.n_qubits,
                targets: self.n_qubits,
            });
        }
        let purity = target.purity();
        if (purity - 1.0).abs() > 1e-10 {
            return Err(QStateError::NotPure(purity));
        }
        let d = self.dim();
        let mut f = 0.0;
        for r in 0..d {
            for c in 0..d {
                f += (self.data[r * d + c] * target.data[c * d + r]).re;
            }
        }
        Ok(f.clamp(0.0, 1.0))
    }
}

/// Pure two-qubit Bell state.
pub fn bell_state(kind: BellOutcome) -> DensityMatrix {
    DensityMatrix::bell(kind)
}
