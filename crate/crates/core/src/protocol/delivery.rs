use super::{NoiseModel, ProtocolError, StoredPair};
use crate::noise::flip_outcome;
use crate::qstate::{BellOutcome, DensityMatrix};
use crate::rng::RandomStream;

/// Random streams used by one register's Bell measurement.
pub struct MeasurementSite<'a> {
    pub bsm: &'a mut RandomStream,
    pub readout: &'a mut RandomStream,
}

/// Seconds each client qubit idles between the final Bell measurement and
/// its Pauli correction.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ClientWait {
    pub alice: f64,
    pub bob: f64,
}

/// Gate noise, then a Born-sampled Bell measurement on `pair`, then readout
/// flips. Returns the reported outcome and the post-measurement state.
pub fn noisy_bell_measurement(
    rho: &DensityMatrix,
    pair: (usize, usize),
    noise: &NoiseModel,
    site: &mut MeasurementSite<'_>,
) -> Result<(BellOutcome, DensityMatrix), ProtocolError> {
    let rho = rho.apply_channel(&[pair.0, pair.1], &noise.gate)?;
    let (outcome, rest) = rho.bell_measure(pair, site.bsm)?;
    Ok((flip_outcome(outcome, noise.eps_ro, site.readout), rest))
}

fn finish(
    ab: DensityMatrix,
    outcome: BellOutcome,
    noise: &NoiseModel,
    wait: ClientWait,
) -> Result<DensityMatrix, ProtocolError> {
    let client = noise.coherence.client;
    let ab = noise.decohere(ab, 0, &client, wait.alice)?;
    let ab = noise.decohere(ab, 1, &client, wait.bob)?;
    Ok(ab.pauli_correct(1, outcome)?)
}

/// Routerless swap: `stored` is `[Alice, nucleus]`, `herald` is
/// `[Bob, electron]`, both already synced to the measurement time.
/// Returns the corrected `[Alice, Bob]` state.
pub fn complete_routerless_delivery(
    stored: &StoredPair,
    herald: &StoredPair,
    noise: &NoiseModel,
    site: &mut MeasurementSite<'_>,
    wait: ClientWait,
) -> Result<DensityMatrix, ProtocolError> {
    let eb = herald.rho.permute(&[1, 0])?;
    let rho = stored.rho.tensor(&eb)?;
    let (outcome, ab) = noisy_bell_measurement(&rho, (1, 2), noise, site)?;
    finish(ab, outcome, noise, wait)
}

/// Router delivery: `left` is `[Alice, left nucleus]`, `right` is
/// `[Bob, right nucleus]`, and `local` is the `[left electron, right electron]`
/// pair from the local station. The left register measures first and its
/// outcome is corrected on the right electron before the right register measures.
pub fn complete_router_delivery(
    left: &StoredPair,
    right: &StoredPair,
    local: &DensityMatrix,
    noise: &NoiseModel,
    left_site: &mut MeasurementSite<'_>,
    right_site: &mut MeasurementSite<'_>,
    wait: ClientWait,
) -> Result<DensityMatrix, ProtocolError> {
    let rho = left.rho.tensor(local)?;
    let (first, a_er) = noisy_bell_measurement(&rho, (1, 2), noise, left_site)?;
    let a_er = a_er.pauli_correct(1, first)?;
    let nb = right.rho.permute(&[1, 0])?;
    let rho = a_er.tensor(&nb)?;
    let (second, ab) = noisy_bell_measurement(&rho, (1, 2), noise, right_site)?;
    finish(ab, second, noise, wait)
}
