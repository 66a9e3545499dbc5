//! Photonic switch depths, optical loss budgets, and link success probabilities.
//!
//! The router chip is an MZI array made of a register-routing layer
//! (depth `2 log2(m/2)`), a one-layer interposer, a network-routing layer
//! (depth `log2(k)`), and a one-layer local Bell-measurement stage.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FabricError {
    #[error("{name} = {value} must be a power of two (minimum {min})")]
    NotPowerOfTwo {
        name: &'static str,
        value: u32,
        min: u32,
    },
    #[error("{name} = {value} must be non-negative")]
    NegativeLoss { name: &'static str, value: f64 },
    #[error("{name} = {value} must lie in (0, 1]")]
    InvalidEfficiency { name: &'static str, value: f64 },
    #[error("{name} = {value} must be positive")]
    NonPositive { name: &'static str, value: f64 },
    #[error("computed success probability {0} exceeds 1")]
    ProbabilityAboveOne(f64),
}

fn log2_checked(name: &'static str, value: u32, min: u32) -> Result<u32, FabricError> {
    if value < min || !value.is_power_of_two() {
        return Err(FabricError::NotPowerOfTwo { name, value, min });
    }
    Ok(value.trailing_zeros())
}

fn db_to_transmission(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FabricSpec {
    /// Register ports on the chip.
    pub m: u32,
    /// Node degree (number of network links).
    pub k: u32,
    pub loss_per_mzi_db: f64,
    /// Chip to fiber or chip to detector coupling.
    pub coupling_loss_db: f64,
    /// Frequency conversion before the fiber link.
    pub conversion_loss_db: f64,
    pub detector_efficiency: f64,
}

impl FabricSpec {
    pub fn validate(&self) -> Result<(), FabricError> {
        log2_checked("fabric.m", self.m, 2)?;
        log2_checked("fabric.k", self.k, 1)?;
        for (name, value) in [
            ("fabric.loss_per_mzi_db", self.loss_per_mzi_db),
            ("fabric.coupling_loss_db", self.coupling_loss_db),
            ("fabric.conversion_loss_db", self.conversion_loss_db),
        ] {
            if value.is_nan() || value < 0.0 {
                return Err(FabricError::NegativeLoss { name, value });
            }
        }
        if !(self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0) {
            return Err(FabricError::InvalidEfficiency {
                name: "fabric.detector_efficiency",
                value: self.detector_efficiency,
            });
        }
        Ok(())
    }

    pub fn lossless(m: u32, k: u32) -> Self {
        Self {
            m,
            k,
            loss_per_mzi_db: 0.0,
            coupling_loss_db: 0.0,
            conversion_loss_db: 0.0,
            detector_efficiency: 1.0,
        }
    }
}

/// One fiber link between the repeater and a client, with a detector
/// station halfway (at distance `length_km` from each end).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelSpec {
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    /// Speed of light in fiber, m/s.
    pub fiber_light_speed: f64,
    /// State preparation time per attempt, s.
    pub prep_time: f64,
    /// Photon efficiency of the client device, excluding fiber and detector.
    pub client_efficiency: f64,
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<(), FabricError> {
        if self.length_km.is_nan() || self.length_km < 0.0 {
            return Err(FabricError::NegativeLoss {
                name: "channel.length_km",
                value: self.length_km,
            });
        }
        if self.attenuation_db_per_km.is_nan() || self.attenuation_db_per_km < 0.0 {
            return Err(FabricError::NegativeLoss {
                name: "channel.attenuation_db_per_km",
                value: self.attenuation_db_per_km,
            });
        }
        if self.fiber_light_speed.is_nan() || self.fiber_light_speed <= 0.0 {
            return Err(FabricError::NonPositive {
                name: "channel.fiber_light_speed",
                value: self.fiber_light_speed,
            });
        }
        if self.prep_time.is_nan() || self.prep_time <= 0.0 {
            return Err(FabricError::NonPositive {
                name: "channel.prep_time_s",
                value: self.prep_time,
            });
        }
        if !(self.client_efficiency > 0.0 && self.client_efficiency <= 1.0) {
            return Err(FabricError::InvalidEfficiency {
                name: "client.efficiency",
                value: self.client_efficiency,
            });
        }
        Ok(())
    }

    pub fn fiber_transmission(&self) -> f64 {
        db_to_transmission(self.attenuation_db_per_km * self.length_km)
    }

    /// One-way signalling time from the repeater to the detector station.
    pub fn station_delay(&self) -> f64 {
        self.length_km * 1e3 / self.fiber_light_speed
    }
}

/// Depth of the router's path from a register to a network link: `log2(m^2 k / 2)`.
pub fn network_path_depth(m: u32, k: u32) -> Result<u32, FabricError> {
    let lm = log2_checked("m", m, 2)?;
    let lk = log2_checked("k", k, 1)?;
    Ok(2 * lm + lk - 1)
}

/// Register routing, interposer and local BSM layer: `2 log2(m/2) + 2`.
pub fn local_path_depth(m: u32) -> Result<u32, FabricError> {
    let lm = log2_checked("m", m, 2)?;
    Ok(2 * (lm - 1) + 2)
}

/// Depth of a plain `m x k` switch without local connectivity: `log2(m) + log2(k)`.
pub fn routerless_depth(m: u32, k: u32) -> Result<u32, FabricError> {
    let lm = log2_checked("m", m, 2)?;
    let lk = log2_checked("k", k, 1)?;
    Ok(lm + lk)
}

/// Transmission through `depth` MZI layers plus `extra_db` of fixed loss.
pub fn path_transmission(depth: u32, spec: &FabricSpec, extra_db: f64) -> f64 {
    db_to_transmission(depth as f64 * spec.loss_per_mzi_db + extra_db)
}

/// Barrett-Kok success probability over one distant link: `1/2 * eta_repeater * eta_client`.
pub fn p_distant(fab: &FabricSpec, ch: &ChannelSpec) -> Result<f64, FabricError> {
    fab.validate()?;
    ch.validate()?;
    let depth = network_path_depth(fab.m, fab.k)?;
    let fiber = ch.fiber_transmission();
    let eta_repeater = path_transmission(depth, fab, fab.coupling_loss_db + fab.conversion_loss_db)
        * fiber
        * fab.detector_efficiency;
    let eta_client = fiber * ch.client_efficiency * fab.detector_efficiency;
    let p = 0.5 * eta_repeater * eta_client;
    if p > 1.0 {
        return Err(FabricError::ProbabilityAboveOne(p));
    }
    Ok(p)
}

/// Success probability of on-chip entanglement between two registers.
pub fn p_local(fab: &FabricSpec) -> Result<f64, FabricError> {
    fab.validate()?;
    let eta = path_transmission(local_path_depth(fab.m)?, fab, fab.coupling_loss_db)
        * fab.detector_efficiency;
    Ok(0.5 * eta * eta)
}

/// `(t_distant, t_local)` in seconds.
pub fn timings(ch: &ChannelSpec) -> (f64, f64) {
    (2.0 * ch.station_delay() + ch.prep_time, ch.prep_time)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel(length_km: f64) -> ChannelSpec {
        ChannelSpec {
            length_km,
            attenuation_db_per_km: 0.2,
            fiber_light_speed: 2e8,
            prep_time: 6e-6,
            client_efficiency: 1.0,
        }
    }

    #[test]
    fn depths() {
        assert_eq!(network_path_depth(8, 4).unwrap(), 7);
        assert_eq!(network_path_depth(2, 1).unwrap(), 1);
        assert_eq!(local_path_depth(8).unwrap(), 6);
        assert_eq!(local_path_depth(2).unwrap(), 2);
        assert_eq!(local_path_depth(16).unwrap(), 8);
        assert_eq!(routerless_depth(8, 4).unwrap(), 5);
        assert_eq!(routerless_depth(2, 1).unwrap(), 1);
        assert_eq!(routerless_depth(16, 2).unwrap(), 5);
    }

    #[test]
    fn depth_rejects_non_powers() {
        assert!(network_path_depth(6, 2).is_err());
        assert!(network_path_depth(8, 3).is_err());
        assert!(local_path_depth(1).is_err());
        assert!(routerless_depth(0, 1).is_err());
    }

    #[test]
    fn transmissions() {
        let mut spec = FabricSpec::lossless(8, 4);
        assert_eq!(path_transmission(7, &spec, 0.0), 1.0);
        spec.loss_per_mzi_db = 0.3;
        assert!((path_transmission(7, &spec, 0.0) - 10f64.powf(-0.21)).abs() < 1e-15);
        assert!((path_transmission(7, &spec, 0.0) - 0.6166).abs() < 1e-4);
        assert!((path_transmission(6, &spec, 1.0) - 0.5248).abs() < 1e-4);
    }

    #[test]
    fn distant_probability() {
        let fab = FabricSpec::lossless(8, 2);
        assert!((p_distant(&fab, &channel(0.0)).unwrap() - 0.5).abs() < 1e-15);
        let p10 = p_distant(&fab, &channel(10.0)).unwrap();
        assert!((p10 - 0.5 * 10f64.powf(-0.4)).abs() < 1e-15);
        assert!((p10 - 0.1991).abs() < 1e-4);
        let p30 = p_distant(&fab, &channel(30.0)).unwrap();
        assert!((p30 - 0.03155).abs() < 1e-5);
    }

    #[test]
    fn local_probability() {
        assert!((p_local(&FabricSpec::lossless(8, 2)).unwrap() - 0.5).abs() < 1e-15);
        let fab = FabricSpec {
            m: 8,
            k: 2,
            loss_per_mzi_db: 0.3,
            coupling_loss_db: 0.5,
            conversion_loss_db: 3.0,
            detector_efficiency: 0.9,
        };
        let expect = 0.5 * (10f64.powf(-0.23) * 0.9).powi(2);
        assert!((p_local(&fab).unwrap() - expect).abs() < 1e-15);
        assert!((p_local(&fab).unwrap() - 0.1404).abs() < 1e-4);
    }

    #[test]
    fn timing_values() {
        let (td, tl) = timings(&channel(10.0));
        assert!((td - 106e-6).abs() < 1e-15);
        assert_eq!(tl, 6e-6);
        let (td0, tl0) = timings(&channel(0.0));
        assert_eq!(td0, 6e-6);
        assert_eq!(tl0, timings(&channel(30.0)).1);
    }

    #[test]
    fn invalid_specs() {
        let mut fab = FabricSpec::lossless(8, 2);
        fab.detector_efficiency = 0.0;
        assert!(fab.validate().is_err());
        let mut ch = channel(1.0);
        ch.length_km = -1.0;
        assert!(ch.validate().is_err());
    }
}
