//! Simulation configuration and its plain-text format.
//!
//! The format is one `key = value` pair per line with flat dotted keys,
//! `#` comments, and no sections. Unknown and duplicate keys are errors.
//! Every key except `architecture`, `m` and `master_seed` has a default
//! listed in [`KEYS`]; the physical defaults are placeholders.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::fabric::{self, ChannelSpec, FabricSpec};
use crate::noise::{AttemptNoiseParams, CoherenceParams, OpNoiseParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Architecture {
    Router,
    Routerless,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Router => "router",
            Architecture::Routerless => "routerless",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "router" => Ok(Architecture::Router),
            "routerless" => Ok(Architecture::Routerless),
            other => Err(format!(
                "unknown architecture `{other}` (expected router|routerless)"
            )),
        }
    }
}

/// Number of register ports on the switch chip.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FabricSize {
    Fixed(u32),
    /// Smallest power of two holding the simulated registers.
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherenceSet {
    pub electron: CoherenceParams,
    pub nuclear: CoherenceParams,
    pub client: CoherenceParams,
}

impl CoherenceSet {
    pub fn ideal() -> Self {
        Self {
            electron: CoherenceParams::ideal(),
            nuclear: CoherenceParams::ideal(),
            client: CoherenceParams::ideal(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Flags {
    /// One local attempt at a time on the shared local detectors.
    pub serialize_local: bool,
    /// Client qubits decohere while the final correction is in flight.
    pub client_decoherence_during_correction: bool,
    /// Local attempts disturb both stored nuclear spins, not only the left one.
    pub both_nuclei_attempt_noise: bool,
}

/// Durations of local operations, in seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpTiming {
    pub swap: f64,
    pub bsm: f64,
}

/// Optional fixed success probabilities replacing the loss-budget values.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LinkOverrides {
    pub p_distant: Option<f64>,
    pub p_local: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub architecture: Architecture,
    pub m: u32,
    /// Registers in the left bank (router only); `None` means `m / 2`.
    pub left_bank: Option<u32>,
    pub fabric: FabricSpec,
    pub fabric_size: FabricSize,
    pub left: ChannelSpec,
    pub right: ChannelSpec,
    pub coherence: CoherenceSet,
    pub attempt_noise: AttemptNoiseParams,
    pub op_noise: OpNoiseParams,
    pub timing: OpTiming,
    pub links: LinkOverrides,
    pub flags: Flags,
    pub master_seed: u64,
    pub n_pairs: Option<u64>,
    pub t_max: Option<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}` (first set on line {first})")]
    DuplicateKey {
        line: usize,
        key: String,
        first: usize,
    },
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("{}key `{key}`: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    InvalidValue {
        line: Option<usize>,
        key: String,
        message: String,
    },
}

/// One recognised configuration key.
pub struct KeySpec {
    pub key: &'static str,
    /// `None` marks a required key.
    pub default: Option<&'static str>,
    pub note: &'static str,
}

const fn key(key: &'static str, default: Option<&'static str>, note: &'static str) -> KeySpec {
    KeySpec { key, default, note }
}

pub const KEYS: &[KeySpec] = &[
    key("architecture", None, "router | routerless"),
    key("m", None, "registers at the repeater"),
    key("master_seed", None, "root of every random stream"),
    key(
        "router.left_bank",
        Some("half"),
        "left-bank size; `half` = m/2",
    ),
    key(
        "stop.n_pairs",
        Some("500"),
        "deliveries per run (harness choice); `none` to disable",
    ),
    key(
        "stop.t_max_s",
        Some("none"),
        "simulated-time limit per run, s",
    ),
    key(
        "fabric.m",
        Some("32"),
        "switch ports; fixed chip size or `auto` (next power of two >= m)",
    ),
    key(
        "fabric.k",
        Some("2"),
        "node degree: one link to each client",
    ),
    key(
        "fabric.loss_per_mzi_db",
        Some("0.3"),
        "placeholder, not a published value",
    ),
    key(
        "fabric.coupling_loss_db",
        Some("1.0"),
        "placeholder: chip to fiber/detector coupling",
    ),
    key(
        "fabric.conversion_loss_db",
        Some("3.0"),
        "placeholder: frequency conversion stage",
    ),
    key("fabric.detector_efficiency", Some("0.9"), "placeholder"),
    key(
        "client.efficiency",
        Some("0.5"),
        "placeholder: client photon efficiency before fiber",
    ),
    key(
        "channel.length_km",
        Some("10"),
        "repeater to detector-station distance L, both sides",
    ),
    key(
        "channel.left.length_km",
        Some("none"),
        "left-side override of L",
    ),
    key(
        "channel.right.length_km",
        Some("none"),
        "right-side override of L",
    ),
    key(
        "channel.attenuation_db_per_km",
        Some("0.2"),
        "telecom fiber",
    ),
    key("channel.fiber_light_speed", Some("2e8"), "m/s"),
    key(
        "channel.prep_time_s",
        Some("6e-6"),
        "placeholder: per-attempt state preparation; also t_local",
    ),
    key("coherence.electron.T1", Some("3600"), "placeholder, s"),
    key("coherence.electron.T2", Some("1.0"), "placeholder, s"),
    key("coherence.nuclear.T1", Some("inf"), "placeholder, s"),
    key("coherence.nuclear.T2", Some("0.1"), "placeholder, s"),
    key(
        "coherence.client.T1",
        Some("inf"),
        "client memories are ideal by default",
    ),
    key(
        "coherence.client.T2",
        Some("inf"),
        "client memories are ideal by default",
    ),
    key(
        "noise.attempt.a",
        Some("0.00025"),
        "dephasing per electron excitation, ~1/4000 for NV",
    ),
    key(
        "noise.attempt.b",
        Some("0.0002"),
        "depolarization per electron excitation, ~1/5000 for NV",
    ),
    key(
        "noise.op.p_gate",
        Some("0.01"),
        "placeholder: two-qubit gate depolarization",
    ),
    key(
        "noise.op.p_swap",
        Some("0.01"),
        "placeholder: electron-to-nuclear swap depolarization",
    ),
    key(
        "noise.op.eps_ro",
        Some("0.005"),
        "placeholder: readout bit-flip probability",
    ),
    key(
        "timing.swap_s",
        Some("1e-6"),
        "placeholder: electron-to-nuclear swap duration",
    ),
    key(
        "timing.bsm_s",
        Some("1e-6"),
        "placeholder: electron-nuclear Bell measurement duration",
    ),
    key(
        "link.p_distant",
        Some("none"),
        "fixed distant success probability (overrides loss budget)",
    ),
    key(
        "link.p_local",
        Some("none"),
        "fixed local success probability (overrides loss budget)",
    ),
    key(
        "flags.serialize_local",
        Some("true"),
        "one local attempt per t_local on the shared detectors",
    ),
    key(
        "flags.client_decoherence_during_correction",
        Some("true"),
        "clients decohere while the correction travels",
    ),
    key(
        "flags.both_nuclei_attempt_noise",
        Some("true"),
        "local attempts disturb both nuclei",
    ),
];

fn key_spec(k: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|s| s.key == k)
}

/// Renders the default table printed by the `defaults` subcommand.
pub fn defaults_table() -> String {
    let mut out = String::from("# key = default    # note\n");
    for s in KEYS {
        let value = s.default.unwrap_or("<required>");
        out.push_str(&format!("{:<46} = {:<10} # {}\n", s.key, value, s.note));
    }
    out
}

struct RawConfig {
    values: BTreeMap<&'static str, (String, Option<usize>)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut given: BTreeMap<&'static str, (String, usize)> = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or(ConfigError::Syntax { line })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            let spec = key_spec(k).ok_or_else(|| ConfigError::UnknownKey {
                line,
                key: k.to_string(),
            })?;
            if let Some((_, first)) = given.get(spec.key) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: k.to_string(),
                    first: *first,
                });
            }
            given.insert(spec.key, (v.to_string(), line));
        }
        let mut values = BTreeMap::new();
        for s in KEYS {
            match given.remove(s.key) {
                Some((v, line)) => {
                    values.insert(s.key, (v, Some(line)));
                }
                None => match s.default {
                    Some(d) => {
                        values.insert(s.key, (d.to_string(), None));
                    }
                    None => return Err(ConfigError::MissingKey(s.key.to_string())),
                },
            }
        }
        Ok(Self { values })
    }

    fn invalid(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::InvalidValue {
            line: self.values.get(key).and_then(|v| v.1),
            key: key.to_string(),
            message: message.into(),
        }
    }

    fn raw(&self, key: &str) -> &str {
        &self.values[key].0
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.raw(key)
            .parse::<T>()
            .map_err(|e| self.invalid(key, format!("`{}`: {e}", self.raw(key))))
    }

    fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        if self.raw(key) == "none" {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    fn seconds(&self, key: &str) -> Result<f64, ConfigError> {
        let v = match self.raw(key) {
            "inf" => f64::INFINITY,
            _ => self.get::<f64>(key)?,
        };
        if v.is_nan() || v < 0.0 {
            return Err(self.invalid(key, "must be a non-negative time"));
        }
        Ok(v)
    }
}

fn parse_bool(raw: &RawConfig, key: &str) -> Result<bool, ConfigError> {
    match raw.raw(key) {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(raw.invalid(key, format!("`{other}` is not true|false"))),
    }
}

impl SimConfig {
    /// Placeholder defaults for every parameter.
    pub fn defaults(architecture: Architecture, m: u32, master_seed: u64) -> Self {
        let text = format!("architecture = {architecture}\nm = {m}\nmaster_seed = {master_seed}\n");
        parse_config(&text).expect("default table is valid")
    }

    /// A configuration with every noise source and loss disabled.
    pub fn noiseless(architecture: Architecture, m: u32, master_seed: u64) -> Self {
        let mut c = Self::defaults(architecture, m, master_seed);
        c.coherence = CoherenceSet::ideal();
        c.attempt_noise = AttemptNoiseParams::none();
        c.op_noise = OpNoiseParams::none();
        c
    }

    pub fn set_length_km(&mut self, length_km: f64) {
        self.left.length_km = length_km;
        self.right.length_km = length_km;
    }

    pub fn chip_size(&self) -> u32 {
        match self.fabric_size {
            FabricSize::Fixed(m) => m,
            FabricSize::Auto => self.m.max(2).next_power_of_two(),
        }
    }

    /// Fabric spec with the chip size resolved.
    pub fn resolved_fabric(&self) -> FabricSpec {
        FabricSpec {
            m: self.chip_size(),
            ..self.fabric
        }
    }

    pub fn left_bank_size(&self) -> u32 {
        self.left_bank.unwrap_or(self.m / 2)
    }

    pub fn p_distant(&self, side: crate::protocol::Side) -> Result<f64, ConfigError> {
        if let Some(p) = self.links.p_distant {
            return Ok(p);
        }
        let ch = match side {
            crate::protocol::Side::Left => &self.left,
            crate::protocol::Side::Right => &self.right,
        };
        fabric::p_distant(&self.resolved_fabric(), ch).map_err(|e| ConfigError::InvalidValue {
            line: None,
            key: "fabric".into(),
            message: e.to_string(),
        })
    }

    pub fn p_local(&self) -> Result<f64, ConfigError> {
        if let Some(p) = self.links.p_local {
            return Ok(p);
        }
        fabric::p_local(&self.resolved_fabric()).map_err(|e| ConfigError::InvalidValue {
            line: None,
            key: "fabric".into(),
            message: e.to_string(),
        })
    }

    fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::InvalidValue {
            line: None,
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// Checks every cross-field invariant.
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.architecture {
            Architecture::Router => {
                if self.m < 2 {
                    return Err(Self::invalid("m", "router needs at least 2 registers"));
                }
                match self.left_bank {
                    None if !self.m.is_multiple_of(2) => {
                        return Err(Self::invalid(
                            "m",
                            "router needs an even m to split into two banks",
                        ))
                    }
                    Some(l) if l == 0 || l >= self.m => {
                        return Err(Self::invalid(
                            "router.left_bank",
                            "each bank needs at least one register",
                        ))
                    }
                    _ => {}
                }
            }
            Architecture::Routerless => {
                if self.m < 1 {
                    return Err(Self::invalid("m", "need at least one register"));
                }
            }
        }
        if let FabricSize::Fixed(size) = self.fabric_size {
            if size < self.m {
                return Err(Self::invalid(
                    "fabric.m",
                    format!("chip has {size} ports but m = {}", self.m),
                ));
            }
        }
        let fab = self.resolved_fabric();
        fab.validate()
            .map_err(|e| Self::invalid("fabric", e.to_string()))?;
        for (name, ch) in [("channel.left", &self.left), ("channel.right", &self.right)] {
            ch.validate()
                .map_err(|e| Self::invalid(name, e.to_string()))?;
        }
        for (name, c) in [
            ("coherence.electron", self.coherence.electron),
            ("coherence.nuclear", self.coherence.nuclear),
            ("coherence.client", self.coherence.client),
        ] {
            CoherenceParams::new(c.t1, c.t2).map_err(|e| Self::invalid(name, e.to_string()))?;
        }
        AttemptNoiseParams::new(self.attempt_noise.a, self.attempt_noise.b)
            .map_err(|e| Self::invalid("noise.attempt", e.to_string()))?;
        let o = self.op_noise;
        OpNoiseParams::new(o.p_gate, o.eps_ro, o.p_swap)
            .map_err(|e| Self::invalid("noise.op", e.to_string()))?;
        for (name, p) in [
            ("link.p_distant", self.links.p_distant),
            ("link.p_local", self.links.p_local),
        ] {
            if let Some(p) = p {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Self::invalid(name, format!("{p} is not in (0, 1]")));
                }
            }
        }
        for (name, t) in [
            ("timing.swap_s", self.timing.swap),
            ("timing.bsm_s", self.timing.bsm),
        ] {
            if t < 0.0 || !t.is_finite() {
                return Err(Self::invalid(name, "must be a finite non-negative time"));
            }
        }
        let stops = self.n_pairs.is_some_and(|n| n >= 1) || self.t_max.is_some_and(|t| t > 0.0);
        if !stops {
            return Err(Self::invalid(
                "stop",
                "need stop.n_pairs >= 1 or stop.t_max_s > 0",
            ));
        }
        Ok(())
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let raw = RawConfig::parse(text)?;

    let architecture: Architecture = raw.get("architecture")?;
    let m: u32 = raw.get("m")?;
    let left_bank = match raw.raw("router.left_bank") {
        "half" => None,
        _ => Some(raw.get::<u32>("router.left_bank")?),
    };
    let fabric_size = match raw.raw("fabric.m") {
        "auto" => FabricSize::Auto,
        _ => FabricSize::Fixed(raw.get("fabric.m")?),
    };
    let fabric = FabricSpec {
        m: 2,
        k: raw.get("fabric.k")?,
        loss_per_mzi_db: raw.get("fabric.loss_per_mzi_db")?,
        coupling_loss_db: raw.get("fabric.coupling_loss_db")?,
        conversion_loss_db: raw.get("fabric.conversion_loss_db")?,
        detector_efficiency: raw.get("fabric.detector_efficiency")?,
    };
    let base_len: f64 = raw.get("channel.length_km")?;
    let channel = |len: Option<f64>| -> Result<ChannelSpec, ConfigError> {
        Ok(ChannelSpec {
            length_km: len.unwrap_or(base_len),
            attenuation_db_per_km: raw.get("channel.attenuation_db_per_km")?,
            fiber_light_speed: raw.get("channel.fiber_light_speed")?,
            prep_time: raw.seconds("channel.prep_time_s")?,
            client_efficiency: raw.get("client.efficiency")?,
        })
    };
    let left = channel(raw.get_opt("channel.left.length_km")?)?;
    let right = channel(raw.get_opt("channel.right.length_km")?)?;

    let coherence_of = |role: &str| -> Result<CoherenceParams, ConfigError> {
        let k1 = format!("coherence.{role}.T1");
        let k2 = format!("coherence.{role}.T2");
        let (t1, t2) = (raw.seconds(&k1)?, raw.seconds(&k2)?);
        CoherenceParams::new(t1, t2).map_err(|e| raw.invalid(&k2, e.to_string()))
    };
    let coherence = CoherenceSet {
        electron: coherence_of("electron")?,
        nuclear: coherence_of("nuclear")?,
        client: coherence_of("client")?,
    };
    let attempt_noise =
        AttemptNoiseParams::new(raw.get("noise.attempt.a")?, raw.get("noise.attempt.b")?)
            .map_err(|e| raw.invalid("noise.attempt.b", e.to_string()))?;
    let op_noise = OpNoiseParams::new(
        raw.get("noise.op.p_gate")?,
        raw.get("noise.op.eps_ro")?,
        raw.get("noise.op.p_swap")?,
    )
    .map_err(|e| raw.invalid("noise.op.p_gate", e.to_string()))?;

    let config = SimConfig {
        architecture,
        m,
        left_bank,
        fabric,
        fabric_size,
        left,
        right,
        coherence,
        attempt_noise,
        op_noise,
        timing: OpTiming {
            swap: raw.seconds("timing.swap_s")?,
            bsm: raw.seconds("timing.bsm_s")?,
        },
        links: LinkOverrides {
            p_distant: raw.get_opt("link.p_distant")?,
            p_local: raw.get_opt("link.p_local")?,
        },
        flags: Flags {
            serialize_local: parse_bool(&raw, "flags.serialize_local")?,
            client_decoherence_during_correction: parse_bool(
                &raw,
                "flags.client_decoherence_during_correction",
            )?,
            both_nuclei_attempt_noise: parse_bool(&raw, "flags.both_nuclei_attempt_noise")?,
        },
        master_seed: raw.get("master_seed")?,
        n_pairs: raw.get_opt("stop.n_pairs")?,
        t_max: raw.get_opt::<f64>("stop.t_max_s")?,
    };
    config.validate()?;
    Ok(config)
}
