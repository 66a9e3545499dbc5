//! Sweep execution, per-point aggregation and the CSV interchange format.

use std::io::{Read, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{Architecture, ConfigError, SimConfig};
use crate::protocol::{run_architecture, DeliveryRecord, ProtocolError, SimOutcome};
use crate::rng::derive_seed;
use crate::stats::{mean, sem};

pub const CSV_HEADER: [&str; 12] = [
    "architecture",
    "m",
    "L_km",
    "runs",
    "rate_hz_mean",
    "rate_hz_sem",
    "fidelity_mean",
    "fidelity_sem",
    "infidelity_mean",
    "mean_idle_cycles",
    "mean_stored_attempts",
    "master_seed",
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("run {run} failed")]
    Run {
        run: u32,
        #[source]
        source: ProtocolError,
    },
    #[error("invalid sweep grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run {run} produced no deliveries")]
    NoDeliveries { run: u32 },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("CSV line {line}: {message}")]
    CsvContent { line: u64, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Error from a sweep that stopped early, with the rows finished before it.
#[derive(Debug, Error)]
#[error("sweep point ({architecture}, m = {m}, L = {length_km} km) failed")]
pub struct SweepError {
    pub completed: Vec<SummaryRow>,
    pub architecture: Architecture,
    pub m: u32,
    pub length_km: f64,
    #[source]
    pub source: HarnessError,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub ms: Vec<u32>,
    pub lengths_km: Vec<f64>,
    pub architectures: Vec<Architecture>,
    pub runs: u32,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.ms.is_empty() || self.lengths_km.is_empty() || self.architectures.is_empty() {
            return Err(HarnessError::Grid(
                "m, L and architecture lists must be nonempty".into(),
            ));
        }
        if self.runs == 0 {
            return Err(HarnessError::Grid("runs must be at least 1".into()));
        }
        Ok(())
    }

    /// Grid points in output order: architecture, then L, then m, each in
    /// the order given.
    pub fn points(&self) -> Vec<(Architecture, f64, u32)> {
        let mut out = Vec::new();
        for &arch in &self.architectures {
            for &l in &self.lengths_km {
                for &m in &self.ms {
                    out.push((arch, l, m));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub architecture: Architecture,
    pub m: u32,
    pub length_km: f64,
    pub runs: u32,
    pub rate_hz_mean: f64,
    pub rate_hz_sem: f64,
    pub fidelity_mean: f64,
    pub fidelity_sem: f64,
    pub infidelity_mean: f64,
    pub mean_idle_cycles: f64,
    pub mean_stored_attempts: f64,
    pub master_seed: u64,
}

/// Per-run statistics feeding a [`SummaryRow`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunStats {
    pub seed: u64,
    pub deliveries: usize,
    pub rate_hz: f64,
    pub fidelity: f64,
    pub idle_cycles: f64,
    pub stored_attempts: f64,
}

/// Idle time of a delivery: how long the earlier-stored qubit waited for
/// the complementary link, in distant cycles.
pub fn delivery_idle_cycles(r: &DeliveryRecord) -> f64 {
    r.idle_cycles_left.max(r.idle_cycles_right)
}

impl RunStats {
    pub fn from_outcome(seed: u64, outcome: &SimOutcome, t_max: Option<f64>) -> Self {
        let recs = &outcome.records;
        let f: Vec<f64> = recs.iter().map(|r| r.fidelity).collect();
        let idle: Vec<f64> = recs.iter().map(delivery_idle_cycles).collect();
        let att: Vec<f64> = recs.iter().map(|r| r.stored_attempts as f64).collect();
        Self {
            seed,
            deliveries: recs.len(),
            rate_hz: outcome.rate_hz(t_max),
            fidelity: mean(&f),
            idle_cycles: mean(&idle),
            stored_attempts: mean(&att),
        }
    }
}

/// Seed of run `index` under `master_seed`.
pub fn run_seed(master_seed: u64, index: u32) -> u64 {
    derive_seed(master_seed, "run", index as u64)
}

/// Runs one simulation with the seed of run `index`.
pub fn run_once(cfg: &SimConfig, index: u32) -> Result<(RunStats, SimOutcome), HarnessError> {
    let seed = run_seed(cfg.master_seed, index);
    let mut c = cfg.clone();
    c.master_seed = seed;
    let outcome =
        run_architecture(&c).map_err(|source| HarnessError::Run { run: index, source })?;
    if outcome.records.is_empty() {
        return Err(HarnessError::NoDeliveries { run: index });
    }
    Ok((RunStats::from_outcome(seed, &outcome, cfg.t_max), outcome))
}

pub fn summarize(cfg: &SimConfig, stats: &[RunStats]) -> SummaryRow {
    let pick = |f: fn(&RunStats) -> f64| stats.iter().map(f).collect::<Vec<f64>>();
    let rate = pick(|s| s.rate_hz);
    let fid = pick(|s| s.fidelity);
    let fidelity_mean = mean(&fid);
    SummaryRow {
        architecture: cfg.architecture,
        m: cfg.m,
        length_km: cfg.left.length_km,
        runs: stats.len() as u32,
        rate_hz_mean: mean(&rate),
        rate_hz_sem: sem(&rate),
        fidelity_mean,
        fidelity_sem: sem(&fid),
        infidelity_mean: 1.0 - fidelity_mean,
        mean_idle_cycles: mean(&pick(|s| s.idle_cycles)),
        mean_stored_attempts: mean(&pick(|s| s.stored_attempts)),
        master_seed: cfg.master_seed,
    }
}

/// Runs `runs` independent simulations in parallel and aggregates them in
/// run order.
pub fn run_point_detailed(
    cfg: &SimConfig,
    runs: u32,
) -> Result<(SummaryRow, Vec<RunStats>), HarnessError> {
    if runs == 0 {
        return Err(HarnessError::Grid("runs must be at least 1".into()));
    }
    let results: Vec<Result<RunStats, HarnessError>> = (0..runs)
        .into_par_iter()
        .map(|i| run_once(cfg, i).map(|(s, _)| s))
        .collect();
    let stats = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok((summarize(cfg, &stats), stats))
}

pub fn run_point(cfg: &SimConfig, runs: u32) -> Result<SummaryRow, HarnessError> {
    run_point_detailed(cfg, runs).map(|(row, _)| row)
}

/// Configuration of one grid point derived from `base`.
pub fn point_config(
    base: &SimConfig,
    architecture: Architecture,
    length_km: f64,
    m: u32,
) -> SimConfig {
    let mut c = base.clone();
    c.architecture = architecture;
    c.m = m;
    c.set_length_km(length_km);
    c
}

/// Runs every grid point. All runs of all points execute in parallel;
/// rows come back in [`SweepGrid::points`] order. On failure the error
/// carries the rows that precede the failing point.
pub fn sweep(grid: &SweepGrid, base: &SimConfig) -> Result<Vec<SummaryRow>, SweepError> {
    let points = grid.points();
    let fail = |completed, (architecture, length_km, m), source| SweepError {
        completed,
        architecture,
        m,
        length_km,
        source,
    };
    if let Err(e) = grid.validate() {
        let first =
            points
                .first()
                .copied()
                .unwrap_or((base.architecture, base.left.length_km, base.m));
        return Err(fail(Vec::new(), first, e));
    }
    let configs: Vec<SimConfig> = points
        .iter()
        .map(|&(a, l, m)| point_config(base, a, l, m))
        .collect();
    for (i, c) in configs.iter().enumerate() {
        if let Err(e) = c.validate() {
            return Err(fail(Vec::new(), points[i], e.into()));
        }
    }
    let jobs: Vec<(usize, u32)> = (0..configs.len())
        .flat_map(|p| (0..grid.runs).map(move |r| (p, r)))
        .collect();
    let results: Vec<Result<RunStats, HarnessError>> = jobs
        .par_iter()
        .map(|&(p, r)| run_once(&configs[p], r).map(|(s, _)| s))
        .collect();
    let mut rows = Vec::with_capacity(points.len());
    let mut it = results.into_iter();
    for (p, cfg) in configs.iter().enumerate() {
        let mut stats = Vec::with_capacity(grid.runs as usize);
        for _ in 0..grid.runs {
            match it.next().expect("one result per job") {
                Ok(s) => stats.push(s),
                Err(e) => return Err(fail(rows, points[p], e)),
            }
        }
        rows.push(summarize(cfg, &stats));
    }
    Ok(rows)
}

/// Float formatting with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.architecture.as_str().to_string(),
            r.m.to_string(),
            format_float(r.length_km),
            r.runs.to_string(),
            format_float(r.rate_hz_mean),
            format_float(r.rate_hz_sem),
            format_float(r.fidelity_mean),
            format_float(r.fidelity_sem),
            format_float(r.infidelity_mean),
            format_float(r.mean_idle_cycles),
            format_float(r.mean_stored_attempts),
            r.master_seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[SummaryRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

/// Parses a CSV produced by [`write_csv`]. The header must match exactly.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<SummaryRow>, HarnessError> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = rd.headers()?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got != CSV_HEADER {
        let missing: Vec<&str> = CSV_HEADER
            .iter()
            .copied()
            .filter(|h| !got.contains(h))
            .collect();
        let message = if missing.is_empty() {
            format!("header columns out of order: {}", got.join(","))
        } else {
            format!("missing columns: {}", missing.join(", "))
        };
        return Err(HarnessError::CsvContent { line: 1, message });
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |col: &str, v: &str| HarnessError::CsvContent {
            line,
            message: format!("column {col}: cannot parse `{v}`"),
        };
        let f = |i: usize| -> Result<f64, HarnessError> {
            rec[i].parse().map_err(|_| bad(CSV_HEADER[i], &rec[i]))
        };
        let u = |i: usize| -> Result<u64, HarnessError> {
            rec[i].parse().map_err(|_| bad(CSV_HEADER[i], &rec[i]))
        };
        rows.push(SummaryRow {
            architecture: rec[0].parse().map_err(|_| bad(CSV_HEADER[0], &rec[0]))?,
            m: u(1)? as u32,
            length_km: f(2)?,
            runs: u(3)? as u32,
            rate_hz_mean: f(4)?,
            rate_hz_sem: f(5)?,
            fidelity_mean: f(6)?,
            fidelity_sem: f(7)?,
            infidelity_mean: f(8)?,
            mean_idle_cycles: f(9)?,
            mean_stored_attempts: f(10)?,
            master_seed: u(11)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(arch: Architecture, m: u32) -> SummaryRow {
        SummaryRow {
            architecture: arch,
            m,
            length_km: 10.0,
            runs: 3,
            rate_hz_mean: 1234.5678901234567,
            rate_hz_sem: 0.1,
            fidelity_mean: 0.9,
            fidelity_sem: 1e-3,
            infidelity_mean: 1.0 - 0.9,
            mean_idle_cycles: 2.0 / 3.0,
            mean_stored_attempts: 5.0,
            master_seed: u64::MAX,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = vec![
            row(Architecture::Router, 2),
            row(Architecture::Routerless, 4),
        ];
        let text = csv_string(&rows);
        assert!(text.starts_with(&(CSV_HEADER.join(",") + "\n")));
        assert!(!text.contains('\r'));
        assert_eq!(read_csv(text.as_bytes()).unwrap(), rows);
        assert_eq!(csv_string(&read_csv(text.as_bytes()).unwrap()), text);
    }

    #[test]
    fn missing_column_is_reported() {
        let text = "architecture,m\nrouter,2\n";
        let err = read_csv(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("missing columns"), "{err}");
    }

    #[test]
    fn grid_order_and_count() {
        let grid = SweepGrid {
            ms: vec![2, 4],
            lengths_km: vec![1.0, 10.0],
            architectures: vec![Architecture::Router, Architecture::Routerless],
            runs: 1,
        };
        let pts = grid.points();
        assert_eq!(pts.len(), 8);
        assert_eq!(pts[0], (Architecture::Router, 1.0, 2));
        assert_eq!(pts[1], (Architecture::Router, 1.0, 4));
        assert_eq!(pts[2], (Architecture::Router, 10.0, 2));
        assert_eq!(pts[7], (Architecture::Routerless, 10.0, 4));
    }

    #[test]
    fn run_seeds_are_distinct_and_stable() {
        let seeds: Vec<u64> = (0..3).map(|i| run_seed(42, i)).collect();
        assert_eq!(
            seeds,
            (0..3)
                .map(|i| derive_seed(42, "run", i))
                .collect::<Vec<_>>()
        );
        assert_ne!(seeds[0], seeds[1]);
        assert_ne!(seeds[1], seeds[2]);
    }
}
