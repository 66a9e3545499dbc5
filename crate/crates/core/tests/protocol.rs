use qrouter::config::{Architecture, SimConfig};
use qrouter::engine::SimTime;
use qrouter::protocol::{run_architecture, DeliveryRecord, SimOutcome};
use qrouter::stats::{mean, sem};

fn quiet(arch: Architecture, m: u32, p: f64, seed: u64) -> SimConfig {
    let mut c = SimConfig::noiseless(arch, m, seed);
    c.links.p_distant = Some(p);
    c
}

fn run(cfg: &SimConfig) -> SimOutcome {
    run_architecture(cfg).expect("simulation runs")
}

fn intervals(records: &[DeliveryRecord]) -> Vec<f64> {
    records
        .windows(2)
        .map(|w| (w[1].completion_time.as_nanos() - w[0].completion_time.as_nanos()) as f64)
        .collect()
}

fn ns(secs: f64) -> u64 {
    SimTime::from_secs(secs).unwrap().as_nanos()
}

#[test]
fn certain_links_give_a_two_cycle_router_period() {
    let mut cfg = quiet(Architecture::Router, 2, 1.0, 3);
    cfg.links.p_local = Some(1.0);
    cfg.n_pairs = Some(50);
    let out = run(&cfg);
    let period = ns(out.cycle_period[0]) as f64;
    for gap in intervals(&out.records) {
        assert_eq!(gap, 2.0 * period);
    }
}

#[test]
fn single_routerless_register_interval() {
    let p = 0.2;
    let mut cfg = quiet(Architecture::Routerless, 1, p, 5);
    assert!(cfg.timing.swap > 0.0 && cfg.timing.bsm > 0.0);
    cfg.n_pairs = Some(3000);
    let out = run(&cfg);
    let period = ns(out.cycle_period[0]) as f64;
    let gaps: Vec<f64> = intervals(&out.records).iter().map(|g| g / period).collect();
    // G1 + G2 attempts; the swap and the final BSM each push the next start to the following cycle.
    let expected = 2.0 / p + 2.0;
    let z = (mean(&gaps) - expected) / sem(&gaps);
    assert!(
        z.abs() <= 3.0,
        "mean {} vs {expected} (z = {z})",
        mean(&gaps)
    );
}

#[test]
fn pairing_follows_storage_order() {
    let mut cfg = SimConfig::defaults(Architecture::Router, 16, 8);
    cfg.n_pairs = Some(400);
    let out = run(&cfg);
    let mut recs: Vec<&DeliveryRecord> = out.records.iter().collect();
    recs.sort_by_key(|r| r.pair_index.expect("router records carry a pair index"));
    for w in recs.windows(2) {
        assert!(w[0].pair_index < w[1].pair_index);
        assert!(w[0].success_times.0 <= w[1].success_times.0);
        assert!(w[0].success_times.1 <= w[1].success_times.1);
    }
}

#[test]
fn every_scheduled_event_is_accounted_for() {
    for arch in [Architecture::Router, Architecture::Routerless] {
        let mut cfg = SimConfig::defaults(arch, 8, 13);
        cfg.n_pairs = Some(200);
        let a = run(&cfg).audit;
        assert!(a.is_balanced(), "{arch}: {a:?}");
        assert!(a.processed > 0);
    }
}

#[test]
fn attempt_noise_is_applied_once_per_stored_attempt() {
    let mut cfg = SimConfig::defaults(Architecture::Routerless, 4, 21);
    cfg.n_pairs = Some(300);
    for r in &run(&cfg).records {
        assert_eq!(r.noise_applications[0], r.stored_attempts);
    }

    let mut cfg = SimConfig::defaults(Architecture::Router, 4, 21);
    cfg.n_pairs = Some(300);
    for r in &run(&cfg).records {
        assert_eq!(r.noise_applications, [r.stored_attempts, r.stored_attempts]);
    }
    cfg.flags.both_nuclei_attempt_noise = false;
    for r in &run(&cfg).records {
        assert_eq!(r.noise_applications, [r.stored_attempts, 0]);
    }
}

fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn registers_draw_from_independent_identical_streams() {
    let mut cfg = quiet(Architecture::Routerless, 2, 0.1, 34);
    cfg.n_pairs = Some(4000);
    let out = run(&cfg);
    let by = |id| -> Vec<f64> {
        out.records
            .iter()
            .filter(|r| r.registers.0 == id)
            .map(|r| r.first_stage_cycles)
            .collect()
    };
    let (a, b) = (by(0), by(1));
    let (n, m) = (a.len() as f64, b.len() as f64);
    let d = ks_statistic(&a, &b);
    // Two-sample KS critical value at alpha = 0.01.
    let critical = 1.628 * ((n + m) / (n * m)).sqrt();
    assert!(d <= critical, "D = {d}, critical {critical}");

    // Successive rounds of one register are uncorrelated.
    let ma = mean(&a);
    let num: f64 = a.windows(2).map(|w| (w[0] - ma) * (w[1] - ma)).sum();
    let den: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let r = num / den;
    assert!(r.abs() < 3.0 / n.sqrt(), "lag-1 correlation {r}");
}

#[test]
fn trace_depends_only_on_configuration() {
    let mut cfg = SimConfig::defaults(Architecture::Router, 8, 55);
    cfg.n_pairs = Some(100);
    let a = run(&cfg);
    let b = run(&cfg);
    assert_eq!(a.trace_digest, b.trace_digest);
    assert_eq!(a.records, b.records);
    cfg.master_seed = 56;
    assert_ne!(run(&cfg).trace_digest, a.trace_digest);
}

#[test]
fn two_register_idle_matches_geometric_mismatch() {
    let p: f64 = 0.2;
    let mut cfg = quiet(Architecture::Router, 2, p, 77);
    cfg.n_pairs = Some(3000);
    let out = run(&cfg);
    let idle: Vec<f64> = out
        .records
        .iter()
        .map(|r| r.idle_cycles_left.max(r.idle_cycles_right))
        .collect();
    // E|G1 - G2| = sum over d of d P(|G1 - G2| = d), with P(G1 - G2 = d) = p^2 q^d / (1 - q^2).
    let q = 1.0 - p;
    let expected: f64 = (1..5000)
        .map(|d| 2.0 * d as f64 * p * p * q.powi(d) / (1.0 - q * q))
        .sum();
    let z = (mean(&idle) - expected) / sem(&idle);
    assert!(
        z.abs() <= 3.0,
        "mean {} vs {expected} (z = {z})",
        mean(&idle)
    );
}

#[test]
fn saturated_local_station_limits_the_rate() {
    let p_local = 1.0 / 3.0;
    let mut cfg = quiet(Architecture::Router, 32, 1.0, 90);
    cfg.links.p_local = Some(p_local);
    cfg.n_pairs = Some(4000);
    let out = run(&cfg);
    let t_local = cfg.left.prep_time;
    let expected = p_local / t_local;
    let rate = out.rate_hz(None);
    // Per-pair station time is geometric; its relative spread is sqrt(1 - p).
    let sigma = expected * (1.0 - p_local).sqrt() / (out.records.len() as f64).sqrt();
    assert!(
        (rate - expected).abs() <= 3.0 * sigma,
        "rate {rate} vs {expected} +/- {sigma}"
    );
}

#[test]
fn storage_starts_when_the_swap_completes() {
    let mut cfg = quiet(Architecture::Router, 2, 1.0, 4);
    cfg.links.p_local = Some(1.0);
    cfg.n_pairs = Some(5);
    let out = run(&cfg);
    let first = &out.records[0];
    let herald = ns(out.cycle_period[0]);
    let swap = ns(cfg.timing.swap);
    assert_eq!(first.success_times.0.as_nanos(), herald + swap);
    assert_eq!(
        first.success_times.1.map(SimTime::as_nanos),
        Some(herald + swap)
    );
}
