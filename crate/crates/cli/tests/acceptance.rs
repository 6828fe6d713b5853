//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.
//!
//! Run with `cargo test -p heatlens-cli --test acceptance`.

use std::collections::{BTreeMap, HashSet};
use std::result::Result;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{Datelike, NaiveDate};
use heatlens_api::{router, schema};
use heatlens_core::diagnostics::*;
use heatlens_core::stats::*;
use heatlens_core::store::*;
use heatlens_core::synth::{generate, generate_table, DefectSpec, GeneratorConfig};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tower::ServiceExt;

const ORACLE_TOL: f64 = 1e-5;
const MEDCOUPLE_TOL: f64 = 1e-9;
const MEDCOUPLE_SAMPLES: usize = 1000;
const PROPERTY_CASES: u32 = 500;
const SPIKE_MIN_RATIO: f64 = 20.0;
const DEAD_FILTER: &str = "energy.null_rate > 0.9";
const SCATTER_PAIRS: usize = 250_000;
const SCATTER_CAP: usize = 100_000;

const LIMIT_ORACLES: Duration = Duration::from_secs(1);
const LIMIT_CONSTANTS: Duration = Duration::from_secs(1);
const LIMIT_MEDCOUPLE: Duration = Duration::from_secs(60);
const LIMIT_PROPERTIES: Duration = Duration::from_secs(60);
const LIMIT_ROUND_TRIP: Duration = Duration::from_secs(120);
const LIMIT_COLD_RUN: Duration = Duration::from_secs(60);
const LIMIT_CACHED_RUN: Duration = Duration::from_secs(10);

type Check = Result<String, String>;
type Criterion = (&'static str, Option<Duration>, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("robust-statistics oracles", Some(LIMIT_ORACLES), oracles),
        (
            "constants and status boundaries",
            Some(LIMIT_CONSTANTS),
            constants,
        ),
        (
            "medcouple equivalence",
            Some(LIMIT_MEDCOUPLE),
            medcouple_equivalence,
        ),
        ("property suite", Some(LIMIT_PROPERTIES), properties),
        ("generator round-trip", Some(LIMIT_ROUND_TRIP), round_trip),
        ("performance", None, performance),
        ("scatter cap", None, scatter_cap),
        ("api contract", None, api_contract),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check)
            .unwrap_or_else(|e| Err(format!("panicked: {}", panic_text(&e))));
        let elapsed = start.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(limit)) if elapsed > limit => {
                Err(format!("took {elapsed:.2?}, limit {limit:?}"))
            }
            (o, _) => o,
        };
        let timing = match limit {
            Some(l) => format!("{elapsed:.2?} / {l:?}"),
            None => format!("{elapsed:.2?}"),
        };
        match outcome {
            Ok(detail) => println!("PASS  {name} [{timing}] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name} [{timing}] {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_text(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_default()
}

fn oracles() -> Check {
    let tol = ORACLE_TOL;
    let s = robust_summary(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
    ensure!(s.median == 3.0 && s.mad == 1.0, "summary {s:?}");
    let z = modified_z_scores(&[1.0, 2.0, 3.0, 4.0, 100.0], ANOMALY_THRESHOLD);
    ensure!(close(z.scores[4], 65.4265, tol), "M(100) = {}", z.scores[4]);
    ensure!(
        z.flags == [false, false, false, false, true],
        "flags {:?}",
        z.flags
    );
    let mc = medcouple(&[0.0, 1.0, 3.0, 10.0]).value;
    ensure!(close(mc, 0.3, tol), "medcouple {mc}");
    let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0])
        .unwrap()
        .unwrap();
    ensure!(close(r, 0.98198, tol), "pearson {r}");
    let rho = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 3.0, 2.0, 4.0])
        .unwrap()
        .unwrap();
    ensure!(close(rho, 0.94868, tol), "spearman {rho}");
    ensure!(
        pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0])
            .unwrap()
            .is_none(),
        "constant input must give no correlation"
    );
    Ok(format!("tolerance {tol:e}"))
}

/// Values with `k` of `n` equal to `odd` and the rest to 1.
fn rate_sample(n: usize, k: usize, odd: f64) -> Vec<f64> {
    let mut v = vec![1.0; n];
    v[..k].fill(odd);
    v
}

fn constants() -> Check {
    use QualityStatus::{Green, Red, Yellow};
    ensure!(MODIFIED_Z_FACTOR == 0.6745, "factor {MODIFIED_Z_FACTOR}");
    ensure!(ANOMALY_THRESHOLD == 3.5, "threshold {ANOMALY_THRESHOLD}");

    // a score equal to the threshold is not an anomaly
    let score = modified_z_scores(&[0.0, 0.0, 0.0, 0.0, 1.0], ANOMALY_THRESHOLD).scores[4];
    ensure!(
        !modified_z_scores(&[0.0, 0.0, 0.0, 0.0, 1.0], score).flags[4],
        "score equal to the threshold must not be flagged"
    );
    ensure!(
        modified_z_scores(&[0.0, 0.0, 0.0, 0.0, 1.0], score - 1e-9).flags[4],
        "score above the threshold must be flagged"
    );

    let table = [
        (anomaly_status(0.0), Green),
        (anomaly_status(0.049_999), Green),
        (anomaly_status(0.05), Yellow),
        (anomaly_status(0.10), Yellow),
        (anomaly_status(0.100_001), Red),
        (null_status(0.049_999), Green),
        (null_status(0.05), Yellow),
        (null_status(0.50), Yellow),
        (null_status(0.500_001), Red),
        (skewness_status(0.2), Green),
        (skewness_status(-0.2), Green),
        (skewness_status(0.200_001), Yellow),
        (skewness_status(0.5), Yellow),
        (skewness_status(-0.500_001), Red),
    ];
    for (i, (got, want)) in table.iter().enumerate() {
        ensure!(got == want, "status case {i}: {got} != {want}");
    }

    let gauges = [
        (0.0, Red),
        (0.224_999, Red),
        (0.225, Yellow),
        (0.299_999, Yellow),
        (0.30, Green),
        (0.70, Green),
        (0.700_001, Yellow),
        (0.775, Yellow),
        (0.775_001, Red),
        (1.0, Red),
    ];
    for (p, want) in gauges {
        let g = gauge_status(p, 0.0, 1.0);
        ensure!(g.status == want, "gauge at {p}: {} != {want}", g.status);
    }
    let widths: Vec<f64> = CENTERED_ZONES.iter().map(|z| z.hi - z.lo).collect();
    for (w, want) in widths.iter().zip([0.225, 0.075, 0.40, 0.075, 0.225]) {
        ensure!(close(*w, want, 1e-12), "zone widths {widths:?}");
    }

    // anomaly and null rates measured on data, exactly at the boundaries
    for (k, want) in [(4, Green), (5, Yellow), (10, Yellow), (11, Red)] {
        let xs = rate_sample(100, k, 1e6);
        let kpi = anomaly_kpi(&xs);
        ensure!(kpi == want, "{k}/100 outliers: {kpi}");
    }
    for (k, want) in [(4, Green), (5, Yellow), (50, Yellow), (51, Red)] {
        let got = null_rate_status(100, k);
        ensure!(got == want, "{k}/100 nulls: {got}");
    }
    Ok(format!(
        "{} status and {} gauge cases",
        table.len() + 8,
        gauges.len()
    ))
}

fn anomaly_kpi(xs: &[f64]) -> QualityStatus {
    let ds = Dataset::new(
        single_meter_table(xs.iter().map(|&v| Some(v))),
        DiagnosticsConfig::default(),
    );
    ds.column_kpi("energy", &Scope::All).unwrap().anomaly.status
}

fn null_rate_status(n: usize, nulls: usize) -> QualityStatus {
    let values = (0..n).map(|i| (i >= nulls).then_some(i as f64));
    let ds = Dataset::new(single_meter_table(values), DiagnosticsConfig::default());
    let kpi = ds.column_kpi("energy", &Scope::All).unwrap();
    kpi.nulls.status
}

fn single_meter_table(values: impl Iterator<Item = Option<f64>>) -> ReadingTable {
    let mut b = TableBuilder::new(&[ColumnSpec::new("energy", "MWh")]);
    let t0 = Hour::from_ymd_h(2023, 1, 1, 0).unwrap();
    for (i, v) in values.enumerate() {
        b.push(t0.offset(i as i64), "m1", &[v]);
    }
    b.build().0
}

/// `n` values of which at least 30% equal the sample median.
fn tied_sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let center = rng.random_range(-20i32..20) as f64;
        let ties = rng.random_range(n.div_ceil(10) * 3..=n);
        let mut xs = vec![center; ties];
        while xs.len() < n {
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            xs.push(center + side * rng.random_range(1i32..30) as f64 * 0.5);
        }
        if median(&xs) == Some(center) {
            return xs;
        }
    }
}

fn medcouple_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let mut worst = 0.0f64;
    for i in 0..MEDCOUPLE_SAMPLES {
        let n = rng.random_range(3..=500);
        let xs: Vec<f64> = if i % 2 == 0 {
            tied_sample(&mut rng, n)
        } else {
            (0..n).map(|_| rng.random_range(-1e3..1e3)).collect()
        };
        let diff = (medcouple(&xs).value - medcouple_naive(&xs).value).abs();
        ensure!(
            diff <= MEDCOUPLE_TOL,
            "sample {i} (n={n}) differs by {diff:e}"
        );
        worst = worst.max(diff);
    }
    Ok(format!(
        "{MEDCOUPLE_SAMPLES} samples, half with >=30% ties, max diff {worst:e}"
    ))
}

fn property<S: Strategy>(
    name: &str,
    seed: u64,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases: PROPERTY_CASES,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&strategy, test)
        .map_err(|e| format!("{name}: {e}"))
}

fn sample(min_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![
        prop::collection::vec(-1e3f64..1e3, min_len..200),
        prop::collection::vec((-40i32..40).prop_map(|v| v as f64 * 0.5), min_len..200),
    ]
}

fn approx(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn properties() -> Check {
    property("shift", 11, (sample(1), -1e4f64..1e4), |(xs, c)| {
        let a = robust_summary(&xs).unwrap();
        let moved: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let b = robust_summary(&moved).unwrap();
        prop_assert!(approx(b.median, a.median + c, 1e-9));
        prop_assert!((b.mad - a.mad).abs() <= 1e-9 * (1.0 + c.abs() + a.mad));
        Ok(())
    })?;
    let factor = prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3];
    property("scale", 12, (sample(1), factor), |(xs, k)| {
        let a = robust_summary(&xs).unwrap();
        let scaled: Vec<f64> = xs.iter().map(|x| k * x).collect();
        prop_assert!(approx(
            robust_summary(&scaled).unwrap().mad,
            k.abs() * a.mad,
            1e-9
        ));
        let za = modified_z_scores(&xs, ANOMALY_THRESHOLD);
        let zb = modified_z_scores(&scaled, ANOMALY_THRESHOLD);
        for (p, q) in za.scores.iter().zip(&zb.scores) {
            prop_assert!(approx(*q, k.signum() * p, 1e-9));
        }
        Ok(())
    })?;
    property("medcouple antisymmetry", 13, sample(3), |xs| {
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        prop_assert!((medcouple(&xs).value + medcouple(&neg).value).abs() < 1e-12);
        Ok(())
    })?;
    let affine = (sample(3), 1e-3f64..1e3, -1e3f64..1e3);
    property("medcouple affine", 14, affine, |(xs, a, b)| {
        let moved: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        prop_assert!((medcouple(&moved).value - medcouple(&xs).value).abs() < 1e-9);
        Ok(())
    })?;
    let pairs = prop::collection::vec((-100i32..100, -100i32..100), 2..150);
    property("spearman monotone", 15, pairs, |pairs| {
        let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let fx: Vec<f64> = x.iter().map(|v| v * v * v + 3.0 * v).collect();
        let gy: Vec<f64> = y.iter().map(|v| (v / 50.0).exp()).collect();
        match (spearman(&x, &y).unwrap(), spearman(&fx, &gy).unwrap()) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a, b),
        }
        Ok(())
    })?;
    property(
        "histogram conservation",
        16,
        (sample(1), 1usize..120),
        |(xs, bins)| {
            let h = histogram(&xs, bins).unwrap().unwrap();
            prop_assert_eq!(h.counts.iter().sum::<u64>(), xs.len() as u64);
            Ok(())
        },
    )?;
    property("boxplot chain", 17, sample(1), |xs| {
        let b = boxplot_stats(&xs).unwrap();
        prop_assert!(b.min <= b.lower_whisker && b.lower_whisker <= b.q1);
        prop_assert!(b.q1 <= b.median && b.median <= b.q3);
        prop_assert!(b.q3 <= b.upper_whisker && b.upper_whisker <= b.max);
        Ok(())
    })?;
    let rows = prop::collection::vec(
        (
            0i64..60,
            0usize..6,
            prop::option::weighted(0.7, -5.0f64..50.0),
        ),
        0..200,
    );
    property(
        "accounting identity",
        18,
        (rows, any::<bool>()),
        |(rows, to_end)| {
            let mut b = TableBuilder::new(&[ColumnSpec::new("energy", "MWh")]);
            let t0 = Hour::from_ymd_h(2023, 1, 1, 0).unwrap();
            for (h, m, v) in &rows {
                b.push(t0.offset(*h), &format!("m{m}"), &[*v]);
            }
            let window_mode = if to_end {
                WindowMode::FirstToDatasetEnd
            } else {
                WindowMode::FirstToLast
            };
            let config = DiagnosticsConfig {
                window_mode,
                ..DiagnosticsConfig::default()
            };
            let ds = Dataset::new(b.build().0, config);
            let mut scopes = vec![Scope::All];
            scopes.extend(
                ds.table()
                    .meter_ids()
                    .iter()
                    .map(|id| Scope::meter(id.clone())),
            );
            for scope in &scopes {
                let n = &ds.column_kpi("energy", scope).unwrap().nulls;
                prop_assert_eq!(
                    n.null_count + n.structurally_missing_count + n.non_null_count,
                    n.expected_count
                );
            }
            Ok(())
        },
    )?;
    Ok(format!("8 properties x {PROPERTY_CASES} seeded cases"))
}

fn round_trip() -> Check {
    let config = GeneratorConfig {
        seed: 2024,
        meter_count: 200,
        days: 365,
        start: NaiveDate::from_ymd_opt(2023, 1, 1).unwrap(),
        onboarding_fraction: 0.1,
        defects: DefectSpec {
            spike_rate: 0.0002,
            negative_rate: 0.0005,
            summer_dropout_probability: 0.04,
            month_end_dropout: true,
            dead_meter_count: 5,
            whole_hour_dropout_count: 12,
            ..DefectSpec::default()
        },
        ..GeneratorConfig::default()
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let generated = generate(&config, dir.path()).map_err(|e| e.to_string())?;
    let truth = generated.ground_truth;
    let schema = SchemaConfig::default();
    let (table, _) = load_csv(&generated.files, &schema).map_err(|e| e.to_string())?;
    let rows = table.row_count();
    let ds = Dataset::new(table, DiagnosticsConfig::from(&schema));

    let report = ds.violations().map_err(|e| e.to_string())?;
    let energy = report
        .rules
        .iter()
        .find(|r| r.column == "energy")
        .ok_or("no energy rule")?;
    let mut injected: BTreeMap<&str, u64> = BTreeMap::new();
    for n in &truth.negatives {
        *injected.entry(&n.meter_id).or_default() += 1;
    }
    let found: BTreeMap<&str, u64> = energy
        .per_meter
        .iter()
        .map(|m| (m.meter_id.as_str(), m.count))
        .collect();
    ensure!(
        !injected.is_empty() && found == injected,
        "negatives per meter differ: {} injected, {} found",
        truth.negatives.len(),
        energy.total
    );

    let missing = ds.missing_timestamps();
    ensure!(
        missing.timestamps == truth.whole_hour_dropouts,
        "missing timestamps {} vs injected {}",
        missing.count,
        truth.whole_hour_dropouts.len()
    );

    let dead = ds.matching_meters(DEAD_FILTER).map_err(|e| e.to_string())?;
    ensure!(
        truth.dead_meters.len() == 5 && dead == truth.dead_meters,
        "dead meters {dead:?} vs {:?}",
        truth.dead_meters
    );

    let spikes = spikes_flagged(&ds, &truth.spikes)?;

    let heatmap = ds
        .missing_value_heatmap("energy", true)
        .map_err(|e| e.to_string())?;
    let season_mean = |months: &[u32]| {
        let (mut sum, mut n) = (0.0, 0usize);
        for (d, date) in heatmap.x_axis.iter().enumerate() {
            if months.contains(&date.month()) {
                for h in 0..24 {
                    if heatmap.active[h][d] > 0 {
                        sum += heatmap.cells[h][d];
                        n += 1;
                    }
                }
            }
        }
        sum / n.max(1) as f64
    };
    let (summer, winter) = (season_mean(&[6, 7, 8]), season_mean(&[12, 1, 2]));
    ensure!(summer > winter, "summer {summer:.4} <= winter {winter:.4}");

    Ok(format!(
        "{rows} rows; {} negatives, {} missing timestamps, {} dead meters, {spikes} spikes, summer {summer:.4} > winter {winter:.4}",
        truth.negatives.len(),
        missing.count,
        dead.len()
    ))
}

/// Every injected spike of at least 20x the meter level is flagged within
/// its own meter's series.
fn spikes_flagged(
    ds: &Dataset,
    spikes: &[heatlens_core::synth::InjectedValue],
) -> Result<usize, String> {
    let table = ds.table();
    let energy = table.column("energy").ok_or("no energy column")?;
    let mut by_meter: BTreeMap<&str, HashSet<Hour>> = BTreeMap::new();
    for s in spikes
        .iter()
        .filter(|s| s.value >= SPIKE_MIN_RATIO * s.level)
    {
        by_meter.entry(&s.meter_id).or_default().insert(s.timestamp);
    }
    let mut checked = 0;
    for (meter_id, hours) in &by_meter {
        let m = table
            .meter_position(meter_id)
            .ok_or("spiked meter missing")?;
        let rows = table.meter_rows(m);
        let (mut values, mut stamps) = (Vec::new(), Vec::new());
        for (&r, &t) in rows.rows.iter().zip(rows.times) {
            if let Some(v) = energy.get(r as usize) {
                values.push(v);
                stamps.push(table.timestamps()[t as usize]);
            }
        }
        let z = modified_z_scores(&values, ANOMALY_THRESHOLD);
        let flagged: HashSet<Hour> = stamps
            .iter()
            .zip(&z.flags)
            .filter(|(_, &f)| f)
            .map(|(h, _)| *h)
            .collect();
        for h in hours {
            ensure!(
                flagged.contains(h),
                "spike at {h} on {meter_id} not flagged"
            );
            checked += 1;
        }
    }
    ensure!(checked > 0, "no spikes injected");
    Ok(checked)
}

fn performance() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = GeneratorConfig {
        meter_count: 1000,
        days: 365,
        ..GeneratorConfig::default()
    };
    let generated = generate(&config, &dir.path().join("data")).map_err(|e| e.to_string())?;
    let schema = SchemaConfig::default();
    let cache = dir.path().join("cache");

    let timed = |expect_hit: bool| -> Result<(Duration, usize), String> {
        let start = Instant::now();
        let loaded = ingest_with_cache(&generated.files, &schema, Some(&cache))
            .map_err(|e| e.to_string())?;
        ensure!(
            loaded.cache_hit == expect_hit,
            "cache hit was {}",
            loaded.cache_hit
        );
        let rows = loaded.table.row_count();
        let ds = Dataset::new(loaded.table, DiagnosticsConfig::from(&schema));
        let kpis = ds.column_kpis(&Scope::All).map_err(|e| e.to_string())?;
        ensure!(
            kpis.len() == schema.columns.len(),
            "{} KPI bundles",
            kpis.len()
        );
        Ok((start.elapsed(), rows))
    };
    let (cold, rows) = timed(false)?;
    let (cached, _) = timed(true)?;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let detail = format!(
        "{rows} rows on {cores} core(s): ingest+cache+KPIs {cold:.2?} / {LIMIT_COLD_RUN:?}, cached+KPIs {cached:.2?} / {LIMIT_CACHED_RUN:?}"
    );
    ensure!(
        cold <= LIMIT_COLD_RUN && cached <= LIMIT_CACHED_RUN,
        "{detail}"
    );
    ensure!(rows >= 8_700_000, "{detail}");
    Ok(detail)
}

fn scatter_cap() -> Check {
    let mut b = TableBuilder::new(&[ColumnSpec::new("x", ""), ColumnSpec::new("y", "")]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..SCATTER_PAIRS {
        let x: f64 = rng.random();
        b.push(
            Hour(i as i64 / 10),
            &format!("m{}", i % 10),
            &[Some(x), Some(x + rng.random::<f64>())],
        );
    }
    let table = b.build().0;
    let a = scatter_sample(&table, "x", "y", SCATTER_CAP, 7).map_err(|e| e.to_string())?;
    let again = scatter_sample(&table, "x", "y", SCATTER_CAP, 7).map_err(|e| e.to_string())?;
    let other = scatter_sample(&table, "x", "y", SCATTER_CAP, 8).map_err(|e| e.to_string())?;
    ensure!(
        a.total_pairs == SCATTER_PAIRS,
        "{} complete pairs",
        a.total_pairs
    );
    ensure!(
        a.points.len() == SCATTER_CAP && a.sampled,
        "{} points",
        a.points.len()
    );
    ensure!(a.points == again.points, "same seed gave different samples");
    ensure!(
        a.points != other.points,
        "different seeds gave the same sample"
    );
    Ok(format!(
        "{SCATTER_PAIRS} pairs -> {} points",
        a.points.len()
    ))
}

const ENDPOINTS: &[(&str, &str)] = &[
    ("/api/summary", "summary"),
    ("/api/columns", "columns"),
    ("/api/kpi?column=energy", "column_kpi"),
    ("/api/kpi?column=flow&meter=MTR00003", "column_kpi"),
    ("/api/boxplot?column=energy", "boxplot"),
    ("/api/histogram?column=energy&bins=30", "histogram"),
    ("/api/heatmap/missing?column=energy", "heatmap"),
    (
        "/api/heatmap/missing?column=energy&normalize=true",
        "heatmap",
    ),
    ("/api/heatmap/meters", "heatmap"),
    ("/api/timestamps/missing", "missing_timestamps"),
    ("/api/violations", "violations"),
    ("/api/correlation?method=pearson", "correlation"),
    ("/api/correlation?method=spearman", "correlation"),
    (
        "/api/scatter?x=energy&y=flow&max_points=1000&seed=3",
        "scatter",
    ),
    (
        "/api/timeseries?meter=MTR00001&column=energy&max_points=200",
        "timeseries",
    ),
    (
        "/api/meters?filter=energy.null_rate%20%3E%200.9&sort=-energy.mean",
        "meter_stats_page",
    ),
    ("/api/meters?page=1&page_size=10", "meter_stats_page"),
];

const ERRORS: &[(&str, StatusCode, &str)] = &[
    (
        "/api/kpi?column=bogus",
        StatusCode::NOT_FOUND,
        "UNKNOWN_COLUMN",
    ),
    (
        "/api/histogram?column=bogus",
        StatusCode::NOT_FOUND,
        "UNKNOWN_COLUMN",
    ),
    (
        "/api/scatter?x=energy&y=bogus",
        StatusCode::NOT_FOUND,
        "UNKNOWN_COLUMN",
    ),
    (
        "/api/meters?filter=energy.null_rate%20%3E",
        StatusCode::BAD_REQUEST,
        "BAD_FILTER",
    ),
    (
        "/api/meters?filter=bogus.mean%20%3C%201",
        StatusCode::BAD_REQUEST,
        "BAD_FILTER",
    ),
    (
        "/api/meters/export?filter=energy.nope%20%3E%201",
        StatusCode::BAD_REQUEST,
        "BAD_FILTER",
    ),
];

async fn fetch(app: &Router, uri: &str) -> (StatusCode, String, Vec<u8>) {
    let response = app
        .clone()
        .oneshot(Request::get(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let status = response.status();
    let content_type = response
        .headers()
        .get("content-type")
        .and_then(|v| v.to_str().ok())
        .unwrap_or_default()
        .to_owned();
    let body = to_bytes(response.into_body(), usize::MAX)
        .await
        .unwrap()
        .to_vec();
    (status, content_type, body)
}

fn validate(schema_name: &str, body: &[u8]) -> Result<(), String> {
    let instance: Value = serde_json::from_slice(body).map_err(|e| e.to_string())?;
    let schema: Value = serde_json::from_str(schema(schema_name).ok_or("missing schema")?)
        .map_err(|e| e.to_string())?;
    let validator = jsonschema::validator_for(&schema).map_err(|e| e.to_string())?;
    let first = validator
        .iter_errors(&instance)
        .next()
        .map(|e| format!("{schema_name}: {e} at {}", e.instance_path));
    first.map_or(Ok(()), Err)
}

fn api_contract() -> Check {
    let config = GeneratorConfig {
        meter_count: 30,
        days: 90,
        start: NaiveDate::from_ymd_opt(2023, 5, 1).unwrap(),
        onboarding_fraction: 0.2,
        defects: DefectSpec {
            spike_rate: 0.001,
            negative_rate: 0.002,
            summer_dropout_probability: 0.05,
            month_end_dropout: true,
            dead_meter_count: 2,
            whole_hour_dropout_count: 5,
            ..DefectSpec::default()
        },
        ..GeneratorConfig::default()
    };
    let (table, _) = generate_table(&config).map_err(|e| e.to_string())?;
    let ds = Arc::new(Dataset::new(table, DiagnosticsConfig::default()));
    let app = router(ds, None);
    let runtime = tokio::runtime::Builder::new_current_thread()
        .build()
        .map_err(|e| e.to_string())?;
    runtime.block_on(async {
        for (uri, schema_name) in ENDPOINTS {
            let (status, content_type, body) = fetch(&app, uri).await;
            ensure!(status == StatusCode::OK, "{uri}: {status}");
            ensure!(content_type == "application/json", "{uri}: {content_type}");
            validate(schema_name, &body).map_err(|e| format!("{uri}: {e}"))?;
        }
        let (status, content_type, body) = fetch(
            &app,
            "/api/meters/export?filter=energy.null_rate%20%3E%200.9",
        )
        .await;
        ensure!(
            status == StatusCode::OK && content_type.starts_with("text/csv"),
            "export: {status} {content_type}"
        );
        ensure!(body.starts_with(b"meter_id"), "export body lacks header");
        for (uri, want_status, want_code) in ERRORS {
            let (status, _, body) = fetch(&app, uri).await;
            ensure!(status == *want_status, "{uri}: {status}");
            validate("error", &body).map_err(|e| format!("{uri}: {e}"))?;
            let code: Value = serde_json::from_slice(&body).map_err(|e| e.to_string())?;
            ensure!(code["code"] == *want_code, "{uri}: {}", code["code"]);
        }
        Ok(format!(
            "{} endpoints schema-valid, {} error paths",
            ENDPOINTS.len() + 1,
            ERRORS.len()
        ))
    })
}
