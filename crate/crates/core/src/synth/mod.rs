//! Deterministic synthetic district-heating readings with labelled defects.
//!
//! Each meter's energy is `scale * (base + a cos(annual) + d cos(diurnal) + noise)`,
//! peaking mid-January and at 07:00 and clamped at zero. Temperatures
//! follow the season, flow is derived from energy and the temperature
//! spread, and `energy_computed` is energy times a per-meter factor near 1.
//! Defects (spikes, negative energy, summer and month-end dropouts, dead
//! meters, whole-hour outages, late onboarding) are injected from a
//! planning stream and every one is listed in the [`GroundTruth`].

use std::f64::consts::TAU;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::store::{Hour, ReadingTable, SchemaConfig, TableBuilder, DEFAULT_COLUMNS};

/// Specific heat of water in Wh per litre and kelvin.
const WATER_WH_PER_L_K: f64 = 1.163;
const MIN_SPREAD_K: f64 = 5.0;
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

#[derive(Debug, thiserror::Error)]
pub enum GeneratorError {
    #[error("invalid generator config: {0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub meter_count: usize,
    pub meter_prefix: String,
    /// First day (UTC midnight).
    pub start: NaiveDate,
    pub days: u32,
    /// Share of meters whose first reading falls uniformly inside the range.
    pub onboarding_fraction: f64,
    pub load: LoadModel,
    pub defects: DefectSpec,
    /// One CSV per calendar month instead of a single file.
    pub split_by_month: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadModel {
    /// Mean hourly energy of a typical meter, MWh.
    pub base_level_mwh: f64,
    /// Each meter's scale is drawn uniformly from `1 ± level_spread`.
    pub level_spread: f64,
    /// Seasonal swing of a typical meter, MWh.
    pub annual_amplitude_mwh: f64,
    /// Daily swing of a typical meter, MWh.
    pub diurnal_amplitude_mwh: f64,
    /// Standard deviation of the hourly noise of a typical meter, MWh.
    pub noise_std_mwh: f64,
    pub forward_temp_c: f64,
    pub return_temp_c: f64,
    pub temp_noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefectSpec {
    /// Probability per reading that energy jumps to `spike_multiplier` times the meter level.
    pub spike_rate: f64,
    pub spike_multiplier: f64,
    /// Probability per reading that energy turns negative.
    pub negative_rate: f64,
    /// Probability per meter-day in June to August that a meter reports only nulls.
    pub summer_dropout_probability: f64,
    /// On the last day of each month a share of meters sends no rows.
    pub month_end_dropout: bool,
    pub month_end_dropout_fraction: f64,
    /// Meters whose rows are all null.
    pub dead_meter_count: usize,
    /// Hours with no rows from any meter; never the first or last hour.
    pub whole_hour_dropout_count: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            meter_count: 200,
            meter_prefix: "MTR".into(),
            start: NaiveDate::from_ymd_opt(2023, 1, 1).unwrap(),
            days: 365,
            onboarding_fraction: 0.0,
            load: LoadModel::default(),
            defects: DefectSpec::default(),
            split_by_month: false,
        }
    }
}

impl Default for LoadModel {
    fn default() -> Self {
        Self {
            base_level_mwh: 0.05,
            level_spread: 0.1,
            annual_amplitude_mwh: 0.0225,
            diurnal_amplitude_mwh: 0.005,
            noise_std_mwh: 0.0015,
            forward_temp_c: 70.0,
            return_temp_c: 40.0,
            temp_noise_std: 1.0,
        }
    }
}

impl Default for DefectSpec {
    fn default() -> Self {
        Self {
            spike_rate: 0.0,
            spike_multiplier: 25.0,
            negative_rate: 0.0,
            summer_dropout_probability: 0.0,
            month_end_dropout: false,
            month_end_dropout_fraction: 0.5,
            dead_meter_count: 0,
            whole_hour_dropout_count: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, GeneratorError> {
        let config: Self =
            toml::from_str(text).map_err(|e| GeneratorError::Invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, GeneratorError> {
        let text = fs::read_to_string(path).map_err(|source| GeneratorError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn hours(&self) -> usize {
        self.days as usize * 24
    }

    pub fn meter_id(&self, index: usize) -> String {
        format!("{}{:05}", self.meter_prefix, index + 1)
    }

    fn late_meter_count(&self) -> usize {
        (self.onboarding_fraction * self.meter_count as f64).floor() as usize
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        let fail = |m: String| Err(GeneratorError::Invalid(m));
        let d = &self.defects;
        let l = &self.load;
        for (name, v) in [
            ("onboarding_fraction", self.onboarding_fraction),
            ("defects.spike_rate", d.spike_rate),
            ("defects.negative_rate", d.negative_rate),
            (
                "defects.summer_dropout_probability",
                d.summer_dropout_probability,
            ),
            (
                "defects.month_end_dropout_fraction",
                d.month_end_dropout_fraction,
            ),
            ("load.level_spread", l.level_spread),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must be within [0, 1], got {v}"));
            }
        }
        for (name, v) in [
            ("defects.spike_multiplier", d.spike_multiplier),
            ("load.base_level_mwh", l.base_level_mwh),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("load.annual_amplitude_mwh", l.annual_amplitude_mwh),
            ("load.diurnal_amplitude_mwh", l.diurnal_amplitude_mwh),
            ("load.noise_std_mwh", l.noise_std_mwh),
            ("load.temp_noise_std", l.temp_noise_std),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} must be non-negative, got {v}"));
            }
        }
        if l.forward_temp_c - l.return_temp_c < MIN_SPREAD_K {
            return fail("load.forward_temp_c must exceed load.return_temp_c by at least 5".into());
        }
        if d.spike_rate + d.negative_rate > 1.0 {
            return fail("defects.spike_rate + defects.negative_rate must not exceed 1".into());
        }
        if self.meter_count == 0 || self.days == 0 {
            return fail("meter_count and days must be positive".into());
        }
        if self.meter_prefix.is_empty() || self.meter_prefix.contains([',', '"', '\n', '\r']) {
            return fail("meter_prefix must be non-empty plain text".into());
        }
        if self.late_meter_count() >= self.meter_count {
            return fail("onboarding_fraction leaves no meter reporting from the start".into());
        }
        if d.dead_meter_count > self.meter_count {
            return fail("defects.dead_meter_count exceeds meter_count".into());
        }
        if d.whole_hour_dropout_count + 2 > self.hours() && d.whole_hour_dropout_count > 0 {
            return fail("defects.whole_hour_dropout_count leaves no interior hour".into());
        }
        Ok(())
    }
}

/// Labels for every injected defect.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub meters: Vec<String>,
    pub first_hour: Option<Hour>,
    pub last_hour: Option<Hour>,
    pub rows_written: u64,
    pub late_meters: Vec<LateMeter>,
    pub dead_meters: Vec<String>,
    pub whole_hour_dropouts: Vec<Hour>,
    /// Meter-days with no rows (last day of a month).
    pub month_end_dropouts: Vec<MeterDay>,
    /// Meter-days whose rows are all null (June to August).
    pub summer_dropouts: Vec<MeterDay>,
    pub spikes: Vec<InjectedValue>,
    pub negatives: Vec<InjectedValue>,
    pub counts: DefectCounts,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DefectCounts {
    pub late_meters: usize,
    pub dead_meters: usize,
    pub whole_hour_dropouts: usize,
    pub month_end_dropouts: usize,
    pub summer_dropouts: usize,
    pub spikes: usize,
    pub negatives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LateMeter {
    pub meter_id: String,
    pub first_hour: Hour,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterDay {
    pub meter_id: String,
    pub date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectedValue {
    pub meter_id: String,
    pub timestamp: Hour,
    pub value: f64,
    /// The meter's typical hourly energy.
    pub level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DayState {
    Normal,
    AllNull,
    Absent,
}

struct MeterPlan {
    scale: f64,
    computed_factor: f64,
    start_hour: usize,
    dead: bool,
    days: Vec<DayState>,
}

struct Plan {
    meters: Vec<MeterPlan>,
    dropped_hours: Vec<bool>,
    truth: GroundTruth,
}

fn day_date(config: &GeneratorConfig, day: usize) -> NaiveDate {
    config.start + chrono::Days::new(day as u64)
}

fn plan(config: &GeneratorConfig) -> Plan {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.meter_count;
    let days = config.days as usize;
    let hours = config.hours();
    let start = Hour::from_ymd_h(
        config.start.year(),
        config.start.month(),
        config.start.day(),
        0,
    )
    .expect("valid start date");
    let d = &config.defects;
    let l = &config.load;
    let mut truth = GroundTruth {
        seed: config.seed,
        meters: (0..n).map(|m| config.meter_id(m)).collect(),
        ..GroundTruth::default()
    };

    let mut meters: Vec<MeterPlan> = (0..n)
        .map(|_| MeterPlan {
            scale: 1.0 + l.level_spread * rng.random_range(-1.0..=1.0),
            computed_factor: 1.02 + rng.random_range(-0.005..=0.005),
            start_hour: 0,
            dead: false,
            days: vec![DayState::Normal; days],
        })
        .collect();

    let mut late: Vec<usize> = sample(&mut rng, n, config.late_meter_count()).into_vec();
    late.sort_unstable();
    for &m in &late {
        meters[m].start_hour = rng.random_range(1..hours.max(2)).min(hours - 1);
        truth.late_meters.push(LateMeter {
            meter_id: config.meter_id(m),
            first_hour: start.offset(meters[m].start_hour as i64),
        });
    }

    let mut dead: Vec<usize> = sample(&mut rng, n, d.dead_meter_count).into_vec();
    dead.sort_unstable();
    for &m in &dead {
        meters[m].dead = true;
        truth.dead_meters.push(config.meter_id(m));
    }

    let mut dropped_hours = vec![false; hours];
    if d.whole_hour_dropout_count > 0 {
        let mut picks: Vec<usize> = sample(&mut rng, hours - 2, d.whole_hour_dropout_count)
            .into_iter()
            .map(|i| i + 1)
            .collect();
        picks.sort_unstable();
        for h in picks {
            dropped_hours[h] = true;
            truth.whole_hour_dropouts.push(start.offset(h as i64));
        }
    }

    if d.month_end_dropout {
        // the final day is skipped so no meter's window is cut short
        for day in 0..days.saturating_sub(1) {
            let date = day_date(config, day);
            if date
                .succ_opt()
                .is_none_or(|next| next.month() == date.month())
            {
                continue;
            }
            let candidates: Vec<usize> = (0..n)
                .filter(|&m| meters[m].start_hour < day * 24)
                .collect();
            let k = ((d.month_end_dropout_fraction * candidates.len() as f64).round() as usize)
                .min(candidates.len().saturating_sub(1));
            let mut chosen: Vec<usize> = sample(&mut rng, candidates.len(), k)
                .into_iter()
                .map(|i| candidates[i])
                .collect();
            chosen.sort_unstable();
            for m in chosen {
                meters[m].days[day] = DayState::Absent;
                truth.month_end_dropouts.push(MeterDay {
                    meter_id: config.meter_id(m),
                    date,
                });
            }
        }
    }

    if d.summer_dropout_probability > 0.0 {
        for (m, meter) in meters.iter_mut().enumerate() {
            for day in 0..days {
                let date = day_date(config, day);
                if !(6..=8).contains(&date.month()) {
                    continue;
                }
                // drawn for every summer day so the stream does not depend on the other defects
                let hit = rng.random_bool(d.summer_dropout_probability);
                if hit
                    && !meter.dead
                    && meter.start_hour <= day * 24
                    && meter.days[day] == DayState::Normal
                {
                    meter.days[day] = DayState::AllNull;
                    truth.summer_dropouts.push(MeterDay {
                        meter_id: config.meter_id(m),
                        date,
                    });
                }
            }
        }
    }

    Plan {
        meters,
        dropped_hours,
        truth,
    }
}

/// Rounds to the precision the CSV carries so text and in-memory output agree.
fn round_to(v: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    let r = (v * scale).round() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Walks every emitted row in (timestamp, meter) order.
fn emit(
    config: &GeneratorConfig,
    mut sink: impl FnMut(Hour, usize, &[Option<f64>; 5]) -> io::Result<()>,
) -> io::Result<GroundTruth> {
    let Plan {
        meters,
        dropped_hours,
        mut truth,
    } = plan(config);
    let start = Hour::from_ymd_h(
        config.start.year(),
        config.start.month(),
        config.start.day(),
        0,
    )
    .expect("valid start date");
    let l = &config.load;
    let d = &config.defects;
    let mut rngs: Vec<ChaCha8Rng> = (0..meters.len())
        .map(|m| {
            let mut r = ChaCha8Rng::seed_from_u64(config.seed);
            r.set_stream(1 + m as u64);
            r
        })
        .collect();

    for (h, &dropped) in dropped_hours.iter().enumerate() {
        if dropped {
            continue;
        }
        let hour = start.offset(h as i64);
        let day = h / 24;
        let annual = (TAU * (hour.date().ordinal0() as f64 - 14.0) / 365.25).cos();
        let diurnal = (TAU * (hour.hour_of_day() as f64 - 7.0) / 24.0).cos();
        let shape =
            l.base_level_mwh + l.annual_amplitude_mwh * annual + l.diurnal_amplitude_mwh * diurnal;
        for (m, meter) in meters.iter().enumerate() {
            if h < meter.start_hour || meter.days[day] == DayState::Absent {
                continue;
            }
            let rng = &mut rngs[m];
            let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            let u: f64 = rng.random();

            let level = meter.scale * l.base_level_mwh;
            let clean = (meter.scale * (shape + l.noise_std_mwh * z[0])).max(0.0);
            let forward = l.forward_temp_c
                + 0.2 * (l.forward_temp_c - l.return_temp_c) * annual
                + l.temp_noise_std * z[1];
            let ret = l.return_temp_c
                + 0.05 * (l.forward_temp_c - l.return_temp_c) * annual
                + l.temp_noise_std * z[2];
            let spread = (forward - ret).max(MIN_SPREAD_K);
            let flow = clean * 1e6 / (WATER_WH_PER_L_K * spread) * (1.0 + 0.01 * z[3]).max(0.0);

            if meter.dead || meter.days[day] == DayState::AllNull {
                sink(hour, m, &[None; 5])?;
                truth.rows_written += 1;
                continue;
            }
            let mut energy = round_to(clean, 6);
            if u < d.spike_rate {
                energy = round_to(d.spike_multiplier * level, 6);
                truth.spikes.push(InjectedValue {
                    meter_id: config.meter_id(m),
                    timestamp: hour,
                    value: energy,
                    level,
                });
            } else if u < d.spike_rate + d.negative_rate {
                energy = round_to(
                    -level * (0.1 + 0.9 * (u - d.spike_rate) / d.negative_rate),
                    6,
                );
                if energy >= 0.0 {
                    energy = -1e-6;
                }
                truth.negatives.push(InjectedValue {
                    meter_id: config.meter_id(m),
                    timestamp: hour,
                    value: energy,
                    level,
                });
            }
            sink(
                hour,
                m,
                &[
                    Some(energy),
                    Some(round_to(forward, 2)),
                    Some(round_to(ret, 2)),
                    Some(round_to(flow, 1)),
                    Some(round_to(meter.computed_factor * clean, 6)),
                ],
            )?;
            truth.rows_written += 1;
        }
        truth.first_hour.get_or_insert(hour);
        truth.last_hour = Some(hour);
    }
    truth.counts = DefectCounts {
        late_meters: truth.late_meters.len(),
        dead_meters: truth.dead_meters.len(),
        whole_hour_dropouts: truth.whole_hour_dropouts.len(),
        month_end_dropouts: truth.month_end_dropouts.len(),
        summer_dropouts: truth.summer_dropouts.len(),
        spikes: truth.spikes.len(),
        negatives: truth.negatives.len(),
    };
    Ok(truth)
}

/// Output of [`generate`].
#[derive(Debug)]
pub struct GeneratedDataset {
    pub files: Vec<PathBuf>,
    pub ground_truth_path: PathBuf,
    pub ground_truth: GroundTruth,
}

/// Writes CSV readings (one file, or one per month) and the ground-truth
/// sidecar into `out_dir`.
pub fn generate(
    config: &GeneratorConfig,
    out_dir: &Path,
) -> Result<GeneratedDataset, GeneratorError> {
    config.validate()?;
    let io_err = |path: &Path| {
        let path = path.to_owned();
        move |source| GeneratorError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let header = std::iter::once("timestamp")
        .chain(std::iter::once("meter_id"))
        .chain(DEFAULT_COLUMNS.iter().map(|(name, _)| *name))
        .collect::<Vec<_>>()
        .join(",");
    let ids: Vec<String> = (0..config.meter_count)
        .map(|m| config.meter_id(m))
        .collect();
    let mut files: Vec<PathBuf> = Vec::new();
    let mut writer: Option<BufWriter<fs::File>> = None;
    let mut current_month = None;
    let mut stamp_hour = None;
    let mut stamp = String::new();
    let mut line = String::with_capacity(128);

    let truth = emit(config, |hour, m, cells| {
        let date = hour.date();
        let month = config.split_by_month.then(|| (date.year(), date.month()));
        if writer.is_none() || month != current_month {
            if let Some(mut w) = writer.take() {
                w.flush()?;
            }
            let name = match month {
                Some((y, mo)) => format!("readings_{y:04}-{mo:02}.csv"),
                None => "readings.csv".to_owned(),
            };
            let path = out_dir.join(name);
            let mut w = BufWriter::with_capacity(1 << 20, fs::File::create(&path)?);
            writeln!(w, "{header}")?;
            files.push(path);
            writer = Some(w);
            current_month = month;
        }
        if stamp_hour != Some(hour) {
            stamp = hour.to_string();
            stamp_hour = Some(hour);
        }
        use std::fmt::Write as _;
        line.clear();
        let _ = write!(line, "{stamp},{}", ids[m]);
        for (cell, decimals) in cells.iter().zip([6, 2, 2, 1, 6]) {
            line.push(',');
            if let Some(v) = cell {
                let _ = write!(line, "{v:.decimals$}");
            }
        }
        line.push('\n');
        writer.as_mut().unwrap().write_all(line.as_bytes())
    })
    .map_err(io_err(out_dir))?;
    if let Some(mut w) = writer.take() {
        w.flush().map_err(io_err(out_dir))?;
    }

    let ground_truth_path = out_dir.join(GROUND_TRUTH_FILE);
    let json = serde_json::to_vec_pretty(&truth).expect("ground truth serializes");
    fs::write(&ground_truth_path, json).map_err(io_err(&ground_truth_path))?;
    Ok(GeneratedDataset {
        files,
        ground_truth_path,
        ground_truth: truth,
    })
}

/// Same readings as [`generate`] but built straight into a table.
pub fn generate_table(
    config: &GeneratorConfig,
) -> Result<(ReadingTable, GroundTruth), GeneratorError> {
    config.validate()?;
    let specs = SchemaConfig::default().columns;
    let mut builder = TableBuilder::new(&specs);
    let ids: Vec<u32> = (0..config.meter_count)
        .map(|m| builder.intern_meter(&config.meter_id(m)))
        .collect();
    let mut raw = [0.0; 5];
    let truth = emit(config, |hour, m, cells| {
        for (r, c) in raw.iter_mut().zip(cells) {
            *r = c.unwrap_or(f64::NAN);
        }
        builder.push_raw(hour, ids[m], &raw);
        Ok(())
    })
    .expect("in-memory sink never fails");
    Ok((builder.build().0, truth))
}
