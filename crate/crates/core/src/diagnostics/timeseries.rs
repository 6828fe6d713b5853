//! One meter's readings over a time window, raw or bucketed.

use serde::{Deserialize, Serialize};

use super::{Dataset, DiagError};
use crate::store::Hour;

pub const DEFAULT_MAX_POINTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub meter_id: String,
    pub column: String,
    /// Effective window (inclusive), clipped to the meter's activity;
    /// absent when the request misses it entirely.
    pub from: Option<Hour>,
    pub to: Option<Hour>,
    /// Hourly slots in the window, absent rows included.
    pub hours: usize,
    pub data: SeriesData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeriesData {
    /// One point per hour; `value` is null for null cells and absent rows.
    Raw { points: Vec<TimePoint> },
    /// Fixed-width buckets keeping extremes so spikes survive downsampling.
    Buckets {
        bucket_hours: usize,
        buckets: Vec<Bucket>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimePoint {
    pub timestamp: Hour,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub start: Hour,
    /// Last hour in the bucket (inclusive).
    pub end: Hour,
    pub count: usize,
    pub null_count: usize,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
}

impl Dataset {
    pub fn timeseries(
        &self,
        meter_id: &str,
        column: &str,
        from: Option<Hour>,
        to: Option<Hour>,
        max_points: usize,
    ) -> Result<TimeSeries, DiagError> {
        let m = self.meter_index(meter_id)?;
        let col = &self.table.columns()[self.column_index(column)?];
        if max_points == 0 {
            return Err(DiagError::BadParameter(
                "max_points must be positive".into(),
            ));
        }
        if let (Some(a), Some(b)) = (from, to) {
            if a > b {
                return Err(DiagError::BadParameter(format!("from {a} is after to {b}")));
            }
        }
        let activity = &self.activity()[m];
        let lo = from.map_or(activity.first_seen, |f| f.max(activity.first_seen));
        let hi = to.map_or(activity.window_end, |t| t.min(activity.window_end));
        let empty = |from, to| TimeSeries {
            meter_id: meter_id.to_owned(),
            column: column.to_owned(),
            from,
            to,
            hours: 0,
            data: SeriesData::Raw { points: Vec::new() },
        };
        if lo > hi {
            return Ok(empty(None, None));
        }
        let hours = (hi.0 - lo.0 + 1) as usize;

        // value per hour of the window
        let mut values: Vec<Option<f64>> = vec![None; hours];
        let rows = self.table.meter_rows(m);
        let stamps = self.table.timestamps();
        let start = rows.times.partition_point(|&t| stamps[t as usize] < lo);
        for (&row, &t) in rows.rows[start..].iter().zip(&rows.times[start..]) {
            let hour = stamps[t as usize];
            if hour > hi {
                break;
            }
            values[(hour.0 - lo.0) as usize] = col.get(row as usize);
        }

        let data = if hours <= max_points {
            SeriesData::Raw {
                points: values
                    .into_iter()
                    .enumerate()
                    .map(|(i, value)| TimePoint {
                        timestamp: lo.offset(i as i64),
                        value,
                    })
                    .collect(),
            }
        } else {
            let width = hours.div_ceil(max_points);
            SeriesData::Buckets {
                bucket_hours: width,
                buckets: values
                    .chunks(width)
                    .enumerate()
                    .map(|(b, chunk)| bucket(lo.offset((b * width) as i64), chunk))
                    .collect(),
            }
        };
        Ok(TimeSeries {
            meter_id: meter_id.to_owned(),
            column: column.to_owned(),
            from: Some(lo),
            to: Some(hi),
            hours,
            data,
        })
    }
}

fn bucket(start: Hour, chunk: &[Option<f64>]) -> Bucket {
    let (mut min, mut max, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for v in chunk.iter().flatten() {
        min = min.min(*v);
        max = max.max(*v);
        sum += v;
        n += 1;
    }
    Bucket {
        start,
        end: start.offset(chunk.len() as i64 - 1),
        count: chunk.len(),
        null_count: chunk.len() - n,
        min: (n > 0).then_some(min),
        max: (n > 0).then_some(max),
        mean: (n > 0).then(|| sum / n as f64),
    }
}
