use serde::{Deserialize, Serialize};

use super::{debug_assert_finite, Result, StatsError};

pub const DEFAULT_BINS: usize = 50;

/// Five-number summary plus mean, Tukey fences and outlier count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub iqr: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outlier_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramStats {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Always 0: the edges span the sample range.
    pub underflow: u64,
    pub overflow: u64,
}

/// Quantile of an ascending slice by linear interpolation between order
/// statistics at 1-based position `1 + (n - 1) p`.
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let a = sorted[lo];
    if frac == 0.0 || lo + 1 >= sorted.len() {
        return Some(a);
    }
    let b = sorted[lo + 1];
    Some((a + frac * (b - a)).clamp(a, b))
}

pub fn boxplot_stats(values: &[f64]) -> Option<BoxplotStats> {
    debug_assert_finite(values);
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    let q1 = quantile(&sorted, 0.25)?;
    let median = quantile(&sorted, 0.5)?;
    let q3 = quantile(&sorted, 0.75)?;
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;

    let first_inside = sorted.partition_point(|&v| v < lo_fence);
    let past_inside = sorted.partition_point(|&v| v <= hi_fence);
    // q1 and q3 lie inside the fences, so at least one point does too
    let lower_whisker = sorted[first_inside.min(sorted.len() - 1)];
    let upper_whisker = sorted[past_inside.saturating_sub(1).max(first_inside)];
    let outlier_count = first_inside + (sorted.len() - past_inside);

    let mean = (sorted.iter().sum::<f64>() / sorted.len() as f64).clamp(min, max);
    Some(BoxplotStats {
        min,
        q1,
        median,
        q3,
        max,
        mean,
        iqr,
        lower_whisker,
        upper_whisker,
        outlier_count,
    })
}

/// Uniform-width histogram over `[min, max]`.
///
/// Bins are half-open `[lo, hi)` except the last, which also takes `max`.
/// A constant sample yields a single bin holding every value.
pub fn histogram(values: &[f64], bins: usize) -> Result<Option<HistogramStats>> {
    debug_assert_finite(values);
    if bins == 0 {
        return Err(StatsError::ZeroBins);
    }
    if values.is_empty() {
        return Ok(None);
    }
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if min == max {
        return Ok(Some(HistogramStats {
            bin_edges: vec![min, max],
            counts: vec![values.len() as u64],
            underflow: 0,
            overflow: 0,
        }));
    }

    let width = (max - min) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| min + i as f64 * width).collect();
    edges.push(max);
    let mut counts = vec![0u64; bins];
    for &v in values {
        let mut idx = (((v - min) / width) as usize).min(bins - 1);
        // snap to the edges actually reported
        while idx > 0 && v < edges[idx] {
            idx -= 1;
        }
        while idx + 1 < bins && v >= edges[idx + 1] {
            idx += 1;
        }
        counts[idx] += 1;
    }
    Ok(Some(HistogramStats {
        bin_edges: edges,
        counts,
        underflow: 0,
        overflow: 0,
    }))
}
