use serde::{Deserialize, Serialize};

use super::debug_assert_finite;

/// Location and spread of a sample, with the MAD as the robust scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Median absolute deviation from the median.
    pub mad: f64,
    /// Mean absolute deviation from the median; scale of last resort when `mad == 0`.
    pub mean_abs_dev: f64,
    pub min: f64,
    pub max: f64,
}

/// Median of `values` using midpoint averaging for even lengths.
///
/// Returns `None` for an empty slice. Runs in expected linear time on a
/// scratch copy.
pub fn median(values: &[f64]) -> Option<f64> {
    debug_assert_finite(values);
    let mut scratch = values.to_vec();
    median_in_place(&mut scratch)
}

/// Reorders `buf`.
pub(crate) fn median_in_place(buf: &mut [f64]) -> Option<f64> {
    let n = buf.len();
    if n == 0 {
        return None;
    }
    let mid = n / 2;
    let (lower, upper, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        return Some(upper);
    }
    let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(midpoint(lower_max, upper))
}

#[inline]
pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    // a + (b - a) / 2 keeps the result between a and b for large magnitudes
    a + (b - a) / 2.0
}

pub fn robust_summary(values: &[f64]) -> Option<RobustSummary> {
    debug_assert_finite(values);
    if values.is_empty() {
        return None;
    }
    let count = values.len();
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    let mean = mean_within(values, min, max);

    let mut scratch = values.to_vec();
    let med = median_in_place(&mut scratch)?;
    for (dev, &v) in scratch.iter_mut().zip(values) {
        *dev = (v - med).abs();
    }
    let mean_abs_dev = scratch.iter().sum::<f64>() / count as f64;
    let mad = median_in_place(&mut scratch)?;

    Some(RobustSummary {
        count,
        mean,
        median: med,
        mad,
        mean_abs_dev,
        min,
        max,
    })
}

/// [`robust_summary`] over values sorted ascending, without allocating.
///
/// Median, MAD, min and max equal those of [`robust_summary`] exactly; the
/// means can differ in the last bits since the summation order differs.
pub fn robust_summary_sorted(sorted: &[f64]) -> Option<RobustSummary> {
    debug_assert_finite(sorted);
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]), "input not sorted");
    let (&min, &max) = (sorted.first()?, sorted.last()?);
    let count = sorted.len();
    let med = sorted_median(sorted);
    let mean_abs_dev = sorted.iter().map(|v| (v - med).abs()).sum::<f64>() / count as f64;
    Some(RobustSummary {
        count,
        mean: mean_within(sorted, min, max),
        median: med,
        mad: sorted_deviation_median(sorted, med),
        mean_abs_dev,
        min,
        max,
    })
}

pub(crate) fn sorted_median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        midpoint(sorted[n / 2 - 1], sorted[n / 2])
    }
}

/// Median of `|x - med|`, merging the two monotone runs of deviations on
/// either side of `med`.
fn sorted_deviation_median(sorted: &[f64], med: f64) -> f64 {
    let n = sorted.len();
    let split = sorted.partition_point(|&x| x < med);
    // next lower candidate is sorted[lo - 1], next upper is sorted[hi]
    let (mut lo, mut hi) = (split, split);
    let mut next = || {
        let below = (lo > 0).then(|| med - sorted[lo - 1]);
        let above = (hi < n).then(|| sorted[hi] - med);
        match (below, above) {
            (Some(b), Some(a)) if b <= a => {
                lo -= 1;
                b
            }
            (Some(b), None) => {
                lo -= 1;
                b
            }
            (_, Some(a)) => {
                hi += 1;
                a
            }
            (None, None) => unreachable!("ran past the end of the sample"),
        }
    };
    let mut prev = 0.0;
    for _ in 0..n / 2 {
        prev = next();
    }
    let upper = next();
    if n % 2 == 1 {
        upper
    } else {
        midpoint(prev, upper)
    }
}

/// Arithmetic mean clamped to `[min, max]`.
fn mean_within(values: &[f64], min: f64, max: f64) -> f64 {
    let count = values.len() as f64;
    let mut mean = values.iter().sum::<f64>() / count;
    if !mean.is_finite() {
        // sum overflowed; fall back to a scaled accumulation
        mean = values.iter().map(|v| v / count).sum();
    }
    mean.clamp(min, max)
}
