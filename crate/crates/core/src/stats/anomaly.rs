use serde::{Deserialize, Serialize};

use super::debug_assert_finite;
use super::summary::{robust_summary, RobustSummary};

/// Scales the MAD to a standard-deviation estimate under normality.
pub const MODIFIED_Z_FACTOR: f64 = 0.6745;

/// Values whose absolute modified z-score strictly exceeds this are anomalies.
pub const ANOMALY_THRESHOLD: f64 = 3.5;

/// Consistency constant turning the mean absolute deviation into a
/// standard-deviation estimate; used as the scale when the MAD is zero.
pub const MEAN_AD_CONSISTENCY: f64 = 1.253314;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    /// Modified z-score per input value, in input order.
    pub scores: Vec<f64>,
    pub flags: Vec<bool>,
    pub count: usize,
    pub anomaly_count: usize,
    pub anomaly_rate: f64,
    pub threshold: f64,
    /// The MAD was zero and the mean-absolute-deviation scale was used instead.
    pub degenerate_scale: bool,
}

impl AnomalyReport {
    fn empty(threshold: f64) -> Self {
        Self {
            scores: Vec::new(),
            flags: Vec::new(),
            count: 0,
            anomaly_count: 0,
            anomaly_rate: 0.0,
            threshold,
            degenerate_scale: false,
        }
    }
}

/// How a sample's deviations from its median are scaled into scores.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Scale {
    Mad(f64),
    MeanAbsDev(f64),
    /// Both spreads are zero; every score is zero.
    Flat,
}

impl Scale {
    fn of(summary: &RobustSummary) -> Self {
        if summary.mad > 0.0 {
            Self::Mad(summary.mad)
        } else if summary.mean_abs_dev > 0.0 {
            Self::MeanAbsDev(MEAN_AD_CONSISTENCY * summary.mean_abs_dev)
        } else {
            Self::Flat
        }
    }

    #[inline]
    fn score(self, x: f64, median: f64) -> f64 {
        match self {
            Self::Mad(mad) => MODIFIED_Z_FACTOR * (x - median) / mad,
            Self::MeanAbsDev(s) => (x - median) / s,
            Self::Flat => 0.0,
        }
    }
}

fn check_threshold(threshold: f64) {
    assert!(
        threshold.is_finite() && threshold > 0.0,
        "anomaly threshold must be positive, got {threshold}"
    );
}

/// Modified z-scores of `values` and the anomaly flags they imply.
///
/// `M_i = 0.6745 (x_i - median) / MAD`. A zero MAD switches the scale to
/// `1.253314 * MeanAD`; if that is zero as well every score is zero.
/// A value is flagged when `|M_i| > threshold` (strict).
///
/// # Panics
///
/// If `threshold` is not a positive finite number.
pub fn modified_z_scores(values: &[f64], threshold: f64) -> AnomalyReport {
    check_threshold(threshold);
    debug_assert_finite(values);
    let Some(summary) = robust_summary(values) else {
        return AnomalyReport::empty(threshold);
    };
    let scale = Scale::of(&summary);
    let scores: Vec<f64> = values
        .iter()
        .map(|&x| scale.score(x, summary.median))
        .collect();
    let flags: Vec<bool> = scores.iter().map(|s| s.abs() > threshold).collect();
    let anomaly_count = flags.iter().filter(|&&f| f).count();
    AnomalyReport {
        count: values.len(),
        anomaly_count,
        anomaly_rate: anomaly_count as f64 / values.len() as f64,
        threshold,
        degenerate_scale: scale != Scale::Mad(summary.mad),
        scores,
        flags,
    }
}

/// Anomaly totals without the per-value scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyCounts {
    pub count: usize,
    pub anomaly_count: usize,
    pub anomaly_rate: f64,
    pub threshold: f64,
    pub degenerate_scale: bool,
    /// Largest absolute modified z-score; absent for an empty sample.
    pub max_abs_score: Option<f64>,
}

/// Same flags as [`modified_z_scores`], counted against a precomputed
/// summary of `values`.
///
/// # Panics
///
/// If `threshold` is not a positive finite number.
pub fn anomaly_counts(
    values: &[f64],
    summary: Option<&RobustSummary>,
    threshold: f64,
) -> AnomalyCounts {
    check_threshold(threshold);
    let Some(summary) = summary.filter(|_| !values.is_empty()) else {
        return AnomalyCounts {
            count: 0,
            anomaly_count: 0,
            anomaly_rate: 0.0,
            threshold,
            degenerate_scale: false,
            max_abs_score: None,
        };
    };
    debug_assert_eq!(summary.count, values.len());
    let scale = Scale::of(summary);
    let mut anomaly_count = 0;
    let mut max_abs = 0.0f64;
    for &x in values {
        let s = scale.score(x, summary.median).abs();
        anomaly_count += usize::from(s > threshold);
        max_abs = max_abs.max(s);
    }
    AnomalyCounts {
        count: values.len(),
        anomaly_count,
        anomaly_rate: anomaly_count as f64 / values.len() as f64,
        threshold,
        degenerate_scale: scale != Scale::Mad(summary.mad),
        max_abs_score: Some(max_abs),
    }
}
