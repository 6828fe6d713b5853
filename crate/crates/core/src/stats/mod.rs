//! Robust statistics kernel.
//!
//! Everything here is a pure function over a slice of finite `f64` values.
//! Callers strip nulls before handing data in; the kernel knows nothing
//! about meters, timestamps or storage.

mod anomaly;
mod correlation;
mod distribution;
mod medcouple;
mod summary;

pub use anomaly::{
    anomaly_counts, modified_z_scores, AnomalyCounts, AnomalyReport, ANOMALY_THRESHOLD,
    MEAN_AD_CONSISTENCY, MODIFIED_Z_FACTOR,
};
pub use correlation::{average_ranks, pearson, spearman};
pub use distribution::{
    boxplot_stats, histogram, quantile, BoxplotStats, HistogramStats, DEFAULT_BINS,
};
pub use medcouple::{medcouple, medcouple_naive, medcouple_sorted, Medcouple, MEDCOUPLE_MIN_LEN};
pub use summary::{median, robust_summary, robust_summary_sorted, RobustSummary};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("length mismatch: x has {x} values, y has {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("histogram needs at least one bin")]
    ZeroBins,
}

pub type Result<T> = std::result::Result<T, StatsError>;

#[inline]
pub(crate) fn debug_assert_finite(values: &[f64]) {
    debug_assert!(
        values.iter().all(|v| v.is_finite()),
        "statistics kernel received a non-finite value"
    );
}
