//! Per-column KPI bundles: summary, anomalies, nulls, skewness and gauges.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::status::{
    anomaly_status, gauge_status, gauge_with_zones, null_status, plain_gauge, skewness_status,
    suggested_actions, GaugeSpec, KpiKind, QualityStatus, SuggestedAction, ANOMALY_ZONES,
    HISTOGRAM, NULL_ZONES, SKEW_ZONES,
};
use super::{Dataset, DiagError, Resolved, Scope};
use crate::stats::{
    anomaly_counts, boxplot_stats, histogram, medcouple_sorted, robust_summary_sorted,
    BoxplotStats, HistogramStats, RobustSummary,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnKpi {
    pub column: String,
    pub unit: String,
    pub scope: Scope,
    /// Absent when the scope has no non-null values.
    pub summary: Option<RobustSummary>,
    pub anomaly: AnomalyKpi,
    pub nulls: NullKpi,
    pub skewness: SkewnessKpi,
    pub violations: ViolationKpi,
    pub mean_gauge: Option<GaugeSpec>,
    pub median_gauge: Option<GaugeSpec>,
    /// Informational only; its status is always `none`.
    pub mad_gauge: Option<GaugeSpec>,
    /// Worst of the anomaly, null, skewness, mean and median statuses.
    pub status: QualityStatus,
    pub suggested_actions: Vec<SuggestedAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyKpi {
    pub threshold: f64,
    /// Non-null values scored.
    pub count: usize,
    pub anomaly_count: usize,
    pub anomaly_rate: f64,
    pub degenerate_scale: bool,
    pub max_abs_score: Option<f64>,
    pub status: QualityStatus,
    pub gauge: GaugeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullKpi {
    /// Present rows whose cell is null.
    pub null_count: usize,
    /// Expected rows that are absent.
    pub structurally_missing_count: usize,
    pub non_null_count: usize,
    pub expected_count: usize,
    pub null_rate: f64,
    pub status: QualityStatus,
    pub gauge: GaugeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewnessKpi {
    pub medcouple: Option<f64>,
    /// Fewer than three values; no skewness judgement.
    pub degenerate: bool,
    pub status: QualityStatus,
    pub gauge: Option<GaugeSpec>,
}

/// Values breaking the configured bounds for this column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationKpi {
    pub rules_checked: usize,
    pub violation_count: usize,
    pub negative_count: usize,
}

impl Dataset {
    /// KPI bundle for one column. Dataset-wide results are memoized.
    pub fn column_kpi(&self, column: &str, scope: &Scope) -> Result<Arc<ColumnKpi>, DiagError> {
        let col = self.column_index(column)?;
        Ok(match self.resolve(scope)? {
            Resolved::All => self
                .kpis
                .get_or_compute(&col, || self.compute_kpi(col, Resolved::All)),
            meter => Arc::new(self.compute_kpi(col, meter)),
        })
    }

    /// KPI bundles for every column, computed in parallel.
    pub fn column_kpis(&self, scope: &Scope) -> Result<Vec<Arc<ColumnKpi>>, DiagError> {
        self.resolve(scope)?;
        let names = self.column_names();
        names
            .par_iter()
            .map(|c| self.column_kpi(c, scope))
            .collect()
    }

    pub fn boxplot(&self, column: &str, scope: &Scope) -> Result<Option<BoxplotStats>, DiagError> {
        let col = self.column_index(column)?;
        let (values, _) = self.scoped_values(col, self.resolve(scope)?);
        Ok(boxplot_stats(&values))
    }

    pub fn histogram(
        &self,
        column: &str,
        scope: &Scope,
        bins: usize,
    ) -> Result<Option<HistogramStats>, DiagError> {
        let col = self.column_index(column)?;
        let (values, _) = self.scoped_values(col, self.resolve(scope)?);
        histogram(&values, bins).map_err(|e| DiagError::BadParameter(e.to_string()))
    }

    pub(crate) fn compute_kpi(&self, col: usize, scope: Resolved) -> ColumnKpi {
        let column = &self.table.columns()[col];
        let (mut values, null_count) = self.scoped_values(col, scope);
        values.sort_unstable_by(f64::total_cmp);
        let expected = self.expected_count(scope);
        let structural = expected - self.present_count(scope);

        let null_rate = if expected > 0 {
            (null_count + structural) as f64 / expected as f64
        } else {
            0.0
        };
        let nulls_status = if expected > 0 {
            null_status(null_rate)
        } else {
            QualityStatus::None
        };
        let nulls = NullKpi {
            null_count,
            structurally_missing_count: structural,
            non_null_count: values.len(),
            expected_count: expected,
            null_rate,
            status: nulls_status,
            gauge: status_gauge(null_rate, &NULL_ZONES, nulls_status),
        };

        let summary = robust_summary_sorted(&values);
        let counts = anomaly_counts(&values, summary.as_ref(), self.config.anomaly_threshold);
        let anomaly_st = if summary.is_some() {
            anomaly_status(counts.anomaly_rate)
        } else {
            QualityStatus::None
        };
        let anomaly = AnomalyKpi {
            threshold: counts.threshold,
            count: counts.count,
            anomaly_count: counts.anomaly_count,
            anomaly_rate: counts.anomaly_rate,
            degenerate_scale: counts.degenerate_scale,
            max_abs_score: counts.max_abs_score,
            status: anomaly_st,
            gauge: status_gauge(counts.anomaly_rate, &ANOMALY_ZONES, anomaly_st),
        };

        let mc = medcouple_sorted(&values);
        let skewness = if mc.degenerate {
            SkewnessKpi {
                medcouple: None,
                degenerate: true,
                status: QualityStatus::None,
                gauge: None,
            }
        } else {
            SkewnessKpi {
                medcouple: Some(mc.value),
                degenerate: false,
                status: skewness_status(mc.value),
                gauge: Some(gauge_with_zones(mc.value, -1.0, 1.0, &SKEW_ZONES)),
            }
        };

        let rules: Vec<_> = self
            .config
            .rules
            .iter()
            .filter(|r| r.column == column.name())
            .collect();
        let violations = ViolationKpi {
            rules_checked: rules.len(),
            violation_count: values
                .iter()
                .filter(|&&v| rules.iter().any(|r| r.violated_by(v)))
                .count(),
            negative_count: values.iter().filter(|&&v| v < 0.0).count(),
        };

        let (mean_gauge, median_gauge, mad_gauge) = match &summary {
            Some(s) => (
                Some(gauge_status(s.mean, s.min, s.max)),
                Some(gauge_status(s.median, s.min, s.max)),
                Some(plain_gauge(s.mad, 0.0, s.max - s.min)),
            ),
            None => (None, None, None),
        };
        let gauge_st = |g: &Option<GaugeSpec>| g.as_ref().map_or(QualityStatus::None, |g| g.status);
        let status = QualityStatus::worst([
            anomaly.status,
            nulls.status,
            skewness.status,
            gauge_st(&mean_gauge),
            gauge_st(&median_gauge),
        ]);

        let mut actions = suggested_actions(&[
            (KpiKind::Anomaly, anomaly.status),
            (KpiKind::Nulls, nulls.status),
            (KpiKind::Skewness, skewness.status),
        ]);
        if violations.violation_count > 0 {
            actions.push(SuggestedAction {
                kpi: KpiKind::RuleViolations,
                status: QualityStatus::None,
                visualization: HISTOGRAM.visualization.to_owned(),
                action: HISTOGRAM.action.to_owned(),
            });
        }

        ColumnKpi {
            column: column.name().to_owned(),
            unit: column.unit().to_owned(),
            scope: match scope {
                Resolved::All => Scope::All,
                Resolved::Meter(m) => Scope::meter(self.table.meter_ids()[m].clone()),
            },
            summary,
            anomaly,
            nulls,
            skewness,
            violations,
            mean_gauge,
            median_gauge,
            mad_gauge,
            status,
            suggested_actions: actions,
        }
    }
}

/// Rate gauge whose status is the KPI's own (so "no data" stays `none`).
fn status_gauge(rate: f64, zones: &[super::Zone], status: QualityStatus) -> GaugeSpec {
    let mut g = gauge_with_zones(rate, 0.0, 1.0, zones);
    g.status = status;
    g
}
