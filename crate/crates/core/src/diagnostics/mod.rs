//! Data-quality diagnostics over a [`ReadingTable`]: KPI bundles with
//! traffic-light statuses, missingness heatmaps, rule violations,
//! correlations, scatter samples, time-series windows and per-meter stats.
//!
//! Everything is computed from the immutable table and never modifies it.
//! [`Dataset`] memoizes the heavy results so repeated requests are cheap.

mod correlation;
mod kpi;
mod memo;
mod meters;
mod missing;
mod rules;
mod status;
mod timeseries;

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::stats::ANOMALY_THRESHOLD;
use crate::store::{BoundRule, Hour, MeterActivity, ReadingTable, SchemaConfig, WindowMode};

pub use correlation::{
    correlation_matrix, scatter_sample, CorrelationMatrix, CorrelationMethod, ScatterSample,
    DEFAULT_SCATTER_POINTS,
};
pub use kpi::{AnomalyKpi, ColumnKpi, NullKpi, SkewnessKpi, ViolationKpi};
pub use meters::{
    export_meter_list, parse_filter, parse_sort, Filter, MeterColumnStats, MeterStatsPage,
    MeterStatsRow, SortKey, DEFAULT_PAGE_SIZE, METER_STATS,
};
pub use missing::{HeatmapKind, HeatmapMatrix, MissingTimestamps};
pub use rules::{
    rule_violations, MeterViolationCount, RuleViolationReport, RuleViolations, Violation,
    MAX_VIOLATION_SAMPLES,
};
pub use status::{
    anomaly_status, gauge_status, gauge_with_zones, mappings_for, null_status, plain_gauge,
    skewness_status, suggested_actions, DiagnosticMapping, GaugeSpec, KpiKind, QualityStatus,
    SuggestedAction, Zone, ANOMALY_RED_ABOVE, ANOMALY_YELLOW_FROM, ANOMALY_ZONES, CENTERED_ZONES,
    DIAGNOSTIC_MAPPINGS, GAUGE_GREEN_END, GAUGE_GREEN_START, GAUGE_RED_HIGH_START,
    GAUGE_RED_LOW_END, NULL_RED_ABOVE, NULL_YELLOW_FROM, NULL_ZONES, SKEW_GREEN_UPTO,
    SKEW_YELLOW_UPTO, SKEW_ZONES,
};
pub use timeseries::{Bucket, SeriesData, TimePoint, TimeSeries, DEFAULT_MAX_POINTS};

use memo::Memo;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiagError {
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("unknown meter '{0}'")]
    UnknownMeter(String),
    #[error("bad filter term '{term}': {message}")]
    BadFilter { term: String, message: String },
    #[error("{0}")]
    BadParameter(String),
}

/// Which readings a KPI covers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scope {
    All,
    Meter { meter_id: String },
}

impl Scope {
    pub fn meter(id: impl Into<String>) -> Self {
        Self::Meter {
            meter_id: id.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Resolved {
    All,
    Meter(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    pub window_mode: WindowMode,
    pub rules: Vec<BoundRule>,
    pub anomaly_threshold: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self::from(&SchemaConfig::default())
    }
}

impl From<&SchemaConfig> for DiagnosticsConfig {
    fn from(schema: &SchemaConfig) -> Self {
        Self {
            window_mode: schema.window_mode,
            rules: schema.rules.clone(),
            anomaly_threshold: ANOMALY_THRESHOLD,
        }
    }
}

/// Dataset-level facts for headers and banners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub row_count: usize,
    pub meter_count: usize,
    pub timestamp_count: usize,
    pub first_timestamp: Option<Hour>,
    pub last_timestamp: Option<Hour>,
    pub grid_len: usize,
    pub expected_count: usize,
    pub window_mode: WindowMode,
    pub anomaly_threshold: f64,
    pub columns: Vec<ColumnInfo>,
    pub rules: Vec<BoundRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    pub unit: String,
    pub null_count: usize,
}

/// A table plus diagnostics settings and memoized results. Cheap to share
/// across threads.
pub struct Dataset {
    table: Arc<ReadingTable>,
    config: DiagnosticsConfig,
    activity: OnceLock<Vec<MeterActivity>>,
    kpis: Memo<usize, ColumnKpi>,
    heatmaps: Memo<Option<usize>, missing::HeatmapCounts>,
    missing_ts: Memo<(), MissingTimestamps>,
    violations: Memo<(), RuleViolationReport>,
    correlations: Memo<CorrelationMethod, CorrelationMatrix>,
    meter_stats: Memo<(), Vec<MeterStatsRow>>,
}

impl std::fmt::Debug for Dataset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dataset")
            .field("rows", &self.table.row_count())
            .field("meters", &self.table.meter_ids().len())
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Dataset {
    pub fn new(table: impl Into<Arc<ReadingTable>>, config: DiagnosticsConfig) -> Self {
        Self {
            table: table.into(),
            config,
            activity: OnceLock::new(),
            kpis: Memo::new(),
            heatmaps: Memo::new(),
            missing_ts: Memo::new(),
            violations: Memo::new(),
            correlations: Memo::new(),
            meter_stats: Memo::new(),
        }
    }

    pub fn table(&self) -> &ReadingTable {
        &self.table
    }

    pub fn config(&self) -> &DiagnosticsConfig {
        &self.config
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.table.column_names()
    }

    /// Per-meter activity windows under the configured window mode.
    pub fn activity(&self) -> &[MeterActivity] {
        self.activity
            .get_or_init(|| self.table.meter_activity(self.config.window_mode))
    }

    pub fn summary(&self) -> DatasetSummary {
        let t = &self.table;
        DatasetSummary {
            row_count: t.row_count(),
            meter_count: t.meter_ids().len(),
            timestamp_count: t.timestamps().len(),
            first_timestamp: t.first_timestamp(),
            last_timestamp: t.last_timestamp(),
            grid_len: t.grid_len(),
            expected_count: self.expected_count(Resolved::All),
            window_mode: self.config.window_mode,
            anomaly_threshold: self.config.anomaly_threshold,
            columns: t
                .columns()
                .iter()
                .map(|c| ColumnInfo {
                    name: c.name().to_owned(),
                    unit: c.unit().to_owned(),
                    null_count: c.null_count(),
                })
                .collect(),
            rules: self.config.rules.clone(),
        }
    }

    pub(crate) fn column_index(&self, name: &str) -> Result<usize, DiagError> {
        self.table
            .column_position(name)
            .ok_or_else(|| DiagError::UnknownColumn(name.to_owned()))
    }

    pub(crate) fn meter_index(&self, id: &str) -> Result<usize, DiagError> {
        self.table
            .meter_position(id)
            .ok_or_else(|| DiagError::UnknownMeter(id.to_owned()))
    }

    pub(crate) fn resolve(&self, scope: &Scope) -> Result<Resolved, DiagError> {
        match scope {
            Scope::All => Ok(Resolved::All),
            Scope::Meter { meter_id } => self.meter_index(meter_id).map(Resolved::Meter),
        }
    }

    /// Non-null values of column `col` in scope, in row order, and the
    /// number of present-but-null cells.
    pub(crate) fn scoped_values(&self, col: usize, scope: Resolved) -> (Vec<f64>, usize) {
        let column = &self.table.columns()[col];
        match scope {
            Resolved::All => {
                let values: Vec<f64> = column.non_null().collect();
                let nulls = column.len() - values.len();
                (values, nulls)
            }
            Resolved::Meter(m) => {
                let rows = self.table.meter_rows(m).rows;
                let values: Vec<f64> = rows
                    .iter()
                    .filter_map(|&r| column.get(r as usize))
                    .collect();
                let nulls = rows.len() - values.len();
                (values, nulls)
            }
        }
    }

    /// Hourly slots the scope's meters are expected to fill.
    pub(crate) fn expected_count(&self, scope: Resolved) -> usize {
        match scope {
            Resolved::All => self.activity().iter().map(|a| a.expected_count).sum(),
            Resolved::Meter(m) => self.activity()[m].expected_count,
        }
    }

    pub(crate) fn present_count(&self, scope: Resolved) -> usize {
        match scope {
            Resolved::All => self.table.row_count(),
            Resolved::Meter(m) => self.activity()[m].present_count,
        }
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::store::TableBuilder;

    pub(crate) fn t0() -> Hour {
        Hour::from_ymd_h(2021, 1, 4, 0).unwrap()
    }

    /// Table over the default schema from `(hour offset, meter, energy)`
    /// rows; the other columns copy energy scaled by the column index.
    pub(crate) fn energy_table(rows: &[(i64, &str, Option<f64>)]) -> ReadingTable {
        let schema = SchemaConfig::default();
        let mut b = TableBuilder::new(&schema.columns);
        for &(h, m, e) in rows {
            let cells: Vec<Option<f64>> = (0..schema.columns.len())
                .map(|c| e.map(|v| v * (c + 1) as f64))
                .collect();
            b.push(t0().offset(h), m, &cells);
        }
        b.build().0
    }

    pub(crate) fn dataset(rows: &[(i64, &str, Option<f64>)]) -> Dataset {
        Dataset::new(energy_table(rows), DiagnosticsConfig::default())
    }
}
