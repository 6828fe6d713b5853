//! Traffic-light statuses, gauge geometry and the suggested-action table.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityStatus {
    /// No thresholds apply, or there is nothing to judge.
    None,
    Green,
    Yellow,
    Red,
}

impl QualityStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Green => "green",
            Self::Yellow => "yellow",
            Self::Red => "red",
        }
    }

    /// Most severe of the given statuses; `None` entries never win.
    pub fn worst(statuses: impl IntoIterator<Item = Self>) -> Self {
        statuses.into_iter().max().unwrap_or(Self::None)
    }
}

impl std::fmt::Display for QualityStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const ANOMALY_YELLOW_FROM: f64 = 0.05;
pub const ANOMALY_RED_ABOVE: f64 = 0.10;
pub const NULL_YELLOW_FROM: f64 = 0.05;
pub const NULL_RED_ABOVE: f64 = 0.50;
pub const SKEW_GREEN_UPTO: f64 = 0.2;
pub const SKEW_YELLOW_UPTO: f64 = 0.5;

/// Gauge band edges as fractions of the scale.
pub const GAUGE_RED_LOW_END: f64 = 0.225;
pub const GAUGE_GREEN_START: f64 = 0.30;
pub const GAUGE_GREEN_END: f64 = 0.70;
pub const GAUGE_RED_HIGH_START: f64 = 0.775;

pub fn anomaly_status(rate: f64) -> QualityStatus {
    rate_status(rate, ANOMALY_YELLOW_FROM, ANOMALY_RED_ABOVE)
}

pub fn null_status(rate: f64) -> QualityStatus {
    rate_status(rate, NULL_YELLOW_FROM, NULL_RED_ABOVE)
}

fn rate_status(rate: f64, yellow_from: f64, red_above: f64) -> QualityStatus {
    if !rate.is_finite() {
        QualityStatus::None
    } else if rate < yellow_from {
        QualityStatus::Green
    } else if rate <= red_above {
        QualityStatus::Yellow
    } else {
        QualityStatus::Red
    }
}

pub fn skewness_status(medcouple: f64) -> QualityStatus {
    let m = medcouple.abs();
    if !m.is_finite() {
        QualityStatus::None
    } else if m <= SKEW_GREEN_UPTO {
        QualityStatus::Green
    } else if m <= SKEW_YELLOW_UPTO {
        QualityStatus::Yellow
    } else {
        QualityStatus::Red
    }
}

/// One colored band of a gauge, in scale fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub lo: f64,
    pub hi: f64,
    pub lo_inclusive: bool,
    pub hi_inclusive: bool,
    pub color: QualityStatus,
}

impl Zone {
    const fn new(
        lo: f64,
        hi: f64,
        lo_inclusive: bool,
        hi_inclusive: bool,
        color: QualityStatus,
    ) -> Self {
        Self {
            lo,
            hi,
            lo_inclusive,
            hi_inclusive,
            color,
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        let above = if self.lo_inclusive {
            p >= self.lo
        } else {
            p > self.lo
        };
        let below = if self.hi_inclusive {
            p <= self.hi
        } else {
            p < self.hi
        };
        above && below
    }
}

use QualityStatus::{Green, Red, Yellow};

/// Mean and median gauges: green center flanked by yellow then red bands.
pub const CENTERED_ZONES: [Zone; 5] = [
    Zone::new(0.0, GAUGE_RED_LOW_END, true, false, Red),
    Zone::new(GAUGE_RED_LOW_END, GAUGE_GREEN_START, true, false, Yellow),
    Zone::new(GAUGE_GREEN_START, GAUGE_GREEN_END, true, true, Green),
    Zone::new(GAUGE_GREEN_END, GAUGE_RED_HIGH_START, false, true, Yellow),
    Zone::new(GAUGE_RED_HIGH_START, 1.0, false, true, Red),
];

/// Anomaly-rate gauge on a [0, 1] scale.
pub const ANOMALY_ZONES: [Zone; 3] = [
    Zone::new(0.0, ANOMALY_YELLOW_FROM, true, false, Green),
    Zone::new(ANOMALY_YELLOW_FROM, ANOMALY_RED_ABOVE, true, true, Yellow),
    Zone::new(ANOMALY_RED_ABOVE, 1.0, false, true, Red),
];

/// Null-rate gauge on a [0, 1] scale.
pub const NULL_ZONES: [Zone; 3] = [
    Zone::new(0.0, NULL_YELLOW_FROM, true, false, Green),
    Zone::new(NULL_YELLOW_FROM, NULL_RED_ABOVE, true, true, Yellow),
    Zone::new(NULL_RED_ABOVE, 1.0, false, true, Red),
];

/// Medcouple gauge on a [-1, 1] scale.
pub const SKEW_ZONES: [Zone; 5] = [
    Zone::new(0.0, 0.25, true, false, Red),
    Zone::new(0.25, 0.4, true, false, Yellow),
    Zone::new(0.4, 0.6, true, true, Green),
    Zone::new(0.6, 0.75, false, true, Yellow),
    Zone::new(0.75, 1.0, false, true, Red),
];

/// A KPI value placed on a scale with its colored bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeSpec {
    pub value: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub zones: Vec<Zone>,
    /// `(value - scale_min) / (scale_max - scale_min)` clamped to [0, 1].
    pub position: f64,
    pub status: QualityStatus,
}

/// Gauge with the centered green/yellow/red layout used for mean and median.
pub fn gauge_status(value: f64, scale_min: f64, scale_max: f64) -> GaugeSpec {
    gauge_with_zones(value, scale_min, scale_max, &CENTERED_ZONES)
}

pub fn gauge_with_zones(value: f64, scale_min: f64, scale_max: f64, zones: &[Zone]) -> GaugeSpec {
    let span = scale_max - scale_min;
    let (position, status) =
        if !(value.is_finite() && scale_min.is_finite() && scale_max.is_finite()) || span <= 0.0 {
            (0.5, QualityStatus::None)
        } else {
            let p = ((value - scale_min) / span).clamp(0.0, 1.0);
            let color = zones
                .iter()
                .find(|z| z.contains(p))
                .map_or(QualityStatus::None, |z| z.color);
            (p, color)
        };
    GaugeSpec {
        value,
        scale_min,
        scale_max,
        zones: zones.to_vec(),
        position,
        status,
    }
}

/// Value-only gauge (no thresholds), e.g. for the MAD.
pub fn plain_gauge(value: f64, scale_min: f64, scale_max: f64) -> GaugeSpec {
    let mut g = gauge_with_zones(value, scale_min, scale_max, &[]);
    g.status = QualityStatus::None;
    g
}

/// One row of the visual-diagnostics mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DiagnosticMapping {
    pub visualization: &'static str,
    pub issue: &'static str,
    pub metric: &'static str,
    pub action: &'static str,
}

const fn row(
    visualization: &'static str,
    issue: &'static str,
    metric: &'static str,
    action: &'static str,
) -> DiagnosticMapping {
    DiagnosticMapping {
        visualization,
        issue,
        metric,
        action,
    }
}

pub const LINE_PLOT: DiagnosticMapping = row(
    "Time-Series Line Plot",
    "Sudden spikes, drops, and missing values",
    "Visual inspection (breaks or discontinuities)",
    "Investigate anomalies, impute, or remove extreme values",
);
pub const BOX_PLOT: DiagnosticMapping = row(
    "Box Plot",
    "Outliers, skewed distributions",
    "Mean vs. Median, Quartiles",
    "Confirm and flag outliers, assess distributional bias",
);
pub const HISTOGRAM: DiagnosticMapping = row(
    "Histogram",
    "Extreme values, non-physical readings",
    "Frequency distribution",
    "Clip or correct invalid values (e.g., negative energy)",
);
pub const HEATMAP: DiagnosticMapping = row(
    "Heatmap (Time vs. Time)",
    "Systemic missing patterns, temporal dropout",
    "Percentage of null values",
    "Identify periods with high loss; flag or impute",
);
pub const KPI_GAUGES: DiagnosticMapping = row(
    "KPI Gauges (e.g., Anomaly, Nulls)",
    "Data spread, presence of missing or extreme values",
    "Anomaly, Skewness, Null %",
    "Determine data health; prioritize columns/segments for review",
);
pub const DATA_GRID: DiagnosticMapping = row(
    "Data Grid (Tabular View)",
    "Unexpected meter behavior",
    "All mentioned, e.g., Null %",
    "Filter and isolate problematic meters for further inspection",
);
pub const SCATTER_PLOT: DiagnosticMapping = row(
    "Scatter Plot (Dynamic)",
    "Abnormal inter-feature relationships",
    "Visual deviation from expected correlations",
    "Identify and exclude implausible points or faulty sensors",
);
pub const CORRELATION_MATRIX: DiagnosticMapping = row(
    "Correlation Matrix",
    "Lack of correlation, variable redundancy, or error",
    "Pearson/Spearman correlation",
    "Validate expected relationships; detect systemic anomalies",
);

pub const DIAGNOSTIC_MAPPINGS: [DiagnosticMapping; 8] = [
    LINE_PLOT,
    BOX_PLOT,
    HISTOGRAM,
    HEATMAP,
    KPI_GAUGES,
    DATA_GRID,
    SCATTER_PLOT,
    CORRELATION_MATRIX,
];

/// KPI whose status triggers a suggested action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KpiKind {
    Anomaly,
    Nulls,
    Skewness,
    RuleViolations,
}

impl KpiKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Anomaly => "anomaly",
            Self::Nulls => "nulls",
            Self::Skewness => "skewness",
            Self::RuleViolations => "rule_violations",
        }
    }
}

/// Mapping rows that apply when `kind` is yellow or red.
pub fn mappings_for(kind: KpiKind) -> &'static [DiagnosticMapping] {
    match kind {
        KpiKind::Anomaly => &[KPI_GAUGES, LINE_PLOT],
        KpiKind::Nulls => &[KPI_GAUGES, HEATMAP],
        KpiKind::Skewness => &[KPI_GAUGES, BOX_PLOT],
        KpiKind::RuleViolations => &[HISTOGRAM],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestedAction {
    pub kpi: KpiKind,
    pub status: QualityStatus,
    pub visualization: String,
    pub action: String,
}

/// Suggested actions for every non-green finding, in input order.
pub fn suggested_actions(findings: &[(KpiKind, QualityStatus)]) -> Vec<SuggestedAction> {
    let mut out = Vec::new();
    for &(kpi, status) in findings {
        if !matches!(status, QualityStatus::Yellow | QualityStatus::Red) {
            continue;
        }
        for m in mappings_for(kpi) {
            out.push(SuggestedAction {
                kpi,
                status,
                visualization: m.visualization.to_owned(),
                action: m.action.to_owned(),
            });
        }
    }
    out
}
