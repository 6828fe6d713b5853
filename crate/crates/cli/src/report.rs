use std::fmt::Write as _;

use anyhow::Result;
use heatlens_core::diagnostics::{
    ColumnKpi, Dataset, DatasetSummary, GaugeSpec, MissingTimestamps, QualityStatus,
    RuleViolationReport, Scope,
};
use serde::{Deserialize, Serialize};

/// Exit code when every status is green (or none).
pub const EXIT_GREEN: u8 = 0;
pub const EXIT_YELLOW: u8 = 1;
pub const EXIT_RED: u8 = 2;
/// Exit code for usage errors and failures to load data.
pub const EXIT_ERROR: u8 = 3;

/// One-shot quality report; the `--format json` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub status: QualityStatus,
    pub exit_code: u8,
    pub scope: Scope,
    pub dataset: DatasetSummary,
    pub kpis: Vec<ColumnKpi>,
    pub missing_timestamps: MissingTimestamps,
    pub violations: RuleViolationReport,
}

pub fn exit_code(status: QualityStatus) -> u8 {
    match status {
        QualityStatus::Red => EXIT_RED,
        QualityStatus::Yellow => EXIT_YELLOW,
        QualityStatus::Green | QualityStatus::None => EXIT_GREEN,
    }
}

pub fn build_report(
    ds: &Dataset,
    column: Option<&str>,
    meter: Option<&str>,
) -> Result<QualityReport> {
    let scope = meter.map_or(Scope::All, Scope::meter);
    let kpis: Vec<ColumnKpi> = match column {
        Some(c) => vec![(*ds.column_kpi(c, &scope)?).clone()],
        None => ds
            .column_kpis(&scope)?
            .iter()
            .map(|k| (**k).clone())
            .collect(),
    };
    let status = QualityStatus::worst(kpis.iter().map(|k| k.status));
    Ok(QualityReport {
        status,
        exit_code: exit_code(status),
        scope,
        dataset: ds.summary(),
        kpis,
        missing_timestamps: (*ds.missing_timestamps()).clone(),
        violations: (*ds.violations()?).clone(),
    })
}

fn pct(rate: f64) -> String {
    format!("{:.2}%", rate * 100.0)
}

fn gauge_cell(g: Option<&GaugeSpec>) -> String {
    g.map_or("-".into(), |g| format!("{:.4} {}", g.value, g.status))
}

impl QualityReport {
    pub fn to_text(&self) -> String {
        let d = &self.dataset;
        let mut out = String::new();
        let span = match (d.first_timestamp, d.last_timestamp) {
            (Some(a), Some(b)) => format!("{a} .. {b} ({} hours)", d.grid_len),
            _ => "empty".into(),
        };
        let _ = writeln!(
            out,
            "dataset: {} rows, {} meters, {span}",
            d.row_count, d.meter_count
        );
        if let Scope::Meter { meter_id } = &self.scope {
            let _ = writeln!(out, "scope: meter {meter_id}");
        }
        let _ = writeln!(
            out,
            "missing timestamps: {} of {}",
            self.missing_timestamps.count, self.missing_timestamps.grid_len
        );
        let _ = writeln!(out, "rule violations: {}", self.violations.total);
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<24} {:<7} {:<16} {:<16} {:<16} {:<20} {:<20} MAD",
            "column", "status", "anomalies", "nulls", "medcouple", "mean", "median"
        );
        for k in &self.kpis {
            let name = if k.unit.is_empty() {
                k.column.clone()
            } else {
                format!("{} [{}]", k.column, k.unit)
            };
            let skew = k
                .skewness
                .medcouple
                .map_or("-".into(), |mc| format!("{mc:+.3} {}", k.skewness.status));
            let _ = writeln!(
                out,
                "{:<24} {:<7} {:<16} {:<16} {:<16} {:<20} {:<20} {}",
                name,
                k.status.as_str(),
                format!("{} {}", pct(k.anomaly.anomaly_rate), k.anomaly.status),
                format!("{} {}", pct(k.nulls.null_rate), k.nulls.status),
                skew,
                gauge_cell(k.mean_gauge.as_ref()),
                gauge_cell(k.median_gauge.as_ref()),
                k.mad_gauge
                    .as_ref()
                    .map_or("-".into(), |g| format!("{:.4}", g.value)),
            );
        }
        let actions: Vec<_> = self
            .kpis
            .iter()
            .flat_map(|k| k.suggested_actions.iter().map(move |a| (k, a)))
            .collect();
        if !actions.is_empty() {
            let _ = writeln!(out, "\nsuggested actions:");
            for (k, a) in actions {
                let _ = writeln!(
                    out,
                    "  {:<16} {:<16} {:<7} {}: {}",
                    k.column,
                    a.kpi.as_str(),
                    a.status.as_str(),
                    a.visualization,
                    a.action
                );
            }
        }
        let _ = writeln!(out, "\noverall: {} (exit {})", self.status, self.exit_code);
        out
    }
}
