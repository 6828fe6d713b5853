//! Ingest configuration: header mapping, units, time zone, null sentinels,
//! activity-window policy and physical-bounds rules.
//!
//! ```toml
//! default_timezone = "Europe/Copenhagen"
//! null_sentinels = ["NULL", "-"]
//! window_mode = "first_to_last"
//!
//! [headers]
//! timestamp = "ReadTime"
//! meter_id = "MeterNo"
//!
//! [[columns]]
//! name = "energy"
//! source = "Energy_MWh"
//! unit = "MWh"
//!
//! [[rules]]
//! column = "energy"
//! min = 0.0
//! ```

use std::path::Path;

use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use super::StoreError;

pub const DEFAULT_COLUMNS: [(&str, &str); 5] = [
    ("energy", "MWh"),
    ("forward_temp", "°C"),
    ("return_temp", "°C"),
    ("flow", "L/h"),
    ("energy_computed", "MWh"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemaConfig {
    pub headers: KeyHeaders,
    pub columns: Vec<ColumnSpec>,
    /// Zone for timestamps without an explicit offset.
    pub default_timezone: String,
    /// Extra cell values read as null; the empty string always is.
    pub null_sentinels: Vec<String>,
    pub window_mode: WindowMode,
    pub rules: Vec<BoundRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeyHeaders {
    pub timestamp: String,
    pub meter_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    /// Canonical name used everywhere downstream.
    pub name: String,
    /// Header in the source file; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default)]
    pub unit: String,
}

impl ColumnSpec {
    pub fn new(name: &str, unit: &str) -> Self {
        Self {
            name: name.to_owned(),
            source: None,
            unit: unit.to_owned(),
        }
    }

    pub fn source_header(&self) -> &str {
        self.source.as_deref().unwrap_or(&self.name)
    }
}

/// Span over which a meter is expected to report.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    /// From the meter's first reading to its last.
    #[default]
    FirstToLast,
    /// From the meter's first reading to the end of the dataset.
    FirstToDatasetEnd,
}

/// Inclusive physical bounds for a column; values outside are violations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundRule {
    pub column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

impl BoundRule {
    pub fn at_least(column: &str, min: f64) -> Self {
        Self {
            column: column.to_owned(),
            min: Some(min),
            max: None,
        }
    }

    pub fn violated_by(&self, value: f64) -> bool {
        self.min.is_some_and(|lo| value < lo) || self.max.is_some_and(|hi| value > hi)
    }
}

impl Default for KeyHeaders {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            meter_id: "meter_id".into(),
        }
    }
}

impl Default for SchemaConfig {
    fn default() -> Self {
        Self {
            headers: KeyHeaders::default(),
            columns: DEFAULT_COLUMNS
                .iter()
                .map(|(name, unit)| ColumnSpec::new(name, unit))
                .collect(),
            default_timezone: "UTC".into(),
            null_sentinels: Vec::new(),
            window_mode: WindowMode::default(),
            // consumers only: consumption and flow never go negative
            rules: ["energy", "energy_computed", "flow"]
                .iter()
                .map(|c| BoundRule::at_least(c, 0.0))
                .collect(),
        }
    }
}

impl SchemaConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, StoreError> {
        let config: Self =
            toml::from_str(text).map_err(|e| StoreError::Schema(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let text = std::fs::read_to_string(path).map_err(|source| StoreError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn timezone(&self) -> Result<Tz, StoreError> {
        self.default_timezone.parse().map_err(|_| {
            StoreError::Schema(format!("unknown time zone {:?}", self.default_timezone))
        })
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        self.timezone()?;
        if self.columns.is_empty() {
            return Err(StoreError::Schema(
                "at least one measurement column is required".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for col in &self.columns {
            if col.name.is_empty() || col.name == "timestamp" || col.name == "meter_id" {
                return Err(StoreError::Schema(format!(
                    "invalid column name {:?}",
                    col.name
                )));
            }
            if !seen.insert(col.name.as_str()) {
                return Err(StoreError::Schema(format!(
                    "duplicate column {:?}",
                    col.name
                )));
            }
        }
        for rule in &self.rules {
            if !seen.contains(rule.column.as_str()) {
                return Err(StoreError::Schema(format!(
                    "rule references unknown column {:?}",
                    rule.column
                )));
            }
            if rule.min.is_none() && rule.max.is_none() {
                return Err(StoreError::Schema(format!(
                    "rule on {:?} has no bound",
                    rule.column
                )));
            }
            if let (Some(lo), Some(hi)) = (rule.min, rule.max) {
                if lo > hi {
                    return Err(StoreError::Schema(format!(
                        "rule on {:?} has min {lo} above max {hi}",
                        rule.column
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }
}
