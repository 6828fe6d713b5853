//! Physical-bounds checks over non-null cells. Reports, never corrects.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Dataset, DiagError};
use crate::store::{BoundRule, Hour, ReadingTable};

pub const MAX_VIOLATION_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleViolationReport {
    pub rules: Vec<RuleViolations>,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleViolations {
    pub column: String,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub total: u64,
    /// Meters with at least one violation, by meter id.
    pub per_meter: Vec<MeterViolationCount>,
    /// First offenders in (timestamp, meter) order.
    pub samples: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterViolationCount {
    pub meter_id: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub timestamp: Hour,
    pub meter_id: String,
    pub value: f64,
}

pub fn rule_violations(
    table: &ReadingTable,
    rules: &[BoundRule],
) -> Result<RuleViolationReport, DiagError> {
    let mut out = Vec::with_capacity(rules.len());
    for rule in rules {
        let column = table
            .column(&rule.column)
            .ok_or_else(|| DiagError::UnknownColumn(rule.column.clone()))?;
        let mut per_meter = vec![0u64; table.meter_ids().len()];
        let mut samples = Vec::new();
        let mut total = 0;
        for (t, &hour) in table.timestamps().iter().enumerate() {
            for row in table.rows_at(t) {
                let Some(v) = column.get(row) else { continue };
                if rule.violated_by(v) {
                    let meter = table.row_meter(row);
                    per_meter[meter] += 1;
                    total += 1;
                    if samples.len() < MAX_VIOLATION_SAMPLES {
                        samples.push(Violation {
                            timestamp: hour,
                            meter_id: table.meter_ids()[meter].clone(),
                            value: v,
                        });
                    }
                }
            }
        }
        out.push(RuleViolations {
            column: rule.column.clone(),
            min: rule.min,
            max: rule.max,
            total,
            per_meter: per_meter
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(m, &count)| MeterViolationCount {
                    meter_id: table.meter_ids()[m].clone(),
                    count,
                })
                .collect(),
            samples,
        });
    }
    Ok(RuleViolationReport {
        total: out.iter().map(|r| r.total).sum(),
        rules: out,
    })
}

impl Dataset {
    /// Violations of the configured rules.
    pub fn violations(&self) -> Result<Arc<RuleViolationReport>, DiagError> {
        for rule in &self.config.rules {
            self.column_index(&rule.column)?;
        }
        Ok(self.violations.get_or_compute(&(), || {
            rule_violations(&self.table, &self.config.rules).expect("rule columns checked")
        }))
    }
}
