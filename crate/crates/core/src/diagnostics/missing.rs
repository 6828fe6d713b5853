//! Missing-data views: hour-of-day by date heatmaps and absent timestamps.

use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{Dataset, DiagError};
use crate::store::Hour;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeatmapKind {
    /// Active meters whose value in a column is null or whose row is absent.
    MissingValues { column: String },
    /// Active meters with no row at all.
    MissingMeters,
}

/// Counts (or fractions of active meters) per UTC date and hour of day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapMatrix {
    #[serde(flatten)]
    pub kind: HeatmapKind,
    pub normalized: bool,
    /// UTC dates, ascending.
    pub x_axis: Vec<NaiveDate>,
    /// Hours of the day, 0 to 23.
    pub y_axis: Vec<u32>,
    /// `cells[hour][date]`.
    pub cells: Vec<Vec<f64>>,
    /// Active meters per `[hour][date]`; a zero marks a cell with nothing
    /// expected (and a normalized value of 0).
    pub active: Vec<Vec<u32>>,
    /// Most meters active at any hour of each date.
    pub active_meters_per_date: Vec<u32>,
    /// Sum of the unnormalized cells.
    pub total_missing: u64,
}

/// Per-grid-hour counts behind a heatmap.
pub(crate) struct HeatmapCounts {
    pub(crate) missing: Vec<u32>,
    pub(crate) active: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingTimestamps {
    pub grid_len: usize,
    pub count: usize,
    pub timestamps: Vec<Hour>,
}

impl Dataset {
    pub fn missing_value_heatmap(
        &self,
        column: &str,
        normalize: bool,
    ) -> Result<HeatmapMatrix, DiagError> {
        let col = self.column_index(column)?;
        let counts = self.heatmap_counts(Some(col));
        Ok(self.heatmap_matrix(
            HeatmapKind::MissingValues {
                column: column.to_owned(),
            },
            &counts,
            normalize,
        ))
    }

    pub fn missing_meter_heatmap(&self, normalize: bool) -> HeatmapMatrix {
        let counts = self.heatmap_counts(None);
        self.heatmap_matrix(HeatmapKind::MissingMeters, &counts, normalize)
    }

    /// Grid hours at which no meter has a row.
    pub fn missing_timestamps(&self) -> Arc<MissingTimestamps> {
        self.missing_ts.get_or_compute(&(), || {
            let table = &self.table;
            let mut timestamps = Vec::new();
            if let Some(first) = table.first_timestamp() {
                let mut present = table.timestamps().iter().peekable();
                for h in 0..table.grid_len() as i64 {
                    let hour = first.offset(h);
                    if present.next_if_eq(&&hour).is_none() {
                        timestamps.push(hour);
                    }
                }
            }
            MissingTimestamps {
                grid_len: table.grid_len(),
                count: timestamps.len(),
                timestamps,
            }
        })
    }

    fn heatmap_counts(&self, col: Option<usize>) -> Arc<HeatmapCounts> {
        self.heatmaps.get_or_compute(&col, || {
            let table = &self.table;
            let grid = table.grid_len();
            let Some(first) = table.first_timestamp() else {
                return HeatmapCounts {
                    missing: Vec::new(),
                    active: Vec::new(),
                };
            };
            let mut delta = vec![0i64; grid + 1];
            for a in self.activity() {
                delta[(a.first_seen.0 - first.0) as usize] += 1;
                delta[(a.window_end.0 - first.0) as usize + 1] -= 1;
            }
            let mut active = Vec::with_capacity(grid);
            let mut running = 0i64;
            for d in &delta[..grid] {
                running += d;
                active.push(running as u32);
            }
            let mut missing = active.clone();
            let column = col.map(|c| &table.columns()[c]);
            for (t, hour) in table.timestamps().iter().enumerate() {
                let rows = table.rows_at(t);
                let reported = match column {
                    Some(c) => rows.filter(|&r| !c.is_null(r)).count(),
                    None => rows.len(),
                };
                missing[(hour.0 - first.0) as usize] -= reported as u32;
            }
            HeatmapCounts { missing, active }
        })
    }

    fn heatmap_matrix(
        &self,
        kind: HeatmapKind,
        counts: &HeatmapCounts,
        normalize: bool,
    ) -> HeatmapMatrix {
        let y_axis: Vec<u32> = (0..24).collect();
        let Some(first) = self.table.first_timestamp() else {
            return HeatmapMatrix {
                kind,
                normalized: normalize,
                x_axis: Vec::new(),
                y_axis,
                cells: vec![Vec::new(); 24],
                active: vec![Vec::new(); 24],
                active_meters_per_date: Vec::new(),
                total_missing: 0,
            };
        };
        let last = self.table.last_timestamp().unwrap();
        let first_day = first.day();
        let days = (last.day() - first_day + 1) as usize;
        let mut cells = vec![vec![0.0; days]; 24];
        let mut active = vec![vec![0u32; days]; 24];
        let mut per_date = vec![0u32; days];
        let mut total = 0u64;
        for (g, (&miss, &act)) in counts.missing.iter().zip(&counts.active).enumerate() {
            let hour = first.offset(g as i64);
            let (d, h) = (
                (hour.day() - first_day) as usize,
                hour.hour_of_day() as usize,
            );
            total += u64::from(miss);
            active[h][d] = act;
            per_date[d] = per_date[d].max(act);
            cells[h][d] = match (normalize, act) {
                (false, _) => f64::from(miss),
                (true, 0) => 0.0,
                (true, _) => f64::from(miss) / f64::from(act),
            };
        }
        HeatmapMatrix {
            kind,
            normalized: normalize,
            x_axis: (0..days as i64)
                .map(|d| Hour((first_day + d) * 24).date())
                .collect(),
            y_axis,
            cells,
            active,
            active_meters_per_date: per_date,
            total_missing: total,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{dataset, t0};
    use super::super::Scope;

    fn full_day(meters: &[&'static str]) -> Vec<(i64, &'static str, Option<f64>)> {
        (0..24)
            .flat_map(|h| meters.iter().map(move |&m| (h, m, Some(1.0))))
            .collect()
    }

    #[test]
    fn one_null_cell() {
        let mut rows = full_day(&["a", "b"]);
        rows.iter_mut().find(|r| r.0 == 5 && r.1 == "b").unwrap().2 = None;
        let ds = dataset(&rows);
        let hm = ds.missing_value_heatmap("energy", false).unwrap();
        assert_eq!(hm.x_axis, vec![t0().date()]);
        assert_eq!(hm.cells[5][0], 1.0);
        assert_eq!(hm.total_missing, 1);
        let nonzero = hm.cells.iter().flatten().filter(|&&c| c != 0.0).count();
        assert_eq!(nonzero, 1);
        let norm = ds.missing_value_heatmap("energy", true).unwrap();
        assert_eq!(norm.cells[5][0], 0.5);
    }

    #[test]
    fn absent_timestamp_counts_every_active_meter() {
        let rows: Vec<_> = full_day(&["a", "b", "c"])
            .into_iter()
            .filter(|r| r.0 != 7)
            .collect();
        let ds = dataset(&rows);
        let hm = ds.missing_value_heatmap("energy", false).unwrap();
        assert_eq!(hm.cells[7][0], 3.0);
        let meters = ds.missing_meter_heatmap(false);
        assert_eq!(meters.cells[7][0], 3.0);
        assert_eq!(meters.total_missing, 3);
        let ts = ds.missing_timestamps();
        assert_eq!(ts.timestamps, vec![t0().offset(7)]);
    }

    #[test]
    fn complete_data_has_empty_heatmaps() {
        let ds = dataset(&full_day(&["a", "b"]));
        assert!(ds
            .missing_meter_heatmap(false)
            .cells
            .iter()
            .flatten()
            .all(|&c| c == 0.0));
        assert_eq!(ds.missing_timestamps().count, 0);
    }

    #[test]
    fn dropped_day_equals_active_meters() {
        let mut rows = full_day(&["a", "b"]);
        rows.extend(rows.clone().into_iter().map(|(h, m, v)| (h + 48, m, v)));
        let ds = dataset(&rows);
        let hm = ds.missing_meter_heatmap(false);
        assert_eq!(hm.x_axis.len(), 3);
        for h in 0..24 {
            assert_eq!(hm.cells[h][1], 2.0);
            assert_eq!(hm.cells[h][0], 0.0);
        }
        assert_eq!(ds.missing_timestamps().count, 24);
    }

    #[test]
    fn heatmap_total_matches_kpi_missing() {
        let rows = vec![
            (0, "a", Some(1.0)),
            (1, "a", None),
            (4, "a", Some(2.0)),
            (2, "b", Some(1.0)),
            (30, "b", None),
        ];
        let ds = dataset(&rows);
        let hm = ds.missing_value_heatmap("energy", false).unwrap();
        let k = ds.column_kpi("energy", &Scope::All).unwrap();
        assert_eq!(
            hm.total_missing as usize,
            k.nulls.null_count + k.nulls.structurally_missing_count
        );
        // active never drops below what is counted missing
        for (c, a) in hm.cells.iter().flatten().zip(hm.active.iter().flatten()) {
            assert!(*c <= f64::from(*a));
        }
    }

    #[test]
    fn hours_outside_grid_are_inactive() {
        let ds = dataset(&[(5, "a", Some(1.0)), (6, "a", Some(1.0))]);
        let hm = ds.missing_meter_heatmap(true);
        assert_eq!(hm.active[0][0], 0);
        assert_eq!(hm.cells[0][0], 0.0);
        assert_eq!(hm.active[5][0], 1);
    }

    #[test]
    fn empty_dataset() {
        let ds = dataset(&[]);
        assert!(ds.missing_meter_heatmap(false).x_axis.is_empty());
        assert_eq!(ds.missing_timestamps().count, 0);
    }
}
