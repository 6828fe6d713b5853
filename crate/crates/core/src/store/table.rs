use std::collections::HashMap;
use std::ops::Range;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::schema::{ColumnSpec, WindowMode};
use super::time::Hour;

/// One measurement column. Nulls are stored as a canonical NaN and never
/// leak out of the accessors.
#[derive(Debug, Clone)]
pub struct Column {
    name: String,
    unit: String,
    values: Vec<f64>,
}

impl Column {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize) -> Option<f64> {
        let v = self.values[row];
        (!v.is_nan()).then_some(v)
    }

    #[inline]
    pub fn is_null(&self, row: usize) -> bool {
        self.values[row].is_nan()
    }

    /// Non-null values in row order.
    pub fn non_null(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied().filter(|v| !v.is_nan())
    }

    pub fn null_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    /// Raw storage with NaN for null.
    pub(crate) fn raw(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn from_raw(name: String, unit: String, values: Vec<f64>) -> Self {
        Self { name, unit, values }
    }
}

impl PartialEq for Column {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.unit == other.unit
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Rows of one meter, in time order.
#[derive(Debug, Clone, Copy)]
pub struct MeterRows<'a> {
    /// Row numbers in the table.
    pub rows: &'a [u32],
    /// Index into [`ReadingTable::timestamps`] for each row.
    pub times: &'a [u32],
}

impl MeterRows<'_> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug)]
struct MeterIndex {
    offsets: Vec<u32>,
    rows: Vec<u32>,
    times: Vec<u32>,
}

/// Immutable columnar store of hourly readings keyed by (timestamp, meter).
///
/// Rows are sorted by timestamp, then meter id, with at most one row per
/// key. Only timestamps that have at least one row are stored; the full
/// hourly grid is implied by the first and last of them.
#[derive(Debug)]
pub struct ReadingTable {
    timestamps: Vec<Hour>,
    time_offsets: Vec<u32>,
    meter_ids: Vec<String>,
    row_meter: Vec<u32>,
    columns: Vec<Column>,
    meter_index: OnceLock<MeterIndex>,
}

impl PartialEq for ReadingTable {
    fn eq(&self, other: &Self) -> bool {
        self.timestamps == other.timestamps
            && self.time_offsets == other.time_offsets
            && self.meter_ids == other.meter_ids
            && self.row_meter == other.row_meter
            && self.columns == other.columns
    }
}

impl ReadingTable {
    pub(crate) fn from_parts(
        timestamps: Vec<Hour>,
        time_offsets: Vec<u32>,
        meter_ids: Vec<String>,
        row_meter: Vec<u32>,
        columns: Vec<Column>,
    ) -> Result<Self, String> {
        let rows = row_meter.len();
        if time_offsets.len() != timestamps.len() + 1
            || time_offsets.first().copied().unwrap_or(1) != 0
            || *time_offsets.last().unwrap() as usize != rows
            || time_offsets.windows(2).any(|w| w[0] >= w[1])
        {
            return Err("inconsistent time offsets".into());
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err("timestamps not strictly ascending".into());
        }
        if meter_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err("meter ids not strictly ascending".into());
        }
        if row_meter.iter().any(|&m| m as usize >= meter_ids.len()) {
            return Err("row references unknown meter".into());
        }
        for t in 0..timestamps.len() {
            let block = &row_meter[time_offsets[t] as usize..time_offsets[t + 1] as usize];
            if block.windows(2).any(|w| w[0] >= w[1]) {
                return Err("rows not sorted by meter within a timestamp".into());
            }
        }
        if columns.iter().any(|c| c.len() != rows) {
            return Err("column length mismatch".into());
        }
        Ok(Self {
            timestamps,
            time_offsets,
            meter_ids,
            row_meter,
            columns,
            meter_index: OnceLock::new(),
        })
    }

    pub fn row_count(&self) -> usize {
        self.row_meter.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_meter.is_empty()
    }

    /// Distinct timestamps present, ascending.
    pub fn timestamps(&self) -> &[Hour] {
        &self.timestamps
    }

    pub fn meter_ids(&self) -> &[String] {
        &self.meter_ids
    }

    pub fn meter_position(&self, meter_id: &str) -> Option<usize> {
        self.meter_ids
            .binary_search_by(|m| m.as_str().cmp(meter_id))
            .ok()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_position(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    /// Rows recorded at `timestamps()[t]`.
    pub fn rows_at(&self, t: usize) -> Range<usize> {
        self.time_offsets[t] as usize..self.time_offsets[t + 1] as usize
    }

    #[inline]
    pub fn row_meter(&self, row: usize) -> usize {
        self.row_meter[row] as usize
    }

    pub(crate) fn row_meters(&self) -> &[u32] {
        &self.row_meter
    }

    pub(crate) fn time_offsets(&self) -> &[u32] {
        &self.time_offsets
    }

    pub fn meter_rows(&self, meter: usize) -> MeterRows<'_> {
        let idx = self.meter_index.get_or_init(|| self.build_meter_index());
        let range = idx.offsets[meter] as usize..idx.offsets[meter + 1] as usize;
        MeterRows {
            rows: &idx.rows[range.clone()],
            times: &idx.times[range],
        }
    }

    fn build_meter_index(&self) -> MeterIndex {
        let m = self.meter_ids.len();
        let mut offsets = vec![0u32; m + 1];
        for &meter in &self.row_meter {
            offsets[meter as usize + 1] += 1;
        }
        for i in 0..m {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor: Vec<u32> = offsets[..m].to_vec();
        let n = self.row_count();
        let mut rows = vec![0u32; n];
        let mut times = vec![0u32; n];
        for t in 0..self.timestamps.len() {
            for row in self.rows_at(t) {
                let meter = self.row_meter[row] as usize;
                let slot = cursor[meter] as usize;
                rows[slot] = row as u32;
                times[slot] = t as u32;
                cursor[meter] += 1;
            }
        }
        MeterIndex {
            offsets,
            rows,
            times,
        }
    }

    pub fn first_timestamp(&self) -> Option<Hour> {
        self.timestamps.first().copied()
    }

    pub fn last_timestamp(&self) -> Option<Hour> {
        self.timestamps.last().copied()
    }

    /// Number of hours from the first to the last timestamp inclusive.
    pub fn grid_len(&self) -> usize {
        match (self.first_timestamp(), self.last_timestamp()) {
            (Some(a), Some(b)) => (b.0 - a.0 + 1) as usize,
            _ => 0,
        }
    }

    /// Every hour from the first to the last timestamp inclusive.
    pub fn expected_grid(&self) -> Vec<Hour> {
        match self.first_timestamp() {
            Some(first) => (0..self.grid_len() as i64)
                .map(|h| first.offset(h))
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn meter_activity(&self, mode: WindowMode) -> Vec<MeterActivity> {
        (0..self.meter_ids.len())
            .map(|m| self.activity_of(m, mode))
            .collect()
    }

    pub fn activity_of(&self, meter: usize, mode: WindowMode) -> MeterActivity {
        let rows = self.meter_rows(meter);
        // every stored meter has at least one row
        let first_seen = self.timestamps[rows.times[0] as usize];
        let last_seen = self.timestamps[*rows.times.last().unwrap() as usize];
        let window_end = match mode {
            WindowMode::FirstToLast => last_seen,
            WindowMode::FirstToDatasetEnd => self.last_timestamp().unwrap(),
        };
        MeterActivity {
            meter_id: self.meter_ids[meter].clone(),
            first_seen,
            last_seen,
            window_end,
            expected_count: (window_end.0 - first_seen.0 + 1) as usize,
            present_count: rows.len(),
        }
    }
}

/// A meter's reporting span and how many of its expected hours have rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterActivity {
    pub meter_id: String,
    pub first_seen: Hour,
    pub last_seen: Hour,
    /// Last hour of the activity window (inclusive).
    pub window_end: Hour,
    pub expected_count: usize,
    pub present_count: usize,
}

/// Accumulates rows in arbitrary order and produces a sorted, de-duplicated
/// [`ReadingTable`]. When a (timestamp, meter) key repeats, the row pushed
/// last wins.
#[derive(Debug, Clone)]
pub struct TableBuilder {
    specs: Vec<ColumnSpec>,
    hours: Vec<i64>,
    meters: Vec<u32>,
    meter_lookup: HashMap<String, u32>,
    meter_names: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl TableBuilder {
    pub fn new(specs: &[ColumnSpec]) -> Self {
        Self {
            specs: specs.to_vec(),
            hours: Vec::new(),
            meters: Vec::new(),
            meter_lookup: HashMap::new(),
            meter_names: Vec::new(),
            values: vec![Vec::new(); specs.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.hours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hours.is_empty()
    }

    pub fn intern_meter(&mut self, id: &str) -> u32 {
        if let Some(&m) = self.meter_lookup.get(id) {
            return m;
        }
        let m = self.meter_names.len() as u32;
        self.meter_names.push(id.to_owned());
        self.meter_lookup.insert(id.to_owned(), m);
        m
    }

    /// Appends one row; non-finite values are stored as null.
    pub fn push(&mut self, hour: Hour, meter_id: &str, values: &[Option<f64>]) {
        let meter = self.intern_meter(meter_id);
        assert_eq!(
            values.len(),
            self.values.len(),
            "row width must match the column count"
        );
        self.hours.push(hour.0);
        self.meters.push(meter);
        for (col, v) in self.values.iter_mut().zip(values) {
            col.push(v.filter(|x| x.is_finite()).unwrap_or(f64::NAN));
        }
    }

    /// Appends a row whose values are already NaN-for-null.
    pub(crate) fn push_raw(&mut self, hour: Hour, meter: u32, values: &[f64]) {
        self.hours.push(hour.0);
        self.meters.push(meter);
        for (col, &v) in self.values.iter_mut().zip(values) {
            col.push(if v.is_finite() { v } else { f64::NAN });
        }
    }

    /// Appends all rows of `other` after the rows already held.
    pub fn append(&mut self, other: TableBuilder) {
        let remap: Vec<u32> = other
            .meter_names
            .iter()
            .map(|name| self.intern_meter(name))
            .collect();
        self.hours.extend_from_slice(&other.hours);
        self.meters
            .extend(other.meters.iter().map(|&m| remap[m as usize]));
        for (dst, src) in self.values.iter_mut().zip(other.values) {
            dst.extend_from_slice(&src);
        }
    }

    /// Sorts, removes duplicate keys (last wins) and freezes the table.
    /// Returns the table and the number of rows dropped as duplicates.
    pub fn build(self) -> (ReadingTable, usize) {
        let TableBuilder {
            specs,
            hours,
            meters,
            meter_names,
            values,
            ..
        } = self;
        assert!(
            hours.len() < u32::MAX as usize,
            "too many rows for one table"
        );

        let mut order: Vec<u32> = (0..meter_names.len() as u32).collect();
        order.sort_unstable_by(|&a, &b| meter_names[a as usize].cmp(&meter_names[b as usize]));
        let mut remap = vec![0u32; meter_names.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old as usize] = new as u32;
        }
        let mut sorted_names = vec![String::new(); meter_names.len()];
        for (old, name) in meter_names.into_iter().enumerate() {
            sorted_names[remap[old] as usize] = name;
        }
        let meters: Vec<u32> = meters.iter().map(|&m| remap[m as usize]).collect();

        let key = |i: usize| (hours[i], meters[i]);
        let n = hours.len();
        let already_sorted = (1..n).all(|i| key(i - 1) < key(i));

        let (kept_hours, row_meter, columns, duplicates) = if already_sorted {
            let cols = values;
            (hours, meters, cols, 0)
        } else {
            let mut perm: Vec<u32> = (0..n as u32).collect();
            // stable: equal keys keep push order, so the last of a run is the newest
            perm.sort_by_key(|&i| key(i as usize));
            let mut keep: Vec<u32> = Vec::with_capacity(n);
            for (pos, &i) in perm.iter().enumerate() {
                let next_same = perm
                    .get(pos + 1)
                    .is_some_and(|&j| key(j as usize) == key(i as usize));
                if !next_same {
                    keep.push(i);
                }
            }
            let duplicates = n - keep.len();
            let kh: Vec<i64> = keep.iter().map(|&i| hours[i as usize]).collect();
            let km: Vec<u32> = keep.iter().map(|&i| meters[i as usize]).collect();
            let cols: Vec<Vec<f64>> = values
                .iter()
                .map(|col| keep.iter().map(|&i| col[i as usize]).collect())
                .collect();
            (kh, km, cols, duplicates)
        };

        let mut timestamps = Vec::new();
        let mut time_offsets = Vec::new();
        for (row, &h) in kept_hours.iter().enumerate() {
            if timestamps.last() != Some(&Hour(h)) {
                timestamps.push(Hour(h));
                time_offsets.push(row as u32);
            }
        }
        time_offsets.push(kept_hours.len() as u32);

        let columns = specs
            .into_iter()
            .zip(columns)
            .map(|(spec, vals)| Column::from_raw(spec.name, spec.unit, vals))
            .collect();

        let table = ReadingTable {
            timestamps,
            time_offsets,
            meter_ids: sorted_names,
            row_meter,
            columns,
            meter_index: OnceLock::new(),
        };
        (table, duplicates)
    }
}
