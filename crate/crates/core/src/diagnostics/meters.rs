//! Per-meter quality statistics for the data grid: filtering, sorting,
//! paging and meter-list export.
//!
//! A filter is a conjunction of `field op literal` terms joined by `&&`,
//! `AND` or `,`, e.g. `energy.null_rate > 0.9 && present_count >= 100`.
//! Operators: `<`, `<=`, `≤`, `>`, `>=`, `≥`, `=`, `==`, `!=`, `≠`.
//! Fields are `meter_id`, `first_seen`, `last_seen`, `expected_count`,
//! `present_count` and `<column>.<stat>`; a bare `<stat>` refers to the
//! first column. Absent statistics never match.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use chrono_tz::Tz;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dataset, DiagError};
use crate::stats::{anomaly_counts, medcouple_sorted, robust_summary_sorted};
use crate::store::Hour;

pub const DEFAULT_PAGE_SIZE: usize = 50;
const MAX_PAGE_SIZE: usize = 100_000;

/// Statistic names available per column.
pub const METER_STATS: [&str; 13] = [
    "null_rate",
    "anomaly_rate",
    "mean",
    "median",
    "mad",
    "medcouple",
    "min",
    "max",
    "negative_count",
    "violation_count",
    "null_count",
    "non_null_count",
    "anomaly_count",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterColumnStats {
    pub null_count: usize,
    pub non_null_count: usize,
    /// Null cells plus absent rows over the meter's expected hours.
    pub null_rate: f64,
    pub anomaly_count: usize,
    pub anomaly_rate: f64,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub mad: Option<f64>,
    pub medcouple: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub negative_count: usize,
    pub violation_count: usize,
}

impl MeterColumnStats {
    fn stat(&self, index: usize) -> Option<f64> {
        match METER_STATS[index] {
            "null_rate" => Some(self.null_rate),
            "anomaly_rate" => Some(self.anomaly_rate),
            "mean" => self.mean,
            "median" => self.median,
            "mad" => self.mad,
            "medcouple" => self.medcouple,
            "min" => self.min,
            "max" => self.max,
            "negative_count" => Some(self.negative_count as f64),
            "violation_count" => Some(self.violation_count as f64),
            "null_count" => Some(self.null_count as f64),
            "non_null_count" => Some(self.non_null_count as f64),
            "anomaly_count" => Some(self.anomaly_count as f64),
            _ => unreachable!(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterStatsRow {
    pub meter_id: String,
    pub first_seen: Hour,
    pub last_seen: Hour,
    pub expected_count: usize,
    pub present_count: usize,
    pub columns: BTreeMap<String, MeterColumnStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterStatsPage {
    pub rows: Vec<MeterStatsRow>,
    pub total_matching: usize,
    /// Zero-based.
    pub page: usize,
    pub page_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Field {
    MeterId,
    FirstSeen,
    LastSeen,
    ExpectedCount,
    PresentCount,
    Stat { column: String, stat: usize },
}

enum FieldValue<'a> {
    Num(Option<f64>),
    Text(&'a str),
    Time(Hour),
}

impl Field {
    fn parse(name: &str, columns: &[&str]) -> Option<Self> {
        Some(match name {
            "meter_id" => Self::MeterId,
            "first_seen" => Self::FirstSeen,
            "last_seen" => Self::LastSeen,
            "expected_count" => Self::ExpectedCount,
            "present_count" => Self::PresentCount,
            _ => {
                let (column, stat) = match name.rsplit_once('.') {
                    Some((c, s)) => (c, s),
                    None => (*columns.first()?, name),
                };
                if !columns.contains(&column) {
                    return None;
                }
                let stat = METER_STATS.iter().position(|&s| s == stat)?;
                Self::Stat {
                    column: column.to_owned(),
                    stat,
                }
            }
        })
    }

    fn value<'a>(&self, row: &'a MeterStatsRow) -> FieldValue<'a> {
        match self {
            Self::MeterId => FieldValue::Text(&row.meter_id),
            Self::FirstSeen => FieldValue::Time(row.first_seen),
            Self::LastSeen => FieldValue::Time(row.last_seen),
            Self::ExpectedCount => FieldValue::Num(Some(row.expected_count as f64)),
            Self::PresentCount => FieldValue::Num(Some(row.present_count as f64)),
            Self::Stat { column, stat } => {
                FieldValue::Num(row.columns.get(column).and_then(|c| c.stat(*stat)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl Op {
    /// Longest spellings first so `<=` wins over `<`.
    const SPELLINGS: [(&'static str, Op); 10] = [
        ("<=", Op::Le),
        (">=", Op::Ge),
        ("==", Op::Eq),
        ("!=", Op::Ne),
        ("≤", Op::Le),
        ("≥", Op::Ge),
        ("≠", Op::Ne),
        ("<", Op::Lt),
        (">", Op::Gt),
        ("=", Op::Eq),
    ];

    fn holds(self, ord: Ordering) -> bool {
        match self {
            Op::Lt => ord.is_lt(),
            Op::Le => ord.is_le(),
            Op::Gt => ord.is_gt(),
            Op::Ge => ord.is_ge(),
            Op::Eq => ord.is_eq(),
            Op::Ne => ord.is_ne(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Literal {
    Num(f64),
    Text(String),
    Time(Hour),
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    field: Field,
    op: Op,
    literal: Literal,
}

impl Term {
    fn matches(&self, row: &MeterStatsRow) -> bool {
        let ord = match (self.field.value(row), &self.literal) {
            (FieldValue::Num(Some(v)), Literal::Num(l)) => v.partial_cmp(l),
            (FieldValue::Text(v), Literal::Text(l)) => Some(v.cmp(l.as_str())),
            (FieldValue::Time(v), Literal::Time(l)) => Some(v.cmp(l)),
            _ => None,
        };
        ord.is_some_and(|o| self.op.holds(o))
    }
}

/// Parsed conjunction of filter terms; empty matches everything.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Filter {
    terms: Vec<Term>,
}

impl Filter {
    pub fn matches(&self, row: &MeterStatsRow) -> bool {
        self.terms.iter().all(|t| t.matches(row))
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

pub fn parse_filter(expr: &str, columns: &[&str]) -> Result<Filter, DiagError> {
    let normalized = expr.replace("&&", "\u{1f}").replace(',', "\u{1f}");
    let mut terms = Vec::new();
    for piece in normalized.split('\u{1f}') {
        let mut words: Vec<&str> = Vec::new();
        for word in piece.split_whitespace() {
            if word.eq_ignore_ascii_case("and") {
                terms.push(parse_term(&words.join(" "), columns)?);
                words.clear();
            } else {
                words.push(word);
            }
        }
        if !words.is_empty() {
            terms.push(parse_term(&words.join(" "), columns)?);
        } else if !expr.trim().is_empty() {
            return Err(bad(piece.trim(), "empty term"));
        }
    }
    Ok(Filter { terms })
}

fn bad(term: &str, message: impl Into<String>) -> DiagError {
    DiagError::BadFilter {
        term: term.to_owned(),
        message: message.into(),
    }
}

fn parse_term(term: &str, columns: &[&str]) -> Result<Term, DiagError> {
    if term.is_empty() {
        return Err(bad(term, "empty term"));
    }
    let at = term
        .find(['<', '>', '=', '!', '≤', '≥', '≠'])
        .ok_or_else(|| bad(term, "missing comparison operator"))?;
    let rest = &term[at..];
    let (spelling, op) = Op::SPELLINGS
        .iter()
        .find(|(s, _)| rest.starts_with(s))
        .ok_or_else(|| bad(term, "unknown operator"))?;
    let name = term[..at].trim();
    if name.is_empty() {
        return Err(bad(term, "missing field"));
    }
    let field =
        Field::parse(name, columns).ok_or_else(|| bad(term, format!("unknown field '{name}'")))?;
    let raw = rest[spelling.len()..].trim();
    let raw = raw
        .strip_prefix('"')
        .and_then(|r| r.strip_suffix('"'))
        .or_else(|| raw.strip_prefix('\'').and_then(|r| r.strip_suffix('\'')))
        .unwrap_or(raw);
    if raw.is_empty() {
        return Err(bad(term, "missing value"));
    }
    let literal = match field {
        Field::MeterId => Literal::Text(raw.to_owned()),
        Field::FirstSeen | Field::LastSeen => Literal::Time(
            Hour::parse(raw, Tz::UTC).map_err(|e| bad(term, format!("bad timestamp: {e}")))?,
        ),
        _ => Literal::Num(
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(term, format!("'{raw}' is not a number")))?,
        ),
    };
    Ok(Term {
        field,
        op: *op,
        literal,
    })
}

/// Sort order for the grid: `field`, `-field` (descending), or
/// `field:asc` / `field:desc`.
#[derive(Debug, Clone, PartialEq)]
pub struct SortKey {
    field: Field,
    descending: bool,
}

pub fn parse_sort(spec: &str, columns: &[&str]) -> Result<SortKey, DiagError> {
    let spec = spec.trim();
    let (name, descending) = if let Some(n) = spec.strip_prefix('-') {
        (n, true)
    } else if let Some(n) = spec.strip_suffix(":desc") {
        (n, true)
    } else {
        (spec.strip_suffix(":asc").unwrap_or(spec), false)
    };
    let field = Field::parse(name.trim(), columns)
        .ok_or_else(|| DiagError::BadParameter(format!("unknown sort field '{spec}'")))?;
    Ok(SortKey { field, descending })
}

impl SortKey {
    /// Orders by the field, absent values last in either direction.
    fn compare(&self, a: &MeterStatsRow, b: &MeterStatsRow) -> Ordering {
        let ord = match (self.field.value(a), self.field.value(b)) {
            (FieldValue::Num(x), FieldValue::Num(y)) => match (x, y) {
                (Some(x), Some(y)) => x.total_cmp(&y),
                (Some(_), None) => return Ordering::Less,
                (None, Some(_)) => return Ordering::Greater,
                (None, None) => Ordering::Equal,
            },
            (FieldValue::Text(x), FieldValue::Text(y)) => x.cmp(y),
            (FieldValue::Time(x), FieldValue::Time(y)) => x.cmp(&y),
            _ => Ordering::Equal,
        };
        if self.descending {
            ord.reverse()
        } else {
            ord
        }
    }
}

/// CSV with a `meter_id` header and one sorted, unique id per LF-terminated line.
pub fn export_meter_list<I, S>(ids: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut ids: Vec<String> = ids.into_iter().map(|s| s.as_ref().to_owned()).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["meter_id"]).expect("in-memory write");
    for id in &ids {
        w.write_record([id]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ids are UTF-8")
}

impl Dataset {
    /// Statistics for every meter, ordered by meter id. Computed once.
    pub fn meter_stats_rows(&self) -> Arc<Vec<MeterStatsRow>> {
        self.meter_stats.get_or_compute(&(), || {
            (0..self.table.meter_ids().len())
                .into_par_iter()
                .map(|m| self.compute_meter_row(m))
                .collect()
        })
    }

    pub fn parse_filter(&self, expr: &str) -> Result<Filter, DiagError> {
        parse_filter(expr, &self.column_names())
    }

    /// Rows matching `filter`, sorted (stable, ties by meter id), then paged.
    pub fn meter_stats(
        &self,
        filter: &str,
        sort: Option<&str>,
        page: usize,
        page_size: usize,
    ) -> Result<MeterStatsPage, DiagError> {
        if page_size == 0 || page_size > MAX_PAGE_SIZE {
            return Err(DiagError::BadParameter(format!(
                "page_size must be between 1 and {MAX_PAGE_SIZE}"
            )));
        }
        let filter = self.parse_filter(filter)?;
        let sort = sort
            .filter(|s| !s.trim().is_empty())
            .map(|s| parse_sort(s, &self.column_names()))
            .transpose()?;
        let all = self.meter_stats_rows();
        let mut rows: Vec<&MeterStatsRow> = all.iter().filter(|r| filter.matches(r)).collect();
        if let Some(key) = &sort {
            rows.sort_by(|a, b| key.compare(a, b));
        }
        let total_matching = rows.len();
        let rows = rows
            .into_iter()
            .skip(page.saturating_mul(page_size))
            .take(page_size)
            .cloned()
            .collect();
        Ok(MeterStatsPage {
            rows,
            total_matching,
            page,
            page_size,
        })
    }

    /// Ids of the meters matching `filter`, in id order.
    pub fn matching_meters(&self, filter: &str) -> Result<Vec<String>, DiagError> {
        let filter = self.parse_filter(filter)?;
        Ok(self
            .meter_stats_rows()
            .iter()
            .filter(|r| filter.matches(r))
            .map(|r| r.meter_id.clone())
            .collect())
    }

    pub fn export_meters(&self, filter: &str) -> Result<String, DiagError> {
        Ok(export_meter_list(self.matching_meters(filter)?))
    }

    fn compute_meter_row(&self, m: usize) -> MeterStatsRow {
        let activity = &self.activity()[m];
        let rows = self.table.meter_rows(m).rows;
        let structural = activity.expected_count - activity.present_count;
        let mut columns = BTreeMap::new();
        let mut values = Vec::with_capacity(rows.len());
        for column in self.table.columns() {
            values.clear();
            values.extend(rows.iter().filter_map(|&r| column.get(r as usize)));
            values.sort_unstable_by(f64::total_cmp);
            let null_count = rows.len() - values.len();
            let summary = robust_summary_sorted(&values);
            let counts = anomaly_counts(&values, summary.as_ref(), self.config.anomaly_threshold);
            let mc = medcouple_sorted(&values);
            let rules: Vec<_> = self
                .config
                .rules
                .iter()
                .filter(|r| r.column == column.name())
                .collect();
            columns.insert(
                column.name().to_owned(),
                MeterColumnStats {
                    null_count,
                    non_null_count: values.len(),
                    null_rate: (null_count + structural) as f64 / activity.expected_count as f64,
                    anomaly_count: counts.anomaly_count,
                    anomaly_rate: counts.anomaly_rate,
                    mean: summary.as_ref().map(|s| s.mean),
                    median: summary.as_ref().map(|s| s.median),
                    mad: summary.as_ref().map(|s| s.mad),
                    medcouple: (!mc.degenerate).then_some(mc.value),
                    min: summary.as_ref().map(|s| s.min),
                    max: summary.as_ref().map(|s| s.max),
                    negative_count: values.iter().filter(|&&v| v < 0.0).count(),
                    violation_count: values
                        .iter()
                        .filter(|&&v| rules.iter().any(|r| r.violated_by(v)))
                        .count(),
                },
            );
        }
        MeterStatsRow {
            meter_id: activity.meter_id.clone(),
            first_seen: activity.first_seen,
            last_seen: activity.last_seen,
            expected_count: activity.expected_count,
            present_count: activity.present_count,
            columns,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{dataset, t0};
    use super::*;

    fn sample() -> Dataset {
        let mut rows = Vec::new();
        for h in 0..10 {
            rows.push((h, "alpha", Some(h as f64)));
            rows.push((h, "beta", if h < 9 { None } else { Some(1.0) }));
            rows.push((h, "gamma", Some(-((h % 2) as f64))));
        }
        rows.push((3, "delta", Some(2.0)));
        dataset(&rows)
    }

    fn ids(page: &MeterStatsPage) -> Vec<&str> {
        page.rows.iter().map(|r| r.meter_id.as_str()).collect()
    }

    #[test]
    fn null_rate_filter() {
        let ds = sample();
        let page = ds
            .meter_stats("energy.null_rate > 0.85", None, 0, 50)
            .unwrap();
        assert_eq!(ids(&page), ["beta"]);
        assert_eq!(page.total_matching, 1);
        let bare = ds.meter_stats("null_rate > 0.85", None, 0, 50).unwrap();
        assert_eq!(ids(&bare), ["beta"]);
    }

    #[test]
    fn empty_filter_and_paging() {
        let ds = sample();
        let all = ds.meter_stats("", None, 0, 50).unwrap();
        assert_eq!(all.total_matching, 4);
        assert_eq!(ids(&all), ["alpha", "beta", "delta", "gamma"]);
        let p1 = ds.meter_stats(" ", None, 1, 3).unwrap();
        assert_eq!(ids(&p1), ["gamma"]);
        let beyond = ds.meter_stats("", None, 9, 3).unwrap();
        assert!(beyond.rows.is_empty());
        assert_eq!(beyond.total_matching, 4);
    }

    #[test]
    fn conjunctions_and_operators() {
        let ds = sample();
        let q = |f: &str| ids(&ds.meter_stats(f, None, 0, 50).unwrap()).join(",");
        assert_eq!(
            q("energy.negative_count >= 1 && present_count = 10"),
            "gamma"
        );
        assert_eq!(q("present_count == 10 AND energy.max ≥ 9"), "alpha");
        assert_eq!(q("present_count ≠ 10, meter_id != alpha"), "delta");
        assert_eq!(q("meter_id = \"beta\""), "beta");
        assert_eq!(q("first_seen > 2021-01-04T02:00:00Z"), "delta");
        assert_eq!(q("energy.violation_count > 0"), "gamma");
    }

    #[test]
    fn dangling_conjunctions_are_errors() {
        let ds = sample();
        for expr in [
            "present_count > 1 &&",
            "present_count > 1,, mean < 2",
            "and present_count > 1",
        ] {
            assert!(
                matches!(
                    ds.meter_stats(expr, None, 0, 50),
                    Err(DiagError::BadFilter { .. })
                ),
                "{expr}"
            );
        }
    }

    #[test]
    fn absent_stats_never_match() {
        let ds = dataset(&[(0, "a", None), (0, "b", Some(1.0))]);
        let page = ds.meter_stats("energy.mean < 100", None, 0, 50).unwrap();
        assert_eq!(ids(&page), ["b"]);
        let page = ds.meter_stats("energy.mean != 100", None, 0, 50).unwrap();
        assert_eq!(ids(&page), ["b"]);
    }

    #[test]
    fn sorting_is_stable_with_absent_last() {
        let ds = sample();
        let asc = ds.meter_stats("", Some("energy.mean"), 0, 50).unwrap();
        assert_eq!(ids(&asc), ["gamma", "beta", "delta", "alpha"]);
        let desc = ds.meter_stats("", Some("-present_count"), 0, 50).unwrap();
        assert_eq!(ids(&desc), ["alpha", "beta", "gamma", "delta"]);
        let desc2 = ds
            .meter_stats("", Some("present_count:desc"), 0, 50)
            .unwrap();
        assert_eq!(ids(&desc), ids(&desc2));
        let ds2 = dataset(&[(0, "a", None), (0, "b", Some(1.0)), (0, "c", Some(2.0))]);
        let d = ds2.meter_stats("", Some("-energy.mean"), 0, 50).unwrap();
        assert_eq!(ids(&d), ["c", "b", "a"]);
    }

    #[test]
    fn malformed_filters_name_the_term() {
        let ds = sample();
        for (expr, term) in [
            ("energy.null_rate >", "energy.null_rate >"),
            ("bogus.null_rate > 1", "bogus.null_rate > 1"),
            ("energy.null_rate 0.5", "energy.null_rate 0.5"),
            ("present_count > x && energy.mean < 1", "present_count > x"),
            ("energy.foo < 1", "energy.foo < 1"),
        ] {
            match ds.meter_stats(expr, None, 0, 50) {
                Err(DiagError::BadFilter { term: t, .. }) => assert_eq!(t, term, "{expr}"),
                other => panic!("{expr}: {other:?}"),
            }
        }
        assert!(matches!(
            ds.meter_stats("", Some("nope"), 0, 50),
            Err(DiagError::BadParameter(_))
        ));
        assert!(matches!(
            ds.meter_stats("", None, 0, 0),
            Err(DiagError::BadParameter(_))
        ));
    }

    #[test]
    fn stats_are_consistent() {
        let ds = sample();
        for row in ds.meter_stats_rows().iter() {
            for c in row.columns.values() {
                assert!((0.0..=1.0).contains(&c.null_rate));
                assert!((0.0..=1.0).contains(&c.anomaly_rate));
                assert!(c.negative_count <= row.present_count);
            }
        }
        let alpha = &ds.meter_stats_rows()[0];
        assert_eq!(alpha.first_seen, t0());
        assert_eq!(alpha.columns["energy"].median, Some(4.5));
    }

    #[test]
    fn export_format() {
        assert_eq!(export_meter_list(["c", "a", "b"]), "meter_id\na\nb\nc\n");
        assert_eq!(export_meter_list(Vec::<String>::new()), "meter_id\n");
        let text = export_meter_list(["x,1", "y"]);
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let back: Vec<String> = r.records().map(|rec| rec.unwrap()[0].to_owned()).collect();
        assert_eq!(back, ["x,1", "y"]);
        let ds = sample();
        assert_eq!(
            ds.export_meters("energy.null_rate > 0.85").unwrap(),
            "meter_id\nbeta\n"
        );
    }
}
