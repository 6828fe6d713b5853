use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use heatlens_core::diagnostics::{
    CorrelationMethod, Dataset, Scope, DEFAULT_MAX_POINTS, DEFAULT_PAGE_SIZE,
    DEFAULT_SCATTER_POINTS,
};
use heatlens_core::stats::DEFAULT_BINS;
use heatlens_core::store::Hour;
use serde::Serialize;

use crate::error::ApiError;
use crate::params::Params;
use crate::schemas;
use crate::MAX_BINS;

type Shared = State<Arc<Dataset>>;
type Reply = Result<Response, ApiError>;

fn json_bytes(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

fn json<T: Serialize + ?Sized>(value: &T) -> Reply {
    serde_json::to_vec(value)
        .map(json_bytes)
        .map_err(|e| ApiError::internal(e.to_string()))
}

/// Runs CPU-bound work off the async workers.
async fn blocking<F>(ds: Arc<Dataset>, f: F) -> Reply
where
    F: FnOnce(&Dataset) -> Reply + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&ds))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

fn scope(p: &Params) -> Scope {
    match p.text("meter").filter(|m| !m.is_empty()) {
        Some(m) => Scope::meter(m),
        None => Scope::All,
    }
}

pub async fn summary(State(ds): Shared, p: Params) -> Reply {
    p.only(&[])?;
    json(&ds.summary())
}

pub async fn columns(State(ds): Shared, p: Params) -> Reply {
    p.only(&[])?;
    json(&ds.column_names())
}

pub async fn kpi(State(ds): Shared, p: Params) -> Reply {
    let p = p.only(&["column", "meter"])?;
    let column = p.required("column")?.to_owned();
    let scope = scope(&p);
    blocking(ds, move |ds| json(&*ds.column_kpi(&column, &scope)?)).await
}

pub async fn boxplot(State(ds): Shared, p: Params) -> Reply {
    let p = p.only(&["column", "meter"])?;
    let column = p.required("column")?.to_owned();
    let scope = scope(&p);
    blocking(ds, move |ds| match ds.boxplot(&column, &scope)? {
        Some(b) => json(&b),
        None => Err(ApiError::no_data(format!("no values in column '{column}'"))),
    })
    .await
}

pub async fn histogram(State(ds): Shared, p: Params) -> Reply {
    let p = p.only(&["column", "meter", "bins"])?;
    let column = p.required("column")?.to_owned();
    let bins = p.parsed::<usize>("bins")?.unwrap_or(DEFAULT_BINS);
    if !(1..=MAX_BINS).contains(&bins) {
        return Err(ApiError::bad_parameter(format!(
            "bins must be between 1 and {MAX_BINS}"
        )));
    }
    let scope = scope(&p);
    blocking(ds, move |ds| match ds.histogram(&column, &scope, bins)? {
        Some(h) => json(&h),
        None => Err(ApiError::no_data(format!("no values in column '{column}'"))),
    })
    .await
}

pub async fn heatmap_missing(State(ds): Shared, p: Params) -> Reply {
    let p = p.only(&["column", "normalize"])?;
    let column = p.required("column")?.to_owned();
    let normalize = p.flag("normalize")?;
    blocking(ds, move |ds| {
        json(&ds.missing_value_heatmap(&column, normalize)?)
    })
    .await
}

pub async fn heatmap_meters(State(ds): Shared, p: Params) -> Reply {
    let p = p.only(&["normalize"])?;
    let normalize = p.flag("normalize")?;
    blocking(ds, move |ds| json(&ds.missing_meter_heatmap(normalize))).await
}

pub async fn timestamps_missing(State(ds): Shared, p: Params) -> Reply {
    p.only(&[])?;
    blocking(ds, |ds| json(&*ds.missing_timestamps())).await
}

pub async fn violations(State(ds): Shared, p: Params) -> Reply {
    p.only(&[])?;
    blocking(ds, |ds| json(&*ds.violations()?)).await
}

pub async fn correlation(State(ds): Shared, p: Params) -> Reply {
    let p = p.only(&["method"])?;
    let method = p.parsed::<CorrelationMethod>("method")?.unwrap_or_default();
    blocking(ds, move |ds| json(&*ds.correlation(method))).await
}

pub async fn scatter(State(ds): Shared, p: Params) -> Reply {
    let p = p.only(&["x", "y", "max_points", "seed"])?;
    let x = p.required("x")?.to_owned();
    let y = p.required("y")?.to_owned();
    let max_points = p.parsed("max_points")?.unwrap_or(DEFAULT_SCATTER_POINTS);
    let seed = p.parsed("seed")?.unwrap_or(0);
    blocking(ds, move |ds| json(&ds.scatter(&x, &y, max_points, seed)?)).await
}

pub async fn timeseries(State(ds): Shared, p: Params) -> Reply {
    let p = p.only(&["meter", "column", "from", "to", "max_points"])?;
    let meter = p.required("meter")?.to_owned();
    let column = p.required("column")?.to_owned();
    let from = p.parsed::<Hour>("from")?;
    let to = p.parsed::<Hour>("to")?;
    let max_points = p.parsed("max_points")?.unwrap_or(DEFAULT_MAX_POINTS);
    blocking(ds, move |ds| {
        json(&ds.timeseries(&meter, &column, from, to, max_points)?)
    })
    .await
}

pub async fn meters(State(ds): Shared, p: Params) -> Reply {
    let p = p.only(&["filter", "sort", "page", "page_size"])?;
    let filter = p.text("filter").unwrap_or("").to_owned();
    let sort = p.text("sort").map(str::to_owned);
    let page = p.parsed("page")?.unwrap_or(0);
    let page_size = p.parsed("page_size")?.unwrap_or(DEFAULT_PAGE_SIZE);
    blocking(ds, move |ds| {
        json(&ds.meter_stats(&filter, sort.as_deref(), page, page_size)?)
    })
    .await
}

pub async fn meters_export(State(ds): Shared, p: Params) -> Reply {
    let p = p.only(&["filter"])?;
    let filter = p.text("filter").unwrap_or("").to_owned();
    blocking(ds, move |ds| {
        let csv = ds.export_meters(&filter)?;
        Ok((
            [
                (header::CONTENT_TYPE, "text/csv; charset=utf-8"),
                (
                    header::CONTENT_DISPOSITION,
                    "attachment; filename=\"meters.csv\"",
                ),
            ],
            csv,
        )
            .into_response())
    })
    .await
}

pub async fn schema_index() -> Reply {
    let names: Vec<String> = schemas::SCHEMAS
        .iter()
        .map(|(n, _)| format!("{n}.json"))
        .collect();
    json(&names)
}

pub async fn schema_file(Path(name): Path<String>) -> Reply {
    let stem = name.strip_suffix(".json").unwrap_or(&name);
    schemas::schema(stem)
        .map(|text| json_bytes(text.as_bytes().to_vec()))
        .ok_or_else(|| ApiError::not_found(format!("no schema named '{name}'")))
}

pub async fn not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub async fn index() -> impl IntoResponse {
    (StatusCode::OK, Html(include_str!("index.html")))
}
