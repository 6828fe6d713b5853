//! Columnar reading store: CSV ingest, the immutable [`ReadingTable`], the
//! hourly grid and the on-disk cache.

mod cache;
mod ingest;
mod schema;
mod table;
mod time;

use std::path::PathBuf;

pub use cache::{
    cache_open, cache_read, cache_write, ingest_with_cache, source_fingerprint, CacheFile,
    CacheManifest, CacheMiss, CachedDataset, LoadedDataset, CACHE_FORMAT_VERSION, INGEST_VERSION,
};
pub use ingest::{load_csv, FileReport, IngestReport, LineError, MAX_ERROR_SAMPLES};
pub use schema::{BoundRule, ColumnSpec, KeyHeaders, SchemaConfig, WindowMode, DEFAULT_COLUMNS};
pub use table::{Column, MeterActivity, MeterRows, ReadingTable, TableBuilder};
pub use time::{Hour, TimeParseError};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Csv { path: PathBuf, message: String },
    #[error("schema error: {0}")]
    Schema(String),
}
