use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use heatlens_core::diagnostics::{Dataset, DiagnosticsConfig};
use heatlens_core::store::{cache_open, ingest_with_cache, IngestReport, SchemaConfig};

/// Where a command reads its dataset from.
#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// Binary cache written by `heatlens ingest`.
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    /// CSV file or directory of CSV files, ingested at startup (and cached
    /// when --cache-dir is given).
    #[arg(long, value_name = "PATH")]
    pub data_dir: Option<PathBuf>,
    /// Schema config (TOML). Defaults to the schema stored in the cache.
    #[arg(long, visible_alias = "config", value_name = "FILE")]
    pub schema: Option<PathBuf>,
}

pub struct Loaded {
    pub dataset: Dataset,
    pub schema: SchemaConfig,
    pub ingest: IngestReport,
    pub cache_hit: bool,
}

pub fn load_schema(path: Option<&Path>) -> Result<SchemaConfig> {
    match path {
        Some(p) => SchemaConfig::load(p).with_context(|| format!("loading schema {}", p.display())),
        None => Ok(SchemaConfig::default()),
    }
}

/// Expands a file or a directory into a sorted list of `.csv` files.
pub fn csv_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(path)
                .with_context(|| format!("reading directory {}", path.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv"))
                })
                .collect();
            found.sort();
            if found.is_empty() {
                bail!("no .csv files in {}", path.display());
            }
            out.extend(found);
        } else {
            out.push(path.clone());
        }
    }
    if out.is_empty() {
        bail!("no input files given");
    }
    Ok(out)
}

impl DataArgs {
    pub fn load(&self) -> Result<Loaded> {
        if let Some(data) = &self.data_dir {
            let schema = load_schema(self.schema.as_deref())?;
            let inputs = csv_inputs(std::slice::from_ref(data))?;
            let loaded = ingest_with_cache(&inputs, &schema, self.cache_dir.as_deref())?;
            return Ok(Loaded {
                dataset: Dataset::new(loaded.table, DiagnosticsConfig::from(&schema)),
                schema,
                ingest: loaded.report,
                cache_hit: loaded.cache_hit,
            });
        }
        let Some(dir) = &self.cache_dir else {
            bail!("either --cache-dir or --data-dir is required");
        };
        let cached = cache_open(dir).map_err(|miss| {
            anyhow::anyhow!(
                "no usable cache in {}: {miss}; run `heatlens ingest` first",
                dir.display()
            )
        })?;
        let schema = match &self.schema {
            Some(p) => load_schema(Some(p))?,
            None => cached.manifest.schema.clone(),
        };
        Ok(Loaded {
            dataset: Dataset::new(cached.table, DiagnosticsConfig::from(&schema)),
            schema,
            ingest: cached.manifest.ingest,
            cache_hit: true,
        })
    }
}
