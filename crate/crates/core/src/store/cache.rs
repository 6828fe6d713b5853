//! On-disk columnar cache of a parsed [`ReadingTable`].
//!
//! A cache directory holds one binary file per column plus the key arrays,
//! and a `manifest.json` written last. Every binary file starts with a
//! magic tag, the format version and the element count; the manifest
//! records each file's length and SHA-256 together with the fingerprint of
//! the sources the table was built from. Anything that does not check out
//! is reported as a miss so the caller re-ingests.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ingest::{load_csv, IngestReport};
use super::schema::SchemaConfig;
use super::table::{Column, ReadingTable};
use super::time::Hour;
use super::StoreError;

pub const CACHE_FORMAT_VERSION: u32 = 1;
/// Bumped whenever parsing semantics change, so old caches stop matching.
pub const INGEST_VERSION: u32 = 1;

const MAGIC: &[u8; 8] = b"HLCACHE\0";
const HEADER_LEN: usize = 8 + 4 + 8;
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheManifest {
    pub format_version: u32,
    pub fingerprint: String,
    pub row_count: usize,
    pub timestamp_count: usize,
    pub meter_count: usize,
    pub schema: SchemaConfig,
    pub ingest: IngestReport,
    pub files: Vec<CacheFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheFile {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug)]
pub struct CachedDataset {
    pub table: ReadingTable,
    pub manifest: CacheManifest,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CacheMiss {
    #[error("no cache present")]
    Absent,
    #[error("cache format version {found} (expected {CACHE_FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("cache built from different sources or schema")]
    StaleFingerprint,
    #[error("cache is corrupt: {0}")]
    Corrupt(String),
}

/// Content hash over the ingest version, the schema and every source file
/// in order. File names do not participate, only bytes.
pub fn source_fingerprint<P: AsRef<Path>>(
    paths: &[P],
    schema: &SchemaConfig,
) -> Result<String, StoreError> {
    let mut hasher = Sha256::new();
    hasher.update(format!("heatlens-ingest/{INGEST_VERSION}\n").as_bytes());
    let schema_json = serde_json::to_string(schema).expect("schema serializes");
    hasher.update(schema_json.as_bytes());
    hasher.update(b"\n");
    let mut buf = vec![0u8; 1 << 20];
    for path in paths {
        let path = path.as_ref();
        let io_err = |source| StoreError::Io {
            path: path.to_owned(),
            source,
        };
        let mut file = fs::File::open(path).map_err(io_err)?;
        let len = file.metadata().map_err(io_err)?.len();
        hasher.update(format!("{len}\n").as_bytes());
        loop {
            let n = file.read(&mut buf).map_err(io_err)?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
        }
    }
    Ok(to_hex(&hasher.finalize()))
}

pub fn cache_write(
    table: &ReadingTable,
    schema: &SchemaConfig,
    ingest: &IngestReport,
    fingerprint: &str,
    dir: &Path,
) -> Result<CacheManifest, StoreError> {
    let io_err = |path: &Path| {
        let path = path.to_owned();
        move |source| StoreError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    // a half-written cache must never look complete
    let manifest_path = dir.join(MANIFEST);
    if manifest_path.exists() {
        fs::remove_file(&manifest_path).map_err(io_err(&manifest_path))?;
    }

    let mut files = Vec::new();
    let mut put =
        |name: String,
         count: usize,
         payload: &mut dyn FnMut(&mut dyn Write) -> std::io::Result<()>| {
            let path = dir.join(&name);
            let (bytes, sha256) = write_blob(&path, count, payload).map_err(io_err(&path))?;
            files.push(CacheFile {
                name,
                bytes,
                sha256,
            });
            Ok::<_, StoreError>(())
        };

    put(
        "timestamps.bin".into(),
        table.timestamps().len(),
        &mut |w| {
            table
                .timestamps()
                .iter()
                .try_for_each(|h| w.write_all(&h.0.to_le_bytes()))
        },
    )?;
    put(
        "time_offsets.bin".into(),
        table.time_offsets().len(),
        &mut |w| {
            table
                .time_offsets()
                .iter()
                .try_for_each(|o| w.write_all(&o.to_le_bytes()))
        },
    )?;
    put("meters.bin".into(), table.meter_ids().len(), &mut |w| {
        table.meter_ids().iter().try_for_each(|id| {
            w.write_all(&(id.len() as u32).to_le_bytes())?;
            w.write_all(id.as_bytes())
        })
    })?;
    put("row_meter.bin".into(), table.row_count(), &mut |w| {
        table
            .row_meters()
            .iter()
            .try_for_each(|m| w.write_all(&m.to_le_bytes()))
    })?;
    for (i, col) in table.columns().iter().enumerate() {
        put(format!("column_{i:03}.bin"), col.len(), &mut |w| {
            col.raw()
                .iter()
                .try_for_each(|v| w.write_all(&v.to_bits().to_le_bytes()))
        })?;
    }

    let manifest = CacheManifest {
        format_version: CACHE_FORMAT_VERSION,
        fingerprint: fingerprint.to_owned(),
        row_count: table.row_count(),
        timestamp_count: table.timestamps().len(),
        meter_count: table.meter_ids().len(),
        schema: schema.clone(),
        ingest: ingest.clone(),
        files,
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, json).map_err(io_err(&manifest_path))?;
    Ok(manifest)
}

fn write_blob(
    path: &Path,
    count: usize,
    payload: &mut dyn FnMut(&mut dyn Write) -> std::io::Result<()>,
) -> std::io::Result<(u64, String)> {
    struct Hashing<W> {
        inner: W,
        hasher: Sha256,
        bytes: u64,
    }
    impl<W: Write> Write for Hashing<W> {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            let n = self.inner.write(buf)?;
            self.hasher.update(&buf[..n]);
            self.bytes += n as u64;
            Ok(n)
        }
        fn flush(&mut self) -> std::io::Result<()> {
            self.inner.flush()
        }
    }
    let file = fs::File::create(path)?;
    let mut w = Hashing {
        inner: BufWriter::with_capacity(1 << 20, file),
        hasher: Sha256::new(),
        bytes: 0,
    };
    w.write_all(MAGIC)?;
    w.write_all(&CACHE_FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(count as u64).to_le_bytes())?;
    payload(&mut w)?;
    w.flush()?;
    Ok((w.bytes, to_hex(&w.hasher.finalize())))
}

/// Loads the cache if it was built from sources with this fingerprint.
pub fn cache_read(dir: &Path, fingerprint: &str) -> Result<CachedDataset, CacheMiss> {
    let manifest = read_manifest(dir)?;
    if manifest.fingerprint != fingerprint {
        return Err(CacheMiss::StaleFingerprint);
    }
    load_tables(dir, manifest).inspect_err(warn_miss)
}

/// Loads whatever valid cache is present, without checking its sources.
pub fn cache_open(dir: &Path) -> Result<CachedDataset, CacheMiss> {
    let manifest = read_manifest(dir)?;
    load_tables(dir, manifest).inspect_err(warn_miss)
}

fn warn_miss(miss: &CacheMiss) {
    if matches!(
        miss,
        CacheMiss::Corrupt(_) | CacheMiss::VersionMismatch { .. }
    ) {
        tracing::warn!(%miss, "ignoring cache");
    }
}

fn read_manifest(dir: &Path) -> Result<CacheManifest, CacheMiss> {
    let path = dir.join(MANIFEST);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(CacheMiss::Absent),
        Err(e) => return Err(CacheMiss::Corrupt(format!("{}: {e}", path.display()))),
    };
    #[derive(Deserialize)]
    struct VersionProbe {
        format_version: u32,
    }
    let probe: VersionProbe = serde_json::from_slice(&bytes)
        .map_err(|e| CacheMiss::Corrupt(format!("manifest: {e}")))
        .inspect_err(warn_miss)?;
    if probe.format_version != CACHE_FORMAT_VERSION {
        let miss = CacheMiss::VersionMismatch {
            found: probe.format_version,
        };
        warn_miss(&miss);
        return Err(miss);
    }
    serde_json::from_slice(&bytes)
        .map_err(|e| CacheMiss::Corrupt(format!("manifest: {e}")))
        .inspect_err(warn_miss)
}

fn load_tables(dir: &Path, manifest: CacheManifest) -> Result<CachedDataset, CacheMiss> {
    let n_cols = manifest.schema.columns.len();
    let expected: Vec<String> = [
        "timestamps.bin",
        "time_offsets.bin",
        "meters.bin",
        "row_meter.bin",
    ]
    .into_iter()
    .map(String::from)
    .chain((0..n_cols).map(|i| format!("column_{i:03}.bin")))
    .collect();
    let listed: Vec<&str> = manifest.files.iter().map(|f| f.name.as_str()).collect();
    if listed != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(CacheMiss::Corrupt(
            "manifest file list does not match schema".into(),
        ));
    }

    let blob = |i: usize| read_blob(&dir.join(&manifest.files[i].name), &manifest.files[i]);

    let (count, payload) = blob(0)?;
    let timestamps: Vec<Hour> = fixed_width::<8>(&payload, count, "timestamps")?
        .map(|b| Hour(i64::from_le_bytes(b)))
        .collect();
    let (count, payload) = blob(1)?;
    let time_offsets: Vec<u32> = fixed_width::<4>(&payload, count, "time offsets")?
        .map(u32::from_le_bytes)
        .collect();
    let (count, payload) = blob(2)?;
    let meter_ids = decode_strings(&payload, count)?;
    let (count, payload) = blob(3)?;
    let row_meter: Vec<u32> = fixed_width::<4>(&payload, count, "row meters")?
        .map(u32::from_le_bytes)
        .collect();
    drop(payload);

    let mut columns = Vec::with_capacity(n_cols);
    for (i, spec) in manifest.schema.columns.iter().enumerate() {
        let (count, payload) = blob(4 + i)?;
        let values: Vec<f64> = fixed_width::<8>(&payload, count, &spec.name)?
            .map(|b| f64::from_bits(u64::from_le_bytes(b)))
            .collect();
        columns.push(Column::from_raw(
            spec.name.clone(),
            spec.unit.clone(),
            values,
        ));
    }

    let table = ReadingTable::from_parts(timestamps, time_offsets, meter_ids, row_meter, columns)
        .map_err(CacheMiss::Corrupt)?;
    if table.row_count() != manifest.row_count
        || table.timestamps().len() != manifest.timestamp_count
        || table.meter_ids().len() != manifest.meter_count
    {
        return Err(CacheMiss::Corrupt(
            "table shape disagrees with manifest".into(),
        ));
    }
    Ok(CachedDataset { table, manifest })
}

/// Returns the element count and the payload after the header.
fn read_blob(path: &Path, entry: &CacheFile) -> Result<(usize, Vec<u8>), CacheMiss> {
    let corrupt = |what: &str| CacheMiss::Corrupt(format!("{}: {what}", path.display()));
    let bytes = fs::read(path).map_err(|e| corrupt(&e.to_string()))?;
    if bytes.len() as u64 != entry.bytes {
        return Err(corrupt("length mismatch"));
    }
    if to_hex(&Sha256::digest(&bytes)) != entry.sha256 {
        return Err(corrupt("checksum mismatch"));
    }
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CACHE_FORMAT_VERSION {
        return Err(CacheMiss::VersionMismatch { found: version });
    }
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let mut payload = bytes;
    payload.drain(..HEADER_LEN);
    Ok((count, payload))
}

fn fixed_width<'a, const W: usize>(
    payload: &'a [u8],
    count: usize,
    what: &str,
) -> Result<impl Iterator<Item = [u8; W]> + 'a, CacheMiss> {
    if payload.len() != count * W {
        return Err(CacheMiss::Corrupt(format!("{what}: payload size mismatch")));
    }
    Ok(payload.chunks_exact(W).map(|c| c.try_into().unwrap()))
}

fn decode_strings(payload: &[u8], count: usize) -> Result<Vec<String>, CacheMiss> {
    let bad = || CacheMiss::Corrupt("meter ids: truncated".into());
    let mut out = Vec::with_capacity(count);
    let mut rest = payload;
    for _ in 0..count {
        let len_bytes: [u8; 4] = rest.get(..4).ok_or_else(bad)?.try_into().unwrap();
        let len = u32::from_le_bytes(len_bytes) as usize;
        let s = rest.get(4..4 + len).ok_or_else(bad)?;
        out.push(
            String::from_utf8(s.to_vec())
                .map_err(|_| CacheMiss::Corrupt("meter ids: invalid UTF-8".into()))?,
        );
        rest = &rest[4 + len..];
    }
    if !rest.is_empty() {
        return Err(CacheMiss::Corrupt("meter ids: trailing bytes".into()));
    }
    Ok(out)
}

fn to_hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Outcome of [`ingest_with_cache`].
#[derive(Debug)]
pub struct LoadedDataset {
    pub table: ReadingTable,
    pub report: IngestReport,
    pub fingerprint: String,
    pub cache_hit: bool,
    pub cache_dir: Option<PathBuf>,
}

/// Serves the table from `cache_dir` when its fingerprint matches the
/// sources, otherwise parses the CSVs and refreshes the cache.
pub fn ingest_with_cache<P: AsRef<Path> + Sync>(
    paths: &[P],
    schema: &SchemaConfig,
    cache_dir: Option<&Path>,
) -> Result<LoadedDataset, StoreError> {
    let fingerprint = source_fingerprint(paths, schema)?;
    if let Some(dir) = cache_dir {
        match cache_read(dir, &fingerprint) {
            Ok(cached) => {
                return Ok(LoadedDataset {
                    table: cached.table,
                    report: cached.manifest.ingest,
                    fingerprint,
                    cache_hit: true,
                    cache_dir: Some(dir.to_owned()),
                })
            }
            Err(miss) => tracing::info!(%miss, "cache miss, ingesting"),
        }
    }
    let (table, report) = load_csv(paths, schema)?;
    if let Some(dir) = cache_dir {
        cache_write(&table, schema, &report, &fingerprint, dir)?;
    }
    Ok(LoadedDataset {
        table,
        report,
        fingerprint,
        cache_hit: false,
        cache_dir: cache_dir.map(Path::to_owned),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::TableBuilder;

    fn sample_table() -> ReadingTable {
        let schema = SchemaConfig::default();
        let mut b = TableBuilder::new(&schema.columns);
        let t0 = Hour::from_ymd_h(2021, 3, 1, 0).unwrap();
        b.push(
            t0,
            "m-ø",
            &[Some(1e12), None, Some(-3.5), Some(0.0), Some(-1e12)],
        );
        b.push(t0.offset(2), "m1", &[None, None, None, None, None]);
        b.push(
            t0.offset(2),
            "m-ø",
            &[
                Some(f64::MIN_POSITIVE),
                Some(70.0),
                Some(40.0),
                Some(12.5),
                Some(-0.0),
            ],
        );
        b.build().0
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let table = sample_table();
        let schema = SchemaConfig::default();
        cache_write(&table, &schema, &IngestReport::default(), "abc", dir.path()).unwrap();
        let cached = cache_read(dir.path(), "abc").unwrap();
        assert_eq!(cached.table, table);
        assert_eq!(cached.manifest.schema, schema);
        assert_eq!(cache_open(dir.path()).unwrap().table, table);
    }

    #[test]
    fn stale_fingerprint_misses() {
        let dir = tempfile::tempdir().unwrap();
        cache_write(
            &sample_table(),
            &SchemaConfig::default(),
            &IngestReport::default(),
            "abc",
            dir.path(),
        )
        .unwrap();
        assert_eq!(
            cache_read(dir.path(), "abd").unwrap_err(),
            CacheMiss::StaleFingerprint
        );
    }

    #[test]
    fn empty_dir_misses() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(
            cache_read(dir.path(), "abc").unwrap_err(),
            CacheMiss::Absent
        );
    }

    #[test]
    fn corruption_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        cache_write(
            &sample_table(),
            &SchemaConfig::default(),
            &IngestReport::default(),
            "abc",
            dir.path(),
        )
        .unwrap();
        let col = dir.path().join("column_000.bin");
        let mut bytes = fs::read(&col).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0xff;
        fs::write(&col, bytes).unwrap();
        assert!(matches!(
            cache_read(dir.path(), "abc"),
            Err(CacheMiss::Corrupt(_))
        ));
    }

    #[test]
    fn version_mismatch_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        cache_write(
            &sample_table(),
            &SchemaConfig::default(),
            &IngestReport::default(),
            "abc",
            dir.path(),
        )
        .unwrap();
        let path = dir.path().join(MANIFEST);
        let text = fs::read_to_string(&path).unwrap().replacen(
            &format!("\"format_version\": {CACHE_FORMAT_VERSION}"),
            "\"format_version\": 999",
            1,
        );
        fs::write(&path, text).unwrap();
        assert_eq!(
            cache_read(dir.path(), "abc").unwrap_err(),
            CacheMiss::VersionMismatch { found: 999 }
        );
    }

    #[test]
    fn writes_are_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let schema = SchemaConfig::default();
        cache_write(
            &sample_table(),
            &schema,
            &IngestReport::default(),
            "f",
            a.path(),
        )
        .unwrap();
        cache_write(
            &sample_table(),
            &schema,
            &IngestReport::default(),
            "f",
            b.path(),
        )
        .unwrap();
        for name in ["manifest.json", "row_meter.bin", "column_004.bin"] {
            assert_eq!(
                fs::read(a.path().join(name)).unwrap(),
                fs::read(b.path().join(name)).unwrap()
            );
        }
    }

    #[test]
    fn fingerprint_tracks_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, "timestamp,meter_id\n").unwrap();
        let schema = SchemaConfig::default();
        let f1 = source_fingerprint(&[&p], &schema).unwrap();
        assert_eq!(f1, source_fingerprint(&[&p], &schema).unwrap());
        fs::write(&p, "timestamp,meter_id\n\n").unwrap();
        assert_ne!(f1, source_fingerprint(&[&p], &schema).unwrap());
        let other = SchemaConfig {
            null_sentinels: vec!["-".into()],
            ..SchemaConfig::default()
        };
        fs::write(&p, "timestamp,meter_id\n").unwrap();
        assert_ne!(f1, source_fingerprint(&[&p], &other).unwrap());
    }
}
