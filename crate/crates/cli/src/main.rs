use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use heatlens_cli::data::{csv_inputs, load_schema, DataArgs};
use heatlens_cli::report::{build_report, EXIT_ERROR};
use heatlens_core::store::ingest_with_cache;
use heatlens_core::synth::{generate, GeneratorConfig};

#[derive(Debug, Parser)]
#[command(
    name = "heatlens",
    version,
    about = "Data-quality diagnostics for hourly heat-meter readings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse CSV readings and build or refresh the binary cache.
    Ingest {
        /// CSV files or directories of CSV files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Schema config (TOML); defaults to the built-in column set.
        #[arg(long, visible_alias = "config", value_name = "FILE")]
        schema: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        cache_dir: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Print KPIs, missing timestamps and rule violations.
    ///
    /// Exits 0 when every status is green, 1 if any is yellow, 2 if any is
    /// red and 3 on errors.
    Report {
        #[command(flatten)]
        data: DataArgs,
        /// Restrict to one column.
        #[arg(long)]
        column: Option<String>,
        /// Restrict to one meter.
        #[arg(long)]
        meter: Option<String>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Write a synthetic dataset and its ground-truth labels.
    Generate {
        /// Generator config (TOML); defaults apply to missing keys.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Serve the JSON API (and a dashboard build, if given).
    Serve {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Directory with a built dashboard to serve at `/`.
        #[arg(long, value_name = "DIR")]
        assets: Option<PathBuf>,
    },
    /// Write the ids of meters matching a filter as CSV.
    ExportMeters {
        #[command(flatten)]
        data: DataArgs,
        /// Filter expression, e.g. "energy.null_rate > 0.9".
        #[arg(long, default_value = "")]
        filter: String,
        /// Output file; standard output when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Ingest {
            inputs,
            schema,
            cache_dir,
            format,
        } => {
            let schema = load_schema(schema.as_deref())?;
            let inputs = csv_inputs(&inputs)?;
            let loaded = ingest_with_cache(&inputs, &schema, Some(&cache_dir))?;
            match format {
                Format::Json => print_json(&serde_json::json!({
                    "cache_dir": cache_dir,
                    "cache_hit": loaded.cache_hit,
                    "fingerprint": loaded.fingerprint,
                    "report": loaded.report,
                }))?,
                Format::Text => {
                    let r = &loaded.report;
                    println!(
                        "cache {} ({})",
                        cache_dir.display(),
                        if loaded.cache_hit {
                            "up to date"
                        } else {
                            "rebuilt"
                        }
                    );
                    println!(
                        "rows read {}, accepted {}, rejected {}, duplicates {}, non-finite cells {}",
                        r.rows_read, r.rows_accepted, r.rows_rejected, r.duplicate_rows, r.nonfinite_cells
                    );
                    for f in &r.files {
                        println!(
                            "  {}: {} rows, {} rejected",
                            f.path, f.rows_read, f.rows_rejected
                        );
                        for e in &f.errors {
                            println!("    line {}: {}", e.line, e.message);
                        }
                    }
                }
            }
            Ok(0)
        }
        Command::Report {
            data,
            column,
            meter,
            format,
        } => {
            let loaded = data.load()?;
            let report = build_report(&loaded.dataset, column.as_deref(), meter.as_deref())?;
            match format {
                Format::Json => print_json(&report)?,
                Format::Text => print!("{}", report.to_text()),
            }
            Ok(report.exit_code)
        }
        Command::Generate { config, out } => {
            let config = match config {
                Some(p) => GeneratorConfig::load(&p)?,
                None => GeneratorConfig::default(),
            };
            let generated = generate(&config, &out)?;
            let truth = &generated.ground_truth;
            for f in &generated.files {
                println!("{}", f.display());
            }
            println!("{}", generated.ground_truth_path.display());
            println!("rows {}, meters {}", truth.rows_written, truth.meters.len());
            println!("{}", serde_json::to_string(&truth.counts)?);
            Ok(0)
        }
        Command::Serve { data, bind, assets } => {
            let loaded = data.load()?;
            let summary = loaded.dataset.summary();
            eprintln!(
                "loaded {} rows from {} meters",
                summary.row_count, summary.meter_count
            );
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .context("starting runtime")?;
            runtime.block_on(async {
                let listener = heatlens_api::bind(bind).await?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                heatlens_api::serve_on(listener, Arc::new(loaded.dataset), assets).await?;
                anyhow::Ok(())
            })?;
            Ok(0)
        }
        Command::ExportMeters { data, filter, out } => {
            let loaded = data.load()?;
            let ids = loaded.dataset.matching_meters(&filter)?;
            let csv = heatlens_core::diagnostics::export_meter_list(&ids);
            match out {
                Some(path) => {
                    fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
                    eprintln!("wrote {} meter ids to {}", ids.len(), path.display());
                }
                None => print!("{csv}"),
            }
            Ok(0)
        }
    }
}
