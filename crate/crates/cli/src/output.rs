//! CSV tables, PGM heatmaps and run manifests.
//!
//! Numbers are always written as `{:.16e}` (17 significant digits), so a
//! value round-trips exactly and identical inputs give identical bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use qci_core::PdfField;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn number(x: f64) -> String {
    format!("{x:.16e}")
}

/// A header row plus data rows, written as RFC 4180 CSV (CRLF line ends).
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// One CSV row per grid point in row-major order: coordinates, then `pdf`.
pub fn field_table(field: &PdfField) -> Table {
    let mut table = Table::new(field.axes.iter().map(|a| a.name.clone()).chain(["pdf".to_string()]));
    for (flat, &v) in field.values.iter().enumerate() {
        let mut row: Vec<String> = field.point(flat).into_iter().map(number).collect();
        row.push(number(v));
        table.push(row);
    }
    table
}

/// Min-max scaling applied to a heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PgmScaling {
    pub min: f64,
    pub max: f64,
    pub maxval: u8,
    /// Grid axis along image rows (top to bottom) and columns.
    pub rows_axis: usize,
    pub columns_axis: usize,
}

/// Binary greyscale image of a two-axis field. The first axis runs down the
/// rows and the second across the columns; black is the field minimum.
pub fn pgm_bytes(field: &PdfField) -> Result<(Vec<u8>, PgmScaling), CliError> {
    let shape = field.shape();
    if shape.len() != 2 {
        return Err(CliError::Validation(format!(
            "a heatmap needs a two-axis grid (got {} axes)",
            shape.len()
        )));
    }
    let min = field.values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = field.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let mut out = format!("P5\n{} {}\n255\n", shape[1], shape[0]).into_bytes();
    out.extend(field.values.iter().map(|&v| {
        if span > 0.0 {
            (((v - min) / span) * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }));
    Ok((out, PgmScaling { min, max, maxval: 255, rows_axis: 0, columns_axis: 1 }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub role: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Record of one run. Written after every other output, so a run is
/// complete exactly when its manifest exists.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub arguments: Vec<String>,
    pub scenario_hash: Option<String>,
    pub quadrature: Option<qci_core::QuadratureSpec>,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputFile>,
    pub details: serde_json::Value,
    pub warnings: Vec<String>,
}

/// Collects output files for a run and finally writes the manifest.
#[derive(Debug)]
pub struct Run {
    started: Instant,
    manifest: RunManifest,
}

impl Run {
    pub fn start(command: &str) -> Self {
        Run {
            started: Instant::now(),
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                arguments: std::env::args().skip(1).collect(),
                scenario_hash: None,
                quadrature: None,
                threads: rayon::current_num_threads(),
                wall_clock_seconds: 0.0,
                outputs: Vec::new(),
                details: serde_json::Value::Null,
                warnings: Vec::new(),
            },
        }
    }

    pub fn manifest_mut(&mut self) -> &mut RunManifest {
        &mut self.manifest
    }

    /// Writes `bytes` to `path` (via a temporary sibling and a rename) and
    /// records it.
    pub fn write(&mut self, path: &Path, role: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(path, bytes)?;
        self.manifest.outputs.push(OutputFile {
            path: path.to_path_buf(),
            role: role.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex(&Sha256::digest(bytes)),
        });
        Ok(())
    }

    /// Writes the manifest next to `primary` as `<primary>.manifest.json`.
    pub fn finish(mut self, primary: &Path) -> Result<RunManifest, CliError> {
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        let path = manifest_path(primary);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        write_atomic(&path, text.as_bytes())?;
        Ok(self.manifest)
    }
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut name = primary.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    primary.with_file_name(name)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
    }
    let mut tmp_name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    tmp_name.push(".partial");
    let tmp = path.with_file_name(tmp_name);
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(tmp.display(), e))?;
    f.write_all(bytes).map_err(|e| CliError::io(tmp.display(), e))?;
    f.sync_all().map_err(|e| CliError::io(tmp.display(), e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path.display(), e))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
