use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::OutputFormat;

/// Rows of display strings alongside a JSON value carrying full precision.
#[derive(Debug, Clone)]
pub struct Rendered {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub json: serde_json::Value,
    /// Printed verbatim for `md` and `csv` when set (single-value answers).
    pub plain: Option<String>,
    /// Pre-rendered markdown and CSV, used instead of `header`/`rows` when set.
    pub prebuilt: Option<(String, String)>,
}

impl Rendered {
    pub fn table(header: &[&str], rows: Vec<Vec<String>>, json: serde_json::Value) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows,
            json,
            plain: None,
            prebuilt: None,
        }
    }

    pub fn plain(text: String, json: serde_json::Value) -> Self {
        Self {
            header: Vec::new(),
            rows: Vec::new(),
            json,
            plain: Some(text),
            prebuilt: None,
        }
    }

    pub fn prebuilt(md: String, csv: String, json: serde_json::Value) -> Self {
        Self {
            header: Vec::new(),
            rows: Vec::new(),
            json,
            plain: None,
            prebuilt: Some((md, csv)),
        }
    }

    pub fn render(&self, format: OutputFormat) -> String {
        if format == OutputFormat::Json {
            let mut s = serde_json::to_string_pretty(&self.json).expect("JSON values serialize");
            s.push('\n');
            return s;
        }
        if let Some(p) = &self.plain {
            return format!("{p}\n");
        }
        if let Some((md, csv)) = &self.prebuilt {
            return if format == OutputFormat::Md {
                md.clone()
            } else {
                csv.clone()
            };
        }
        match format {
            OutputFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.header).expect("in-memory write");
                for r in &self.rows {
                    w.write_record(r).expect("in-memory write");
                }
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
            }
            _ => {
                let mut s = format!(
                    "| {} |\n|{}\n",
                    self.header.join(" | "),
                    "---|".repeat(self.header.len())
                );
                for r in &self.rows {
                    s.push_str(&format!("| {} |\n", r.join(" | ")));
                }
                s
            }
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write through a temporary file in the target directory, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| e.error)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Digest256 {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Default)]
pub struct RunRecorder {
    pub inputs: Vec<Digest256>,
    pub outputs: Vec<Digest256>,
}

impl RunRecorder {
    pub fn input(&mut self, name: impl Into<String>, bytes: &[u8]) {
        self.inputs.push(Digest256 {
            path: name.into(),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.input(path.display().to_string(), &bytes);
        Ok(bytes)
    }

    pub fn write_output(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes)?;
        self.outputs.push(Digest256 {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        });
        log::info!("wrote {}", path.display());
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub subcommand: &'static str,
    pub parameters: serde_json::Value,
    pub input_digests: Vec<Digest256>,
    pub output_paths: Vec<Digest256>,
    pub stdout_sha256: Option<String>,
    pub exit_status: i32,
    pub wall_clock_seconds: f64,
}
