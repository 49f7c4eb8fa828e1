//! Artifact writers. Every float goes through [`fmt_f64`].

use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        serde_json::to_string(&v).expect("finite floats serialize")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn samples_csv(points: ArrayView2<'_, f64>) -> String {
    let header: Vec<String> = (0..points.ncols()).map(|j| format!("x{j}")).collect();
    let mut out = header.join(",");
    out.push('\n');
    for row in points.rows() {
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Reads a samples file written by [`samples_csv`] (or any all-numeric CSV).
pub fn read_samples_csv(path: &Path) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| CliError::ConfigParse {
        path: path.to_path_buf(),
        message: "empty file".into(),
    })?;
    let cols = header.split(',').count();
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != cols {
            return Err(dftns::Error::Parse {
                path: path.to_path_buf(),
                row: i + 1,
                column: String::new(),
                message: format!("{} cells, header has {cols}", cells.len()),
            }
            .into());
        }
        for (j, cell) in cells.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| dftns::Error::Parse {
                path: path.to_path_buf(),
                row: i + 1,
                column: format!("x{j}"),
                message: format!("not a number: {cell:?}"),
            })?;
            values.push(v);
        }
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, cols), values).expect("rows * cols values"))
}

pub fn json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(dftns::Error::from)?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// An output directory that remembers what was written into it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `name` (a plain file name) inside the directory.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        assert!(!name.contains('/') && !name.contains(".."), "output names are plain file names");
        let path = self.root.join(name);
        let mut file = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        file.write_all(contents).map_err(|e| CliError::io(&path, e))?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    /// Digests of everything written so far, re-read from disk.
    pub fn records(&self) -> Result<Vec<FileRecord>> {
        let mut names = self.written.clone();
        names.sort();
        names
            .into_iter()
            .map(|name| {
                let path = self.root.join(&name);
                let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
                Ok(FileRecord {
                    path: name,
                    bytes: bytes.len() as u64,
                    sha256: sha256_hex(&bytes),
                })
            })
            .collect()
    }
}
