use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use indet_core::continuous::DensitySpec;
use indet_core::{JointDistribution, Margin, Matrix};
use serde::de::DeserializeOwned;
use sha2::{Digest, Sha256};

use crate::CliError;

/// A file read by a command, with its digest for the report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct InputFile {
    pub name: String,
    pub path: PathBuf,
    pub sha256: String,
}

pub struct Loader {
    pub header: bool,
    pub inputs: Vec<InputFile>,
}

impl Loader {
    pub fn new(header: bool) -> Self {
        Self {
            header,
            inputs: Vec::new(),
        }
    }

    fn read(&mut self, name: &str, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        self.inputs.push(InputFile {
            name: name.to_string(),
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(bytes)
    }

    /// Non-empty records of a headerless (unless `--header`) CSV file, trimmed.
    pub fn records(&mut self, name: &str, path: &Path) -> Result<Vec<Vec<String>>, CliError> {
        let bytes = self.read(name, path)?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(self.header)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(bytes.as_slice());
        let mut out = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let fields: Vec<String> = record.iter().map(str::to_string).collect();
            if fields.iter().any(|f| !f.is_empty()) {
                out.push(fields);
            }
        }
        Ok(out)
    }

    pub fn numbers(&mut self, name: &str, path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
        self.records(name, path)?
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .map(|f| {
                        f.parse::<f64>().map_err(|_| {
                            CliError::Input(format!("{}: line {}: '{f}' is not a number", path.display(), i + 1))
                        })
                    })
                    .collect()
            })
            .collect()
    }

    /// A margin written as one row or one column.
    pub fn margin(&mut self, name: &str, path: &Path) -> Result<Margin, CliError> {
        let values: Vec<f64> = self.numbers(name, path)?.into_iter().flatten().collect();
        Ok(Margin::new(values)?)
    }

    pub fn matrix(&mut self, name: &str, path: &Path) -> Result<Matrix, CliError> {
        Ok(Matrix::from_rows(self.numbers(name, path)?)?)
    }

    /// Positive integers, one per record or comma separated.
    pub fn indices(&mut self, name: &str, path: &Path) -> Result<Vec<usize>, CliError> {
        let values: Vec<f64> = self.numbers(name, path)?.into_iter().flatten().collect();
        values
            .into_iter()
            .map(|x| {
                if x >= 1.0 && x.fract() == 0.0 {
                    Ok(x as usize - 1)
                } else {
                    Err(CliError::Input(format!("{}: index {x} is not a positive integer", path.display())))
                }
            })
            .collect()
    }

    /// First field of every record, as a label.
    pub fn labels(&mut self, name: &str, path: &Path) -> Result<Vec<String>, CliError> {
        Ok(self.records(name, path)?.into_iter().flatten().collect())
    }

    pub fn json<T: DeserializeOwned>(&mut self, name: &str, path: &Path) -> Result<T, CliError> {
        let bytes = self.read(name, path)?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    /// A joint law from JSON, or from a CSV table of cells.
    pub fn joint(&mut self, name: &str, path: &Path) -> Result<JointDistribution, CliError> {
        if path.extension().is_some_and(|e| e == "json") {
            self.json(name, path)
        } else {
            Ok(JointDistribution::new(self.matrix(name, path)?)?)
        }
    }

    pub fn density(&mut self, name: &str, path: &Path) -> Result<DensitySpec, CliError> {
        self.json(name, path)
    }
}

/// Shortest decimal form that reads back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn matrix_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for u in 0..m.rows() {
        let row: Vec<String> = m.row(u).iter().map(|&x| fmt_f64(x)).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn rows_csv<R: AsRef<[String]>>(header: Option<&str>, rows: &[R]) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        let _ = writeln!(out, "{h}");
    }
    for r in rows {
        let _ = writeln!(out, "{}", r.as_ref().join(","));
    }
    out
}

pub fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(path)
}
