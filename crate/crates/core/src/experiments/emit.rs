use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::runner::ResultRow;
use crate::error::{Error, Result};
use crate::state::DensityMatrix;

/// Output encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format {other:?}"))),
        }
    }
}

/// CSV column order.
pub const HEADER: [&str; 24] = [
    "experiment",
    "probe",
    "n",
    "kappa",
    "p",
    "p_double_prime",
    "x",
    "x_prime",
    "q_value",
    "alpha_star",
    "delta",
    "eta",
    "mi",
    "ln",
    "mi_per_photon",
    "ln_per_photon",
    "entanglement",
    "n_s",
    "p_star",
    "truncation_n",
    "m_trunc",
    "trace_deficit",
    "status",
    "wall_time",
];

/// Twelve significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.11e}")
}

fn float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

fn int<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn record(r: &ResultRow) -> [String; 24] {
    [
        r.experiment.clone(),
        r.probe.clone(),
        int(r.n),
        float(r.kappa),
        float(r.p),
        float(r.p_double_prime),
        float(r.x),
        float(r.x_prime),
        float(r.q_value),
        float(r.alpha_star),
        float(r.delta),
        float(r.eta),
        float(r.mi),
        float(r.ln),
        float(r.mi_per_photon),
        float(r.ln_per_photon),
        float(r.entanglement),
        float(r.n_s),
        float(r.p_star),
        int(r.truncation_n),
        int(r.m_trunc),
        float(r.trace_deficit),
        r.status.clone(),
        float(r.wall_time),
    ]
}

fn round12(v: Option<f64>) -> Option<f64> {
    v.map(|v| format_float(v).parse().unwrap_or(v))
}

/// Row with every float rounded to the printed precision.
fn rounded(r: &ResultRow) -> ResultRow {
    ResultRow {
        kappa: round12(r.kappa),
        p: round12(r.p),
        p_double_prime: round12(r.p_double_prime),
        x: round12(r.x),
        x_prime: round12(r.x_prime),
        q_value: round12(r.q_value),
        alpha_star: round12(r.alpha_star),
        delta: round12(r.delta),
        eta: round12(r.eta),
        mi: round12(r.mi),
        ln: round12(r.ln),
        mi_per_photon: round12(r.mi_per_photon),
        ln_per_photon: round12(r.ln_per_photon),
        entanglement: round12(r.entanglement),
        n_s: round12(r.n_s),
        p_star: round12(r.p_star),
        trace_deficit: round12(r.trace_deficit),
        wall_time: round12(r.wall_time),
        ..r.clone()
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    }
}

/// Serializes rows to a string in `format`.
pub fn render(rows: &[ResultRow], format: Format) -> Result<String> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            w.write_record(HEADER).map_err(csv_error)?;
            for r in rows {
                w.write_record(record(r)).map_err(csv_error)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io {
                path: "<csv>".into(),
                message: e.to_string(),
            })?;
            String::from_utf8(bytes).map_err(|e| Error::Io {
                path: "<csv>".into(),
                message: e.to_string(),
            })
        }
        Format::Json => {
            let rows: Vec<ResultRow> = rows.iter().map(rounded).collect();
            let mut s = serde_json::to_string_pretty(&rows).map_err(|e| Error::Io {
                path: "<json>".into(),
                message: e.to_string(),
            })?;
            s.push('\n');
            Ok(s)
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes rows to `path`, creating parent directories as needed.
pub fn emit(rows: &[ResultRow], format: Format, path: &Path) -> Result<()> {
    let text = render(rows, format)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Nonzero entries of a density matrix as `row,col,value` lines.
pub fn write_triplets(path: &Path, rho: &DensityMatrix<f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut w = BufWriter::new(file);
    let dims: Vec<String> = rho.dims.iter().map(|d| d.to_string()).collect();
    writeln!(w, "# dims {}", dims.join("x")).map_err(|e| io_error(path, e))?;
    writeln!(w, "row,col,value").map_err(|e| io_error(path, e))?;
    for (r, c, v) in rho.triplets() {
        writeln!(w, "{r},{c},{}", format_float(v)).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}
