//! Result tables as CSV or JSON lines.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::CliError;
use crate::run::{ResultRow, ResultTable};
use crate::spec::Format;

/// Significant digits of every emitted float.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Column order of both formats.
pub const COLUMNS: [&str; 13] = [
    "alpha",
    "dsa_success_prob",
    "honest_prefix",
    "attack_start",
    "unit",
    "guarantee",
    "cd_iterations",
    "cd_converged",
    "pgd_min",
    "gap",
    "mc_kld",
    "mc_std_error",
    "wall_time_s",
];

pub fn emit_results<W: Write>(table: &ResultTable, format: Format, out: W) -> Result<(), CliError> {
    let table = table.rounded(SIGNIFICANT_DIGITS);
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(COLUMNS)?;
            for row in &table.rows {
                w.serialize(row)?;
            }
            w.flush().map_err(csv::Error::from)?;
        }
        Format::JsonLines => {
            let mut out = out;
            for row in &table.rows {
                serde_json::to_writer(&mut out, row)?;
                out.write_all(b"\n").map_err(serde_json::Error::io)?;
            }
            out.flush().map_err(serde_json::Error::io)?;
        }
    }
    Ok(())
}

/// Writes to `path`, or to standard output when `path` is `None`.
pub fn write_results(table: &ResultTable, format: Format, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(path) => {
            let file = File::create(path).map_err(|source| CliError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            emit_results(table, format, BufWriter::new(file))
        }
        None => emit_results(table, format, std::io::stdout().lock()),
    }
}

pub fn read_results<R: Read>(input: R, format: Format) -> Result<ResultTable, CliError> {
    let mut rows = Vec::new();
    match format {
        Format::Csv => {
            let mut r = csv::Reader::from_reader(input);
            for row in r.deserialize::<ResultRow>() {
                rows.push(row?);
            }
        }
        Format::JsonLines => {
            for line in BufReader::new(input).lines() {
                let line = line.map_err(serde_json::Error::io)?;
                if !line.trim().is_empty() {
                    rows.push(serde_json::from_str(&line)?);
                }
            }
        }
    }
    Ok(ResultTable { rows })
}
