//! CSV tables and their metadata sidecar.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::scenario::Table;

/// 17 significant digits, round-trip exact.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_table<W: Write>(table: &Table, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(&table.columns).map_err(io)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|x| format_value(*x))).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Metadata<'a> {
    pub tool_version: &'a str,
    pub library_version: &'a str,
    pub scenario: &'a str,
    pub preset: Option<&'a str>,
    pub seed: u64,
    pub config_sha256: String,
    pub columns: &'a [String],
    pub rows: usize,
}

pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// `<out>.meta.json`
pub fn metadata_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn write_outputs(out: &Path, table: &Table, meta: &Metadata) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", out.display()));
    write_table(table, File::create(out).map_err(io)?)?;
    let json = serde_json::to_string_pretty(meta).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(metadata_path(out), json + "\n").map_err(io)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, 0.0] {
            let s = format_value(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn header_and_rows() {
        let table = Table { columns: vec!["g".into(), "dq".into()], rows: vec![vec![1e-3, 0.5], vec![2e-3, -0.25]] };
        let mut buf = Vec::new();
        write_table(&table, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "g,dq");
        assert_eq!(lines[1], "1.0000000000000000e-3,5.0000000000000000e-1");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn sidecar_path() {
        assert_eq!(metadata_path(Path::new("/tmp/out.csv")), PathBuf::from("/tmp/out.csv.meta.json"));
    }
}
