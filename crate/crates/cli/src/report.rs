//! CSV emission with a versioned header comment.

use std::io::Write;

use crate::error::CliError;

/// Bumped whenever a column is added, removed or reinterpreted.
pub const SCHEMA_VERSION: u32 = 1;

/// Provenance columns that lead every row.
pub const PROVENANCE: [&str; 4] = ["config_hash", "seed", "resolution", "samples"];

pub struct CsvReport {
    writer: csv::Writer<Vec<u8>>,
}

impl CsvReport {
    pub fn new(experiment: &str, columns: &[&str]) -> Result<Self, CliError> {
        let mut buf = Vec::new();
        writeln!(buf, "# periso {experiment} schema v{SCHEMA_VERSION}")?;
        let mut writer = csv::Writer::from_writer(buf);
        writer.write_record(PROVENANCE.iter().chain(columns))?;
        Ok(Self { writer })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(self) -> Result<String, CliError> {
        let bytes = self
            .writer
            .into_inner()
            .map_err(|e| CliError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// 17 significant digits; NaN renders as an empty field.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.16e}")
    }
}

pub fn flag(b: bool) -> String {
    b.to_string()
}
