//! Output artifacts: JSON with fixed 17-significant-digit floats and CSV
//! tables, both deterministic for a given input.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;

use crate::config::{RunConfig, ToleranceProfile, Tolerances};
use crate::error::Result;

pub const UNITS: &str = "hbar = m = 1; E = k^2/2; lengths in barrier units, times in hbar/energy";

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

struct FixedFloats;

impl Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes `value` to a JSON string with fixed float formatting.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats);
    value
        .serialize(&mut ser)
        .map_err(|e| crate::Error::Io(e.to_string()))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

/// Writes a CSV table; float cells use [`fmt_f64`].
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let io_err = |e: csv::Error| crate::Error::Io(e.to_string());
    w.write_record(header).map_err(io_err)?;
    for r in rows {
        w.write_record(r).map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Run metadata embedded in every JSON artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub tolerance_profile: ToleranceProfile,
    pub tolerances: Tolerances,
    pub units: &'static str,
    /// Set when the barrier has negative heights, which are outside the
    /// tested range.
    pub untested_wells: bool,
}

impl Metadata {
    pub fn new(command: &str, config: &RunConfig, profile: ToleranceProfile) -> Result<Self> {
        Ok(Self {
            tool: "qscatter",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_hash: config.hash(),
            config: config.clone(),
            tolerance_profile: profile,
            tolerances: config.tolerances(profile),
            units: UNITS,
            untested_wells: config.barrier()?.has_wells(),
        })
    }
}
