//! Fixed-precision decimal formatting and CSV emission helpers shared by all
//! output files.

use std::io::Write;

/// Formats a value with exactly six fractional digits.
///
/// Rust's float formatting rounds the exact binary value, breaking exact
/// decimal ties to even. Negative zero is printed as `0.000000`.
pub fn decimal(value: f64) -> String {
    let s = format!("{value:.6}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_owned()
    } else {
        s
    }
}

pub fn optional_decimal(value: Option<f64>) -> String {
    value.map(decimal).unwrap_or_default()
}

pub fn flag(value: bool) -> &'static str {
    if value {
        "true"
    } else {
        "false"
    }
}

/// Comment line prefix carrying the run manifest digest in CSV outputs.
pub const MANIFEST_COMMENT: &str = "# manifest_sha256=";

/// Builds a CSV writer over `out`, first writing the manifest comment line
/// when a digest is given.
pub fn csv_writer<W: Write>(mut out: W, manifest_digest: Option<&str>) -> std::io::Result<csv::Writer<W>> {
    if let Some(digest) = manifest_digest {
        writeln!(out, "{MANIFEST_COMMENT}{digest}")?;
    }
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out))
}

/// Reader that skips `#` comment lines, for reading files written by
/// [`csv_writer`].
pub fn csv_reader<R: std::io::Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input)
}
