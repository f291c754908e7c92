//! CSV helpers: every table starts with a `# schema: <name>/<version>` line.

use std::io::Write;

use crate::error::Result;

/// Writes the schema comment and returns a CSV writer positioned for the header row.
pub fn csv_writer<W: Write>(mut out: W, schema: &str) -> Result<csv::Writer<W>> {
    writeln!(out, "# schema: {schema}")?;
    Ok(csv::Writer::from_writer(out))
}

/// CSV reader that skips the schema comment.
pub fn csv_reader<R: std::io::Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input)
}

/// Formats a float so that identical bits always print identically.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}
