//! JSON and CSV number formatting with deterministic, lossless floats.
//!
//! Every `f64` that lands in an artifact is printed as `{:.16e}` — seventeen
//! significant digits in scientific notation — which round-trips any finite
//! double exactly and keeps artifacts byte-stable across runs.

use serde::Serialize;
use serde_json::ser::Formatter;
use std::io;

/// Formats a float with 17 significant digits (lossless for `f64`).
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

struct SciNotationFormatter;

impl Formatter for SciNotationFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{:.16e}", f64::from(value))
    }
}

/// Serializes a value to JSON with every float in 17-significant-digit
/// scientific notation. Non-finite floats become `null`, as in stock
/// `serde_json`.
pub fn to_json_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::with_capacity(256);
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciNotationFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json output is valid UTF-8"))
}
