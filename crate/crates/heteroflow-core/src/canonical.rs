//! Canonical JSON encoding for golden files and byte-level reproducibility.
//!
//! Objects are written with sorted keys (the default `serde_json` map is a
//! `BTreeMap`), no insignificant whitespace, and every float rendered with 17
//! significant digits, which round-trips `f64` exactly. Two runs that produce
//! equal values therefore produce identical bytes.

use serde::Serialize;
use serde_json::Value;
use std::io::{self, Write};

struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        // 1 leading digit + 16 fractional digits = 17 significant digits
        write!(writer, "{value:.16e}")
    }
}

/// Serialize any value to canonical JSON bytes.
pub fn to_canonical_json<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    // Route through Value so struct-field order collapses to sorted map keys.
    let value: Value = serde_json::to_value(value)?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigitFormatter);
    value.serialize(&mut ser)?;
    Ok(out)
}

/// Canonical JSON as a string.
pub fn to_canonical_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let bytes = to_canonical_json(value)?;
    Ok(String::from_utf8(bytes).expect("serde_json emits UTF-8"))
}

/// Write one canonical JSON value per line.
pub fn write_jsonl<W: Write, T: Serialize>(mut w: W, items: &[T]) -> io::Result<()> {
    for item in items {
        let line = to_canonical_json(item).map_err(io::Error::other)?;
        w.write_all(&line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
