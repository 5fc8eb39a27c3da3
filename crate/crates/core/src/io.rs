//! Shared text formatting and line-oriented parsing helpers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Formats a real with 17 significant digits so that values round-trip exactly.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Creates `path` (and its parent directory) for buffered writing.
pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(BufWriter::new(f))
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes one CSV row of preformatted fields.
pub(crate) fn write_row<W: Write>(out: &mut W, fields: &[String], path: &Path) -> Result<()> {
    writeln!(out, "{}", fields.join(",")).map_err(|e| Error::io(path, e))
}

pub(crate) fn flush<W: Write>(out: &mut W, path: &Path) -> Result<()> {
    out.flush().map_err(|e| Error::io(path, e))
}

/// Splits a data line on commas and whitespace into reals.
/// Returns `None` for blank and `#` comment lines.
pub(crate) fn parse_reals(line: &str) -> Option<std::result::Result<Vec<f64>, String>> {
    let body = line.split('#').next().unwrap_or("").trim();
    if body.is_empty() {
        return None;
    }
    Some(
        body.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| format!("cannot parse `{t}` as a real number"))
                    .and_then(|v| {
                        if v.is_finite() {
                            Ok(v)
                        } else {
                            Err(format!("non-finite value `{t}`"))
                        }
                    })
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0] {
            assert_eq!(real(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn parse_lines() {
        assert!(parse_reals("   # comment").is_none());
        assert_eq!(parse_reals("1, 2 3\t4 # x").unwrap().unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert!(parse_reals("1 two").unwrap().is_err());
        assert!(parse_reals("1 nan").unwrap().is_err());
    }
}
