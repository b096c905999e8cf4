//! CSV helpers shared by every file format in the crate.
//!
//! Numbers are written with 17 significant digits in scientific notation,
//! which round-trips every finite `f64` exactly.

use crate::error::{Error, Result};

/// Formats a float with 17 significant digits; infinities as `inf` / `-inf`.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Formats an optional float; `None` becomes an empty field.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

pub fn parse_f64(field: &str) -> Result<f64> {
    let t = field.trim();
    match t {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "nan" => Ok(f64::NAN),
        _ => t.parse::<f64>().map_err(|_| Error::Parse(format!("not a number: `{t}`"))),
    }
}

/// A parsed CSV table: comment lines (without the leading `#`), header, rows.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    /// Parses text whose first non-comment line is a header.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = Table::default();
        let mut have_header = false;
        for line in text.lines() {
            if let Some(c) = line.strip_prefix('#') {
                table.comments.push(c.to_string());
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if have_header {
                table.rows.push(fields);
            } else {
                table.header = fields;
                have_header = true;
            }
        }
        Ok(table)
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::Schema(name.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn infinities_use_short_names() {
        assert_eq!(fmt17(f64::INFINITY), "inf");
        assert_eq!(fmt17(f64::NEG_INFINITY), "-inf");
        assert_eq!(parse_f64("-inf").unwrap(), f64::NEG_INFINITY);
    }

    proptest! {
        #[test]
        fn seventeen_digits_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let s = fmt17(x);
            prop_assert_eq!(parse_f64(&s).unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn table_skips_comments() {
        let t = Table::parse("# hello\na,b\n1,2\n# mid\n3,4\n").unwrap();
        assert_eq!(t.comments, vec![" hello".to_string(), " mid".to_string()]);
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.column("b").unwrap(), 1);
        assert!(matches!(t.column("c"), Err(Error::Schema(_))));
    }
}
