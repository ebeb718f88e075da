//! Tiny CSV helpers. The formats in this crate are plain numeric tables
//! with fixed headers, written with the shortest round-trip float
//! representation so emitted files are byte-stable and parse back to the
//! exact same values.

use crate::error::{Error, Result};

pub(crate) fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("expected a number, got {field:?}"),
    })
}

pub(crate) fn parse_usize(field: &str, line: usize) -> Result<usize> {
    field.trim().parse::<usize>().map_err(|_| Error::Parse {
        line,
        message: format!("expected an integer, got {field:?}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, f64::MIN_POSITIVE, -1234.5678e-9] {
            assert_eq!(parse_f64(&format!("{v}"), 1).unwrap(), v);
        }
    }

    #[test]
    fn bad_field_reports_line() {
        match parse_f64("abc", 7) {
            Err(Error::Parse { line: 7, .. }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }
}
