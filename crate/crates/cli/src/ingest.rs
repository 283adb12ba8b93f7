//! Two-column CSV input: an ISO-8601 date and a decimal value per line,
//! optional header.

use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use stochkit::{Error, TimeSeries};

use crate::CliError;

fn parse_date(s: &str) -> Option<NaiveDateTime> {
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return d.and_hms_opt(0, 0, 0);
    }
    if let Ok(t) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f") {
        return Some(t);
    }
    if let Ok(t) = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f") {
        return Some(t);
    }
    DateTime::parse_from_rfc3339(s).ok().map(|t| t.naive_utc())
}

/// Parses CSV text into a regular series with step `dt`. Dates are checked
/// for strict increase and kept as labels; they never set the spacing.
pub fn parse_csv(text: &str, dt: f64) -> stochkit::Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut last: Option<NaiveDateTime> = None;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::ParseError {
            line: e.position().map_or(i + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::ParseError {
                line,
                message: format!("expected 2 columns (date, value), found {}", rec.len()),
            });
        }
        let date = parse_date(&rec[0]);
        let value = rec[1].parse::<f64>().ok().filter(|v| v.is_finite());
        let (date, value) = match (date, value) {
            (Some(d), Some(v)) => (d, v),
            (None, None) if i == 0 => continue,
            (None, _) => {
                return Err(Error::ParseError {
                    line,
                    message: format!("'{}' is not an ISO-8601 date", &rec[0]),
                })
            }
            (_, None) => {
                return Err(Error::ParseError {
                    line,
                    message: format!("'{}' is not a finite decimal number", &rec[1]),
                })
            }
        };
        if last.is_some_and(|prev| date <= prev) {
            return Err(Error::NonMonotoneDates { line });
        }
        last = Some(date);
        labels.push(rec[0].to_string());
        values.push(value);
    }
    if values.is_empty() {
        return Err(Error::ParseError {
            line: 1,
            message: "no data rows".into(),
        });
    }
    if values.len() < 2 {
        return Err(Error::InvalidSeries("need at least two observations".into()));
    }
    TimeSeries::regular(values, dt)?.with_labels(labels)
}

pub fn ingest_csv(path: &Path, dt: f64) -> Result<TimeSeries, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|e| {
        CliError::lib(
            "cli",
            Error::ParseError {
                line: 1 + e.as_bytes()[..e.utf8_error().valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
                message: "input is not valid UTF-8".into(),
            },
        )
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    parse_csv(text, dt).map_err(|e| CliError::lib("cli", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_optional() {
        let a = parse_csv("date,close\n2020-01-01,100\n2020-01-02,101\n", 1.0 / 252.0).unwrap();
        let b = parse_csv("2020-01-01,100\n2020-01-02,101", 1.0 / 252.0).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.labels().unwrap()[1], "2020-01-02");
    }

    #[test]
    fn bad_value_reports_line() {
        let e = parse_csv("2020-01-01,100\n2020-01-02,abc\n", 1.0).unwrap_err();
        assert_eq!(e, Error::ParseError { line: 2, message: "'abc' is not a finite decimal number".into() });
    }

    #[test]
    fn repeated_date_is_not_monotone() {
        let e = parse_csv("2020-01-01,1\n2020-01-02,2\n2020-01-02,3\n", 1.0).unwrap_err();
        assert_eq!(e, Error::NonMonotoneDates { line: 3 });
    }
}
