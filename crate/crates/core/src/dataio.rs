//! CSV ingestion and emission, currency conversion, content digests.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Reads one value column (and optionally an ISO-8601 date column) from a
/// headed, comma-separated UTF-8 file. Rows keep file order; row numbers in
/// errors count the header as row 1.
pub fn ingest_csv(
    path: &Path,
    date_column: Option<&str>,
    value_column: &str,
    require_positive: bool,
) -> Result<TimeSeries> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let err = |row: usize, message: String| Error::Ingest {
        path: path.to_path_buf(),
        row,
        message,
    };
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| err(1, format!("column `{name}` not found in header")))
    };
    let value_idx = find(value_column)?;
    let date_idx = date_column.map(find).transpose()?;

    let mut values = Vec::new();
    let mut dates = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record?;
        let cell = record
            .get(value_idx)
            .ok_or_else(|| err(row, format!("missing `{value_column}` cell")))?;
        let v: f64 = cell.parse().map_err(|_| {
            err(
                row,
                format!("column `{value_column}`: cannot parse `{cell}`"),
            )
        })?;
        if !v.is_finite() {
            return Err(err(
                row,
                format!("column `{value_column}`: non-finite `{cell}`"),
            ));
        }
        if require_positive && v <= 0.0 {
            return Err(err(
                row,
                format!("column `{value_column}`: non-positive price {v}"),
            ));
        }
        if let (Some(idx), Some(name)) = (date_idx, date_column) {
            let cell = record
                .get(idx)
                .ok_or_else(|| err(row, format!("missing `{name}` cell")))?;
            let d: NaiveDate = cell
                .parse()
                .map_err(|_| err(row, format!("column `{name}`: invalid date `{cell}`")))?;
            if let Some(prev) = dates.last() {
                if d <= *prev {
                    return Err(err(
                        row,
                        format!("dates not strictly increasing: {d} follows {prev}"),
                    ));
                }
            }
            dates.push(d);
        }
        values.push(v);
    }
    let label = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let series = if date_idx.is_some() {
        TimeSeries::with_dates(values, dates)?
    } else {
        TimeSeries::new(values)?
    };
    Ok(series.labeled(label))
}

/// Serializes a series as CSV: `date,<value_header>` when dated, otherwise
/// `t,<value_header>` with a 1-based index. Values use the shortest
/// representation that parses back to the same bits.
pub fn series_to_csv(series: &TimeSeries, value_header: &str) -> String {
    let mut out = String::new();
    match series.dates() {
        Some(dates) => {
            out.push_str(&format!("date,{value_header}\n"));
            for (d, v) in dates.iter().zip(series.values()) {
                out.push_str(&format!("{},{v}\n", d.format("%Y-%m-%d")));
            }
        }
        None => {
            out.push_str(&format!("t,{value_header}\n"));
            for (i, v) in series.values().iter().enumerate() {
                out.push_str(&format!("{},{v}\n", i + 1));
            }
        }
    }
    out
}

pub fn write_series_csv(path: &Path, series: &TimeSeries, value_header: &str) -> Result<()> {
    fs::write(path, series_to_csv(series, value_header)).map_err(|e| Error::io(path, e))
}

/// Outcome of the date join performed by [`convert_currency`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinReport {
    pub matched: usize,
    pub unmatched_prices: usize,
    pub unmatched_rates: usize,
}

/// Inner join on dates; each matched day becomes `price * rate`.
pub fn convert_currency(
    prices: &TimeSeries,
    rates: &TimeSeries,
) -> Result<(TimeSeries, JoinReport)> {
    let (Some(pd), Some(rd)) = (prices.dates(), rates.dates()) else {
        return Err(Error::Conversion("both series need dates".into()));
    };
    if let Some((index, &value)) = rates.values().iter().enumerate().find(|(_, &r)| r <= 0.0) {
        return Err(Error::NonPositive { index, value });
    }
    let rate_by_day: HashMap<NaiveDate, f64> = rd
        .iter()
        .copied()
        .zip(rates.values().iter().copied())
        .collect();
    let (dates, values): (Vec<NaiveDate>, Vec<f64>) = pd
        .iter()
        .zip(prices.values())
        .filter_map(|(d, p)| rate_by_day.get(d).map(|r| (*d, p * r)))
        .unzip();
    if dates.is_empty() {
        return Err(Error::Conversion(
            "price and rate dates do not overlap".into(),
        ));
    }
    let report = JoinReport {
        matched: dates.len(),
        unmatched_prices: pd.len() - dates.len(),
        unmatched_rates: rd.len() - dates.len(),
    };
    let label = format!("{} x {}", prices.label(), rates.label());
    Ok((
        TimeSeries::with_dates(values, dates)?.labeled(label),
        report,
    ))
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn ingest_three_rows() {
        let f = file("date,price\n2010-01-04,1100.5\n2010-01-05,1101\n2010-01-06,1099.25\n");
        let ts = ingest_csv(f.path(), Some("date"), "price", true).unwrap();
        assert_eq!(ts.values(), &[1100.5, 1101.0, 1099.25]);
        assert_eq!(ts.dates().unwrap()[2], d("2010-01-06"));
        let ts = ingest_csv(f.path(), None, "price", true).unwrap();
        assert!(ts.dates().is_none());
    }

    #[test]
    fn ingest_rejects_decreasing_dates() {
        let f = file("date,price\n2010-01-05,1\n2010-01-04,2\n");
        match ingest_csv(f.path(), Some("date"), "price", true) {
            Err(Error::Ingest { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
        let f = file("date,price\n2010-01-05,1\n2010-01-05,2\n");
        assert!(matches!(
            ingest_csv(f.path(), Some("date"), "price", true),
            Err(Error::Ingest { row: 3, .. })
        ));
    }

    #[test]
    fn ingest_reports_bad_cells() {
        let f = file("date,price\n2010-01-04,1\n2010-01-05,abc\n");
        match ingest_csv(f.path(), Some("date"), "price", true) {
            Err(Error::Ingest { row, message, .. }) => {
                assert_eq!(row, 3);
                assert!(message.contains("price"));
            }
            other => panic!("{other:?}"),
        }
        let f = file("date,price\n2010-13-04,1\n");
        assert!(matches!(
            ingest_csv(f.path(), Some("date"), "price", true),
            Err(Error::Ingest { row: 2, .. })
        ));
        let f = file("date,price\n2010-01-04,-1\n");
        assert!(ingest_csv(f.path(), Some("date"), "price", true).is_err());
        assert!(ingest_csv(f.path(), Some("date"), "price", false).is_ok());
        let f = file("day,price\n2010-01-04,1\n");
        assert!(matches!(
            ingest_csv(f.path(), Some("date"), "price", true),
            Err(Error::Ingest { row: 1, .. })
        ));
        assert!(matches!(
            ingest_csv(Path::new("/nonexistent/file.csv"), None, "price", true),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn emit_and_reingest() {
        let ts = TimeSeries::with_dates(
            vec![0.1, 1.0 / 3.0, 2e-17, 12345.678901234567],
            vec![
                d("2000-01-03"),
                d("2000-01-04"),
                d("2000-01-05"),
                d("2000-01-07"),
            ],
        )
        .unwrap();
        let text = series_to_csv(&ts, "value");
        let f = file(&text);
        let back = ingest_csv(f.path(), Some("date"), "value", false).unwrap();
        assert_eq!(back.values(), ts.values());
        assert_eq!(back.dates(), ts.dates());
        assert_eq!(series_to_csv(&back, "value"), text);

        let plain = TimeSeries::new(vec![-1.5, 2.0]).unwrap();
        assert_eq!(series_to_csv(&plain, "x"), "t,x\n1,-1.5\n2,2\n");
    }

    fn dated(values: &[f64], days: &[&str]) -> TimeSeries {
        TimeSeries::with_dates(values.to_vec(), days.iter().map(|s| d(s)).collect()).unwrap()
    }

    #[test]
    fn conversion_pointwise_product() {
        let p = dated(
            &[100.0, 200.0, 300.0],
            &["2010-01-04", "2010-01-05", "2010-01-06"],
        );
        let r = dated(&[0.1, 0.2], &["2010-01-04", "2010-01-06"]);
        let (c, report) = convert_currency(&p, &r).unwrap();
        assert_eq!(c.values(), &[100.0 * 0.1, 300.0 * 0.2]);
        assert_eq!(c.dates().unwrap(), &[d("2010-01-04"), d("2010-01-06")]);
        assert_eq!(
            report,
            JoinReport {
                matched: 2,
                unmatched_prices: 1,
                unmatched_rates: 0
            }
        );
    }

    #[test]
    fn conversion_identity_rate() {
        let p = dated(
            &[1.5, 2.5, 3.5],
            &["2010-01-04", "2010-01-05", "2010-01-06"],
        );
        let r = dated(
            &[1.0, 1.0, 1.0],
            &["2010-01-05", "2010-01-06", "2010-01-07"],
        );
        let (c, _) = convert_currency(&p, &r).unwrap();
        assert_eq!(c.values(), &[2.5, 3.5]);
    }

    #[test]
    fn conversion_errors() {
        let p = dated(&[1.0, 2.0], &["2010-01-04", "2010-01-05"]);
        let r = dated(&[1.0, 2.0], &["2011-01-04", "2011-01-05"]);
        assert!(matches!(
            convert_currency(&p, &r),
            Err(Error::Conversion(_))
        ));
        let undated = TimeSeries::new(vec![1.0, 2.0]).unwrap();
        assert!(convert_currency(&p, &undated).is_err());
        let bad = dated(&[1.0, 0.0], &["2010-01-04", "2010-01-05"]);
        assert!(matches!(
            convert_currency(&p, &bad),
            Err(Error::NonPositive { index: 1, .. })
        ));
    }

    #[test]
    fn digest_is_stable() {
        let f = file("abc");
        assert_eq!(
            file_digest(f.path()).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
