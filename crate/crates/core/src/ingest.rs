//! CSV panel ingestion.
//!
//! Expected layout: header `date,<category>,...` with unique category names,
//! one row per consecutive calendar day (ISO-8601 dates, no gaps), numeric
//! cells. LF and CRLF both parse. Errors name the offending file row
//! (1-based, header = row 1) and column.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::series::{EpidemicPanel, TimeSeries};

/// Reads an epidemic panel from a CSV file.
pub fn ingest_csv(path: &Path) -> Result<EpidemicPanel> {
    let file = std::fs::File::open(path)?;
    ingest_csv_reader(file)
}

/// Reads an epidemic panel from any CSV byte stream.
pub fn ingest_csv_reader<R: Read>(reader: R) -> Result<EpidemicPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| Error::Format {
            row: 1,
            column: "header".into(),
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() || headers.get(0) != Some("date") {
        return Err(Error::Format {
            row: 1,
            column: "header".into(),
            message: "first column must be `date`".into(),
        });
    }
    let categories: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if categories.is_empty() {
        return Err(Error::Format {
            row: 1,
            column: "header".into(),
            message: "at least one category column is required".into(),
        });
    }
    for (i, c) in categories.iter().enumerate() {
        if c.is_empty() {
            return Err(Error::Format {
                row: 1,
                column: format!("column {}", i + 2),
                message: "empty category name".into(),
            });
        }
        if categories[..i].contains(c) {
            return Err(Error::Format {
                row: 1,
                column: c.clone(),
                message: "duplicate category name".into(),
            });
        }
    }

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); categories.len()];
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2; // 1-based file row, header is row 1
        let record = record.map_err(|e| Error::Format {
            row,
            column: "row".into(),
            message: e.to_string(),
        })?;
        if record.len() != categories.len() + 1 {
            return Err(Error::Format {
                row,
                column: "row".into(),
                message: format!(
                    "expected {} cells, found {}",
                    categories.len() + 1,
                    record.len()
                ),
            });
        }
        let date_cell = record.get(0).expect("length checked");
        let date = NaiveDate::parse_from_str(date_cell, "%Y-%m-%d").map_err(|_| Error::Format {
            row,
            column: "date".into(),
            message: format!("`{date_cell}` is not an ISO-8601 date"),
        })?;
        if let Some(prev) = dates.last() {
            let expected = prev.succ_opt().expect("date overflow");
            if date != expected {
                return Err(Error::DateGap {
                    row,
                    expected,
                    found: date,
                });
            }
        }
        dates.push(date);
        for (j, category) in categories.iter().enumerate() {
            let cell = record.get(j + 1).expect("length checked");
            let value: f64 = cell.parse().map_err(|_| Error::Format {
                row,
                column: category.clone(),
                message: format!("`{cell}` is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Format {
                    row,
                    column: category.clone(),
                    message: format!("`{cell}` is not finite"),
                });
            }
            columns[j].push(value);
        }
    }
    if dates.is_empty() {
        return Err(Error::EmptyInput);
    }

    let series = categories
        .into_iter()
        .zip(columns)
        .map(|(name, values)| TimeSeries::new(name, dates.clone(), values))
        .collect::<Result<Vec<_>>>()?;
    EpidemicPanel::new(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<EpidemicPanel> {
        ingest_csv_reader(s.as_bytes())
    }

    #[test]
    fn well_formed_panel() {
        let p = parse(
            "date,confirmed,suspected\n\
             2020-01-21,77,277\n\
             2020-01-22,131,257\n",
        )
        .unwrap();
        assert_eq!(p.categories(), vec!["confirmed", "suspected"]);
        assert_eq!(p.len(), 2);
        assert_eq!(p.get("suspected").unwrap().values(), &[277.0, 257.0]);
    }

    #[test]
    fn crlf_accepted() {
        let p = parse("date,x\r\n2020-01-21,1\r\n2020-01-22,2\r\n").unwrap();
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn date_gap_names_row() {
        let err = parse(
            "date,x\n\
             2020-01-21,1\n\
             2020-01-23,2\n",
        )
        .unwrap_err();
        match err {
            Error::DateGap { row, .. } => assert_eq!(row, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let err = parse(
            "date,x,y\n\
             2020-01-21,1,2\n\
             2020-01-22,abc,3\n",
        )
        .unwrap_err();
        match err {
            Error::Format { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "x");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn duplicate_header_rejected() {
        let err = parse("date,x,x\n2020-01-21,1,2\n").unwrap_err();
        assert!(matches!(err, Error::Format { row: 1, .. }));
    }

    #[test]
    fn missing_date_header_rejected() {
        let err = parse("day,x\n2020-01-21,1\n").unwrap_err();
        assert!(matches!(err, Error::Format { row: 1, .. }));
    }

    #[test]
    fn round_trips_numeric_content() {
        let text = "date,confirmed,suspected\n\
                    2020-01-21,77,277.5\n\
                    2020-01-22,131,257\n";
        let p = parse(text).unwrap();
        let back = p.to_csv_string();
        let p2 = parse(&back).unwrap();
        assert_eq!(p, p2);
    }
}
