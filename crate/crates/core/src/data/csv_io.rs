use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;

use crate::data::series::{step, GapPolicy, RawSeries, Schema, TIMESTAMP_FORMAT};
use crate::error::{Error, Result};

/// Reads and validates a series. Row numbers in errors are 1-based data rows.
pub fn ingest_csv(path: &Path, schema: &Schema) -> Result<RawSeries> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    parse_csv(&text, schema)
}

pub fn parse_csv(text: &str, schema: &Schema) -> Result<RawSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Format { row: 0, message: e.to_string() })?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header != schema.header() {
        return Err(Error::Validation(format!(
            "header {header:?} does not match schema {:?}",
            schema.header()
        )));
    }

    let (m, k) = (schema.main.len(), schema.ancillary.len());
    let mut series = RawSeries {
        schema: schema.clone(),
        timestamps: Vec::new(),
        main: Vec::new(),
        ancillary: Vec::new(),
        target: Vec::new(),
        imputed: Vec::new(),
    };

    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::Format { row, message: e.to_string() })?;
        let ts = NaiveDateTime::parse_from_str(record[0].trim(), TIMESTAMP_FORMAT).map_err(|e| {
            Error::Format {
                row,
                message: format!("bad timestamp `{}`: {e}", &record[0]),
            }
        })?;
        let mut values = Vec::with_capacity(1 + m + k);
        for (col, field) in record.iter().enumerate().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| Error::Format {
                row,
                message: format!("unparseable number `{field}` in column `{}`", header[col]),
            })?;
            if !v.is_finite() {
                return Err(Error::Format {
                    row,
                    message: format!("non-finite value in column `{}`", header[col]),
                });
            }
            values.push(v);
        }

        if let Some(&prev) = series.timestamps.last() {
            let delta = ts - prev;
            if delta != step() {
                let gap = delta > step() && (delta.num_minutes() % step().num_minutes() == 0);
                if gap && schema.gap_policy == GapPolicy::ForwardFill {
                    let mut fill = prev + step();
                    while fill < ts {
                        let last = series.timestamps.len() - 1;
                        series.imputed.push(series.timestamps.len());
                        series.timestamps.push(fill);
                        series.target.push(series.target[last]);
                        series.main.extend_from_within(last * m..(last + 1) * m);
                        series.ancillary.extend_from_within(last * k..(last + 1) * k);
                        fill += step();
                    }
                } else {
                    return Err(Error::Format {
                        row,
                        message: format!(
                            "gap of {} minutes between {prev} and {ts} (expected 15)",
                            delta.num_minutes()
                        ),
                    });
                }
            }
        }
        series.timestamps.push(ts);
        series.target.push(values[0]);
        series.main.extend_from_slice(&values[1..1 + m]);
        series.ancillary.extend_from_slice(&values[1 + m..]);
    }
    series.validate()?;
    Ok(series)
}

/// Writes the series using the shortest round-trip float representation.
pub fn export_csv(series: &RawSeries, path: &Path) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(to_csv_string(series).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn to_csv_string(series: &RawSeries) -> String {
    let mut out = series.schema.header().join(",");
    out.push('\n');
    for i in 0..series.len() {
        out.push_str(&series.timestamps[i].format(TIMESTAMP_FORMAT).to_string());
        out.push(',');
        out.push_str(&series.target[i].to_string());
        for v in series.main_row(i).iter().chain(series.ancillary_row(i)) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(ts: &str, temp: f64, anc: [f64; 3]) -> String {
        let main = vec!["0"; 13].join(",");
        format!("{ts},{temp},{main},{},{},{}\n", anc[0], anc[1], anc[2])
    }

    fn header() -> String {
        Schema::default().header().join(",") + "\n"
    }

    #[test]
    fn three_rows() {
        let text = header()
            + &row("2014-06-09T00:00:00", 70.0, [0., 0., 0.])
            + &row("2014-06-09T00:15:00", 70.5, [0., 0., 0.])
            + &row("2014-06-09T00:30:00", 71.0, [0., 1., 0.]);
        let s = parse_csv(&text, &Schema::default()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.ancillary_row(2), &[0., 1., 0.]);
    }

    #[test]
    fn gap_is_rejected_with_row() {
        let text = header()
            + &row("2014-06-09T00:00:00", 70.0, [0., 0., 0.])
            + &row("2014-06-09T00:30:00", 70.5, [0., 0., 0.]);
        match parse_csv(&text, &Schema::default()) {
            Err(Error::Format { row, message }) => {
                assert_eq!(row, 2);
                assert!(message.contains("gap of 30 minutes"), "{message}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn gap_forward_fill() {
        let schema = Schema {
            gap_policy: GapPolicy::ForwardFill,
            ..Schema::default()
        };
        let text = header()
            + &row("2014-06-09T00:00:00", 70.0, [0., 0., 0.])
            + &row("2014-06-09T00:45:00", 72.0, [0., 0., 0.]);
        let s = parse_csv(&text, &schema).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.imputed, vec![1, 2]);
        assert_eq!(s.target, vec![70.0, 70.0, 70.0, 72.0]);
    }

    #[test]
    fn non_binary_ancillary_is_validation_error() {
        let text = header() + &row("2014-06-09T00:00:00", 70.0, [0.5, 0., 0.]);
        assert!(matches!(
            parse_csv(&text, &Schema::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn unparseable_number_is_format_error() {
        let text = header() + &row("2014-06-09T00:00:00", 70.0, [0., 0., 0.]).replace("70,", "7x,");
        assert!(matches!(
            parse_csv(&text, &Schema::default()),
            Err(Error::Format { row: 1, .. })
        ));
    }

    #[test]
    fn bad_header_is_validation_error() {
        let text = "a,b\n1,2\n";
        assert!(matches!(parse_csv(text, &Schema::default()), Err(Error::Validation(_))));
    }
}
