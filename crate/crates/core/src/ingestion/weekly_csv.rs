use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use ndarray::Array2;

use crate::error::{Result, VarxError};
use crate::timeseries::{MultivariateSeries, TimeIndex};

/// Column names of a long-format weekly CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub week: String,
    pub series: String,
    pub value: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            week: "week".into(),
            series: "series".into(),
            value: "value".into(),
        }
    }
}

/// Parse a week as either `yyyy-Www` (mapped to the Saturday ending that ISO
/// week) or the `yyyy-mm-dd` week-ending Saturday itself.
pub fn parse_week(field: &str) -> std::result::Result<NaiveDate, String> {
    let field = field.trim();
    if let Some((year, week)) = field.split_once("-W") {
        let year: i32 = year.parse().map_err(|_| format!("bad ISO year in `{field}`"))?;
        let week: u32 = week.parse().map_err(|_| format!("bad ISO week in `{field}`"))?;
        return NaiveDate::from_isoywd_opt(year, week, Weekday::Sat)
            .ok_or_else(|| format!("no such ISO week `{field}`"));
    }
    let date = NaiveDate::parse_from_str(field, "%Y-%m-%d")
        .map_err(|e| format!("bad week `{field}`: {e}"))?;
    if date.weekday() != Weekday::Sat {
        return Err(format!("week-ending date {date} is not a Saturday"));
    }
    Ok(date)
}

pub fn format_week(date: NaiveDate) -> String {
    date.format("%Y-%m-%d").to_string()
}

/// Parse a long-format CSV (`week,series,value`) into a labeled weekly series.
///
/// Series appear in order of first occurrence. Every series must cover every
/// week between the earliest and latest week in the file.
pub fn parse_weekly_csv<R: Read>(source: R, schema: &CsvSchema) -> Result<MultivariateSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source);
    let headers = reader.headers().map_err(|e| VarxError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| VarxError::Parse {
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let (week_col, series_col, value_col) =
        (column(&schema.week)?, column(&schema.series)?, column(&schema.value)?);

    let mut order: Vec<String> = Vec::new();
    let mut observations: HashMap<String, BTreeMap<NaiveDate, f64>> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| VarxError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| {
            record.get(i).ok_or_else(|| VarxError::Parse {
                line,
                message: "row has too few fields".into(),
            })
        };
        let week = parse_week(field(week_col)?).map_err(|message| VarxError::Parse { line, message })?;
        let series = field(series_col)?.to_string();
        if series.is_empty() {
            return Err(VarxError::Parse {
                line,
                message: "empty series id".into(),
            });
        }
        let raw = field(value_col)?;
        let value: f64 = raw.parse().map_err(|_| VarxError::Parse {
            line,
            message: format!("bad value `{raw}`"),
        })?;
        if !value.is_finite() {
            return Err(VarxError::Parse {
                line,
                message: format!("non-finite value `{raw}`"),
            });
        }
        let entry = observations.entry(series.clone()).or_insert_with(|| {
            order.push(series.clone());
            BTreeMap::new()
        });
        if entry.insert(week, value).is_some() {
            return Err(VarxError::Duplicate {
                series,
                week: format_week(week),
            });
        }
    }

    let first = observations.values().filter_map(|m| m.keys().next()).min().copied();
    let last = observations.values().filter_map(|m| m.keys().next_back()).max().copied();
    let (Some(first), Some(last)) = (first, last) else {
        return Err(VarxError::Parse {
            line: 1,
            message: "no observations".into(),
        });
    };
    let len = ((last - first).num_days() / 7) as usize + 1;
    let mut values = Array2::zeros((order.len(), len));
    for (row, label) in order.iter().enumerate() {
        let weeks = &observations[label];
        for t in 0..len {
            let week = first + Duration::weeks(t as i64);
            match weeks.get(&week) {
                Some(&v) => values[[row, t]] = v,
                None => {
                    return Err(VarxError::Gap {
                        series: label.clone(),
                        week: format_week(week),
                    })
                }
            }
        }
    }
    MultivariateSeries::new(order, TimeIndex::new(first, len), values)
}

/// Write a series in the long `week,series,value` format, week-major.
pub fn write_weekly_csv<W: Write>(series: &MultivariateSeries, sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    let io = |e: csv::Error| VarxError::Io(e.into());
    writer.write_record(["week", "series", "value"]).map_err(io)?;
    for t in 0..series.len() {
        let week = format_week(series.index().week(t));
        for (label, v) in series.labels().iter().zip(series.column(t)) {
            writer
                .write_record([week.as_str(), label.as_str(), &v.to_string()])
                .map_err(io)?;
        }
    }
    writer.flush()?;
    Ok(())
}
