//! Dataset files.
//!
//! CSV layout: optional leading `timestamp` column (ISO-8601), then one column
//! per channel with the header naming channels. An empty cell is a missing
//! observation. A JSON manifest groups CSV files that share channel roles and
//! frequency.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat};
use serde::{Deserialize, Serialize};

use super::{FrequencyTag, TimeSeries};
use crate::error::{Error, Result};

pub const TIMESTAMP_COLUMN: &str = "timestamp";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Csv,
    Manifest,
}

impl DatasetFormat {
    /// `.json` means manifest; anything else is read as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => DatasetFormat::Manifest,
            _ => DatasetFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub channels: Vec<String>,
    pub target_channel: usize,
    #[serde(default)]
    pub known_future: Vec<usize>,
    #[serde(default)]
    pub frequency: Option<FrequencyTag>,
    pub files: Vec<String>,
}

pub fn read_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<TimeSeries>> {
    match format {
        DatasetFormat::Csv => Ok(vec![read_csv(path)?]),
        DatasetFormat::Manifest => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let manifest: Manifest = serde_json::from_str(&text)?;
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            manifest
                .files
                .iter()
                .map(|file| {
                    let series = read_csv(&dir.join(file))?;
                    if series.names() != manifest.channels.as_slice() {
                        return Err(Error::InvalidSeries(format!(
                            "{file}: channels {:?} do not match manifest {:?}",
                            series.names(),
                            manifest.channels
                        )));
                    }
                    series
                        .with_frequency(manifest.frequency)
                        .with_target(manifest.target_channel)?
                        .with_known_future(manifest.known_future.iter().copied())
                })
                .collect()
        }
    }
}

/// Writes `series`. In manifest format the CSV files are placed next to the
/// manifest as `<stem>_<i>.csv`; all series must share channel names and roles.
pub fn write_dataset(series: &[TimeSeries], path: &Path, format: DatasetFormat) -> Result<()> {
    match format {
        DatasetFormat::Csv => match series {
            [one] => write_csv(one, path),
            _ => Err(Error::InvalidArgument(format!(
                "CSV format holds exactly one series, got {}",
                series.len()
            ))),
        },
        DatasetFormat::Manifest => {
            let first = series
                .first()
                .ok_or_else(|| Error::InvalidArgument("no series to write".into()))?;
            for s in series {
                if s.names() != first.names()
                    || s.target_channel() != first.target_channel()
                    || s.known_future() != first.known_future()
                    || s.frequency() != first.frequency()
                {
                    return Err(Error::InvalidArgument(
                        "series in one manifest must share channels, roles and frequency".into(),
                    ));
                }
            }
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
            let mut files = Vec::with_capacity(series.len());
            for (i, s) in series.iter().enumerate() {
                let name = format!("{stem}_{i}.csv");
                write_csv(s, &dir.join(&name))?;
                files.push(name);
            }
            let manifest = Manifest {
                channels: first.names().to_vec(),
                target_channel: first.target_channel(),
                known_future: first.known_future().iter().copied().collect(),
                frequency: first.frequency(),
                files,
            };
            let text = serde_json::to_string_pretty(&manifest)?;
            fs::write(path, text).map_err(|e| Error::io(path, e))
        }
    }
}

pub fn read_csv(path: &Path) -> Result<TimeSeries> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(file)
}

pub fn read_csv_from<R: std::io::Read>(reader: R) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let has_ts = headers.first().is_some_and(|h| h == TIMESTAMP_COLUMN);
    let names: Vec<String> = headers[usize::from(has_ts)..].to_vec();
    if names.is_empty() {
        return Err(Error::InvalidSeries("no channel columns".into()));
    }
    let mut values = vec![Vec::new(); names.len()];
    let mut mask = vec![Vec::new(); names.len()];
    let mut stamps = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::RaggedRow { row, expected: headers.len(), found: record.len() });
        }
        let mut cells = record.iter();
        if has_ts {
            let cell = cells.next().unwrap_or_default().trim();
            stamps.push(parse_timestamp(cell).ok_or_else(|| Error::BadTimestamp {
                row,
                value: cell.to_string(),
            })?);
        }
        for (c, cell) in cells.enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                values[c].push(f64::NAN);
                mask[c].push(false);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                    row,
                    column: names[c].clone(),
                    value: cell.to_string(),
                })?;
                values[c].push(v);
                mask[c].push(true);
            }
        }
    }
    if values[0].is_empty() {
        return Err(Error::EmptySeries);
    }
    if has_ts {
        if let Some(row) = stamps.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::DuplicateTimestamp { row: row + 1 });
        }
    }
    TimeSeries::with_mask(values, mask)?
        .with_names(names)?
        .with_time_index(has_ts.then_some(stamps))
}

pub fn write_csv(series: &TimeSeries, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(series, file)
}

pub fn write_csv_to<W: std::io::Write>(series: &TimeSeries, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let ts = series.time_index();
    let mut header: Vec<&str> = Vec::new();
    if ts.is_some() {
        header.push(TIMESTAMP_COLUMN);
    }
    header.extend(series.names().iter().map(String::as_str));
    wtr.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for t in 0..series.len() {
        record.clear();
        if let Some(ts) = ts {
            record.push(format_timestamp(ts[t]));
        }
        for c in 0..series.n_channels() {
            if series.channel_mask(c)[t] {
                record.push(format!("{}", series.channel(c)[t]));
            } else {
                record.push(String::new());
            }
        }
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io(PathBuf::from("<csv>"), e))?;
    Ok(())
}

pub fn format_timestamp(secs: i64) -> String {
    DateTime::from_timestamp(secs, 0)
        .map(|d| d.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| secs.to_string())
}

pub fn parse_timestamp(cell: &str) -> Option<i64> {
    if let Ok(d) = DateTime::parse_from_rfc3339(cell) {
        return Some(d.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(d) = NaiveDateTime::parse_from_str(cell, fmt) {
            return Some(d.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(cell, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|d| d.and_utc().timestamp())
}
