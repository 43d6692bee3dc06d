use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use super::{SensorRecord, Trace};
use crate::attack::LabelSeries;
use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::io::write_atomic;

pub const TRACE_HEADER: [&str; 6] = [
    "timestamp",
    "lat",
    "lon",
    "speed_fps",
    "steer_deg",
    "pedal_pct",
];
const LABEL_COLUMN: &str = "label";

/// Reads a trace CSV, ignoring a `label` column if one is present.
pub fn load_trace(path: &Path) -> Result<Trace> {
    load_labeled_trace(path).map(|(trace, _)| trace)
}

/// Reads a trace CSV and, when the file carries a `label` column, the
/// per-step ground truth. The label on data row `r` (1-based) marks the step
/// that ends at that record; the first row's label must be 0.
pub fn load_labeled_trace(path: &Path) -> Result<(Trace, Option<LabelSeries>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);

    let parse_err = |row: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };

    let headers = reader
        .headers()
        .map_err(|e| parse_err(0, format!("unreadable header: {e}")))?
        .clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    let labeled = match names.len() {
        6 => false,
        7 if names[6] == LABEL_COLUMN => true,
        _ => {
            return Err(parse_err(
                0,
                format!(
                    "expected header {},[{LABEL_COLUMN}], got {}",
                    TRACE_HEADER.join(","),
                    names.join(",")
                ),
            ))
        }
    };
    if names[..6] != TRACE_HEADER {
        return Err(parse_err(
            0,
            format!(
                "expected header {}, got {}",
                TRACE_HEADER.join(","),
                names.join(",")
            ),
        ));
    }

    let mut records = Vec::new();
    let mut row_labels = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let row = i + 1;
        let fields = result.map_err(|e| parse_err(row, e.to_string()))?;
        let num = |col: usize| -> Result<f64> {
            let raw = fields[col].trim();
            let v: f64 = raw.parse().map_err(|_| {
                parse_err(row, format!("column {}: cannot parse {raw:?}", names[col]))
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    row,
                    format!("column {}: non-finite value", names[col]),
                ));
            }
            Ok(v)
        };
        let record = SensorRecord {
            timestamp_s: num(0)?,
            position: GeoPoint {
                lat_deg: num(1)?,
                lon_deg: num(2)?,
            },
            speed_fps: num(3)?,
            steer_deg: num(4)?,
            pedal_pct: num(5)?,
        };
        record.validate().map_err(|m| parse_err(row, m))?;
        if let Some(prev) = records.last() {
            let prev: &SensorRecord = prev;
            if record.timestamp_s <= prev.timestamp_s {
                return Err(parse_err(
                    row,
                    format!(
                        "timestamp {} not after {}",
                        record.timestamp_s, prev.timestamp_s
                    ),
                ));
            }
        }
        records.push(record);
        if labeled {
            match fields[6].trim() {
                "0" => row_labels.push(false),
                "1" => row_labels.push(true),
                other => {
                    return Err(parse_err(
                        row,
                        format!("label must be 0 or 1, got {other:?}"),
                    ))
                }
            }
        }
    }

    if records.len() < 2 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "trace requires ≥ 2 records".into(),
        });
    }
    let trace = Trace::new(records)?;
    let labels = if labeled {
        if row_labels[0] {
            return Err(parse_err(
                1,
                "first row cannot be labeled: it ends no step".into(),
            ));
        }
        Some(LabelSeries::from_flags(row_labels[1..].to_vec()))
    } else {
        None
    };
    Ok((trace, labels))
}

/// Writes a trace CSV, appending the `label` column when labels are given.
/// Values use the shortest decimal form that parses back to the same double.
pub fn save_trace(path: &Path, trace: &Trace, labels: Option<&LabelSeries>) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != trace.steps() {
            return Err(Error::Shape(format!(
                "{} labels for a trace with {} steps",
                l.len(),
                trace.steps()
            )));
        }
    }
    let mut out = String::with_capacity(trace.len() * 64);
    out.push_str(&TRACE_HEADER.join(","));
    if labels.is_some() {
        out.push(',');
        out.push_str(LABEL_COLUMN);
    }
    out.push('\n');
    for (i, r) in trace.records().iter().enumerate() {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            r.timestamp_s,
            r.position.lat_deg,
            r.position.lon_deg,
            r.speed_fps,
            r.steer_deg,
            r.pedal_pct
        );
        if let Some(l) = labels {
            let flag = i > 0 && l.flags()[i - 1];
            out.push_str(if flag { ",1" } else { ",0" });
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}
