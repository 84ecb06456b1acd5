use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};

use super::CgmRecord;
use crate::error::{GlimmerError, Result};

pub const CSV_HEADER: [&str; 5] = [
    "timestamp",
    "glucose_mgdl",
    "basal_u_per_hr",
    "bolus_u",
    "carbs_g",
];

/// Reads CGM records from CSV. Empty basal/bolus/carbs cells read as 0; glucose is mandatory.
pub fn parse_csv<R: Read>(source: R) -> Result<Vec<CgmRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let header = reader
        .headers()
        .map_err(|e| GlimmerError::Format(format!("unreadable header: {e}")))?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(GlimmerError::Format(format!(
            "expected header `{}`, found `{}`",
            CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut out: Vec<CgmRecord> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            GlimmerError::Row {
                line,
                message: e.to_string(),
            }
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let row_err = |message: String| GlimmerError::Row { line, message };

        let timestamp = DateTime::parse_from_rfc3339(&row[0])
            .map_err(|e| row_err(format!("invalid timestamp `{}`: {e}", &row[0])))?
            .with_timezone(&Utc);

        let glucose = match row[1].parse::<f64>() {
            Ok(g) if g.is_finite() && g > 0.0 => g,
            Ok(g) => return Err(row_err(format!("glucose must be positive, got {g}"))),
            Err(_) if row[1].is_empty() => return Err(row_err("missing glucose".into())),
            Err(_) => return Err(row_err(format!("invalid glucose `{}`", &row[1]))),
        };

        let optional = |idx: usize| -> Result<f64> {
            let cell = &row[idx];
            if cell.is_empty() {
                return Ok(0.0);
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
                _ => Err(row_err(format!(
                    "invalid {} `{cell}` (expected a non-negative number)",
                    CSV_HEADER[idx]
                ))),
            }
        };

        let record = CgmRecord {
            timestamp,
            glucose,
            basal: optional(2)?,
            bolus: optional(3)?,
            carbs: optional(4)?,
        };
        if let Some(prev) = out.last() {
            if record.timestamp <= prev.timestamp {
                return Err(GlimmerError::Ordering {
                    line,
                    message: format!("{} follows {}", record.timestamp, prev.timestamp),
                });
            }
        }
        out.push(record);
    }
    Ok(out)
}

pub fn read_csv_file(path: &Path) -> Result<Vec<CgmRecord>> {
    parse_csv(File::open(path)?)
}

/// Writes records in the canonical layout read by [`parse_csv`].
pub fn write_csv<W: Write>(records: &[CgmRecord], sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    let io = |e: csv::Error| GlimmerError::Io(std::io::Error::other(e));
    writer.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        writer
            .write_record([
                r.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
                r.glucose.to_string(),
                r.basal.to_string(),
                r.bolus.to_string(),
                r.carbs.to_string(),
            ])
            .map_err(io)?;
    }
    writer.flush()?;
    Ok(())
}
