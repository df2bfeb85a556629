use std::collections::HashMap;
use std::path::Path;

use super::record::{SensorRecord, Stream};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = ["user_id", "activity", "position", "timestamp_ms", "x", "y", "z"];

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    /// Per-user streams in order of first appearance; a user whose
    /// timestamps go backwards yields several streams.
    pub streams: Vec<Stream>,
    /// Number of timestamp discontinuities that forced a stream split.
    pub splits: usize,
}

impl Ingested {
    pub fn records(&self) -> impl Iterator<Item = &SensorRecord> {
        self.streams.iter().flat_map(|s| s.records.iter())
    }
}

pub fn ingest_csv(path: &Path) -> Result<Ingested> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, path)
}

pub fn ingest_reader<R: std::io::Read>(reader: R, path: &Path) -> Result<Ingested> {
    let csv_err = |line: u64, msg: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_err(1, e.to_string()))?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(csv_err(
            1,
            format!("expected header {}, got {}", CSV_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut streams: Vec<Stream> = Vec::new();
    // user -> index of that user's currently open stream
    let mut open: HashMap<String, usize> = HashMap::new();
    let mut splits = 0;
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let label = |i: usize| {
            let v = &row[i];
            (!v.is_empty()).then(|| v.to_string())
        };
        let timestamp_ms: i64 = row[3]
            .trim()
            .parse()
            .map_err(|_| csv_err(line, format!("timestamp_ms {:?} is not an integer", &row[3])))?;
        let mut accel = [0.0; 3];
        for (k, slot) in accel.iter_mut().enumerate() {
            let cell = &row[4 + k];
            *slot = cell
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| csv_err(line, format!("{} {cell:?} is not a finite number", CSV_HEADER[4 + k])))?;
        }
        let record = SensorRecord {
            user_id: row[0].to_string(),
            activity: label(1),
            position: label(2),
            timestamp_ms,
            accel,
        };
        let idx = match open.get(&record.user_id) {
            Some(&i) if streams[i].records.last().is_some_and(|r| r.timestamp_ms <= timestamp_ms) => i,
            Some(_) => {
                splits += 1;
                streams.push(Stream {
                    user_id: record.user_id.clone(),
                    records: Vec::new(),
                });
                streams.len() - 1
            }
            None => {
                streams.push(Stream {
                    user_id: record.user_id.clone(),
                    records: Vec::new(),
                });
                streams.len() - 1
            }
        };
        open.insert(record.user_id.clone(), idx);
        streams[idx].records.push(record);
    }
    if splits > 0 {
        log::warn!("{}: split {splits} stream(s) at timestamp discontinuities", path.display());
    }
    Ok(Ingested { streams, splits })
}

/// Writes records in the ingest format.
pub fn write_csv<'a>(path: &Path, records: impl IntoIterator<Item = &'a SensorRecord>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    write_records(&mut w, records)?;
    w.flush()?;
    Ok(())
}

fn write_records<'a, W: std::io::Write>(
    w: &mut csv::Writer<W>,
    records: impl IntoIterator<Item = &'a SensorRecord>,
) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            r.user_id.as_str(),
            r.activity.as_deref().unwrap_or(""),
            r.position.as_deref().unwrap_or(""),
            &r.timestamp_ms.to_string(),
            &r.accel[0].to_string(),
            &r.accel[1].to_string(),
            &r.accel[2].to_string(),
        ])
        .map_err(io)?;
    }
    Ok(())
}
