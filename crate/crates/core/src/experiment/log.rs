use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::sig_shortest;
use crate::sensor::ReadingUnit;

/// Column order of the measurement CSV.
pub const CSV_HEADER: [&str; 7] = [
    "timestamp_s",
    "cycle",
    "phase",
    "strain_pct",
    "reading_value",
    "reading_unit",
    "sensor_id",
];

/// Significant digits written for floats.
pub const CSV_SIG_DIGITS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Baseline,
    Stretch,
    Release,
    FailureRun,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Baseline => "baseline",
            Phase::Stretch => "stretch",
            Phase::Release => "release",
            Phase::FailureRun => "failure_run",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "baseline" => Some(Phase::Baseline),
            "stretch" => Some(Phase::Stretch),
            "release" => Some(Phase::Release),
            "failure_run" => Some(Phase::FailureRun),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One instrument reading. An open circuit after mechanical failure is
/// recorded as an infinite reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub timestamp_s: f64,
    pub cycle: u32,
    pub phase: Phase,
    pub strain_pct: f64,
    pub reading_value: f64,
    pub reading_unit: ReadingUnit,
    pub sensor_id: String,
}

impl LogRow {
    pub fn is_open_circuit(&self) -> bool {
        !self.reading_value.is_finite()
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("bad header: expected `{}`, found `{found}`", CSV_HEADER.join(","))]
    Header { found: String },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasurementLog {
    pub rows: Vec<LogRow>,
}

impl MeasurementLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn sensor_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = Vec::new();
        for row in &self.rows {
            if !ids.contains(&row.sensor_id.as_str()) {
                ids.push(&row.sensor_id);
            }
        }
        ids
    }

    pub fn has_phase(&self, phase: Phase) -> bool {
        self.rows.iter().any(|r| r.phase == phase)
    }

    /// First row index (1-based data row) whose timestamp does not increase.
    pub fn check_timestamps(&self) -> Result<(), LogError> {
        for (i, pair) in self.rows.windows(2).enumerate() {
            if !(pair[1].timestamp_s > pair[0].timestamp_s) {
                return Err(LogError::Row {
                    row: i + 2,
                    message: format!(
                        "timestamp {} does not increase past {}",
                        pair[1].timestamp_s, pair[0].timestamp_s
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), LogError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                sig_shortest(r.timestamp_s, CSV_SIG_DIGITS).as_str(),
                r.cycle.to_string().as_str(),
                r.phase.as_str(),
                sig_shortest(r.strain_pct, CSV_SIG_DIGITS).as_str(),
                sig_shortest(r.reading_value, CSV_SIG_DIGITS).as_str(),
                r.reading_unit.symbol(),
                r.sensor_id.as_str(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf-8")
    }

    /// Parses and validates the CSV ingestion format. Row numbers in errors
    /// count data rows from 1 (the header is row 0).
    pub fn read_csv<R: io::Read>(input: R) -> Result<Self, LogError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let header = reader.headers()?.clone();
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(LogError::Header {
                found: header.iter().collect::<Vec<_>>().join(","),
            });
        }
        let mut log = MeasurementLog::new();
        for (i, record) in reader.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| LogError::Row {
                row,
                message: e.to_string(),
            })?;
            let err = |message: String| LogError::Row { row, message };
            let float = |idx: usize, name: &str| -> Result<f64, LogError> {
                record[idx]
                    .parse::<f64>()
                    .map_err(|_| err(format!("{name} `{}` is not a number", &record[idx])))
            };
            let timestamp_s = float(0, "timestamp_s")?;
            let cycle = record[1].parse::<u32>().map_err(|_| {
                err(format!(
                    "cycle `{}` is not a non-negative integer",
                    &record[1]
                ))
            })?;
            let phase = Phase::parse(&record[2])
                .ok_or_else(|| err(format!("unknown phase `{}`", &record[2])))?;
            let strain_pct = float(3, "strain_pct")?;
            let reading_value = float(4, "reading_value")?;
            let reading_unit = ReadingUnit::from_symbol(&record[5])
                .ok_or_else(|| err(format!("unknown unit `{}`", &record[5])))?;
            if record[6].is_empty() {
                return Err(err("empty sensor_id".into()));
            }
            if !timestamp_s.is_finite() || !strain_pct.is_finite() || reading_value.is_nan() {
                return Err(err("non-finite timestamp or strain".into()));
            }
            log.rows.push(LogRow {
                timestamp_s,
                cycle,
                phase,
                strain_pct,
                reading_value,
                reading_unit,
                sensor_id: record[6].to_owned(),
            });
        }
        log.check_timestamps()?;
        Ok(log)
    }
}

/// `sensor_id,zero_value,reading_unit` table of unstrained readings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ZeroValueTable {
    pub entries: Vec<(String, f64)>,
    pub unit: Option<ReadingUnit>,
}

pub const ZERO_VALUE_HEADER: [&str; 3] = ["sensor_id", "zero_value", "reading_unit"];

impl ZeroValueTable {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, v)| *v).collect()
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), LogError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(ZERO_VALUE_HEADER)?;
        let unit = self.unit.map(|u| u.symbol()).unwrap_or("");
        for (id, v) in &self.entries {
            w.write_record([id.as_str(), &sig_shortest(*v, CSV_SIG_DIGITS), unit])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(input: R) -> Result<Self, LogError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let header = reader.headers()?.clone();
        if header.iter().ne(ZERO_VALUE_HEADER.iter().copied()) {
            return Err(LogError::Header {
                found: header.iter().collect::<Vec<_>>().join(","),
            });
        }
        let mut table = ZeroValueTable::default();
        for (i, record) in reader.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| LogError::Row {
                row,
                message: e.to_string(),
            })?;
            let value = record[1].parse::<f64>().map_err(|_| LogError::Row {
                row,
                message: format!("zero_value `{}` is not a number", &record[1]),
            })?;
            let unit = ReadingUnit::from_symbol(&record[2]).ok_or_else(|| LogError::Row {
                row,
                message: format!("unknown unit `{}`", &record[2]),
            })?;
            match table.unit {
                Some(u) if u != unit => {
                    return Err(LogError::Row {
                        row,
                        message: "mixed units in one table".into(),
                    })
                }
                _ => table.unit = Some(unit),
            }
            table.entries.push((record[0].to_owned(), value));
        }
        Ok(table)
    }
}

/// Is this the header of a zero-value table rather than a measurement log?
pub fn is_zero_value_header(first_line: &str) -> bool {
    let cols: Vec<&str> = first_line.trim().split(',').map(str::trim).collect();
    cols == ZERO_VALUE_HEADER
}
