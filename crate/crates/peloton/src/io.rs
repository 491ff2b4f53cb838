//! Reading and writing race files.
//!
//! Two event layouts are understood. The long layout has one crossing per
//! row under the header `athlete_id,control_point,time_ms`. The wide layout
//! has one athlete per row: the first column is the athlete id and every
//! further column is a control point, holding an `H:MM:SS` split or nothing.
//! The layout is detected from the header unless given explicitly.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use peloton_core::{ControlPoint, Course, Event, ParamError};
use thiserror::Error;

pub const LONG_HEADER: [&str; 3] = ["athlete_id", "control_point", "time_ms"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Long,
    Wide,
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "long" => Ok(InputFormat::Long),
            "wide" => Ok(InputFormat::Wide),
            _ => Err(format!("unknown input format {s:?}; expected long or wide")),
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputFormat::Long => "long",
            InputFormat::Wide => "wide",
        })
    }
}

/// A data row that could not be used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Open { path: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("input has no header row")]
    MissingHeader,
    #[error("header {0:?} names no control point columns")]
    NoControlPoints(String),
    #[error("all {rows} data rows were rejected; first: {first}")]
    AllRejected { rows: usize, first: RowError },
    #[error("course: {0}")]
    Course(#[from] ParamError),
}

/// Events of one input file, sorted in stream order.
#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub events: Vec<Event>,
    pub rejected: Vec<RowError>,
    /// Control points named by the file: split columns in the wide layout,
    /// one past the highest index in the long layout.
    pub control_points: u32,
}

/// Sorts by time, then control point, then athlete.
pub fn sort_events(events: &mut [Event]) {
    events.sort_unstable_by_key(Event::stream_key);
}

pub fn detect_format(header: &csv::StringRecord) -> InputFormat {
    let long = header.len() == LONG_HEADER.len() && header.iter().zip(LONG_HEADER).all(|(h, want)| h.eq_ignore_ascii_case(want));
    if long {
        InputFormat::Long
    } else {
        InputFormat::Wide
    }
}

/// Parses `H:MM:SS` with an optional fraction of a second into milliseconds.
pub fn parse_split(s: &str) -> Result<u64, String> {
    let bad = || format!("bad split {s:?}; expected H:MM:SS");
    let mut parts = s.split(':');
    let (h, m, sec) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some(h), Some(m), Some(sec), None) => (h, m, sec),
        _ => return Err(bad()),
    };
    let (whole, frac) = sec.split_once('.').unwrap_or((sec, ""));
    let digits = |x: &str| !x.is_empty() && x.bytes().all(|b| b.is_ascii_digit());
    if !digits(h) || m.len() != 2 || !digits(m) || whole.len() != 2 || !digits(whole) || !(frac.is_empty() || digits(frac)) {
        return Err(bad());
    }
    let h: u64 = h.parse().map_err(|_| bad())?;
    let (m, whole): (u64, u64) = (m.parse().map_err(|_| bad())?, whole.parse().map_err(|_| bad())?);
    if m >= 60 || whole >= 60 {
        return Err(bad());
    }
    // milliseconds from the first three fraction digits; the rest truncates
    let ms = frac.bytes().chain(std::iter::repeat(b'0')).take(3).fold(0u64, |acc, b| acc * 10 + u64::from(b - b'0'));
    h.checked_mul(3_600_000).and_then(|t| t.checked_add((m * 60 + whole) * 1000 + ms)).ok_or_else(bad)
}

/// Formats milliseconds as `H:MM:SS`, with `.mmm` when not whole seconds.
pub fn format_split(ms: u64) -> String {
    let (s, frac) = (ms / 1000, ms % 1000);
    let base = format!("{}:{:02}:{:02}", s / 3600, s / 60 % 60, s % 60);
    if frac == 0 {
        base
    } else {
        format!("{base}.{frac:03}")
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(input)
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IngestError::Io(io),
        kind => IngestError::Malformed { line, message: format!("{kind:?}") },
    }
}

/// Reads events in the given layout, or the detected one when `None`.
pub fn read_events<R: Read>(input: R, format: Option<InputFormat>) -> Result<Ingested, IngestError> {
    let mut rdr = reader(input);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(IngestError::MissingHeader);
    }
    let format = format.unwrap_or_else(|| detect_format(&header));
    let columns = header.len();
    if format == InputFormat::Wide && columns < 2 {
        return Err(IngestError::NoControlPoints(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut out = Ingested::default();
    let mut rows = 0usize;
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record).map_err(csv_error)? {
        if record.iter().all(str::is_empty) {
            continue;
        }
        rows += 1;
        let line = line_of(&record);
        let parsed = match format {
            InputFormat::Long => long_row(&record).map(|e| vec![e]),
            InputFormat::Wide => wide_row(&record, columns),
        };
        match parsed {
            Ok(events) => out.events.extend(events),
            Err(message) => out.rejected.push(RowError { line, message }),
        }
    }
    if rows > 0 && out.rejected.len() == rows {
        let first = out.rejected[0].clone();
        return Err(IngestError::AllRejected { rows, first });
    }
    out.control_points = match format {
        InputFormat::Wide => (columns - 1) as u32,
        InputFormat::Long => out.events.iter().map(|e| e.cp + 1).max().unwrap_or(0),
    };
    sort_events(&mut out.events);
    Ok(out)
}

pub fn read_events_path(path: &Path, format: Option<InputFormat>) -> Result<Ingested, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Open { path: path.display().to_string(), source })?;
    read_events(std::io::BufReader::new(file), format)
}

fn field<T: FromStr>(record: &csv::StringRecord, i: usize, name: &str) -> Result<T, String> {
    let raw = record.get(i).ok_or_else(|| format!("missing {name}"))?;
    raw.parse().map_err(|_| format!("bad {name} {raw:?}"))
}

fn long_row(record: &csv::StringRecord) -> Result<Event, String> {
    if record.len() != 3 {
        return Err(format!("expected 3 fields, found {}", record.len()));
    }
    let athlete: u64 = field(record, 0, "athlete_id")?;
    let cp: u32 = field(record, 1, "control_point")?;
    let time: u64 = field(record, 2, "time_ms")?;
    Ok(Event::new(athlete, cp, time))
}

fn wide_row(record: &csv::StringRecord, columns: usize) -> Result<Vec<Event>, String> {
    if record.len() != columns {
        return Err(format!("expected {columns} fields, found {}", record.len()));
    }
    let athlete: u64 = field(record, 0, "athlete id")?;
    let mut events = Vec::new();
    for (cp, cell) in record.iter().skip(1).enumerate() {
        if cell.is_empty() {
            continue;
        }
        let time = parse_split(cell).map_err(|e| format!("control point {cp}: {e}"))?;
        events.push(Event::new(athlete, cp as u32, time));
    }
    Ok(events)
}

/// Writes events in the long layout.
pub fn write_events<W: Write>(out: W, events: &[Event]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LONG_HEADER)?;
    for e in events {
        w.write_record([e.athlete.0.to_string(), e.cp.to_string(), e.time.0.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `index,meters` lines; a header line naming those columns is allowed.
pub fn read_course<R: Read>(input: R) -> Result<Course, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(input);
    let mut points = Vec::new();
    for (n, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = line_of(&record);
        if n == 0 && record.get(0).is_some_and(|h| h.eq_ignore_ascii_case("index")) {
            continue;
        }
        if record.iter().all(str::is_empty) {
            continue;
        }
        let malformed = |message: String| IngestError::Malformed { line, message };
        if record.len() != 2 {
            return Err(malformed(format!("expected index,meters, found {} fields", record.len())));
        }
        let index: u32 = field(&record, 0, "index").map_err(malformed)?;
        let meters: f64 = field(&record, 1, "meters").map_err(malformed)?;
        if !meters.is_finite() || meters < 0.0 {
            return Err(malformed(format!("bad distance {meters}")));
        }
        points.push(ControlPoint { index, distance_m: Some(meters) });
    }
    Ok(Course::new(points)?)
}

pub fn read_course_path(path: &Path) -> Result<Course, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Open { path: path.display().to_string(), source })?;
    read_course(file)
}

pub fn write_course<W: Write>(mut out: W, distances_m: &[u64]) -> std::io::Result<()> {
    writeln!(out, "index,meters")?;
    for (i, d) in distances_m.iter().enumerate() {
        writeln!(out, "{i},{d}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_round_trip() {
        assert_eq!(parse_split("0:00:05"), Ok(5000));
        assert_eq!(parse_split("2:03:59"), Ok(7_439_000));
        assert_eq!(parse_split("12:00:00.25"), Ok(43_200_250));
        assert_eq!(format_split(7_439_000), "2:03:59");
        assert_eq!(format_split(43_200_250), "12:00:00.250");
        for bad in ["", "1:2:3", "0:60:00", "0:00:61", "1:00", "a:00:00", "0:00:00.x", "-1:00:00"] {
            assert!(parse_split(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn long_header_detection() {
        let h = csv::StringRecord::from(vec!["athlete_id", "control_point", "time_ms"]);
        assert_eq!(detect_format(&h), InputFormat::Long);
        let h = csv::StringRecord::from(vec!["bib", "5K", "10K"]);
        assert_eq!(detect_format(&h), InputFormat::Wide);
    }

    #[test]
    fn course_lines_with_and_without_header() {
        let c = read_course("index,meters\n0,5000\n1,10000\n".as_bytes()).unwrap();
        assert_eq!(c.distance(1), Some(10000.0));
        let c = read_course("0,0\n1,21097.5\n".as_bytes()).unwrap();
        assert_eq!(c.len(), 2);
        assert!(read_course("0,5000\n1,4000\n".as_bytes()).is_err());
        assert!(matches!(read_course("0,5000\n1\n".as_bytes()), Err(IngestError::Malformed { line: 2, .. })));
    }
}
