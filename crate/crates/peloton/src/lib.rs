//! Race files, the analysis pipeline, reports and per-athlete status on top
//! of `peloton-core`.

pub mod args;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod status;

pub use io::{
    read_course, read_course_path, read_events, read_events_path, sort_events, write_events, IngestError, Ingested, InputFormat, RowError,
};
pub use pipeline::{epsilon_sweep, run, CpStats, Crossings, RunConfig, RunError, RunOutput, SweepRow, Timings};
pub use report::{write_report, write_sweep, write_timings, OutputFormat, ReportContext, ReportSelection};
pub use status::{anomalies, athlete_status, AnomalyKind, AnomalyRecord, AthleteStatus, Standings, DEFAULT_PACE_JUMP};
