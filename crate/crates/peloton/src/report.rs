//! Text and line-record reports of a run.
//!
//! Record output is one JSON object per line with a fixed field order and
//! no timing data, so equal inputs give byte-equal reports.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use peloton_core::{AthleteId, Course, DiagnosticKind, GroupId, HistoryEntry, LongestKind, Mode, Pattern, PatternKind, PatternRecord};
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use crate::io::RowError;
use crate::pipeline::{RunOutput, SweepRow, Timings};
use crate::status::{anomalies, athlete_status, AnomalyKind, AthleteStatus, Standings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Text,
    Records,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(OutputFormat::Text),
            "records" => Ok(OutputFormat::Records),
            _ => Err(format!("unknown output format {s:?}; expected text or records")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportSelection {
    pub summary: bool,
    pub patterns: bool,
    pub longterm: bool,
    pub labels: bool,
    pub status: bool,
    pub anomalies: bool,
}

impl Default for ReportSelection {
    fn default() -> Self {
        ReportSelection { summary: true, patterns: true, longterm: true, labels: false, status: false, anomalies: false }
    }
}

impl FromStr for ReportSelection {
    type Err = String;

    /// Comma-separated report names.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut sel = ReportSelection { summary: false, patterns: false, longterm: false, labels: false, status: false, anomalies: false };
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            let flag = match name {
                "summary" => &mut sel.summary,
                "patterns" => &mut sel.patterns,
                "longterm" => &mut sel.longterm,
                "labels" => &mut sel.labels,
                "status" => &mut sel.status,
                "anomalies" => &mut sel.anomalies,
                _ => return Err(format!("unknown report {name:?}")),
            };
            *flag = true;
        }
        Ok(sel)
    }
}

/// Everything besides the run that a report may draw on.
#[derive(Debug, Clone, Default)]
pub struct ReportContext<'a> {
    pub course: Option<&'a Course>,
    pub rejected_rows: &'a [RowError],
    /// Athletes for the status report; all athletes when empty.
    pub athletes: &'a [AthleteId],
    pub pace_jump: f64,
}

struct KindCounts<'a>(&'a [u64; 9]);

impl Serialize for KindCounts<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(9))?;
        for k in PatternKind::ALL {
            map.serialize_entry(k.name(), &self.0[k.index()])?;
        }
        map.end()
    }
}

struct LongestCounts([u32; 4]);

impl Serialize for LongestCounts {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(4))?;
        for (k, v) in LongestKind::ALL.iter().zip(self.0) {
            map.serialize_entry(k.name(), &v)?;
        }
        map.end()
    }
}

fn is_empty(v: &[u32]) -> bool {
    v.is_empty()
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record<'a> {
    Summary {
        athletes: usize,
        events: usize,
        rejected_rows: usize,
        control_points: usize,
        epsilon_ms: u64,
        m: usize,
        mu: String,
        mode: &'static str,
        groups: usize,
        edges: usize,
        anomalies: usize,
        pattern_totals: KindCounts<'a>,
    },
    RejectedRow {
        line: u64,
        message: &'a str,
    },
    Cp {
        cp: u32,
        crossings: usize,
        components: usize,
        groups: usize,
        outliers: usize,
        largest_group: usize,
    },
    Pattern {
        kind: &'static str,
        source_cp: u32,
        target_cp: u32,
        sources: Vec<u32>,
        targets: Vec<u32>,
        source_sizes: Vec<u32>,
        target_sizes: Vec<u32>,
        #[serde(skip_serializing_if = "is_empty")]
        absorbed: Vec<u32>,
        #[serde(skip_serializing_if = "is_empty")]
        spawned: Vec<u32>,
    },
    Diagnostic {
        cp: u32,
        ordinal: u32,
        kind: &'static str,
        records: usize,
    },
    Longest {
        kind: &'static str,
        edges: u32,
        cps: u32,
        witness: Vec<(u32, u32)>,
    },
    Labels {
        cp: u32,
        ordinal: u32,
        size: usize,
        lp_s: u32,
        lp_f: u32,
        lp_b: u32,
        lp_r: u32,
    },
    Status {
        athlete: u64,
        last_cp: u32,
        last_time_ms: u64,
        position: usize,
        segment_pace: Option<f64>,
        average_pace: Option<f64>,
        grouped_at: usize,
        history: String,
    },
    Anomaly {
        athlete: u64,
        kind: &'static str,
        cp: u32,
        #[serde(skip_serializing_if = "Option::is_none")]
        factor: Option<f64>,
        details: &'a str,
    },
    Sweep {
        epsilon_ms: u64,
        pattern_totals: KindCounts<'a>,
        longest_edges: Option<LongestCounts>,
        components: &'a [usize],
        groups: &'a [usize],
    },
}

fn emit<W: Write>(out: &mut W, record: &Record<'_>) -> io::Result<()> {
    serde_json::to_writer(&mut *out, record).map_err(io::Error::other)?;
    out.write_all(b"\n")
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Finalized => "finalized",
        Mode::Online => "online",
    }
}

/// History as one token per control point: `gN` group ordinal, `o` outlier,
/// `-` absent.
pub fn history_tokens(history: &[HistoryEntry]) -> String {
    let tokens: Vec<String> = history
        .iter()
        .map(|h| match h {
            HistoryEntry::Group(g) => format!("g{g}"),
            HistoryEntry::Outlier => "o".into(),
            HistoryEntry::Pending => "?".into(),
            HistoryEntry::Absent => "-".into(),
        })
        .collect();
    tokens.join(" ")
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn group_size(run: &RunOutput, g: GroupId) -> u32 {
    run.engine.group(g).map_or(0, |g| g.len() as u32)
}

fn statuses(run: &RunOutput, ctx: &ReportContext<'_>) -> Vec<Result<AthleteStatus, AthleteId>> {
    let standings = Standings::new(run);
    let mut ids: Vec<AthleteId> = if ctx.athletes.is_empty() { run.engine.athletes().collect() } else { ctx.athletes.to_vec() };
    if ctx.athletes.is_empty() {
        ids.sort_unstable();
    }
    ids.into_iter().map(|a| athlete_status(run, &standings, ctx.course, a).map_err(|_| a)).collect()
}

pub fn write_report<W: Write>(
    out: &mut W,
    run: &RunOutput,
    ctx: &ReportContext<'_>,
    sel: ReportSelection,
    format: OutputFormat,
) -> io::Result<()> {
    match format {
        OutputFormat::Text => write_text(out, run, ctx, sel),
        OutputFormat::Records => write_records(out, run, ctx, sel),
    }
}

fn write_records<W: Write>(out: &mut W, run: &RunOutput, ctx: &ReportContext<'_>, sel: ReportSelection) -> io::Result<()> {
    let found = if sel.summary || sel.anomalies { anomalies(run, ctx.course, ctx.pace_jump) } else { Vec::new() };
    if sel.summary {
        let p = run.config.params;
        let totals = run.pattern_totals();
        emit(
            out,
            &Record::Summary {
                athletes: run.engine.athlete_count(),
                events: run.events,
                rejected_rows: ctx.rejected_rows.len(),
                control_points: run.engine.control_point_count(),
                epsilon_ms: p.epsilon,
                m: p.m,
                mu: p.mu.to_string(),
                mode: mode_name(run.config.mode),
                groups: run.global.vertex_count(),
                edges: run.global.edge_count(),
                anomalies: found.len(),
                pattern_totals: KindCounts(&totals),
            },
        )?;
        for r in ctx.rejected_rows {
            emit(out, &Record::RejectedRow { line: r.line, message: &r.message })?;
        }
        for s in &run.cp_stats {
            emit(
                out,
                &Record::Cp {
                    cp: s.cp,
                    crossings: s.crossings,
                    components: s.components,
                    groups: s.groups,
                    outliers: s.outliers(),
                    largest_group: s.largest_group,
                },
            )?;
        }
    }
    if sel.patterns {
        for set in &run.pattern_sets {
            for r in &set.records {
                emit(out, &pattern_record(run, r))?;
            }
            for d in &set.diagnostics {
                let (kind, records) = match d.kind {
                    DiagnosticKind::Unclassified => ("unclassified", 0),
                    DiagnosticKind::Overlap { records } => ("overlap", records),
                };
                emit(out, &Record::Diagnostic { cp: d.group.cp, ordinal: d.group.ordinal, kind, records })?;
            }
        }
    }
    if sel.longterm {
        for l in &run.longest {
            emit(
                out,
                &Record::Longest {
                    kind: l.kind.name(),
                    edges: l.length_edges,
                    cps: l.length_cps(),
                    witness: l.witness.iter().map(|g| (g.cp, g.ordinal)).collect(),
                },
            )?;
        }
    }
    if sel.labels {
        for (g, l) in run.labels.iter() {
            emit(
                out,
                &Record::Labels {
                    cp: g.cp,
                    ordinal: g.ordinal,
                    size: group_size(run, g) as usize,
                    lp_s: l.lp_s,
                    lp_f: l.lp_f,
                    lp_b: l.lp_b,
                    lp_r: l.lp_r,
                },
            )?;
        }
    }
    if sel.status {
        for s in statuses(run, ctx).into_iter().flatten() {
            emit(
                out,
                &Record::Status {
                    athlete: s.athlete.0,
                    last_cp: s.last_cp,
                    last_time_ms: s.last_time.0,
                    position: s.position,
                    segment_pace: s.segment_pace.map(round3),
                    average_pace: s.average_pace.map(round3),
                    grouped_at: s.grouped_at(),
                    history: history_tokens(&s.history),
                },
            )?;
        }
    }
    if sel.anomalies {
        for a in &found {
            let factor = match a.kind {
                AnomalyKind::PaceJump(f) => Some(f),
                _ => None,
            };
            emit(out, &Record::Anomaly { athlete: a.athlete.0, kind: a.kind.name(), cp: a.cp, factor, details: &a.details })?;
        }
    }
    Ok(())
}

fn pattern_record<'a>(run: &RunOutput, r: &PatternRecord) -> Record<'a> {
    let (absorbed, spawned) = match &r.pattern {
        Pattern::Survives { absorbed, spawned, .. } => (absorbed.clone(), spawned.clone()),
        _ => (Vec::new(), Vec::new()),
    };
    let sources = r.pattern.sources();
    let targets = r.pattern.targets();
    Record::Pattern {
        kind: r.kind().name(),
        source_cp: r.source_cp,
        target_cp: r.source_cp + 1,
        source_sizes: sources.iter().map(|&o| group_size(run, GroupId::new(r.source_cp, o))).collect(),
        target_sizes: targets.iter().map(|&o| group_size(run, GroupId::new(r.source_cp + 1, o))).collect(),
        sources,
        targets,
        absorbed,
        spawned,
    }
}

struct Counts<'a>(&'a [u64; 9]);

impl fmt::Display for Counts<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for k in PatternKind::ALL {
            let n = self.0[k.index()];
            if n > 0 {
                write!(f, "{}{k} {n}", if first { "" } else { ", " })?;
                first = false;
            }
        }
        if first {
            f.write_str("none")?;
        }
        Ok(())
    }
}

fn pace_text(p: Option<f64>) -> String {
    match p {
        Some(p) => {
            let secs = (p * 60.0).round() as u64;
            format!("{}:{:02} min/km", secs / 60, secs % 60)
        }
        None => "n/a".into(),
    }
}

fn write_text<W: Write>(out: &mut W, run: &RunOutput, ctx: &ReportContext<'_>, sel: ReportSelection) -> io::Result<()> {
    let found = if sel.summary || sel.anomalies { anomalies(run, ctx.course, ctx.pace_jump) } else { Vec::new() };
    if sel.summary {
        let p = run.config.params;
        writeln!(out, "race")?;
        writeln!(
            out,
            "  {} athletes, {} events, {} control points, {} rejected rows, {} anomalies",
            run.engine.athlete_count(),
            run.events,
            run.engine.control_point_count(),
            ctx.rejected_rows.len(),
            found.len()
        )?;
        writeln!(out, "  epsilon {} ms, m {}, mu {}, {} mode", p.epsilon, p.m, p.mu, mode_name(run.config.mode))?;
        writeln!(out, "  {} groups, {} evolution edges", run.global.vertex_count(), run.global.edge_count())?;
        writeln!(out, "  patterns: {}", Counts(&run.pattern_totals()))?;
        for r in ctx.rejected_rows {
            writeln!(out, "  rejected {r}")?;
        }
        writeln!(out, "{:>5} {:>10} {:>11} {:>7} {:>9} {:>8}", "cp", "crossings", "components", "groups", "outliers", "largest")?;
        for s in &run.cp_stats {
            writeln!(
                out,
                "{:>5} {:>10} {:>11} {:>7} {:>9} {:>8}",
                s.cp,
                s.crossings,
                s.components,
                s.groups,
                s.outliers(),
                s.largest_group
            )?;
        }
    }
    if sel.patterns {
        for set in &run.pattern_sets {
            let counts = set.counts().map(|c| c as u64);
            writeln!(out, "pair {}->{}: {}", set.source_cp, set.source_cp + 1, Counts(&counts))?;
            for r in &set.records {
                writeln!(out, "  {r}")?;
            }
            for d in &set.diagnostics {
                writeln!(out, "  ! {d}")?;
            }
        }
    }
    if sel.longterm {
        writeln!(out, "long-term")?;
        if run.longest.is_empty() {
            writeln!(out, "  no groups")?;
        }
        for l in &run.longest {
            writeln!(out, "  {l}")?;
        }
    }
    if sel.labels {
        writeln!(out, "labels (group size lpS lpF lpB lpR)")?;
        for (g, l) in run.labels.iter() {
            writeln!(out, "  {g} {} {} {} {} {}", group_size(run, g), l.lp_s, l.lp_f, l.lp_b, l.lp_r)?;
        }
    }
    if sel.status {
        writeln!(out, "status")?;
        for s in statuses(run, ctx) {
            match s {
                Ok(s) => writeln!(
                    out,
                    "  athlete {} position {} at cp {} ({} ms), segment {}, average {}, grouped at {} cps: {}",
                    s.athlete,
                    s.position,
                    s.last_cp,
                    s.last_time,
                    pace_text(s.segment_pace),
                    pace_text(s.average_pace),
                    s.grouped_at(),
                    history_tokens(&s.history)
                )?,
                Err(a) => writeln!(out, "  athlete {a}: unknown")?,
            }
        }
    }
    if sel.anomalies {
        writeln!(out, "anomalies")?;
        for a in &found {
            writeln!(out, "  {a}")?;
        }
    }
    Ok(())
}

/// Stage timings and throughput, for humans.
pub fn write_timings<W: Write>(out: &mut W, t: &Timings, events: usize) -> io::Result<()> {
    let ms = |d: std::time::Duration| d.as_secs_f64() * 1000.0;
    writeln!(
        out,
        "timings: ingest {:.1} ms, grouping {:.1} ms, patterns {:.1} ms, long-term {:.1} ms; {:.0} events/s",
        ms(t.ingest),
        ms(t.grouping),
        ms(t.patterns),
        ms(t.longterm),
        t.throughput(events)
    )
}

pub fn write_sweep<W: Write>(out: &mut W, rows: &[SweepRow], format: OutputFormat) -> io::Result<()> {
    match format {
        OutputFormat::Records => {
            for r in rows {
                emit(
                    out,
                    &Record::Sweep {
                        epsilon_ms: r.epsilon,
                        pattern_totals: KindCounts(&r.pattern_totals),
                        longest_edges: r.longest_edges.map(LongestCounts),
                        components: &r.components,
                        groups: &r.groups,
                    },
                )?;
            }
        }
        OutputFormat::Text => {
            write!(out, "{:>10}", "epsilon")?;
            for k in PatternKind::ALL {
                write!(out, " {:>10}", k.name())?;
            }
            writeln!(out, " {:>11} {:>7} {:>13}", "components", "groups", "longest S/F/B/R")?;
            for r in rows {
                write!(out, "{:>10}", r.epsilon)?;
                for n in r.pattern_totals {
                    write!(out, " {n:>10}")?;
                }
                let longest = r.longest_edges.map_or("-".to_string(), |l| format!("{}/{}/{}/{}", l[0], l[1], l[2], l[3]));
                writeln!(out, " {:>11} {:>7} {:>13}", r.components.iter().sum::<usize>(), r.groups.iter().sum::<usize>(), longest)?;
            }
        }
    }
    Ok(())
}
