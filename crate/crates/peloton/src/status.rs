//! Per-athlete race status and anomaly records.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use peloton_core::{AthleteId, Course, HistoryEntry, QueryError, StreamAnomalyKind, Timestamp};

use crate::pipeline::RunOutput;

pub const DEFAULT_PACE_JUMP: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct AthleteStatus {
    pub athlete: AthleteId,
    pub last_cp: u32,
    pub last_time: Timestamp,
    /// 1-based rank by farthest control point, then earliest crossing there.
    pub position: usize,
    /// Minutes per kilometer over the last segment crossed.
    pub segment_pace: Option<f64>,
    /// Minutes per kilometer from the first to the last crossing.
    pub average_pace: Option<f64>,
    pub history: Vec<HistoryEntry>,
}

impl AthleteStatus {
    /// Control points at which the athlete ran in a group.
    pub fn grouped_at(&self) -> usize {
        self.history.iter().filter(|h| matches!(h, HistoryEntry::Group(_))).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum AnomalyKind {
    SkippedCp,
    OrderViolation,
    DuplicateEvent,
    /// Segment pace off the running average by more than this factor.
    PaceJump(f64),
}

impl AnomalyKind {
    pub fn name(&self) -> &'static str {
        match self {
            AnomalyKind::SkippedCp => "skipped-cp",
            AnomalyKind::OrderViolation => "order-violation",
            AnomalyKind::DuplicateEvent => "duplicate-event",
            AnomalyKind::PaceJump(_) => "pace-jump",
        }
    }

    fn rank(&self) -> u8 {
        match self {
            AnomalyKind::SkippedCp => 0,
            AnomalyKind::OrderViolation => 1,
            AnomalyKind::DuplicateEvent => 2,
            AnomalyKind::PaceJump(_) => 3,
        }
    }
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyRecord {
    pub athlete: AthleteId,
    pub kind: AnomalyKind,
    pub cp: u32,
    pub details: String,
}

impl fmt::Display for AnomalyRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} athlete {} cp {}: {}", self.kind, self.athlete, self.cp, self.details)
    }
}

/// Race positions, computed once per run.
#[derive(Debug, Clone, Default)]
pub struct Standings {
    rank: HashMap<AthleteId, usize>,
}

impl Standings {
    pub fn new(run: &RunOutput) -> Self {
        let mut order: Vec<(std::cmp::Reverse<usize>, Timestamp, AthleteId)> = run
            .crossings
            .iter()
            .filter_map(|(&a, times)| {
                let (cp, t) = last_crossing(times)?;
                Some((std::cmp::Reverse(cp), t, a))
            })
            .collect();
        order.sort_unstable();
        Standings { rank: order.into_iter().enumerate().map(|(i, (_, _, a))| (a, i + 1)).collect() }
    }

    pub fn position(&self, athlete: AthleteId) -> Option<usize> {
        self.rank.get(&athlete).copied()
    }

    pub fn len(&self) -> usize {
        self.rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rank.is_empty()
    }
}

fn last_crossing(times: &[Option<Timestamp>]) -> Option<(usize, Timestamp)> {
    times.iter().enumerate().rev().find_map(|(cp, t)| t.map(|t| (cp, t)))
}

fn crossed(times: &[Option<Timestamp>]) -> impl Iterator<Item = (u32, Timestamp)> + '_ {
    times.iter().enumerate().filter_map(|(cp, t)| t.map(|t| (cp as u32, t)))
}

/// Minutes per kilometer between two crossings.
pub fn pace(course: &Course, from: (u32, Timestamp), to: (u32, Timestamp)) -> Option<f64> {
    let meters = course.distance(to.0)? - course.distance(from.0)?;
    if meters <= 0.0 {
        return None;
    }
    let minutes = to.1.gap(from.1) as f64 / 60_000.0;
    Some(minutes / (meters / 1000.0))
}

pub fn athlete_status(
    run: &RunOutput,
    standings: &Standings,
    course: Option<&Course>,
    athlete: AthleteId,
) -> Result<AthleteStatus, QueryError> {
    let history = run.engine.group_history(athlete)?;
    let times = run.crossings.get(&athlete).ok_or(QueryError::UnknownAthlete(athlete))?;
    let points: Vec<(u32, Timestamp)> = crossed(times).collect();
    let (&last, &first) = match (points.last(), points.first()) {
        (Some(l), Some(f)) => (l, f),
        _ => return Err(QueryError::UnknownAthlete(athlete)),
    };
    let previous = points.len().checked_sub(2).map(|i| points[i]);
    Ok(AthleteStatus {
        athlete,
        last_cp: last.0,
        last_time: last.1,
        position: standings.position(athlete).unwrap_or(0),
        segment_pace: course.zip(previous).and_then(|(c, p)| pace(c, p, last)),
        average_pace: course.and_then(|c| pace(c, first, last)),
        history,
    })
}

/// Rejected events, skipped control points and, with a course, pace jumps.
/// One record per (athlete, control point, kind), sorted by athlete.
pub fn anomalies(run: &RunOutput, course: Option<&Course>, pace_jump: f64) -> Vec<AnomalyRecord> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut push = |out: &mut Vec<AnomalyRecord>, r: AnomalyRecord| {
        if seen.insert((r.athlete, r.cp, r.kind.rank())) {
            out.push(r);
        }
    };
    for a in run.engine.anomalies() {
        let (kind, what) = match a.kind {
            StreamAnomalyKind::Duplicate => (AnomalyKind::DuplicateEvent, "repeated crossing"),
            StreamAnomalyKind::OrderViolation => (AnomalyKind::OrderViolation, "crossing out of course order"),
        };
        push(&mut out, AnomalyRecord { athlete: a.athlete, kind, cp: a.cp, details: format!("{what} at {} ms rejected", a.time) });
    }
    let mut athletes: Vec<&AthleteId> = run.crossings.keys().collect();
    athletes.sort_unstable();
    for &athlete in athletes {
        let times = &run.crossings[&athlete];
        let points: Vec<(u32, Timestamp)> = crossed(times).collect();
        for (cp, t) in times.iter().enumerate() {
            if t.is_none() {
                let next = points.iter().find(|p| p.0 as usize > cp).map_or(0, |p| p.0);
                let details = format!("no crossing; next crossing at control point {next}");
                push(&mut out, AnomalyRecord { athlete, kind: AnomalyKind::SkippedCp, cp: cp as u32, details });
            }
        }
        let Some(course) = course else { continue };
        for i in 2..points.len() {
            let (Some(segment), Some(average)) = (pace(course, points[i - 1], points[i]), pace(course, points[0], points[i - 1])) else {
                continue;
            };
            if segment > average * pace_jump || segment * pace_jump < average {
                let details = format!("segment {segment:.2} min/km against average {average:.2} min/km");
                push(&mut out, AnomalyRecord { athlete, kind: AnomalyKind::PaceJump(pace_jump), cp: points[i].0, details });
            }
        }
    }
    out.sort_by_key(|a| (a.athlete, a.cp, a.kind.rank()));
    out
}
