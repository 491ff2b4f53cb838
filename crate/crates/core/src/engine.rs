//! Streaming group detection.
//!
//! Events arrive in nondecreasing time order. Each control point holds at most
//! one active component; a crossing more than `epsilon` after the component's
//! last crossing finishes it. Finished components of at least `m` athletes
//! become groups, which immediately update the precursor and evolution graphs
//! of both neighbouring control-point pairs.

use alloc::vec::Vec;

use hashbrown::HashMap;
use thiserror::Error;

use crate::evolution::{EvolutionError, EvolutionGraph, GroupId, HistoryEntry, PrecursorGraph};
use crate::online::{PairTracker, PatternUpdate};
use crate::patterns::{Mode, PatternSet};
use crate::relation::{AthleteId, AthleteSet, Event, Params, Timestamp};

const ABSENT: u32 = u32::MAX;
const OUTLIER: u32 = u32::MAX - 1;
const PENDING: u32 = u32::MAX - 2;

fn decode(slot: u32) -> HistoryEntry {
    match slot {
        ABSENT => HistoryEntry::Absent,
        OUTLIER => HistoryEntry::Outlier,
        PENDING => HistoryEntry::Pending,
        g => HistoryEntry::Group(g),
    }
}

/// A finished group: at least `m` athletes, maximal and epsilon-connected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub id: GroupId,
    /// Members in crossing order.
    pub members: Vec<AthleteId>,
    pub t_first: Timestamp,
    pub t_last: Timestamp,
}

impl Group {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member_set(&self) -> AthleteSet {
        self.members.iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentState {
    Active,
    Finished,
}

/// An epsilon-connected run of crossings at one control point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub cp: u32,
    pub members: Vec<AthleteId>,
    pub t_first: Timestamp,
    pub t_last: Timestamp,
    pub state: ComponentState,
    /// Set when the finished component became a group.
    pub group: Option<GroupId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StreamAnomalyKind {
    /// A second crossing of the same control point.
    Duplicate,
    /// A crossing of a control point before one already crossed, or not
    /// strictly later than the previous crossing.
    OrderViolation,
}

/// A rejected event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StreamAnomaly {
    pub athlete: AthleteId,
    pub cp: u32,
    pub time: Timestamp,
    pub kind: StreamAnomalyKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EngineOutput {
    GroupFinalized(GroupId),
    /// A component below the group threshold finished; its members are
    /// outliers at `cp`.
    OutliersMarked {
        cp: u32,
        count: usize,
    },
    Anomaly(StreamAnomaly),
    Pattern(PatternUpdate),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StreamError {
    #[error("event at {got} ms arrived after {previous} ms")]
    OutOfOrder { previous: Timestamp, got: Timestamp },
    #[error("control point {0} was already closed")]
    ClosedControlPoint(u32),
    #[error("control point {cp} is outside the course of {limit} control points")]
    ControlPointOutOfRange { cp: u32, limit: u32 },
    #[error("the stream was already finalized")]
    Finalized,
    #[error(transparent)]
    Graph(#[from] EvolutionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("unknown athlete {0}")]
    UnknownAthlete(AthleteId),
    #[error("control point {0} does not exist")]
    ControlPointOutOfRange(u32),
}

#[derive(Debug, Clone)]
struct ActiveComponent {
    members: Vec<u32>,
    t_first: Timestamp,
    t_last: Timestamp,
}

#[derive(Debug, Clone)]
struct FinishedComponent {
    // empty for groups; their members live in the group list
    members: Vec<AthleteId>,
    t_first: Timestamp,
    t_last: Timestamp,
    group: Option<u32>,
}

#[derive(Debug, Clone, Default)]
struct CpState {
    active: Option<ActiveComponent>,
    finished: Vec<FinishedComponent>,
    groups: Vec<Group>,
    crossings: usize,
    closed: bool,
}

#[derive(Debug, Clone)]
struct Pair {
    precursor: PrecursorGraph,
    graph: EvolutionGraph,
    tracker: Option<PairTracker>,
}

#[derive(Debug, Clone)]
struct Athlete {
    id: AthleteId,
    history: Vec<u32>,
    last_time: Option<Timestamp>,
}

/// Streaming state: components, groups, athlete histories and the graphs
/// between consecutive control points.
#[derive(Debug, Clone)]
pub struct Engine {
    params: Params,
    mode: Mode,
    cp_limit: Option<u32>,
    index: HashMap<AthleteId, u32>,
    athletes: Vec<Athlete>,
    cps: Vec<CpState>,
    // pairs[c] relates control points c and c + 1
    pairs: Vec<Pair>,
    clock: Option<Timestamp>,
    anomalies: Vec<StreamAnomaly>,
    entries: Vec<HistoryEntry>,
    finalized: bool,
}

impl Engine {
    pub fn new(params: Params, mode: Mode) -> Self {
        Engine {
            params,
            mode,
            cp_limit: None,
            index: HashMap::new(),
            athletes: Vec::new(),
            cps: Vec::new(),
            pairs: Vec::new(),
            clock: None,
            anomalies: Vec::new(),
            entries: Vec::new(),
            finalized: false,
        }
    }

    /// Engine for a course with a known number of control points; events
    /// beyond it are rejected.
    pub fn with_control_points(params: Params, mode: Mode, count: u32) -> Self {
        let mut e = Engine::new(params, mode);
        e.cp_limit = Some(count);
        e.ensure_cp(count.saturating_sub(1) as usize);
        if count == 0 {
            e.cps.clear();
            e.pairs.clear();
        }
        e
    }

    pub fn params(&self) -> Params {
        self.params
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    /// Number of control points seen (or declared).
    pub fn control_point_count(&self) -> usize {
        self.cps.len()
    }

    pub fn athlete_count(&self) -> usize {
        self.athletes.len()
    }

    pub fn athletes(&self) -> impl Iterator<Item = AthleteId> + '_ {
        self.athletes.iter().map(|a| a.id)
    }

    pub fn anomalies(&self) -> &[StreamAnomaly] {
        &self.anomalies
    }

    fn ensure_cp(&mut self, cp: usize) {
        while self.cps.len() <= cp {
            let c = self.cps.len() as u32;
            self.cps.push(CpState::default());
            self.pairs.push(Pair {
                precursor: PrecursorGraph::new(c),
                graph: EvolutionGraph::new(c),
                tracker: (self.mode == Mode::Online).then(|| PairTracker::new(c)),
            });
        }
    }

    /// Processes one event, appending notifications to `out`.
    pub fn ingest(&mut self, e: Event, out: &mut Vec<EngineOutput>) -> Result<(), StreamError> {
        if self.finalized {
            return Err(StreamError::Finalized);
        }
        if let Some(previous) = self.clock {
            if e.time < previous {
                return Err(StreamError::OutOfOrder { previous, got: e.time });
            }
        }
        if let Some(limit) = self.cp_limit {
            if e.cp >= limit {
                return Err(StreamError::ControlPointOutOfRange { cp: e.cp, limit });
            }
        }
        let cp = e.cp as usize;
        if self.cps.get(cp).is_some_and(|c| c.closed) {
            return Err(StreamError::ClosedControlPoint(e.cp));
        }
        let a = match self.index.get(&e.athlete) {
            Some(&a) => a,
            None => {
                let a = self.athletes.len() as u32;
                self.index.insert(e.athlete, a);
                self.athletes.push(Athlete { id: e.athlete, history: Vec::new(), last_time: None });
                a
            }
        };
        self.clock = Some(e.time);

        let athlete = &self.athletes[a as usize];
        let anomaly = if cp < athlete.history.len() {
            Some(if athlete.history[cp] != ABSENT { StreamAnomalyKind::Duplicate } else { StreamAnomalyKind::OrderViolation })
        } else if athlete.last_time.is_some_and(|t| e.time <= t) {
            Some(StreamAnomalyKind::OrderViolation)
        } else {
            None
        };
        if let Some(kind) = anomaly {
            let record = StreamAnomaly { athlete: e.athlete, cp: e.cp, time: e.time, kind };
            self.anomalies.push(record);
            out.push(EngineOutput::Anomaly(record));
            return Ok(());
        }

        self.ensure_cp(cp);
        let eps = self.params.epsilon;
        let joins = match &self.cps[cp].active {
            Some(c) => e.time.0 - c.t_last.0 <= eps,
            None => false,
        };
        if joins {
            let c = self.cps[cp].active.as_mut().expect("active component");
            c.members.push(a);
            c.t_last = e.time;
        } else {
            if self.cps[cp].active.is_some() {
                self.finish_active(cp, out)?;
            }
            self.cps[cp].active = Some(ActiveComponent { members: alloc::vec![a], t_first: e.time, t_last: e.time });
        }
        self.cps[cp].crossings += 1;

        let athlete = &mut self.athletes[a as usize];
        athlete.history.resize(cp, ABSENT);
        athlete.history.push(PENDING);
        athlete.last_time = Some(e.time);
        Ok(())
    }

    /// Convenience wrapper around [`ingest`](Self::ingest).
    pub fn ingest_event(&mut self, e: Event) -> Result<Vec<EngineOutput>, StreamError> {
        let mut out = Vec::new();
        self.ingest(e, &mut out)?;
        Ok(out)
    }

    fn finish_active(&mut self, cp: usize, out: &mut Vec<EngineOutput>) -> Result<(), StreamError> {
        let Some(comp) = self.cps[cp].active.take() else {
            return Ok(());
        };
        let mu = self.params.mu;
        if comp.members.len() < self.params.m {
            let mut ids = Vec::with_capacity(comp.members.len());
            for &a in &comp.members {
                let athlete = &mut self.athletes[a as usize];
                athlete.history[cp] = OUTLIER;
                ids.push(athlete.id);
            }
            self.cps[cp].finished.push(FinishedComponent { members: ids, t_first: comp.t_first, t_last: comp.t_last, group: None });
            self.pairs[cp].precursor.delete_tentative();
            out.push(EngineOutput::OutliersMarked { cp: cp as u32, count: comp.members.len() });
            return Ok(());
        }

        let ordinal = self.cps[cp].groups.len() as u32;
        let id = GroupId::new(cp as u32, ordinal);
        let size = comp.members.len() as u32;
        let mut ids = Vec::with_capacity(comp.members.len());
        for &a in &comp.members {
            let athlete = &mut self.athletes[a as usize];
            athlete.history[cp] = ordinal;
            ids.push(athlete.id);
        }
        self.cps[cp].groups.push(Group { id, members: ids, t_first: comp.t_first, t_last: comp.t_last });
        self.cps[cp].finished.push(FinishedComponent {
            members: Vec::new(),
            t_first: comp.t_first,
            t_last: comp.t_last,
            group: Some(ordinal),
        });

        // As the source side of (cp, cp + 1): tentative edges become real.
        let mut touched_targets = Vec::new();
        {
            let pair = &mut self.pairs[cp];
            pair.graph.add_source(size);
            let confirmed = pair.precursor.confirm_tentative(ordinal);
            for i in confirmed {
                let edge = pair.precursor.edges()[i];
                if pair.graph.relate(ordinal, edge.target, edge.weight, mu)?.is_some() {
                    touched_targets.push(edge.target);
                }
            }
        }
        let pair = &mut self.pairs[cp];
        if let Some(tracker) = pair.tracker.as_mut() {
            tracker.refresh(&pair.graph, mu, &[ordinal], &touched_targets, &mut |u| out.push(EngineOutput::Pattern(u)));
        }

        // As the target side of (cp - 1, cp).
        if cp > 0 {
            self.entries.clear();
            for &a in &comp.members {
                let h = &self.athletes[a as usize].history;
                self.entries.push(h.get(cp - 1).map_or(HistoryEntry::Absent, |&s| decode(s)));
            }
            let mut touched_sources = Vec::new();
            let pair = &mut self.pairs[cp - 1];
            pair.graph.add_target(size);
            let added = pair.precursor.record_target(ordinal, self.entries.iter().copied());
            for i in added {
                let edge = pair.precursor.edges()[i];
                if pair.graph.relate(edge.source, ordinal, edge.weight, mu)?.is_some() {
                    touched_sources.push(edge.source);
                }
            }
            if let Some(tracker) = pair.tracker.as_mut() {
                tracker.refresh(&pair.graph, mu, &touched_sources, &[ordinal], &mut |u| out.push(EngineOutput::Pattern(u)));
            }
        }
        out.push(EngineOutput::GroupFinalized(id));
        Ok(())
    }

    /// Declares that every athlete has passed control point `cp` (the broom
    /// wagon went through): its active component is finished.
    pub fn close_control_point(&mut self, cp: u32, out: &mut Vec<EngineOutput>) -> Result<(), StreamError> {
        if self.finalized {
            return Err(StreamError::Finalized);
        }
        if let Some(limit) = self.cp_limit {
            if cp >= limit {
                return Err(StreamError::ControlPointOutOfRange { cp, limit });
            }
        }
        let c = cp as usize;
        self.ensure_cp(c);
        if self.cps[c].closed {
            return Ok(());
        }
        self.finish_active(c, out)?;
        self.cps[c].closed = true;
        for pair in [c.checked_sub(1), Some(c)].into_iter().flatten() {
            let both = self.cps.get(pair + 1).is_some_and(|n| n.closed) && self.cps[pair].closed;
            if both {
                self.pairs[pair].graph.mark_complete();
            }
        }
        Ok(())
    }

    /// End of race: finishes every active component and completes all graphs.
    pub fn finalize_all(&mut self) -> Result<Vec<EngineOutput>, StreamError> {
        let mut out = Vec::new();
        if self.finalized {
            return Ok(out);
        }
        for cp in 0..self.cps.len() as u32 {
            self.close_control_point(cp, &mut out)?;
        }
        // the last control point has no successor to relate to
        if let Some(tracker) = self.pairs.last_mut().and_then(|p| p.tracker.as_mut()) {
            tracker.withdraw_all(&mut |u| out.push(EngineOutput::Pattern(u)));
        }
        self.finalized = true;
        Ok(out)
    }

    fn athlete(&self, id: AthleteId) -> Result<&Athlete, QueryError> {
        self.index.get(&id).map(|&a| &self.athletes[a as usize]).ok_or(QueryError::UnknownAthlete(id))
    }

    /// Entries for control points `0..=last crossed`.
    pub fn group_history(&self, id: AthleteId) -> Result<Vec<HistoryEntry>, QueryError> {
        Ok(self.athlete(id)?.history.iter().map(|&s| decode(s)).collect())
    }

    pub fn history_at(&self, id: AthleteId, cp: u32) -> Result<HistoryEntry, QueryError> {
        Ok(self.athlete(id)?.history.get(cp as usize).map_or(HistoryEntry::Absent, |&s| decode(s)))
    }

    pub fn groups_at(&self, cp: u32) -> Result<&[Group], QueryError> {
        self.cps.get(cp as usize).map(|c| c.groups.as_slice()).ok_or(QueryError::ControlPointOutOfRange(cp))
    }

    pub fn group(&self, id: GroupId) -> Option<&Group> {
        self.cps.get(id.cp as usize)?.groups.get(id.ordinal as usize)
    }

    /// Finished components in crossing order, then the active one.
    pub fn components_at(&self, cp: u32) -> Result<Vec<Component>, QueryError> {
        let state = self.cps.get(cp as usize).ok_or(QueryError::ControlPointOutOfRange(cp))?;
        let mut out: Vec<Component> = state
            .finished
            .iter()
            .map(|f| Component {
                cp,
                members: match f.group {
                    Some(g) => state.groups[g as usize].members.clone(),
                    None => f.members.clone(),
                },
                t_first: f.t_first,
                t_last: f.t_last,
                state: ComponentState::Finished,
                group: f.group.map(|g| GroupId::new(cp, g)),
            })
            .collect();
        if let Some(a) = &state.active {
            out.push(Component {
                cp,
                members: a.members.iter().map(|&i| self.athletes[i as usize].id).collect(),
                t_first: a.t_first,
                t_last: a.t_last,
                state: ComponentState::Active,
                group: None,
            });
        }
        Ok(out)
    }

    /// Number of components (finished plus active) at `cp`.
    pub fn component_count(&self, cp: u32) -> usize {
        self.cps.get(cp as usize).map_or(0, |c| c.finished.len() + c.active.is_some() as usize)
    }

    /// Accepted crossings of `cp`.
    pub fn crossings_at(&self, cp: u32) -> usize {
        self.cps.get(cp as usize).map_or(0, |c| c.crossings)
    }

    /// Evolution graph between `source_cp` and `source_cp + 1`.
    pub fn evolution_graph(&self, source_cp: u32) -> Option<&EvolutionGraph> {
        let c = source_cp as usize;
        (c + 1 < self.cps.len()).then(|| &self.pairs[c].graph)
    }

    /// All evolution graphs in control-point order.
    pub fn evolution_graphs(&self) -> impl Iterator<Item = &EvolutionGraph> + '_ {
        let n = self.cps.len().saturating_sub(1);
        self.pairs[..n].iter().map(|p| &p.graph)
    }

    pub fn precursor_graph(&self, source_cp: u32) -> Option<&PrecursorGraph> {
        let c = source_cp as usize;
        (c + 1 < self.cps.len()).then(|| &self.pairs[c].precursor)
    }

    /// Provisional patterns of a pair (online mode only).
    pub fn online_patterns(&self, source_cp: u32) -> Option<PatternSet> {
        let c = source_cp as usize;
        if c + 1 >= self.cps.len() {
            return None;
        }
        let pair = &self.pairs[c];
        pair.tracker.as_ref().map(|t| t.snapshot(&pair.graph))
    }
}
