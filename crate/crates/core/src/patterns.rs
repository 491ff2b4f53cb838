//! Classification of evolution patterns from an evolution graph.
//!
//! Each target group is classified by degree checks in a fixed branch order;
//! the only source-side rule is `Disappears`. Union tests use summed edge
//! weights, exact because groups at one control point are disjoint.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::evolution::{EvolutionGraph, GroupId, RelationEdge};
use crate::relation::Mu;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PatternKind {
    Appears,
    Disappears,
    Survives,
    Expands,
    Shrinks,
    Merges,
    Splits,
    Coheres,
    Disbands,
}

impl PatternKind {
    pub const ALL: [PatternKind; 9] = [
        PatternKind::Appears,
        PatternKind::Disappears,
        PatternKind::Survives,
        PatternKind::Expands,
        PatternKind::Shrinks,
        PatternKind::Merges,
        PatternKind::Splits,
        PatternKind::Coheres,
        PatternKind::Disbands,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PatternKind::Appears => "appears",
            PatternKind::Disappears => "disappears",
            PatternKind::Survives => "survives",
            PatternKind::Expands => "expands",
            PatternKind::Shrinks => "shrinks",
            PatternKind::Merges => "merges",
            PatternKind::Splits => "splits",
            PatternKind::Coheres => "coheres",
            PatternKind::Disbands => "disbands",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        PatternKind::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One evolution pattern; group references are ordinals at the source
/// (`x`) or target (`x'`) control point of the pair. Lists are ascending.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pattern {
    Appears { target: u32 },
    Disappears { source: u32 },
    Survives { source: u32, target: u32, absorbed: Vec<u32>, spawned: Vec<u32> },
    Expands { source: u32, target: u32 },
    Shrinks { source: u32, target: u32 },
    Merges { sources: Vec<u32>, target: u32 },
    Splits { source: u32, targets: Vec<u32> },
    Coheres { sources: Vec<u32>, target: u32 },
    Disbands { source: u32, targets: Vec<u32> },
}

impl Pattern {
    pub fn kind(&self) -> PatternKind {
        match self {
            Pattern::Appears { .. } => PatternKind::Appears,
            Pattern::Disappears { .. } => PatternKind::Disappears,
            Pattern::Survives { .. } => PatternKind::Survives,
            Pattern::Expands { .. } => PatternKind::Expands,
            Pattern::Shrinks { .. } => PatternKind::Shrinks,
            Pattern::Merges { .. } => PatternKind::Merges,
            Pattern::Splits { .. } => PatternKind::Splits,
            Pattern::Coheres { .. } => PatternKind::Coheres,
            Pattern::Disbands { .. } => PatternKind::Disbands,
        }
    }

    /// Every source-side group taking part, ascending.
    pub fn sources(&self) -> Vec<u32> {
        let mut v = match self {
            Pattern::Appears { .. } => Vec::new(),
            Pattern::Disappears { source }
            | Pattern::Expands { source, .. }
            | Pattern::Shrinks { source, .. }
            | Pattern::Splits { source, .. }
            | Pattern::Disbands { source, .. } => alloc::vec![*source],
            Pattern::Survives { source, absorbed, .. } => {
                let mut v = absorbed.clone();
                v.push(*source);
                v
            }
            Pattern::Merges { sources, .. } | Pattern::Coheres { sources, .. } => sources.clone(),
        };
        v.sort_unstable();
        v
    }

    /// Every target-side group taking part, ascending.
    pub fn targets(&self) -> Vec<u32> {
        let mut v = match self {
            Pattern::Disappears { .. } => Vec::new(),
            Pattern::Appears { target }
            | Pattern::Expands { target, .. }
            | Pattern::Shrinks { target, .. }
            | Pattern::Merges { target, .. }
            | Pattern::Coheres { target, .. } => alloc::vec![*target],
            Pattern::Survives { target, spawned, .. } => {
                let mut v = spawned.clone();
                v.push(*target);
                v
            }
            Pattern::Splits { targets, .. } | Pattern::Disbands { targets, .. } => targets.clone(),
        };
        v.sort_unstable();
        v
    }
}

/// A classified pattern between control points `source_cp` and `source_cp + 1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatternRecord {
    pub source_cp: u32,
    pub pattern: Pattern,
}

impl PatternRecord {
    pub fn kind(&self) -> PatternKind {
        self.pattern.kind()
    }

    pub fn source_groups(&self) -> Vec<GroupId> {
        self.pattern.sources().into_iter().map(|o| GroupId::new(self.source_cp, o)).collect()
    }

    pub fn target_groups(&self) -> Vec<GroupId> {
        self.pattern.targets().into_iter().map(|o| GroupId::new(self.source_cp + 1, o)).collect()
    }
}

fn write_ids(f: &mut fmt::Formatter<'_>, cp: u32, ids: &[u32]) -> fmt::Result {
    f.write_str("[")?;
    for (i, o) in ids.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{}", GroupId::new(cp, *o))?;
    }
    f.write_str("]")
}

impl fmt::Display for PatternRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (x, y) = (self.source_cp, self.source_cp + 1);
        write!(f, "{} ", self.kind())?;
        match &self.pattern {
            Pattern::Appears { target } => write!(f, "{}", GroupId::new(y, *target)),
            Pattern::Disappears { source } => write!(f, "{}", GroupId::new(x, *source)),
            Pattern::Expands { source, target } | Pattern::Shrinks { source, target } => {
                write!(f, "{} -> {}", GroupId::new(x, *source), GroupId::new(y, *target))
            }
            Pattern::Survives { source, target, absorbed, spawned } => {
                write!(f, "{} -> {}", GroupId::new(x, *source), GroupId::new(y, *target))?;
                if !absorbed.is_empty() {
                    f.write_str(" absorbs ")?;
                    write_ids(f, x, absorbed)?;
                }
                if !spawned.is_empty() {
                    f.write_str(" spawns ")?;
                    write_ids(f, y, spawned)?;
                }
                Ok(())
            }
            Pattern::Merges { sources, target } | Pattern::Coheres { sources, target } => {
                write_ids(f, x, sources)?;
                write!(f, " -> {}", GroupId::new(y, *target))
            }
            Pattern::Splits { source, targets } | Pattern::Disbands { source, targets } => {
                write!(f, "{} -> ", GroupId::new(x, *source))?;
                write_ids(f, y, targets)
            }
        }
    }
}

/// A group that takes part in zero or several records of one pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Diagnostic {
    pub group: GroupId,
    pub kind: DiagnosticKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DiagnosticKind {
    Unclassified,
    Overlap { records: usize },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DiagnosticKind::Unclassified => write!(f, "unclassified {}", self.group),
            DiagnosticKind::Overlap { records } => write!(f, "overlap {} in {records} records", self.group),
        }
    }
}

/// All patterns of one control-point pair.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PatternSet {
    pub source_cp: u32,
    /// Sorted and deduplicated.
    pub records: Vec<PatternRecord>,
    /// False while the evolution graph may still change.
    pub finalized: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl PatternSet {
    pub fn count(&self, kind: PatternKind) -> usize {
        self.records.iter().filter(|r| r.kind() == kind).count()
    }

    /// Counts indexed by [`PatternKind::index`].
    pub fn counts(&self) -> [usize; 9] {
        let mut c = [0; 9];
        for r in &self.records {
            c[r.kind().index()] += 1;
        }
        c
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("evolution graph {source_cp}->{} is not complete", source_cp + 1)]
    Incomplete { source_cp: u32 },
    #[error("unknown group {0}")]
    UnknownGroup(GroupId),
}

/// Whether classification needs a complete graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Finalized,
    Online,
}

fn require(graph: &EvolutionGraph, mode: Mode) -> Result<(), PatternError> {
    if mode == Mode::Finalized && !graph.is_complete() {
        return Err(PatternError::Incomplete { source_cp: graph.source_cp() });
    }
    Ok(())
}

/// Classifies target group `target` of `graph`.
pub fn classify_target(graph: &EvolutionGraph, target: u32, mu: Mu, mode: Mode) -> Result<PatternRecord, PatternError> {
    require(graph, mode)?;
    if target as usize >= graph.target_count() {
        return Err(PatternError::UnknownGroup(GroupId::new(graph.target_cp(), target)));
    }
    Ok(PatternRecord { source_cp: graph.source_cp(), pattern: target_pattern(graph, target, mu) })
}

/// `Disappears` for an isolated source group, nothing otherwise.
pub fn classify_source(graph: &EvolutionGraph, source: u32, mode: Mode) -> Result<Option<PatternRecord>, PatternError> {
    require(graph, mode)?;
    if source as usize >= graph.source_count() {
        return Err(PatternError::UnknownGroup(GroupId::new(graph.source_cp(), source)));
    }
    Ok(source_pattern(graph, source).map(|pattern| PatternRecord { source_cp: graph.source_cp(), pattern }))
}

pub(crate) fn source_pattern(graph: &EvolutionGraph, source: u32) -> Option<Pattern> {
    let isolated = graph.forward_out(source).is_none() && graph.backward_in(source).next().is_none();
    isolated.then_some(Pattern::Disappears { source })
}

pub(crate) fn target_pattern(graph: &EvolutionGraph, target: u32, mu: Mu) -> Pattern {
    let mut f_in = graph.forward_in(target);
    let first = f_in.next();
    let f_in_count = first.is_some() as usize + f_in.count();
    let b_out = graph.backward_out(target);
    match (first, b_out) {
        (None, None) => Pattern::Appears { target },
        (None, Some(e)) => shrinking_source(graph, e.source, mu),
        (Some(_), Some(e)) if e.forward => survives(graph, e.source, target),
        (Some(e), _) if f_in_count == 1 => Pattern::Expands { source: e.source, target },
        (Some(_), _) => {
            let (sources, sum) = collect(graph.forward_in(target), |e| e.source);
            if mu.admits(sum, u64::from(graph.target_size(target))) {
                Pattern::Merges { sources, target }
            } else {
                Pattern::Coheres { sources, target }
            }
        }
    }
}

/// Pattern of a source reached only by backward edges from targets without
/// forward in-edges. A source that survives as another target reports the
/// survival with its spawned groups instead of a split.
fn shrinking_source(graph: &EvolutionGraph, source: u32, mu: Mu) -> Pattern {
    if let Some(e) = graph.strong_partner_of_source(source) {
        return survives(graph, source, e.target);
    }
    let (targets, sum) = collect(graph.backward_in(source), |e| e.target);
    if targets.len() == 1 {
        return Pattern::Shrinks { source, target: targets[0] };
    }
    if mu.admits(sum, u64::from(graph.source_size(source))) {
        Pattern::Splits { source, targets }
    } else {
        Pattern::Disbands { source, targets }
    }
}

fn survives(graph: &EvolutionGraph, source: u32, target: u32) -> Pattern {
    let mut absorbed: Vec<u32> = graph.forward_in(target).map(|e| e.source).filter(|&s| s != source).collect();
    let mut spawned: Vec<u32> = graph.backward_in(source).map(|e| e.target).filter(|&t| t != target).collect();
    absorbed.sort_unstable();
    spawned.sort_unstable();
    Pattern::Survives { source, target, absorbed, spawned }
}

fn collect<'a>(edges: impl Iterator<Item = &'a RelationEdge>, end: impl Fn(&RelationEdge) -> u32) -> (Vec<u32>, u64) {
    let mut sum = 0u64;
    let mut ids: Vec<u32> = edges
        .map(|e| {
            sum += u64::from(e.weight);
            end(e)
        })
        .collect();
    ids.sort_unstable();
    (ids, sum)
}

/// Every pattern of a complete evolution graph.
pub fn detect_patterns(graph: &EvolutionGraph, mu: Mu) -> Result<PatternSet, PatternError> {
    require(graph, Mode::Finalized)?;
    Ok(collect_patterns(graph, mu))
}

/// Classifies every group of `graph` as it currently stands.
pub fn collect_patterns(graph: &EvolutionGraph, mu: Mu) -> PatternSet {
    let mut records = BTreeSet::new();
    let cp = graph.source_cp();
    for t in 0..graph.target_count() as u32 {
        records.insert(PatternRecord { source_cp: cp, pattern: target_pattern(graph, t, mu) });
    }
    for s in 0..graph.source_count() as u32 {
        if let Some(pattern) = source_pattern(graph, s) {
            records.insert(PatternRecord { source_cp: cp, pattern });
        }
    }
    let records: Vec<PatternRecord> = records.into_iter().collect();
    let diagnostics = coverage_diagnostics(cp, graph.source_count(), graph.target_count(), &records);
    PatternSet { source_cp: cp, records, finalized: graph.is_complete(), diagnostics }
}

/// Groups taking part in a number of records other than one.
pub fn coverage_diagnostics(source_cp: u32, source_count: usize, target_count: usize, records: &[PatternRecord]) -> Vec<Diagnostic> {
    let mut src = alloc::vec![0usize; source_count];
    let mut tgt = alloc::vec![0usize; target_count];
    for r in records {
        for s in r.pattern.sources() {
            src[s as usize] += 1;
        }
        for t in r.pattern.targets() {
            tgt[t as usize] += 1;
        }
    }
    let diag = |cp: u32, counts: &[usize]| -> Vec<Diagnostic> {
        counts
            .iter()
            .enumerate()
            .filter(|(_, &n)| n != 1)
            .map(|(o, &n)| Diagnostic {
                group: GroupId::new(cp, o as u32),
                kind: if n == 0 { DiagnosticKind::Unclassified } else { DiagnosticKind::Overlap { records: n } },
            })
            .collect()
    };
    let mut out = diag(source_cp, &src);
    out.extend(diag(source_cp + 1, &tgt));
    out
}

/// Whether `group` touches a crossed edge: a one-way backward edge whose
/// target also has a forward in-edge, or a one-way forward edge whose source
/// also has a backward in-edge. Only such groups can end up unclassified or
/// in two records.
pub fn in_precedence_corner(graph: &EvolutionGraph, group: GroupId) -> bool {
    let crossed = |e: &RelationEdge| {
        (e.backward && !e.forward && graph.forward_in(e.target).next().is_some())
            || (e.forward && !e.backward && graph.backward_in(e.source).next().is_some())
    };
    if group.cp == graph.source_cp() && (group.ordinal as usize) < graph.source_count() {
        graph.forward_out(group.ordinal).into_iter().chain(graph.backward_in(group.ordinal)).any(crossed)
    } else if group.cp == graph.target_cp() && (group.ordinal as usize) < graph.target_count() {
        graph.backward_out(group.ordinal).into_iter().chain(graph.forward_in(group.ordinal)).any(crossed)
    } else {
        false
    }
}
