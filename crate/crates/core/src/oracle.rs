//! Brute-force reference implementations.
//!
//! Each function recomputes a result from first principles (sorted scans,
//! materialized set arithmetic, exhaustive path enumeration) without sharing
//! code paths with the streaming engine, the classifier or the sweeps.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use thiserror::Error;

use crate::evolution::GroupId;
use crate::longterm::{GlobalGraph, Labels, LongestKind};
use crate::patterns::{coverage_diagnostics, Diagnostic, Pattern, PatternRecord};
use crate::relation::{inclusion, AthleteId, AthleteSet, Event, Mu, Params, Timestamp};

/// A group found by the reference scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleGroup {
    /// Sorted by athlete id.
    pub members: Vec<AthleteId>,
    pub t_first: Timestamp,
    pub t_last: Timestamp,
}

impl OracleGroup {
    pub fn member_set(&self) -> AthleteSet {
        self.members.iter().copied().collect()
    }
}

/// Groups per control point in time order. Expects a clean event set: no
/// duplicate crossings and no out-of-order crossings per athlete.
pub fn oracle_groups(events: &[Event], params: &Params) -> Vec<Vec<OracleGroup>> {
    let cps = events.iter().map(|e| e.cp as usize + 1).max().unwrap_or(0);
    let mut by_cp: Vec<Vec<(Timestamp, AthleteId)>> = alloc::vec![Vec::new(); cps];
    for e in events {
        by_cp[e.cp as usize].push((e.time, e.athlete));
    }
    by_cp
        .into_iter()
        .map(|mut crossings| {
            crossings.sort();
            let mut groups = Vec::new();
            let mut start = 0;
            for i in 1..=crossings.len() {
                let breaks = i == crossings.len() || crossings[i].0 .0 - crossings[i - 1].0 .0 > params.epsilon;
                if breaks {
                    let run = &crossings[start..i];
                    if run.len() >= params.m {
                        let mut members: Vec<AthleteId> = run.iter().map(|c| c.1).collect();
                        members.sort();
                        groups.push(OracleGroup { members, t_first: run[0].0, t_last: run[run.len() - 1].0 });
                    }
                    start = i;
                }
            }
            groups
        })
        .collect()
}

/// Result of evaluating every pattern definition literally.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OraclePatterns {
    /// The literal matches the two-pass detection procedure reports.
    pub records: Vec<PatternRecord>,
    /// Literal matches the procedure does not report: merges or splits
    /// already described by a survival, and source-side shrinking patterns
    /// whose every target has a forward in-edge.
    pub suppressed: Vec<PatternRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Checks every pattern definition on two lists of disjoint groups.
pub fn oracle_patterns(source_cp: u32, sources: &[AthleteSet], targets: &[AthleteSet], mu: Mu) -> OraclePatterns {
    let rel = |a: &AthleteSet, b: &AthleteSet| inclusion(a, b).map(|i| i.meets(mu)).unwrap_or(false);
    let ns = sources.len() as u32;
    let nt = targets.len() as u32;
    // fwd[s][t]: S ~ S'; bwd[s][t]: S' ~ S
    let fwd: Vec<Vec<bool>> = sources.iter().map(|s| targets.iter().map(|t| rel(s, t)).collect()).collect();
    let bwd: Vec<Vec<bool>> = sources.iter().map(|s| targets.iter().map(|t| rel(t, s)).collect()).collect();
    let union = |sets: &mut dyn Iterator<Item = &AthleteSet>| -> AthleteSet { sets.flat_map(|s| s.iter().copied()).collect() };

    let mut literal: BTreeSet<Pattern> = BTreeSet::new();
    for t in 0..nt {
        let tu = t as usize;
        let related_any = (0..ns).any(|s| fwd[s as usize][tu] || bwd[s as usize][tu]);
        if !related_any {
            literal.insert(Pattern::Appears { target: t });
        }
        let into: Vec<u32> = (0..ns).filter(|&s| fwd[s as usize][tu]).collect();
        if into.len() == 1 {
            let s = into[0];
            if !bwd[s as usize][tu] {
                literal.insert(Pattern::Expands { source: s, target: t });
            }
        }
        if into.len() >= 2 {
            let u = union(&mut into.iter().map(|&s| &sources[s as usize]));
            if rel(&targets[tu], &u) {
                literal.insert(Pattern::Merges { sources: into.clone(), target: t });
            } else {
                literal.insert(Pattern::Coheres { sources: into.clone(), target: t });
            }
        }
    }
    for s in 0..ns {
        let su = s as usize;
        if !(0..nt).any(|t| fwd[su][t as usize] || bwd[su][t as usize]) {
            literal.insert(Pattern::Disappears { source: s });
        }
        for t in 0..nt {
            if fwd[su][t as usize] && bwd[su][t as usize] {
                let absorbed = (0..ns).filter(|&k| k != s && fwd[k as usize][t as usize]).collect();
                let spawned = (0..nt).filter(|&l| l != t && bwd[su][l as usize]).collect();
                literal.insert(Pattern::Survives { source: s, target: t, absorbed, spawned });
            }
        }
        let from: Vec<u32> = (0..nt).filter(|&t| bwd[su][t as usize]).collect();
        if from.len() == 1 {
            let t = from[0];
            if !fwd[su][t as usize] {
                literal.insert(Pattern::Shrinks { source: s, target: t });
            }
        }
        if from.len() >= 2 {
            let u = union(&mut from.iter().map(|&t| &targets[t as usize]));
            if rel(&sources[su], &u) {
                literal.insert(Pattern::Splits { source: s, targets: from.clone() });
            } else {
                literal.insert(Pattern::Disbands { source: s, targets: from.clone() });
            }
        }
    }

    let surviving_sources: BTreeSet<u32> =
        literal.iter().filter_map(|p| if let Pattern::Survives { source, .. } = p { Some(*source) } else { None }).collect();
    let surviving_targets: BTreeSet<u32> =
        literal.iter().filter_map(|p| if let Pattern::Survives { target, .. } = p { Some(*target) } else { None }).collect();
    let has_forward_in = |t: u32| (0..ns).any(|s| fwd[s as usize][t as usize]);

    let mut out = OraclePatterns::default();
    for p in literal {
        let keep = match &p {
            Pattern::Merges { target, .. } => !surviving_targets.contains(target),
            Pattern::Splits { source, targets } => !surviving_sources.contains(source) && targets.iter().any(|&t| !has_forward_in(t)),
            Pattern::Disbands { targets, .. } => targets.iter().any(|&t| !has_forward_in(t)),
            Pattern::Shrinks { target, .. } => !has_forward_in(*target),
            _ => true,
        };
        let record = PatternRecord { source_cp, pattern: p };
        if keep {
            out.records.push(record);
        } else {
            out.suppressed.push(record);
        }
    }
    out.diagnostics = coverage_diagnostics(source_cp, sources.len(), targets.len(), &out.records);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{groups} groups exceed the limit of {limit}")]
    TooManyGroups { groups: usize, limit: usize },
    #[error("path enumeration exceeded {0} steps")]
    BudgetExceeded(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_groups: usize,
    pub max_steps: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits { max_groups: 30, max_steps: 1 << 22 }
    }
}

/// Longest admissible path ending at every group, for each of the four
/// kinds, by enumerating every path from every start group.
pub fn oracle_longterm(r: &GlobalGraph, limits: OracleLimits) -> Result<Vec<(GroupId, Labels)>, OracleError> {
    let groups: Vec<GroupId> = r.vertices().collect();
    if groups.len() > limits.max_groups {
        return Err(OracleError::TooManyGroups { groups: groups.len(), limit: limits.max_groups });
    }
    // (from, to, forward, backward) with from at cp c and to at cp c + 1
    let mut next: BTreeMap<GroupId, Vec<(GroupId, bool, bool)>> = BTreeMap::new();
    let mut prev: BTreeMap<GroupId, Vec<(GroupId, bool, bool)>> = BTreeMap::new();
    for pair in r.pairs() {
        let (x, y) = (pair.source_cp(), pair.target_cp());
        for e in pair.edges() {
            let (a, b) = (GroupId::new(x, e.source), GroupId::new(y, e.target));
            next.entry(a).or_default().push((b, e.forward, e.backward));
            prev.entry(b).or_default().push((a, e.forward, e.backward));
        }
    }
    let mut best: BTreeMap<GroupId, Labels> = groups.iter().map(|&g| (g, Labels::default())).collect();
    let mut steps = 0u64;
    for kind in LongestKind::ALL {
        // backward paths run from later to earlier control points
        let adj = if kind == LongestKind::TraceableBackward { &prev } else { &next };
        let admits = |f: bool, b: bool| match kind {
            LongestKind::Surviving => f && b,
            LongestKind::TraceableForward => f,
            LongestKind::TraceableBackward => b,
            LongestKind::Related => f || b,
        };
        let mut stack: Vec<(GroupId, u32)> = Vec::new();
        for &start in &groups {
            stack.push((start, 0));
            while let Some((g, len)) = stack.pop() {
                steps += 1;
                if steps > limits.max_steps {
                    return Err(OracleError::BudgetExceeded(limits.max_steps));
                }
                let l = best.get_mut(&g).expect("vertex");
                let slot = match kind {
                    LongestKind::Surviving => &mut l.lp_s,
                    LongestKind::TraceableForward => &mut l.lp_f,
                    LongestKind::TraceableBackward => &mut l.lp_b,
                    LongestKind::Related => &mut l.lp_r,
                };
                *slot = (*slot).max(len);
                for &(h, f, b) in adj.get(&g).map(Vec::as_slice).unwrap_or(&[]) {
                    if admits(f, b) {
                        stack.push((h, len + 1));
                    }
                }
            }
        }
    }
    Ok(best.into_iter().collect())
}
