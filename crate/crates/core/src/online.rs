//! On-the-fly pattern reporting over partially built evolution graphs.
//!
//! Each target owns the record its classification yields and each isolated
//! source owns a `Disappears`; records shared by several owners are
//! reference-counted so a record is reported once and withdrawn once.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::evolution::EvolutionGraph;
use crate::patterns::{coverage_diagnostics, source_pattern, target_pattern, PatternRecord, PatternSet};
use crate::relation::Mu;

/// A change to the provisional pattern set of one pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternUpdate {
    Reported(PatternRecord),
    Withdrawn(PatternRecord),
}

#[derive(Debug, Clone, Default)]
pub struct PairTracker {
    source_cp: u32,
    by_target: Vec<Option<PatternRecord>>,
    by_source: Vec<Option<PatternRecord>>,
    live: BTreeMap<PatternRecord, u32>,
}

impl PairTracker {
    pub fn new(source_cp: u32) -> Self {
        PairTracker { source_cp, ..Default::default() }
    }

    /// Re-evaluates every record that may depend on the given vertices.
    pub fn refresh(&mut self, graph: &EvolutionGraph, mu: Mu, sources: &[u32], targets: &[u32], out: &mut dyn FnMut(PatternUpdate)) {
        self.by_target.resize(graph.target_count(), None);
        self.by_source.resize(graph.source_count(), None);
        // A target's record reads edges up to two hops away: its own, those
        // of the source it shrinks from, and those of that source's partner.
        let near_targets = |s: u32, into: &mut BTreeSet<u32>| {
            into.extend(graph.forward_out(s).map(|e| e.target));
            into.extend(graph.backward_in(s).map(|e| e.target));
        };
        let mut affected: BTreeSet<u32> = targets.iter().copied().collect();
        for &s in sources {
            near_targets(s, &mut affected);
        }
        let mut hop: BTreeSet<u32> = sources.iter().copied().collect();
        for &t in &affected {
            hop.extend(graph.forward_in(t).map(|e| e.source));
            hop.extend(graph.backward_out(t).map(|e| e.source));
        }
        for &s in &hop {
            near_targets(s, &mut affected);
        }
        for t in affected {
            let record = PatternRecord { source_cp: self.source_cp, pattern: target_pattern(graph, t, mu) };
            let old = self.by_target[t as usize].replace(record.clone());
            self.swap(old, Some(record), out);
        }
        for &s in sources {
            let record = source_pattern(graph, s).map(|pattern| PatternRecord { source_cp: self.source_cp, pattern });
            let old = core::mem::replace(&mut self.by_source[s as usize], record.clone());
            self.swap(old, record, out);
        }
    }

    fn swap(&mut self, old: Option<PatternRecord>, new: Option<PatternRecord>, out: &mut dyn FnMut(PatternUpdate)) {
        if old == new {
            return;
        }
        if let Some(new) = new {
            let n = self.live.entry(new.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                out(PatternUpdate::Reported(new));
            }
        }
        if let Some(old) = old {
            if let Some(n) = self.live.get_mut(&old) {
                *n -= 1;
                if *n == 0 {
                    self.live.remove(&old);
                    out(PatternUpdate::Withdrawn(old));
                }
            }
        }
    }

    /// Withdraws every live record, for a pair whose target control point
    /// turned out not to exist.
    pub fn withdraw_all(&mut self, out: &mut dyn FnMut(PatternUpdate)) {
        for (record, _) in core::mem::take(&mut self.live) {
            out(PatternUpdate::Withdrawn(record));
        }
        self.by_target.clear();
        self.by_source.clear();
    }

    /// Current records of this pair; `finalized` mirrors the graph.
    pub fn snapshot(&self, graph: &EvolutionGraph) -> PatternSet {
        let records: Vec<PatternRecord> = self.live.keys().cloned().collect();
        let diagnostics = coverage_diagnostics(self.source_cp, graph.source_count(), graph.target_count(), &records);
        PatternSet { source_cp: self.source_cp, records, finalized: graph.is_complete(), diagnostics }
    }
}

/// Provisional patterns for a growing evolution graph, driven directly.
pub fn classify_online(
    tracker: &mut PairTracker,
    graph: &EvolutionGraph,
    mu: Mu,
    trigger_sources: &[u32],
    trigger_targets: &[u32],
) -> (PatternSet, Vec<PatternUpdate>) {
    let mut updates = Vec::new();
    tracker.refresh(graph, mu, trigger_sources, trigger_targets, &mut |u| updates.push(u));
    (tracker.snapshot(graph), updates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::{collect_patterns, Pattern};
    use alloc::vec;

    #[test]
    fn split_reported_as_appears_until_source_finishes() {
        let mu = Mu::new(7, 10).unwrap();
        let mut graph = EvolutionGraph::new(0);
        let mut tracker = PairTracker::new(0);
        // Two target halves finish before their source group.
        let t0 = graph.add_target(10);
        let (set, ups) = classify_online(&mut tracker, &graph, mu, &[], &[t0]);
        assert_eq!(set.records[0].pattern, Pattern::Appears { target: 0 });
        assert_eq!(ups.len(), 1);
        let t1 = graph.add_target(10);
        let (set, _) = classify_online(&mut tracker, &graph, mu, &[], &[t1]);
        assert_eq!(set.count(crate::patterns::PatternKind::Appears), 2);
        assert!(!set.finalized);

        let s0 = graph.add_source(20);
        graph.relate(s0, t0, 10, mu).unwrap();
        graph.relate(s0, t1, 10, mu).unwrap();
        let (set, ups) = classify_online(&mut tracker, &graph, mu, &[s0], &[t0, t1]);
        assert_eq!(set.records, vec![PatternRecord { source_cp: 0, pattern: Pattern::Splits { source: 0, targets: vec![0, 1] } }]);
        assert_eq!(ups.iter().filter(|u| matches!(u, PatternUpdate::Withdrawn(_))).count(), 2);
        assert_eq!(ups.iter().filter(|u| matches!(u, PatternUpdate::Reported(_))).count(), 1);

        graph.mark_complete();
        let final_set = collect_patterns(&graph, mu);
        assert_eq!(tracker.snapshot(&graph), final_set);
    }

    #[test]
    fn isolated_source_reports_disappears_then_withdraws() {
        let mu = Mu::new(7, 10).unwrap();
        let mut graph = EvolutionGraph::new(0);
        let mut tracker = PairTracker::new(0);
        let s0 = graph.add_source(10);
        let (set, _) = classify_online(&mut tracker, &graph, mu, &[s0], &[]);
        assert_eq!(set.records[0].pattern, Pattern::Disappears { source: 0 });
        let t0 = graph.add_target(10);
        graph.relate(s0, t0, 10, mu).unwrap();
        let (set, _) = classify_online(&mut tracker, &graph, mu, &[s0], &[t0]);
        assert_eq!(set.records.len(), 1);
        assert_eq!(set.records[0].kind(), crate::patterns::PatternKind::Survives);
    }
}
