//! Long-term patterns over the global graph: the concatenation of every
//! evolution graph of a race.
//!
//! Labels count edges. `lpS` follows strong edges, `lpF` forward edges and
//! `lpR` edges of either orientation, all swept in ascending control-point
//! order; `lpB` follows backward edges in a descending sweep.

use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::evolution::{EvolutionGraph, GroupId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GlobalError {
    #[error("expected the pair starting at control point {expected}, got {found}")]
    Gap { expected: u32, found: u32 },
    #[error("control point {cp} has {left} groups on one side and {right} on the other")]
    VertexMismatch { cp: u32, left: usize, right: usize },
}

/// Every group of a race as a vertex, with the edges of all evolution graphs.
#[derive(Debug, Clone, Default)]
pub struct GlobalGraph {
    counts: Vec<u32>,
    offsets: Vec<usize>,
    pairs: Vec<EvolutionGraph>,
}

/// Builds the global graph. The graphs must cover pairs `0, 1, 2, ...`
/// without gaps, and shared control points must agree on their group count.
pub fn build_global<'a, I>(graphs: I) -> Result<GlobalGraph, GlobalError>
where
    I: IntoIterator<Item = &'a EvolutionGraph>,
{
    let mut r = GlobalGraph::default();
    for g in graphs {
        r.push(g.clone())?;
    }
    Ok(r)
}

impl GlobalGraph {
    /// A one-control-point race.
    pub fn single(groups: u32) -> Self {
        GlobalGraph { counts: alloc::vec![groups], offsets: alloc::vec![0], pairs: Vec::new() }
    }

    /// Appends the next evolution graph.
    pub fn push(&mut self, graph: EvolutionGraph) -> Result<(), GlobalError> {
        let expected = self.pairs.len() as u32;
        if graph.source_cp() != expected {
            return Err(GlobalError::Gap { expected, found: graph.source_cp() });
        }
        let ns = graph.source_count();
        match self.counts.last() {
            Some(&c) if self.pairs.len() + 1 == self.counts.len() => {
                if c as usize != ns {
                    return Err(GlobalError::VertexMismatch { cp: expected, left: c as usize, right: ns });
                }
            }
            _ => {
                self.counts.clear();
                self.offsets.clear();
                self.counts.push(ns as u32);
                self.offsets.push(0);
            }
        }
        let next = self.offsets[self.offsets.len() - 1] + ns;
        self.counts.push(graph.target_count() as u32);
        self.offsets.push(next);
        self.pairs.push(graph);
        Ok(())
    }

    pub fn control_point_count(&self) -> usize {
        self.counts.len()
    }

    pub fn group_count(&self, cp: u32) -> usize {
        self.counts.get(cp as usize).map_or(0, |&c| c as usize)
    }

    pub fn vertex_count(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.pairs.iter().map(|g| g.edges().len()).sum()
    }

    pub fn pairs(&self) -> &[EvolutionGraph] {
        &self.pairs
    }

    /// Vertices in (cp, ordinal) order.
    pub fn vertices(&self) -> impl Iterator<Item = GroupId> + '_ {
        self.counts.iter().enumerate().flat_map(|(cp, &n)| (0..n).map(move |o| GroupId::new(cp as u32, o)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LongestKind {
    Surviving,
    TraceableForward,
    TraceableBackward,
    Related,
}

impl LongestKind {
    pub const ALL: [LongestKind; 4] =
        [LongestKind::Surviving, LongestKind::TraceableForward, LongestKind::TraceableBackward, LongestKind::Related];

    pub fn name(self) -> &'static str {
        match self {
            LongestKind::Surviving => "surviving",
            LongestKind::TraceableForward => "traceable-forward",
            LongestKind::TraceableBackward => "traceable-backward",
            LongestKind::Related => "related",
        }
    }

    fn admits(self, forward: bool, backward: bool) -> bool {
        match self {
            LongestKind::Surviving => forward && backward,
            LongestKind::TraceableForward => forward,
            LongestKind::TraceableBackward => backward,
            LongestKind::Related => forward || backward,
        }
    }
}

impl fmt::Display for LongestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Labels {
    pub lp_s: u32,
    pub lp_f: u32,
    pub lp_b: u32,
    pub lp_r: u32,
}

impl Labels {
    pub fn get(&self, kind: LongestKind) -> u32 {
        match kind {
            LongestKind::Surviving => self.lp_s,
            LongestKind::TraceableForward => self.lp_f,
            LongestKind::TraceableBackward => self.lp_b,
            LongestKind::Related => self.lp_r,
        }
    }
}

/// The four labels of every group, indexed like the global graph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LongTermLabels {
    offsets: Vec<usize>,
    counts: Vec<u32>,
    labels: Vec<Labels>,
}

impl LongTermLabels {
    fn zeroed(r: &GlobalGraph) -> Self {
        LongTermLabels { offsets: r.offsets.clone(), counts: r.counts.clone(), labels: alloc::vec![Labels::default(); r.vertex_count()] }
    }

    pub fn get(&self, g: GroupId) -> Option<Labels> {
        let n = *self.counts.get(g.cp as usize)?;
        (g.ordinal < n).then(|| self.labels[self.offsets[g.cp as usize] + g.ordinal as usize])
    }

    /// `(group, labels)` in (cp, ordinal) order.
    pub fn iter(&self) -> impl Iterator<Item = (GroupId, Labels)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .flat_map(move |(cp, &n)| (0..n).map(move |o| (GroupId::new(cp as u32, o), self.labels[self.offsets[cp] + o as usize])))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn max(&self, kind: LongestKind) -> Option<u32> {
        self.labels.iter().map(|l| l.get(kind)).max()
    }

    fn forward_step(&mut self, pair: &EvolutionGraph) {
        let cp = pair.source_cp() as usize;
        let (src, dst) = (self.offsets[cp], self.offsets[cp + 1]);
        for e in pair.edges() {
            let s = self.labels[src + e.source as usize];
            let t = &mut self.labels[dst + e.target as usize];
            if e.forward && e.backward {
                t.lp_s = s.lp_s + 1;
            }
            if e.forward {
                t.lp_f = t.lp_f.max(s.lp_f + 1);
            }
            t.lp_r = t.lp_r.max(s.lp_r + 1);
        }
    }

    /// Extends forward labels after `r` gained pairs since these labels were
    /// computed. `lpB` is left untouched; rerun the backward sweep.
    pub fn extend_forward(&mut self, r: &GlobalGraph) {
        let done = self.counts.len().saturating_sub(1);
        self.offsets = r.offsets.clone();
        self.counts = r.counts.clone();
        self.labels.resize(r.vertex_count(), Labels::default());
        for pair in &r.pairs[done.min(r.pairs.len())..] {
            self.forward_step(pair);
        }
    }
}

/// Ascending sweep computing `lpS`, `lpF` and `lpR`; `lpB` stays zero.
pub fn sweep_forward_labels(r: &GlobalGraph) -> LongTermLabels {
    let mut labels = LongTermLabels::zeroed(r);
    for pair in &r.pairs {
        labels.forward_step(pair);
    }
    labels
}

/// Descending sweep over backward edges, overwriting `lpB`.
pub fn sweep_backward_labels(r: &GlobalGraph, labels: &mut LongTermLabels) {
    for l in &mut labels.labels {
        l.lp_b = 0;
    }
    for pair in r.pairs.iter().rev() {
        let cp = pair.source_cp() as usize;
        let (src, dst) = (r.offsets[cp], r.offsets[cp + 1]);
        for e in pair.edges().iter().filter(|e| e.backward) {
            let from = labels.labels[dst + e.target as usize].lp_b;
            let s = &mut labels.labels[src + e.source as usize];
            s.lp_b = s.lp_b.max(from + 1);
        }
    }
}

/// Both sweeps.
pub fn compute_labels(r: &GlobalGraph) -> LongTermLabels {
    let mut labels = sweep_forward_labels(r);
    sweep_backward_labels(r, &mut labels);
    labels
}

/// The longest occurrence of one long-term pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LongestResult {
    pub kind: LongestKind,
    pub length_edges: u32,
    /// Groups along the path in the order it is traced: ascending control
    /// points, except descending for traceable-backward.
    pub witness: Vec<GroupId>,
}

impl LongestResult {
    pub fn length_cps(&self) -> u32 {
        self.length_edges + 1
    }
}

impl fmt::Display for LongestResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} cps ({} edges) [", self.kind, self.length_cps(), self.length_edges)?;
        for (i, g) in self.witness.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{g}")?;
        }
        f.write_str("]")
    }
}

/// The group with the largest label of `kind` (earliest on ties) and a path
/// realizing it. `None` when the race has no groups.
pub fn longest(r: &GlobalGraph, labels: &LongTermLabels, kind: LongestKind) -> Option<LongestResult> {
    let mut best: Option<(GroupId, u32)> = None;
    for (g, l) in labels.iter() {
        let v = l.get(kind);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((g, v));
        }
    }
    let (end, length) = best?;
    let mut witness = alloc::vec![end];
    let mut cur = end;
    let mut remaining = length;
    while remaining > 0 {
        let prev = predecessor(r, labels, kind, cur, remaining - 1).expect("labels realized by a path");
        witness.push(prev);
        cur = prev;
        remaining -= 1;
    }
    witness.reverse();
    Some(LongestResult { kind, length_edges: length, witness })
}

// The neighbour the sweep propagated from, carrying label `want`.
fn predecessor(r: &GlobalGraph, labels: &LongTermLabels, kind: LongestKind, g: GroupId, want: u32) -> Option<GroupId> {
    let label = |x: GroupId| labels.get(x).map(|l| l.get(kind));
    if kind == LongestKind::TraceableBackward {
        let pair = r.pairs.get(g.cp as usize)?;
        let mut from: Vec<u32> = pair.backward_in(g.ordinal).map(|e| e.target).collect();
        from.sort_unstable();
        return from.into_iter().map(|t| GroupId::new(g.cp + 1, t)).find(|&x| label(x) == Some(want));
    }
    let pair = r.pairs.get(g.cp.checked_sub(1)? as usize)?;
    let mut from: Vec<u32> =
        pair.edges().iter().filter(|e| e.target == g.ordinal && kind.admits(e.forward, e.backward)).map(|e| e.source).collect();
    from.sort_unstable();
    from.into_iter().map(|s| GroupId::new(g.cp - 1, s)).find(|&x| label(x) == Some(want))
}

/// All four longest results, in [`LongestKind::ALL`] order.
pub fn longest_all(r: &GlobalGraph, labels: &LongTermLabels) -> Vec<LongestResult> {
    LongestKind::ALL.iter().filter_map(|&k| longest(r, labels, k)).collect()
}
