//! Precursor graphs (raw intersection counts) and evolution graphs (thresholded
//! weak relations) between the groups of two consecutive control points.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};
use core::ops::Range;

use thiserror::Error;

use crate::relation::Mu;

/// Identity of a group: control point plus ordinal in crossing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupId {
    pub cp: u32,
    pub ordinal: u32,
}

impl GroupId {
    pub const fn new(cp: u32, ordinal: u32) -> Self {
        GroupId { cp, ordinal }
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.cp, self.ordinal)
    }
}

/// Where an athlete stood at one control point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HistoryEntry {
    Group(u32),
    Outlier,
    /// Member of the still-active component of that control point.
    Pending,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvolutionError {
    #[error("group {0} would get a second forward edge")]
    ForwardOutDegree(GroupId),
    #[error("group {0} would get a second backward edge")]
    BackwardOutDegree(GroupId),
    #[error("unknown vertex {0}")]
    UnknownVertex(GroupId),
    #[error("edge {source_ordinal}->{target} already present")]
    DuplicateEdge { source_ordinal: u32, target: u32 },
    #[error("edge weight {weight} exceeds a group size")]
    WeightTooLarge { weight: u32 },
    #[error("an evolution edge needs at least one direction")]
    NoDirection,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Undirected intersection edge between two finalized groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrecursorEdge {
    pub source: u32,
    pub target: u32,
    pub weight: u32,
}

/// `P(x, x')`: intersection cardinalities between groups at `x` and `x'`,
/// plus tentative edges from groups at `x'` to the active component at `x`.
///
/// Edge weights are exact when created: a group at `x'` is finalized only
/// after all its members crossed `x`.
#[derive(Debug, Clone, Default)]
pub struct PrecursorGraph {
    source_cp: u32,
    edges: Vec<PrecursorEdge>,
    tentative: Vec<(u32, u32)>,
    scratch: Vec<u32>,
    touched: Vec<u32>,
}

impl PrecursorGraph {
    pub fn new(source_cp: u32) -> Self {
        PrecursorGraph { source_cp, ..Default::default() }
    }

    pub fn source_cp(&self) -> u32 {
        self.source_cp
    }

    pub fn edges(&self) -> &[PrecursorEdge] {
        &self.edges
    }

    /// Tentative edges as `(target ordinal, weight)`.
    pub fn tentative(&self) -> &[(u32, u32)] {
        &self.tentative
    }

    /// Records the newly finalized target group `target` given each member's
    /// entry at the source control point. Returns the range of ordinary edges
    /// added; members pending at the source add to one tentative edge.
    pub fn record_target<I>(&mut self, target: u32, entries: I) -> Range<usize>
    where
        I: IntoIterator<Item = HistoryEntry>,
    {
        let start = self.edges.len();
        let mut pending = 0u32;
        for entry in entries {
            match entry {
                HistoryEntry::Group(g) => {
                    let g = g as usize;
                    if g >= self.scratch.len() {
                        self.scratch.resize(g + 1, 0);
                    }
                    if self.scratch[g] == 0 {
                        self.touched.push(g as u32);
                    }
                    self.scratch[g] += 1;
                }
                HistoryEntry::Pending => pending += 1,
                HistoryEntry::Outlier | HistoryEntry::Absent => {}
            }
        }
        self.touched.sort_unstable();
        for &g in &self.touched {
            let weight = core::mem::take(&mut self.scratch[g as usize]);
            self.edges.push(PrecursorEdge { source: g, target, weight });
        }
        self.touched.clear();
        if pending > 0 {
            self.tentative.push((target, pending));
        }
        start..self.edges.len()
    }

    /// The active source component finished below the group threshold: its
    /// tentative edges are discarded. Returns how many were removed.
    pub fn delete_tentative(&mut self) -> usize {
        let n = self.tentative.len();
        self.tentative.clear();
        n
    }

    /// The active source component became group `source`: tentative edges turn
    /// into ordinary ones. Returns the range of edges added.
    pub fn confirm_tentative(&mut self, source: u32) -> Range<usize> {
        let start = self.edges.len();
        for (target, weight) in self.tentative.drain(..) {
            self.edges.push(PrecursorEdge { source, target, weight });
        }
        start..self.edges.len()
    }
}

/// A weak-relation edge of an evolution graph. A strong relation is a single
/// edge with both flags set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RelationEdge {
    pub source: u32,
    pub target: u32,
    pub weight: u32,
    /// `source ~ target`.
    pub forward: bool,
    /// `target ~ source`.
    pub backward: bool,
}

impl RelationEdge {
    pub fn is_strong(&self) -> bool {
        self.forward && self.backward
    }
}

#[derive(Debug, Clone, Default)]
struct Adjacency {
    out: Option<u32>,
    ins: Vec<u32>,
}

/// Degrees of one vertex. Counts that do not apply to the vertex's side are 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DegreeView {
    pub f_in: usize,
    pub f_out: usize,
    pub b_in: usize,
    pub b_out: usize,
}

/// `B(x, x')`: forward edges `S -> S'` for `S ~ S'`, backward edges
/// `S' -> S` for `S' ~ S`, each weighted `|S ∩ S'|`.
#[derive(Debug, Clone, Default)]
pub struct EvolutionGraph {
    source_cp: u32,
    source_sizes: Vec<u32>,
    target_sizes: Vec<u32>,
    edges: Vec<RelationEdge>,
    // out = forward edge, ins = backward edges
    source_adj: Vec<Adjacency>,
    // out = backward edge, ins = forward edges
    target_adj: Vec<Adjacency>,
    complete: bool,
}

impl EvolutionGraph {
    pub fn new(source_cp: u32) -> Self {
        EvolutionGraph { source_cp, ..Default::default() }
    }

    /// Graph over fixed vertex sets, marked complete.
    pub fn with_sizes(source_cp: u32, source_sizes: &[u32], target_sizes: &[u32]) -> Self {
        let mut g = EvolutionGraph::new(source_cp);
        for &s in source_sizes {
            g.add_source(s);
        }
        for &t in target_sizes {
            g.add_target(t);
        }
        g.complete = true;
        g
    }

    pub fn source_cp(&self) -> u32 {
        self.source_cp
    }

    pub fn target_cp(&self) -> u32 {
        self.source_cp + 1
    }

    pub fn add_source(&mut self, size: u32) -> u32 {
        self.source_sizes.push(size);
        self.source_adj.push(Adjacency::default());
        (self.source_sizes.len() - 1) as u32
    }

    pub fn add_target(&mut self, size: u32) -> u32 {
        self.target_sizes.push(size);
        self.target_adj.push(Adjacency::default());
        (self.target_sizes.len() - 1) as u32
    }

    pub fn source_count(&self) -> usize {
        self.source_sizes.len()
    }

    pub fn target_count(&self) -> usize {
        self.target_sizes.len()
    }

    pub fn source_size(&self, s: u32) -> u32 {
        self.source_sizes[s as usize]
    }

    pub fn target_size(&self, t: u32) -> u32 {
        self.target_sizes[t as usize]
    }

    pub fn source_sizes(&self) -> &[u32] {
        &self.source_sizes
    }

    pub fn target_sizes(&self) -> &[u32] {
        &self.target_sizes
    }

    /// Both control points have been closed, so no vertex or edge will be added.
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn mark_complete(&mut self) {
        self.complete = true;
    }

    pub fn edges(&self) -> &[RelationEdge] {
        &self.edges
    }

    pub fn edge(&self, idx: u32) -> &RelationEdge {
        &self.edges[idx as usize]
    }

    /// Tests both relation directions for an intersection of `weight` and adds
    /// the resulting edge, if any. Returns the new edge index.
    pub fn relate(&mut self, source: u32, target: u32, weight: u32, mu: Mu) -> Result<Option<u32>, EvolutionError> {
        let forward = mu.admits(u64::from(weight), u64::from(self.source_size(source)));
        let backward = mu.admits(u64::from(weight), u64::from(self.target_size(target)));
        if !forward && !backward {
            return Ok(None);
        }
        self.insert_edge(source, target, weight, forward, backward).map(Some)
    }

    /// Adds an edge with explicit directions, enforcing out-degree <= 1 on
    /// both sides.
    pub fn insert_edge(&mut self, source: u32, target: u32, weight: u32, forward: bool, backward: bool) -> Result<u32, EvolutionError> {
        let sid = GroupId::new(self.source_cp, source);
        let tid = GroupId::new(self.source_cp + 1, target);
        let ss = *self.source_sizes.get(source as usize).ok_or(EvolutionError::UnknownVertex(sid))?;
        let ts = *self.target_sizes.get(target as usize).ok_or(EvolutionError::UnknownVertex(tid))?;
        if weight > ss || weight > ts {
            return Err(EvolutionError::WeightTooLarge { weight });
        }
        let dup =
            |adj: &Adjacency, edges: &[RelationEdge]| adj.out.iter().chain(adj.ins.iter()).any(|&e| edges[e as usize].target == target);
        if dup(&self.source_adj[source as usize], &self.edges) {
            return Err(EvolutionError::DuplicateEdge { source_ordinal: source, target });
        }
        if forward && self.source_adj[source as usize].out.is_some() {
            return Err(EvolutionError::ForwardOutDegree(sid));
        }
        if backward && self.target_adj[target as usize].out.is_some() {
            return Err(EvolutionError::BackwardOutDegree(tid));
        }
        if !forward && !backward {
            return Err(EvolutionError::NoDirection);
        }
        let idx = self.edges.len() as u32;
        self.edges.push(RelationEdge { source, target, weight, forward, backward });
        if forward {
            self.source_adj[source as usize].out = Some(idx);
            self.target_adj[target as usize].ins.push(idx);
        }
        if backward {
            self.target_adj[target as usize].out = Some(idx);
            self.source_adj[source as usize].ins.push(idx);
        }
        Ok(idx)
    }

    /// The forward edge leaving source `s`, if any.
    pub fn forward_out(&self, s: u32) -> Option<&RelationEdge> {
        self.source_adj[s as usize].out.map(|e| &self.edges[e as usize])
    }

    /// Backward edges entering source `s`.
    pub fn backward_in(&self, s: u32) -> impl Iterator<Item = &RelationEdge> + '_ {
        self.source_adj[s as usize].ins.iter().map(|&e| &self.edges[e as usize])
    }

    /// Forward edges entering target `t`.
    pub fn forward_in(&self, t: u32) -> impl Iterator<Item = &RelationEdge> + '_ {
        self.target_adj[t as usize].ins.iter().map(|&e| &self.edges[e as usize])
    }

    /// The backward edge leaving target `t`, if any.
    pub fn backward_out(&self, t: u32) -> Option<&RelationEdge> {
        self.target_adj[t as usize].out.map(|e| &self.edges[e as usize])
    }

    pub fn source_degrees(&self, s: u32) -> Result<DegreeView, EvolutionError> {
        let adj = self.source_adj.get(s as usize).ok_or(EvolutionError::UnknownVertex(GroupId::new(self.source_cp, s)))?;
        Ok(DegreeView { f_out: adj.out.is_some() as usize, b_in: adj.ins.len(), ..Default::default() })
    }

    pub fn target_degrees(&self, t: u32) -> Result<DegreeView, EvolutionError> {
        let adj = self.target_adj.get(t as usize).ok_or(EvolutionError::UnknownVertex(GroupId::new(self.source_cp + 1, t)))?;
        Ok(DegreeView { f_in: adj.ins.len(), b_out: adj.out.is_some() as usize, ..Default::default() })
    }

    /// Degrees of a group identified by its global id.
    pub fn degrees(&self, group: GroupId) -> Result<DegreeView, EvolutionError> {
        if group.cp == self.source_cp {
            self.source_degrees(group.ordinal)
        } else if group.cp == self.source_cp + 1 {
            self.target_degrees(group.ordinal)
        } else {
            Err(EvolutionError::UnknownVertex(group))
        }
    }

    /// The strong partner of source `s`, if `s ≈ t` for some target.
    pub fn strong_partner_of_source(&self, s: u32) -> Option<&RelationEdge> {
        self.forward_out(s).filter(|e| e.backward)
    }

    /// Line-oriented text form:
    ///
    /// ```text
    /// graph <x> <x'>
    /// source <ordinal> <size>
    /// target <ordinal> <size>
    /// edge <x> <s> <x'> <t> <weight> forward|backward|strong
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let (x, y) = (self.source_cp, self.source_cp + 1);
        let _ = writeln!(out, "graph {x} {y}");
        for (i, s) in self.source_sizes.iter().enumerate() {
            let _ = writeln!(out, "source {i} {s}");
        }
        for (i, s) in self.target_sizes.iter().enumerate() {
            let _ = writeln!(out, "target {i} {s}");
        }
        let mut edges = self.edges.clone();
        edges.sort_by_key(|e| (e.source, e.target));
        for e in &edges {
            let dir = match (e.forward, e.backward) {
                (true, true) => "strong",
                (true, false) => "forward",
                _ => "backward",
            };
            let _ = writeln!(out, "edge {x} {} {y} {} {} {dir}", e.source, e.target, e.weight);
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output. The result is marked complete.
    pub fn from_text(text: &str) -> Result<Self, EvolutionError> {
        let mut graph: Option<EvolutionGraph> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let err = |message: &str| EvolutionError::Parse { line, message: message.into() };
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = raw.split_whitespace().collect();
            let num = |i: usize| -> Result<u32, EvolutionError> {
                fields.get(i).and_then(|f| f.parse().ok()).ok_or_else(|| err("expected an integer"))
            };
            match fields[0] {
                "graph" => {
                    let x = num(1)?;
                    if num(2)? != x + 1 {
                        return Err(err("control points must be consecutive"));
                    }
                    graph = Some(EvolutionGraph::new(x));
                }
                "source" | "target" => {
                    let g = graph.as_mut().ok_or_else(|| err("missing graph header"))?;
                    let (ord, size) = (num(1)?, num(2)?);
                    let added = if fields[0] == "source" { g.add_source(size) } else { g.add_target(size) };
                    if added != ord {
                        return Err(err("vertex ordinals must be dense and ascending"));
                    }
                }
                "edge" => {
                    let g = graph.as_mut().ok_or_else(|| err("missing graph header"))?;
                    if num(1)? != g.source_cp || num(3)? != g.source_cp + 1 {
                        return Err(err("edge control points do not match the header"));
                    }
                    let (forward, backward) = match fields.get(6).copied() {
                        Some("forward") => (true, false),
                        Some("backward") => (false, true),
                        Some("strong") => (true, true),
                        _ => return Err(err("direction must be forward, backward or strong")),
                    };
                    g.insert_edge(num(2)?, num(4)?, num(5)?, forward, backward)?;
                }
                _ => return Err(err("unknown record")),
            }
        }
        let mut g = graph.ok_or(EvolutionError::Parse { line: 0, message: "empty input".into() })?;
        g.complete = true;
        Ok(g)
    }
}
