//! One pass over a sorted event stream: grouping and evolution graphs,
//! patterns, then long-term labels, each stage timed.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use peloton_core::{
    build_global, compute_labels, detect_patterns, longest_all, AthleteId, Engine, EngineOutput, Event, GlobalError, GlobalGraph,
    GroundTruth, LongTermLabels, LongestKind, LongestResult, Mode, Params, PatternError, PatternSet, PatternUpdate, StreamError, Timestamp,
};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub params: Params,
    pub mode: Mode,
    /// Declared course length; events past it are stream errors.
    pub control_points: Option<u32>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { params: Params::default(), mode: Mode::Finalized, control_points: None }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Global(#[from] GlobalError),
}

/// Wall time per stage. `ingest` covers reading and sorting and is filled
/// in by the caller; the other three make up the algorithmic time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub ingest: Duration,
    pub grouping: Duration,
    pub patterns: Duration,
    pub longterm: Duration,
}

impl Timings {
    pub fn algorithmic(&self) -> Duration {
        self.grouping + self.patterns + self.longterm
    }

    /// Events per second of algorithmic time.
    pub fn throughput(&self, events: usize) -> f64 {
        events as f64 / self.algorithmic().as_secs_f64().max(1e-9)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CpStats {
    pub cp: u32,
    pub crossings: usize,
    pub components: usize,
    pub groups: usize,
    /// Athletes in some group.
    pub grouped: usize,
    pub largest_group: usize,
}

impl CpStats {
    pub fn outliers(&self) -> usize {
        self.crossings - self.grouped
    }
}

/// Accepted crossing times per athlete, indexed by control point.
pub type Crossings = HashMap<AthleteId, Vec<Option<Timestamp>>>;

#[derive(Debug)]
pub struct RunOutput {
    pub config: RunConfig,
    pub engine: Engine,
    pub events: usize,
    pub crossings: Crossings,
    /// One per consecutive control-point pair.
    pub pattern_sets: Vec<PatternSet>,
    pub global: GlobalGraph,
    pub labels: LongTermLabels,
    pub longest: Vec<LongestResult>,
    pub cp_stats: Vec<CpStats>,
    /// Provisional records reported and withdrawn along the way (online mode).
    pub reported: usize,
    pub withdrawn: usize,
    pub timings: Timings,
}

impl RunOutput {
    pub fn pattern_totals(&self) -> [u64; 9] {
        let mut t = [0u64; 9];
        for set in &self.pattern_sets {
            for (acc, c) in t.iter_mut().zip(set.counts()) {
                *acc += c as u64;
            }
        }
        t
    }

    /// Longest lengths in edges, in [`LongestKind::ALL`] order.
    pub fn longest_edges(&self) -> Option<[u32; 4]> {
        self.labels.max(LongestKind::Surviving)?;
        Some(LongestKind::ALL.map(|k| self.labels.max(k).unwrap_or(0)))
    }

    /// The observed results in the generator's ground-truth shape.
    pub fn observed(&self) -> GroundTruth {
        GroundTruth {
            groups_per_cp: self.cp_stats.iter().map(|s| s.groups as u64).collect(),
            pair_counts: self.pattern_sets.iter().map(|s| s.counts().map(|c| c as u64)).collect(),
            longest_edges: self.longest_edges(),
        }
    }
}

/// Runs the whole pipeline over events already in stream order.
pub fn run(config: &RunConfig, events: &[Event]) -> Result<RunOutput, RunError> {
    let mut timings = Timings::default();
    let clock = Instant::now();
    let mut engine = match config.control_points {
        Some(n) => Engine::with_control_points(config.params, config.mode, n),
        None => Engine::new(config.params, config.mode),
    };
    let mut crossings = Crossings::new();
    let (mut reported, mut withdrawn) = (0, 0);
    let mut tally = |out: &mut Vec<EngineOutput>| {
        for o in out.drain(..) {
            match o {
                EngineOutput::Pattern(PatternUpdate::Reported(_)) => reported += 1,
                EngineOutput::Pattern(PatternUpdate::Withdrawn(_)) => withdrawn += 1,
                _ => {}
            }
        }
    };
    let mut out = Vec::new();
    for e in events {
        engine.ingest(*e, &mut out)?;
        let rejected = out.iter().any(|o| matches!(o, EngineOutput::Anomaly(_)));
        if !rejected {
            let times = crossings.entry(e.athlete).or_default();
            let cp = e.cp as usize;
            if times.len() <= cp {
                times.resize(cp + 1, None);
            }
            times[cp] = Some(e.time);
        }
        tally(&mut out);
    }
    out.extend(engine.finalize_all()?);
    tally(&mut out);
    timings.grouping = clock.elapsed();

    let clock = Instant::now();
    let mu = config.params.mu;
    let pattern_sets = match config.mode {
        Mode::Finalized => engine.evolution_graphs().map(|g| detect_patterns(g, mu)).collect::<Result<Vec<_>, _>>()?,
        Mode::Online => {
            let pairs = engine.control_point_count().saturating_sub(1) as u32;
            (0..pairs).map(|c| engine.online_patterns(c).unwrap_or_default()).collect()
        }
    };
    timings.patterns = clock.elapsed();

    let clock = Instant::now();
    let global = build_global(engine.evolution_graphs())?;
    let labels = compute_labels(&global);
    let longest = longest_all(&global, &labels);
    timings.longterm = clock.elapsed();

    let cp_stats = (0..engine.control_point_count() as u32)
        .map(|cp| {
            let groups = engine.groups_at(cp).unwrap_or_default();
            CpStats {
                cp,
                crossings: engine.crossings_at(cp),
                components: engine.component_count(cp),
                groups: groups.len(),
                grouped: groups.iter().map(|g| g.len()).sum(),
                largest_group: groups.iter().map(|g| g.len()).max().unwrap_or(0),
            }
        })
        .collect();

    Ok(RunOutput {
        config: *config,
        engine,
        events: events.len(),
        crossings,
        pattern_sets,
        global,
        labels,
        longest,
        cp_stats,
        reported,
        withdrawn,
        timings,
    })
}

/// Summary of one run of an epsilon sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepRow {
    pub epsilon: u64,
    pub pattern_totals: [u64; 9],
    pub longest_edges: Option<[u32; 4]>,
    pub components: Vec<usize>,
    pub groups: Vec<usize>,
}

impl SweepRow {
    fn of(run: &RunOutput) -> Self {
        SweepRow {
            epsilon: run.config.params.epsilon,
            pattern_totals: run.pattern_totals(),
            longest_edges: run.longest_edges(),
            components: run.cp_stats.iter().map(|s| s.components).collect(),
            groups: run.cp_stats.iter().map(|s| s.groups).collect(),
        }
    }
}

/// Runs the pipeline once per epsilon, in parallel, over shared events.
/// Rows come back in the order of `epsilons`.
pub fn epsilon_sweep(config: &RunConfig, events: &[Event], epsilons: &[u64]) -> Result<Vec<SweepRow>, RunError> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(epsilons.len()).max(1);
    let chunk = epsilons.len().div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = epsilons
            .chunks(chunk)
            .map(|batch| {
                scope.spawn(move || {
                    batch
                        .iter()
                        .map(|&epsilon| {
                            let cfg = RunConfig { params: Params { epsilon, ..config.params }, ..*config };
                            run(&cfg, events).map(|r| SweepRow::of(&r))
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        let mut rows = Vec::with_capacity(epsilons.len());
        for h in handles {
            rows.extend(h.join().expect("sweep worker panicked")?);
        }
        Ok(rows)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use peloton_core::Mu;

    fn config(eps: u64, m: usize) -> RunConfig {
        RunConfig { params: Params::new(eps, m, Mu::new(7, 10).unwrap()).unwrap(), ..Default::default() }
    }

    #[test]
    fn empty_stream_gives_empty_results() {
        let r = run(&config(2000, 3), &[]).unwrap();
        assert!(r.pattern_sets.is_empty() && r.longest.is_empty() && r.cp_stats.is_empty());
        assert_eq!(r.observed(), GroundTruth::default());
    }

    #[test]
    fn two_groups_at_one_control_point() {
        let events: Vec<Event> = [0, 1, 2, 5, 6, 7].iter().enumerate().map(|(a, &s)| Event::new(a as u64, 0, s * 1000)).collect();
        let r = run(&config(2000, 3), &events).unwrap();
        assert_eq!(r.cp_stats[0], CpStats { cp: 0, crossings: 6, components: 2, groups: 2, grouped: 6, largest_group: 3 });
        assert_eq!(r.crossings[&AthleteId(4)], vec![Some(Timestamp(6000))]);
    }

    #[test]
    fn rejected_events_leave_no_crossing() {
        let events = [Event::new(1, 0, 0), Event::new(1, 0, 5), Event::new(1, 1, 10)];
        let r = run(&config(0, 1), &events).unwrap();
        assert_eq!(r.engine.anomalies().len(), 1);
        assert_eq!(r.crossings[&AthleteId(1)], vec![Some(Timestamp(0)), Some(Timestamp(10))]);
    }

    #[test]
    fn sweep_rows_follow_requested_order() {
        let events: Vec<Event> = (0..20).map(|a| Event::new(a, 0, a * 700)).collect();
        let rows = epsilon_sweep(&config(0, 2), &events, &[1000, 0, 500]).unwrap();
        assert_eq!(rows.iter().map(|r| r.epsilon).collect::<Vec<_>>(), [1000, 0, 500]);
        assert_eq!(rows.iter().map(|r| r.components[0]).collect::<Vec<_>>(), [1, 20, 20]);
    }
}
