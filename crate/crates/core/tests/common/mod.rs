#![allow(dead_code)]

use std::collections::BTreeMap;

use peloton_core::{
    build_global, collect_patterns, inclusion, AthleteSet, Engine, EngineOutput, Event, EvolutionGraph, GlobalGraph, Mode, OracleGroup,
    Params, PatternRecord, PatternSet, PatternUpdate,
};

pub struct Run {
    pub engine: Engine,
    pub outputs: Vec<EngineOutput>,
}

pub fn run(events: &[Event], params: Params, mode: Mode) -> Run {
    let mut engine = Engine::new(params, mode);
    let mut outputs = Vec::new();
    for e in events {
        engine.ingest(*e, &mut outputs).expect("sorted stream");
    }
    outputs.extend(engine.finalize_all().expect("finalize"));
    Run { engine, outputs }
}

pub fn pattern_sets(engine: &Engine) -> Vec<PatternSet> {
    engine.evolution_graphs().map(|g| collect_patterns(g, engine.params().mu)).collect()
}

pub fn global(engine: &Engine) -> GlobalGraph {
    build_global(engine.evolution_graphs()).expect("consecutive pairs")
}

/// Evolution graphs rebuilt from reference groups by set arithmetic.
pub fn reference_graphs(groups: &[Vec<OracleGroup>], params: &Params) -> Vec<EvolutionGraph> {
    let sets: Vec<Vec<AthleteSet>> = groups.iter().map(|cp| cp.iter().map(OracleGroup::member_set).collect()).collect();
    (0..sets.len().saturating_sub(1))
        .map(|c| {
            let size = |v: &[AthleteSet]| v.iter().map(|s| s.len() as u32).collect::<Vec<_>>();
            let mut g = EvolutionGraph::with_sizes(c as u32, &size(&sets[c]), &size(&sets[c + 1]));
            for (i, s) in sets[c].iter().enumerate() {
                for (j, t) in sets[c + 1].iter().enumerate() {
                    let fwd = inclusion(s, t).unwrap().meets(params.mu);
                    let bwd = inclusion(t, s).unwrap().meets(params.mu);
                    if fwd || bwd {
                        let w = s.intersection(t).count() as u32;
                        g.insert_edge(i as u32, j as u32, w, fwd, bwd).expect("out-degree at most one");
                    }
                }
            }
            g
        })
        .collect()
}

/// Replays online notifications into the records they leave standing.
pub fn replay(outputs: &[EngineOutput]) -> BTreeMap<PatternRecord, i64> {
    let mut live = BTreeMap::new();
    for o in outputs {
        match o {
            EngineOutput::Pattern(PatternUpdate::Reported(r)) => *live.entry(r.clone()).or_insert(0) += 1,
            EngineOutput::Pattern(PatternUpdate::Withdrawn(r)) => *live.entry(r.clone()).or_insert(0) -= 1,
            _ => {}
        }
    }
    live.retain(|_, n| *n != 0);
    live
}
