mod common;

use peloton_core::{
    build_global, compute_labels, oracle_groups, oracle_longterm, oracle_patterns, random_instance, AthleteSet, Mode, OracleGroup,
    OracleLimits,
};
use proptest::prelude::*;

const LIMITS: OracleLimits = OracleLimits { max_groups: 2000, max_steps: 1 << 26 };

fn check(seed: u64) -> Result<(), String> {
    let inst = random_instance(seed);
    let params = inst.params;
    let ctx = |what: &str| format!("seed {seed} ({params:?}): {what}");
    let r = common::run(&inst.events, params, Mode::Finalized);
    let reference = oracle_groups(&inst.events, &params);

    for (cp, expected) in reference.iter().enumerate() {
        let got = r.engine.groups_at(cp as u32).map_err(|e| ctx(&e.to_string()))?;
        let got: Vec<_> = got.iter().map(|g| (g.member_set(), g.t_first, g.t_last)).collect();
        let want: Vec<_> = expected.iter().map(|g| (g.member_set(), g.t_first, g.t_last)).collect();
        if got != want {
            return Err(ctx(&format!("groups differ at cp {cp}")));
        }
    }

    let sets = common::pattern_sets(&r.engine);
    for (c, set) in sets.iter().enumerate() {
        let members = |cp: usize| reference[cp].iter().map(OracleGroup::member_set).collect::<Vec<AthleteSet>>();
        let o = oracle_patterns(c as u32, &members(c), &members(c + 1), params.mu);
        if set.records != o.records {
            return Err(ctx(&format!("patterns differ at pair {c}: {:?} vs {:?}", set.records, o.records)));
        }
        if set.diagnostics != o.diagnostics {
            return Err(ctx(&format!("diagnostics differ at pair {c}")));
        }
    }

    let reference_global = build_global(&common::reference_graphs(&reference, &params)).map_err(|e| ctx(&e.to_string()))?;
    let labels = compute_labels(&common::global(&r.engine));
    let expected = oracle_longterm(&reference_global, LIMITS).map_err(|e| ctx(&e.to_string()))?;
    let got: Vec<_> = labels.iter().collect();
    if got != expected {
        return Err(ctx("long-term labels differ"));
    }
    Ok(())
}

#[test]
fn seeded_instances_match_oracles() {
    for seed in 0..150 {
        check(seed).unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn arbitrary_instances_match_oracles(seed in any::<u64>()) {
        check(seed).map_err(TestCaseError::fail)?;
    }
}

#[test]
fn engine_graphs_equal_reference_graphs() {
    for seed in 200..260 {
        let inst = random_instance(seed);
        let r = common::run(&inst.events, inst.params, Mode::Finalized);
        let reference = common::reference_graphs(&oracle_groups(&inst.events, &inst.params), &inst.params);
        let engine: Vec<_> = r.engine.evolution_graphs().collect();
        assert_eq!(engine.len(), reference.len());
        for (a, b) in engine.iter().zip(&reference) {
            let mut ea: Vec<_> = a.edges().iter().map(|e| (e.source, e.target, e.weight, e.forward, e.backward)).collect();
            let mut eb: Vec<_> = b.edges().iter().map(|e| (e.source, e.target, e.weight, e.forward, e.backward)).collect();
            ea.sort();
            eb.sort();
            assert_eq!(ea, eb, "seed {seed} pair {}", a.source_cp());
        }
    }
}
