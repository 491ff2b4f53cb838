//! Acceptance criteria. Prints one verdict line per criterion and exits
//! nonzero when any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use peloton::{epsilon_sweep, run, RunConfig, RunOutput};
use peloton_core::{
    build_global, generate, in_precedence_corner, inclusion, mass_start, oracle_groups, oracle_longterm, oracle_patterns, random_instance,
    strongly_related, weakly_related, AthleteId, AthleteSet, Behavior, BehaviorMix, DiagnosticKind, Event, EvolutionGraph, GeneratorConfig,
    GroupId, LongestKind, MassStartConfig, Mode, Mu, OracleGroup, OracleLimits, Params, PatternKind, Plan, ScriptStep,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const TIME_BUDGET: Duration = Duration::from_secs(60);
const EQUIVALENCE_INSTANCES: u64 = 120;
// exhaustive search stays tractable on instances of this size
const ORACLE_LIMITS: OracleLimits = OracleLimits { max_groups: 2000, max_steps: 1 << 26 };
const MIN_THROUGHPUT: f64 = 10_000.0;
const MAX_DOUBLING_RATIO: f64 = 2.5;
const SWEEP_EPSILONS_S: [u64; 7] = [0, 1, 2, 5, 10, 30, 100];
const MAX_CHURN_FRACTION: f64 = 0.10;
const INVARIANT_INSTANCES: u64 = 100;

fn finalized(params: Params) -> RunConfig {
    RunConfig { params, mode: Mode::Finalized, control_points: None }
}

fn pipeline(params: Params, events: &[Event]) -> Result<RunOutput, String> {
    run(&finalized(params), events).map_err(|e| e.to_string())
}

fn members(groups: &[OracleGroup]) -> Vec<AthleteSet> {
    groups.iter().map(OracleGroup::member_set).collect()
}

/// Evolution graphs from reference groups by direct set arithmetic.
fn reference_graphs(groups: &[Vec<OracleGroup>], mu: Mu) -> Vec<EvolutionGraph> {
    let sets: Vec<Vec<AthleteSet>> = groups.iter().map(|g| members(g)).collect();
    let sizes = |v: &[AthleteSet]| v.iter().map(|s| s.len() as u32).collect::<Vec<_>>();
    (0..sets.len().saturating_sub(1))
        .map(|c| {
            let mut g = EvolutionGraph::with_sizes(c as u32, &sizes(&sets[c]), &sizes(&sets[c + 1]));
            for (i, s) in sets[c].iter().enumerate() {
                for (j, t) in sets[c + 1].iter().enumerate() {
                    let fwd = inclusion(s, t).is_ok_and(|x| x.meets(mu));
                    let bwd = inclusion(t, s).is_ok_and(|x| x.meets(mu));
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

fn equivalence_on(seed: u64) -> Result<usize, String> {
    let inst = random_instance(seed);
    let params = inst.params;
    let ctx = |what: String| format!("seed {seed}: {what}");
    let r = pipeline(params, &inst.events).map_err(ctx)?;
    let mut reference = oracle_groups(&inst.events, &params);
    let cps = reference.len().max(r.engine.control_point_count());
    reference.resize(cps, Vec::new());
    for (cp, want) in reference.iter().enumerate() {
        let got = r.engine.groups_at(cp as u32).map_err(|e| ctx(e.to_string()))?;
        let got: Vec<_> = got.iter().map(|g| (g.member_set(), g.t_first, g.t_last)).collect();
        let want: Vec<_> = want.iter().map(|g| (g.member_set(), g.t_first, g.t_last)).collect();
        if got != want {
            return Err(ctx(format!("groups differ at control point {cp}")));
        }
    }
    let mut flagged = 0;
    for (c, set) in r.pattern_sets.iter().enumerate() {
        let o = oracle_patterns(c as u32, &members(&reference[c]), &members(&reference[c + 1]), params.mu);
        if set.records != o.records || set.diagnostics != o.diagnostics {
            return Err(ctx(format!("patterns differ at pair {c}")));
        }
        flagged += o.diagnostics.len();
    }
    let global = build_global(&reference_graphs(&reference, params.mu)).map_err(|e| ctx(e.to_string()))?;
    let want = oracle_longterm(&global, ORACLE_LIMITS).map_err(|e| ctx(e.to_string()))?;
    if r.labels.iter().collect::<Vec<_>>() != want {
        return Err(ctx("long-term labels differ".into()));
    }
    Ok(flagged)
}

fn oracle_equivalence() -> Outcome {
    let clock = Instant::now();
    let mut flagged = 0;
    for seed in 0..EQUIVALENCE_INSTANCES {
        flagged += equivalence_on(seed)?;
    }
    let took = clock.elapsed();
    if took > TIME_BUDGET {
        return Err(format!("took {:.1} s, budget {} s", took.as_secs_f64(), TIME_BUDGET.as_secs()));
    }
    Ok(format!(
        "{EQUIVALENCE_INSTANCES} instances: groups, patterns and labels equal to the oracles, {flagged} corner diagnostics flagged by both, {:.1} s < {} s",
        took.as_secs_f64(),
        TIME_BUDGET.as_secs()
    ))
}

/// Four deviations per pack, spread over the course.
fn script(packs: u32, cps: u32) -> Vec<ScriptStep> {
    let behaviors = [
        Behavior::Divide(2),
        Behavior::Divide(3),
        Behavior::Explode,
        Behavior::Scatter { parts: 3, exploded: 1 },
        Behavior::Scatter { parts: 2, exploded: 1 },
    ];
    (0..packs)
        .flat_map(|pack| {
            (0..4u32).map(move |j| ScriptStep {
                pack,
                cp: (pack * 13 + j * 29 + 5) % cps,
                behavior: behaviors[((pack + j) % behaviors.len() as u32) as usize],
            })
        })
        .collect()
}

fn synthetic_truth() -> Outcome {
    let mut cfg = GeneratorConfig { seed: 7, ..GeneratorConfig::default() };
    cfg.plan = Plan::Scripted(script(cfg.packs(), cfg.control_points));
    let (events, truth) = generate(&cfg).map_err(|e| e.to_string())?;
    let clock = Instant::now();
    let r = pipeline(cfg.params, &events)?;
    let took = clock.elapsed();
    let observed = r.observed();
    if observed.groups_per_cp != truth.groups_per_cp {
        return Err("groups per control point differ from the prediction".into());
    }
    if let Some(c) = (0..truth.pair_counts.len()).find(|&c| observed.pair_counts.get(c) != Some(&truth.pair_counts[c])) {
        return Err(format!(
            "pattern counts differ at pair {c}: predicted {:?}, observed {:?}",
            truth.pair_counts[c],
            observed.pair_counts.get(c)
        ));
    }
    if observed.pair_counts.len() != truth.pair_counts.len() || observed.longest_edges != truth.longest_edges {
        return Err(format!("long-term maxima: predicted {:?}, observed {:?}", truth.longest_edges, observed.longest_edges));
    }
    if took > TIME_BUDGET {
        return Err(format!("pipeline took {:.1} s, budget {} s", took.as_secs_f64(), TIME_BUDGET.as_secs()));
    }
    let totals = truth.totals();
    let kinds: Vec<String> =
        PatternKind::ALL.iter().filter(|k| totals[k.index()] > 0).map(|k| format!("{k} {}", totals[k.index()])).collect();
    Ok(format!(
        "{} athletes x {} cps, {} events: counts exact ({}), longest {:?} edges, pipeline {:.1} s < {} s",
        cfg.athletes,
        cfg.control_points,
        events.len(),
        kinds.join(", "),
        truth.longest_edges.unwrap_or_default(),
        took.as_secs_f64(),
        TIME_BUDGET.as_secs()
    ))
}

fn chain_of_four() -> Outcome {
    // five athletes crossing four control points together
    let events: Vec<Event> =
        (0..4u32).flat_map(|cp| (0..5u64).map(move |a| Event::new(a, cp, u64::from(cp) * 600_000 + a * 500))).collect();
    let params = Params::new(2000, 3, Mu::new(7, 10).unwrap()).unwrap();
    let r = pipeline(params, &events)?;
    let labels: Vec<u32> = (0..4).map(|cp| r.labels.get(GroupId::new(cp, 0)).map_or(u32::MAX, |l| l.lp_s)).collect();
    if labels != [0, 1, 2, 3] {
        return Err(format!("lpS labels {labels:?}, expected [0, 1, 2, 3]"));
    }
    let surviving = r.longest.iter().find(|l| l.kind == LongestKind::Surviving).ok_or("no longest surviving result")?;
    if (surviving.length_cps(), surviving.length_edges) != (4, 3) {
        return Err(format!("longest surviving {} cps / {} edges, expected 4 / 3", surviving.length_cps(), surviving.length_edges));
    }
    Ok(format!("lpS labels {labels:?}; {surviving}"))
}

fn throughput_config(athletes: u32) -> GeneratorConfig {
    GeneratorConfig { athletes, pace_bands: 50, seed: 3, plan: Plan::Random(BehaviorMix::default()), ..GeneratorConfig::default() }
}

/// Best algorithmic time over `rounds` runs.
fn best_time(cfg: &GeneratorConfig, events: &[Event], rounds: usize) -> Result<Duration, String> {
    let mut best = Duration::MAX;
    for _ in 0..rounds {
        let r = pipeline(cfg.params, events)?;
        best = best.min(r.timings.algorithmic());
    }
    Ok(best)
}

fn throughput() -> Outcome {
    let full = throughput_config(25_000);
    let half = throughput_config(12_500);
    let (events, _) = generate(&full).map_err(|e| e.to_string())?;
    let (half_events, _) = generate(&half).map_err(|e| e.to_string())?;
    let t_full = best_time(&full, &events, 2)?;
    let t_half = best_time(&half, &half_events, 2)?;
    let rate = events.len() as f64 / t_full.as_secs_f64();
    let ratio = t_full.as_secs_f64() / t_half.as_secs_f64();
    let detail = format!(
        "{} events with {} pace bands at {rate:.0} events/s (>= {MIN_THROUGHPUT:.0}); {} -> {} events takes {ratio:.2}x (<= {MAX_DOUBLING_RATIO})",
        events.len(),
        full.pace_bands,
        half_events.len(),
        events.len()
    );
    if rate >= MIN_THROUGHPUT && ratio <= MAX_DOUBLING_RATIO {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn epsilon_trends() -> Outcome {
    let events = mass_start(&MassStartConfig::default());
    let epsilons: Vec<u64> = SWEEP_EPSILONS_S.iter().map(|s| s * 1000).collect();
    let rows = epsilon_sweep(&finalized(Params::default()), &events, &epsilons).map_err(|e| e.to_string())?;
    for w in rows.windows(2) {
        if let Some(cp) = (0..w[0].components.len()).find(|&cp| w[1].components[cp] > w[0].components[cp]) {
            return Err(format!(
                "components at cp {cp} grow from {} to {} between {} and {} ms",
                w[0].components[cp], w[1].components[cp], w[0].epsilon, w[1].epsilon
            ));
        }
    }
    let churn = |r: &peloton::SweepRow| r.pattern_totals[PatternKind::Appears.index()] + r.pattern_totals[PatternKind::Disappears.index()];
    let (first, last) = (churn(&rows[0]), churn(&rows[rows.len() - 1]));
    let fraction = last as f64 / first.max(1) as f64;
    let totals: Vec<usize> = rows.iter().map(|r| r.components.iter().sum()).collect();
    let detail = format!(
        "{} events at 1 s resolution: components {totals:?} nonincreasing per cp over eps {SWEEP_EPSILONS_S:?} s; appears+disappears {first} -> {last} ({:.1}% < {:.0}%)",
        events.len(),
        fraction * 100.0,
        MAX_CHURN_FRACTION * 100.0
    );
    if first > 0 && fraction < MAX_CHURN_FRACTION {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn instance_invariants(seed: u64) -> Result<usize, String> {
    let inst = random_instance(seed);
    let ctx = |what: String| format!("seed {seed}: {what}");
    let r = pipeline(inst.params, &inst.events).map_err(ctx)?;
    let e = &r.engine;
    for cp in 0..e.control_point_count() as u32 {
        let mut seen = BTreeSet::new();
        for c in e.components_at(cp).map_err(|x| ctx(x.to_string()))? {
            if !c.members.iter().all(|a| seen.insert(*a)) {
                return Err(ctx(format!("athlete in two components at cp {cp}")));
            }
        }
        let crossing: BTreeSet<AthleteId> = inst.events.iter().filter(|ev| ev.cp == cp).map(|ev| ev.athlete).collect();
        if seen != crossing {
            return Err(ctx(format!("components do not partition the crossings of cp {cp}")));
        }
    }
    let mut flagged = 0;
    for (g, set) in e.evolution_graphs().zip(&r.pattern_sets) {
        let mut fwd = BTreeMap::new();
        let mut bwd = BTreeMap::new();
        for edge in g.edges() {
            *fwd.entry(edge.source).or_insert(0) += u32::from(edge.forward);
            *bwd.entry(edge.target).or_insert(0) += u32::from(edge.backward);
        }
        if fwd.values().chain(bwd.values()).any(|&n| n > 1) {
            return Err(ctx(format!("out-degree above one in pair {}", g.source_cp())));
        }
        let mut coverage: BTreeMap<GroupId, usize> = BTreeMap::new();
        for rec in &set.records {
            for gid in rec.source_groups().into_iter().chain(rec.target_groups()) {
                *coverage.entry(gid).or_default() += 1;
            }
        }
        let flagged_groups: BTreeSet<GroupId> = set.diagnostics.iter().map(|d| d.group).collect();
        for d in &set.diagnostics {
            let plausible = match d.kind {
                DiagnosticKind::Unclassified => true,
                DiagnosticKind::Overlap { records } => records >= 2,
            };
            if !in_precedence_corner(g, d.group) || !plausible {
                return Err(ctx(format!("{d} outside the precedence corner")));
            }
        }
        let groups = (0..g.source_count() as u32)
            .map(|o| GroupId::new(g.source_cp(), o))
            .chain((0..g.target_count() as u32).map(|o| GroupId::new(g.target_cp(), o)));
        for gid in groups {
            if coverage.get(&gid) != Some(&1) && !flagged_groups.contains(&gid) {
                return Err(ctx(format!("{gid} is not in exactly one record")));
            }
        }
        flagged += set.diagnostics.len();
    }
    let online = run(&RunConfig { mode: Mode::Online, ..finalized(inst.params) }, &inst.events).map_err(|x| ctx(x.to_string()))?;
    if online.pattern_sets != r.pattern_sets || online.labels != r.labels || online.longest != r.longest {
        return Err(ctx("online and finalized results differ".into()));
    }
    if online.reported - online.withdrawn != r.pattern_sets.iter().map(|s| s.records.len()).sum::<usize>() {
        return Err(ctx("online notifications do not settle on the final records".into()));
    }
    Ok(flagged)
}

fn mu_strategy() -> impl Strategy<Value = Mu> {
    (2u64..=30).prop_flat_map(|q| (q / 2 + 1..=q).prop_map(move |p| Mu::new(p, q).unwrap()))
}

/// Pairwise disjoint nonempty sets over a small universe, and a set `b`.
fn disjoint_family() -> impl Strategy<Value = (Vec<AthleteSet>, AthleteSet)> {
    (2usize..=6, 10u64..60).prop_flat_map(|(k, n)| {
        (prop::collection::vec(0..=k, n as usize), prop::collection::btree_set(0..n, 1..n as usize)).prop_filter_map(
            "nonempty parts",
            move |(labels, b)| {
                let mut parts = vec![AthleteSet::new(); k];
                for (x, &l) in labels.iter().enumerate() {
                    if l < k {
                        parts[l].insert(AthleteId(x as u64));
                    }
                }
                let b: AthleteSet = b.into_iter().map(AthleteId).collect();
                parts.iter().all(|p| !p.is_empty()).then_some((parts, b))
            },
        )
    })
}

fn propositions() -> Result<u32, String> {
    let cases = 256;
    let mut runner = TestRunner::new_with_rng(
        Config { cases, failure_persistence: None, ..Config::default() },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    runner
        .run(&(disjoint_family(), disjoint_family(), mu_strategy()), |((parts, b), (others, _), mu)| {
            // a set is weakly related to at most one of several disjoint sets
            prop_assert!(parts.iter().filter(|p| weakly_related(&b, p, mu).unwrap()).count() <= 1);
            // the coefficient of a disjoint union sums the shared counts
            let union: AthleteSet = parts.iter().flatten().copied().collect();
            let whole = inclusion(&union, &b).unwrap();
            prop_assert_eq!(whole.shared, parts.iter().map(|p| inclusion(p, &b).unwrap().shared).sum::<u64>());
            // disjoint sets each related to b have a related union
            let related: AthleteSet = parts.iter().filter(|p| weakly_related(p, &b, mu).unwrap()).flatten().copied().collect();
            if !related.is_empty() {
                prop_assert!(weakly_related(&related, &b, mu).unwrap());
            }
            // one forward and one backward partner per group
            for s in &parts {
                prop_assert!(others.iter().filter(|t| weakly_related(s, t, mu).unwrap()).count() <= 1);
                prop_assert!(others.iter().filter(|t| strongly_related(s, t, mu).unwrap()).count() <= 1);
            }
            for t in &others {
                prop_assert!(parts.iter().filter(|s| weakly_related(t, s, mu).unwrap()).count() <= 1);
            }
            Ok(())
        })
        .map_err(|e| format!("propositions: {e}"))?;
    Ok(cases)
}

fn invariants() -> Outcome {
    let cases = propositions()?;
    let mut flagged = 0;
    for seed in 0..INVARIANT_INSTANCES {
        flagged += instance_invariants(seed)?;
    }
    Ok(format!(
        "{cases} proposition cases; {INVARIANT_INSTANCES} instances with partitions conserved, out-degrees <= 1, coverage exact outside {flagged} corner diagnostics, online = finalized"
    ))
}

fn main() {
    let criteria: [Criterion; 6] = [
        ("oracle equivalence", oracle_equivalence),
        ("synthetic ground truth", synthetic_truth),
        ("chain of four", chain_of_four),
        ("throughput", throughput),
        ("epsilon trends", epsilon_trends),
        ("invariant suites", invariants),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = clock.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS [{secs:.1} s] {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL [{secs:.1} s] {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
