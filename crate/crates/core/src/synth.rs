//! Deterministic synthetic races.
//!
//! [`generate`] builds races out of packs: fixed-size sets of athletes
//! sharing a pace band and following a behavior script. Packs start in pace
//! order, fastest first, with enough space between them that no two packs
//! ever come within epsilon of each other, so the expected patterns follow
//! from the scripts alone. [`mass_start`] builds an unscripted crowd with
//! per-athlete paces, for studies where packs would be too tidy.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::oracle::oracle_patterns;
use crate::patterns::PatternKind;
use crate::relation::{inclusion, AthleteId, AthleteSet, Event, Params};

/// What a pack does at one control point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Behavior {
    /// The whole pack crosses together.
    #[default]
    Constant,
    /// The pack crosses as `k` near-equal parts, more than epsilon apart.
    Divide(u32),
    /// Every member crosses more than epsilon from every other.
    Explode,
    /// Like `Divide(parts)`, but the last `exploded` parts explode.
    Scatter { parts: u32, exploded: u32 },
}

/// Probabilities of the non-constant behaviors in random plans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorMix {
    pub divide: f64,
    pub explode: f64,
    pub scatter: f64,
}

impl Default for BehaviorMix {
    fn default() -> Self {
        BehaviorMix { divide: 0.04, explode: 0.02, scatter: 0.02 }
    }
}

/// One scripted deviation from constant running.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScriptStep {
    pub pack: u32,
    pub cp: u32,
    pub behavior: Behavior,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Plan {
    /// Every pack runs constant at every control point.
    #[default]
    Constant,
    /// Behaviors drawn per pack and control point from the mix.
    Random(BehaviorMix),
    /// Listed steps; everything else constant.
    Scripted(Vec<ScriptStep>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub athletes: u32,
    pub control_points: u32,
    pub course_m: u32,
    pub pace_bands: u32,
    pub pack_size: u32,
    pub params: Params,
    pub seed: u64,
    pub plan: Plan,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            athletes: 12_500,
            control_points: 100,
            course_m: 42_195,
            pace_bands: 10,
            pack_size: 25,
            params: Params::default(),
            seed: 1,
            plan: Plan::Constant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{athletes} athletes do not fill packs of {pack_size}")]
    UnevenPacks { athletes: u32, pack_size: u32 },
    #[error("at least two control points are needed")]
    TooFewControlPoints,
    #[error("at least one pace band is needed")]
    NoPaceBands,
    #[error("pack {pack} at control point {cp}: {behavior:?} leaves a part below the group threshold")]
    InfeasibleScript { pack: u32, cp: u32, behavior: Behavior },
    #[error("scripted step for pack {pack} at control point {cp} is outside the race")]
    StepOutOfRange { pack: u32, cp: u32 },
    #[error("segments take {have_ms} ms but a pack may spread over {needed_ms} ms")]
    SegmentTooShort { needed_ms: u64, have_ms: u64 },
}

/// Expected results of a generated race.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundTruth {
    pub groups_per_cp: Vec<u64>,
    /// Per control-point pair, counts indexed by [`PatternKind::index`].
    pub pair_counts: Vec<[u64; 9]>,
    /// Longest surviving, traceable-forward, traceable-backward and related
    /// lengths in edges; `None` without groups.
    pub longest_edges: Option<[u32; 4]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct GroundTruthParseError {
    pub line: usize,
    pub message: String,
}

const LONGEST_NAMES: [&str; 4] = ["surviving", "traceable-forward", "traceable-backward", "related"];

impl GroundTruth {
    pub fn totals(&self) -> [u64; 9] {
        let mut t = [0; 9];
        for c in &self.pair_counts {
            for (a, b) in t.iter_mut().zip(c) {
                *a += b;
            }
        }
        t
    }

    pub fn total(&self, kind: PatternKind) -> u64 {
        self.totals()[kind.index()]
    }

    /// Line-oriented text: `groups <cp> <n>`, `pair <cp> <kind>=<n> ...` and
    /// `longest <kind> <edges>`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (cp, n) in self.groups_per_cp.iter().enumerate() {
            let _ = writeln!(s, "groups {cp} {n}");
        }
        for (cp, counts) in self.pair_counts.iter().enumerate() {
            let _ = write!(s, "pair {cp}");
            for k in PatternKind::ALL {
                let _ = write!(s, " {}={}", k.name(), counts[k.index()]);
            }
            s.push('\n');
        }
        if let Some(l) = self.longest_edges {
            for (name, v) in LONGEST_NAMES.iter().zip(l) {
                let _ = writeln!(s, "longest {name} {v}");
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, GroundTruthParseError> {
        let mut gt = GroundTruth::default();
        let mut longest = [None; 4];
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: &str| GroundTruthParseError { line, message: message.to_string() };
            let num = |s: &str| s.parse::<u64>().map_err(|_| err("expected a number"));
            let words: Vec<&str> = raw.split_whitespace().collect();
            match words.as_slice() {
                [] => {}
                ["groups", cp, n] => {
                    if num(cp)? as usize != gt.groups_per_cp.len() {
                        return Err(err("control points out of sequence"));
                    }
                    gt.groups_per_cp.push(num(n)?);
                }
                ["pair", cp, rest @ ..] => {
                    if num(cp)? as usize != gt.pair_counts.len() {
                        return Err(err("pairs out of sequence"));
                    }
                    let mut counts = [0; 9];
                    for item in rest {
                        let (name, v) = item.split_once('=').ok_or_else(|| err("expected kind=count"))?;
                        let kind = PatternKind::from_name(name).ok_or_else(|| err("unknown pattern kind"))?;
                        counts[kind.index()] = num(v)?;
                    }
                    gt.pair_counts.push(counts);
                }
                ["longest", name, v] => {
                    let k = LONGEST_NAMES.iter().position(|n| n == name).ok_or_else(|| err("unknown long-term kind"))?;
                    longest[k] = Some(num(v)? as u32);
                }
                _ => return Err(err("unrecognized line")),
            }
        }
        if longest.iter().any(Option::is_some) {
            let mut l = [0; 4];
            for (slot, v) in l.iter_mut().zip(longest) {
                *slot = v.ok_or(GroundTruthParseError { line: 0, message: "incomplete longest lines".to_string() })?;
            }
            gt.longest_edges = Some(l);
        }
        Ok(gt)
    }
}

/// A run of consecutive pack members crossing together (or exploding).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Part {
    start: u32,
    len: u32,
    cohesive: bool,
}

fn near_equal(size: u32, k: u32) -> impl Iterator<Item = (u32, u32)> {
    let (base, extra) = (size / k, size % k);
    (0..k).scan(0, move |start, i| {
        let len = base + u32::from(i < extra);
        let part = (*start, len);
        *start += len;
        Some(part)
    })
}

fn parts(b: Behavior, size: u32) -> Vec<Part> {
    match b {
        Behavior::Constant => alloc::vec![Part { start: 0, len: size, cohesive: true }],
        Behavior::Explode => alloc::vec![Part { start: 0, len: size, cohesive: false }],
        Behavior::Divide(k) => near_equal(size, k).map(|(start, len)| Part { start, len, cohesive: true }).collect(),
        Behavior::Scatter { parts, exploded } => near_equal(size, parts)
            .enumerate()
            .map(|(i, (start, len))| Part { start, len, cohesive: (i as u32) < parts - exploded })
            .collect(),
    }
}

/// Components a behavior produces, as `(first member, length)`.
fn components(b: Behavior, size: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for p in parts(b, size) {
        if p.cohesive {
            out.push((p.start, p.len));
        } else {
            out.extend((p.start..p.start + p.len).map(|i| (i, 1)));
        }
    }
    out
}

fn feasible(b: Behavior, size: u32, m: usize) -> bool {
    match b {
        Behavior::Constant | Behavior::Explode => true,
        Behavior::Divide(k) => k >= 2 && k <= size && (size / k) as usize >= m,
        Behavior::Scatter { parts, exploded } => {
            parts >= 2 && parts <= size && exploded >= 1 && exploded < parts && (size / parts) as usize >= m
        }
    }
}

fn pack_groups(b: Behavior, size: u32, m: usize) -> Vec<AthleteSet> {
    components(b, size)
        .into_iter()
        .filter(|&(_, len)| len as usize >= m)
        .map(|(start, len)| (u64::from(start)..u64::from(start + len)).map(AthleteId).collect())
        .collect()
}

/// Pattern counts and relation edges between two behaviors of one pack.
#[derive(Debug, Clone)]
struct Transition {
    counts: [u64; 9],
    // (source, target, forward, backward)
    edges: Vec<(usize, usize, bool, bool)>,
}

fn transition(a: Behavior, b: Behavior, cfg: &GeneratorConfig) -> Transition {
    let (p, m, mu) = (cfg.pack_size, cfg.params.m, cfg.params.mu);
    let src = pack_groups(a, p, m);
    let dst = pack_groups(b, p, m);
    let mut counts = [0; 9];
    for r in oracle_patterns(0, &src, &dst, mu).records {
        counts[r.kind().index()] += 1;
    }
    let mut edges = Vec::new();
    for (i, s) in src.iter().enumerate() {
        for (j, t) in dst.iter().enumerate() {
            let f = inclusion(s, t).is_ok_and(|x| x.meets(mu));
            let w = inclusion(t, s).is_ok_and(|x| x.meets(mu));
            if f || w {
                edges.push((i, j, f, w));
            }
        }
    }
    Transition { counts, edges }
}

const BASE_PACE_MS_PER_M: u64 = 180;
const PACE_STEP_MS_PER_M: u64 = 2;

impl GeneratorConfig {
    pub fn packs(&self) -> u32 {
        self.athletes / self.pack_size
    }

    /// Distance of control point `cp` from the start, in meters.
    pub fn distance(&self, cp: u32) -> u64 {
        u64::from(self.course_m) * u64::from(cp + 1) / u64::from(self.control_points)
    }

    fn max_spread(&self) -> u64 {
        let eps = self.params.epsilon;
        u64::from(self.pack_size.saturating_sub(1)) * (eps + 1 + eps / 4)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.pack_size == 0 || !self.athletes.is_multiple_of(self.pack_size) {
            return Err(ConfigError::UnevenPacks { athletes: self.athletes, pack_size: self.pack_size });
        }
        if self.control_points < 2 {
            return Err(ConfigError::TooFewControlPoints);
        }
        if self.pace_bands == 0 {
            return Err(ConfigError::NoPaceBands);
        }
        let shortest =
            (0..self.control_points).map(|cp| self.distance(cp) - if cp == 0 { 0 } else { self.distance(cp - 1) }).min().unwrap_or(0);
        let have_ms = shortest * BASE_PACE_MS_PER_M;
        let needed_ms = self.max_spread() + 1;
        if have_ms < needed_ms {
            return Err(ConfigError::SegmentTooShort { needed_ms, have_ms });
        }
        Ok(())
    }

    /// Behavior of every pack at every control point.
    fn behaviors(&self) -> Result<Vec<Vec<Behavior>>, ConfigError> {
        let (packs, cps) = (self.packs(), self.control_points);
        let mut table = alloc::vec![alloc::vec![Behavior::Constant; cps as usize]; packs as usize];
        match &self.plan {
            Plan::Constant => {}
            Plan::Scripted(steps) => {
                for s in steps {
                    if s.pack >= packs || s.cp >= cps {
                        return Err(ConfigError::StepOutOfRange { pack: s.pack, cp: s.cp });
                    }
                    table[s.pack as usize][s.cp as usize] = s.behavior;
                }
            }
            Plan::Random(mix) => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(1);
                let max_parts = (self.pack_size as usize / self.params.m.max(1)).min(self.pack_size as usize) as u32;
                for row in &mut table {
                    for slot in row.iter_mut() {
                        let r: f64 = rng.gen();
                        *slot = if r < mix.divide && max_parts >= 2 {
                            Behavior::Divide(rng.gen_range(2..=max_parts))
                        } else if r < mix.divide + mix.explode {
                            Behavior::Explode
                        } else if r < mix.divide + mix.explode + mix.scatter && max_parts >= 2 {
                            let parts = rng.gen_range(2..=max_parts);
                            Behavior::Scatter { parts, exploded: rng.gen_range(1..parts) }
                        } else {
                            Behavior::Constant
                        };
                    }
                }
            }
        }
        for (pack, row) in table.iter().enumerate() {
            for (cp, &b) in row.iter().enumerate() {
                if !feasible(b, self.pack_size, self.params.m) {
                    return Err(ConfigError::InfeasibleScript { pack: pack as u32, cp: cp as u32, behavior: b });
                }
            }
        }
        Ok(table)
    }
}

/// Generates a time-sorted event stream and its ground truth.
pub fn generate(cfg: &GeneratorConfig) -> Result<(Vec<Event>, GroundTruth), ConfigError> {
    cfg.validate()?;
    let table = cfg.behaviors()?;
    let events = realize(cfg, &table);
    let truth = ground_truth(cfg, &table);
    Ok((events, truth))
}

fn realize(cfg: &GeneratorConfig, table: &[Vec<Behavior>]) -> Vec<Event> {
    let eps = cfg.params.epsilon;
    let packs = cfg.packs();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);
    let stagger = cfg.max_spread() + eps + 1 + 1000;
    // fastest band first, so gaps between packs never shrink
    let mut order: Vec<u32> = (0..packs).collect();
    order.sort_by_key(|&k| (k % cfg.pace_bands, k));
    let mut events = Vec::with_capacity(cfg.athletes as usize * cfg.control_points as usize);
    for (rank, &pack) in order.iter().enumerate() {
        let start = rank as u64 * stagger;
        let pace = BASE_PACE_MS_PER_M + u64::from(pack % cfg.pace_bands) * PACE_STEP_MS_PER_M;
        let first_id = u64::from(pack) * u64::from(cfg.pack_size) + 1;
        for cp in 0..cfg.control_points {
            let mut t = start + pace * cfg.distance(cp);
            for (n, (first, len)) in components(table[pack as usize][cp as usize], cfg.pack_size).into_iter().enumerate() {
                if n > 0 {
                    t += eps + 1 + rng.gen_range(0..=eps / 4);
                }
                for i in 0..len {
                    if i > 0 {
                        t += rng.gen_range(0..=eps);
                    }
                    events.push(Event::new(first_id + u64::from(first + i), cp, t));
                }
            }
        }
    }
    events.sort_unstable_by_key(Event::stream_key);
    events
}

fn ground_truth(cfg: &GeneratorConfig, table: &[Vec<Behavior>]) -> GroundTruth {
    let cps = cfg.control_points as usize;
    let mut cache: BTreeMap<(Behavior, Behavior), Transition> = BTreeMap::new();
    let mut sizes: BTreeMap<Behavior, usize> = BTreeMap::new();
    let mut gt = GroundTruth { groups_per_cp: alloc::vec![0; cps], pair_counts: alloc::vec![[0; 9]; cps - 1], longest_edges: None };
    let mut best: Option<[u32; 4]> = None;
    for row in table {
        for (cp, &b) in row.iter().enumerate() {
            let n = *sizes.entry(b).or_insert_with(|| pack_groups(b, cfg.pack_size, cfg.params.m).len());
            gt.groups_per_cp[cp] += n as u64;
        }
        for cp in 0..cps - 1 {
            let tr = cache.entry((row[cp], row[cp + 1])).or_insert_with(|| transition(row[cp], row[cp + 1], cfg));
            for (a, b) in gt.pair_counts[cp].iter_mut().zip(tr.counts) {
                *a += b;
            }
        }
        // longest chains within this pack: [s, f, r] forward, b backward
        let mut fwd: Vec<Vec<[u32; 3]>> = row.iter().map(|b| alloc::vec![[0; 3]; sizes[b]]).collect();
        let mut bwd: Vec<Vec<u32>> = row.iter().map(|b| alloc::vec![0; sizes[b]]).collect();
        for cp in 0..cps - 1 {
            let tr = &cache[&(row[cp], row[cp + 1])];
            for &(s, t, f, w) in &tr.edges {
                let from = fwd[cp][s];
                let to = &mut fwd[cp + 1][t];
                if f && w {
                    to[0] = from[0] + 1;
                }
                if f {
                    to[1] = to[1].max(from[1] + 1);
                }
                to[2] = to[2].max(from[2] + 1);
            }
        }
        for cp in (0..cps - 1).rev() {
            let tr = &cache[&(row[cp], row[cp + 1])];
            for &(s, t, _, w) in &tr.edges {
                if w {
                    bwd[cp][s] = bwd[cp][s].max(bwd[cp + 1][t] + 1);
                }
            }
        }
        for (f, b) in fwd.iter().flatten().zip(bwd.iter().flatten()) {
            let cur = best.get_or_insert([0; 4]);
            cur[0] = cur[0].max(f[0]);
            cur[1] = cur[1].max(f[1]);
            cur[2] = cur[2].max(*b);
            cur[3] = cur[3].max(f[2]);
        }
    }
    gt.longest_edges = best;
    gt
}

/// A crowd with individual paces and a staggered start.
#[derive(Debug, Clone, PartialEq)]
pub struct MassStartConfig {
    pub athletes: u32,
    /// Distance of every control point in meters, increasing.
    pub distances_m: Vec<u32>,
    /// Paces are drawn between these bounds, in ms per meter.
    pub pace_ms_per_m: (u32, u32),
    /// Start delay of the slowest athlete relative to the gun, in ms.
    pub start_spread_ms: u64,
    /// Per-segment pace variation, as a fraction of the athlete's pace.
    pub variation: f64,
    /// Crossing times are truncated to multiples of this.
    pub resolution_ms: u64,
    pub seed: u64,
}

impl Default for MassStartConfig {
    fn default() -> Self {
        MassStartConfig {
            athletes: 20_000,
            distances_m: alloc::vec![5000, 10000, 15000, 20000, 21098, 25000, 30000, 35000, 40000, 42195],
            pace_ms_per_m: (170, 420),
            start_spread_ms: 30 * 60 * 1000,
            variation: 0.04,
            resolution_ms: 1000,
            seed: 1,
        }
    }
}

/// Generates a time-sorted mass-start race. Faster athletes start earlier;
/// paces cluster around the middle of the range.
pub fn mass_start(cfg: &MassStartConfig) -> Vec<Event> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = (f64::from(cfg.pace_ms_per_m.0), f64::from(cfg.pace_ms_per_m.1));
    let res = cfg.resolution_ms.max(1);
    let mut events = Vec::with_capacity(cfg.athletes as usize * cfg.distances_m.len());
    for a in 0..cfg.athletes {
        // mean of two uniforms: triangular around the middle
        let u = (rng.gen::<f64>() + rng.gen::<f64>()) / 2.0;
        let pace = lo + (hi - lo) * u;
        let start = (cfg.start_spread_ms as f64 * u) as u64;
        let mut t = start as f64;
        let mut prev = 0u32;
        let mut last = None;
        for (cp, &d) in cfg.distances_m.iter().enumerate() {
            let wobble = 1.0 + cfg.variation * (2.0 * rng.gen::<f64>() - 1.0);
            t += f64::from(d - prev) * pace * wobble;
            prev = d;
            let mut stamp = (t as u64) / res * res;
            if last.is_some_and(|l| stamp <= l) {
                stamp = last.unwrap_or(0) + res;
            }
            last = Some(stamp);
            events.push(Event::new(u64::from(a) + 1, cp as u32, stamp));
        }
    }
    events.sort_unstable_by_key(Event::stream_key);
    events
}

/// A small random race with its parameters, for equivalence testing.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub events: Vec<Event>,
    pub params: Params,
    pub control_points: u32,
}

/// Draws a race of at most 200 athletes and 20 control points. Athletes
/// belong to clusters of uneven size; clusters wander between time slots,
/// so they collide (merge) and separate (split), while individual athletes
/// churn between clusters and occasionally miss a control point.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let athletes = rng.gen_range(1..=200u64);
    let cps = rng.gen_range(2..=20u32);
    let epsilon = rng.gen_range(0..=3000u64);
    let m = rng.gen_range(1..=8usize);
    let q = rng.gen_range(2..=20u64);
    let p = rng.gen_range(q / 2 + 1..=q);
    let mu = crate::relation::Mu::new(p, q).expect("mu in range");
    let params = Params::new(epsilon, m, mu).expect("valid parameters");
    let clusters = rng.gen_range(1..=12u32);
    let slots = rng.gen_range(1..=clusters);
    let stay = rng.gen_range(0.3..1.0);
    let churn = rng.gen_range(0.0..0.3);
    let missing = rng.gen_range(0.0..0.05);
    // slot spacing straddles epsilon so neighbouring slots sometimes touch
    let spacing = (epsilon * rng.gen_range(1..=3u64)).max(1) + rng.gen_range(0..=epsilon / 2 + 1);
    let spread = epsilon + 1;
    let pick = |rng: &mut ChaCha8Rng| {
        // skewed towards low indices: uneven cluster sizes
        let u: f64 = rng.gen();
        ((u * u * f64::from(clusters)) as u32).min(clusters - 1)
    };
    let mut member: Vec<u32> = (0..athletes).map(|_| pick(&mut rng)).collect();
    let mut slot: Vec<u32> = (0..clusters).map(|_| rng.gen_range(0..slots)).collect();
    let mut events = Vec::new();
    for cp in 0..cps {
        let base = u64::from(cp) * 1_000_000;
        for s in slot.iter_mut() {
            if !rng.gen_bool(stay) {
                *s = rng.gen_range(0..slots);
            }
        }
        for (a, c) in member.iter_mut().enumerate() {
            if rng.gen_bool(churn) {
                *c = pick(&mut rng);
            }
            if rng.gen_bool(missing) {
                continue;
            }
            let t = base + u64::from(slot[*c as usize]) * spacing + rng.gen_range(0..=spread);
            events.push(Event::new(a as u64 + 1, cp, t));
        }
    }
    events.sort_unstable_by_key(Event::stream_key);
    Instance { events, params, control_points: cps }
}
