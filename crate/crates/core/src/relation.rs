//! Domain primitives and the inclusion-coefficient algebra.
//!
//! Every threshold test is an exact integer cross-multiplication: `I(A, B) >= mu`
//! with `mu = p/q` is evaluated as `q * |A ∩ B| >= p * |A|`.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

/// Opaque athlete identifier (typically the bib number).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AthleteId(pub u64);

impl fmt::Display for AthleteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Milliseconds on the shared race clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const fn from_secs(secs: u64) -> Self {
        Timestamp(secs * 1000)
    }

    pub const fn millis(self) -> u64 {
        self.0
    }

    /// Absolute difference in milliseconds.
    pub const fn gap(self, other: Timestamp) -> u64 {
        self.0.abs_diff(other.0)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A control point along the course.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPoint {
    pub index: u32,
    pub distance_m: Option<f64>,
}

/// Ordered control points of a race.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Course {
    points: Vec<ControlPoint>,
}

impl Course {
    /// Builds a course; indices must be dense `0..len` and distances, when
    /// present, strictly increasing.
    pub fn new(mut points: Vec<ControlPoint>) -> Result<Self, ParamError> {
        points.sort_by_key(|p| p.index);
        let mut last: Option<f64> = None;
        for (i, p) in points.iter().enumerate() {
            if p.index as usize != i {
                return Err(ParamError::SparseControlPoints { expected: i as u32, found: p.index });
            }
            if let Some(d) = p.distance_m {
                if !d.is_finite() || last.is_some_and(|l| d <= l) {
                    return Err(ParamError::NonIncreasingDistance { index: p.index });
                }
                last = Some(d);
            }
        }
        Ok(Course { points })
    }

    /// Course with `count` control points evenly spaced over `length_m` meters,
    /// the last one at the finish.
    pub fn evenly_spaced(count: u32, length_m: f64) -> Self {
        let points =
            (0..count).map(|i| ControlPoint { index: i, distance_m: Some(length_m * f64::from(i + 1) / f64::from(count)) }).collect();
        Course { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, index: u32) -> Option<&ControlPoint> {
        self.points.get(index as usize)
    }

    pub fn distance(&self, index: u32) -> Option<f64> {
        self.get(index).and_then(|p| p.distance_m)
    }

    pub fn points(&self) -> &[ControlPoint] {
        &self.points
    }
}

/// One athlete crossing one control point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Event {
    pub athlete: AthleteId,
    pub cp: u32,
    pub time: Timestamp,
}

impl Event {
    pub const fn new(athlete: u64, cp: u32, millis: u64) -> Self {
        Event { athlete: AthleteId(athlete), cp, time: Timestamp(millis) }
    }

    /// Canonical stream order: time, then control point, then athlete.
    pub fn stream_key(&self) -> (Timestamp, u32, AthleteId) {
        (self.time, self.cp, self.athlete)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("mu = {num}/{den} is outside (1/2, 1]")]
    MuOutOfRange { num: u64, den: u64 },
    #[error("cannot parse mu from {0:?}; expected p/q or a decimal")]
    MuSyntax(alloc::string::String),
    #[error("minimum group size must be at least 1")]
    ZeroGroupSize,
    #[error("control point indices must be dense: expected {expected}, found {found}")]
    SparseControlPoints { expected: u32, found: u32 },
    #[error("control point {index} is not farther than its predecessor")]
    NonIncreasingDistance { index: u32 },
}

/// The strictness threshold `mu = num/den`, with `1/2 < mu <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mu {
    num: u64,
    den: u64,
}

impl Mu {
    pub fn new(num: u64, den: u64) -> Result<Self, ParamError> {
        if num == 0 || den == 0 || num > den || 2 * u128::from(num) <= u128::from(den) {
            return Err(ParamError::MuOutOfRange { num, den });
        }
        let g = gcd(num, den);
        Ok(Mu { num: num / g, den: den / g })
    }

    pub const fn num(self) -> u64 {
        self.num
    }

    pub const fn den(self) -> u64 {
        self.den
    }

    /// Whether `shared / total >= mu`, evaluated exactly.
    #[inline]
    pub fn admits(self, shared: u64, total: u64) -> bool {
        u128::from(self.den) * u128::from(shared) >= u128::from(self.num) * u128::from(total)
    }
}

impl Default for Mu {
    fn default() -> Self {
        Mu { num: 7, den: 10 }
    }
}

impl fmt::Display for Mu {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Mu {
    type Err = ParamError;

    /// Accepts `p/q` or a plain decimal such as `0.75`, which becomes `75/100`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || ParamError::MuSyntax(s.into());
        if let Some((p, q)) = s.split_once('/') {
            let p = p.trim().parse::<u64>().map_err(|_| bad())?;
            let q = q.trim().parse::<u64>().map_err(|_| bad())?;
            return Mu::new(p, q);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 18 {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac_val: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int.checked_mul(den).and_then(|v| v.checked_add(frac_val)).ok_or_else(bad)?;
        Mu::new(num, den)
    }
}

/// Grouping and relation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Params {
    /// Maximum gap (ms) between consecutive crossings of one component.
    pub epsilon: u64,
    /// Minimum group size.
    pub m: usize,
    pub mu: Mu,
}

impl Params {
    pub fn new(epsilon: u64, m: usize, mu: Mu) -> Result<Self, ParamError> {
        if m == 0 {
            return Err(ParamError::ZeroGroupSize);
        }
        Ok(Params { epsilon, m, mu })
    }
}

impl Default for Params {
    fn default() -> Self {
        Params { epsilon: 2000, m: 7, mu: Mu::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RelationError {
    #[error("inclusion coefficient of an empty set is undefined")]
    EmptySet,
}

/// `I(A, B)` kept as the exact pair `(|A ∩ B|, |A|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Inclusion {
    pub shared: u64,
    pub total: u64,
}

impl Inclusion {
    pub fn meets(self, mu: Mu) -> bool {
        mu.admits(self.shared, self.total)
    }
}

pub type AthleteSet = BTreeSet<AthleteId>;

pub fn inclusion(a: &AthleteSet, b: &AthleteSet) -> Result<Inclusion, RelationError> {
    if a.is_empty() {
        return Err(RelationError::EmptySet);
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let shared = small.iter().filter(|x| large.contains(x)).count() as u64;
    Ok(Inclusion { shared, total: a.len() as u64 })
}

/// `A ~ B`: a large enough part of `A` lies in `B`.
pub fn weakly_related(a: &AthleteSet, b: &AthleteSet, mu: Mu) -> Result<bool, RelationError> {
    inclusion(a, b).map(|i| i.meets(mu))
}

/// `A ≈ B`: weak relation in both directions.
pub fn strongly_related(a: &AthleteSet, b: &AthleteSet, mu: Mu) -> Result<bool, RelationError> {
    if b.is_empty() {
        return Err(RelationError::EmptySet);
    }
    Ok(weakly_related(a, b, mu)? && weakly_related(b, a, mu)?)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
