//! Parsers for compound command-line values.

use peloton_core::{Behavior, Mode, ScriptStep};

pub fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "finalized" => Ok(Mode::Finalized),
        "online" => Ok(Mode::Online),
        _ => Err(format!("unknown mode {s:?}; expected finalized or online")),
    }
}

/// A comma-separated list of epsilon values in milliseconds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Epsilons(pub Vec<u64>);

impl std::str::FromStr for Epsilons {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_epsilons(s).map(Epsilons)
    }
}

pub fn parse_epsilons(s: &str) -> Result<Vec<u64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<u64>().map_err(|_| format!("bad epsilon {v:?}")))
        .collect::<Result<Vec<_>, _>>()
        .and_then(|v| if v.is_empty() { Err("empty epsilon list".into()) } else { Ok(v) })
}

/// `constant`, `explode`, `divide/K` or `scatter/PARTS/EXPLODED`.
pub fn parse_behavior(s: &str) -> Result<Behavior, String> {
    let mut parts = s.split('/');
    let name = parts.next().unwrap_or_default();
    let nums: Vec<u32> = parts.map(|p| p.parse().map_err(|_| format!("bad number {p:?} in {s:?}"))).collect::<Result<_, _>>()?;
    match (name, nums.as_slice()) {
        ("constant", []) => Ok(Behavior::Constant),
        ("explode", []) => Ok(Behavior::Explode),
        ("divide", [k]) => Ok(Behavior::Divide(*k)),
        ("scatter", [parts, exploded]) => Ok(Behavior::Scatter { parts: *parts, exploded: *exploded }),
        _ => Err(format!("bad behavior {s:?}; expected constant, explode, divide/K or scatter/P/E")),
    }
}

/// `PACK:CP:BEHAVIOR`.
pub fn parse_step(s: &str) -> Result<ScriptStep, String> {
    let mut it = s.splitn(3, ':');
    let (Some(pack), Some(cp), Some(behavior)) = (it.next(), it.next(), it.next()) else {
        return Err(format!("bad step {s:?}; expected PACK:CP:BEHAVIOR"));
    };
    Ok(ScriptStep {
        pack: pack.parse().map_err(|_| format!("bad pack {pack:?}"))?,
        cp: cp.parse().map_err(|_| format!("bad control point {cp:?}"))?,
        behavior: parse_behavior(behavior)?,
    })
}
