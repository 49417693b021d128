//! Finite stopping families standing in for the set of bounded stopping times.

use crate::error::{Error, Result};
use crate::path::{CadlagPath, Direction};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Which derived path a crossing rule watches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    /// The local martingale itself.
    X,
    /// Its stochastic exponential.
    Z,
    /// The criterion process under evaluation.
    C,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StoppingRule {
    Deterministic { t: f64 },
    FirstCrossing { target: Target, level: f64, direction: Dir },
}

/// Serializable mirror of [`Direction`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dir {
    Above,
    Below,
    Abs,
}

impl From<Dir> for Direction {
    fn from(d: Dir) -> Direction {
        match d {
            Dir::Above => Direction::Above,
            Dir::Below => Direction::Below,
            Dir::Abs => Direction::Abs,
        }
    }
}

/// The paths a rule may look at; `z` and `c` are optional when unused.
pub struct RuleInputs<'a> {
    pub x: &'a CadlagPath,
    pub z: Option<&'a CadlagPath>,
    pub c: Option<&'a CadlagPath>,
}

impl StoppingRule {
    pub fn needs(&self, t: Target) -> bool {
        matches!(self, StoppingRule::FirstCrossing { target, .. } if *target == t)
    }

    /// Stopping time on this path, capped at the horizon when not triggered.
    pub fn evaluate(&self, inputs: &RuleInputs) -> Result<f64> {
        let horizon = inputs.x.horizon();
        match *self {
            StoppingRule::Deterministic { t } => Ok(t.min(horizon)),
            StoppingRule::FirstCrossing { target, level, direction } => {
                let p = match target {
                    Target::X => Some(inputs.x),
                    Target::Z => inputs.z,
                    Target::C => inputs.c,
                }
                .ok_or_else(|| Error::InvalidParameters(format!("rule {self} needs the {target:?} path")))?;
                Ok(p.first_crossing_dir(level, direction.into()).map_or(horizon, |t| t.min(horizon)))
            }
        }
    }
}

impl fmt::Display for StoppingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoppingRule::Deterministic { t } => write!(f, "t={t}"),
            StoppingRule::FirstCrossing { target, level, direction } => {
                let name = format!("{target:?}");
                match direction {
                    Dir::Above => write!(f, "cross:{name}>={level}"),
                    Dir::Below => write!(f, "cross:{name}<={level}"),
                    Dir::Abs => write!(f, "cross:|{name}|>={level}"),
                }
            }
        }
    }
}

fn parse_num(s: &str, full: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Parse(format!("bad number in stopping rule '{full}'")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("non-finite number in stopping rule '{full}'")));
    }
    Ok(v)
}

/// `t=4`, `cross:Z>=2`, `cross:X<=-1`, `cross:|X|>=3`, `cross:C>=1`.
impl FromStr for StoppingRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<StoppingRule> {
        let s = s.trim();
        if let Some(v) = s.strip_prefix("t=") {
            let t = parse_num(v, s)?;
            if t < 0.0 {
                return Err(Error::Parse(format!("negative time in '{s}'")));
            }
            return Ok(StoppingRule::Deterministic { t });
        }
        let body = s.strip_prefix("cross:").ok_or_else(|| Error::Parse(format!("unknown stopping rule '{s}'")))?;
        let (lhs, rhs, direction) = if let Some((l, r)) = body.split_once(">=") {
            (l, r, Dir::Above)
        } else if let Some((l, r)) = body.split_once("<=") {
            (l, r, Dir::Below)
        } else {
            return Err(Error::Parse(format!("stopping rule '{s}' needs >= or <=")));
        };
        let lhs = lhs.trim();
        let (name, direction) = match lhs.strip_prefix('|').and_then(|x| x.strip_suffix('|')) {
            Some(inner) if direction == Dir::Above => (inner, Dir::Abs),
            Some(_) => return Err(Error::Parse(format!("'{s}': absolute-value rules use >=")) ),
            None => (lhs, direction),
        };
        let target = match name {
            "X" => Target::X,
            "Z" => Target::Z,
            "C" => Target::C,
            _ => return Err(Error::Parse(format!("unknown target '{name}' in '{s}'"))),
        };
        let level = parse_num(rhs, s)?;
        if direction == Dir::Abs && level < 0.0 {
            return Err(Error::Parse(format!("negative level in '{s}'")));
        }
        Ok(StoppingRule::FirstCrossing { target, level, direction })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingFamily {
    pub rules: Vec<StoppingRule>,
}

impl StoppingFamily {
    /// Deterministic times T·2^-j (j = 0..5), Z crossing 2^k (k = 1..6), criterion crossing {1, 2, 4}.
    pub fn default_for(horizon: f64) -> StoppingFamily {
        let mut rules: Vec<StoppingRule> = (0..=5).map(|j| StoppingRule::Deterministic { t: horizon / 2f64.powi(j) }).collect();
        rules.extend((1..=6).map(|k| StoppingRule::FirstCrossing { target: Target::Z, level: 2f64.powi(k), direction: Dir::Above }));
        rules.extend([1.0, 2.0, 4.0].map(|level| StoppingRule::FirstCrossing { target: Target::C, level, direction: Dir::Above }));
        StoppingFamily { rules }
    }

    /// Integer times 1..=⌊T⌋ (or T alone when T < 1).
    pub fn integer_times(horizon: f64) -> StoppingFamily {
        let n = horizon.floor() as u64;
        let rules = if n == 0 { vec![StoppingRule::Deterministic { t: horizon }] } else { (1..=n).map(|k| StoppingRule::Deterministic { t: k as f64 }).collect() };
        StoppingFamily { rules }
    }

    /// `default`, `integers`, or a comma-separated list of rules.
    pub fn parse(s: &str, horizon: f64) -> Result<StoppingFamily> {
        match s.trim() {
            "default" => Ok(StoppingFamily::default_for(horizon)),
            "integers" => Ok(StoppingFamily::integer_times(horizon)),
            list => {
                let rules = list.split(',').filter(|r| !r.trim().is_empty()).map(str::parse).collect::<Result<Vec<_>>>()?;
                if rules.is_empty() {
                    return Err(Error::Parse("empty stopping family".into()));
                }
                Ok(StoppingFamily { rules })
            }
        }
    }

    pub fn needs(&self, t: Target) -> bool {
        self.rules.iter().any(|r| r.needs(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["t=4", "cross:Z>=2", "cross:X<=-1", "cross:|X|>=3", "cross:C>=0.5"] {
            let r: StoppingRule = s.parse().unwrap();
            assert_eq!(r.to_string(), s);
        }
        for bad in ["", "t=", "t=-1", "cross:Q>=1", "cross:X=1", "cross:|X|<=1", "t=nan"] {
            assert!(bad.parse::<StoppingRule>().is_err(), "{bad}");
        }
    }

    #[test]
    fn crossing_rule_on_path() {
        let x = CadlagPath::builder(5.0).jump(2.0, 3.0).build().unwrap();
        let r: StoppingRule = "cross:X>=2".parse().unwrap();
        assert_eq!(r.evaluate(&RuleInputs { x: &x, z: None, c: None }).unwrap(), 2.0);
        let r: StoppingRule = "cross:X>=9".parse().unwrap();
        assert_eq!(r.evaluate(&RuleInputs { x: &x, z: None, c: None }).unwrap(), 5.0);
        let r: StoppingRule = "cross:Z>=9".parse().unwrap();
        assert!(r.evaluate(&RuleInputs { x: &x, z: None, c: None }).is_err());
    }

    #[test]
    fn default_family_shape() {
        let f = StoppingFamily::default_for(32.0);
        assert_eq!(f.rules.len(), 15);
        assert!(f.needs(Target::Z) && f.needs(Target::C) && !f.needs(Target::X));
        assert_eq!(StoppingFamily::parse("t=1,t=2", 3.0).unwrap().rules.len(), 2);
    }
}
