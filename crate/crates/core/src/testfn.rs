//! Integrands F for jump-measure and compensator functionals.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum TestFunction {
    One,
    Identity,
    Square,
    TruncatedSquare { kappa: f64 },
    /// x² ∧ |x|
    TruncatedAbs,
    PosTail { kappa: f64 },
    /// −log(1+x)·1_{x<−η}
    NegLogTail { eta: f64 },
    Log1p,
    XmLog,
    Entropy,
    Expm,
    /// Piecewise-linear interpolation of (x, F(x)) knots, constant outside.
    Custom { table: Vec<[f64; 2]> },
}

/// Growth of F along a limit of its argument, as ~ s^p (log s)^q in a
/// variable s → ∞ that drives the argument.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tail {
    Zero,
    Power { p: f64, q: f64 },
    Exponential,
}

/// Behaviour of F near a point where it may vanish.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ZeroOrder {
    NonZero,
    Order(f64),
    Flat,
}

impl TestFunction {
    pub fn is_log_family(&self) -> bool {
        matches!(self, TestFunction::Log1p | TestFunction::XmLog | TestFunction::Entropy | TestFunction::NegLogTail { .. })
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if self.is_log_family() && !(x > -1.0) {
            return Err(Error::DomainError(format!("{} needs x > -1, got {x}", self.name())));
        }
        Ok(match self {
            TestFunction::One => 1.0,
            TestFunction::Identity => x,
            TestFunction::Square => x * x,
            TestFunction::TruncatedSquare { kappa } => {
                if x.abs() <= *kappa {
                    x * x
                } else {
                    0.0
                }
            }
            TestFunction::TruncatedAbs => (x * x).min(x.abs()),
            TestFunction::PosTail { kappa } => {
                if x > *kappa {
                    x
                } else {
                    0.0
                }
            }
            TestFunction::NegLogTail { eta } => {
                if x < -*eta {
                    -x.ln_1p()
                } else {
                    0.0
                }
            }
            TestFunction::Log1p => x.ln_1p(),
            TestFunction::XmLog => x - x.ln_1p(),
            TestFunction::Entropy => (1.0 + x) * x.ln_1p() - x,
            TestFunction::Expm => x.exp_m1() - x,
            TestFunction::Custom { table } => interp(table, x),
        })
    }

    /// Evaluate at x = e^l − 1, keeping precision when 1 + x is tiny or huge.
    pub fn eval_log(&self, l: f64) -> f64 {
        match self {
            TestFunction::Log1p => l,
            TestFunction::XmLog => l.exp_m1() - l,
            TestFunction::Entropy => l.exp() * l - l.exp_m1(),
            TestFunction::NegLogTail { eta } => {
                if l.exp_m1() < -*eta {
                    -l
                } else {
                    0.0
                }
            }
            _ => self.eval(l.exp_m1()).unwrap_or(f64::NAN),
        }
    }

    /// Growth as x → +∞ with x ~ s^E: F ~ s^{pE} (log s)^q; reported as (p, q).
    pub fn tail_pos(&self) -> Tail {
        match self {
            TestFunction::One => Tail::Power { p: 0.0, q: 0.0 },
            TestFunction::Identity | TestFunction::TruncatedAbs | TestFunction::PosTail { .. } | TestFunction::XmLog => {
                Tail::Power { p: 1.0, q: 0.0 }
            }
            TestFunction::Square => Tail::Power { p: 2.0, q: 0.0 },
            TestFunction::TruncatedSquare { .. } | TestFunction::NegLogTail { .. } => Tail::Zero,
            TestFunction::Log1p => Tail::Power { p: 0.0, q: 1.0 },
            TestFunction::Entropy => Tail::Power { p: 1.0, q: 1.0 },
            TestFunction::Expm => Tail::Exponential,
            TestFunction::Custom { table } => const_tail(table.last()),
        }
    }

    /// Growth as x → −∞ (non-log functions only).
    pub fn tail_neg(&self) -> Tail {
        match self {
            TestFunction::One => Tail::Power { p: 0.0, q: 0.0 },
            TestFunction::Identity | TestFunction::TruncatedAbs | TestFunction::Expm => Tail::Power { p: 1.0, q: 0.0 },
            TestFunction::Square => Tail::Power { p: 2.0, q: 0.0 },
            TestFunction::TruncatedSquare { .. } | TestFunction::PosTail { .. } => Tail::Zero,
            TestFunction::Custom { table } => const_tail(table.first()),
            // undefined below −1
            _ => Tail::Exponential,
        }
    }

    /// Behaviour as x ↓ −1, with 1 + x ~ s^{−E}: log-singular functions grow like log s.
    pub fn tail_minus_one(&self) -> Tail {
        match self {
            TestFunction::Log1p | TestFunction::XmLog | TestFunction::NegLogTail { .. } => Tail::Power { p: 0.0, q: 1.0 },
            TestFunction::Entropy => Tail::Power { p: 0.0, q: 0.0 },
            TestFunction::TruncatedSquare { kappa } if *kappa < 1.0 => Tail::Zero,
            TestFunction::PosTail { kappa } if *kappa >= -1.0 => Tail::Zero,
            _ => Tail::Power { p: 0.0, q: 0.0 },
        }
    }

    pub fn zero_order_at(&self, x0: f64) -> ZeroOrder {
        let v = self.eval(x0).unwrap_or(f64::NAN);
        if v.is_nan() {
            return ZeroOrder::NonZero;
        }
        if v != 0.0 {
            return ZeroOrder::NonZero;
        }
        match self {
            TestFunction::TruncatedSquare { kappa } if x0.abs() > *kappa => ZeroOrder::Flat,
            TestFunction::PosTail { kappa } if x0 < *kappa => ZeroOrder::Flat,
            TestFunction::NegLogTail { eta } if x0 > -*eta => ZeroOrder::Flat,
            TestFunction::Identity | TestFunction::Log1p => ZeroOrder::Order(1.0),
            TestFunction::Square
            | TestFunction::TruncatedSquare { .. }
            | TestFunction::TruncatedAbs
            | TestFunction::XmLog
            | TestFunction::Entropy
            | TestFunction::Expm => ZeroOrder::Order(2.0),
            _ => ZeroOrder::Order(1.0),
        }
    }

    pub fn name(&self) -> String {
        match self {
            TestFunction::One => "one".into(),
            TestFunction::Identity => "identity".into(),
            TestFunction::Square => "square".into(),
            TestFunction::TruncatedSquare { kappa } => format!("truncated_square:{kappa}"),
            TestFunction::TruncatedAbs => "truncated_abs".into(),
            TestFunction::PosTail { kappa } => format!("pos_tail:{kappa}"),
            TestFunction::NegLogTail { eta } => format!("neg_log_tail:{eta}"),
            TestFunction::Log1p => "log1p".into(),
            TestFunction::XmLog => "xm_log".into(),
            TestFunction::Entropy => "entropy".into(),
            TestFunction::Expm => "expm".into(),
            TestFunction::Custom { .. } => "custom".into(),
        }
    }

    /// Build from a CLI tag plus an optional threshold.
    pub fn from_tag(tag: &str, kappa: Option<f64>) -> Result<TestFunction> {
        let need = |k: Option<f64>| -> Result<f64> {
            let k = k.unwrap_or(1.0);
            if k.is_finite() && k > 0.0 {
                Ok(k)
            } else {
                Err(Error::Parse(format!("threshold for {tag} must be positive and finite")))
            }
        };
        Ok(match tag {
            "one" => TestFunction::One,
            "identity" | "x" => TestFunction::Identity,
            "square" | "x2" => TestFunction::Square,
            "truncated_square" => TestFunction::TruncatedSquare { kappa: need(kappa)? },
            "truncated_abs" => TestFunction::TruncatedAbs,
            "pos_tail" => TestFunction::PosTail { kappa: need(kappa)? },
            "neg_log_tail" => TestFunction::NegLogTail { eta: need(kappa)? },
            "log1p" => TestFunction::Log1p,
            "xm_log" => TestFunction::XmLog,
            "entropy" => TestFunction::Entropy,
            "expm" => TestFunction::Expm,
            other => return Err(Error::Parse(format!("unknown functional {other:?}"))),
        })
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// `tag` or `tag:kappa`.
impl FromStr for TestFunction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.split_once(':') {
            Some((tag, k)) => {
                let k: f64 = k.trim().parse().map_err(|_| Error::Parse(format!("bad threshold in {s:?}")))?;
                TestFunction::from_tag(tag.trim(), Some(k))
            }
            None => TestFunction::from_tag(s, None),
        }
    }
}

fn interp(table: &[[f64; 2]], x: f64) -> f64 {
    if table.is_empty() {
        return 0.0;
    }
    if x <= table[0][0] {
        return table[0][1];
    }
    let last = table[table.len() - 1];
    if x >= last[0] {
        return last[1];
    }
    let i = table.partition_point(|k| k[0] <= x);
    let [x0, y0] = table[i - 1];
    let [x1, y1] = table[i];
    if x1 == x0 {
        return y1;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

fn const_tail(k: Option<&[f64; 2]>) -> Tail {
    match k {
        Some(k) if k[1] != 0.0 => Tail::Power { p: 0.0, q: 0.0 },
        _ => Tail::Zero,
    }
}

/// Check a custom table: finite, strictly increasing knots.
pub fn validate(f: &TestFunction) -> Result<()> {
    match f {
        TestFunction::Custom { table } => {
            if table.is_empty() {
                return Err(Error::InvalidParameters("custom table is empty".into()));
            }
            for w in table.windows(2) {
                if !(w[1][0] > w[0][0]) {
                    return Err(Error::InvalidParameters("custom table knots must increase".into()));
                }
            }
            if table.iter().any(|k| !k[0].is_finite() || !k[1].is_finite()) {
                return Err(Error::InvalidParameters("custom table has non-finite entries".into()));
            }
            Ok(())
        }
        TestFunction::TruncatedSquare { kappa } | TestFunction::PosTail { kappa } | TestFunction::NegLogTail { eta: kappa } => {
            if kappa.is_finite() && *kappa > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameters("threshold must be positive".into()))
            }
        }
        _ => Ok(()),
    }
}
