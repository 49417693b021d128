//! Deterministic sequences indexed by n = 1, 2, ... with closed-form series facts.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SeqFamily {
    Const { value: f64 },
    /// (−1)^n / √n
    AltInvSqrt,
    /// (−1)^n / n
    AltHarmonic,
    /// −1/n
    NegHarmonic,
    /// e^{(−1)^n/√n} − 1
    ExpAltInvSqrtM1,
    /// ±1/n with partial sums swinging to ±1, ±2, ±3, ...
    OscillatingHarmonic,
    /// scale · ratio^n
    Geometric { scale: f64, ratio: f64 },
    /// Largest 2^{-k} with p log(1+1/p) ≤ n^{-3} and p ≤ 2^{-n}(e^{1/n²} − 1)^n.
    DyadicUi,
    /// values[n−1]; zero past the end.
    Table { values: Vec<f64> },
    /// base with individual entries replaced.
    Patched { base: Box<SeqFamily>, patches: Vec<(u64, f64)> },
}

/// Behaviour of the partial sums Σ_{n≤m} a_n as m → ∞.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumLimit {
    Finite,
    PlusInfinity,
    MinusInfinity,
    Oscillates,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesFacts {
    pub sum: SumLimit,
    pub squares_finite: bool,
    pub abs_finite: bool,
}

fn dyadic_ui_exponent(n: u64) -> i32 {
    let nf = n as f64;
    let b = nf - nf * (1.0 / (nf * nf)).exp_m1().log2();
    let mut k = b.ceil().max(1.0) as i32;
    // p log(1+1/p) ≤ n^{-3}, in logs
    let bound = -3.0 * nf.ln();
    loop {
        let kf = k as f64;
        let lhs = -kf * std::f64::consts::LN_2 + (kf * std::f64::consts::LN_2 + (-kf * std::f64::consts::LN_2).exp().ln_1p()).ln();
        if lhs <= bound {
            return k;
        }
        k += 1;
    }
}

impl SeqFamily {
    /// a_n for n ≥ 1.
    pub fn value(&self, n: u64) -> f64 {
        let nf = n as f64;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        match self {
            SeqFamily::Const { value } => *value,
            SeqFamily::AltInvSqrt => sign / nf.sqrt(),
            SeqFamily::AltHarmonic => sign / nf,
            SeqFamily::NegHarmonic => -1.0 / nf,
            SeqFamily::ExpAltInvSqrtM1 => (sign / nf.sqrt()).exp_m1(),
            SeqFamily::OscillatingHarmonic => *self.values(n).last().unwrap_or(&0.0),
            SeqFamily::Geometric { scale, ratio } => scale * ratio.powf(nf),
            SeqFamily::DyadicUi => 2f64.powi(-dyadic_ui_exponent(n)),
            SeqFamily::Table { values } => values.get((n as usize).wrapping_sub(1)).copied().unwrap_or(0.0),
            SeqFamily::Patched { base, patches } => patches.iter().rev().find(|p| p.0 == n).map_or_else(|| base.value(n), |p| p.1),
        }
    }

    /// a_1, ..., a_m.
    pub fn values(&self, m: u64) -> Vec<f64> {
        match self {
            SeqFamily::OscillatingHarmonic => {
                let mut out = Vec::with_capacity(m as usize);
                let (mut s, mut up, mut level) = (0.0, true, 1.0);
                for n in 1..=m {
                    let x = if up { 1.0 } else { -1.0 } / n as f64;
                    out.push(x);
                    s += x;
                    if up && s >= level {
                        up = false;
                    } else if !up && s <= -level {
                        up = true;
                        level += 1.0;
                    }
                }
                out
            }
            SeqFamily::Patched { base, patches } => {
                let mut v = base.values(m);
                for &(n, x) in patches {
                    if n >= 1 && n <= m {
                        v[n as usize - 1] = x;
                    }
                }
                v
            }
            _ => (1..=m).map(|n| self.value(n)).collect(),
        }
    }

    /// Closed-form partial sum Σ_{n≤m} a_n where one exists.
    pub fn partial_sum(&self, m: u64) -> Option<f64> {
        match self {
            SeqFamily::AltHarmonic => Some(crate::numeric::alternating_harmonic(m)),
            SeqFamily::NegHarmonic => Some(-crate::numeric::digamma(m as f64 + 1.0) - EULER_GAMMA),
            SeqFamily::Const { value } => Some(value * m as f64),
            SeqFamily::Geometric { scale, ratio } => {
                if *ratio == 1.0 {
                    Some(scale * m as f64)
                } else {
                    Some(scale * ratio * (1.0 - ratio.powf(m as f64)) / (1.0 - ratio))
                }
            }
            _ => None,
        }
    }

    pub fn facts(&self) -> SeriesFacts {
        use SumLimit::*;
        let all = |sum| SeriesFacts { sum, squares_finite: true, abs_finite: true };
        match self {
            SeqFamily::Const { value } => {
                if *value == 0.0 {
                    all(Finite)
                } else {
                    SeriesFacts { sum: if *value > 0.0 { PlusInfinity } else { MinusInfinity }, squares_finite: false, abs_finite: false }
                }
            }
            SeqFamily::AltInvSqrt => SeriesFacts { sum: Finite, squares_finite: false, abs_finite: false },
            SeqFamily::AltHarmonic => SeriesFacts { sum: Finite, squares_finite: true, abs_finite: false },
            SeqFamily::NegHarmonic => SeriesFacts { sum: MinusInfinity, squares_finite: true, abs_finite: false },
            SeqFamily::ExpAltInvSqrtM1 => SeriesFacts { sum: PlusInfinity, squares_finite: false, abs_finite: false },
            SeqFamily::OscillatingHarmonic => SeriesFacts { sum: Oscillates, squares_finite: true, abs_finite: false },
            SeqFamily::Geometric { scale, ratio } => {
                if *scale == 0.0 || ratio.abs() < 1.0 {
                    all(Finite)
                } else {
                    let sum = if *ratio <= -1.0 {
                        Oscillates
                    } else if *scale > 0.0 {
                        PlusInfinity
                    } else {
                        MinusInfinity
                    };
                    SeriesFacts { sum, squares_finite: false, abs_finite: false }
                }
            }
            SeqFamily::DyadicUi | SeqFamily::Table { .. } => all(Finite),
            SeqFamily::Patched { base, .. } => base.facts(),
        }
    }

    /// Checks that the sequence can serve as rare-event probabilities: p_n ∈ [0,1) and Σp_n < ∞.
    pub fn validate_probabilities(&self, m: u64) -> Result<()> {
        if !self.facts().abs_finite {
            return Err(Error::InvalidParameters(format!("probability sequence {self:?} is not summable")));
        }
        for (i, p) in self.values(m).into_iter().enumerate() {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidParameters(format!("p_{} = {p} is outside [0,1)", i + 1)));
            }
        }
        Ok(())
    }

    pub fn validate_values(&self, m: u64) -> Result<()> {
        if let SeqFamily::Patched { base, .. } = self {
            if matches!(**base, SeqFamily::Patched { .. }) {
                return Err(Error::InvalidParameters("nested patches".into()));
            }
        }
        if let Some((i, x)) = self.values(m).into_iter().enumerate().find(|(_, x)| !x.is_finite()) {
            return Err(Error::InvalidParameters(format!("a_{} = {x} is not finite", i + 1)));
        }
        Ok(())
    }
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
