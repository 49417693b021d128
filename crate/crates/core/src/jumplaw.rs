//! Jump laws at scheduled times: finite discrete parts plus an optional
//! heavy-tailed continuous part.

use crate::density::{QUAD_ABS_TOL, QUAD_REL_TOL};
use crate::error::{Error, Result};
use crate::numeric::{integrate, Ext};
use crate::testfn::{Tail, TestFunction};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::E;
use std::sync::OnceLock;

/// Cut-off in s = log(1+y) for numerical moments; beyond it a 1/s tail is added.
const S_MAX: f64 = 600.0;

/// Y with density c/((1+y)² log²(e+y)) on [0,∞), reweighted by (1+Y)^tilt
/// and optionally pushed through φ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeavyTail {
    #[serde(default)]
    pub tilt: i32,
    #[serde(default)]
    pub phi: bool,
}

/// ln(e − 1 + e^s) = ln(e + y).
fn ell(s: f64) -> f64 {
    s + ((E - 1.0) * (-s).exp()).ln_1p()
}

impl HeavyTail {
    pub const BASE: HeavyTail = HeavyTail { tilt: 0, phi: false };

    fn weight(&self, s: f64) -> f64 {
        let l = ell(s);
        ((self.tilt - 1) as f64 * s).exp() / (l * l)
    }

    fn raw_integral(&self, f: &TestFunction, s_max: f64, with_tail: bool) -> Result<Ext> {
        let l_of = |s: f64| if self.phi { -s } else { s };
        let (rate, q) = match if self.phi { f.tail_minus_one() } else { f.tail_pos() } {
            Tail::Zero => (f64::NEG_INFINITY, 0.0),
            Tail::Exponential => (f64::INFINITY, 0.0),
            Tail::Power { p, q } => ((self.tilt - 1) as f64 + if self.phi { 0.0 } else { p }, q),
        };
        let finite = rate < 0.0 || (rate == 0.0 && q < 1.0);
        if with_tail && !finite {
            let probe = f.eval_log(l_of(50.0));
            return Ok(if probe < 0.0 { Ext::NegInfinite } else { Ext::PosInfinite });
        }
        let g = |s: f64| {
            let w = self.weight(s);
            if w == 0.0 {
                0.0
            } else {
                w * f.eval_log(l_of(s))
            }
        };
        let mut total = 0.0;
        let mut a = 0.0;
        while a < s_max {
            let b = (a + if a < 8.0 { 1.0 } else { 25.0 }).min(s_max);
            let v = integrate(g, a, b, QUAD_ABS_TOL * 1e-2, QUAD_REL_TOL).value;
            total += v;
            a = b;
            if rate < 0.0 && v.abs() < 1e-18 && a > 40.0 {
                break;
            }
        }
        if with_tail && rate == 0.0 && a >= s_max {
            // integrand ~ C/s² beyond s_max
            total += g(s_max) * s_max;
        }
        Ok(Ext::Finite(total))
    }

    fn normalizer(&self) -> f64 {
        static N0: OnceLock<f64> = OnceLock::new();
        static N1: OnceLock<f64> = OnceLock::new();
        let compute = |t: i32| HeavyTail { tilt: t, phi: false }.raw_integral(&TestFunction::One, S_MAX, true).map(|e| e.to_f64()).unwrap_or(f64::NAN);
        match self.tilt {
            0 => *N0.get_or_init(|| compute(0)),
            1 => *N1.get_or_init(|| compute(1)),
            t => compute(t),
        }
    }

    /// E[(1+Y)^tilt F(T(Y))] / E[(1+Y)^tilt].
    pub fn expectation(&self, f: &TestFunction) -> Result<Ext> {
        if self.tilt > 1 || self.tilt < -1 {
            return Err(Error::Unsupported(format!("heavy-tail tilt {}", self.tilt)));
        }
        Ok(self.raw_integral(f, S_MAX, true)?.scale(1.0 / self.normalizer()))
    }

    /// Same, restricted to Y ≤ e^{s_max} − 1 (for growth diagnostics).
    pub fn truncated_expectation(&self, f: &TestFunction, s_max: f64) -> f64 {
        self.raw_integral(f, s_max, false).map(|e| e.to_f64()).unwrap_or(f64::NAN) / self.normalizer()
    }

    /// One draw of the jump, by rejection from (1+y)^{-2}-type proposals.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let s = match self.tilt {
            0 => loop {
                let u: f64 = rng.random();
                let y = u / (1.0 - u);
                let l = (E + y).ln();
                if rng.random::<f64>() * l * l < 1.0 {
                    break y.ln_1p();
                }
            },
            1 => loop {
                let v: f64 = rng.random();
                let s = v / (1.0 - v);
                let l = ell(s);
                if rng.random::<f64>() * 4.0 * l * l < (1.0 + s) * (1.0 + s) {
                    break s;
                }
            },
            t => return Err(Error::Unsupported(format!("sampling heavy-tail tilt {t}"))),
        };
        // 1 + (−s).exp_m1() keeps about 1e-16·e^s relative error; past PHI_LOG_CAP it
        // rounds to 0 and the reciprocal jump is lost, so tilted draws stop there
        Ok(if self.phi { (-s.min(PHI_LOG_CAP)).exp_m1() } else { s.exp_m1() })
    }

    pub fn tilted(&self) -> HeavyTail {
        if self.phi {
            HeavyTail { tilt: self.tilt - 1, phi: false }
        } else {
            HeavyTail { tilt: self.tilt + 1, phi: true }
        }
    }
}

/// Largest log(1+Y) drawn on the reciprocal side, where 1 + ΔN = e^-s is still
/// known to four digits.
pub const PHI_LOG_CAP: f64 = 27.6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousPart {
    pub mass: f64,
    pub law: HeavyTail,
}

/// ν({t}, ·): (size, mass) pairs plus an optional continuous component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct JumpLaw {
    pub discrete: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuous: Option<ContinuousPart>,
}

impl JumpLaw {
    pub fn discrete(pairs: Vec<[f64; 2]>) -> JumpLaw {
        JumpLaw { discrete: pairs, continuous: None }
    }

    pub fn total_mass(&self) -> f64 {
        self.discrete.iter().map(|p| p[1]).sum::<f64>() + self.continuous.as_ref().map_or(0.0, |c| c.mass)
    }

    pub fn validate(&self) -> Result<()> {
        for &[x, m] in &self.discrete {
            if !x.is_finite() || !m.is_finite() || m < 0.0 {
                return Err(Error::InvalidParameters(format!("bad atom entry ({x}, {m})")));
            }
        }
        if let Some(c) = &self.continuous {
            if !(c.mass >= 0.0) {
                return Err(Error::InvalidParameters("continuous mass must be nonnegative".into()));
            }
        }
        if self.total_mass() > 1.0 + 1e-12 {
            return Err(Error::InvalidParameters(format!("atom masses sum to {} > 1", self.total_mass())));
        }
        Ok(())
    }

    /// ∫ F dν({t},·); zero-mass entries are skipped.
    pub fn integral(&self, f: &TestFunction) -> Result<Ext> {
        let mut acc = Ext::Finite(0.0);
        let mut parts = Vec::with_capacity(self.discrete.len());
        for &[x, m] in &self.discrete {
            if m == 0.0 {
                continue;
            }
            parts.push(m * f.eval(x)?);
        }
        acc = acc.add(Ext::Finite(crate::numeric::kahan(parts))).unwrap();
        if let Some(c) = &self.continuous {
            if c.mass > 0.0 {
                let e = c.law.expectation(f)?.scale(c.mass);
                acc = acc.add(e).ok_or_else(|| Error::IntegrabilityError("∞ − ∞ in atom integral".into()))?;
            }
        }
        Ok(acc)
    }

    pub fn mean(&self) -> Result<Ext> {
        self.integral(&TestFunction::Identity)
    }

    /// None when the draw lands on "no jump" (leftover mass or size 0).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<f64>> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &[x, m] in &self.discrete {
            acc += m;
            if u < acc {
                return Ok(if x == 0.0 { None } else { Some(x) });
            }
        }
        if let Some(c) = &self.continuous {
            acc += c.mass;
            if u < acc {
                let y = c.law.sample(rng)?;
                return Ok(if y == 0.0 { None } else { Some(y) });
            }
        }
        Ok(None)
    }

    /// Sizes φ(x) with masses (1+x)·m; requires sizes > −1 where mass > 0.
    pub fn tilted(&self) -> Result<JumpLaw> {
        let mut d = Vec::with_capacity(self.discrete.len());
        for &[x, m] in &self.discrete {
            if m == 0.0 {
                continue;
            }
            if !(x > -1.0) {
                return Err(Error::DomainError(format!("cannot tilt atom at size {x} <= -1")));
            }
            d.push([-x / (1.0 + x), (1.0 + x) * m]);
        }
        let continuous = match &self.continuous {
            None => None,
            Some(c) => {
                let w = c.law.expectation(&TestFunction::Identity)?;
                let Ext::Finite(mean) = w else {
                    return Err(Error::IntegrabilityError("tilting needs a finite first moment".into()));
                };
                Some(ContinuousPart { mass: c.mass * (1.0 + mean), law: c.law.tilted() })
            }
        };
        Ok(JumpLaw { discrete: d, continuous })
    }

    pub fn has_size_at_most(&self, bound: f64) -> bool {
        self.discrete.iter().any(|&[x, m]| m > 0.0 && x <= bound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn tilt_example_atom() {
        let law = JumpLaw::discrete(vec![[1.0, 1.0 / 3.0], [-0.5, 2.0 / 3.0]]);
        let t = law.tilted().unwrap();
        assert!((t.discrete[0][0] + 0.5).abs() < 1e-15 && (t.discrete[0][1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((t.discrete[1][0] - 1.0).abs() < 1e-15 && (t.discrete[1][1] - 1.0 / 3.0).abs() < 1e-15);
        let back = t.tilted().unwrap();
        for (a, b) in back.discrete.iter().zip(&law.discrete) {
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn heavy_tail_moments() {
        let y = HeavyTail::BASE;
        assert!((y.expectation(&TestFunction::One).unwrap().to_f64() - 1.0).abs() < 1e-12);
        let m = y.expectation(&TestFunction::Identity).unwrap();
        assert!(m.is_finite() && m.to_f64() > 0.0);
        assert_eq!(y.expectation(&TestFunction::Entropy).unwrap(), Ext::PosInfinite);
        // truncated entropy moment keeps growing roughly like log S
        let a = y.truncated_expectation(&TestFunction::Entropy, 20.0);
        let b = y.truncated_expectation(&TestFunction::Entropy, 400.0);
        assert!(b > a + 1.0, "{a} {b}");
    }

    #[test]
    fn heavy_tail_sampler_mean_of_bounded_statistic() {
        let y = HeavyTail::BASE;
        let f = TestFunction::Custom { table: vec![[0.0, 0.0], [1.0, 1.0]] };
        let exact = y.expectation(&f).unwrap().to_f64();
        let mut rng = stream(11, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| f.eval(y.sample(&mut rng).unwrap()).unwrap()).collect();
        let (m, se) = crate::numeric::mean_se(&xs);
        assert!((m - exact).abs() < 4.0 * se, "{m} vs {exact} ± {se}");
        let t = y.tilted();
        let ft = TestFunction::Custom { table: vec![[-1.0, 1.0], [0.0, 0.0]] };
        let exact_t = t.expectation(&ft).unwrap().to_f64();
        let xs: Vec<f64> = (0..n).map(|_| ft.eval(t.sample(&mut rng).unwrap()).unwrap()).collect();
        let (m, se) = crate::numeric::mean_se(&xs);
        assert!((m - exact_t).abs() < 4.0 * se, "{m} vs {exact_t} ± {se}");
    }

    #[test]
    fn heavy_tail_tilt_preserves_mass() {
        let q = 0.3;
        let law = JumpLaw { discrete: vec![[-0.5, 0.5]], continuous: Some(ContinuousPart { mass: q, law: HeavyTail::BASE }) };
        let t = law.tilted().unwrap();
        let mean = HeavyTail::BASE.expectation(&TestFunction::Identity).unwrap().to_f64();
        assert!((t.total_mass() - (0.25 + q * (1.0 + mean))).abs() < 1e-12);
    }
}
