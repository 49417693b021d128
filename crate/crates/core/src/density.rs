//! Intensities and marks for single-jump (Cox) models.
//!
//! Time functions are finite sums Σ c_i (1+s)^{k_i}; these cover every
//! preset and keep Λ(t) = ∫λ and most F∗ν integrals in closed form.

use crate::error::{Error, Result};
use crate::numeric::{integrate, integrate_to_infinity, Ext};
use crate::testfn::{Tail, TestFunction, ZeroOrder};
use serde::{Deserialize, Serialize};
use std::borrow::Cow;
use std::sync::OnceLock;

pub const QUAD_ABS_TOL: f64 = 1e-13;
pub const QUAD_REL_TOL: f64 = 1e-12;

/// Σ c (1+s)^k, stored as [c, k] pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct PowerSum {
    pub terms: Vec<[f64; 2]>,
}

impl PowerSum {
    pub fn new(terms: Vec<[f64; 2]>) -> PowerSum {
        let mut out: Vec<[f64; 2]> = Vec::new();
        for [c, k] in terms {
            if let Some(t) = out.iter_mut().find(|t| t[1] == k) {
                t[0] += c;
            } else {
                out.push([c, k]);
            }
        }
        out.retain(|t| t[0] != 0.0);
        out.sort_by(|a, b| b[1].total_cmp(&a[1]));
        PowerSum { terms: out }
    }

    pub fn constant(c: f64) -> PowerSum {
        PowerSum::new(vec![[c, 0.0]])
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, s: f64) -> f64 {
        let b = 1.0 + s;
        self.terms.iter().map(|&[c, k]| c * pow(b, k)).sum()
    }

    fn antiderivative(&self, s: f64) -> f64 {
        let b = 1.0 + s;
        self.terms
            .iter()
            .map(|&[c, k]| if k == -1.0 { c * b.ln() } else { c * pow(b, k + 1.0) / (k + 1.0) })
            .sum()
    }

    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        // term by term to avoid cancellation between large antiderivatives
        let (x, y) = (1.0 + a, 1.0 + b);
        self.terms
            .iter()
            .map(|&[c, k]| {
                if k == -1.0 {
                    c * (y / x).ln()
                } else if k == 0.0 {
                    c * (b - a)
                } else {
                    c * (pow(y, k + 1.0) - pow(x, k + 1.0)) / (k + 1.0)
                }
            })
            .sum()
    }

    pub fn integral_to_inf(&self, a: f64) -> Ext {
        match self.terms.first() {
            None => Ext::Finite(0.0),
            Some(&[c, k]) if k >= -1.0 => {
                if c > 0.0 {
                    Ext::PosInfinite
                } else {
                    Ext::NegInfinite
                }
            }
            _ => Ext::Finite(-self.antiderivative(a)),
        }
    }

    pub fn mul(&self, o: &PowerSum) -> PowerSum {
        let mut t = Vec::new();
        for &[c1, k1] in &self.terms {
            for &[c2, k2] in &o.terms {
                t.push([c1 * c2, k1 + k2]);
            }
        }
        PowerSum::new(t)
    }

    pub fn add(&self, o: &PowerSum) -> PowerSum {
        let mut t = self.terms.clone();
        t.extend_from_slice(&o.terms);
        PowerSum::new(t)
    }

    pub fn scale(&self, c: f64) -> PowerSum {
        PowerSum::new(self.terms.iter().map(|&[a, k]| [a * c, k]).collect())
    }

    pub fn powi(&self, n: i32) -> Option<PowerSum> {
        if n >= 0 {
            let mut r = PowerSum::constant(1.0);
            for _ in 0..n {
                r = r.mul(self);
            }
            Some(r)
        } else if self.terms.len() == 1 {
            let [c, k] = self.terms[0];
            Some(PowerSum::new(vec![[c.powi(n), k * n as f64]]))
        } else {
            None
        }
    }

    pub fn leading(&self) -> Option<[f64; 2]> {
        self.terms.first().copied()
    }

    pub fn second_exponent(&self) -> Option<f64> {
        self.terms.get(1).map(|t| t[1])
    }
}

fn pow(b: f64, k: f64) -> f64 {
    if k == k.trunc() && k.abs() < 64.0 {
        b.powi(k as i32)
    } else {
        b.powf(k)
    }
}

/// Intensity λ(s)·(1+g(s))^tilt of a single jump of size g(s) (or φ(g(s))).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateDensity {
    pub intensity: PowerSum,
    pub mark: PowerSum,
    #[serde(default)]
    pub phi_mark: bool,
    #[serde(default)]
    pub tilt: i32,
    #[serde(skip)]
    opg: OpgCache,
}

/// 1 + mark, remembered with the mark it was built from.
#[derive(Clone, Debug, Default)]
struct OpgCache(OnceLock<(PowerSum, PowerSum)>);

impl PartialEq for OpgCache {
    fn eq(&self, _: &OpgCache) -> bool {
        true
    }
}

impl RateDensity {
    pub fn new(intensity: PowerSum, mark: PowerSum) -> RateDensity {
        RateDensity { intensity, mark, phi_mark: false, tilt: 0, opg: OpgCache::default() }
    }

    pub fn one_plus_mark(&self) -> PowerSum {
        self.opg_sum().into_owned()
    }

    fn opg_sum(&self) -> Cow<'_, PowerSum> {
        let build = || self.mark.add(&PowerSum::constant(1.0));
        let (m, o) = self.opg.0.get_or_init(|| (self.mark.clone(), build()));
        if *m == self.mark {
            Cow::Borrowed(o)
        } else {
            Cow::Owned(build())
        }
    }

    fn opg_at(&self, s: f64) -> f64 {
        self.opg_sum().eval(s)
    }

    pub fn lambda(&self, s: f64) -> f64 {
        let base = self.intensity.eval(s);
        if self.tilt == 0 {
            base
        } else {
            base * self.opg_at(s).powi(self.tilt)
        }
    }

    /// Jump size if the jump happens at s.
    pub fn jump_at(&self, s: f64) -> f64 {
        if self.phi_mark {
            -self.mark.eval(s) / self.opg_at(s)
        } else {
            self.mark.eval(s)
        }
    }

    fn log1p_jump(&self, s: f64) -> f64 {
        let l = self.opg_at(s).ln();
        if self.phi_mark {
            -l
        } else {
            l
        }
    }

    pub fn validate(&self) -> Result<()> {
        for t in self.intensity.terms.iter().chain(&self.mark.terms) {
            if !t[0].is_finite() || !t[1].is_finite() {
                return Err(Error::InvalidParameters("non-finite power-sum term".into()));
            }
        }
        // nonnegativity on a probe grid; power sums have few sign changes
        for i in 0..=400 {
            let s = (i as f64 / 20.0).exp_m1();
            if self.lambda(s) < 0.0 {
                return Err(Error::InvalidParameters(format!("intensity negative at s={s}")));
            }
            if (self.tilt != 0 || self.phi_mark) && !(self.opg_at(s) > 0.0) {
                return Err(Error::InvalidParameters(format!("1+mark not positive at s={s}")));
            }
        }
        Ok(())
    }

    /// λ_eff as a power sum, when expressible.
    pub fn lambda_sum(&self) -> Option<PowerSum> {
        Some(self.intensity.mul(&self.one_plus_mark().powi(self.tilt)?))
    }

    /// F(jump(s))·λ_eff(s) as a power sum for the polynomial integrands.
    fn closed_integrand(&self, f: &TestFunction) -> Option<PowerSum> {
        let opg = self.one_plus_mark();
        let lam = self.intensity.clone();
        let t = self.tilt;
        // with u = 1+g: jump is u−1, or 1/u − 1 under φ
        let with_pows = |pows: &[(i32, f64)]| -> Option<PowerSum> {
            let mut acc = PowerSum::default();
            for &(j, c) in pows {
                acc = acc.add(&lam.mul(&opg.powi(t + j)?).scale(c));
            }
            Some(acc)
        };
        let sign = if self.phi_mark { -1 } else { 1 };
        match f {
            TestFunction::One => with_pows(&[(0, 1.0)]),
            TestFunction::Identity => with_pows(&[(sign, 1.0), (0, -1.0)]),
            TestFunction::Square => with_pows(&[(2 * sign, 1.0), (sign, -2.0), (0, 1.0)]),
            _ => None,
        }
    }

    fn integrand(&self, f: &TestFunction, s: f64) -> f64 {
        let lam = self.lambda(s);
        if lam == 0.0 {
            return 0.0;
        }
        let v = if f.is_log_family() { f.eval_log(self.log1p_jump(s)) } else { f.eval(self.jump_at(s)).unwrap_or(f64::NAN) };
        v * lam
    }

    fn check_domain(&self, f: &TestFunction, a: f64, b: f64) -> Result<()> {
        if !f.is_log_family() || self.phi_mark {
            return Ok(());
        }
        let hi = if b.is_finite() { b } else { a + 1e6 };
        for i in 0..=200 {
            let s = a + (hi - a) * i as f64 / 200.0;
            if !(self.opg_at(s) > 0.0) {
                return Err(Error::DomainError(format!("{} needs jump > -1; jump at s={s} is {}", f.name(), self.jump_at(s))));
            }
        }
        Ok(())
    }

    /// ∫_a^b F(jump(s)) λ_eff(s) ds, b may be +∞.
    pub fn integral(&self, f: &TestFunction, a: f64, b: f64) -> Result<Ext> {
        if !(b > a) {
            return Ok(Ext::Finite(0.0));
        }
        self.check_domain(f, a, b)?;
        if let Some(ps) = self.closed_integrand(f) {
            return Ok(if b.is_finite() { Ext::Finite(ps.integral(a, b)) } else { ps.integral_to_inf(a) });
        }
        if b.is_finite() {
            let q = integrate(|s| self.integrand(f, s), a, b, QUAD_ABS_TOL, QUAD_REL_TOL);
            return Ok(Ext::Finite(q.value));
        }
        if !self.integrable_at_infinity(f) {
            let probe = self.integrand(f, 1e12);
            return Ok(if probe < 0.0 { Ext::NegInfinite } else { Ext::PosInfinite });
        }
        let q = integrate_to_infinity(|s| self.integrand(f, s), a, QUAD_ABS_TOL, QUAD_REL_TOL);
        Ok(Ext::Finite(q.value))
    }

    /// Finite-interval integral without the domain scan, for summing many short pieces.
    pub(crate) fn integral_piece(&self, f: &TestFunction, a: f64, b: f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        if let Some(ps) = self.closed_integrand(f) {
            return ps.integral(a, b);
        }
        integrate(|s| self.integrand(f, s), a, b, QUAD_ABS_TOL, QUAD_REL_TOL).value
    }

    /// Decide ∫^∞ |F(jump)| λ_eff < ∞ from the asymptotic exponents.
    pub fn integrable_at_infinity(&self, f: &TestFunction) -> bool {
        let Some([_, k_int]) = self.intensity.leading() else { return true };
        let opg = self.one_plus_mark();
        let Some([c_g, k_g]) = opg.leading() else {
            // 1+g ≡ 0: the jump is identically −1
            return exponent_ok(k_int, tail_q(f.tail_minus_one()));
        };
        let k_lam = k_int + self.tilt as f64 * k_g;
        let (e, c) = if self.phi_mark { (-k_g, 1.0 / c_g) } else { (k_g, c_g) };
        if e > 0.0 {
            let tail = if c > 0.0 { f.tail_pos() } else { f.tail_neg() };
            match tail {
                Tail::Zero => true,
                Tail::Exponential => false,
                Tail::Power { p, q } => exponent_ok(k_lam + p * e, q),
            }
        } else if e < 0.0 {
            match f.tail_minus_one() {
                Tail::Zero => true,
                Tail::Exponential => false,
                Tail::Power { p, q } => exponent_ok(k_lam + p, q),
            }
        } else {
            let m_inf = c - 1.0;
            match f.zero_order_at(m_inf) {
                ZeroOrder::NonZero => exponent_ok(k_lam, 0.0),
                ZeroOrder::Flat => true,
                ZeroOrder::Order(r) => match opg.second_exponent() {
                    None => true,
                    Some(e2) => exponent_ok(k_lam + r * e2, 0.0),
                },
            }
        }
    }

    /// Λ(t) = ∫_0^t λ_eff.
    pub fn cumulative(&self, t: f64) -> Ext {
        if t.is_infinite() {
            return self.integral(&TestFunction::One, 0.0, f64::INFINITY).unwrap_or(Ext::PosInfinite);
        }
        self.integral(&TestFunction::One, 0.0, t).unwrap_or(Ext::Finite(f64::NAN))
    }

    /// First t with Λ(t) ≥ e, or +∞ when e ≥ Λ(∞).
    pub fn inverse_cumulative(&self, e: f64) -> f64 {
        if let Some(ps) = self.closed_integrand(&TestFunction::One) {
            if let Ext::Finite(total) = ps.integral_to_inf(0.0) {
                if e >= total {
                    return f64::INFINITY;
                }
            }
            if e <= 0.0 {
                return 0.0;
            }
            let mut hi = 1.0;
            while ps.integral(0.0, hi) < e {
                hi *= 2.0;
                if hi > 1e300 {
                    return f64::INFINITY;
                }
            }
            return crate::numeric::bisect(|t| ps.integral(0.0, t) - e, 0.0, hi, 200);
        }
        if let Ext::Finite(total) = self.cumulative(f64::INFINITY) {
            if e >= total {
                return f64::INFINITY;
            }
        }
        if e <= 0.0 {
            return 0.0;
        }
        let mut hi = 1.0;
        while self.cumulative(hi).to_f64() < e {
            hi *= 2.0;
            if hi > 1e300 {
                return f64::INFINITY;
            }
        }
        crate::numeric::bisect(|t| self.cumulative(t).to_f64() - e, 0.0, hi, 200)
    }

    /// Law of the dual jump under the (1+x)-tilted measure.
    pub fn tilted(&self) -> RateDensity {
        let mut r = self.clone();
        if self.phi_mark {
            r.phi_mark = false;
            r.tilt -= 1;
        } else {
            r.phi_mark = true;
            r.tilt += 1;
        }
        r
    }
}

fn tail_q(t: Tail) -> f64 {
    match t {
        Tail::Power { q, .. } => q,
        Tail::Zero => f64::NEG_INFINITY,
        Tail::Exponential => f64::INFINITY,
    }
}

fn exponent_ok(e: f64, q: f64) -> bool {
    if q == f64::NEG_INFINITY {
        return true;
    }
    e < -1.0 - 1e-12 || ((e + 1.0).abs() <= 1e-12 && q < -1.0)
}
