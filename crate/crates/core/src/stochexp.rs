//! Stochastic exponential and logarithm, the reciprocal N, the involution φ,
//! and the logarithmic transform (Y, V).

use crate::error::{Error, Result};
use crate::functionals::CompensatorSpec;
use crate::numeric::Ext;
use crate::path::{CadlagPath, Continuous, DensityDrift, DriftSegment, JumpEvent, PathForm};
use crate::testfn::TestFunction;

/// |1+ΔX| below this is treated as an exact jump to zero.
pub const ABSORPTION_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ExponentialPair {
    pub base: CadlagPath,
    pub exponential: CadlagPath,
    pub absorption_time: Option<f64>,
    pub numeric_zero_time: Option<f64>,
    /// Number of jumps with 1+ΔX < 0 (signed mode only).
    pub sign_changes: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExpOptions {
    /// Allow ΔX < −1, letting ℰ(X) change sign.
    pub signed: bool,
}

pub fn stoch_exp(x: &CadlagPath) -> Result<ExponentialPair> {
    stoch_exp_with(x, ExpOptions::default())
}

pub fn stoch_exp_with(x: &CadlagPath, opts: ExpOptions) -> Result<ExponentialPair> {
    if x.form() != PathForm::Additive {
        return Err(Error::Unsupported("stochastic exponential of an exponential-form path".into()));
    }
    let mut times = Vec::with_capacity(x.jumps().len());
    let mut factors = Vec::with_capacity(x.jumps().len());
    let mut absorption = None;
    let mut sign_changes = 0;
    for j in x.jumps() {
        let y = 1.0 + j.size;
        times.push(j.time);
        if y.abs() < ABSORPTION_TOL {
            factors.push((1.0, f64::NEG_INFINITY));
            absorption = Some(j.time);
            break;
        }
        if y < 0.0 {
            if !opts.signed {
                return Err(Error::JumpBelowMinusOne { time: j.time, size: j.size });
            }
            sign_changes += 1;
            factors.push((-1.0, (-y).ln()));
        } else {
            factors.push((1.0, j.size.ln_1p()));
        }
    }
    let mut z = CadlagPath::exponential(x.horizon(), times, factors, x.continuous().clone(), absorption)?;
    if let Some(e) = x.explosion_time() {
        z = z.with_explosion(e)?;
    }
    Ok(ExponentialPair {
        base: x.clone(),
        numeric_zero_time: z.numeric_zero_time(),
        exponential: z,
        absorption_time: absorption,
        sign_changes,
    })
}

/// X = ℒ(Z) with ΔX = ΔZ/Z₋.
pub fn stoch_log(z: &CadlagPath) -> Result<CadlagPath> {
    match z.form() {
        PathForm::Exponential => {
            let mut jumps = Vec::with_capacity(z.jumps().len());
            for (j, (sign, l)) in z.jumps().iter().zip(z.jump_factors()) {
                if sign < 0.0 {
                    return Err(Error::NotNonnegative { time: j.time });
                }
                jumps.push(JumpEvent { time: j.time, size: l.exp_m1() });
            }
            CadlagPath::builder(z.horizon())
                .jumps(jumps)
                .continuous(z.continuous().clone())
                .absorption(z.absorption_time())
                .explosion(z.explosion_time())
                .build()
        }
        PathForm::Additive => {
            if !z.is_pure_jump() {
                return Err(Error::Unsupported("stochastic logarithm of an additive path with a continuous part".into()));
            }
            if z.initial() != 1.0 {
                return Err(Error::InvalidPath(format!("Z_0 must be 1, got {}", z.initial())));
            }
            let mut pre = 1.0;
            let mut jumps = Vec::with_capacity(z.jumps().len());
            let mut absorbed = None;
            for j in z.jumps() {
                if pre == 0.0 {
                    return Err(Error::RevivesAfterZero { time: j.time });
                }
                let post = pre + j.size;
                if post < 0.0 {
                    return Err(Error::NotNonnegative { time: j.time });
                }
                let x = if post == 0.0 { -1.0 } else { j.size / pre };
                if post == 0.0 {
                    absorbed = Some(j.time);
                }
                jumps.push(JumpEvent { time: j.time, size: x });
                pre = post;
            }
            CadlagPath::builder(z.horizon()).jumps(jumps).absorption(absorbed).explosion(z.explosion_time()).build()
        }
    }
}

pub fn phi(x: f64) -> Result<f64> {
    if !(x > -1.0) {
        return Err(Error::DomainError(format!("phi needs x > -1, got {x}")));
    }
    Ok(-x / (1.0 + x))
}

/// N = −M + [M^c] + x²/(1+x)∗μ^M, so that ΔN = φ(ΔM) and ℰ(M)ℰ(N) = 1.
pub fn reciprocal_log(m: &CadlagPath) -> Result<CadlagPath> {
    if m.form() != PathForm::Additive {
        return Err(Error::Unsupported("reciprocal of an exponential-form path".into()));
    }
    let jumps = m
        .jumps()
        .iter()
        .map(|j| phi(j.size).map(|y| JumpEvent { time: j.time, size: y }).map_err(|_| Error::DomainError(format!("jump {} at t={} is <= -1", j.size, j.time))))
        .collect::<Result<Vec<_>>>()?;
    let cont = m.continuous().scaled(-1.0).with_qv_drift(1.0, m.horizon());
    CadlagPath::builder(m.horizon())
        .initial(-m.initial())
        .jumps(jumps)
        .continuous(cont)
        .absorption(m.absorption_time())
        .explosion(m.explosion_time())
        .build()
}

/// (F∗μ^M_t, (F∘φ)∗μ^N_t).
pub fn pushforward_check(m: &CadlagPath, f: &TestFunction, t: f64) -> Result<(f64, f64)> {
    let n = reciprocal_log(m)?;
    let lhs = crate::numeric::kahan(m.jumps().iter().take_while(|j| j.time <= t).map(|j| f.eval(j.size)).collect::<Result<Vec<_>>>()?);
    let rhs = crate::numeric::kahan(
        n.jumps().iter().take_while(|j| j.time <= t).map(|j| phi(j.size).and_then(|x| f.eval(x))).collect::<Result<Vec<_>>>()?,
    );
    Ok((lhs, rhs))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogTransform {
    pub y: CadlagPath,
    pub v: CadlagPath,
}

/// Y = X^c + log(1+x)∗(μ−ν), V = ½[X^c] + (x − log(1+x))∗ν.
pub fn log_transform(x: &CadlagPath, comp: &CompensatorSpec) -> Result<LogTransform> {
    let horizon = x.horizon();
    for j in x.jumps() {
        if !(j.size > -1.0) {
            return Err(Error::DomainError(format!("log transform needs jumps > -1; jump {} at t={}", j.size, j.time)));
        }
    }
    let rho = comp.rho(x);
    let mut y_jumps: Vec<JumpEvent> = x.jumps().iter().map(|j| JumpEvent { time: j.time, size: j.size.ln_1p() }).collect();
    let mut v_jumps = Vec::new();
    for a in comp.atoms.iter().take_while(|a| a.time <= horizon) {
        let g = comp.gamma(a.time)?;
        y_jumps.push(JumpEvent { time: a.time, size: g });
        match a.law.integral(&TestFunction::XmLog)? {
            Ext::Finite(v) => v_jumps.push(JumpEvent { time: a.time, size: v }),
            Ext::PosInfinite | Ext::NegInfinite => return Err(Error::CompensatorDiverges { time: a.time, positive: true }),
        }
    }
    let mut y_cont = x.continuous().martingale_part();
    let mut v_cont = Continuous::default();
    v_cont.stop = x.continuous().stop;
    if x.continuous().qv_rate > 0.0 {
        let end = x.continuous().stop.unwrap_or(horizon).min(horizon);
        v_cont.push_drift(DriftSegment { start: x.continuous().diffusion_start, end, rate: 0.5 * x.continuous().qv_rate });
    }
    if let Some(d) = &comp.rate_density {
        let end = rho.min(horizon);
        y_cont.push_density(DensityDrift { start: 0.0, end, scale: -1.0, density: d.clone(), integrand: TestFunction::Log1p });
        v_cont.push_density(DensityDrift { start: 0.0, end, scale: 1.0, density: d.clone(), integrand: TestFunction::XmLog });
    }
    let y = CadlagPath::builder(horizon).jumps(y_jumps).continuous(y_cont).absorption(x.absorption_time()).explosion(x.explosion_time()).build()?;
    let v = CadlagPath::builder(horizon).jumps(v_jumps).continuous(v_cont).absorption(x.absorption_time()).explosion(x.explosion_time()).build()?;
    Ok(LogTransform { y, v })
}

/// max over event and atom times of |exp(Y−V)/ℰ(X) − 1| where ℰ(X) > 0.
pub fn log_transform_deviation(x: &CadlagPath, comp: &CompensatorSpec) -> Result<f64> {
    let lt = log_transform(x, comp)?;
    let z = stoch_exp(x)?.exponential;
    let mut times = x.event_times();
    times.extend(comp.atoms.iter().map(|a| a.time).filter(|&t| t <= x.horizon()));
    let mut worst: f64 = 0.0;
    for t in times {
        let (s, lz) = z.log_abs_at(t)?;
        if s <= 0.0 || lz == f64::NEG_INFINITY {
            continue;
        }
        let d = lt.y.value_at(t)? - lt.v.value_at(t)? - lz;
        worst = worst.max(d.exp_m1().abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::Atom;
    use crate::jumplaw::JumpLaw;

    fn jumps(js: &[(f64, f64)], horizon: f64) -> CadlagPath {
        let mut b = CadlagPath::builder(horizon);
        for &(t, x) in js {
            b = b.jump(t, x);
        }
        b.build().unwrap()
    }

    #[test]
    fn exponential_examples() {
        let z = stoch_exp(&jumps(&[(1.0, 1.0)], 3.0)).unwrap();
        assert_eq!(z.exponential.value_at(2.0).unwrap(), 2.0);
        let z = stoch_exp(&jumps(&[(1.0, -1.0)], 3.0)).unwrap();
        assert_eq!(z.absorption_time, Some(1.0));
        assert_eq!(z.exponential.value_at(1.0).unwrap(), 0.0);
        assert_eq!(z.exponential.value_at(3.0).unwrap(), 0.0);
        assert_eq!(z.exponential.left_limit(1.0).unwrap(), 1.0);
        assert!(matches!(stoch_exp(&jumps(&[(1.0, -2.0)], 3.0)), Err(Error::JumpBelowMinusOne { .. })));
        let s = stoch_exp_with(&jumps(&[(1.0, -2.0)], 3.0), ExpOptions { signed: true }).unwrap();
        assert_eq!(s.exponential.value_at(1.0).unwrap(), -1.0);
        assert_eq!(s.sign_changes, 1);
    }

    #[test]
    fn exponential_of_diffusion() {
        let g = crate::path::DiffusionGrid { start: 0.0, step: 0.5, increments: vec![0.3, -0.1, 0.7, 0.2] };
        let w = CadlagPath::builder(2.0).grid(g).diffusion(1.0, 0.0).build().unwrap();
        let z = stoch_exp(&w).unwrap().exponential;
        for &t in &[0.0, 0.25, 1.0, 1.7, 2.0] {
            let expect = (w.value_at(t).unwrap() - t / 2.0).exp();
            assert!((z.value_at(t).unwrap() - expect).abs() < 1e-14 * expect);
        }
    }

    #[test]
    fn logarithm_examples() {
        let z = CadlagPath::builder(3.0).initial(1.0).jump(1.0, 1.0).jump(2.0, -1.0).build().unwrap();
        let x = stoch_log(&z).unwrap();
        assert_eq!(x.jumps(), &[JumpEvent { time: 1.0, size: 1.0 }, JumpEvent { time: 2.0, size: -0.5 }]);
        let one = CadlagPath::constant(1.0, 2.0).unwrap();
        assert!(stoch_log(&one).unwrap().jumps().is_empty());
        let z = CadlagPath::builder(3.0).initial(1.0).jump(0.5, -0.5).jump(1.0, -0.5).build().unwrap();
        let x = stoch_log(&z).unwrap();
        assert_eq!(x.jumps()[1].size, -1.0);
        assert_eq!(x.absorption_time(), Some(1.0));
        let bad = CadlagPath::builder(3.0).initial(1.0).jump(1.0, -1.0).jump(2.0, 0.5).build().unwrap();
        assert!(matches!(stoch_log(&bad), Err(Error::RevivesAfterZero { .. })));
        let neg = CadlagPath::builder(3.0).initial(1.0).jump(1.0, -2.0).build().unwrap();
        assert!(matches!(stoch_log(&neg), Err(Error::NotNonnegative { .. })));
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(0.0).unwrap(), 0.0);
        assert_eq!(phi(1.0).unwrap(), -0.5);
        assert!((phi(phi(0.3).unwrap()).unwrap() - 0.3).abs() < 1e-15);
        assert!(phi(-1.0).is_err());
    }

    #[test]
    fn reciprocal_examples() {
        let m = jumps(&[(1.0, 1.0)], 2.0);
        let n = reciprocal_log(&m).unwrap();
        assert_eq!(n.value_at(1.5).unwrap(), -0.5);
        let p = stoch_exp(&m).unwrap().exponential.value_at(2.0).unwrap() * stoch_exp(&n).unwrap().exponential.value_at(2.0).unwrap();
        assert_eq!(p, 1.0);
        assert!(reciprocal_log(&CadlagPath::constant(0.0, 1.0).unwrap()).unwrap().jumps().is_empty());
        let w = CadlagPath::builder(3.0).diffusion(1.0, 0.0).build().unwrap();
        let n = reciprocal_log(&w).unwrap();
        assert_eq!(n.value_at(3.0).unwrap(), 3.0);
        assert_eq!(n.diffusion_qv_rate(), 1.0);
    }

    #[test]
    fn pushforward_examples() {
        let m = jumps(&[(1.0, 1.0), (2.0, -0.5)], 3.0);
        let (a, b) = pushforward_check(&m, &TestFunction::Square, 3.0).unwrap();
        assert_eq!((a, b), (1.25, 1.25));
        let m = jumps(&[(1.0, 1.0)], 3.0);
        let (a, b) = pushforward_check(&m, &TestFunction::Log1p, 3.0).unwrap();
        assert!((a - 2f64.ln()).abs() < 1e-15 && (b - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_transform_examples() {
        let zero = CadlagPath::constant(0.0, 2.0).unwrap();
        let lt = log_transform(&zero, &CompensatorSpec::empty()).unwrap();
        assert!(lt.y.jumps().is_empty() && lt.v.jumps().is_empty());
        let comp = CompensatorSpec { atoms: vec![Atom { time: 1.0, law: JumpLaw::discrete(vec![[0.5, 0.5], [-0.5, 0.5]]) }], rate_density: None };
        let x = jumps(&[(1.0, 0.5)], 2.0);
        let lt = log_transform(&x, &comp).unwrap();
        let dy = lt.y.jumps()[0].size;
        assert!((dy - (1.5f64.ln() + 0.143_841_036_225_890_5)).abs() < 1e-15);
        assert!(log_transform_deviation(&x, &comp).unwrap() < 1e-14);
    }
}
