//! Pathwise identity suite: reciprocal, criterion decompositions, pushforward,
//! exponential/logarithm round trip and the log transform.

use crate::criteria::identity_check;
use crate::error::Result;
use crate::functionals::{Atom, CompensatorSpec};
use crate::jumplaw::JumpLaw;
use crate::path::{CadlagPath, JumpEvent};
use crate::rng;
use crate::stochexp::{log_transform, log_transform_deviation, pushforward_check, reciprocal_log, stoch_exp, stoch_log};
use crate::testfn::TestFunction;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const LEMMA_A_VALUES: [f64; 4] = [-1.0, 0.0, 0.5, 2.0];

/// Random pure-jump paths with up to 50 jumps of size in (−0.9, 9] on [0, 10], each
/// with a mean-zero two-point atom at its jump time.
pub fn random_battery(n: usize, seed: u64) -> Result<Vec<(CadlagPath, CompensatorSpec)>> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = rng::stream(seed, i as u64);
        let k = r.random_range(1..=50usize);
        let mut times: Vec<f64> = (0..k).map(|_| r.random_range(0.0..10.0f64).max(1e-3)).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let mut jumps = Vec::with_capacity(times.len());
        let mut atoms = Vec::with_capacity(times.len());
        for &t in &times {
            // (−0.9, 9]
            let x = 9.0 - r.random_range(0.0..9.9f64);
            let y = if x > 0.0 { -r.random_range(0.05..0.9f64) } else { r.random_range(0.05..9.0f64) };
            jumps.push(JumpEvent { time: t, size: x });
            atoms.push(Atom { time: t, law: JumpLaw::discrete(vec![[x, -y / (x - y)], [y, x / (x - y)]]) });
        }
        out.push((CadlagPath::builder(10.0).jumps(jumps).build()?, CompensatorSpec { atoms, rate_density: None }));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentitySuite {
    pub paths_checked: u64,
    pub paths_skipped: u64,
    /// max |ℰ(M)ℰ(N) − 1| over event times.
    pub reciprocal: f64,
    /// max over a of the A^a and B^a decomposition deviations.
    pub lemma_a: f64,
    pub lemma_b: f64,
    /// max relative |F∗μ^M − (F∘φ)∗μ^N|.
    pub pushforward: f64,
    /// max |ℒ(ℰ(M)) − M| over event times.
    pub round_trip: f64,
    /// max |exp(Y−V)/ℰ(X) − 1|.
    pub log_transform: f64,
    /// max |ΔY − log(1+ΔX) − γ| over jumps and atoms.
    pub log_jump: f64,
}

pub fn reciprocal_deviation(m: &CadlagPath) -> Result<f64> {
    let zm = stoch_exp(m)?.exponential;
    let zn = stoch_exp(&reciprocal_log(m)?)?.exponential;
    let mut worst: f64 = 0.0;
    for t in m.event_times() {
        let (s1, l1) = zm.log_abs_at(t)?;
        let (s2, l2) = zn.log_abs_at(t)?;
        let d = if s1 * s2 > 0.0 { (l1 + l2).exp_m1().abs() } else { f64::INFINITY };
        worst = worst.max(d);
    }
    Ok(worst)
}

pub const PUSHFORWARD_FUNCTIONS: [TestFunction; 4] = [TestFunction::Identity, TestFunction::Square, TestFunction::Log1p, TestFunction::XmLog];

pub fn pushforward_deviation(m: &CadlagPath) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for f in &PUSHFORWARD_FUNCTIONS {
        let (l, r) = pushforward_check(m, f, m.horizon())?;
        worst = worst.max((l - r).abs() / l.abs().max(1.0));
    }
    Ok(worst)
}

pub fn round_trip_deviation(m: &CadlagPath) -> Result<f64> {
    let back = stoch_log(&stoch_exp(m)?.exponential)?;
    let mut worst: f64 = 0.0;
    for t in m.event_times() {
        worst = worst.max((back.value_at(t)? - m.value_at(t)?).abs());
    }
    Ok(worst)
}

pub fn log_jump_deviation(x: &CadlagPath, comp: &CompensatorSpec) -> Result<f64> {
    let y = log_transform(x, comp)?.y;
    let mut times: Vec<f64> = x.jumps().iter().map(|j| j.time).collect();
    times.extend(comp.atoms.iter().map(|a| a.time).filter(|&t| t <= x.horizon()));
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut worst: f64 = 0.0;
    for t in times {
        let dx = x.jumps().iter().find(|j| j.time == t).map_or(0.0, |j| j.size);
        let dy = y.value_at(t)? - y.left_limit(t)?;
        worst = worst.max((dy - (dx.ln_1p() + comp.gamma(t)?)).abs());
    }
    Ok(worst)
}

/// Runs every identity on each (path, compensator); paths with jumps ≤ −1 are skipped.
pub fn identity_suite(paths: &[(CadlagPath, CompensatorSpec)]) -> Result<IdentitySuite> {
    let mut s = IdentitySuite { paths_checked: 0, paths_skipped: 0, reciprocal: 0.0, lemma_a: 0.0, lemma_b: 0.0, pushforward: 0.0, round_trip: 0.0, log_transform: 0.0, log_jump: 0.0 };
    for (m, comp) in paths {
        if m.jumps().iter().any(|j| !(j.size > -1.0)) {
            s.paths_skipped += 1;
            continue;
        }
        s.paths_checked += 1;
        s.reciprocal = s.reciprocal.max(reciprocal_deviation(m)?);
        for a in LEMMA_A_VALUES {
            match identity_check(a, m, comp) {
                Ok((da, db)) => {
                    s.lemma_a = s.lemma_a.max(da);
                    s.lemma_b = s.lemma_b.max(db);
                }
                Err(crate::Error::CompensatorDiverges { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        if m.is_pure_jump() {
            s.pushforward = s.pushforward.max(pushforward_deviation(m)?);
            s.round_trip = s.round_trip.max(round_trip_deviation(m)?);
        }
        if let Ok(d) = log_transform_deviation(m, comp) {
            s.log_transform = s.log_transform.max(d);
        }
        if let Ok(d) = log_jump_deviation(m, comp) {
            s.log_jump = s.log_jump.max(d);
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_is_mean_zero_and_in_range() {
        for (m, comp) in random_battery(50, 3).unwrap() {
            assert!(m.jumps().len() <= 50);
            assert!(m.jumps().iter().all(|j| j.size > -0.9 && j.size <= 9.0));
            assert!(comp.mean_zero_violation().unwrap() < 1e-12);
            for a in &comp.atoms {
                assert!((a.law.total_mass() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn suite_on_small_battery() {
        let s = identity_suite(&random_battery(30, 1).unwrap()).unwrap();
        assert_eq!(s.paths_checked, 30);
        assert!(s.reciprocal < 1e-10, "{s:?}");
        assert!(s.lemma_a < 1e-9 && s.lemma_b < 1e-9, "{s:?}");
        assert!(s.round_trip < 1e-12 && s.pushforward < 1e-12, "{s:?}");
        assert!(s.log_jump < 1e-12 && s.log_transform < 1e-10, "{s:?}");
    }
}
