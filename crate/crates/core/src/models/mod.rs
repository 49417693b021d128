//! Generative models: samplers, analytic compensators, asymptotic-event oracles
//! and the preset catalogue.

mod oracle;
mod presets;
mod seq;

pub use oracle::{analytic_oracle, EventOracle, Ternary};
pub use presets::{preset, preset_ids, preset_info, PresetInfo};
pub use seq::{SeqFamily, SeriesFacts, SumLimit};

use crate::density::RateDensity;
use crate::error::{Error, Result};
use crate::functionals::{Atom, CompensatorSpec};
use crate::jumplaw::JumpLaw;
use crate::path::{CadlagPath, DensityDrift, DiffusionGrid, JumpEvent, PathBuilder};
use crate::rng;
use crate::testfn::TestFunction;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ModelKind {
    /// ΔX_n = x_n(1 − Θ_n/p_n) at integer n, Θ_n ~ Bernoulli(p_n).
    RandomWalkLargeJumps { x: SeqFamily, p: SeqFamily },
    /// One jump of size g(ρ) at ρ = Λ^{-1}(E), compensated by −∫γλ unless disabled.
    CoxOneJump {
        density: RateDensity,
        #[serde(default = "yes")]
        compensated: bool,
    },
    /// ξ_n = 1 w.p. (1−p_n)/2, −(1−p_n)/(1+p_n) w.p. (1+p_n)/2.
    DiscreteDensitySteps { p: SeqFamily },
    GridDiffusion {
        sigma2: f64,
        #[serde(default)]
        drift: f64,
        step: f64,
        #[serde(default)]
        start: f64,
    },
    /// Independent jumps with the given laws at fixed times.
    AtomSteps { atoms: Vec<Atom> },
    /// Deterministic jump x_n at each integer n.
    Deterministic { x: SeqFamily },
    Composite(Vec<ModelKind>),
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub kind: ModelKind,
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset_id: Option<String>,
    /// Let ℰ(X) change sign at jumps below −1.
    #[serde(default)]
    pub signed_exponential: bool,
}

fn steps(horizon: f64) -> u64 {
    if horizon < 1.0 {
        0
    } else {
        horizon.floor() as u64
    }
}

impl ModelKind {
    fn validate(&self, horizon: f64) -> Result<()> {
        let m = steps(horizon);
        match self {
            ModelKind::RandomWalkLargeJumps { x, p } => {
                x.validate_values(m)?;
                p.validate_probabilities(m)
            }
            ModelKind::CoxOneJump { density, .. } => density.validate(),
            ModelKind::DiscreteDensitySteps { p } => p.validate_probabilities(m),
            ModelKind::GridDiffusion { sigma2, drift, step, start } => {
                if !(*sigma2 >= 0.0 && sigma2.is_finite()) || !drift.is_finite() || !(*step > 0.0 && step.is_finite()) || !(*start >= 0.0 && start.is_finite()) {
                    return Err(Error::InvalidParameters("grid diffusion needs sigma2 >= 0, step > 0, start >= 0".into()));
                }
                Ok(())
            }
            ModelKind::AtomSteps { atoms } => CompensatorSpec { atoms: atoms.clone(), rate_density: None }.validate(),
            ModelKind::Deterministic { x } => x.validate_values(m),
            ModelKind::Composite(parts) => {
                if parts.iter().filter(|p| p.diffusion().is_some()).count() > 1 {
                    return Err(Error::InvalidParameters("at most one diffusion component".into()));
                }
                for p in parts {
                    p.validate(horizon)?;
                }
                self.compensator(horizon).map(|_| ())
            }
            ModelKind::Zero => Ok(()),
        }
    }

    fn diffusion(&self) -> Option<(f64, f64)> {
        match self {
            ModelKind::GridDiffusion { sigma2, start, .. } => Some((*sigma2, *start)),
            _ => None,
        }
    }

    pub fn compensator(&self, horizon: f64) -> Result<CompensatorSpec> {
        let m = steps(horizon);
        let at = |n: u64, law: Vec<[f64; 2]>| Atom { time: n as f64, law: JumpLaw::discrete(law) };
        Ok(match self {
            ModelKind::RandomWalkLargeJumps { x, p } => {
                let (xs, ps) = (x.values(m), p.values(m));
                let atoms = (1..=m)
                    .zip(xs.iter().zip(&ps))
                    .filter(|(_, (&x, _))| x != 0.0)
                    .map(|(n, (&x, &p))| at(n, rw_law(x, p)))
                    .collect();
                CompensatorSpec { atoms, rate_density: None }
            }
            ModelKind::CoxOneJump { density, .. } => CompensatorSpec { atoms: vec![], rate_density: Some(density.clone()) },
            ModelKind::DiscreteDensitySteps { p } => {
                let atoms = p.values(m).into_iter().enumerate().map(|(i, p)| at(i as u64 + 1, discrete_law(p))).collect();
                CompensatorSpec { atoms, rate_density: None }
            }
            ModelKind::AtomSteps { atoms } => CompensatorSpec { atoms: atoms.iter().filter(|a| a.time <= horizon).cloned().collect(), rate_density: None },
            ModelKind::Deterministic { x } => {
                let atoms = x.values(m).into_iter().enumerate().filter(|(_, x)| *x != 0.0).map(|(i, x)| at(i as u64 + 1, vec![[x, 1.0]])).collect();
                CompensatorSpec { atoms, rate_density: None }
            }
            ModelKind::Composite(parts) => {
                let mut c = CompensatorSpec::empty();
                for p in parts {
                    c = c.merge(&p.compensator(horizon)?)?;
                }
                c
            }
            ModelKind::GridDiffusion { .. } | ModelKind::Zero => CompensatorSpec::empty(),
        })
    }

    fn is_martingale(&self) -> bool {
        match self {
            ModelKind::RandomWalkLargeJumps { .. } | ModelKind::DiscreteDensitySteps { .. } | ModelKind::Zero => true,
            ModelKind::CoxOneJump { compensated, .. } => *compensated,
            ModelKind::GridDiffusion { drift, .. } => *drift == 0.0,
            ModelKind::AtomSteps { atoms } => atoms.iter().all(|a| matches!(a.law.mean(), Ok(crate::Ext::Finite(m)) if m.abs() < 1e-12)),
            ModelKind::Deterministic { .. } => false,
            ModelKind::Composite(parts) => parts.iter().all(|p| p.is_martingale()),
        }
    }
}

/// {(x, 1−p), (x(1−1/p), p)}; a rare jump too large to represent is dropped with its (sub-1e-300) mass.
fn rw_law(x: f64, p: f64) -> Vec<[f64; 2]> {
    let big = x * (1.0 - 1.0 / p);
    if p == 0.0 || !big.is_finite() {
        vec![[x, 1.0]]
    } else {
        vec![[x, 1.0 - p], [big, p]]
    }
}

/// Below this the down-step −(1−p)/(1+p) is no longer distinguishable from −1 in f64,
/// so smaller p are treated as this value.
pub const DISCRETE_P_FLOOR: f64 = 9.094947017729282e-13; // 2^-40

fn discrete_law(p: f64) -> Vec<[f64; 2]> {
    let p = p.max(DISCRETE_P_FLOOR);
    vec![[1.0, (1.0 - p) / 2.0], [-(1.0 - p) / (1.0 + p), (1.0 + p) / 2.0]]
}

impl ModelSpec {
    pub fn new(kind: ModelKind, horizon: f64) -> ModelSpec {
        ModelSpec { kind, horizon, preset_id: None, signed_exponential: false }
    }

    pub fn from_json_str(s: &str) -> Result<ModelSpec> {
        let m: ModelSpec = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameters(format!("horizon must be positive and finite, got {}", self.horizon)));
        }
        self.kind.validate(self.horizon)
    }

    pub fn with_horizon(&self, horizon: f64) -> ModelSpec {
        ModelSpec { horizon, ..self.clone() }
    }

    pub fn compensator(&self) -> Result<CompensatorSpec> {
        self.kind.compensator(self.horizon)
    }

    pub fn is_martingale(&self) -> bool {
        self.kind.is_martingale()
    }

    /// True when every jump happens at a scheduled atom (no Cox part, no diffusion).
    pub fn is_pure_atom(&self) -> bool {
        fn go(k: &ModelKind) -> bool {
            match k {
                ModelKind::RandomWalkLargeJumps { .. } | ModelKind::DiscreteDensitySteps { .. } | ModelKind::AtomSteps { .. } | ModelKind::Deterministic { .. } | ModelKind::Zero => true,
                ModelKind::Composite(p) => p.iter().all(go),
                _ => false,
            }
        }
        go(&self.kind)
    }

    pub fn sampler(&self) -> Result<Sampler> {
        Sampler::new(self)
    }
}

enum Prepared {
    Atoms(Vec<(f64, Vec<[f64; 2]>)>),
    General(Vec<Atom>),
    Cox { density: RateDensity, compensated: bool },
    Grid { sigma2: f64, drift: f64, step: f64, start: f64 },
}

/// A model with its sequences evaluated once, ready for repeated sampling.
pub struct Sampler {
    spec: ModelSpec,
    parts: Vec<Prepared>,
}

impl Sampler {
    pub fn new(spec: &ModelSpec) -> Result<Sampler> {
        spec.validate()?;
        let mut parts = Vec::new();
        prepare(&spec.kind, spec.horizon, &mut parts);
        Ok(Sampler { spec: spec.clone(), parts })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Path number `index` of the ensemble with this seed.
    pub fn sample(&self, seed: u64, index: u64) -> Result<CadlagPath> {
        self.sample_with(&mut rng::stream(seed, index))
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CadlagPath> {
        let horizon = self.spec.horizon;
        let mut b = PathBuilder::new(horizon);
        for part in &self.parts {
            b = match part {
                Prepared::Atoms(list) => {
                    let mut jumps = Vec::with_capacity(list.len());
                    for (t, law) in list {
                        let u: f64 = rng.random();
                        let mut acc = 0.0;
                        for &[x, m] in law {
                            acc += m;
                            if u < acc {
                                if x != 0.0 {
                                    jumps.push(JumpEvent { time: *t, size: x });
                                }
                                break;
                            }
                        }
                    }
                    b.jumps(jumps)
                }
                Prepared::General(atoms) => {
                    let mut jumps = Vec::new();
                    for a in atoms {
                        if let Some(x) = a.law.sample(rng)? {
                            jumps.push(JumpEvent { time: a.time, size: x });
                        }
                    }
                    b.jumps(jumps)
                }
                Prepared::Cox { density, compensated } => {
                    let e: f64 = Exp1.sample(rng);
                    add_cox(b, density, *compensated, e, horizon)
                }
                Prepared::Grid { sigma2, drift, step, start } => add_grid(b, *sigma2, *drift, *step, *start, horizon, rng)?,
            };
        }
        b.build()
    }
}

fn prepare(kind: &ModelKind, horizon: f64, out: &mut Vec<Prepared>) {
    let m = steps(horizon);
    let idx = |i: usize| (i + 1) as f64;
    match kind {
        ModelKind::RandomWalkLargeJumps { x, p } => {
            let (xs, ps) = (x.values(m), p.values(m));
            out.push(Prepared::Atoms(xs.iter().zip(&ps).enumerate().filter(|(_, (&x, _))| x != 0.0).map(|(i, (&x, &p))| (idx(i), rw_law(x, p))).collect()));
        }
        ModelKind::DiscreteDensitySteps { p } => {
            out.push(Prepared::Atoms(p.values(m).into_iter().enumerate().map(|(i, p)| (idx(i), discrete_law(p))).collect()));
        }
        ModelKind::Deterministic { x } => {
            out.push(Prepared::Atoms(x.values(m).into_iter().enumerate().filter(|(_, x)| *x != 0.0).map(|(i, x)| (idx(i), vec![[x, 1.0]])).collect()));
        }
        ModelKind::AtomSteps { atoms } => {
            let atoms: Vec<Atom> = atoms.iter().filter(|a| a.time <= horizon).cloned().collect();
            if atoms.iter().all(|a| a.law.continuous.is_none()) {
                out.push(Prepared::Atoms(atoms.into_iter().map(|a| (a.time, a.law.discrete)).collect()));
            } else {
                out.push(Prepared::General(atoms));
            }
        }
        ModelKind::CoxOneJump { density, compensated } => out.push(Prepared::Cox { density: density.clone(), compensated: *compensated }),
        ModelKind::GridDiffusion { sigma2, drift, step, start } => out.push(Prepared::Grid { sigma2: *sigma2, drift: *drift, step: *step, start: *start }),
        ModelKind::Composite(parts) => parts.iter().for_each(|p| prepare(p, horizon, out)),
        ModelKind::Zero => {}
    }
}

fn add_cox(mut b: PathBuilder, density: &RateDensity, compensated: bool, e: f64, horizon: f64) -> PathBuilder {
    let rho = density.inverse_cumulative(e);
    if rho <= horizon {
        b = b.jump(rho, density.jump_at(rho));
    }
    if compensated {
        b = b.density_drift(DensityDrift { start: 0.0, end: rho.min(horizon), scale: -1.0, density: density.clone(), integrand: TestFunction::Identity });
    }
    b
}

fn add_grid<R: Rng + ?Sized>(b: PathBuilder, sigma2: f64, drift: f64, step: f64, start: f64, horizon: f64, rng: &mut R) -> Result<PathBuilder> {
    if start >= horizon {
        return Ok(b);
    }
    let n = ((horizon - start) / step - 1e-9).ceil().max(1.0) as usize;
    let normal = Normal::new(0.0, (sigma2 * step).sqrt()).map_err(|e| Error::InvalidParameters(e.to_string()))?;
    let increments = (0..n).map(|_| normal.sample(rng)).collect();
    Ok(b.diffusion(sigma2, start).grid(DiffusionGrid { start, step, increments }).drift(start, horizon, drift))
}

/// Random walk path with the rare-event indicators Θ_n given explicitly.
pub fn random_walk_path(x: &[f64], p: &[f64], thetas: &[bool], horizon: f64) -> Result<CadlagPath> {
    let m = steps(horizon) as usize;
    let jumps = (0..m.min(x.len()))
        .map(|i| {
            let theta = thetas.get(i).copied().unwrap_or(false);
            JumpEvent { time: (i + 1) as f64, size: if theta { x[i] * (1.0 - 1.0 / p[i]) } else { x[i] } }
        })
        .filter(|j| j.size != 0.0);
    CadlagPath::builder(horizon).jumps(jumps).build()
}

/// Cox path with the exponential draw E given explicitly.
pub fn cox_path(density: &RateDensity, compensated: bool, e: f64, horizon: f64) -> Result<CadlagPath> {
    add_cox(PathBuilder::new(horizon), density, compensated, e, horizon).build()
}

pub fn sample_path(model: &ModelSpec, seed: u64) -> Result<CadlagPath> {
    model.sampler()?.sample(seed, 0)
}

/// Paths 0..n of the ensemble; the output does not depend on the thread count.
pub fn sample_ensemble(model: &ModelSpec, seed: u64, n: u64) -> Result<Vec<CadlagPath>> {
    ensemble_map(model, seed, n, |_, p| Ok(p.clone()))
}

/// Sample and reduce each path without keeping the ensemble in memory.
pub fn ensemble_map<T, F>(model: &ModelSpec, seed: u64, n: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &CadlagPath) -> Result<T> + Sync,
{
    let s = model.sampler()?;
    (0..n).into_par_iter().map(|i| s.sample(seed, i).and_then(|p| f(i, &p))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::PowerSum;
    use crate::numeric::{mean_se, Ext};

    fn cox_density() -> RateDensity {
        RateDensity::new(PowerSum::new(vec![[1.0, -2.0]]), PowerSum::new(vec![[1.0, 1.0], [-1.0, 0.0]]))
    }

    #[test]
    fn forced_thetas_give_plain_partial_sums() {
        let x: Vec<f64> = SeqFamily::AltInvSqrt.values(20);
        let p: Vec<f64> = (1..=20).map(|n| 0.5f64.powi(n)).collect();
        let path = random_walk_path(&x, &p, &[], 20.0).unwrap();
        let direct: f64 = x.iter().sum();
        assert!((path.value_at(20.0).unwrap() - direct).abs() < 1e-14);
        let forced = random_walk_path(&x, &p, &[false, true], 20.0).unwrap();
        assert!((forced.value_at(2.0).unwrap() - (x[0] + x[1] * (1.0 - 4.0))).abs() < 1e-14);
    }

    #[test]
    fn cox_beyond_total_mass_never_jumps() {
        let d = cox_density();
        let path = cox_path(&d, true, 1.5, 50.0).unwrap();
        assert!(path.jumps().is_empty());
        // −∫_0^50 s/(1+s)² ds = −(ln 51 + 1/51 − 1)
        let expect = -((51f64).ln() + 1.0 / 51.0 - 1.0);
        assert!((path.value_at(50.0).unwrap() - expect).abs() < 1e-10);
        let jumped = cox_path(&d, true, 0.5, 50.0).unwrap();
        assert_eq!(jumped.jumps().len(), 1);
        assert!((jumped.jumps()[0].time - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rw_compensator_example() {
        let m = ModelSpec::new(ModelKind::RandomWalkLargeJumps { x: SeqFamily::Const { value: 0.5 }, p: SeqFamily::Geometric { scale: 1.0, ratio: 0.5 } }, 1.0);
        let c = m.compensator().unwrap();
        assert_eq!(c.atoms[0].law.discrete, vec![[0.5, 0.5], [-0.5, 0.5]]);
    }

    #[test]
    fn presets_are_mean_zero() {
        for id in preset_ids() {
            let m = preset(id).unwrap();
            if !m.is_martingale() {
                continue;
            }
            let c = m.compensator().unwrap();
            let v = c.mean_zero_violation().unwrap();
            assert!(v < 1e-12, "{id}: {v}");
        }
    }

    #[test]
    fn json_round_trip() {
        for id in preset_ids() {
            let m = preset(id).unwrap();
            let s = m.to_json();
            let back = ModelSpec::from_json_str(&s).unwrap_or_else(|e| panic!("{id}: {e}\n{s}"));
            assert_eq!(back, m, "{id}");
        }
    }

    #[test]
    fn seed_determinism() {
        let m = preset("ex-6.6").unwrap();
        let a = sample_path(&m, 11).unwrap();
        let b = sample_path(&m, 11).unwrap();
        assert_eq!(a, b);
        let c = m.sampler().unwrap().sample(11, 1).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn grid_diffusion_variance() {
        let m = preset("grid-diffusion").unwrap();
        let xs = ensemble_map(&m, 3, 20_000, |_, p| Ok(p.value_at(1.0)?.powi(2))).unwrap();
        let (mean, se) = mean_se(&xs);
        assert!((mean - 1.0).abs() < 4.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn cox_survival_frequency() {
        let m = preset("ex-6.4").unwrap();
        let comp = m.compensator().unwrap();
        let xs = ensemble_map(&m, 5, 20_000, |_, p| Ok(if comp.rho(p).is_infinite() { 1.0 } else { 0.0 })).unwrap();
        let (mean, se) = mean_se(&xs);
        // horizon-truncated: P(ρ > T) = exp(−Λ(T))
        let target = (-comp.rate_density.as_ref().unwrap().cumulative(m.horizon).to_f64()).exp();
        assert!((mean - target).abs() < 4.0 * se, "{mean} vs {target}");
        assert_eq!(comp.integral_with_rho(&TestFunction::One, f64::INFINITY, f64::INFINITY).unwrap(), Ext::Finite(1.0));
    }

    #[test]
    fn heavy_tail_atom_samples() {
        let m = preset("ex-5.9-part-2").unwrap();
        let s = m.sampler().unwrap();
        let mut pos = 0;
        for i in 0..2000 {
            let p = s.sample(1, i).unwrap();
            assert_eq!(p.jumps().len(), 1);
            if p.jumps()[0].size > 0.0 {
                pos += 1;
            }
        }
        assert!(pos > 0 && pos < 2000);
    }

    #[test]
    fn rejects_bad_parameters() {
        let bad = ModelSpec::new(ModelKind::RandomWalkLargeJumps { x: SeqFamily::Const { value: 1.0 }, p: SeqFamily::Const { value: 0.2 } }, 5.0);
        assert!(matches!(bad.validate(), Err(Error::InvalidParameters(_))));
        let bad = ModelSpec::new(ModelKind::GridDiffusion { sigma2: 1.0, drift: 0.0, step: 0.0, start: 0.0 }, 1.0);
        assert!(bad.validate().is_err());
    }
}
