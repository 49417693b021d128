//! Pathwise and compensator-side functionals: [X,X], F∗μ, F∗ν, γ and the
//! convergence functional (x²∧|x|)∗ν + [X^c] + A.

use crate::density::RateDensity;
use crate::error::{Error, Result};
use crate::jumplaw::JumpLaw;
use crate::numeric::Ext;
use crate::path::{CadlagPath, JumpEvent, PathForm};
use crate::testfn::TestFunction;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub time: f64,
    pub law: JumpLaw,
}

/// Analytic compensator ν: scheduled atoms plus at most one single-jump density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct CompensatorSpec {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_density: Option<RateDensity>,
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs())
}

impl CompensatorSpec {
    pub fn empty() -> CompensatorSpec {
        CompensatorSpec::default()
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.atoms.windows(2) {
            if !(w[1].time > w[0].time) {
                return Err(Error::InvalidParameters("atom times must be strictly increasing".into()));
            }
        }
        for a in &self.atoms {
            if !a.time.is_finite() || a.time < 0.0 {
                return Err(Error::InvalidParameters(format!("bad atom time {}", a.time)));
            }
            a.law.validate()?;
        }
        if let Some(d) = &self.rate_density {
            d.validate()?;
        }
        Ok(())
    }

    pub fn atom_at(&self, t: f64) -> Option<&Atom> {
        let i = self.atoms.partition_point(|a| a.time < t - 1e-12 * (1.0 + t.abs()));
        self.atoms.get(i).filter(|a| same_time(a.time, t))
    }

    /// Time of the path's first jump outside the atom schedule (the Cox jump).
    pub fn rho(&self, path: &CadlagPath) -> f64 {
        if self.rate_density.is_none() {
            return f64::INFINITY;
        }
        path.jumps().iter().find(|j| self.atom_at(j.time).is_none()).map_or(f64::INFINITY, |j| j.time)
    }

    /// F∗ν_t given the Cox time ρ.
    pub fn integral_with_rho(&self, f: &TestFunction, t: f64, rho: f64) -> Result<Ext> {
        let mut acc = Ext::Finite(0.0);
        let mut parts = Vec::new();
        for a in self.atoms.iter().take_while(|a| a.time <= t) {
            match a.law.integral(f)? {
                Ext::Finite(v) => parts.push(v),
                inf => acc = acc.add(inf).ok_or_else(|| Error::IntegrabilityError("∞ − ∞ across atoms".into()))?,
            }
        }
        acc = acc.add(Ext::Finite(crate::numeric::kahan(parts))).unwrap();
        if let Some(d) = &self.rate_density {
            let v = d.integral(f, 0.0, t.min(rho))?;
            acc = acc.add(v).ok_or_else(|| Error::IntegrabilityError("∞ − ∞ between atoms and density".into()))?;
        }
        Ok(acc)
    }

    pub fn gamma(&self, t: f64) -> Result<f64> {
        match self.atom_at(t) {
            None => Ok(0.0),
            Some(a) => match a.law.integral(&TestFunction::Log1p)? {
                Ext::Finite(v) => Ok(-v),
                _ => Err(Error::IntegrabilityError(format!("log(1+x) not integrable against the atom at {t}"))),
            },
        }
    }

    /// Largest |∫x ν({t},dx)| over atoms, and the density drift sign check.
    pub fn mean_zero_violation(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for a in &self.atoms {
            match a.law.mean()? {
                Ext::Finite(m) => worst = worst.max(m.abs()),
                _ => return Ok(f64::INFINITY),
            }
        }
        Ok(worst)
    }

    pub fn merge(&self, other: &CompensatorSpec) -> Result<CompensatorSpec> {
        if self.rate_density.is_some() && other.rate_density.is_some() {
            return Err(Error::InvalidParameters("at most one Cox component".into()));
        }
        let mut atoms = self.atoms.clone();
        for a in &other.atoms {
            if atoms.iter().any(|b| same_time(a.time, b.time)) {
                return Err(Error::InvalidParameters(format!("overlapping atoms at t={}", a.time)));
            }
            atoms.push(a.clone());
        }
        atoms.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(CompensatorSpec { atoms, rate_density: self.rate_density.clone().or_else(|| other.rate_density.clone()) })
    }

    /// Dual compensator under the (1+x)-tilted measure.
    pub fn tilted(&self) -> Result<CompensatorSpec> {
        let atoms = self.atoms.iter().map(|a| Ok(Atom { time: a.time, law: a.law.tilted()? })).collect::<Result<Vec<_>>>()?;
        Ok(CompensatorSpec { atoms, rate_density: self.rate_density.as_ref().map(|d| d.tilted()) })
    }
}

/// t ↦ [X,X]_t.
pub fn quadratic_variation(path: &CadlagPath) -> CadlagPath {
    let horizon = path.horizon();
    let jumps = path.jumps().iter().map(|j| JumpEvent { time: j.time, size: j.size * j.size });
    let c = path.continuous();
    let mut b = CadlagPath::builder(horizon).jumps(jumps).explosion(path.explosion_time());
    if c.qv_rate > 0.0 {
        let end = c.stop.unwrap_or(horizon).min(horizon);
        match path.form() {
            PathForm::Additive => b = b.drift(c.diffusion_start, end, c.qv_rate),
            PathForm::Exponential => {
                // d[Z^c] = Z² d[X^c], piecewise-constant on a fine grid
                let step = c.grid.as_ref().map_or((end - c.diffusion_start) / 1000.0, |g| g.step);
                let mut t = c.diffusion_start;
                while t < end && step > 0.0 {
                    let u = (t + step).min(end);
                    let z = path.value_at(0.5 * (t + u)).unwrap_or(0.0);
                    b = b.drift(t, u, c.qv_rate * z * z);
                    t = u;
                }
            }
        }
    }
    b.build().expect("QV of a valid path is valid")
}

/// t ↦ Σ_{s≤t} F(ΔX_s).
pub fn jump_integral(path: &CadlagPath, f: &TestFunction) -> Result<CadlagPath> {
    let jumps = path
        .jumps()
        .iter()
        .map(|j| {
            f.eval(j.size).map(|v| JumpEvent { time: j.time, size: v }).map_err(|e| match e {
                Error::DomainError(m) => Error::DomainError(format!("jump at t={}: {m}", j.time)),
                e => e,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    CadlagPath::builder(path.horizon()).jumps(jumps).explosion(path.explosion_time()).build()
}

/// F∗ν_t, with ρ read from the path.
pub fn compensator_integral(comp: &CompensatorSpec, f: &TestFunction, t: f64, path: &CadlagPath) -> Result<Ext> {
    comp.integral_with_rho(f, t, comp.rho(path))
}

pub fn gamma_process(comp: &CompensatorSpec, t: f64) -> Result<f64> {
    comp.gamma(t)
}

/// [X^c]_t + (x²∧|x|)∗ν_t + A_t.
pub fn convergence_functional_c(path: &CadlagPath, comp: &CompensatorSpec, a_path: &CadlagPath, t: f64) -> Result<Ext> {
    let qv = path.continuous().qv(t);
    let nu = compensator_integral(comp, &TestFunction::TruncatedAbs, t, path)?;
    let a = a_path.value_at(t)?;
    Ok(nu.add(Ext::Finite(qv + a)).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::PowerSum;

    fn sym_atom(t: f64) -> Atom {
        Atom { time: t, law: JumpLaw::discrete(vec![[0.5, 0.5], [-0.5, 0.5]]) }
    }

    #[test]
    fn qv_examples() {
        let x = CadlagPath::builder(3.0).jump(1.0, 1.0).jump(2.0, -0.5).build().unwrap();
        assert_eq!(quadratic_variation(&x).value_at(2.0).unwrap(), 1.25);
        let w = CadlagPath::builder(3.0).diffusion(1.0, 0.0).build().unwrap();
        assert_eq!(quadratic_variation(&w).value_at(3.0).unwrap(), 3.0);
        assert_eq!(quadratic_variation(&CadlagPath::constant(0.0, 1.0).unwrap()).value_at(1.0).unwrap(), 0.0);
    }

    #[test]
    fn jump_integral_examples() {
        let x = CadlagPath::builder(3.0).jump(1.0, 1.0).build().unwrap();
        let v = jump_integral(&x, &TestFunction::XmLog).unwrap().value_at(2.0).unwrap();
        assert!((v - 0.306_852_819_440_054_7).abs() < 1e-15);
        let y = CadlagPath::builder(3.0).jump(1.0, 2.0).jump(2.0, 1.5).build().unwrap();
        assert_eq!(jump_integral(&y, &TestFunction::PosTail { kappa: 2.0 }).unwrap().value_at(3.0).unwrap(), 0.0);
        let z = CadlagPath::builder(3.0).jump(1.0, -1.0).build().unwrap();
        assert!(matches!(jump_integral(&z, &TestFunction::Log1p), Err(Error::DomainError(_))));
    }

    #[test]
    fn compensator_examples() {
        let comp = CompensatorSpec { atoms: vec![sym_atom(1.0)], rate_density: None };
        let x = CadlagPath::constant(0.0, 2.0).unwrap();
        assert_eq!(compensator_integral(&comp, &TestFunction::Identity, 2.0, &x).unwrap(), Ext::Finite(0.0));
        let g = comp.gamma(1.0).unwrap();
        assert!((g - 0.143_841_036_225_890_5).abs() < 1e-15, "{g}");
        assert_eq!(comp.gamma(0.5).unwrap(), 0.0);
        let cox = CompensatorSpec {
            atoms: vec![],
            rate_density: Some(RateDensity::new(PowerSum::new(vec![[1.0, -2.0]]), PowerSum::new(vec![[1.0, 1.0], [-1.0, 0.0]]))),
        };
        assert_eq!(compensator_integral(&cox, &TestFunction::One, f64::INFINITY, &x).unwrap(), Ext::Finite(1.0));
        assert_eq!(compensator_integral(&cox, &TestFunction::Identity, f64::INFINITY, &x).unwrap(), Ext::PosInfinite);
    }

    #[test]
    fn functional_c_on_symmetric_atoms() {
        let n = 7;
        let comp = CompensatorSpec { atoms: (1..=n).map(|k| sym_atom(k as f64)).collect(), rate_density: None };
        let x = CadlagPath::constant(0.0, n as f64).unwrap();
        let a = CadlagPath::constant(0.0, n as f64).unwrap();
        let v = convergence_functional_c(&x, &comp, &a, n as f64).unwrap().to_f64();
        assert!((v - 0.25 * n as f64).abs() < 1e-14);
    }

    #[test]
    fn gamma_nonnegative_for_defective_mean_zero_atom() {
        let comp = CompensatorSpec { atoms: vec![Atom { time: 1.0, law: JumpLaw::discrete(vec![[0.3, 0.4]]) }], rate_density: None };
        assert!(comp.gamma(1.0).unwrap() <= 0.0);
        let comp = CompensatorSpec { atoms: vec![Atom { time: 1.0, law: JumpLaw::discrete(vec![[0.3, 0.4], [-0.6, 0.2]]) }], rate_density: None };
        assert!(comp.gamma(1.0).unwrap() >= 0.0);
    }
}
