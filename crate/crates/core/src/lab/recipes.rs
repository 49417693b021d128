//! One registered recipe per preset: config tweaks plus the checks its report carries.

use super::{run_experiment, Check, ExperimentConfig, ExperimentReport, Tolerances};
use crate::criteria::{evaluate_condition, exponential_moment_log_bound, CriterionSpec, CriterionTag};
use crate::density::RateDensity;
use crate::error::{Error, Result};
use crate::follmer::{exact_q_survival, tilt_model, ui_probe, DEFAULT_EXPLOSION_LEVEL};
use crate::functionals::compensator_integral;
use crate::models::{ensemble_map, preset_ids, preset_info, ModelKind, ModelSpec};
use crate::numeric::{alternating_harmonic, digamma, mean_se, Ext};
use crate::path::CadlagPath;
use crate::stopping::StoppingFamily;
use crate::testfn::TestFunction;
use serde::{Deserialize, Serialize};

/// Cap on the B^a estimates in the first NK counterexample.
pub const NK_CAP: f64 = 10.0;
pub const NK_HORIZONS: [f64; 3] = [8.0, 16.0, 32.0];
pub const NK_PARAMS: [f64; 2] = [2.0, 3.0];
/// E_P[Z_T; τ_K > T] is carried by rare paths near T*; fewer paths understate its s.e.
pub const NK_PROBE_MIN_PATHS: u64 = 100_000;
/// Martingale means are checked at the largest horizon where every atom outcome is
/// expected at least this many times.
pub const MIN_EXPECTED_HITS: f64 = 30.0;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub n_paths: Option<u64>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub tolerances: Option<Tolerances>,
}

fn canonical(id: &str) -> Result<&'static str> {
    preset_info(id).map(|i| i.id).map_err(|_| Error::UnknownExample(id.into()))
}

pub fn recipe_config(id: &str, ov: &Overrides) -> Result<ExperimentConfig> {
    let key = canonical(id)?;
    let mut c = ExperimentConfig::for_preset(key);
    c.report.identities = true;
    match key {
        "ex-5.9-part-2" => c.family.criteria = vec![CriterionSpec::new(CriterionTag::Aa, 0.5), CriterionSpec::new(CriterionTag::Ba, 0.5)],
        "bounded-ui" | "single-step" => c.report.duality = true,
        _ => {}
    }
    if let Some(n) = ov.n_paths {
        c.n_paths = n;
    }
    c.horizon = ov.horizon;
    if let Some(s) = ov.seed {
        c.seed = s;
    }
    if let Some(t) = ov.tolerances {
        c.tolerances = t;
    }
    Ok(c)
}

pub fn reproduce(id: &str, ov: &Overrides) -> Result<ExperimentReport> {
    let cfg = recipe_config(id, ov)?;
    let mut r = run_experiment(&cfg)?;
    add_checks(&mut r)?;
    r.finalize();
    Ok(r)
}

fn freq(r: &ExperimentReport, flag: &str) -> f64 {
    r.flag(flag).map_or(f64::NAN, |f| f.frequency)
}

fn add_checks(r: &mut ExperimentReport) -> Result<()> {
    let model = r.model.clone();
    let (n, seed) = (r.n_paths, r.seed);
    let mut checks = Vec::new();
    match r.id.as_str() {
        "zero" => checks.push(Check::min("numeric_convergent frequency", freq(r, "numeric_convergent"), 1.0)),
        "ex-6.2-1" => checks.extend(harmonic_walk_checks(r)?),
        "ex-6.2-2" => {
            checks.push(Check::max("numeric_convergent frequency", freq(r, "numeric_convergent"), 0.05));
            checks.push(Check::min("median X_T / T", r.x_t.median / r.horizon, 0.5));
        }
        "ex-6.4" => {
            let agree = r.equalities.iter().find(|e| e.id == "ex-6.4").map_or(f64::NAN, |e| e.agreement);
            checks.push(Check::min("ex-6.4 event agreement", agree, 0.95));
            let (p, se) = no_jump_frequency(&model.with_horizon(1e9), n, seed)?;
            checks.push(Check::abs("P(no jump ever)", p, (-1.0f64).exp(), 4.0 * se));
        }
        "ex-6.6" | "ex-6.7" | "ex-6.8" | "ex-6.3-2" => {
            if let Some(d) = cox_density(&model.kind) {
                let (p, se) = no_jump_frequency(&model, n, seed)?;
                let exact = (-d.cumulative(model.horizon).to_f64()).exp();
                checks.push(Check::abs("P(no jump by T)", p, exact, 4.0 * se.max(1.0 / n as f64)));
            }
        }
        "ex-6.3-1" => checks.extend(nk_checks(r, &model, n, seed)?),
        "ex-6.5" => {
            let comp = model.with_horizon(64.0).compensator()?;
            for t in [32.0, 64.0] {
                let b = exponential_moment_log_bound(&comp, 0.5, t)?;
                checks.push(Check::max(&format!("log moment bound c=0.5, T={t}"), b, f64::MAX));
            }
        }
        "ex-5.9-part-2" => {
            let d = |label: &str| r.verdicts.iter().find(|v| v.criterion == label).map_or(f64::NAN, |v| f64::from(u8::from(v.diverged)));
            checks.push(Check::min("B^0.5 diverges", d("Ba(0.5)"), 1.0));
            checks.push(Check::max("A^0.5 diverges", d("Aa(0.5)"), 0.0));
        }
        "remark-4.3" => checks.extend(series_checks(r)?),
        "grid-diffusion" => checks.push(Check::rel("mean [X,X]_T / σ²T", r.qv_t.mean, r.horizon, 1e-12)),
        "bounded-ui" | "single-step" => {
            for d in &r.duality {
                checks.push(Check::max(&format!("duality |z| {} {}", d.sigma, d.statistic), d.z_score.abs(), 4.0));
            }
        }
        _ => {}
    }
    if model.is_martingale() && r.id != "zero" {
        checks.push(martingale_check(&model, n, seed)?);
    }
    r.checks.extend(checks);
    Ok(())
}

fn cox_density(k: &ModelKind) -> Option<&RateDensity> {
    match k {
        ModelKind::CoxOneJump { density, .. } => Some(density),
        ModelKind::Composite(parts) => parts.iter().find_map(cox_density),
        _ => None,
    }
}

fn no_jump_frequency(model: &ModelSpec, n: u64, seed: u64) -> Result<(f64, f64)> {
    let hits = ensemble_map(model, seed, n, |_, p| Ok(f64::from(u8::from(p.jumps().is_empty()))))?;
    Ok(mean_se(&hits))
}

/// Largest atom time up to the horizon with n·(smallest outcome mass so far) ≥ MIN_EXPECTED_HITS.
pub fn observable_horizon(model: &ModelSpec, n: u64) -> Result<f64> {
    let comp = model.compensator()?;
    if comp.atoms.is_empty() {
        return Ok(model.horizon);
    }
    let mut min_mass = f64::INFINITY;
    let mut t_obs = comp.atoms[0].time;
    for a in &comp.atoms {
        let rest = 1.0 - a.law.total_mass();
        let masses = a.law.discrete.iter().map(|p| p[1]).chain(a.law.continuous.as_ref().map(|c| c.mass)).chain((rest > 1e-15).then_some(rest));
        min_mass = masses.filter(|m| *m > 0.0).fold(min_mass, f64::min);
        if n as f64 * min_mass < MIN_EXPECTED_HITS {
            break;
        }
        t_obs = a.time;
    }
    Ok(t_obs.min(model.horizon))
}

pub fn martingale_check(model: &ModelSpec, n: u64, seed: u64) -> Result<Check> {
    let t = observable_horizon(model, n)?;
    let m = model.with_horizon(t);
    let xs = ensemble_map(&m, seed, n, |_, p| Ok(p.value_at(t)? - p.initial()))?;
    let (mean, se) = mean_se(&xs);
    Ok(Check::abs(&format!("martingale mean X_T - X_0 at T={t}"), mean, 0.0, 4.0 * se))
}

/// Convergence, QV growth and the "(a) holds, (c) and (f) fail" pattern.
fn harmonic_walk_checks(r: &ExperimentReport) -> Result<Vec<Check>> {
    let mut out = vec![Check::min("numeric_convergent frequency", freq(r, "numeric_convergent"), 0.99)];
    let comp = r.model.compensator()?;
    let zero = CadlagPath::constant(0.0, r.horizon)?;
    // E[X,X]_T = Σ x_n²(1/p_n − 1): dominated by outcomes of probability 2^-n
    let expected = match compensator_integral(&comp, &TestFunction::Square, r.horizon, &zero)? {
        Ext::Finite(v) if v.is_finite() => v,
        _ => f64::INFINITY,
    };
    out.push(Check::rel("mean [X,X]_T against its expectation", r.qv_t.mean, expected, 0.1));
    let e = r.equalities.iter().find(|e| e.id == "cor-4.4");
    let share = e.map_or(f64::NAN, |e| {
        let hits: u64 = e.patterns.iter().filter(|(k, _)| k.as_bytes()[0] == b'T' && k.as_bytes()[2] == b'F' && k.as_bytes()[3] == b'F').map(|(_, v)| *v).sum();
        hits as f64 / e.usable_paths.max(1) as f64
    });
    out.push(Check::min("share of paths with (a) and not (c), not (f)", share, 0.95));
    Ok(out)
}

/// First NK counterexample: bounded B^a estimates while ℰ(M) loses mass.
fn nk_checks(r: &mut ExperimentReport, model: &ModelSpec, n: u64, seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for &t in &NK_HORIZONS {
        let m = model.with_horizon(t);
        let fam = StoppingFamily::default_for(t);
        for &a in &NK_PARAMS {
            let v = evaluate_condition(&m, CriterionSpec::new(CriterionTag::Ba, a), &fam, n, seed)?;
            let sup = if v.diverged { f64::INFINITY } else { v.sup_estimate };
            out.push(Check::max(&format!("sup B^{a} estimate, T={t}"), sup, NK_CAP));
            r.verdicts.push(v);
        }
    }
    let pair = tilt_model(&model.with_horizon(64.0))?;
    let q_comp = pair.q_model.compensator()?;
    let mut t_star = None;
    for t in 1..=64 {
        if exact_q_survival(&q_comp, t as f64, DEFAULT_EXPLOSION_LEVEL)? < 0.5 {
            t_star = Some(t as f64);
            break;
        }
    }
    let Some(t_star) = t_star else {
        out.push(Check::max("exact survival falls below 0.5 by T=64", 1.0, 0.5));
        return Ok(out);
    };
    let n = n.max(NK_PROBE_MIN_PATHS);
    let probe = ui_probe(&pair, &[8.0, t_star], DEFAULT_EXPLOSION_LEVEL, n, seed)?;
    for row in &probe.rows {
        let exact = row.exact.unwrap_or(f64::NAN);
        let h = row.horizon;
        out.push(Check::abs(&format!("E_P[Z_T; no explosion] vs exact, T={h}"), row.p_mean, exact, 4.0 * row.p_se.max(1.0 / n as f64)));
        let comb = (row.p_se * row.p_se + row.q_se * row.q_se).sqrt().max(1.0 / n as f64);
        out.push(Check::abs(&format!("dual explosion frequency vs 1 - E_P[Z_T; no explosion], T={h}"), 1.0 - row.q_survival, 1.0 - row.p_mean, 4.0 * comb));
    }
    let last = probe.rows.last().expect("two rows");
    out.push(Check::max(&format!("E_P[Z_T; no explosion] at T*={t_star}"), last.p_mean, 0.5));
    r.ui_probe = Some(probe);
    Ok(out)
}

/// Alternating-harmonic partial sums and harmonic total variation at growing horizons.
fn series_checks(r: &ExperimentReport) -> Result<Vec<Check>> {
    let mut out = vec![
        Check::min("numeric_convergent frequency", freq(r, "numeric_convergent"), 1.0),
        Check::min("numeric_variation_growing frequency", freq(r, "numeric_variation_growing"), 1.0),
        Check::max("numeric_a_finite frequency", freq(r, "numeric_a_finite"), 0.0),
    ];
    let model = &r.model;
    let mut prev_tv = 0.0;
    let mut worst_sum: f64 = 0.0;
    let mut worst_tv: f64 = 0.0;
    let mut increasing = true;
    for t in [1e3, 1e4, 1e5, 1e6] {
        let p = model.with_horizon(t).sampler()?.sample(r.seed, 0)?;
        worst_sum = worst_sum.max((p.value_at(t)? - alternating_harmonic(t as u64)).abs());
        let tv = p.total_variation(t);
        // H_T = ψ(T+1) + γ
        worst_tv = worst_tv.max((tv - (digamma(t + 1.0) + EULER_GAMMA)).abs() / tv);
        increasing &= tv > prev_tv;
        prev_tv = tv;
    }
    out.push(Check::max("partial sums vs alternating-harmonic closed form", worst_sum, 1e-12));
    out.push(Check::max("relative error of total variation vs H_T", worst_tv, 1e-12));
    out.push(Check::min("total variation increasing in T", f64::from(u8::from(increasing)), 1.0));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub seed: u64,
    pub n_paths: u64,
    pub reports: Vec<ExperimentReport>,
    pub failed_checks: Vec<String>,
    pub pass: bool,
}

impl BatteryReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("battery serializes")
    }
}

/// Every preset's recipe at a common seed and ensemble size.
pub fn battery(seed: u64, n_paths: u64) -> Result<BatteryReport> {
    let ov = Overrides { n_paths: Some(n_paths), seed: Some(seed), ..Overrides::default() };
    let reports = preset_ids().iter().map(|id| reproduce(id, &ov)).collect::<Result<Vec<_>>>()?;
    let failed_checks: Vec<String> = reports.iter().flat_map(|r| r.checks.iter().filter(|c| !c.pass).map(move |c| format!("{}: {}", r.id, c.name))).collect();
    Ok(BatteryReport { seed, n_paths, pass: failed_checks.is_empty(), reports, failed_checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::preset;

    #[test]
    fn unknown_recipe() {
        assert!(matches!(reproduce("ex-9.9", &Overrides::default()), Err(Error::UnknownExample(_))));
    }

    #[test]
    fn aliases_resolve() {
        assert_eq!(recipe_config("ex-5.16", &Overrides::default()).unwrap().preset.as_deref(), Some("ex-5.9"));
    }

    #[test]
    fn observable_horizon_for_halving_walk() {
        // p_n = 2^-n: 1e5·2^-n ≥ 30 up to n = 11
        assert_eq!(observable_horizon(&preset("bounded-ui").unwrap(), 100_000).unwrap(), 11.0);
        assert_eq!(observable_horizon(&preset("grid-diffusion").unwrap(), 10).unwrap(), 1.0);
    }

    #[test]
    fn cox_survival_recipe() {
        let r = reproduce("ex-6.4", &Overrides { n_paths: Some(4000), seed: Some(5), ..Overrides::default() }).unwrap();
        let c = r.checks.iter().find(|c| c.name == "P(no jump ever)").unwrap();
        assert!(c.pass, "{c:?}");
    }

    #[test]
    fn series_recipe_passes() {
        let r = reproduce("remark-4.3", &Overrides { n_paths: Some(2), ..Overrides::default() }).unwrap();
        assert!(r.pass, "{:?}", r.checks);
    }
}
