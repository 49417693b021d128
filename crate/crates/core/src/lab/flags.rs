//! Per-path finite-horizon proxies for the asymptotic events.

use crate::error::{Error, Result};
use crate::functionals::{compensator_integral, quadratic_variation, CompensatorSpec};
use crate::models::{ensemble_map, ModelKind, ModelSpec};
use crate::numeric::Ext;
use crate::path::CadlagPath;
use crate::stochexp::{log_transform, stoch_exp_with, ExpOptions};
use crate::testfn::TestFunction;
use serde::{Deserialize, Serialize};

/// Jump thresholds for the log-transform events.
pub const LOG_EVENT_ETA: f64 = 0.5;
pub const LOG_EVENT_KAPPA: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Tail oscillation below this counts as convergence.
    pub eps: f64,
    /// Tail window is [αT, T].
    pub alpha: f64,
    /// Stand-in for infinity in liminf/limsup flags.
    pub k: f64,
    /// |ℰ(X)| band [η, 1/η] on the tail window.
    pub eta: f64,
    /// QV grows when its tail increment exceeds this fraction of the expected one (and ε).
    pub qv_frac: f64,
    /// Functionals above this count as infinite.
    pub cap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { eps: 1e-2, alpha: 0.5, k: 1e3, eta: 1e-3, qv_frac: 0.1, cap: 1e3 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::ConfigError { field: format!("tolerances.{field}"), message: msg.into() });
        for (name, v) in [("eps", self.eps), ("k", self.k), ("eta", self.eta), ("qv_frac", self.qv_frac), ("cap", self.cap)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(name, "must be positive and finite");
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", "must lie in (0, 1)");
        }
        if self.eta >= 1.0 {
            return bad("eta", "must be below 1");
        }
        Ok(())
    }
}

/// Finite-horizon flags; every name refers to the numeric proxy, not the a.s. event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventFlags {
    pub numeric_convergent: bool,
    pub liminf_above: bool,
    pub limsup_above: bool,
    pub qv_growing: bool,
    pub qv_zero: bool,
    pub functional_c_finite: Option<bool>,
    pub a_finite: bool,
    pub exp_converges_nonzero: bool,
    pub absorbed: bool,
    pub y_convergent: Option<bool>,
    pub v_finite: Option<bool>,
    pub neg_log_tail_finite: Option<bool>,
    pub pos_tail_finite: Option<bool>,
    /// Running maximum no longer increasing on the tail window.
    pub sup_stalled: bool,
    /// Strictly falling on the tail window.
    pub drifting_down: bool,
    pub variation_growing: bool,
    pub small_jumps_growing: bool,
}

/// Flags plus the scalar summaries reports tabulate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub flags: EventFlags,
    pub x_t: f64,
    pub qv_t: f64,
    pub tv_t: f64,
}

fn finite_below(e: Result<Ext>, cap: f64) -> Option<bool> {
    match e {
        Ok(Ext::Finite(v)) => Some(v < cap),
        Ok(_) => Some(false),
        Err(_) => None,
    }
}

/// Predictable finite-variation part A in X = M − A at time t (0 for local martingales).
fn a_value(kind: &ModelKind, path: &CadlagPath, comp: &CompensatorSpec, t: f64) -> Result<f64> {
    Ok(match kind {
        ModelKind::CoxOneJump { density, compensated: false } => {
            let rho = comp.rho(path).min(t);
            -density.integral(&TestFunction::Identity, 0.0, rho)?.to_f64()
        }
        ModelKind::Deterministic { .. } => path.total_variation(t),
        ModelKind::GridDiffusion { drift, start, .. } => -drift * (t - start).max(0.0),
        ModelKind::Composite(parts) => {
            let mut s = 0.0;
            for p in parts {
                s += a_value(p, path, comp, t)?;
            }
            s
        }
        _ => 0.0,
    })
}

pub fn classify_path(model: &ModelSpec, comp: &CompensatorSpec, x: &CadlagPath, tol: &Tolerances) -> Result<PathSummary> {
    let horizon = x.horizon();
    let w0 = tol.alpha * horizon;
    let (lo, hi) = x.range_over(w0, horizon)?;
    let (_, early_hi) = x.range_over(0.0, w0)?;
    let x_t = x.value_at(horizon)?;
    let x_w = x.value_at(w0)?;

    let qv = quadratic_variation(x);
    let qv_t = qv.value_at(horizon)?;
    let qv_incr = qv_t - qv.value_at(w0)?;
    let trunc = TestFunction::TruncatedSquare { kappa: 1.0 };
    let expect = |t: f64| compensator_integral(comp, &trunc, t, x).map(|e| e.to_f64());
    let cont_qv = x.continuous().qv(horizon) - x.continuous().qv(w0);
    let expected = match (expect(horizon), expect(w0)) {
        (Ok(a), Ok(b)) if (a - b).is_finite() => a - b + cont_qv,
        _ => cont_qv,
    };
    let threshold = (tol.qv_frac * expected).max(tol.eps);
    let small: f64 = x.jumps().iter().filter(|j| j.time > w0).map(|j| (j.size * j.size).min(1.0)).sum::<f64>() + cont_qv;

    let tv_t = x.total_variation(horizon);
    let a_t = a_value(&model.kind, x, comp, horizon)?;

    let functional_c_finite = match (|| -> Result<Ext> {
        let zero = CadlagPath::constant(0.0, horizon)?;
        let c = crate::functionals::convergence_functional_c(x, comp, &zero, horizon)?;
        Ok(c.add(Ext::Finite(a_t.abs())).unwrap_or(Ext::PosInfinite))
    })() {
        Ok(Ext::Finite(v)) => Some(v < tol.cap),
        Ok(_) => Some(false),
        Err(_) => None,
    };

    // jumps below −1 only make sense for the signed exponential
    let signed = model.signed_exponential || x.jumps().iter().any(|j| j.size < -1.0);
    let z = stoch_exp_with(x, ExpOptions { signed })?;
    let absorbed = z.absorption_time.is_some_and(|t| t < horizon);
    let exp_converges_nonzero = !absorbed && {
        let e = &z.exponential;
        let mut ok = true;
        let mut times: Vec<f64> = e.event_times().into_iter().filter(|&t| t > w0).collect();
        times.push(w0);
        for t in times {
            let (s, l) = e.log_abs_at(t)?;
            if s == 0.0 || l < tol.eta.ln() || l > -tol.eta.ln() {
                ok = false;
                break;
            }
        }
        ok
    };

    let (y_convergent, v_finite) = match log_transform(x, comp) {
        Ok(lt) => (lt.y.tail_oscillation(w0).ok().map(|o| o < tol.eps), lt.v.value_at(horizon).ok().map(|v| v < tol.cap)),
        Err(_) => (None, None),
    };
    let neg_log_tail_finite = finite_below(compensator_integral(comp, &TestFunction::NegLogTail { eta: LOG_EVENT_ETA }, horizon, x), tol.cap);
    let pos_tail_finite = finite_below(compensator_integral(comp, &TestFunction::PosTail { kappa: LOG_EVENT_KAPPA }, horizon, x), tol.cap);

    let flags = EventFlags {
        numeric_convergent: hi - lo < tol.eps,
        liminf_above: lo > -tol.k,
        limsup_above: hi > -tol.k,
        qv_growing: qv_incr > threshold,
        qv_zero: qv_t == 0.0,
        functional_c_finite,
        a_finite: a_t.abs() < tol.cap && !(matches!(model.kind, ModelKind::Deterministic { .. }) && tv_t - x.total_variation(w0) > tol.eps),
        exp_converges_nonzero,
        absorbed,
        y_convergent,
        v_finite,
        neg_log_tail_finite,
        pos_tail_finite,
        sup_stalled: hi <= early_hi.max(x_w) + tol.eps,
        drifting_down: x_t < x_w - tol.eps && hi <= x_w,
        variation_growing: tv_t - x.total_variation(w0) > tol.eps,
        small_jumps_growing: small > threshold,
    };
    Ok(PathSummary { flags, x_t, qv_t, tv_t })
}

/// Flags for paths 0..n of the model's ensemble.
pub fn classify_events(model: &ModelSpec, n_paths: u64, seed: u64, tol: &Tolerances) -> Result<Vec<PathSummary>> {
    tol.validate()?;
    let comp = model.compensator()?;
    ensemble_map(model, seed, n_paths, |_, p| classify_path(model, &comp, p, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::preset;

    #[test]
    fn constant_path_flags() {
        let m = preset("zero").unwrap();
        let s = classify_events(&m, 3, 1, &Tolerances::default()).unwrap();
        for p in s {
            let f = p.flags;
            assert!(f.numeric_convergent && f.liminf_above && f.limsup_above && !f.qv_growing && f.qv_zero);
            assert_eq!(f.functional_c_finite, Some(true));
            assert!(f.exp_converges_nonzero && !f.absorbed && f.sup_stalled && !f.variation_growing);
        }
    }

    #[test]
    fn remark_series_converges_with_growing_variation() {
        let m = preset("remark-4.3").unwrap();
        let s = classify_events(&m, 1, 1, &Tolerances::default()).unwrap();
        assert!(s[0].flags.numeric_convergent && s[0].flags.variation_growing && !s[0].flags.a_finite);
    }

    #[test]
    fn unit_steps_diverge() {
        let m = preset("ex-6.2-2").unwrap();
        let s = classify_events(&m, 200, 1, &Tolerances::default()).unwrap();
        assert!(s.iter().filter(|p| !p.flags.numeric_convergent).count() >= 195);
        assert!(s.iter().filter(|p| p.x_t > 500.0).count() >= 150);
    }

    #[test]
    fn convergence_implies_bounded_below() {
        for id in ["ex-6.2-6", "ex-6.4", "grid-diffusion", "bounded-ui"] {
            for p in classify_events(&preset(id).unwrap(), 200, 2, &Tolerances::default()).unwrap() {
                if p.flags.numeric_convergent {
                    assert!(p.flags.liminf_above && p.flags.limsup_above);
                }
            }
        }
    }

    #[test]
    fn bad_tolerances() {
        let t = Tolerances { alpha: 1.5, ..Tolerances::default() };
        assert!(matches!(t.validate(), Err(Error::ConfigError { .. })));
    }
}
