//! The preset catalogue: every counterexample construction plus a few sanity models.

use super::oracle::{EventOracle, Ternary};
use super::{ModelKind, ModelSpec, SeqFamily};
use crate::density::{PowerSum, RateDensity};
use crate::error::{Error, Result};
use crate::functionals::Atom;
use crate::jumplaw::{ContinuousPart, HeavyTail, JumpLaw};
use crate::testfn::TestFunction;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PresetInfo {
    pub id: &'static str,
    pub aliases: &'static [&'static str],
    pub description: &'static str,
    pub default_horizon: f64,
    pub min_horizon: f64,
    pub max_horizon: f64,
    /// Parameter choices the construction leaves open.
    pub choices: &'static str,
}

const IDS: &[&str] = &[
    "zero",
    "ex-6.2-1",
    "ex-6.2-2",
    "ex-6.2-3",
    "ex-6.2-4",
    "ex-6.2-5",
    "ex-6.2-6",
    "ex-6.4",
    "ex-6.5",
    "ex-6.6",
    "ex-6.7",
    "ex-6.8",
    "ex-6.3-1",
    "ex-6.3-2",
    "ex-5.9",
    "ex-5.9-part-2",
    "remark-4.3",
    "bounded-ui",
    "grid-diffusion",
    "single-step",
];

pub fn preset_ids() -> &'static [&'static str] {
    IDS
}

const HALVING: SeqFamily = SeqFamily::Geometric { scale: 1.0, ratio: 0.5 };
const P_CHOICE: &str = "p_n = 2^-n (any summable sequence qualifies)";

fn canonical(id: &str) -> Option<&'static str> {
    match id {
        "ex-5.16" => Some("ex-5.9"),
        "ex-5.16-part-2" => Some("ex-5.9-part-2"),
        _ => IDS.iter().copied().find(|&k| k == id),
    }
}

pub fn preset_info(id: &str) -> Result<PresetInfo> {
    let key = canonical(id).ok_or_else(|| Error::UnknownPreset(id.to_string()))?;
    let info = |description, default_horizon, min_horizon, max_horizon, choices| PresetInfo {
        id: key,
        aliases: match key {
            "ex-5.9" => &["ex-5.16"],
            "ex-5.9-part-2" => &["ex-5.16-part-2"],
            _ => &[],
        },
        description,
        default_horizon,
        min_horizon,
        max_horizon,
        choices,
    };
    Ok(match key {
        "zero" => info("M ≡ 0", 10.0, 0.0, 1e9, ""),
        "ex-6.2-1" => info("random walk, x_n = (−1)^n/√n with x_1 = 0", 1000.0, 1.0, 1e6, P_CHOICE),
        "ex-6.2-2" => info("random walk, x_n = 1", 1000.0, 1.0, 1e6, P_CHOICE),
        "ex-6.2-3" => info("random walk, |x_n| = 1/n with partial sums swinging between ±k", 1000.0, 1.0, 1e6, P_CHOICE),
        "ex-6.2-4" => info("random walk, x_n = e^{(−1)^n/√n} − 1", 1000.0, 1.0, 1e6, P_CHOICE),
        "ex-6.2-5" => info("random walk, x_n = −1/n", 1000.0, 1.0, 1e6, P_CHOICE),
        "ex-6.2-6" => info("random walk, x_n = (−1)^n/n", 1000.0, 1.0, 1e6, P_CHOICE),
        "ex-6.4" => info("Cox jump, λ = (1+s)^-2, γ(s) = s, compensated", 100.0, 0.0, 1e9, ""),
        "ex-6.5" => info("random walk, x_n = −1/2, dyadic p_n", 32.0, 1.0, 64.0, "p_n = largest 2^-k under both bounds"),
        "ex-6.6" => info("Brownian motion plus Cox jump, λ = (1+s)^-2, γ = 1/λ", 20.0, 0.0, 1e4, "grid step h = 0.01"),
        "ex-6.7" => info("−γ(ρ)1{ρ ≤ t}, λ = (1+s)^-2, γ(s) = s", 100.0, 0.0, 1e9, ""),
        "ex-6.8" => info("Cox jump, λ = (1+s)^-2, γ(s) = s (satisfies all three integrability conditions)", 100.0, 0.0, 1e9, ""),
        "ex-6.3-1" => info("ξ_n = 1 w.p. (1−p_n)/2, −(1−p_n)/(1+p_n) otherwise; dyadic p_n", 32.0, 1.0, 64.0, "p_n as in ex-6.5"),
        "ex-6.3-2" => info("M = −N + y²/(1+y)∗μ^N for the ex-6.8 martingale N, under the dual measure", 100.0, 0.0, 1e9, ""),
        "ex-5.9" => info("jump YΘ − (1−Θ)/2 at t = 1 followed by Brownian motion", 10.0, 1.0, 1e4, "Y density ∝ (1+y)^-2 log^-2(e+y); grid step 0.01"),
        "ex-5.9-part-2" => info("jump YΘ − (1−Θ)/2 at t = 1, stopped", 2.0, 1.0, 1e9, "Y density ∝ (1+y)^-2 log^-2(e+y)"),
        "remark-4.3" => info("deterministic X_t = Σ_{n≤t} (−1)^n/n", 1000.0, 1.0, 1e7, ""),
        "bounded-ui" => info("random walk, x_n = 2^-n, p_n = 2^-n", 32.0, 1.0, 1e6, ""),
        "grid-diffusion" => info("Brownian motion on a grid, h = 0.01", 1.0, 0.0, 1e4, ""),
        "single-step" => info("one jump at t = 1, +1 w.p. 1/3 and −1/2 w.p. 2/3", 1.0, 1.0, 1e9, ""),
        _ => unreachable!(),
    })
}

fn cox_lambda() -> PowerSum {
    PowerSum::new(vec![[1.0, -2.0]])
}

fn identity_mark() -> PowerSum {
    PowerSum::new(vec![[1.0, 1.0], [-1.0, 0.0]])
}

fn rw(x: SeqFamily, p: SeqFamily) -> ModelKind {
    ModelKind::RandomWalkLargeJumps { x, p }
}

fn heavy_atom() -> Atom {
    let ey = HeavyTail::BASE.expectation(&TestFunction::Identity).map(|e| e.to_f64()).unwrap_or(f64::NAN);
    let q = 1.0 / (1.0 + 2.0 * ey);
    Atom { time: 1.0, law: JumpLaw { discrete: vec![[-0.5, 1.0 - q]], continuous: Some(ContinuousPart { mass: q, law: HeavyTail::BASE }) } }
}

fn grid(start: f64) -> ModelKind {
    ModelKind::GridDiffusion { sigma2: 1.0, drift: 0.0, step: 0.01, start }
}

/// The registered model; the horizon is the preset default.
pub fn preset(id: &str) -> Result<ModelSpec> {
    let info = preset_info(id)?;
    let mut signed = false;
    let kind = match info.id {
        "zero" => ModelKind::Zero,
        "ex-6.2-1" => {
            signed = true;
            rw(SeqFamily::Patched { base: Box::new(SeqFamily::AltInvSqrt), patches: vec![(1, 0.0)] }, HALVING)
        }
        "ex-6.2-2" => {
            signed = true;
            rw(SeqFamily::Const { value: 1.0 }, HALVING)
        }
        "ex-6.2-3" => {
            signed = true;
            rw(SeqFamily::OscillatingHarmonic, HALVING)
        }
        "ex-6.2-4" => {
            signed = true;
            rw(SeqFamily::ExpAltInvSqrtM1, HALVING)
        }
        "ex-6.2-5" => rw(SeqFamily::NegHarmonic, HALVING),
        "ex-6.2-6" => {
            signed = true;
            rw(SeqFamily::AltHarmonic, HALVING)
        }
        "ex-6.4" | "ex-6.8" => ModelKind::CoxOneJump { density: RateDensity::new(cox_lambda(), identity_mark()), compensated: true },
        "ex-6.5" => rw(SeqFamily::Const { value: -0.5 }, SeqFamily::DyadicUi),
        "ex-6.6" => ModelKind::Composite(vec![
            ModelKind::CoxOneJump { density: RateDensity::new(cox_lambda(), PowerSum::new(vec![[1.0, 2.0]])), compensated: true },
            grid(0.0),
        ]),
        "ex-6.7" => ModelKind::CoxOneJump { density: RateDensity::new(cox_lambda(), identity_mark().scale(-1.0)), compensated: false },
        "ex-6.3-1" => ModelKind::DiscreteDensitySteps { p: SeqFamily::DyadicUi },
        "ex-6.3-2" => ModelKind::CoxOneJump { density: RateDensity::new(cox_lambda(), identity_mark()).tilted(), compensated: true },
        "ex-5.9" => ModelKind::Composite(vec![ModelKind::AtomSteps { atoms: vec![heavy_atom()] }, grid(1.0)]),
        "ex-5.9-part-2" => ModelKind::AtomSteps { atoms: vec![heavy_atom()] },
        "remark-4.3" => ModelKind::Deterministic { x: SeqFamily::AltHarmonic },
        "bounded-ui" => rw(HALVING, HALVING),
        "grid-diffusion" => grid(0.0),
        "single-step" => ModelKind::AtomSteps { atoms: vec![Atom { time: 1.0, law: JumpLaw::discrete(vec![[1.0, 1.0 / 3.0], [-0.5, 2.0 / 3.0]]) }] },
        _ => unreachable!(),
    };
    Ok(ModelSpec { kind, horizon: info.default_horizon, preset_id: Some(info.id.to_string()), signed_exponential: signed })
}

pub(crate) fn preset_oracle(id: &str) -> Option<EventOracle> {
    use Ternary::*;
    let o = |c, q, s, u, sup, notes: &str| EventOracle {
        converges: c,
        qv_finite: q,
        special_semimartingale_on_closure: s,
        ui_martingale_of_exponential: u,
        sup_finite: sup,
        notes: notes.into(),
    };
    let survive = (-1f64).exp();
    Some(match canonical(id)? {
        "zero" => EventOracle::all(Yes, "constant process"),
        "ex-6.2-1" => o(Yes, No, No, No, Yes, "converges with [X,X]_∞ = ∞; ℰ(X) → 0 (eventually constant sign)"),
        "ex-6.2-2" => o(No, No, No, Unknown, No, "X → +∞ a.s."),
        "ex-6.2-3" => o(No, Yes, No, Unknown, No, "partial sums oscillate between ±∞; Σx_n² < ∞"),
        "ex-6.2-4" => o(No, No, No, Unknown, No, "X → +∞ and [X,X] → ∞ while ℰ(X) converges to a nonzero limit"),
        "ex-6.2-5" => o(No, Yes, No, Unknown, Yes, "X → −∞ with [X,X]_∞ < ∞"),
        "ex-6.2-6" => o(Yes, Yes, No, Unknown, Yes, "converges with finite [X,X], not a semimartingale on [0,∞]"),
        "ex-6.4" | "ex-6.8" => o(
            Mixed { p_yes: Some(1.0 - survive) },
            Yes,
            No,
            Unknown,
            Yes,
            "P(ρ=∞) = e^-1; on {ρ=∞} X → −∞ without oscillating, and {[X,X]_∞ = 0} = {limsup X = −∞}",
        ),
        "ex-6.5" => o(No, No, No, No, Yes, "X → −∞ a.s. yet exponential moments of c·log(1+x)∗(μ−ν) stay bounded for c < 1"),
        "ex-6.6" => o(No, No, No, Unknown, Mixed { p_yes: Some(survive) }, "[X,X]_∞ = ∞ a.s. and P(sup X < ∞) = P(ρ=∞) = e^-1"),
        "ex-6.7" => o(Yes, Yes, No, Unknown, Yes, "semimartingale on [0,∞] whose compensator part is infinite with positive probability"),
        "ex-6.3-1" => o(No, No, No, No, No, "sup_σ E[e^{B^a_σ}] < ∞ for a > 0 but ℰ(M) is not UI (N explodes under the dual measure)"),
        "ex-6.3-2" => o(Yes, Yes, Unknown, No, Yes, "single jump under an intensity with infinite mass; ℰ(M) not UI"),
        "ex-5.9" => o(No, No, No, No, No, "ℰ(M) → 0; entropy of ν at t = 1 is infinite"),
        "ex-5.9-part-2" => o(Yes, Yes, Yes, Yes, Yes, "stopped at 1: ℰ(M) is UI while the entropy condition fails"),
        "remark-4.3" => o(Yes, Yes, No, Unknown, Yes, "alternating series; Var(A)_∞ = Σ1/n = ∞"),
        "bounded-ui" => o(Yes, Yes, Yes, Yes, Yes, "Σ|x_n| < ∞ and 0 < ℰ(X) ≤ ∏(1+2^-n) < e"),
        "grid-diffusion" => o(No, No, No, No, No, "Brownian motion"),
        "single-step" => EventOracle::all(Yes, "one bounded jump"),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Ext;

    #[test]
    fn aliases_resolve() {
        assert_eq!(preset("ex-5.16").unwrap(), preset("ex-5.9").unwrap());
        assert_eq!(preset("ex-5.16-part-2").unwrap().preset_id.as_deref(), Some("ex-5.9-part-2"));
        assert!(matches!(preset("nope"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn all_presets_validate() {
        for id in preset_ids() {
            let m = preset(id).unwrap();
            m.validate().unwrap_or_else(|e| panic!("{id}: {e}"));
            let info = preset_info(id).unwrap();
            assert!(info.min_horizon <= m.horizon && m.horizon <= info.max_horizon);
            assert!(preset_oracle(id).is_some());
        }
    }

    #[test]
    fn heavy_tail_moment_conditions() {
        // E[Y] < ∞ while E[(1+Y)log(1+Y)] = ∞, with truncations growing without bound
        let ey = HeavyTail::BASE.expectation(&TestFunction::Identity).unwrap();
        assert!(ey.is_finite() && ey.to_f64() > 0.0);
        assert_eq!(HeavyTail::BASE.expectation(&TestFunction::Entropy).unwrap(), Ext::PosInfinite);
        let t: Vec<f64> = [50.0, 100.0, 200.0, 400.0].iter().map(|&s| HeavyTail::BASE.truncated_expectation(&TestFunction::Entropy, s)).collect();
        assert!(t.windows(2).all(|w| w[1] > w[0] + 0.1), "{t:?}");
    }

    #[test]
    fn heavy_atom_is_mean_zero() {
        let a = heavy_atom();
        assert!((a.law.total_mass() - 1.0).abs() < 1e-12);
        assert!(a.law.mean().unwrap().to_f64().abs() < 1e-12);
    }

    #[test]
    fn ex_6_5_first_probabilities() {
        let p = SeqFamily::DyadicUi;
        assert_eq!(p.value(1), 0.5);
        assert_eq!(p.value(2), 1.0 / 64.0);
    }
}
