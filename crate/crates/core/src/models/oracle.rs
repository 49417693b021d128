//! Asymptotic-event oracles: what the model does as t → ∞, decided analytically.

use super::seq::SumLimit;
use super::{ModelKind, ModelSpec};
use crate::error::{Error, Result};
use crate::numeric::Ext;
use crate::testfn::TestFunction;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ternary {
    Yes,
    No,
    /// Holds with probability strictly between 0 and 1 (the value, when known).
    Mixed { p_yes: Option<f64> },
    Unknown,
}

impl Ternary {
    pub fn from_bool(b: bool) -> Ternary {
        if b {
            Ternary::Yes
        } else {
            Ternary::No
        }
    }

    /// Probability of the event, when the oracle pins it down.
    pub fn probability(self) -> Option<f64> {
        match self {
            Ternary::Yes => Some(1.0),
            Ternary::No => Some(0.0),
            Ternary::Mixed { p_yes } => p_yes,
            Ternary::Unknown => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventOracle {
    /// lim X_t exists in ℝ.
    pub converges: Ternary,
    /// [X,X]_∞ < ∞.
    pub qv_finite: Ternary,
    /// X is a special semimartingale on [0,∞].
    pub special_semimartingale_on_closure: Ternary,
    /// ℰ(X) is a uniformly integrable martingale.
    pub ui_martingale_of_exponential: Ternary,
    /// sup_t X_t < ∞.
    pub sup_finite: Ternary,
    pub notes: String,
}

impl EventOracle {
    pub(crate) fn all(t: Ternary, notes: &str) -> EventOracle {
        EventOracle { converges: t, qv_finite: t, special_semimartingale_on_closure: t, ui_martingale_of_exponential: t, sup_finite: t, notes: notes.into() }
    }
}

/// Preset-specific answers take precedence; otherwise the answer is derived from the
/// model's closed-form series and integrals.
pub fn analytic_oracle(model: &ModelSpec) -> Result<EventOracle> {
    if let Some(id) = &model.preset_id {
        if let Some(o) = super::presets::preset_oracle(id) {
            return Ok(o);
        }
    }
    generic(&model.kind)
}

fn series_oracle(facts: super::SeriesFacts, notes: &str) -> EventOracle {
    EventOracle {
        converges: Ternary::from_bool(facts.sum == SumLimit::Finite),
        qv_finite: Ternary::from_bool(facts.squares_finite),
        special_semimartingale_on_closure: Ternary::from_bool(facts.abs_finite),
        ui_martingale_of_exponential: Ternary::Unknown,
        sup_finite: Ternary::from_bool(matches!(facts.sum, SumLimit::Finite | SumLimit::MinusInfinity)),
        notes: notes.into(),
    }
}

fn generic(kind: &ModelKind) -> Result<EventOracle> {
    use Ternary::*;
    Ok(match kind {
        ModelKind::Zero => EventOracle::all(Yes, "constant process"),
        ModelKind::RandomWalkLargeJumps { x, .. } => series_oracle(
            x.facts(),
            "Borel–Cantelli: ΔX_n = x_n eventually, so convergence follows Σx_n, [X,X] follows Σx_n², closure follows Σ|x_n|",
        ),
        ModelKind::Deterministic { x } => series_oracle(x.facts(), "deterministic series; semimartingale on [0,∞] iff finite variation"),
        ModelKind::DiscreteDensitySteps { .. } => EventOracle {
            converges: No,
            qv_finite: No,
            special_semimartingale_on_closure: No,
            ui_martingale_of_exponential: No,
            sup_finite: No,
            notes: "steps do not vanish; under the dual measure N has jumps −1/2 eventually and explodes".into(),
        },
        ModelKind::GridDiffusion { sigma2, drift, .. } => {
            if *sigma2 == 0.0 {
                return Ok(EventOracle::all(Unknown, "degenerate diffusion"));
            }
            EventOracle {
                converges: No,
                qv_finite: No,
                special_semimartingale_on_closure: No,
                ui_martingale_of_exponential: if *drift == 0.0 { No } else { Unknown },
                sup_finite: Ternary::from_bool(*drift < 0.0),
                notes: "Brownian motion with drift; ℰ(σW) → 0".into(),
            }
        }
        ModelKind::CoxOneJump { density, compensated } => {
            let total = density.cumulative(f64::INFINITY);
            if !compensated {
                return Ok(EventOracle {
                    converges: Yes,
                    qv_finite: Yes,
                    special_semimartingale_on_closure: Unknown,
                    ui_martingale_of_exponential: Unknown,
                    sup_finite: Yes,
                    notes: "single jump, eventually constant".into(),
                });
            }
            let drift = density.integral(&TestFunction::Identity, 0.0, f64::INFINITY)?;
            match (total, drift) {
                (Ext::Finite(l), Ext::PosInfinite | Ext::NegInfinite) => {
                    let survive = (-l).exp();
                    let up = drift == Ext::NegInfinite;
                    EventOracle {
                        converges: Mixed { p_yes: Some(1.0 - survive) },
                        qv_finite: Yes,
                        special_semimartingale_on_closure: No,
                        ui_martingale_of_exponential: Unknown,
                        sup_finite: if up { Mixed { p_yes: Some(1.0 - survive) } } else { Yes },
                        notes: format!("P(ρ=∞) = exp(−∫λ) = {survive}; on that event the compensator drift diverges"),
                    }
                }
                (Ext::Finite(_), Ext::Finite(_)) => EventOracle::all(Yes, "integrable compensator drift").with_ui(Unknown),
                _ => EventOracle {
                    converges: Yes,
                    qv_finite: Yes,
                    special_semimartingale_on_closure: Unknown,
                    ui_martingale_of_exponential: Unknown,
                    sup_finite: Yes,
                    notes: "∫λ = ∞ so ρ < ∞ a.s.".into(),
                },
            }
        }
        ModelKind::AtomSteps { .. } | ModelKind::Composite(_) => {
            return Err(Error::OracleUnavailable("no closed-form oracle for custom atom or composite models".into()))
        }
    })
}

impl EventOracle {
    fn with_ui(mut self, t: Ternary) -> EventOracle {
        self.ui_martingale_of_exponential = t;
        self
    }
}
