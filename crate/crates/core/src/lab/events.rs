//! Event equalities checked as per-path flag agreement, and confusion matrices
//! against the analytic oracle.

use super::flags::{classify_events, EventFlags, PathSummary, Tolerances};
use crate::error::{Error, Result};
use crate::models::{analytic_oracle, EventOracle, ModelSpec, Ternary};
use crate::numeric::mean_se;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const EQUALITY_IDS: &[&str] = &["cor-4.4", "cor-4.5", "thm-4.10", "ex-6.4", "lemma-6.1"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqualityReport {
    pub id: String,
    pub events: Vec<String>,
    /// Fraction of usable paths on which the listed events coincide.
    pub agreement: f64,
    pub agreement_se: f64,
    /// Counts of each joint outcome, written as a T/F string in event order.
    pub patterns: BTreeMap<String, u64>,
    pub usable_paths: u64,
    /// Oracle probability of convergence against the numeric frequency, when available.
    pub oracle_converges: Option<f64>,
    pub numeric_converges: f64,
    pub warnings: Vec<String>,
}

fn events_for(id: &str, f: &EventFlags, oracle: Option<&EventOracle>) -> Result<Option<Vec<bool>>> {
    let conv = f.numeric_convergent;
    Ok(match id {
        "cor-4.4" => f.functional_c_finite.map(|c| vec![conv, f.liminf_above, c, !f.qv_growing && f.limsup_above]),
        "cor-4.5" => Some(vec![conv, !f.qv_growing && f.a_finite]),
        "thm-4.10" => match (f.y_convergent, f.v_finite, f.neg_log_tail_finite, f.pos_tail_finite) {
            (Some(y), Some(v), Some(n), Some(p)) => Some(vec![conv && y, v, conv && n, y && p]),
            _ => None,
        },
        "ex-6.4" => Some(vec![f.qv_zero, f.drifting_down]),
        "lemma-6.1" => {
            let matches = oracle.and_then(|o| o.converges.probability()).filter(|p| *p == 0.0 || *p == 1.0).is_none_or(|o| conv == (o == 1.0));
            Some(vec![f.small_jumps_growing == f.qv_growing, matches])
        }
        other => return Err(Error::UnknownExample(other.into())),
    })
}

fn event_names(id: &str) -> Vec<String> {
    let v: &[&str] = match id {
        "cor-4.4" => &["lim X exists", "liminf X > -K", "functional (c) finite", "[X,X] settled and limsup X > -K"],
        "cor-4.5" => &["lim X exists", "[X,X] settled and A finite"],
        "thm-4.10" => &["lim X and lim Y exist", "V finite", "lim X exists and neg-log tail finite", "lim Y exists and pos tail finite"],
        "ex-6.4" => &["[X,X] = 0", "X drifting down"],
        "lemma-6.1" => &["(1∧x²)∗μ and [X,X] grow together", "convergence matches oracle"],
        _ => &[],
    };
    v.iter().map(|s| s.to_string()).collect()
}

pub fn equality_from_summaries(id: &str, model: &ModelSpec, summaries: &[PathSummary]) -> Result<EqualityReport> {
    let mut warnings = Vec::new();
    let oracle = match analytic_oracle(model) {
        Ok(o) => Some(o),
        Err(e) => {
            warnings.push(format!("{e}; numeric-only comparison"));
            None
        }
    };
    let mut patterns = BTreeMap::new();
    let mut agree = Vec::new();
    let mut skipped = 0u64;
    for s in summaries {
        match events_for(id, &s.flags, oracle.as_ref())? {
            Some(ev) => {
                let key: String = ev.iter().map(|b| if *b { 'T' } else { 'F' }).collect();
                *patterns.entry(key).or_insert(0) += 1;
                // lemma-6.1 lists agreements already; the others list events that must coincide
                let ok = if id == "lemma-6.1" { ev.iter().all(|b| *b) } else { ev.iter().all(|b| *b == ev[0]) };
                agree.push(f64::from(u8::from(ok)));
            }
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        warnings.push(format!("{skipped} paths lack the functionals this equality needs"));
    }
    let (agreement, agreement_se) = if agree.is_empty() { (f64::NAN, f64::NAN) } else { mean_se(&agree) };
    let conv: Vec<f64> = summaries.iter().map(|s| f64::from(u8::from(s.flags.numeric_convergent))).collect();
    Ok(EqualityReport {
        id: id.into(),
        events: event_names(id),
        agreement,
        agreement_se,
        patterns,
        usable_paths: agree.len() as u64,
        oracle_converges: oracle.and_then(|o| o.converges.probability()),
        numeric_converges: mean_se(&conv).0,
        warnings,
    })
}

pub fn event_equality_test(model: &ModelSpec, id: &str, n_paths: u64, seed: u64, tol: &Tolerances) -> Result<EqualityReport> {
    if !EQUALITY_IDS.contains(&id) {
        return Err(Error::UnknownExample(id.into()));
    }
    let s = classify_events(model, n_paths, seed, tol)?;
    equality_from_summaries(id, model, &s)
}

/// Oracle (rows) against numeric flag (columns) for one event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub event: String,
    pub oracle: Ternary,
    /// [[oracle yes & flag yes, oracle yes & flag no], [oracle no & flag yes, oracle no & flag no]].
    pub counts: [[u64; 2]; 2],
    /// Diagonal fraction; None when the oracle is Mixed or Unknown.
    pub diagonal: Option<f64>,
    /// Numeric frequency of the flag (compare with a Mixed oracle's probability).
    pub flag_frequency: f64,
    pub flag_se: f64,
}

pub const CONFUSION_EVENTS: &[&str] = &["converges", "qv_finite", "sup_finite"];

fn numeric_event(event: &str, f: &EventFlags) -> bool {
    match event {
        "converges" => f.numeric_convergent,
        "qv_finite" => !f.qv_growing,
        "sup_finite" => f.sup_stalled,
        _ => unreachable!(),
    }
}

pub fn confusion(oracle: &EventOracle, summaries: &[PathSummary]) -> Vec<ConfusionMatrix> {
    CONFUSION_EVENTS
        .iter()
        .map(|&event| {
            let o = match event {
                "converges" => oracle.converges,
                "qv_finite" => oracle.qv_finite,
                _ => oracle.sup_finite,
            };
            let flags: Vec<bool> = summaries.iter().map(|s| numeric_event(event, &s.flags)).collect();
            let yes = flags.iter().filter(|b| **b).count() as u64;
            let no = flags.len() as u64 - yes;
            let (counts, diagonal) = match o {
                Ternary::Yes => ([[yes, no], [0, 0]], Some(yes as f64 / flags.len().max(1) as f64)),
                Ternary::No => ([[0, 0], [yes, no]], Some(no as f64 / flags.len().max(1) as f64)),
                _ => ([[0, 0], [0, 0]], None),
            };
            let (flag_frequency, flag_se) = mean_se(&flags.iter().map(|b| f64::from(u8::from(*b))).collect::<Vec<_>>());
            ConfusionMatrix { event: event.into(), oracle: o, counts, diagonal, flag_frequency, flag_se }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::preset;

    #[test]
    fn cox_slice_equality_is_exact() {
        let m = preset("ex-6.4").unwrap();
        let r = event_equality_test(&m, "ex-6.4", 2000, 3, &Tolerances::default()).unwrap();
        assert_eq!(r.agreement, 1.0, "{r:?}");
        let both = r.patterns.get("TT").copied().unwrap_or(0) as f64 / 2000.0;
        // P(ρ > 100) = exp(−(1 − 1/101))
        let p = (-(1.0 - 1.0 / 101.0f64)).exp();
        assert!((both - p).abs() < 4.0 * (p * (1.0 - p) / 2000.0).sqrt());
    }

    #[test]
    fn bounded_martingale_agrees() {
        let m = preset("bounded-ui").unwrap();
        for id in ["cor-4.4", "cor-4.5", "lemma-6.1"] {
            let r = event_equality_test(&m, id, 1000, 1, &Tolerances::default()).unwrap();
            assert!(r.agreement >= 0.95, "{id}: {r:?}");
        }
    }

    #[test]
    fn custom_model_downgrades_to_numeric() {
        let mut m = preset("single-step").unwrap();
        m.preset_id = None;
        let r = event_equality_test(&m, "cor-4.4", 50, 1, &Tolerances::default()).unwrap();
        assert!(r.warnings.iter().any(|w| w.contains("numeric-only")));
        assert!(matches!(event_equality_test(&m, "nope", 5, 1, &Tolerances::default()), Err(Error::UnknownExample(_))));
    }

    #[test]
    fn confusion_rows_sum_to_class_counts() {
        let m = preset("ex-6.2-6").unwrap();
        let s = classify_events(&m, 300, 1, &Tolerances::default()).unwrap();
        for c in confusion(&analytic_oracle(&m).unwrap(), &s) {
            let total: u64 = c.counts.iter().flatten().sum();
            assert!(total == 300 || c.diagonal.is_none());
            assert!((0.0..=1.0).contains(&c.flag_frequency));
        }
    }
}
