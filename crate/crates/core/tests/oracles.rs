//! Closed forms and brute-force enumerations checked against the library.

use locmart::follmer::{exact_q_survival, tilt_model};
use locmart::models::{ensemble_map, preset};
use locmart::numeric::{alternating_harmonic, mean_se};
use locmart::stochexp::stoch_exp;

#[test]
fn cox_survival_matches_closed_form() {
    // λ(s) = (1+s)^-2 so Λ(t) = t/(1+t)
    let m = preset("ex-6.4").unwrap().with_horizon(3.0);
    let hits = ensemble_map(&m, 11, 40_000, |_, p| Ok(f64::from(u8::from(p.jumps().is_empty())))).unwrap();
    let (p, se) = mean_se(&hits);
    let want = (-3.0f64 / 4.0).exp();
    assert!((p - want).abs() < 4.0 * se, "{p} ± {se} vs {want}");
}

#[test]
fn single_step_exponential_has_mean_one() {
    let m = preset("single-step").unwrap();
    let z = ensemble_map(&m, 5, 30_000, |_, p| stoch_exp(p)?.exponential.value_at(1.0)).unwrap();
    let (mean, se) = mean_se(&z);
    assert!((mean - 1.0).abs() < 4.0 * se);
    // 1 + ΔX is 2 or 1/2, nothing else
    assert!(z.iter().all(|v| *v == 2.0 || *v == 0.5));
}

#[test]
fn alternating_series_partial_sums() {
    let mut s = 0.0;
    for n in 1..=2001u64 {
        s += if n % 2 == 0 { 1.0 } else { -1.0 } / n as f64;
        if n % 500 == 1 {
            assert!((alternating_harmonic(n) - s).abs() < 1e-12, "n = {n}");
        }
    }
    assert!((s + std::f64::consts::LN_2).abs() < 1e-3);
}

/// ℚ(sup_{t≤T} Z_t ≤ K) by enumerating every ℚ outcome of the atoms.
fn brute_survival(atoms: &[Vec<[f64; 2]>], level: f64) -> f64 {
    fn go(atoms: &[Vec<[f64; 2]>], log_z: f64, cap: f64) -> f64 {
        match atoms.split_first() {
            None => 1.0,
            Some((law, rest)) => law
                .iter()
                .map(|&[n, q]| {
                    // Z = 1/ℰ(N) moves by the factor 1/(1+ΔN)
                    let l = log_z - (1.0 + n).ln();
                    if l > cap { 0.0 } else { q * go(rest, l, cap) }
                })
                .sum(),
        }
    }
    go(atoms, 0.0, level.ln())
}

#[test]
fn dual_survival_matches_enumeration() {
    for (id, t) in [("ex-6.3-1", 10.0), ("bounded-ui", 12.0), ("single-step", 1.0)] {
        let pair = tilt_model(&preset(id).unwrap().with_horizon(t)).unwrap();
        let qc = pair.q_model.compensator().unwrap();
        let laws: Vec<Vec<[f64; 2]>> = qc.atoms.iter().filter(|a| a.time <= t).map(|a| a.law.discrete.clone()).collect();
        for level in [3.0, 1e3] {
            let exact = exact_q_survival(&qc, t, level).unwrap();
            let brute = brute_survival(&laws, level);
            assert!((exact - brute).abs() < 1e-12, "{id} K={level}: {exact} vs {brute}");
        }
    }
}
