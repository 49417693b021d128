use locmart::follmer::{StatTarget, Statistic};
use locmart::functionals::quadratic_variation;
use locmart::stochexp::{phi, reciprocal_log, stoch_exp, stoch_log};
use locmart::stopping::{Dir, StoppingRule, Target};
use locmart::{CadlagPath, Direction, JumpEvent};
use proptest::prelude::*;

const H: f64 = 10.0;

fn jumps(min: f64) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.001f64..H, min..5.0), 0..25)
}

fn path(js: &[(f64, f64)], drift: f64) -> CadlagPath {
    let mut js = js.to_vec();
    js.sort_by(|a, b| a.0.total_cmp(&b.0));
    js.dedup_by(|a, b| a.0 == b.0);
    CadlagPath::builder(H).jumps(js.into_iter().map(|(time, size)| JumpEvent { time, size })).drift(0.0, H, drift).build().unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn phi_is_an_involution(x in -0.999f64..1e6) {
        let back = phi(phi(x).unwrap()).unwrap();
        prop_assert!(close(back, x, 1e-9), "{x} -> {back}");
    }

    #[test]
    fn exponential_is_the_jump_product(js in jumps(-0.99), mu in -1.0f64..1.0) {
        let x = path(&js, mu);
        let z = stoch_exp(&x).unwrap().exponential;
        for t in [0.0, 2.5, 7.0, H] {
            let prod: f64 = x.jumps().iter().filter(|j| j.time <= t).map(|j| 1.0 + j.size).product();
            let want = prod * (mu * t).exp();
            prop_assert!(close(z.value_at(t).unwrap(), want, 1e-10));
        }
    }

    #[test]
    fn logarithm_inverts_exponential(js in jumps(-0.99), mu in -1.0f64..1.0) {
        let x = path(&js, mu);
        let y = stoch_log(&stoch_exp(&x).unwrap().exponential).unwrap();
        for t in [1.0, 4.0, H] {
            prop_assert!(close(y.value_at(t).unwrap(), x.value_at(t).unwrap(), 1e-10));
        }
    }

    #[test]
    fn reciprocal_exponentials_multiply_to_one(js in jumps(-0.99)) {
        let m = path(&js, 0.0);
        let n = reciprocal_log(&m).unwrap();
        let (zm, zn) = (stoch_exp(&m).unwrap().exponential, stoch_exp(&n).unwrap().exponential);
        for t in [0.5, 5.0, H] {
            let (lm, ln) = (zm.log_abs_at(t).unwrap().1, zn.log_abs_at(t).unwrap().1);
            prop_assert!((lm + ln).abs() < 1e-10);
        }
    }

    #[test]
    fn quadratic_variation_is_monotone(js in jumps(-3.0)) {
        let q = quadratic_variation(&path(&js, 0.3));
        let mut last = 0.0;
        for i in 0..=40 {
            let v = q.value_at(H * i as f64 / 40.0).unwrap();
            prop_assert!(v >= last - 1e-12);
            last = v;
        }
        let direct: f64 = path(&js, 0.0).jumps().iter().map(|j| j.size * j.size).sum();
        prop_assert!(close(last, direct, 1e-12));
    }

    #[test]
    fn crossing_time_is_first_hit(js in jumps(-3.0), mu in -1.0f64..1.0, level in 0.1f64..4.0) {
        let x = path(&js, mu);
        if let Some(t) = x.first_crossing_dir(level, Direction::Above) {
            prop_assert!(x.value_at(t).unwrap() >= level - 1e-9);
            // nothing on a fine grid strictly before t reaches the level
            for i in 0..200 {
                let s = t * i as f64 / 200.0;
                if s < t {
                    prop_assert!(x.value_at(s).unwrap() < level + 1e-9);
                }
            }
        } else {
            for i in 0..=200 {
                prop_assert!(x.value_at(H * i as f64 / 200.0).unwrap() < level);
            }
        }
    }

    #[test]
    fn path_json_round_trips(js in jumps(-3.0), mu in -1.0f64..1.0) {
        let x = path(&js, mu);
        prop_assert_eq!(CadlagPath::from_json_str(&x.to_json()).unwrap(), x);
    }

    #[test]
    fn rules_and_statistics_print_and_parse(t in 0.0f64..100.0, level in -10.0f64..10.0, lo in -5.0f64..0.0) {
        let rules = [
            StoppingRule::Deterministic { t },
            StoppingRule::FirstCrossing { target: Target::X, level, direction: Dir::Above },
            StoppingRule::FirstCrossing { target: Target::Z, level: level.abs(), direction: Dir::Abs },
        ];
        for r in rules {
            prop_assert_eq!(r.to_string().parse::<StoppingRule>().unwrap(), r);
        }
        let stats = [
            Statistic::Const { value: level },
            Statistic::Indicator { target: StatTarget::Z, above: true, level },
            Statistic::Box { target: StatTarget::X, lo, hi: lo + 1.0 },
            Statistic::StaysBelow { target: StatTarget::X, level },
        ];
        for g in stats {
            prop_assert_eq!(g.to_string().parse::<Statistic>().unwrap(), g);
        }
    }
}
