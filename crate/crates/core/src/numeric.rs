//! Quadrature, extended reals and small statistics helpers.

use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;

/// A real number or a signed infinity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ext {
    Finite(f64),
    PosInfinite,
    NegInfinite,
}

impl Ext {
    pub fn is_finite(self) -> bool {
        matches!(self, Ext::Finite(_))
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Ext::Finite(v) => v,
            Ext::PosInfinite => f64::INFINITY,
            Ext::NegInfinite => f64::NEG_INFINITY,
        }
    }

    pub fn from_f64(v: f64) -> Ext {
        if v == f64::INFINITY {
            Ext::PosInfinite
        } else if v == f64::NEG_INFINITY {
            Ext::NegInfinite
        } else {
            Ext::Finite(v)
        }
    }

    pub fn scale(self, c: f64) -> Ext {
        if c == 0.0 {
            return Ext::Finite(0.0);
        }
        match self {
            Ext::Finite(v) => Ext::Finite(c * v),
            Ext::PosInfinite if c > 0.0 => Ext::PosInfinite,
            Ext::PosInfinite => Ext::NegInfinite,
            Ext::NegInfinite if c > 0.0 => Ext::NegInfinite,
            Ext::NegInfinite => Ext::PosInfinite,
        }
    }

    /// Sum; `None` for ∞ − ∞.
    pub fn add(self, other: Ext) -> Option<Ext> {
        match (self, other) {
            (Ext::Finite(a), Ext::Finite(b)) => Some(Ext::Finite(a + b)),
            (Ext::PosInfinite, Ext::NegInfinite) | (Ext::NegInfinite, Ext::PosInfinite) => None,
            (Ext::Finite(_), x) | (x, Ext::Finite(_)) => Some(x),
            (x, _) => Some(x),
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

/// Globally adaptive Gauss–Kronrod (7/15) on a finite interval.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Quad {
    if a == b {
        return Quad { value: 0.0, error: 0.0 };
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, val: v, err: e });
    let mut total = v;
    let mut total_err = e;
    let mut iters = 0;
    while total_err > abs_tol.max(rel_tol * total.abs()) && iters < 4000 {
        let Some(p) = heap.pop() else { break };
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            heap.push(p);
            break;
        }
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        total += v1 + v2 - p.val;
        total_err += e1 + e2 - p.err;
        heap.push(Piece { a: p.a, b: m, val: v1, err: e1 });
        heap.push(Piece { a: m, b: p.b, val: v2, err: e2 });
        iters += 1;
    }
    // re-sum to shed accumulated cancellation in the running totals
    let mut pieces: Vec<Piece> = heap.into_vec();
    pieces.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = kahan(pieces.iter().map(|p| p.val));
    let error = pieces.iter().map(|p| p.err).sum();
    Quad { value, error }
}

/// ∫_a^∞ f via s = a' + e^w − 1 chunks in w; stops when a chunk is negligible.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, abs_tol: f64, rel_tol: f64) -> Quad {
    let w0 = (1.0 + a.max(0.0)).ln();
    let shift = a - a.max(0.0);
    let mut g = |w: f64| {
        let ew = w.exp();
        let s = ew - 1.0 + shift;
        let v = f(s);
        if v == 0.0 {
            0.0
        } else {
            v * ew
        }
    };
    let mut total = 0.0;
    let mut err = 0.0;
    let mut w = w0;
    let mut quiet = 0;
    while w < 700.0 {
        let q = integrate(&mut g, w, w + 2.0, abs_tol * 0.01, rel_tol);
        total += q.value;
        err += q.error;
        w += 2.0;
        if q.value.abs() <= abs_tol * 0.01 + rel_tol * 1e-3 * total.abs() {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Quad { value: total, error: err }
}

pub fn kahan<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for x in it {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Root of a continuous function with a sign change on [a, b].
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let mut fa = f(a);
    for _ in 0..iters {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if (fm <= 0.0) == (fa <= 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    b
}

pub fn digamma(x: f64) -> f64 {
    statrs::function::gamma::digamma(x)
}

/// Σ_{n=1}^m (−1)^n / n = H_{⌊m/2⌋} − H_m.
pub fn alternating_harmonic(m: u64) -> f64 {
    digamma((m / 2) as f64 + 1.0) - digamma(m as f64 + 1.0)
}

/// Sample mean and its normal-approximation standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = kahan(xs.iter().copied()) / n as f64;
    if n == 1 {
        return (m, 0.0);
    }
    let v = kahan(xs.iter().map(|x| (x - m) * (x - m))) / (n - 1) as f64;
    (m, (v / n as f64).sqrt())
}

/// Bootstrap standard error of the mean, resampling with a seeded generator.
pub fn bootstrap_se(xs: &[f64], resamples: usize, seed: u64) -> f64 {
    use rand::Rng;
    let n = xs.len();
    if n < 2 || resamples < 2 {
        return 0.0;
    }
    let mut rng = crate::rng::stream(seed, crate::rng::BOOTSTRAP_STREAM);
    let means: Vec<f64> = (0..resamples)
        .map(|_| {
            let s: f64 = (0..n).map(|_| xs[rng.random_range(0..n)]).sum();
            s / n as f64
        })
        .collect();
    mean_se(&means).1 * (resamples as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_kronrod_polynomial_and_log() {
        let q = integrate(|x| x * x * x, 0.0, 2.0, 1e-14, 1e-14);
        assert!((q.value - 4.0).abs() < 1e-13);
        let q = integrate(|x: f64| x.ln(), 1e-300, 1.0, 1e-12, 1e-12);
        assert!((q.value + 1.0).abs() < 1e-9, "{}", q.value);
    }

    #[test]
    fn half_line_power() {
        let q = integrate_to_infinity(|s| (1.0 + s).powi(-2), 0.0, 1e-13, 1e-13);
        assert!((q.value - 1.0).abs() < 1e-11, "{}", q.value);
        let q = integrate_to_infinity(|s| (-s).exp(), 0.0, 1e-13, 1e-13);
        assert!((q.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn alternating_harmonic_small() {
        assert!((alternating_harmonic(1) + 1.0).abs() < 1e-14);
        assert!((alternating_harmonic(2) + 0.5).abs() < 1e-14);
        assert!((alternating_harmonic(3) - (-1.0 + 0.5 - 1.0 / 3.0)).abs() < 1e-14);
        let direct: f64 = (1..=1000).map(|n| if n % 2 == 0 { 1.0 / n as f64 } else { -1.0 / n as f64 }).sum();
        assert!((alternating_harmonic(1000) - direct).abs() < 1e-13);
    }

    #[test]
    fn ext_arithmetic() {
        assert_eq!(Ext::PosInfinite.scale(-2.0), Ext::NegInfinite);
        assert_eq!(Ext::PosInfinite.add(Ext::NegInfinite), None);
        assert_eq!(Ext::Finite(1.0).add(Ext::Finite(2.0)), Some(Ext::Finite(3.0)));
    }
}
