//! Càdlàg sample paths: jumps, drift, an optional grid diffusion, and
//! absorption/explosion bookkeeping.

use crate::density::RateDensity;
use crate::error::{Error, Result};
use crate::numeric::Ext;
use crate::testfn::TestFunction;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub size: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftSegment {
    pub start: f64,
    pub end: f64,
    pub rate: f64,
}

/// scale · ∫_start^{min(t,end)} F(jump(s)) λ(s) ds
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityDrift {
    pub start: f64,
    pub end: f64,
    pub scale: f64,
    pub density: RateDensity,
    pub integrand: TestFunction,
}

impl DensityDrift {
    fn eval(&self, t: f64) -> f64 {
        let hi = t.min(self.end);
        if hi <= self.start {
            return 0.0;
        }
        match self.density.integral(&self.integrand, self.start, hi) {
            Ok(Ext::Finite(v)) => self.scale * v,
            _ => f64::NAN,
        }
    }
}

/// Increments of the continuous martingale part on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionGrid {
    pub start: f64,
    pub step: f64,
    pub increments: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PathForm {
    /// X_t = X_0 + Σ jumps + continuous part.
    #[default]
    Additive,
    /// Z_t = Z_{τ_k} exp(L_t − L_{τ_k}) between jumps, L the continuous part
    /// of the logarithm; used for stochastic exponentials.
    Exponential,
}

/// The continuous part: drift, density drift, and grid diffusion.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Continuous {
    pub drift: Vec<DriftSegment>,
    pub density: Vec<DensityDrift>,
    pub qv_rate: f64,
    pub diffusion_start: f64,
    pub grid: Option<DiffusionGrid>,
    grid_cum: Vec<f64>,
    pub stop: Option<f64>,
}

impl Continuous {
    pub fn new(drift: Vec<DriftSegment>, density: Vec<DensityDrift>, qv_rate: f64, diffusion_start: f64, grid: Option<DiffusionGrid>) -> Continuous {
        let mut c = Continuous { drift, density, qv_rate, diffusion_start, grid, grid_cum: Vec::new(), stop: None };
        c.rebuild();
        c
    }

    fn rebuild(&mut self) {
        self.grid_cum.clear();
        if let Some(g) = &self.grid {
            self.grid_cum.reserve(g.increments.len() + 1);
            let mut acc = 0.0;
            self.grid_cum.push(0.0);
            for d in &g.increments {
                acc += d;
                self.grid_cum.push(acc);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.drift.iter().all(|d| d.rate == 0.0) && self.density.is_empty() && self.qv_rate == 0.0 && self.grid.as_ref().is_none_or(|g| g.increments.iter().all(|&x| x == 0.0))
    }

    pub fn has_diffusion(&self) -> bool {
        self.qv_rate > 0.0 || self.grid.is_some()
    }

    fn clamp(&self, t: f64) -> f64 {
        match self.stop {
            Some(s) => t.min(s),
            None => t,
        }
    }

    pub fn grid_value(&self, t: f64) -> f64 {
        let Some(g) = &self.grid else { return 0.0 };
        let t = self.clamp(t);
        if t <= g.start || g.increments.is_empty() {
            return 0.0;
        }
        let x = (t - g.start) / g.step;
        let k = x.floor() as usize;
        if k >= g.increments.len() {
            return *self.grid_cum.last().unwrap();
        }
        let frac = x - k as f64;
        self.grid_cum[k] + frac * g.increments[k]
    }

    fn linear_value(&self, t: f64) -> f64 {
        let mut v = 0.0;
        for d in &self.drift {
            if t > d.start {
                v += d.rate * (t.min(d.end) - d.start);
            }
        }
        v
    }

    pub fn drift_value(&self, t: f64) -> f64 {
        let t = self.clamp(t);
        let mut v = self.linear_value(t);
        for d in &self.density {
            v += d.eval(t);
        }
        v
    }

    /// eval at nondecreasing times; density terms are integrated piece by piece.
    fn eval_sorted(&self, ts: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = ts.iter().map(|&t| self.linear_value(self.clamp(t)) + self.grid_value(t)).collect();
        for d in &self.density {
            let mut acc = 0.0;
            let mut last = d.start;
            for (i, &t) in ts.iter().enumerate() {
                let hi = self.clamp(t).min(d.end);
                if hi > last {
                    acc += d.density.integral_piece(&d.integrand, last, hi);
                    last = hi;
                }
                out[i] += d.scale * acc;
            }
        }
        out
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.drift_value(t) + self.grid_value(t)
    }

    /// [X^c, X^c]_t
    pub fn qv(&self, t: f64) -> f64 {
        let t = self.clamp(t);
        if t <= self.diffusion_start {
            0.0
        } else {
            self.qv_rate * (t - self.diffusion_start)
        }
    }

    /// Drop everything after `a`: drift and density end there, the grid and QV freeze.
    pub fn clipped(&self, a: f64) -> Continuous {
        let mut c = self.clone();
        for d in &mut c.drift {
            d.end = d.end.min(a);
        }
        c.drift.retain(|d| d.end > d.start);
        for d in &mut c.density {
            d.end = d.end.min(a);
        }
        c.density.retain(|d| d.end > d.start);
        c.stop = Some(self.stop.map_or(a, |s| s.min(a)));
        c
    }

    /// Only the continuous martingale part (grid and QV).
    pub fn martingale_part(&self) -> Continuous {
        let mut c = Continuous::new(Vec::new(), Vec::new(), self.qv_rate, self.diffusion_start, self.grid.clone());
        c.stop = self.stop;
        c
    }

    pub fn push_drift(&mut self, d: DriftSegment) {
        if d.rate != 0.0 && d.end > d.start {
            self.drift.push(d);
        }
    }

    pub fn push_density(&mut self, d: DensityDrift) {
        if d.scale != 0.0 && d.end > d.start {
            self.density.push(d);
        }
    }

    /// c·(continuous part); QV scales by c².
    pub fn scaled(&self, c: f64) -> Continuous {
        let drift = self.drift.iter().map(|d| DriftSegment { rate: d.rate * c, ..*d }).filter(|d| d.rate != 0.0).collect();
        let density = if c == 0.0 { Vec::new() } else { self.density.iter().map(|d| DensityDrift { scale: d.scale * c, ..d.clone() }).collect() };
        let grid = if c == 0.0 { None } else { self.grid.as_ref().map(|g| DiffusionGrid { increments: g.increments.iter().map(|x| x * c).collect(), ..g.clone() }) };
        let mut out = Continuous::new(drift, density, self.qv_rate * c * c, self.diffusion_start, grid);
        out.stop = self.stop;
        out
    }

    /// Append c·[X^c, X^c] as a drift segment on [diffusion_start, end].
    pub fn with_qv_drift(mut self, c: f64, end: f64) -> Continuous {
        if c != 0.0 && self.qv_rate > 0.0 {
            let e = self.stop.map_or(end, |s| s.min(end));
            if e > self.diffusion_start {
                self.drift.push(DriftSegment { start: self.diffusion_start, end: e, rate: c * self.qv_rate });
            }
        }
        self
    }

    fn breakpoints(&self, out: &mut Vec<f64>, horizon: f64) {
        for d in &self.drift {
            out.push(d.start);
            out.push(d.end);
        }
        for d in &self.density {
            out.push(d.start);
            out.push(d.end);
        }
        if let Some(g) = &self.grid {
            for k in 0..=g.increments.len() {
                let t = g.start + k as f64 * g.step;
                if t > horizon {
                    break;
                }
                out.push(t);
            }
        }
        if let Some(s) = self.stop {
            out.push(s);
        }
    }

    /// The grid diffusion moves on (a, b); only its knots are observed there.
    fn grid_active(&self, a: f64, b: f64) -> bool {
        let stop = self.stop.unwrap_or(f64::INFINITY);
        self.grid.as_ref().is_some_and(|g| b > g.start && a < g.start + g.increments.len() as f64 * g.step && a < stop)
    }

    fn density_active(&self, a: f64, b: f64) -> bool {
        let stop = self.stop.unwrap_or(f64::INFINITY);
        self.density.iter().any(|d| d.start < b && d.end > a && a < stop)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Knot {
    sign: f64,
    log_abs: f64,
}

/// An immutable càdlàg path on [0, horizon].
#[derive(Clone, Debug, PartialEq)]
pub struct CadlagPath {
    initial: f64,
    horizon: f64,
    jumps: Vec<JumpEvent>,
    cont: Continuous,
    absorption_time: Option<f64>,
    explosion_time: Option<f64>,
    form: PathForm,
    cum: Vec<f64>,
    knots: Vec<Knot>,
    factors: Vec<Knot>,
    numeric_zero_time: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Above,
    Below,
    Abs,
}

impl Direction {
    /// Levels that a path reaches exactly (lattice values) must not depend on
    /// which arithmetic produced the path, hence the few-ulp slack.
    fn hits(self, x: f64, level: f64) -> bool {
        let slack = 1e-13 * level.abs().max(1.0);
        match self {
            Direction::Above => x >= level - slack,
            Direction::Below => x <= level + slack,
            Direction::Abs => x.abs() >= level - slack,
        }
    }
}

fn validate_time(t: f64, what: &str) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidPath(format!("{what} must be finite and >= 0, got {t}")));
    }
    Ok(())
}

impl CadlagPath {
    fn validate_common(&self) -> Result<()> {
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            return Err(Error::InvalidPath(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !self.initial.is_finite() {
            return Err(Error::InvalidPath("initial value must be finite".into()));
        }
        let end = self.explosion_time.unwrap_or(f64::INFINITY);
        for (i, j) in self.jumps.iter().enumerate() {
            validate_time(j.time, "jump time")?;
            if !j.size.is_finite() {
                return Err(Error::InvalidPath(format!("jump size at t={} is not finite", j.time)));
            }
            if j.size == 0.0 && self.form == PathForm::Additive {
                return Err(Error::InvalidPath(format!("zero jump at t={}", j.time)));
            }
            if i > 0 && !(j.time > self.jumps[i - 1].time) {
                return Err(Error::InvalidPath("jump times must be strictly increasing".into()));
            }
            if j.time > self.horizon || j.time >= end {
                return Err(Error::InvalidPath(format!("jump at t={} beyond horizon or explosion", j.time)));
            }
            if let Some(a) = self.absorption_time {
                if j.time > a {
                    return Err(Error::InvalidPath(format!("jump at t={} after absorption at {a}", j.time)));
                }
            }
        }
        for d in &self.cont.drift {
            validate_time(d.start, "drift start")?;
            if !(d.end >= d.start) || !d.rate.is_finite() {
                return Err(Error::InvalidPath(format!("bad drift segment {d:?}")));
            }
            if let Some(a) = self.absorption_time {
                if d.end > a && d.rate != 0.0 {
                    return Err(Error::InvalidPath(format!("drift after absorption at {a}")));
                }
            }
        }
        for d in &self.cont.density {
            validate_time(d.start, "density drift start")?;
            if !(d.end >= d.start) || !d.scale.is_finite() {
                return Err(Error::InvalidPath("bad density drift".into()));
            }
            d.density.validate()?;
            if !d.eval(d.end.min(self.horizon)).is_finite() {
                return Err(Error::InvalidPath("density drift is not finite on the horizon".into()));
            }
        }
        if !(self.cont.qv_rate >= 0.0) || !self.cont.qv_rate.is_finite() {
            return Err(Error::InvalidPath("diffusion_qv_rate must be >= 0".into()));
        }
        validate_time(self.cont.diffusion_start, "diffusion start")?;
        if let Some(g) = &self.cont.grid {
            if !(g.step > 0.0) || !g.step.is_finite() || !g.start.is_finite() || g.increments.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidPath("bad diffusion grid".into()));
            }
        }
        if let Some(a) = self.absorption_time {
            validate_time(a, "absorption time")?;
        }
        if let Some(e) = self.explosion_time {
            validate_time(e, "explosion time")?;
        }
        Ok(())
    }

    fn finish_additive(mut self) -> Result<CadlagPath> {
        self.validate_common()?;
        let mut acc = 0.0;
        self.cum = self
            .jumps
            .iter()
            .map(|j| {
                acc += j.size;
                acc
            })
            .collect();
        Ok(self)
    }

    /// Exponential-form path from log-knots: knot k is the value right after
    /// jump k (knot 0 the initial value), factor k the multiplier 1+ΔX of jump k.
    pub(crate) fn exponential(
        horizon: f64,
        jump_times: Vec<f64>,
        factors: Vec<(f64, f64)>,
        cont: Continuous,
        absorption_time: Option<f64>,
    ) -> Result<CadlagPath> {
        let mut p = CadlagPath {
            initial: 1.0,
            horizon,
            jumps: Vec::with_capacity(jump_times.len()),
            cont,
            absorption_time,
            explosion_time: None,
            form: PathForm::Exponential,
            cum: Vec::new(),
            knots: Vec::with_capacity(jump_times.len() + 1),
            factors: factors.iter().map(|&(s, l)| Knot { sign: s, log_abs: l }).collect(),
            numeric_zero_time: None,
        };
        if let Some(a) = absorption_time {
            p.cont = p.cont.clipped(a);
        }
        let mut k = Knot { sign: 1.0, log_abs: 0.0 };
        p.knots.push(k);
        let mut prev_t = 0.0;
        for (i, &t) in jump_times.iter().enumerate() {
            let pre_log = k.log_abs + p.log_cont(t) - p.log_cont(prev_t);
            let pre = k.sign * exp_flush(pre_log);
            let f = p.factors[i];
            k = Knot { sign: k.sign * f.sign, log_abs: pre_log + f.log_abs };
            let post = k.sign * exp_flush(k.log_abs);
            p.jumps.push(JumpEvent { time: t, size: post - pre });
            if p.numeric_zero_time.is_none() && pre_log < -745.0 && pre_log.is_finite() {
                p.numeric_zero_time = Some(t);
            }
            p.knots.push(k);
            prev_t = t;
        }
        p.validate_common()?;
        if p.numeric_zero_time.is_none() && absorption_time.is_none() {
            let end = p.log_abs_at(horizon).map(|(_, l)| l).unwrap_or(0.0);
            if end < -745.0 {
                p.numeric_zero_time = Some(horizon);
            }
        }
        Ok(p)
    }

    pub fn builder(horizon: f64) -> PathBuilder {
        PathBuilder::new(horizon)
    }

    pub fn constant(value: f64, horizon: f64) -> Result<CadlagPath> {
        PathBuilder::new(horizon).initial(value).build()
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn jumps(&self) -> &[JumpEvent] {
        &self.jumps
    }
    pub fn continuous(&self) -> &Continuous {
        &self.cont
    }
    pub fn diffusion_qv_rate(&self) -> f64 {
        self.cont.qv_rate
    }
    pub fn absorption_time(&self) -> Option<f64> {
        self.absorption_time
    }
    pub fn explosion_time(&self) -> Option<f64> {
        self.explosion_time
    }
    pub fn form(&self) -> PathForm {
        self.form
    }
    /// First knot or horizon where |Z| fell below e^{−745} without absorption.
    pub fn numeric_zero_time(&self) -> Option<f64> {
        self.numeric_zero_time
    }
    pub fn is_pure_jump(&self) -> bool {
        self.cont.is_zero()
    }

    /// Signed log-multipliers (sign, log|1+ΔX|) of an exponential-form path.
    pub fn jump_factors(&self) -> Vec<(f64, f64)> {
        self.factors.iter().map(|k| (k.sign, k.log_abs)).collect()
    }

    pub fn with_explosion(mut self, t: f64) -> Result<CadlagPath> {
        validate_time(t, "explosion time")?;
        self.jumps.retain(|j| j.time < t);
        self.cum.truncate(self.jumps.len());
        self.knots.truncate(self.jumps.len() + 1);
        self.factors.truncate(self.jumps.len());
        self.explosion_time = Some(t);
        Ok(self)
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<CadlagPath> {
        if horizon > self.horizon {
            return Err(Error::QueryBeyondHorizon { t: horizon, horizon: self.horizon });
        }
        let mut p = self.clone();
        let keep = p.jumps.partition_point(|j| j.time <= horizon);
        p.jumps.truncate(keep);
        p.cum.truncate(keep);
        if p.form == PathForm::Exponential {
            p.knots.truncate(keep + 1);
            p.factors.truncate(keep);
        }
        p.horizon = horizon;
        Ok(p)
    }

    fn check(&self, t: f64) -> Result<()> {
        if let Some(e) = self.explosion_time {
            if t >= e {
                return Err(Error::QueryAfterExplosion { t, explosion: e });
            }
        }
        if !(t <= self.horizon * (1.0 + 1e-15)) {
            return Err(Error::QueryBeyondHorizon { t, horizon: self.horizon });
        }
        if t < 0.0 || t.is_nan() {
            return Err(Error::InvalidPath(format!("negative query time {t}")));
        }
        Ok(())
    }

    /// Continuous part of log Z for exponential form: L_t = C_t − ½[X^c]_t.
    fn log_cont(&self, t: f64) -> f64 {
        self.cont.eval(t) - 0.5 * self.cont.qv(t)
    }

    fn value_with(&self, k: usize, t: f64) -> f64 {
        match self.form {
            PathForm::Additive => self.initial + if k == 0 { 0.0 } else { self.cum[k - 1] } + self.cont.eval(t),
            PathForm::Exponential => {
                let (s, l) = self.log_with(k, t);
                s * exp_flush(l)
            }
        }
    }

    fn log_with(&self, k: usize, t: f64) -> (f64, f64) {
        let kn = self.knots[k];
        if kn.log_abs == f64::NEG_INFINITY {
            return (0.0, f64::NEG_INFINITY);
        }
        let t0 = if k == 0 { 0.0 } else { self.jumps[k - 1].time };
        (kn.sign, kn.log_abs + self.log_cont(t) - self.log_cont(t0))
    }

    pub fn value_at(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        let k = self.jumps.partition_point(|j| j.time <= t);
        Ok(self.value_with(k, t))
    }

    pub fn left_limit(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        if t == 0.0 {
            return Ok(self.initial);
        }
        let k = self.jumps.partition_point(|j| j.time < t);
        Ok(self.value_with(k, t))
    }

    /// (sign, log|Z_t|) for exponential-form paths.
    pub fn log_abs_at(&self, t: f64) -> Result<(f64, f64)> {
        self.check(t)?;
        if self.form != PathForm::Exponential {
            let v = self.value_at(t)?;
            return Ok((v.signum(), v.abs().ln()));
        }
        let k = self.jumps.partition_point(|j| j.time <= t);
        Ok(self.log_with(k, t))
    }

    pub fn log_abs_left(&self, t: f64) -> Result<(f64, f64)> {
        self.check(t)?;
        if self.form != PathForm::Exponential {
            let v = self.left_limit(t)?;
            return Ok((v.signum(), v.abs().ln()));
        }
        let k = if t == 0.0 { 0 } else { self.jumps.partition_point(|j| j.time < t) };
        Ok(self.log_with(k, t))
    }

    fn end_time(&self) -> f64 {
        match self.explosion_time {
            Some(e) if e <= self.horizon => e,
            _ => self.horizon,
        }
    }

    /// Sorted, deduplicated breakpoints in [0, end].
    pub fn breakpoints(&self) -> Vec<f64> {
        let end = self.end_time();
        let mut v = vec![0.0, end];
        v.extend(self.jumps.iter().map(|j| j.time));
        self.cont.breakpoints(&mut v, end);
        if let Some(a) = self.absorption_time {
            v.push(a);
        }
        v.retain(|t| t.is_finite() && *t >= 0.0 && *t <= end);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Event times: 0, jump times, horizon.
    pub fn event_times(&self) -> Vec<f64> {
        let mut v = vec![0.0];
        v.extend(self.jumps.iter().map(|j| j.time));
        if self.explosion_time.is_none_or(|e| e > self.horizon) {
            v.push(self.horizon);
        }
        v.dedup();
        v
    }

    /// inf{t ≤ T : X_t meets the level in the given direction}.
    pub fn first_crossing_dir(&self, level: f64, dir: Direction) -> Option<f64> {
        let bps = self.breakpoints();
        let end = self.end_time();
        let open_end = self.explosion_time.is_some_and(|e| e <= self.horizon);
        for w in bps.windows(2) {
            let (a, b) = (w[0], w[1]);
            let va = self.value_at(a).ok()?;
            if dir.hits(va, level) {
                return Some(a);
            }
            if b <= a {
                continue;
            }
            // between knots the interpolant depends on the next grid value, so a
            // crossing there would not be a stopping time; the next window sees b
            if self.cont.grid_active(a, b) {
                continue;
            }
            let k = self.jumps.partition_point(|j| j.time <= a);
            let at = |t: f64| self.value_with(k, t);
            if !self.cont.density_active(a, b) {
                let vb = at(b);
                if let Some(t) = self.solve_monotone(a, b, va, vb, level, dir) {
                    return Some(t);
                }
            } else {
                let n = (4096 / bps.len().max(1)).clamp(4, 64);
                let mut prev = a;
                for i in 1..=n {
                    let t = a + (b - a) * i as f64 / n as f64;
                    if dir.hits(at(t), level) {
                        let hit = crate::numeric::bisect(|s| if dir.hits(at(s), level) { 1.0 } else { -1.0 }, prev, t, 100);
                        return Some(hit);
                    }
                    prev = t;
                }
            }
        }
        if !open_end {
            if let Ok(v) = self.value_at(end) {
                if dir.hits(v, level) {
                    return Some(end);
                }
            }
        }
        None
    }

    fn solve_monotone(&self, a: f64, b: f64, va: f64, vb: f64, level: f64, dir: Direction) -> Option<f64> {
        if !dir.hits(vb, level) {
            return None;
        }
        let targets: Vec<f64> = match dir {
            Direction::Above | Direction::Below => vec![level],
            Direction::Abs => vec![level, -level],
        };
        let mut best = b;
        for l in targets {
            let t = match self.form {
                PathForm::Additive => {
                    if vb == va {
                        continue;
                    }
                    a + (l - va) * (b - a) / (vb - va)
                }
                PathForm::Exponential => {
                    if va == 0.0 || vb == 0.0 || va.signum() != l.signum() || va == vb {
                        continue;
                    }
                    let mu = (vb / va).ln() / (b - a);
                    a + (l / va).ln() / mu
                }
            };
            if t > a && t <= b {
                best = best.min(t);
            }
        }
        Some(best)
    }

    pub fn first_crossing(&self, level: f64) -> Option<f64> {
        self.first_crossing_dir(level, Direction::Abs)
    }

    /// (inf, sup) of X over [t0, t1].
    pub fn range_over(&self, t0: f64, t1: f64) -> Result<(f64, f64)> {
        self.check(t0)?;
        let end = self.end_time();
        if t1 > end || self.explosion_time.is_some_and(|e| t1 >= e) {
            if let Some(e) = self.explosion_time {
                if t1 >= e {
                    return Err(Error::QueryAfterExplosion { t: t1, explosion: e });
                }
            }
            return Err(Error::QueryBeyondHorizon { t: t1, horizon: self.horizon });
        }
        let mut pts: Vec<f64> = self.breakpoints().into_iter().filter(|&t| t > t0 && t <= t1).collect();
        pts.push(t1);
        pts.dedup();
        // (time, jumps included) samples in time order
        let mut samples = vec![(t0, self.jumps.partition_point(|j| j.time <= t0))];
        let per = (4096 / pts.len().max(1)).clamp(1, 31);
        let mut prev = t0;
        for &t in &pts {
            if t <= prev {
                continue;
            }
            let k = self.jumps.partition_point(|j| j.time <= prev);
            if self.cont.density_active(prev, t) {
                for i in 1..=per {
                    samples.push((prev + (t - prev) * i as f64 / (per + 1) as f64, k));
                }
            }
            samples.push((t, k));
            samples.push((t, self.jumps.partition_point(|j| j.time <= t)));
            prev = t;
        }
        let vals: Vec<f64> = match self.form {
            PathForm::Additive => {
                let ts: Vec<f64> = samples.iter().map(|s| s.0).collect();
                let cont = self.cont.eval_sorted(&ts);
                samples.iter().zip(cont).map(|(&(_, k), c)| self.initial + if k == 0 { 0.0 } else { self.cum[k - 1] } + c).collect()
            }
            PathForm::Exponential => samples.iter().map(|&(t, k)| self.value_with(k, t)).collect(),
        };
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((lo, hi))
    }

    pub fn tail_oscillation(&self, window_start: f64) -> Result<f64> {
        if let Some(e) = self.explosion_time {
            if e <= self.horizon {
                return Err(Error::QueryAfterExplosion { t: self.horizon, explosion: e });
            }
        }
        let (lo, hi) = self.range_over(window_start, self.horizon)?;
        Ok(hi - lo)
    }

    pub fn sup_abs_until(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.range_over(0.0, t)?;
        Ok(lo.abs().max(hi.abs()))
    }

    /// Σ|ΔX| + ∫|drift| + grid variation up to t.
    pub fn total_variation(&self, t: f64) -> f64 {
        let jumps: f64 = self.jumps.iter().take_while(|j| j.time <= t).map(|j| j.size.abs()).sum();
        let mut drift = 0.0;
        for d in &self.cont.drift {
            if t > d.start {
                drift += d.rate.abs() * (t.min(d.end) - d.start);
            }
        }
        for d in &self.cont.density {
            let bp = 64;
            let hi = t.min(d.end);
            let mut prev = d.eval(d.start);
            for i in 1..=bp {
                let s = d.start + (hi - d.start) * i as f64 / bp as f64;
                let v = d.eval(s);
                drift += (v - prev).abs();
                prev = v;
            }
        }
        let grid = self.cont.grid.as_ref().map_or(0.0, |g| {
            g.increments.iter().enumerate().take_while(|(k, _)| g.start + *k as f64 * g.step < t).map(|(_, x)| x.abs()).sum()
        });
        jumps + drift + grid
    }
}

fn exp_flush(l: f64) -> f64 {
    if l < -745.0 {
        0.0
    } else {
        l.exp()
    }
}

/// Assembles additive paths; equal jump times are merged and zero jumps dropped.
#[derive(Clone, Debug)]
pub struct PathBuilder {
    horizon: f64,
    initial: f64,
    jumps: Vec<JumpEvent>,
    drift: Vec<DriftSegment>,
    density: Vec<DensityDrift>,
    qv_rate: f64,
    diffusion_start: f64,
    grid: Option<DiffusionGrid>,
    absorption: Option<f64>,
    explosion: Option<f64>,
    cont: Option<Continuous>,
}

impl PathBuilder {
    pub fn new(horizon: f64) -> PathBuilder {
        PathBuilder {
            horizon,
            initial: 0.0,
            jumps: Vec::new(),
            drift: Vec::new(),
            density: Vec::new(),
            qv_rate: 0.0,
            diffusion_start: 0.0,
            grid: None,
            absorption: None,
            explosion: None,
            cont: None,
        }
    }
    pub fn initial(mut self, x: f64) -> Self {
        self.initial = x;
        self
    }
    pub fn jump(mut self, time: f64, size: f64) -> Self {
        self.jumps.push(JumpEvent { time, size });
        self
    }
    pub fn jumps<I: IntoIterator<Item = JumpEvent>>(mut self, it: I) -> Self {
        self.jumps.extend(it);
        self
    }
    pub fn drift(mut self, start: f64, end: f64, rate: f64) -> Self {
        self.drift.push(DriftSegment { start, end, rate });
        self
    }
    pub fn density_drift(mut self, d: DensityDrift) -> Self {
        self.density.push(d);
        self
    }
    pub fn diffusion(mut self, qv_rate: f64, start: f64) -> Self {
        self.qv_rate = qv_rate;
        self.diffusion_start = start;
        self
    }
    pub fn grid(mut self, g: DiffusionGrid) -> Self {
        self.grid = Some(g);
        self
    }
    pub fn absorption(mut self, t: Option<f64>) -> Self {
        self.absorption = t;
        self
    }
    pub fn explosion(mut self, t: Option<f64>) -> Self {
        self.explosion = t;
        self
    }
    /// Use a prepared continuous part; drift/density/diffusion setters are then ignored.
    pub fn continuous(mut self, c: Continuous) -> Self {
        self.cont = Some(c);
        self
    }

    pub fn build(self) -> Result<CadlagPath> {
        let mut jumps = self.jumps;
        if jumps.iter().any(|j| !j.time.is_finite() || !j.size.is_finite()) {
            return Err(Error::InvalidPath("non-finite jump".into()));
        }
        jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut merged: Vec<JumpEvent> = Vec::with_capacity(jumps.len());
        for j in jumps {
            match merged.last_mut() {
                Some(last) if last.time == j.time => last.size += j.size,
                _ => merged.push(j),
            }
        }
        merged.retain(|j| j.size != 0.0);
        let mut cont = match self.cont {
            Some(c) => c,
            None => Continuous::new(self.drift, self.density, self.qv_rate, self.diffusion_start, self.grid),
        };
        cont.stop = self.absorption;
        CadlagPath {
            initial: self.initial,
            horizon: self.horizon,
            jumps: merged,
            cont,
            absorption_time: self.absorption,
            explosion_time: self.explosion,
            form: PathForm::Additive,
            cum: Vec::new(),
            knots: Vec::new(),
            factors: Vec::new(),
            numeric_zero_time: None,
        }
        .finish_additive()
    }
}

/// JSON interchange record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathRecord {
    pub initial: f64,
    pub horizon: f64,
    #[serde(default)]
    pub jumps: Vec<[f64; 2]>,
    #[serde(default)]
    pub drift: Vec<[f64; 3]>,
    #[serde(default)]
    pub diffusion_qv_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explosion_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absorption_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drift_density: Vec<DensityDrift>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub diffusion_start: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<DiffusionGrid>,
    #[serde(default, skip_serializing_if = "is_additive")]
    pub form: PathForm,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}
fn is_additive(f: &PathForm) -> bool {
    *f == PathForm::Additive
}

impl From<&CadlagPath> for PathRecord {
    fn from(p: &CadlagPath) -> PathRecord {
        PathRecord {
            initial: p.initial,
            horizon: p.horizon,
            jumps: p.jumps.iter().map(|j| [j.time, j.size]).collect(),
            drift: p.cont.drift.iter().map(|d| [d.start, d.end, d.rate]).collect(),
            diffusion_qv_rate: p.cont.qv_rate,
            explosion_time: p.explosion_time,
            absorption_time: p.absorption_time,
            drift_density: p.cont.density.clone(),
            diffusion_start: p.cont.diffusion_start,
            diffusion: p.cont.grid.clone(),
            form: p.form,
        }
    }
}

impl TryFrom<PathRecord> for CadlagPath {
    type Error = Error;
    fn try_from(r: PathRecord) -> Result<CadlagPath> {
        let cont = Continuous::new(
            r.drift.iter().map(|d| DriftSegment { start: d[0], end: d[1], rate: d[2] }).collect(),
            r.drift_density,
            r.diffusion_qv_rate,
            r.diffusion_start,
            r.diffusion,
        );
        match r.form {
            PathForm::Additive => {
                for w in r.jumps.windows(2) {
                    if !(w[1][0] > w[0][0]) {
                        return Err(Error::InvalidPath("jump times must be strictly increasing".into()));
                    }
                }
                if r.jumps.iter().any(|j| j[1] == 0.0) {
                    return Err(Error::InvalidPath("zero jump".into()));
                }
                PathBuilder::new(r.horizon)
                    .initial(r.initial)
                    .jumps(r.jumps.iter().map(|j| JumpEvent { time: j[0], size: j[1] }))
                    .continuous(cont)
                    .absorption(r.absorption_time)
                    .explosion(r.explosion_time)
                    .build()
            }
            PathForm::Exponential => {
                if r.initial != 1.0 {
                    return Err(Error::InvalidPath("exponential-form paths start at 1".into()));
                }
                // recover multipliers from absolute jump sizes
                let probe = CadlagPath::exponential(r.horizon, Vec::new(), Vec::new(), cont.clone(), None)?;
                let mut factors = Vec::with_capacity(r.jumps.len());
                let mut knot = (1.0f64, 0.0f64);
                let mut prev = 0.0;
                let mut absorbed = None;
                for w in r.jumps.windows(2) {
                    if !(w[1][0] > w[0][0]) {
                        return Err(Error::InvalidPath("jump times must be strictly increasing".into()));
                    }
                }
                for j in &r.jumps {
                    validate_time(j[0], "jump time")?;
                    if absorbed.is_some() {
                        return Err(Error::RevivesAfterZero { time: j[0] });
                    }
                    let pre_log = knot.1 + probe.log_cont(j[0]) - probe.log_cont(prev);
                    let pre = knot.0 * exp_flush(pre_log);
                    if pre == 0.0 {
                        return Err(Error::InvalidPath(format!("cannot recover jump factor at t={} from a zero value", j[0])));
                    }
                    let ratio = (pre + j[1]) / pre;
                    if ratio.abs() < 1e-12 {
                        factors.push((1.0, f64::NEG_INFINITY));
                        absorbed = Some(j[0]);
                    } else {
                        factors.push((ratio.signum(), ratio.abs().ln()));
                    }
                    knot = (knot.0 * ratio.signum(), pre_log + ratio.abs().ln());
                    prev = j[0];
                }
                let times = r.jumps.iter().map(|j| j[0]).collect();
                let absorption = r.absorption_time.or(absorbed);
                let p = CadlagPath::exponential(r.horizon, times, factors, cont, absorption)?;
                match r.explosion_time {
                    Some(e) => p.with_explosion(e),
                    None => Ok(p),
                }
            }
        }
    }
}

impl CadlagPath {
    pub fn to_record(&self) -> PathRecord {
        PathRecord::from(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("path records serialize")
    }

    pub fn from_json_str(s: &str) -> Result<CadlagPath> {
        let r: PathRecord = serde_json::from_str(s)?;
        CadlagPath::try_from(r)
    }
}

/// Read newline-delimited path records; blank lines are skipped.
pub fn read_ndjson(s: &str) -> Result<Vec<CadlagPath>> {
    s.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| CadlagPath::from_json_str(l).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(jumps: &[(f64, f64)]) -> CadlagPath {
        let mut b = CadlagPath::builder(10.0);
        for &(t, x) in jumps {
            b = b.jump(t, x);
        }
        b.build().unwrap()
    }

    #[test]
    fn values_and_left_limits() {
        let x = p(&[(1.0, 1.0)]);
        assert_eq!(x.value_at(0.5).unwrap(), 0.0);
        assert_eq!(x.value_at(1.0).unwrap(), 1.0);
        assert_eq!(x.left_limit(1.0).unwrap(), 0.0);
        let d = CadlagPath::builder(2.0).initial(2.0).drift(0.0, 2.0, -1.0).build().unwrap();
        assert_eq!(d.value_at(2.0).unwrap(), 0.0);
        let y = p(&[(1.0, 1.0), (2.0, -0.5)]);
        assert_eq!(y.left_limit(2.0).unwrap(), 1.0);
        assert_eq!(y.left_limit(0.0).unwrap(), 0.0);
        assert!(matches!(y.value_at(11.0), Err(Error::QueryBeyondHorizon { .. })));
        let e = y.clone().with_explosion(5.0).unwrap();
        assert!(matches!(e.value_at(5.0), Err(Error::QueryAfterExplosion { .. })));
    }

    #[test]
    fn crossings() {
        assert_eq!(p(&[(2.0, 3.0)]).first_crossing(2.0), Some(2.0));
        assert_eq!(p(&[]).first_crossing(1.0), None);
        let d = CadlagPath::builder(5.0).drift(0.0, 5.0, -1.0).build().unwrap();
        let t = d.first_crossing(3.0).unwrap();
        assert!((t - 3.0).abs() < 1e-12);
    }

    #[test]
    fn oscillation() {
        assert_eq!(p(&[]).tail_oscillation(0.0).unwrap(), 0.0);
        assert_eq!(p(&[(1.0, 1.0), (2.0, -1.0)]).tail_oscillation(0.5).unwrap(), 1.0);
        assert_eq!(p(&[(1.0, 1.0)]).tail_oscillation(1.5).unwrap(), 0.0);
    }

    #[test]
    fn builder_rejects_bad_input() {
        assert!(CadlagPath::builder(1.0).jump(2.0, 1.0).build().is_err());
        assert!(CadlagPath::builder(0.0).build().is_err());
        assert!(CadlagPath::builder(1.0).diffusion(-1.0, 0.0).build().is_err());
        assert!(CadlagPath::builder(3.0).jump(2.0, 1.0).absorption(Some(1.0)).build().is_err());
    }

    #[test]
    fn json_round_trip() {
        let x = CadlagPath::builder(4.0).initial(0.5).jump(1.0, 2.0).drift(0.0, 3.0, 0.25).diffusion(1.0, 0.0).build().unwrap();
        let back = CadlagPath::from_json_str(&x.to_json()).unwrap();
        assert_eq!(back, x);
        assert!(CadlagPath::from_json_str(r#"{"initial":0,"horizon":1,"jumps":[[0.5,0]]}"#).is_err());
        assert!(CadlagPath::from_json_str(r#"{"initial":0,"horizon":1,"bogus":1}"#).is_err());
    }

    #[test]
    fn grid_interpolation() {
        let g = DiffusionGrid { start: 0.0, step: 0.5, increments: vec![1.0, -2.0] };
        let x = CadlagPath::builder(1.0).grid(g).diffusion(1.0, 0.0).build().unwrap();
        assert_eq!(x.value_at(0.25).unwrap(), 0.5);
        assert_eq!(x.value_at(0.75).unwrap(), 0.0);
        assert_eq!(x.value_at(1.0).unwrap(), -1.0);
        // crossings of the grid part are read at knots only
        assert_eq!(x.first_crossing_dir(-0.5, Direction::Below), Some(1.0));
        assert_eq!(x.first_crossing_dir(0.9, Direction::Above), Some(0.5));
    }
}
