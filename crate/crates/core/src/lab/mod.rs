//! Experiment harness: configs, ensemble classification, reports and their
//! JSON/CSV artifacts.

pub mod events;
pub mod flags;
pub mod identities;
pub mod recipes;

pub use events::{confusion, equality_from_summaries, event_equality_test, ConfusionMatrix, EqualityReport, EQUALITY_IDS};
pub use flags::{classify_events, classify_path, EventFlags, PathSummary, Tolerances};
pub use identities::{identity_suite, random_battery, IdentitySuite};
pub use recipes::{battery, reproduce, BatteryReport, Overrides};

use crate::criteria::{evaluate_condition, CriterionSpec, CriterionVerdict};
use crate::error::{Error, Result};
use crate::follmer::{duality_check, tilt_model, ui_probe, DualityResult, Statistic, UiProbe, DEFAULT_EXPLOSION_LEVEL};
use crate::functionals::quadratic_variation;
use crate::models::{analytic_oracle, ensemble_map, preset, preset_info, EventOracle, ModelSpec};
use crate::numeric::mean_se;
use crate::stopping::{StoppingFamily, StoppingRule};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

fn cfg_err(field: &str, message: impl Into<String>) -> Error {
    Error::ConfigError { field: field.into(), message: message.into() }
}

fn default_n_paths() -> u64 {
    1000
}

fn default_rules() -> String {
    "default".into()
}

fn default_bins() -> usize {
    40
}

fn default_qv_points() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    /// `default`, `integers` or a comma-separated rule list.
    #[serde(default = "default_rules")]
    pub rules: String,
    #[serde(default)]
    pub criteria: Vec<CriterionSpec>,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig { rules: default_rules(), criteria: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    /// Equality ids to test; all of them when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equalities: Option<Vec<String>>,
    #[serde(default)]
    pub identities: bool,
    #[serde(default)]
    pub duality: bool,
    #[serde(default)]
    pub ui_probe_horizons: Vec<f64>,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    #[serde(default = "default_qv_points")]
    pub qv_points: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig { equalities: None, identities: false, duality: false, ui_probe_horizons: Vec::new(), histogram_bins: default_bins(), qv_points: default_qv_points() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default = "default_n_paths")]
    pub n_paths: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub family: FamilyConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

impl ExperimentConfig {
    pub fn for_preset(id: &str) -> ExperimentConfig {
        ExperimentConfig {
            model: None,
            preset: Some(id.into()),
            n_paths: default_n_paths(),
            horizon: None,
            seed: 0,
            tolerances: Tolerances::default(),
            family: FamilyConfig::default(),
            report: ReportConfig::default(),
        }
    }

    pub fn for_model(model: ModelSpec) -> ExperimentConfig {
        ExperimentConfig { model: Some(model), preset: None, ..ExperimentConfig::for_preset("") }
    }

    pub fn from_json_str(s: &str) -> Result<ExperimentConfig> {
        serde_json::from_str(s).map_err(|e| cfg_err("config", e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validates every field and returns the model the experiment runs on.
    pub fn resolve(&self) -> Result<ModelSpec> {
        if self.n_paths == 0 {
            return Err(cfg_err("n_paths", "must be positive"));
        }
        self.tolerances.validate()?;
        if let Some(h) = self.horizon {
            if !(h.is_finite() && h > 0.0) {
                return Err(cfg_err("horizon", "must be positive and finite"));
            }
        }
        let model = match (&self.model, &self.preset) {
            (Some(_), Some(_)) => return Err(cfg_err("model", "give either model or preset, not both")),
            (None, None) => return Err(cfg_err("model", "one of model or preset is required")),
            (Some(m), None) => {
                if let Some(h) = self.horizon {
                    if h != m.horizon {
                        return Err(cfg_err("horizon", format!("{h} conflicts with model.horizon = {}", m.horizon)));
                    }
                }
                m.validate().map_err(|e| cfg_err("model", e.to_string()))?;
                m.clone()
            }
            (None, Some(id)) => {
                let info = preset_info(id).map_err(|e| cfg_err("preset", e.to_string()))?;
                let mut m = preset(id).map_err(|e| cfg_err("preset", e.to_string()))?;
                if let Some(h) = self.horizon {
                    if h < info.min_horizon || h > info.max_horizon {
                        return Err(cfg_err("horizon", format!("{h} is outside [{}, {}] for preset {}", info.min_horizon, info.max_horizon, info.id)));
                    }
                    m = m.with_horizon(h);
                }
                m.validate().map_err(|e| cfg_err("horizon", e.to_string()))?;
                m
            }
        };
        StoppingFamily::parse(&self.family.rules, model.horizon).map_err(|e| cfg_err("family.rules", e.to_string()))?;
        for c in &self.family.criteria {
            c.validate().map_err(|e| cfg_err("family.criteria", e.to_string()))?;
        }
        if let Some(ids) = &self.report.equalities {
            if let Some(bad) = ids.iter().find(|id| !EQUALITY_IDS.contains(&id.as_str())) {
                return Err(cfg_err("report.equalities", format!("unknown equality {bad:?}")));
            }
        }
        if self.report.ui_probe_horizons.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            return Err(cfg_err("report.ui_probe_horizons", "horizons must be finite and nonnegative"));
        }
        if self.report.histogram_bins == 0 {
            return Err(cfg_err("report.histogram_bins", "must be positive"));
        }
        Ok(model)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlagFrequency {
    pub flag: String,
    pub frequency: f64,
    pub se: f64,
    /// Paths on which the flag could be computed.
    pub defined: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moment {
    pub mean: f64,
    pub se: f64,
    pub median: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QvPoint {
    pub t: f64,
    pub mean: f64,
    pub se: f64,
    pub median: f64,
}

/// One pass/fail line of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tol: f64,
    /// How value is compared: "abs" |v−t| ≤ tol, "rel" |v−t| ≤ tol·|t|, "min" v ≥ t, "max" v ≤ t.
    pub rule: String,
    pub pass: bool,
}

impl Check {
    pub fn abs(name: &str, value: f64, target: f64, tol: f64) -> Check {
        Check { name: name.into(), value, target, tol, rule: "abs".into(), pass: (value - target).abs() <= tol }
    }
    pub fn rel(name: &str, value: f64, target: f64, tol: f64) -> Check {
        let pass = target.is_finite() && (value - target).abs() <= tol * target.abs();
        Check { name: name.into(), value, target, tol, rule: "rel".into(), pass }
    }
    pub fn min(name: &str, value: f64, target: f64) -> Check {
        Check { name: name.into(), value, target, tol: 0.0, rule: "min".into(), pass: value >= target }
    }
    pub fn max(name: &str, value: f64, target: f64) -> Check {
        Check { name: name.into(), value, target, tol: 0.0, rule: "max".into(), pass: value <= target }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    pub config: ExperimentConfig,
    pub model: ModelSpec,
    pub seed: u64,
    pub n_paths: u64,
    pub horizon: f64,
    /// Finite-horizon proxies; none of them decides an almost-sure event.
    pub flags: Vec<FlagFrequency>,
    pub x_t: Moment,
    pub qv_t: Moment,
    pub xt_histogram: Vec<HistBin>,
    pub qv_trajectory: Vec<QvPoint>,
    pub oracle: Option<EventOracle>,
    pub confusion: Vec<ConfusionMatrix>,
    pub equalities: Vec<EqualityReport>,
    pub identities: Option<IdentitySuite>,
    pub verdicts: Vec<CriterionVerdict>,
    pub duality: Vec<DualityResult>,
    pub ui_probe: Option<UiProbe>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub pass: bool,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn flag(&self, name: &str) -> Option<&FlagFrequency> {
        self.flags.iter().find(|f| f.flag == name)
    }

    pub fn finalize(&mut self) {
        self.pass = self.checks.iter().all(|c| c.pass);
    }
}

fn freq(name: &str, vals: impl Iterator<Item = Option<bool>>) -> FlagFrequency {
    let xs: Vec<f64> = vals.flatten().map(|b| f64::from(u8::from(b))).collect();
    let (frequency, se) = mean_se(&xs);
    FlagFrequency { flag: name.into(), frequency, se, defined: xs.len() as u64 }
}

pub fn flag_table(s: &[PathSummary]) -> Vec<FlagFrequency> {
    macro_rules! b {
        ($name:literal, $f:ident) => {
            freq($name, s.iter().map(|p| Some(p.flags.$f)))
        };
    }
    macro_rules! o {
        ($name:literal, $f:ident) => {
            freq($name, s.iter().map(|p| p.flags.$f))
        };
    }
    vec![
        b!("numeric_convergent", numeric_convergent),
        b!("numeric_liminf_above", liminf_above),
        b!("numeric_limsup_above", limsup_above),
        b!("numeric_qv_growing", qv_growing),
        b!("numeric_qv_zero", qv_zero),
        o!("numeric_functional_c_finite", functional_c_finite),
        b!("numeric_a_finite", a_finite),
        b!("numeric_exp_converges_nonzero", exp_converges_nonzero),
        b!("numeric_absorbed", absorbed),
        o!("numeric_y_convergent", y_convergent),
        o!("numeric_v_finite", v_finite),
        o!("numeric_neg_log_tail_finite", neg_log_tail_finite),
        o!("numeric_pos_tail_finite", pos_tail_finite),
        b!("numeric_sup_stalled", sup_stalled),
        b!("numeric_drifting_down", drifting_down),
        b!("numeric_variation_growing", variation_growing),
        b!("numeric_small_jumps_growing", small_jumps_growing),
    ]
}

pub fn histogram(xs: &[f64], bins: usize) -> Vec<HistBin> {
    let finite: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    if finite.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![HistBin { lo, hi, count: finite.len() as u64 }];
    }
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for x in finite {
        counts[(((x - lo) / w) as usize).min(bins - 1)] += 1;
    }
    counts.into_iter().enumerate().map(|(i, count)| HistBin { lo: lo + i as f64 * w, hi: if i + 1 == bins { hi } else { lo + (i + 1) as f64 * w }, count }).collect()
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Duality triples run when a report asks for them.
fn duality_menu(horizon: f64) -> Vec<(StoppingRule, Statistic)> {
    use crate::follmer::StatTarget;
    let end = StoppingRule::Deterministic { t: horizon };
    let mid = StoppingRule::Deterministic { t: horizon / 2.0 };
    vec![
        (end, Statistic::Const { value: 1.0 }),
        (mid, Statistic::Indicator { target: StatTarget::X, above: false, level: 0.0 }),
        (end, Statistic::Bump { target: StatTarget::X }),
    ]
}

/// simulate → classify → criteria/Föllmer → report. Deterministic given the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let model = config.resolve()?;
    let tol = &config.tolerances;
    let horizon = model.horizon;
    let n = config.n_paths;
    let seed = config.seed;
    let comp = model.compensator()?;
    let k = config.report.qv_points;
    let grid: Vec<f64> = (1..=k).map(|i| horizon * i as f64 / k as f64).collect();
    let rows = ensemble_map(&model, seed, n, |_, p| {
        let s = classify_path(&model, &comp, p, tol)?;
        let qv = quadratic_variation(p);
        let pts = grid.iter().map(|&t| qv.value_at(t)).collect::<Result<Vec<f64>>>()?;
        Ok((s, pts))
    })?;
    let summaries: Vec<PathSummary> = rows.iter().map(|r| r.0).collect();
    let mut warnings = Vec::new();

    let xs: Vec<f64> = summaries.iter().map(|s| s.x_t).collect();
    let qvs: Vec<f64> = summaries.iter().map(|s| s.qv_t).collect();
    let (xm, xse) = mean_se(&xs);
    let (qm, qse) = mean_se(&qvs);
    let qv_trajectory = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let col: Vec<f64> = rows.iter().map(|r| r.1[i]).collect();
            let (mean, se) = mean_se(&col);
            QvPoint { t, mean, se, median: median(col) }
        })
        .collect();

    let oracle = match analytic_oracle(&model) {
        Ok(o) => Some(o),
        Err(e) => {
            warnings.push(e.to_string());
            None
        }
    };
    let confusion_tables = oracle.as_ref().map(|o| confusion(o, &summaries)).unwrap_or_default();

    let ids: Vec<String> = config.report.equalities.clone().unwrap_or_else(|| EQUALITY_IDS.iter().map(|s| s.to_string()).collect());
    let equalities = ids.iter().map(|id| equality_from_summaries(id, &model, &summaries)).collect::<Result<Vec<_>>>()?;

    let identities = if config.report.identities {
        let sampler = model.sampler()?;
        let m = n.min(200);
        let paths = (0..m).map(|i| Ok((sampler.sample(seed, i)?, comp.clone()))).collect::<Result<Vec<_>>>()?;
        match identity_suite(&paths) {
            Ok(s) => Some(s),
            Err(e) => {
                warnings.push(format!("identity suite: {e}"));
                None
            }
        }
    } else {
        None
    };

    let family = StoppingFamily::parse(&config.family.rules, horizon)?;
    let mut verdicts = Vec::new();
    for spec in &config.family.criteria {
        match evaluate_condition(&model, *spec, &family, n, seed) {
            Ok(v) => verdicts.push(v),
            Err(e) => warnings.push(format!("{}: {e}", spec.label())),
        }
    }

    let needs_pair = config.report.duality || !config.report.ui_probe_horizons.is_empty();
    let pair = if needs_pair {
        match tilt_model(&model) {
            Ok(p) => Some(p),
            Err(e) => {
                warnings.push(format!("dual model: {e}"));
                None
            }
        }
    } else {
        None
    };
    let mut duality = Vec::new();
    let mut probe = None;
    if let Some(pair) = &pair {
        if config.report.duality {
            for (sigma, g) in duality_menu(horizon) {
                duality.push(duality_check(pair, &sigma, &g, n, seed)?);
            }
        }
        if !config.report.ui_probe_horizons.is_empty() {
            probe = Some(ui_probe(pair, &config.report.ui_probe_horizons, DEFAULT_EXPLOSION_LEVEL, n.max(2), seed)?);
        }
    }

    let mut report = ExperimentReport {
        id: model.preset_id.clone().unwrap_or_else(|| "custom".into()),
        config: config.clone(),
        model,
        seed,
        n_paths: n,
        horizon,
        flags: flag_table(&summaries),
        x_t: Moment { mean: xm, se: xse, median: median(xs.clone()) },
        qv_t: Moment { mean: qm, se: qse, median: median(qvs) },
        xt_histogram: histogram(&xs, config.report.histogram_bins),
        qv_trajectory,
        oracle,
        confusion: confusion_tables,
        equalities,
        identities,
        verdicts,
        duality,
        ui_probe: probe,
        checks: Vec::new(),
        warnings,
        pass: true,
    };
    report.finalize();
    Ok(report)
}

fn csv_f(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

/// `<stem>.json` plus one CSV per table. Returns the files written.
pub fn write_artifacts(report: &ExperimentReport, dir: &Path, stem: &str) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body)?;
        out.push(p);
        Ok(())
    };
    put(format!("{stem}.json"), report.to_json() + "\n")?;

    let mut s = String::from("flag,frequency,se,defined\n");
    for f in &report.flags {
        let _ = writeln!(s, "{},{},{},{}", f.flag, csv_f(f.frequency), csv_f(f.se), f.defined);
    }
    put(format!("{stem}_flags.csv"), s)?;

    let mut s = String::from("name,value,target,tol,rule,pass\n");
    for c in &report.checks {
        let _ = writeln!(s, "{},{},{},{},{},{}", c.name.replace(',', ";"), csv_f(c.value), csv_f(c.target), csv_f(c.tol), c.rule, c.pass);
    }
    put(format!("{stem}_checks.csv"), s)?;

    let mut s = String::from("event,oracle_yes_flag_yes,oracle_yes_flag_no,oracle_no_flag_yes,oracle_no_flag_no,diagonal,flag_frequency,flag_se\n");
    for c in &report.confusion {
        let d = c.diagonal.map_or(String::new(), csv_f);
        let _ = writeln!(s, "{},{},{},{},{},{},{},{}", c.event, c.counts[0][0], c.counts[0][1], c.counts[1][0], c.counts[1][1], d, csv_f(c.flag_frequency), csv_f(c.flag_se));
    }
    put(format!("{stem}_confusion.csv"), s)?;

    let mut s = String::from("id,agreement,agreement_se,usable_paths\n");
    for e in &report.equalities {
        let _ = writeln!(s, "{},{},{},{}", e.id, csv_f(e.agreement), csv_f(e.agreement_se), e.usable_paths);
    }
    put(format!("{stem}_equalities.csv"), s)?;

    let mut s = String::from("lo,hi,count\n");
    for b in &report.xt_histogram {
        let _ = writeln!(s, "{},{},{}", csv_f(b.lo), csv_f(b.hi), b.count);
    }
    put(format!("{stem}_xt_hist.csv"), s)?;

    let mut s = String::from("t,mean,se,median\n");
    for q in &report.qv_trajectory {
        let _ = writeln!(s, "{},{},{},{}", csv_f(q.t), csv_f(q.mean), csv_f(q.se), csv_f(q.median));
    }
    put(format!("{stem}_qv.csv"), s)?;

    if !report.verdicts.is_empty() {
        let mut s = String::from("criterion,rule,mean,se,bootstrap_se,non_finite\n");
        for v in &report.verdicts {
            for r in &v.per_rule {
                let _ = writeln!(s, "{},{},{},{},{},{}", v.criterion, r.rule, csv_f(r.mean), csv_f(r.se), csv_f(r.bootstrap_se), r.non_finite);
            }
        }
        put(format!("{stem}_verdicts.csv"), s)?;
    }
    if !report.duality.is_empty() {
        let mut s = String::from("sigma,statistic,lhs,lhs_se,rhs,rhs_se,z,pass\n");
        for d in &report.duality {
            let _ = writeln!(s, "{},{},{},{},{},{},{},{}", d.sigma, d.statistic, csv_f(d.lhs), csv_f(d.lhs_se), csv_f(d.rhs), csv_f(d.rhs_se), csv_f(d.z_score), d.pass);
        }
        put(format!("{stem}_duality.csv"), s)?;
    }
    if let Some(p) = &report.ui_probe {
        let mut s = String::from("horizon,p_mean,p_se,q_survival,q_se,exact\n");
        for r in &p.rows {
            let _ = writeln!(s, "{},{},{},{},{},{}", r.horizon, csv_f(r.p_mean), csv_f(r.p_se), csv_f(r.q_survival), csv_f(r.q_se), r.exact.map_or(String::new(), csv_f));
        }
        put(format!("{stem}_ui_probe.csv"), s)?;
    }
    Ok(out)
}
