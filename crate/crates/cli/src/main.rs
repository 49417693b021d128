use clap::{Args, Parser, Subcommand};
use locmart::criteria::{evaluate_condition, CriterionSpec, CriterionTag};
use locmart::follmer::{duality_check, tilt_model, ui_probe, Statistic};
use locmart::lab::{self, run_experiment, write_artifacts, ExperimentConfig, ExperimentReport, Overrides};
use locmart::models::{preset, sample_ensemble, ModelSpec};
use locmart::path::read_ndjson;
use locmart::stochexp::{stoch_exp_with, stoch_log, ExpOptions};
use locmart::stopping::{StoppingFamily, StoppingRule};
use locmart::Error;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "locmart", version, about = "Simulate jump local martingales, their stochastic exponentials and the criteria around them")]
struct Cli {
    /// Base seed; every path i uses its own substream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Experiment config (JSON) for classify.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Preset id (see `locmart reproduce --list`).
    #[arg(long, conflicts_with = "model")]
    preset: Option<String>,
    /// Model spec file (JSON).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, short = 'n', default_value_t = 1000)]
    n_paths: u64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample paths and write them as NDJSON.
    Simulate(ModelArgs),
    /// Stochastic exponential (or logarithm) of every path in an NDJSON file.
    Exponential {
        input: PathBuf,
        #[arg(long)]
        signed: bool,
        /// Take the stochastic logarithm instead.
        #[arg(long)]
        log: bool,
    },
    /// Pathwise identities on a random battery of pure-jump paths.
    VerifyIdentities {
        #[arg(long, short = 'n', default_value_t = 1000)]
        n_paths: usize,
    },
    /// Monte Carlo estimate of a criterion over a stopping family.
    NkCheck {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "Ba")]
        criterion: String,
        #[arg(long, default_value_t = 0.0)]
        param: f64,
        /// `default`, `integers` or a comma-separated rule list.
        #[arg(long, default_value = "default")]
        family: String,
    },
    /// Duality between the model and its Föllmer dual for one (σ, G).
    FollmerCheck {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "t=1")]
        sigma: String,
        #[arg(long, default_value = "const")]
        stat: String,
    },
    /// E_P[Z_T; τ_K > T] against ℚ(τ_K > T) over a list of horizons.
    UiProbe {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        horizons: Vec<f64>,
        #[arg(long, default_value_t = 1e3)]
        level: f64,
    },
    /// Classify an ensemble and write the full report.
    Classify(ModelArgs),
    /// Run a preset's registered recipe.
    Reproduce {
        id: Option<String>,
        #[arg(long)]
        list: bool,
        #[arg(long, short = 'n')]
        n_paths: Option<u64>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Every preset recipe at one seed.
    Battery {
        #[arg(long, short = 'n', default_value_t = 1000)]
        n_paths: u64,
    },
}

enum Failure {
    Threshold(String),
    Config(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn resolve_model(a: &ModelArgs) -> Result<ModelSpec, Error> {
    let m = match (&a.preset, &a.model) {
        (Some(id), None) => preset(id)?,
        (None, Some(p)) => ModelSpec::from_json_str(&std::fs::read_to_string(p)?)?,
        _ => return Err(Error::ConfigError { field: "model".into(), message: "give --preset or --model".into() }),
    };
    let m = match a.horizon {
        Some(h) => m.with_horizon(h),
        None => m,
    };
    m.validate()?;
    Ok(m)
}

fn write(dir: &Path, name: &str, body: &str) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(dir)?;
    let p = dir.join(name);
    std::fs::write(&p, body)?;
    Ok(p)
}

fn timing(dir: &Path, stem: &str, started: Instant, threads: usize) -> Result<(), Error> {
    let t = json!({ "elapsed_seconds": started.elapsed().as_secs_f64(), "threads": threads });
    write(dir, &format!("{stem}_timing.json"), &format!("{t:#}\n"))?;
    Ok(())
}

fn finish_report(r: &ExperimentReport, dir: &Path, stem: &str) -> Outcome {
    write_artifacts(r, dir, stem)?;
    for c in &r.checks {
        println!("{} {}: value {} ({} {}, tol {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.rule, c.target, c.tol);
    }
    println!("report: {}", dir.join(format!("{stem}.json")).display());
    if r.pass {
        Ok(())
    } else {
        Err(Failure::Threshold(format!("{} check(s) failed", r.checks.iter().filter(|c| !c.pass).count())))
    }
}

fn run(cli: Cli) -> Outcome {
    let started = Instant::now();
    let threads = rayon::current_num_threads();
    let seed = cli.seed.unwrap_or(0);
    let dir = cli.out_dir.as_path();
    match cli.cmd {
        Cmd::Simulate(a) => {
            let m = resolve_model(&a)?;
            let paths = sample_ensemble(&m, seed, a.n_paths)?;
            let body: String = paths.iter().map(|p| p.to_json() + "\n").collect();
            let p = write(dir, "paths.ndjson", &body)?;
            println!("{} paths to {}", paths.len(), p.display());
        }
        Cmd::Exponential { input, signed, log } => {
            let paths = read_ndjson(&std::fs::read_to_string(&input).map_err(Error::from)?)?;
            let mut body = String::new();
            for p in &paths {
                let out = if log { stoch_log(p)? } else { stoch_exp_with(p, ExpOptions { signed })?.exponential };
                body.push_str(&out.to_json());
                body.push('\n');
            }
            let name = if log { "logarithm.ndjson" } else { "exponential.ndjson" };
            let p = write(dir, name, &body)?;
            println!("{} paths to {}", paths.len(), p.display());
        }
        Cmd::VerifyIdentities { n_paths } => {
            let s = lab::identity_suite(&lab::random_battery(n_paths, seed)?)?;
            let limits = [
                ("reciprocal", s.reciprocal, 1e-10),
                ("lemma_a", s.lemma_a, 1e-9),
                ("lemma_b", s.lemma_b, 1e-9),
                ("pushforward", s.pushforward, 1e-12),
                ("round_trip", s.round_trip, 1e-12),
                ("log_transform", s.log_transform, 1e-10),
                ("log_jump", s.log_jump, 1e-12),
            ];
            let body = serde_json::to_string_pretty(&s).map_err(Error::from)?;
            write(dir, "identities.json", &(body + "\n"))?;
            timing(dir, "identities", started, threads)?;
            let mut failed = 0;
            for (name, v, lim) in limits {
                let ok = v <= lim;
                failed += usize::from(!ok);
                println!("{} {name}: max deviation {v:e} (limit {lim:e})", if ok { "PASS" } else { "FAIL" });
            }
            if failed > 0 {
                return Err(Failure::Threshold(format!("{failed} identity check(s) failed")));
            }
        }
        Cmd::NkCheck { model, criterion, param, family } => {
            let m = resolve_model(&model)?;
            let tag: CriterionTag = criterion.parse()?;
            let fam = StoppingFamily::parse(&family, m.horizon)?;
            let v = evaluate_condition(&m, CriterionSpec::new(tag, param), &fam, model.n_paths, seed)?;
            let body = serde_json::to_string_pretty(&v).map_err(Error::from)?;
            write(dir, "nk_check.json", &(body + "\n"))?;
            timing(dir, "nk_check", started, threads)?;
            println!("{}: sup estimate {} at {} (bounded flag {}, diverged {})", v.criterion, v.sup_estimate, v.sup_rule, v.bounded_flag, v.diverged);
        }
        Cmd::FollmerCheck { model, sigma, stat } => {
            let m = resolve_model(&model)?;
            let pair = tilt_model(&m)?;
            let sigma: StoppingRule = sigma.parse()?;
            let g: Statistic = stat.parse()?;
            let d = duality_check(&pair, &sigma, &g, model.n_paths, seed)?;
            let body = serde_json::to_string_pretty(&d).map_err(Error::from)?;
            write(dir, "follmer_check.json", &(body + "\n"))?;
            timing(dir, "follmer_check", started, threads)?;
            println!("{} lhs {} ± {} rhs {} ± {} (z = {:.2})", if d.pass { "PASS" } else { "FAIL" }, d.lhs, d.lhs_se, d.rhs, d.rhs_se, d.z_score);
            if !d.pass {
                return Err(Failure::Threshold("duality outside 4 combined s.e.".into()));
            }
        }
        Cmd::UiProbe { model, horizons, level } => {
            let m = resolve_model(&model)?;
            let pair = tilt_model(&m)?;
            let u = ui_probe(&pair, &horizons, level, model.n_paths, seed)?;
            let body = serde_json::to_string_pretty(&u).map_err(Error::from)?;
            write(dir, "ui_probe.json", &(body + "\n"))?;
            timing(dir, "ui_probe", started, threads)?;
            for r in &u.rows {
                let exact = r.exact.map_or("-".to_string(), |e| format!("{e:.6}"));
                println!("T={} P-side {:.6} ± {:.6}  Q-side {:.6} ± {:.6}  exact {exact}", r.horizon, r.p_mean, r.p_se, r.q_survival, r.q_se);
            }
            println!("trend: {}", u.trend);
        }
        Cmd::Classify(a) => {
            let mut cfg = match &cli.config {
                Some(p) => ExperimentConfig::from_json_str(&std::fs::read_to_string(p).map_err(Error::from)?)?,
                None => {
                    let mut c = match (&a.preset, &a.model) {
                        (Some(id), None) => ExperimentConfig::for_preset(id),
                        (None, Some(p)) => ExperimentConfig::for_model(ModelSpec::from_json_str(&std::fs::read_to_string(p).map_err(Error::from)?)?),
                        _ => return Err(Failure::Config("give --config, --preset or --model".into())),
                    };
                    c.n_paths = a.n_paths;
                    c.horizon = a.horizon;
                    c
                }
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let r = run_experiment(&cfg)?;
            timing(dir, "classify", started, threads)?;
            for f in &r.flags {
                println!("{:<32} {:.4} ± {:.4} (n = {})", f.flag, f.frequency, f.se, f.defined);
            }
            return finish_report(&r, dir, "classify");
        }
        Cmd::Reproduce { id, list, n_paths, horizon } => {
            if list {
                for id in locmart::models::preset_ids() {
                    let info = locmart::models::preset_info(id)?;
                    println!("{id:<16} {}", info.description);
                }
                return Ok(());
            }
            let Some(id) = id else {
                return Err(Failure::Config("reproduce needs an id (or --list)".into()));
            };
            let ov = Overrides { n_paths, horizon, seed: cli.seed, tolerances: None };
            let r = lab::reproduce(&id, &ov)?;
            timing(dir, &r.id, started, threads)?;
            let stem = r.id.clone();
            return finish_report(&r, dir, &stem);
        }
        Cmd::Battery { n_paths } => {
            let b = lab::battery(seed, n_paths)?;
            for r in &b.reports {
                write_artifacts(r, &dir.join(&r.id), &r.id)?;
                let failed = r.checks.iter().filter(|c| !c.pass).count();
                println!("{} {:<16} {} checks, {failed} failed", if r.pass { "PASS" } else { "FAIL" }, r.id, r.checks.len());
            }
            write(dir, "battery.json", &(b.to_json() + "\n"))?;
            timing(dir, "battery", started, threads)?;
            if !b.pass {
                for f in &b.failed_checks {
                    println!("failed: {f}");
                }
                return Err(Failure::Threshold(format!("{} check(s) failed", b.failed_checks.len())));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    ExitCode::from(status(run(cli)))
}

fn status(r: Outcome) -> u8 {
    match r {
        Ok(()) => 0,
        Err(Failure::Threshold(m)) => {
            eprintln!("threshold failure: {m}");
            1
        }
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn exec(dir: &Path, args: &[&str]) -> u8 {
        let mut argv = vec!["locmart", "--out-dir", dir.to_str().unwrap()];
        argv.extend_from_slice(args);
        match Cli::try_parse_from(argv) {
            Ok(cli) => status(run(cli)),
            Err(_) => 2,
        }
    }

    #[test]
    fn simulate_then_exponential_round_trip() {
        let d = tempfile::tempdir().unwrap();
        assert_eq!(exec(d.path(), &["simulate", "--preset", "single-step", "-n", "5", "--seed", "3"]), 0);
        let paths = d.path().join("paths.ndjson");
        assert_eq!(std::fs::read_to_string(&paths).unwrap().lines().count(), 5);
        assert_eq!(exec(d.path(), &["exponential", paths.to_str().unwrap()]), 0);
        let e = d.path().join("exponential.ndjson");
        assert_eq!(exec(d.path(), &["exponential", "--log", e.to_str().unwrap()]), 0);
        let a = read_ndjson(&std::fs::read_to_string(&paths).unwrap()).unwrap();
        let b = read_ndjson(&std::fs::read_to_string(d.path().join("logarithm.ndjson")).unwrap()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.value_at(1.0).unwrap() - y.value_at(1.0).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn output_does_not_depend_on_threads() {
        let d = tempfile::tempdir().unwrap();
        let go = |n: usize, sub: &str| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
            let dir = d.path().join(sub);
            assert_eq!(pool.install(|| exec(&dir, &["simulate", "--preset", "ex-6.6", "-n", "20", "--seed", "9"])), 0);
            std::fs::read(dir.join("paths.ndjson")).unwrap()
        };
        assert_eq!(go(1, "one"), go(3, "three"));
    }

    #[test]
    fn config_errors_exit_2() {
        let d = tempfile::tempdir().unwrap();
        assert_eq!(exec(d.path(), &["simulate", "--preset", "no-such-preset"]), 2);
        assert_eq!(exec(d.path(), &["simulate"]), 2);
        assert_eq!(exec(d.path(), &["reproduce"]), 2);
        assert_eq!(exec(d.path(), &["follmer-check", "--preset", "bounded-ui", "--sigma", "whenever"]), 2);
        assert_eq!(exec(d.path(), &["no-such-command"]), 2);
        let cfg = d.path().join("bad.json");
        std::fs::write(&cfg, r#"{"preset": "zero", "seed": 1, "n_paths": 0}"#).unwrap();
        assert_eq!(exec(d.path(), &["--config", cfg.to_str().unwrap(), "classify"]), 2);
        std::fs::write(&cfg, r#"{"preset": "zero", "seed": 1, "typo": true}"#).unwrap();
        assert_eq!(exec(d.path(), &["--config", cfg.to_str().unwrap(), "classify"]), 2);
    }

    #[test]
    fn failed_checks_exit_1_and_still_write_reports() {
        let d = tempfile::tempdir().unwrap();
        // the harmonic walk does not settle by any reachable horizon
        assert_eq!(exec(d.path(), &["reproduce", "ex-6.2-1", "-n", "50", "--horizon", "100", "--seed", "1"]), 1);
        assert!(d.path().join("ex-6.2-1.json").exists());
    }

    #[test]
    fn passing_recipe_writes_artifacts() {
        let d = tempfile::tempdir().unwrap();
        assert_eq!(exec(d.path(), &["reproduce", "single-step", "-n", "400", "--seed", "2"]), 0);
        for f in ["single-step.json", "single-step_flags.csv", "single-step_checks.csv", "single-step_timing.json"] {
            assert!(d.path().join(f).exists(), "{f}");
        }
        assert_eq!(exec(d.path(), &["reproduce", "--list"]), 0);
    }

    #[test]
    fn identities_and_probes() {
        let d = tempfile::tempdir().unwrap();
        assert_eq!(exec(d.path(), &["verify-identities", "-n", "50", "--seed", "4"]), 0);
        assert!(d.path().join("identities.json").exists());
        assert_eq!(exec(d.path(), &["follmer-check", "--preset", "bounded-ui", "--horizon", "6", "-n", "4000", "--sigma", "t=3", "--stat", "bump:X"]), 0);
        assert_eq!(exec(d.path(), &["ui-probe", "--preset", "ex-6.3-1", "-n", "2000", "--horizons", "4,8"]), 0);
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("ui_probe.json")).unwrap()).unwrap();
        assert_eq!(v["rows"].as_array().unwrap().len(), 2);
        assert_eq!(exec(d.path(), &["nk-check", "--preset", "ex-6.3-1", "--horizon", "8", "-n", "500", "--criterion", "Ba", "--param", "2"]), 0);
        assert!(d.path().join("nk_check.json").exists());
    }

    #[test]
    fn classify_from_config_file() {
        let d = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig { n_paths: 200, ..ExperimentConfig::for_preset("ex-6.4") };
        let p = d.path().join("cfg.json");
        std::fs::write(&p, cfg.to_json()).unwrap();
        assert!(exec(d.path(), &["--config", p.to_str().unwrap(), "classify"]) <= 1);
        let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("classify.json")).unwrap()).unwrap();
        assert_eq!(r["n_paths"], 200);
        assert!(d.path().join("classify_timing.json").exists());
    }
}
