//! Runs an experiment and checks it against its oracle.
//!
//! Thresholds are fixed here, not in the config, so a config can change
//! how an experiment is run but never what counts as passing.

use std::fmt::Write as _;
use std::time::Instant;

use prinn_core::controlsim::{records_csv, rule_table, run_baseline, run_closed_loop, tail_mean_abs_error};
use prinn_core::fuzzy::RuleSet;
use prinn_core::losses::{ImpreciseOde, PerceptionProblem};
use prinn_core::oracle::{alpha_cut_envelope, mc_ensemble, Envelope};
use prinn_core::train::{fit, FitOutcome};
use prinn_core::{CrispOde, Mlp, Tape};

use crate::config::ExperimentConfig;
use crate::registry::Experiment;
use crate::report::{Check, Relation, Report};

pub const PINN_MAX_ERROR: f64 = 5e-2;
pub const PINN_FINAL_LOSS: f64 = 1e-4;
pub const PINN_MAX_EPOCHS: f64 = 5000.0;
pub const PINN_RUNTIME_S: f64 = 120.0;
pub const RK4_AGREEMENT: f64 = 1e-8;
pub const ENVELOPE_INFLATION: f64 = 5e-2;
pub const SURENESS_FINAL: f64 = 0.1;
pub const ENSEMBLE_COVERAGE: f64 = 0.95;
pub const RULE_GAP: f64 = 0.1;
pub const RULE_DATA_MSE: f64 = 5e-2;
pub const TRACKING_RATIO: f64 = 0.2;
pub const CONTROLLER_RUNTIME_S: f64 = 60.0;

/// Everything a run produces; `files` are `(name, contents)` pairs.
#[derive(Clone, Debug)]
pub struct RunArtifact {
    pub experiment: Experiment,
    pub files: Vec<(String, String)>,
    pub report: Report,
}

impl RunArtifact {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunError {
    /// Training aborted; the telemetry recorded so far is kept.
    Training { message: String, partial_telemetry: String },
    Failed(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Training { message, .. } => write!(f, "training aborted: {message}"),
            RunError::Failed(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for RunError {}

fn failed(e: impl std::fmt::Display) -> RunError {
    RunError::Failed(e.to_string())
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunArtifact, RunError> {
    let started = Instant::now();
    let mut art = match cfg.experiment {
        Experiment::PinnDecay => pinn_decay(cfg)?,
        Experiment::FcinnDecay => fcinn_decay(cfg)?,
        Experiment::SinnetOscillator => sinnet(cfg)?,
        Experiment::FinnCase1 | Experiment::FinnDerivativeCase2 => finn_rules(cfg)?,
        Experiment::FinnController => controller(cfg)?,
    };
    let limit = match cfg.experiment {
        Experiment::PinnDecay => Some(PINN_RUNTIME_S),
        Experiment::FinnController => Some(CONTROLLER_RUNTIME_S),
        _ => None,
    };
    if let Some(limit) = limit {
        art.report.push(Check::new("runtime_seconds", started.elapsed().as_secs_f64(), Relation::Lt, limit));
    }
    Ok(art)
}

fn widths(cfg: &ExperimentConfig) -> Vec<usize> {
    let mut w = vec![1];
    w.extend(&cfg.hidden);
    w.push(1);
    w
}

fn problem(cfg: &ExperimentConfig) -> &PerceptionProblem<f64> {
    cfg.problem.as_ref().expect("trained experiments carry a problem")
}

fn ode(cfg: &ExperimentConfig) -> &ImpreciseOde<f64> {
    problem(cfg).ode.as_ref().expect("validated")
}

fn train(cfg: &ExperimentConfig, problem: &PerceptionProblem<f64>) -> Result<FitOutcome<f64>, RunError> {
    let net = Mlp::init(&widths(cfg), cfg.train.seed).map_err(failed)?;
    fit(net, problem, &cfg.train).map_err(|e| match e {
        prinn_core::TrainError::NonFinite { ref partial_csv, .. } => {
            RunError::Training { message: e.to_string(), partial_telemetry: partial_csv.clone() }
        }
        other => failed(other),
    })
}

fn check_grid(cfg: &ExperimentConfig) -> Vec<f64> {
    let (lo, hi, n) = (cfg.train.collocation.lo, cfg.train.collocation.hi, cfg.oracle.check_points);
    (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
}

fn predict(net: &Mlp<f64>, ts: &[f64]) -> Result<Vec<f64>, RunError> {
    ts.iter().map(|&t| net.eval(&[t]).map(|v| v[0]).map_err(failed)).collect()
}

fn slope(net: &Mlp<f64>, t: f64) -> Result<f64, RunError> {
    let tape = Tape::new();
    let bound = net.bind(&tape).map_err(failed)?;
    Ok(bound.time_jet(&tape, t, 1).map_err(failed)?.dx.value())
}

/// CSV with one column per `(header, values)` pair.
fn columns_csv(cols: &[(&str, &[f64])]) -> String {
    let mut out = cols.iter().map(|(h, _)| *h).collect::<Vec<_>>().join(",");
    out.push('\n');
    let rows = cols.iter().map(|(_, v)| v.len()).min().unwrap_or(0);
    for i in 0..rows {
        let row: Vec<String> = cols.iter().map(|(_, v)| format!("{:?}", v[i])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn pinn_decay(cfg: &ExperimentConfig) -> Result<RunArtifact, RunError> {
    let out = train(cfg, problem(cfg))?;
    let ts = check_grid(cfg);
    let t0 = problem(cfg).t0;
    let crisp = CrispOde::modal(ode(cfg));
    let analytic: Vec<f64> = ts.iter().map(|&t| crisp.analytic(t0, t)).collect::<Result<_, _>>().map_err(failed)?;
    let rk4 = crisp.rk4(t0, &ts, cfg.oracle.rk4_step).map_err(failed)?;
    let pred = predict(&out.net, &ts)?;
    let last = out.telemetry.last().expect("at least one epoch");

    let mut report = Report::default();
    report.push(Check::new("max_abs_error_vs_analytic", max_abs_diff(&pred, &analytic), Relation::Lt, PINN_MAX_ERROR));
    report.push(Check::new("final_total_loss", last.total, Relation::Lt, PINN_FINAL_LOSS));
    report.push(Check::new("epochs_run", out.telemetry.records.len() as f64, Relation::Le, PINN_MAX_EPOCHS));
    report.push(Check::new("rk4_vs_analytic", max_abs_diff(&rk4, &analytic), Relation::Lt, RK4_AGREEMENT));
    Ok(RunArtifact {
        experiment: cfg.experiment,
        files: vec![
            ("telemetry.csv".into(), out.telemetry.to_csv()),
            ("snapshot.csv".into(), out.net.to_snapshot()),
            ("trajectory.csv".into(), columns_csv(&[("t", &ts), ("predicted", &pred), ("analytic", &analytic), ("rk4", &rk4)])),
        ],
        report,
    })
}

fn fcinn_decay(cfg: &ExperimentConfig) -> Result<RunArtifact, RunError> {
    let base = problem(cfg);
    let ode = ode(cfg);
    let fuzzy_names: Vec<&str> = ode.params().iter().filter(|(_, u)| u.fuzzy().is_some()).map(|(n, _)| *n).collect();
    let ts = check_grid(cfg);
    let mut report = Report::default();
    let mut files = Vec::new();
    let mut telemetry = String::new();
    let mut columns: Vec<(String, Vec<f64>)> = vec![("t".into(), ts.clone())];

    let mut levels = cfg.levels.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let envelopes: Vec<Envelope<f64>> = levels
        .iter()
        .map(|&mu| alpha_cut_envelope(ode, mu, base.t0, &ts, cfg.oracle.envelope_density, cfg.oracle.rk4_step))
        .collect::<Result<_, _>>()
        .map_err(failed)?;
    let violations = envelopes.windows(2).map(|w| (0..ts.len()).filter(|&i| w[1].lo[i] < w[0].lo[i] || w[1].hi[i] > w[0].hi[i]).count()).sum::<usize>();
    report.push(Check::new("envelope_nesting_violations", violations as f64, Relation::Eq, 0.0));
    for e in &envelopes {
        columns.push((format!("lo_mu{}", e.mu), e.lo.clone()));
        columns.push((format!("hi_mu{}", e.mu), e.hi.clone()));
    }

    let (mut inside, mut total) = (0usize, 0usize);
    let mut run = 0usize;
    for (k, &mu) in levels.iter().enumerate() {
        // at full membership every α gives the same granule
        let alphas = if mu == 1.0 { &cfg.alphas[..1] } else { &cfg.alphas[..] };
        for &alpha in alphas {
            let mut p = base.clone();
            p.pin_mu = Some(mu);
            p.pin_alpha = fuzzy_names.iter().map(|n| (n.to_string(), alpha)).collect();
            let out = train(cfg, &p)?;
            let csv = out.telemetry.to_csv();
            let mut lines = csv.lines();
            if run == 0 {
                let _ = writeln!(telemetry, "run,{}", lines.next().unwrap_or(""));
            } else {
                lines.next();
            }
            for l in lines {
                let _ = writeln!(telemetry, "{run},{l}");
            }
            let pred = predict(&out.net, &ts)?;
            let env = &envelopes[k];
            let excursion = env.max_excursion(&pred);
            inside += pred.iter().zip(env.lo.iter().zip(&env.hi)).filter(|(&v, (&l, &h))| v >= l - ENVELOPE_INFLATION && v <= h + ENVELOPE_INFLATION).count();
            total += pred.len();
            report.push(Check::new(format!("envelope_excursion_mu{mu}_alpha{alpha}"), excursion, Relation::Le, ENVELOPE_INFLATION));
            columns.push((format!("pred_mu{mu}_alpha{alpha}"), pred));
            let name = if run == 0 { "snapshot.csv".to_string() } else { format!("snapshot-run{run}.csv") };
            files.push((name, out.net.to_snapshot()));
            run += 1;
        }
    }
    report.push(Check::new("envelope_containment_ratio", inside as f64 / total.max(1) as f64, Relation::Ge, 1.0));
    let cols: Vec<(&str, &[f64])> = columns.iter().map(|(h, v)| (h.as_str(), v.as_slice())).collect();
    files.insert(0, ("telemetry.csv".into(), telemetry));
    files.push(("trajectory.csv".into(), columns_csv(&cols)));
    Ok(RunArtifact { experiment: cfg.experiment, files, report })
}

fn sinnet(cfg: &ExperimentConfig) -> Result<RunArtifact, RunError> {
    let p = problem(cfg);
    let out = train(cfg, p)?;
    let ts = check_grid(cfg);
    let pred = predict(&out.net, &ts)?;
    let ode = ode(cfg);
    let modal = CrispOde::modal(ode).rk4(p.t0, &ts, cfg.oracle.rk4_step).map_err(failed)?;
    let o = &cfg.oracle;
    let stats = mc_ensemble(ode, o.mc_samples, o.mc_seed, o.mc_workers, p.t0, &ts, o.rk4_step.max(1e-2)).map_err(failed)?;
    let sd: Vec<f64> = stats.variance.iter().map(|v| v.sqrt()).collect();
    // covered: within three ensemble standard deviations, with a small
    // floor where the ensemble is pinned by the initial condition
    let covered = (0..ts.len()).filter(|&i| (pred[i] - stats.mean[i]).abs() <= 3.0 * sd[i] + 5e-2).count();
    let final_sureness = out.telemetry.column("sureness").and_then(|c| c.last().copied()).unwrap_or(f64::NAN);
    let mu = out.aux_value("mu").unwrap_or(f64::NAN);

    let mut report = Report::default();
    report.push(Check::new("final_sureness_loss", final_sureness, Relation::Lt, SURENESS_FINAL));
    report.push(Check::new("mu_distance_to_unit_interval_edge", mu.min(1.0 - mu), Relation::Ge, 0.0));
    report.push(Check::new("ensemble_band_coverage", covered as f64 / ts.len() as f64, Relation::Ge, ENSEMBLE_COVERAGE));
    Ok(RunArtifact {
        experiment: cfg.experiment,
        files: vec![
            ("telemetry.csv".into(), out.telemetry.to_csv()),
            ("snapshot.csv".into(), out.net.to_snapshot()),
            (
                "trajectory.csv".into(),
                columns_csv(&[("t", &ts), ("predicted", &pred), ("modal_rk4", &modal), ("mc_mean", &stats.mean), ("mc_sd", &sd)]),
            ),
        ],
        report,
    })
}

/// Best attainable restriction at `t` by grid search over the output.
fn best_restriction(rules: &RuleSet<f64>, t: f64) -> Result<f64, RunError> {
    let mut best = 0.0f64;
    for i in 0..=40_000 {
        let y = -20.0 + i as f64 * 1e-3;
        best = best.max(rules.restriction(&[t], y).map_err(failed)?);
    }
    Ok(best)
}

fn finn_rules(cfg: &ExperimentConfig) -> Result<RunArtifact, RunError> {
    let p = problem(cfg);
    let rules = p.rules.as_ref().expect("validated");
    let out = train(cfg, p)?;
    let on_slope = cfg.experiment == Experiment::FinnDerivativeCase2;
    let m = p.rule_m;

    let penalty = |r: f64| m * (1.0 - r) * (1.0 - r);
    let mut achieved = Vec::with_capacity(p.collocation.len());
    let mut best = Vec::with_capacity(p.collocation.len());
    let mut outputs = Vec::with_capacity(p.collocation.len());
    for &t in &p.collocation {
        let y = if on_slope { slope(&out.net, t)? } else { out.net.eval(&[t]).map_err(failed)?[0] };
        outputs.push(y);
        achieved.push(rules.restriction(&[t], y).map_err(failed)?);
        best.push(best_restriction(rules, t)?);
    }
    let n = p.collocation.len() as f64;
    let loss: f64 = achieved.iter().map(|&r| penalty(r)).sum::<f64>() / n;
    let floor: f64 = best.iter().map(|&r| penalty(r)).sum::<f64>() / n;
    let rule_curve = out.telemetry.column("rule").unwrap_or_default();
    let head = &rule_curve[..rule_curve.len().min(100)];
    let non_decreasing = head.windows(2).filter(|w| w[1] >= w[0]).count();

    let mut report = Report::default();
    report.push(Check::new("rule_loss_non_decreasing_steps_first_100", non_decreasing as f64, Relation::Eq, 0.0));
    report.push(Check::new("rule_loss_gap_to_grid_optimum", loss - floor, Relation::Le, RULE_GAP));
    if !p.data.is_empty() {
        let preds = p.data.iter().map(|&(t, _)| out.net.eval(&[t]).map(|v| v[0]).map_err(failed)).collect::<Result<Vec<_>, _>>()?;
        let mse = preds.iter().zip(&p.data).map(|(y, (_, x))| (y - x).powi(2)).sum::<f64>() / p.data.len() as f64;
        report.push(Check::new("data_mse", mse, Relation::Le, RULE_DATA_MSE));
    }
    let values = predict(&out.net, &p.collocation)?;
    let mut cols: Vec<(&str, &[f64])> = vec![("t", &p.collocation), ("predicted", &values)];
    if on_slope {
        cols.push(("slope", &outputs));
    }
    cols.push(("restriction", &achieved));
    cols.push(("best_restriction", &best));
    Ok(RunArtifact {
        experiment: cfg.experiment,
        files: vec![
            ("telemetry.csv".into(), out.telemetry.to_csv()),
            ("snapshot.csv".into(), out.net.to_snapshot()),
            ("trajectory.csv".into(), columns_csv(&cols)),
        ],
        report,
    })
}

fn controller(cfg: &ExperimentConfig) -> Result<RunArtifact, RunError> {
    let c = cfg.controller.as_ref().expect("controller config");
    let table = rule_table::<f64>();
    let out = run_closed_loop(c, &table).map_err(failed)?;
    let base = run_baseline(c).map_err(failed)?;
    let ctl_err = tail_mean_abs_error(&out.records, 0.25);
    let base_err = tail_mean_abs_error(&base, 0.25);
    let max_rule = out.records.iter().map(|r| r.rule_loss).fold(0.0, f64::max);
    let identity = out.records.iter().map(|r| (r.error - (r.reference - r.output)).abs()).fold(0.0, f64::max);

    let mut report = Report::default();
    report.push(Check::new("tracking_ratio_vs_zero_controller", ctl_err / base_err, Relation::Le, TRACKING_RATIO));
    report.push(Check::new("max_rule_loss_over_penalty", max_rule / c.penalty, Relation::Le, 1.0));
    report.push(Check::new("error_identity_residual", identity, Relation::Eq, 0.0));

    let mut telemetry = String::from("step,rule_loss,error,control\n");
    for (i, r) in out.records.iter().enumerate() {
        let _ = writeln!(telemetry, "{i},{:?},{:?},{:?}", r.rule_loss, r.error, r.control);
    }
    Ok(RunArtifact {
        experiment: cfg.experiment,
        files: vec![
            ("telemetry.csv".into(), telemetry),
            ("snapshot.csv".into(), out.controller.to_snapshot()),
            ("trajectory.csv".into(), records_csv(&out.records)),
            ("baseline.csv".into(), records_csv(&base)),
        ],
        report,
    })
}
