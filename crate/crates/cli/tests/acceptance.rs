//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, then a
//! nonzero exit if anything failed. Runs without the libtest harness so the
//! lines always reach the terminal.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use prinn::config::OracleSettings;
use prinn::{run, Experiment, ExperimentConfig, RunArtifact};
use prinn_core::fuzzy::{Granule, MembershipFunction, Rule, RuleSet, SNorm, TNorm};
use prinn_core::losses::{rule_loss, sureness, ImpreciseOde, PerceptionProblem, Preset, Uncertain};
use prinn_core::oracle::{alpha_cut_envelope, mc_ensemble};
use prinn_core::{CrispOde, Mlp, Normal, Scalar, Tape, TriangularFuzzyNumber};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn experiment(name: &str, extra: &str) -> ExperimentConfig {
    ExperimentConfig::parse(&format!("experiment = {name}\n{extra}")).expect("built-in config parses")
}

fn run_ok(cfg: &ExperimentConfig) -> Result<RunArtifact, Outcome> {
    run(cfg).map_err(|e| outcome(false, format!("run failed: {e}")))
}

fn check_value(art: &RunArtifact, name: &str) -> f64 {
    art.report.get(name).map_or(f64::NAN, |c| c.measured)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn pinn_reproduction() -> Outcome {
    let cfg = experiment("pinn-decay", "");
    let started = Instant::now();
    let art = match run_ok(&cfg) {
        Ok(a) => a,
        Err(o) => return o,
    };
    let secs = started.elapsed().as_secs_f64();
    let err = check_value(&art, "max_abs_error_vs_analytic");
    let epochs = check_value(&art, "epochs_run");
    let points = cfg.oracle.check_points;
    outcome(
        err < 5e-2 && epochs <= 5000.0 && secs < 120.0 && points == 301,
        format!("max |x̂ − 5e^(−t/2)| = {err:.3e} on {points} points, {epochs} epochs, {secs:.1} s"),
    )
}

/// Random expression over the differentiable primitives, evaluated both on
/// the tape and in plain f64 so the two share one structure.
fn expression<'t>(kind: usize, x: Scalar<'t, f64>, y: Scalar<'t, f64>) -> Scalar<'t, f64> {
    match kind {
        0 => (x * y).tanh() + x.sin() * y,
        1 => (x * x + 1.0).ln() / (y.exp() + 2.0),
        2 => x.cos() * (y * 0.5).sigmoid() - x.powf(3.0),
        3 => (x * x + y * y + 0.5).sqrt() * x.exp(),
        4 => ((x - y).square() + 1.0).recip() + x * y,
        _ => (x * 0.3).max(y * 0.7) + (x + 2.0).abs() * y.tanh(),
    }
}

fn expression_plain(kind: usize, x: f64, y: f64) -> f64 {
    match kind {
        0 => (x * y).tanh() + x.sin() * y,
        1 => (x * x + 1.0).ln() / (y.exp() + 2.0),
        2 => x.cos() / (1.0 + (-(y * 0.5)).exp()) - x.powf(3.0),
        3 => (x * x + y * y + 0.5).sqrt() * x.exp(),
        4 => 1.0 / ((x - y) * (x - y) + 1.0) + x * y,
        _ => (x * 0.3).max(y * 0.7) + (x + 2.0).abs() * y.tanh(),
    }
}

fn autodiff_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-6;
    let (mut first, mut worst1) = (0, 0.0f64);
    while first < 1000 {
        let kind = first % 6;
        let (x0, y0): (f64, f64) = (rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
        // keep away from the kinks of max and abs
        if kind == 5 && ((x0 * 0.3 - y0 * 0.7).abs() < 1e-3 || (x0 + 2.0).abs() < 1e-3) {
            continue;
        }
        let tape = Tape::new();
        let (x, y) = (tape.var(x0).unwrap(), tape.var(y0).unwrap());
        let g = tape.gradient(expression(kind, x, y), &[x, y]).unwrap();
        let fx = (expression_plain(kind, x0 + h, y0) - expression_plain(kind, x0 - h, y0)) / (2.0 * h);
        let fy = (expression_plain(kind, x0, y0 + h) - expression_plain(kind, x0, y0 - h)) / (2.0 * h);
        worst1 = worst1.max(rel_err(g[0], fx)).max(rel_err(g[1], fy));
        first += 1;
    }
    let h = 1e-4;
    let (mut second, mut worst2) = (0, 0.0f64);
    while second < 200 {
        let kind = second % 5;
        let (x0, y0): (f64, f64) = (rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
        let tape = Tape::new();
        let x = tape.var(x0).unwrap();
        let y = Scalar::constant(y0);
        let ad = tape.derivative_of_derivative(expression(kind, x, y), x).unwrap();
        let f = |v: f64| expression_plain(kind, v, y0);
        let fd = (f(x0 + h) - 2.0 * f(x0) + f(x0 - h)) / (h * h);
        worst2 = worst2.max(rel_err(ad, fd));
        second += 1;
    }
    outcome(
        worst1 < 1e-4 && worst2 < 1e-3,
        format!("{first} first-order checks, worst rel err {worst1:.2e}; {second} second-order, worst {worst2:.2e}"),
    )
}

fn hmf_identity() -> Outcome {
    let zeta = TriangularFuzzyNumber::new(0.15, 0.2, 0.25).unwrap();
    let modal_exact = (0..=10).all(|i| zeta.hmf(Granule::new(1.0, i as f64 / 10.0).unwrap()) == 0.2);
    let mut worst = 0.0f64;
    for i in 0..=20 {
        for j in 0..=20 {
            let (mu, alpha) = (i as f64 / 20.0, j as f64 / 20.0);
            let closed = 0.2 + (1.0 - mu) * (0.1 * alpha - 0.05);
            worst = worst.max((zeta.hmf(Granule::new(mu, alpha).unwrap()) - closed).abs());
        }
    }
    outcome(modal_exact && worst <= 1e-15, format!("μ=1 exact for 11 α: {modal_exact}; 21×21 closed-form max diff {worst:.2e}"))
}

fn reduction_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for trial in 0..50 {
        let width = rng.gen_range(2..12);
        let net = Mlp::<f64>::init(&[1, width, width, 1], trial).unwrap();
        let n = rng.gen_range(3..40);
        let mut coll: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
        coll.sort_by(f64::total_cmp);
        let data: Vec<(f64, f64)> = (0..3).map(|_| (rng.gen_range(0.0..3.0), rng.gen_range(0.0..5.0))).collect();

        let mut fuzzy = PerceptionProblem::new(Preset::Possibility, coll.clone());
        fuzzy.ode = Some(ImpreciseOde::ExpDecay {
            rate: Uncertain::Fuzzy(TriangularFuzzyNumber::new(-0.6, -0.5, -0.4).unwrap()),
            x0: Uncertain::Crisp(5.0),
        });
        fuzzy.data = data.clone();
        fuzzy.pin_mu = Some(1.0);
        fuzzy.pin_alpha = vec![("lambda".into(), rng.gen_range(0.0..1.0))];
        let mut crisp = PerceptionProblem::new(Preset::Singular, coll);
        crisp.ode = Some(ImpreciseOde::ExpDecay { rate: Uncertain::Crisp(-0.5), x0: Uncertain::Crisp(5.0) });
        crisp.data = data;

        let tape = Tape::new();
        let bound = net.bind(&tape).unwrap();
        let aux: Vec<_> = fuzzy.aux_params().iter().map(|a| Scalar::constant(a.pinned.expect("all pinned"))).collect();
        let lf = fuzzy.evaluate(&tape, &bound, &aux).unwrap().total().value();
        let lc = crisp.evaluate(&tape, &bound, &[]).unwrap().total().value();
        worst = worst.max((lf - lc).abs());
    }
    outcome(worst <= 1e-12, format!("50 nets, max |L_possibility(μ=1) − L_singular| = {worst:.2e}"))
}

fn fcinn_envelope() -> Outcome {
    let cfg = experiment("fcinn-decay", "");
    let art = match run_ok(&cfg) {
        Ok(a) => a,
        Err(o) => return o,
    };
    let excursions: Vec<f64> =
        art.report.checks.iter().filter(|c| c.name.starts_with("envelope_excursion")).map(|c| c.measured).collect();
    let worst = excursions.iter().copied().fold(0.0, f64::max);
    let setup = cfg.levels == [0.0, 0.5, 1.0] && cfg.alphas == [0.0, 1.0];
    let domain = (cfg.train.collocation.lo, cfg.train.collocation.hi) == (0.0, 3.0);
    outcome(
        setup && domain && !excursions.is_empty() && worst <= 5e-2 && check_value(&art, "envelope_containment_ratio") >= 1.0,
        format!("{} trained runs, worst excursion beyond the envelope {worst:.2e}", excursions.len()),
    )
}

fn sureness_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut in_range, mut zero_at_zero, mut one_iff) = (true, true, true);
    for _ in 0..10_000 {
        let dist = Normal::new(rng.gen_range(-2.0..2.0), rng.gen_range(1e-3..2.0)).unwrap();
        let mu: f64 = rng.gen_range(0.0..1.0);
        let r = rng.gen_range(-5.0..5.0);
        let s = sureness(Scalar::constant(mu), Scalar::constant(dist.normalized_likelihood(r))).value();
        in_range &= (0.0..=1.0).contains(&s);
        let s0 = sureness(Scalar::constant(0.0), Scalar::constant(dist.normalized_likelihood(r))).value();
        zero_at_zero &= s0 == 0.0;
        // μ < 1 or an off-mean residual both keep sureness below 1
        let full = |r: f64| sureness(Scalar::constant(1.0), Scalar::constant(dist.normalized_likelihood(r))).value();
        one_iff &= s < 1.0 && (r == dist.mean() || full(r) < 1.0) && full(dist.mean()) == 1.0;
    }
    let cfg = experiment("sinnet-oscillator", "");
    let art = match run_ok(&cfg) {
        Ok(a) => a,
        Err(o) => return o,
    };
    let ls = check_value(&art, "final_sureness_loss");
    outcome(
        in_range && zero_at_zero && one_iff && ls < 0.1,
        format!("10⁴ trials: range {in_range}, zero at μ=0 {zero_at_zero}, one iff μ=1 at the mean {one_iff}; SINNet L_s = {ls:.3e}"),
    )
}

fn random_membership(rng: &mut ChaCha8Rng) -> MembershipFunction<f64> {
    let c: f64 = rng.gen_range(-5.0..5.0);
    let w = |rng: &mut ChaCha8Rng| rng.gen_range(0.1..3.0);
    match rng.gen_range(0..3) {
        0 => MembershipFunction::triangular(c - w(rng), c, c + w(rng)).unwrap(),
        1 => MembershipFunction::trapezoidal(c - w(rng), c, c + w(rng), c + 4.0).unwrap(),
        _ => MembershipFunction::gaussian(c, w(rng)).unwrap(),
    }
}

fn rule_loss_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut bounded, mut zero_at_cores) = (true, true);
    for _ in 0..10_000 {
        let arity = rng.gen_range(1..3);
        let rules: Vec<_> = (0..rng.gen_range(1..4))
            .map(|_| Rule::new((0..arity).map(|_| random_membership(&mut rng)).collect(), random_membership(&mut rng)))
            .collect();
        let (t, s) = if rng.gen_bool(0.5) { (TNorm::Min, SNorm::Max) } else { (TNorm::Product, SNorm::BoundedSum) };
        let set = RuleSet::new(rules, t, s).unwrap();
        let m = rng.gen_range(1.0..20.0);
        let inputs: Vec<_> = (0..arity).map(|_| Scalar::constant(rng.gen_range(-8.0..8.0))).collect();
        let l = rule_loss(&set, &inputs, Scalar::constant(rng.gen_range(-8.0..8.0)), m).unwrap().value();
        bounded &= (0.0..=m).contains(&l);
        let first = &set.rules()[0];
        let core_in: Vec<_> = first.antecedents.iter().map(|a| Scalar::constant(a.core())).collect();
        let at_core = rule_loss(&set, &core_in, Scalar::constant(first.consequent.core()), m).unwrap().value();
        zero_at_cores &= at_core == 0.0;
    }
    outcome(bounded && zero_at_cores, format!("10⁴ random rule sets: within [0, M] {bounded}, zero at cores {zero_at_cores}"))
}

fn controller_tracking() -> Outcome {
    let cfg = experiment("finn-controller", "");
    let started = Instant::now();
    let art = match run_ok(&cfg) {
        Ok(a) => a,
        Err(o) => return o,
    };
    let secs = started.elapsed().as_secs_f64();
    let again = match run_ok(&cfg) {
        Ok(a) => a,
        Err(o) => return o,
    };
    let ratio = check_value(&art, "tracking_ratio_vs_zero_controller");
    let c = cfg.controller.as_ref().unwrap();
    let setup = c.steps == 2000 && matches!(c.plant, prinn_core::PlantKind::FirstOrder { .. });
    let same = art.file("trajectory.csv") == again.file("trajectory.csv");
    outcome(
        setup && ratio <= 0.2 && secs < 60.0 && same,
        format!("tail |e| ratio to zero controller {ratio:.3e}, {secs:.2} s, rerun identical {same}"),
    )
}

fn oracle_self_validation() -> Outcome {
    let ts: Vec<f64> = (0..=30).map(|i| i as f64 * 0.1).collect();
    let families = [
        CrispOde::ExpDecay { rate: -0.5, x0: 5.0 },
        CrispOde::ExpDecay { rate: 0.3, x0: -1.0 },
        CrispOde::Oscillator { zeta: 0.2, omega: 2.0, x0: 2.0, v0: 0.0 },
        CrispOde::Oscillator { zeta: 0.05, omega: 5.0, x0: 1.0, v0: -1.0 },
    ];
    let mut rk4_worst = 0.0f64;
    for ode in &families {
        let num = ode.rk4(0.0, &ts, 1e-3).unwrap();
        for (t, v) in ts.iter().zip(num) {
            rk4_worst = rk4_worst.max((v - ode.analytic(0.0, *t).unwrap()).abs());
        }
    }
    let fuzzy = ImpreciseOde::ExpDecay {
        rate: Uncertain::Fuzzy(TriangularFuzzyNumber::new(-0.6, -0.5, -0.4).unwrap()),
        x0: Uncertain::Fuzzy(TriangularFuzzyNumber::new(4.5, 5.0, 5.5).unwrap()),
    };
    let o = OracleSettings::default();
    let envs: Vec<_> =
        [0.0, 0.5, 1.0].iter().map(|&mu| alpha_cut_envelope(&fuzzy, mu, 0.0, &ts, o.envelope_density, 1e-3).unwrap()).collect();
    let nested = envs.windows(2).all(|w| w[1].nested_in(&w[0]));
    let random = ImpreciseOde::ExpDecay { rate: Uncertain::Random(Normal::new(-0.5, 1e-2).unwrap()), x0: Uncertain::Crisp(5.0) };
    let stats = mc_ensemble(&random, 20_000, 9, 4, 0.0, &[0.0, 1.0, 2.0], 1e-2).unwrap();
    let mut mc_z = 0.0f64;
    for (i, t) in [0.0f64, 1.0, 2.0].iter().enumerate().skip(1) {
        let closed = 5.0 * (-0.5 * t + 0.5 * 1e-2 * t * t).exp();
        mc_z = mc_z.max((stats.mean[i] - closed).abs() / stats.standard_error(i));
    }
    outcome(
        rk4_worst < 1e-8 && nested && mc_z < 4.0,
        format!("rk4 max err {rk4_worst:.2e}; 3-level nesting {nested}; MC mean off by {mc_z:.2} standard errors"),
    )
}

fn determinism() -> Outcome {
    let mut differing = Vec::new();
    for e in Experiment::ALL {
        let extra = match e {
            Experiment::FinnController => "[controller]\nsteps = 300\n",
            _ => "[train]\nepochs = 25\n[oracle]\nmc_samples = 200\n",
        };
        let cfg = experiment(e.name(), extra);
        let (a, b) = match (run(&cfg), run(&cfg)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(err), _) | (_, Err(err)) => return outcome(false, format!("{e}: {err}")),
        };
        if a.file("telemetry.csv").is_none() || a.file("telemetry.csv") != b.file("telemetry.csv") {
            differing.push(e.name());
        }
    }
    outcome(differing.is_empty(), format!("telemetry byte-identical on rerun for all 6 experiments; differing: {differing:?}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("pinn reproduction of exponential decay", pinn_reproduction),
        ("autodiff correctness", autodiff_correctness),
        ("hmf identity suite", hmf_identity),
        ("possibility/singular reduction identity", reduction_identity),
        ("fcinn envelope check", fcinn_envelope),
        ("sureness properties and SINNet run", sureness_properties),
        ("rule-loss bounds", rule_loss_bounds),
        ("finn controller tracking", controller_tracking),
        ("oracle self-validation", oracle_self_validation),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let o = check();
        failures += usize::from(!o.passed);
        println!(
            "criterion {:>2} {:<42} {} ({}; {:.1} s)",
            i + 1,
            name,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            started.elapsed().as_secs_f64()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
