use super::*;
use crate::fuzzy::{MembershipFunction, Rule, RuleSet, SNorm, TNorm};
use crate::losses::{ImpreciseOde, Preset, Uncertain};
use crate::network::ConstrainedParam;
use proptest::prelude::*;

fn tri(a: f64, b: f64, c: f64) -> MembershipFunction<f64> {
    MembershipFunction::triangular(a, b, c).unwrap()
}

fn gauss(center: f64, width: f64) -> MembershipFunction<f64> {
    MembershipFunction::gaussian(center, width).unwrap()
}

fn decay(preset: Preset, rate: Uncertain<f64>, n: usize) -> PerceptionProblem<f64> {
    let ts = Collocation::grid(n, 0.0, 3.0).sample(0).unwrap();
    let mut p = PerceptionProblem::new(preset, ts);
    p.ode = Some(ImpreciseOde::ExpDecay { rate, x0: Uncertain::Crisp(5.0) });
    p
}

fn cfg(epochs: usize, lr: f64) -> TrainConfig<f64> {
    TrainConfig { epochs, learning_rate: lr, early_stop: 0.0, ..TrainConfig::default() }
}

/// `(w − 3)²` on a single free auxiliary parameter; the network is ignored.
struct Bowl;

impl Objective<f64> for Bowl {
    fn term_names(&self) -> Vec<&'static str> {
        vec!["bowl"]
    }

    fn aux_params(&self) -> Vec<AuxParam<f64>> {
        vec![AuxParam { name: "w".into(), param: ConstrainedParam::free(0.0), pinned: None }]
    }

    fn evaluate<'t>(
        &self,
        _tape: &'t Tape<f64>,
        _net: &BoundMlp<'t, f64>,
        aux: &[Scalar<'t, f64>],
    ) -> Result<CompositeLoss<'t, f64>, LossError> {
        let mut l = CompositeLoss::new();
        l.push("bowl", 1.0, (aux[0] - 3.0).square())?;
        Ok(l)
    }
}

#[test]
fn grid_points() {
    assert_eq!(Collocation::grid(3, 0.0f64, 2.0).sample(0).unwrap(), vec![0.0, 1.0, 2.0]);
    let ts = Collocation::grid(101, 0.0f64, 3.0).sample(0).unwrap();
    assert_eq!((ts[0], ts[100]), (0.0, 3.0));
    for w in ts.windows(2) {
        assert!((w[1] - w[0] - 0.03).abs() < 1e-12);
    }
    assert!(Collocation::grid(1, 0.0, 1.0).sample(0).is_err());
    assert!(Collocation::grid(5, 1.0, 1.0).sample(0).is_err());
}

#[test]
fn random_points_are_seeded() {
    let c = Collocation { count: 50, lo: -1.0, hi: 2.0, strategy: CollocationStrategy::UniformRandom };
    let a = c.sample(7).unwrap();
    assert_eq!(a, c.sample(7).unwrap());
    assert_ne!(a, c.sample(8).unwrap());
    assert!(a.iter().all(|&t| (-1.0..=2.0).contains(&t)));
    assert_eq!(CollocationStrategy::parse("uniform-random"), Some(CollocationStrategy::UniformRandom));
}

#[test]
fn adam_converges_on_bowl() {
    let net = Mlp::init(&[1, 2, 1], 0).unwrap();
    let before = net.params().to_vec();
    let out = fit(net, &Bowl, &cfg(500, 0.1)).unwrap();
    assert!((out.aux_value("w").unwrap() - 3.0).abs() < 1e-3);
    // the bowl ignores the network, so its weights see zero gradient
    assert_eq!(out.net.params(), &before[..]);
    assert_eq!(out.telemetry.records.len(), 500);
}

#[test]
fn adam_zero_gradient_is_identity() {
    let mut adam = Adam::new(3, 0.1, 0.9, 0.999);
    let mut p = vec![1.0, -2.0, 0.5];
    for _ in 0..10 {
        adam.step(&mut p, &[0.0; 3]);
    }
    assert_eq!(p, vec![1.0, -2.0, 0.5]);
    assert_eq!(adam.steps(), 10);
}

#[test]
fn adam_first_step_moves_by_lr() {
    // bias correction makes the first step exactly lr·sign(g) up to ε
    let mut adam = Adam::new(2, 0.01, 0.9, 0.999);
    let mut p = vec![0.0f64, 0.0];
    adam.step(&mut p, &[4.0, -0.25]);
    assert!((p[0] + 0.01).abs() < 1e-9 && (p[1] - 0.01).abs() < 1e-9);
}

#[test]
fn identical_runs_are_identical() {
    let p = decay(Preset::Singular, Uncertain::Crisp(-0.5), 21);
    let run = || fit(Mlp::init(&[1, 8, 1], 3).unwrap(), &p, &cfg(50, 1e-2)).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.telemetry.to_csv(), b.telemetry.to_csv());
    assert_eq!(a.net.to_snapshot(), b.net.to_snapshot());
}

#[test]
fn total_is_sum_of_logged_terms() {
    let mut p = decay(Preset::Possibility, Uncertain::Fuzzy(crate::fuzzy::TriangularFuzzyNumber::new(-0.6, -0.5, -0.4).unwrap()), 21);
    p.data = vec![(1.0, 3.0), (2.0, 1.8)];
    let out = fit(Mlp::init(&[1, 8, 1], 1).unwrap(), &p, &cfg(40, 1e-2)).unwrap();
    assert_eq!(out.telemetry.term_names, vec!["data", "ic", "residual"]);
    for r in &out.telemetry.records {
        let sum: f64 = r.terms.iter().sum();
        assert!((sum - r.total).abs() < 1e-10);
        assert!(r.terms.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn mu_stays_inside_unit_interval() {
    let p = decay(Preset::Possibility, Uncertain::Fuzzy(crate::fuzzy::TriangularFuzzyNumber::new(-0.6, -0.5, -0.4).unwrap()), 11);
    let out = fit(Mlp::init(&[1, 6, 1], 2).unwrap(), &p, &cfg(300, 5e-2)).unwrap();
    let mu = out.telemetry.column("mu").unwrap();
    assert_eq!(mu.len(), 300);
    assert!(mu.iter().all(|&m| m > 0.0 && m < 1.0));
    let alpha = out.telemetry.column("alpha_lambda").unwrap();
    assert!(alpha.iter().all(|&a| (0.0..=1.0).contains(&a)));
}

#[test]
fn gradient_matches_finite_differences_at_first_epoch() {
    let p = decay(Preset::Singular, Uncertain::Crisp(-0.5), 11);
    let net = Mlp::init(&[1, 6, 6, 1], 5).unwrap();
    let loss_at = |params: &[f64]| {
        let n = Mlp::from_params(net.widths(), params.to_vec()).unwrap();
        let tape = Tape::new();
        let b = n.bind(&tape).unwrap();
        p.evaluate(&tape, &b, &[]).unwrap().total().value()
    };
    let tape = Tape::new();
    let b = net.bind(&tape).unwrap();
    let total = Objective::evaluate(&p, &tape, &b, &[]).unwrap().total();
    let grads = tape.gradient(total, b.weights()).unwrap();
    let n = net.params().len();
    for k in [0, 3, n / 2, n - 7, n - 1] {
        let h = 1e-6;
        let mut up = net.params().to_vec();
        let mut dn = up.clone();
        up[k] += h;
        dn[k] -= h;
        let fd = (loss_at(&up) - loss_at(&dn)) / (2.0 * h);
        let rel = (grads[k] - fd).abs() / fd.abs().max(1e-8);
        assert!(rel < 1e-3, "weight {k}: {} vs {fd}", grads[k]);
    }
}

#[test]
fn rule_loss_decreases_on_case1() {
    let rules = RuleSet::new(
        vec![
            Rule::new(vec![tri(0.0, 0.0, 10.0)], gauss(8.0, 2.0)),
            Rule::new(vec![tri(0.0, 10.0, 10.0)], gauss(4.0, 2.0)),
        ],
        TNorm::Min,
        SNorm::Max,
    )
    .unwrap();
    let ts = Collocation::grid(101, 0.0, 10.0).sample(0).unwrap();
    let mut p = PerceptionProblem::new(Preset::Finn, ts);
    p.rules = Some(rules);
    let out = fit(Mlp::init(&[1, 32, 32, 1], 0).unwrap(), &p, &cfg(100, 1e-3)).unwrap();
    let lr = out.telemetry.column("rule").unwrap();
    assert_eq!(lr.len(), 100);
    for w in lr.windows(2) {
        assert!(w[1] < w[0], "{} then {}", w[0], w[1]);
    }
}

#[test]
fn divergence_names_the_term() {
    // absurd rate makes the residual overflow
    let p = decay(Preset::Singular, Uncertain::Crisp(-1e300), 5);
    match fit(Mlp::init(&[1, 4, 1], 0).unwrap(), &p, &cfg(10, 1e-3)) {
        Err(TrainError::NonFinite { epoch, term, .. }) => {
            assert_eq!(epoch, 0);
            assert!(term.contains("residual") || term.contains("value"), "{term}");
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn early_stop_and_config_checks() {
    let net = Mlp::init(&[1, 2, 1], 0).unwrap();
    let c = TrainConfig { epochs: 10_000, learning_rate: 0.1, early_stop: 1e-6, ..TrainConfig::default() };
    let out = fit(net.clone(), &Bowl, &c).unwrap();
    assert!(out.stopped_early && out.telemetry.records.len() < 10_000);
    assert!(out.telemetry.last().unwrap().total < 1e-6);
    assert!(fit(net.clone(), &Bowl, &TrainConfig { epochs: 0, ..c.clone() }).is_err());
    assert!(fit(net, &Bowl, &TrainConfig { beta1: 1.0, ..c }).is_err());
}

#[test]
fn telemetry_csv_layout() {
    let out = fit(Mlp::init(&[1, 2, 1], 0).unwrap(), &Bowl, &cfg(3, 0.1)).unwrap();
    let csv = out.telemetry.to_csv();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "epoch,bowl,total,w");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,9.0,9.0,0.0"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn grid_stays_in_domain(n in 2usize..200, lo in -5.0f64..5.0, w in 0.01f64..10.0) {
        let ts = Collocation::grid(n, lo, lo + w).sample(0).unwrap();
        prop_assert_eq!(ts.len(), n);
        prop_assert_eq!(ts[0], lo);
        prop_assert_eq!(ts[n - 1], lo + w);
        prop_assert!(ts.windows(2).all(|p| p[0] < p[1]));
    }
}
