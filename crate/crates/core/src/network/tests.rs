use super::*;
use proptest::prelude::*;

fn net(seed: u64) -> Mlp<f64> {
    Mlp::init(&[1, 8, 8, 1], seed).unwrap()
}

#[test]
fn zero_weights_return_bias_pattern() {
    let mut m = Mlp::<f64>::zeros(&[2, 3, 2]).unwrap();
    assert_eq!(m.eval(&[0.7, -4.0]).unwrap(), vec![0.0, 0.0]);
    let n = m.params().len();
    m.params_mut()[n - 2] = 1.5;
    m.params_mut()[n - 1] = -2.0;
    assert_eq!(m.eval(&[9.0, 3.0]).unwrap(), vec![1.5, -2.0]);
}

#[test]
fn single_layer_is_affine() {
    let m = Mlp::from_params(&[1, 1], vec![2.5, 0.5]).unwrap();
    assert_eq!(m.eval(&[2.0]).unwrap(), vec![5.5]);
    let tape = Tape::new();
    let b = m.bind(&tape).unwrap();
    let t = tape.var(2.0).unwrap();
    let y = b.scalar(t);
    assert_eq!(tape.gradient(y, &[t]).unwrap(), vec![2.5]);
}

#[test]
fn init_is_deterministic_and_bounded() {
    assert_eq!(net(3).to_snapshot(), net(3).to_snapshot());
    assert_ne!(net(3).params(), net(4).params());
    let widths = [1, 32, 32, 1];
    let m = Mlp::<f64>::init(&widths, 9).unwrap();
    let mut offset = 0;
    for w in widths.windows(2) {
        let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
        let (weights, rest) = m.params()[offset..].split_at(w[0] * w[1]);
        assert!(weights.iter().all(|x| x.abs() <= bound));
        assert!(rest[..w[1]].iter().all(|&b| b == 0.0));
        offset += w[0] * w[1] + w[1];
    }
    assert_eq!(offset, m.params().len());
    assert_eq!(Mlp::<f64>::init(&[1, 0, 1], 0).unwrap_err(), NetworkError::ZeroWidth(1));
    assert_eq!(Mlp::<f64>::init(&[1], 0).unwrap_err(), NetworkError::TooFewLayers);
}

#[test]
fn bound_forward_matches_eval() {
    let m = Mlp::<f64>::init(&[2, 5, 3], 1).unwrap();
    let tape = Tape::new();
    let b = m.bind(&tape).unwrap();
    let x = [0.3, -1.2];
    let plain = m.eval(&x).unwrap();
    let rec: Vec<f64> = b.forward(&tape.vars(&x).unwrap()).unwrap().iter().map(|s| s.value()).collect();
    assert_eq!(plain, rec);
    assert!(matches!(b.forward(&[Scalar::one()]), Err(NetworkError::InputCount { expected: 2, got: 1 })));
}

#[test]
fn time_derivatives_match_finite_differences() {
    for seed in 0..5 {
        let m = net(seed);
        let f = |t: f64| m.eval(&[t]).unwrap()[0];
        let tape = Tape::new();
        let b = m.bind(&tape).unwrap();
        for &t in &[-1.0, 0.0, 0.4, 2.5] {
            let j = jet(&tape, &|s| b.scalar(s), t, 2).unwrap();
            assert_eq!(j.x.value(), f(t));
            let h1 = 1e-5;
            let d1 = (f(t + h1) - f(t - h1)) / (2.0 * h1);
            let h2 = 1e-4;
            let d2 = (f(t + h2) - 2.0 * f(t) + f(t - h2)) / (h2 * h2);
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-3);
            assert!(rel(j.dx.value(), d1) < 1e-4, "seed {seed} t {t}: {} vs {d1}", j.dx.value());
            assert!(rel(j.ddx.unwrap().value(), d2) < 1e-3, "seed {seed} t {t}: {} vs {d2}", j.ddx.unwrap().value());
        }
    }
}

#[test]
fn jet_weight_gradient_matches_finite_differences() {
    // d/dw of (x + ẋ + ẍ) at t = 0.3: the nested derivatives stay differentiable in the weights.
    let m = net(2);
    let objective = |m: &Mlp<f64>| {
        let tape = Tape::new();
        let b = m.bind(&tape).unwrap();
        let j = jet(&tape, &|s| b.scalar(s), 0.3, 2).unwrap();
        (j.x + j.dx + j.ddx.unwrap()).value()
    };
    let tape = Tape::new();
    let b = m.bind(&tape).unwrap();
    let j = jet(&tape, &|s| b.scalar(s), 0.3, 2).unwrap();
    let grads = tape.gradient(j.x + j.dx + j.ddx.unwrap(), b.weights()).unwrap();
    for &k in &[0, 3, 10, 20, 40, m.params().len() - 1] {
        let h = 1e-6;
        let mut up = m.clone();
        up.params_mut()[k] += h;
        let mut down = m.clone();
        down.params_mut()[k] -= h;
        let fd = (objective(&up) - objective(&down)) / (2.0 * h);
        assert!((grads[k] - fd).abs() <= 1e-5 * fd.abs().max(1.0), "param {k}: {} vs {fd}", grads[k]);
    }
}

#[test]
fn snapshot_round_trips_exactly() {
    let m = net(7);
    let text = m.to_snapshot();
    assert!(text.starts_with("# prinn-snapshot v1\nwidths,1,8,8,1\nindex,value\n"));
    assert_eq!(Mlp::<f64>::from_snapshot(&text).unwrap(), m);
    let broken = text.replace("index,value", "idx");
    assert!(matches!(Mlp::<f64>::from_snapshot(&broken), Err(NetworkError::Snapshot { line: 3, .. })));
    let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
    assert!(matches!(Mlp::<f64>::from_snapshot(&truncated), Err(NetworkError::ParamCount { .. })));
}

#[test]
fn constrained_param_examples() {
    let p = ConstrainedParam::<f64>::bounded(0.0, 1.0, 0.5).unwrap();
    assert_eq!(p.raw(), 0.0);
    assert_eq!(p.value_plain(), 0.5);
    let tape = Tape::new();
    let raw = tape.var(p.raw()).unwrap();
    let v = p.value(raw);
    assert_eq!(v.value(), 0.5);
    assert!((tape.gradient(v, &[raw]).unwrap()[0] - 0.25).abs() < 1e-15);

    let mut q = p;
    q.set_raw(1e6);
    assert!(q.value_plain() < 1.0 && q.value_plain() > 0.999_999);
    assert!(ConstrainedParam::bounded(0.0, 1.0, 1.0).is_err());
    assert!(ConstrainedParam::bounded(1.0, 1.0, 1.0).is_err());
    let f = ConstrainedParam::free(-0.5);
    assert_eq!(f.value_plain(), -0.5);
}

#[test]
fn bounded_start_value_round_trips() {
    let p = ConstrainedParam::<f64>::bounded(-0.6, -0.4, -0.45).unwrap();
    assert!((p.value_plain() + 0.45).abs() < 1e-14);
}

proptest! {
    #[test]
    fn constrained_param_stays_strictly_inside(raw in -50.0f64..50.0, lo in -5.0f64..5.0, width in 1e-3f64..10.0) {
        let mut p = ConstrainedParam::bounded(lo, lo + width, lo + 0.5 * width).unwrap();
        p.set_raw(raw);
        let v = p.value_plain();
        prop_assert!(v > lo && v < lo + width, "{v}");
        let tape = Tape::new();
        let s = p.value(tape.var(raw).unwrap());
        prop_assert_eq!(s.value(), v);
    }

    #[test]
    fn constrained_param_stays_inside_in_single_precision(raw in -50.0f32..50.0) {
        let mut p = ConstrainedParam::bounded(0.0f32, 1.0, 0.5).unwrap();
        p.set_raw(raw);
        let v = p.value_plain();
        prop_assert!(v > 0.0 && v < 1.0);
    }
}

#[test]
fn forward_mode_jet_matches_nested_reverse() {
    let m = Mlp::<f64>::init(&[1, 6, 5, 1], 8).unwrap();
    let tape = Tape::new();
    let b = m.bind(&tape).unwrap();
    for &t in &[-0.7, 0.0, 1.3] {
        let fast = b.time_jet(&tape, t, 2).unwrap();
        let slow = jet(&tape, &|s| b.scalar(s), t, 2).unwrap();
        assert_eq!(fast.x.value(), slow.x.value());
        assert!((fast.dx.value() - slow.dx.value()).abs() < 1e-13);
        assert!((fast.ddx.unwrap().value() - slow.ddx.unwrap().value()).abs() < 1e-13);
        let gf = tape.gradient(fast.dx + fast.ddx.unwrap(), b.weights()).unwrap();
        let gs = tape.gradient(slow.dx + slow.ddx.unwrap(), b.weights()).unwrap();
        for (x, y) in gf.iter().zip(&gs) {
            assert!((x - y).abs() < 1e-12 * y.abs().max(1.0));
        }
        assert!(b.time_jet(&tape, t, 1).unwrap().ddx.is_none());
    }
    let wide = Mlp::<f64>::init(&[2, 3, 1], 0).unwrap();
    assert!(wide.bind(&tape).unwrap().time_jet(&tape, 0.0, 1).is_err());
}
