//! Closed-loop simulation with a rule-trained network as the controller.
//!
//! The network sees the normalized error and its backward-difference
//! derivative, proposes a normalized control, and is updated online with
//! one Adam step per control step on `M(1 − R(e, ė, u))²`. No pre-training.

use std::fmt::Write as _;

use thiserror::Error;

use crate::autodiff::{AdError, Scalar, Tape};
use crate::fuzzy::{FuzzyError, MembershipFunction, Rule, RuleSet, SNorm, TNorm};
use crate::losses::{rule_loss, LossError};
use crate::network::{Mlp, NetworkError};
use crate::train::Adam;
use crate::Real;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ControlError {
    #[error("invalid loop configuration: {0}")]
    Config(String),
    #[error("plant diverged at step {step}: output {value} exceeds bound {bound}")]
    Diverged { step: usize, value: f64, bound: f64 },
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PlantKind<F> {
    /// `τẏ = −y + K·u`.
    FirstOrder { gain: F, tau: F },
    /// `ÿ + 2ζωẏ + ω²y = ω²u` (unit static gain).
    SecondOrder { omega: F, zeta: F },
}

/// A plant advanced by `substeps` RK4 steps per control interval `dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct Plant<F> {
    kind: PlantKind<F>,
    state: [F; 2],
    dt: F,
    substeps: usize,
}

impl<F: Real> Plant<F> {
    pub fn new(kind: PlantKind<F>, dt: F, y0: F) -> Result<Self, ControlError> {
        if !(dt > F::zero()) || !dt.is_finite() {
            return Err(ControlError::Config(format!("dt must be positive, got {dt}")));
        }
        let ok = match kind {
            PlantKind::FirstOrder { gain, tau } => gain.is_finite() && tau > F::zero() && tau.is_finite(),
            PlantKind::SecondOrder { omega, zeta } => omega > F::zero() && omega.is_finite() && zeta >= F::zero() && zeta.is_finite(),
        };
        if !ok {
            return Err(ControlError::Config(format!("invalid plant parameters {kind:?}")));
        }
        Ok(Plant { kind, state: [y0, F::zero()], dt, substeps: 10 })
    }

    pub fn kind(&self) -> PlantKind<F> {
        self.kind
    }

    pub fn dt(&self) -> F {
        self.dt
    }

    pub fn output(&self) -> F {
        self.state[0]
    }

    fn rhs(&self, s: [F; 2], u: F) -> [F; 2] {
        match self.kind {
            PlantKind::FirstOrder { gain, tau } => [(gain * u - s[0]) / tau, F::zero()],
            PlantKind::SecondOrder { omega, zeta } => {
                let two: F = crate::lit(2.0);
                [s[1], omega * omega * (u - s[0]) - two * zeta * omega * s[1]]
            }
        }
    }

    /// Holds `u` constant over one control interval.
    pub fn advance(&mut self, u: F) {
        let h = self.dt / crate::lit::<F>(self.substeps as f64);
        let half: F = crate::lit(0.5);
        let two: F = crate::lit(2.0);
        let six: F = crate::lit(6.0);
        let add = |a: [F; 2], k: [F; 2], w: F| [a[0] + k[0] * w, a[1] + k[1] * w];
        for _ in 0..self.substeps {
            let s = self.state;
            let k1 = self.rhs(s, u);
            let k2 = self.rhs(add(s, k1, half * h), u);
            let k3 = self.rhs(add(s, k2, half * h), u);
            let k4 = self.rhs(add(s, k3, h), u);
            for i in 0..2 {
                self.state[i] = s[i] + h / six * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
            }
        }
    }
}

/// Negative, zero and positive sets on `[−1, 1]`, indexed `-1, 0, 1`.
pub fn three_level<F: Real>(level: i32) -> MembershipFunction<F> {
    let (one, zero) = (F::one(), F::zero());
    let m = match level {
        -1 => MembershipFunction::triangular(-one, -one, zero),
        0 => MembershipFunction::triangular(-one, zero, one),
        1 => MembershipFunction::triangular(zero, one, one),
        _ => panic!("three-level language has levels -1, 0, 1"),
    };
    m.expect("constant memberships are valid")
}

/// Output sets with the same cores as [`three_level`] but spanning the
/// whole universe, so `1 − R` has a nonzero slope in `u` wherever a rule
/// fires and its consequent is not yet met.
pub fn three_level_output<F: Real>(level: i32) -> MembershipFunction<F> {
    let (one, zero) = (F::one(), F::zero());
    let m = match level {
        -1 => MembershipFunction::triangular(-one, -one, one),
        0 => MembershipFunction::triangular(-one, zero, one),
        1 => MembershipFunction::triangular(-one, one, one),
        _ => panic!("three-level language has levels -1, 0, 1"),
    };
    m.expect("constant memberships are valid")
}

/// The 3×3 PD table: `u = clamp(level(e) + level(ė), −1, 1)`, evaluated
/// with min/max. Antisymmetric: `R(e, ė, u) = R(−e, −ė, −u)`.
pub fn rule_table<F: Real>() -> RuleSet<F> {
    let mut rules = Vec::with_capacity(9);
    for e in -1..=1 {
        for de in -1..=1 {
            let u = (e + de).clamp(-1, 1);
            rules.push(Rule::new(vec![three_level(e), three_level(de)], three_level_output(u)));
        }
    }
    RuleSet::new(rules, TNorm::Min, SNorm::Max).expect("table rules share arity")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Reference<F> {
    Step { amplitude: F },
    Sine { frequency: F, amplitude: F },
    Ramp { slope: F },
}

impl<F: Real> Reference<F> {
    pub fn value(&self, t: F) -> F {
        match *self {
            Reference::Step { amplitude } => amplitude,
            Reference::Sine { frequency, amplitude } => amplitude * (F::TAU() * frequency * t).sin(),
            Reference::Ramp { slope } => slope * t,
        }
    }

    pub fn negated(&self) -> Self {
        match *self {
            Reference::Step { amplitude } => Reference::Step { amplitude: -amplitude },
            Reference::Sine { frequency, amplitude } => Reference::Sine { frequency, amplitude: -amplitude },
            Reference::Ramp { slope } => Reference::Ramp { slope: -slope },
        }
    }
}

/// Closed-loop settings. Defaults: first-order plant `K = 1`, `τ = 1`,
/// `Δt = 0.01`, 2000 steps, unit step reference.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopConfig<F> {
    pub plant: PlantKind<F>,
    pub dt: F,
    pub steps: usize,
    pub reference: Reference<F>,
    pub y0: F,
    /// Scaling of `e` onto the `[−1, 1]` universe.
    pub error_gain: F,
    /// Scaling of `ė` onto the `[−1, 1]` universe.
    pub derivative_gain: F,
    /// Physical control per unit of normalized control.
    pub control_gain: F,
    /// Rule penalty `M ≥ 1`.
    pub penalty: F,
    pub hidden: Vec<usize>,
    pub learning_rate: F,
    pub beta1: F,
    pub beta2: F,
    /// Gradient steps on each control sample.
    pub updates_per_step: usize,
    pub seed: u64,
    /// `|y|` beyond which the run aborts.
    pub divergence_bound: F,
}

impl<F: Real> Default for LoopConfig<F> {
    fn default() -> Self {
        LoopConfig {
            plant: PlantKind::FirstOrder { gain: F::one(), tau: F::one() },
            dt: crate::lit(0.01),
            steps: 2000,
            reference: Reference::Step { amplitude: F::one() },
            y0: F::zero(),
            error_gain: crate::lit(10.0),
            derivative_gain: crate::lit(1.0),
            control_gain: crate::lit(2.0),
            penalty: crate::lit(5.0),
            hidden: vec![16, 16],
            learning_rate: crate::lit(1e-2),
            beta1: crate::lit(0.9),
            beta2: crate::lit(0.999),
            updates_per_step: 1,
            seed: 0,
            divergence_bound: crate::lit(1e6),
        }
    }
}

impl<F: Real> LoopConfig<F> {
    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: String| Err(ControlError::Config(m));
        if self.steps == 0 {
            return bad("horizon must be at least one step".into());
        }
        if self.updates_per_step == 0 {
            return bad("updates_per_step must be at least 1".into());
        }
        for (name, g) in [("error_gain", self.error_gain), ("derivative_gain", self.derivative_gain), ("control_gain", self.control_gain)] {
            if !(g > F::zero()) || !g.is_finite() {
                return bad(format!("{name} must be positive, got {g}"));
            }
        }
        if !(self.penalty >= F::one()) || !self.penalty.is_finite() {
            return bad(format!("penalty must be at least 1, got {}", self.penalty));
        }
        if !(self.learning_rate > F::zero()) || !(self.beta1 >= F::zero() && self.beta1 < F::one()) || !(self.beta2 >= F::zero() && self.beta2 < F::one()) {
            return bad("optimizer settings out of range".into());
        }
        if !(self.divergence_bound > F::zero()) {
            return bad("divergence bound must be positive".into());
        }
        Plant::new(self.plant, self.dt, self.y0).map(|_| ())
    }

    /// Controller widths: 2 inputs, the hidden layers, 1 output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![2];
        w.extend(&self.hidden);
        w.push(1);
        w
    }
}

/// One control step. `error == reference − output` exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopRecord<F> {
    pub time: F,
    pub reference: F,
    pub output: F,
    pub error: F,
    pub derror: F,
    pub control: F,
    /// `M(1 − R)²` at the applied control, before the update.
    pub rule_loss: F,
}

pub fn records_csv<F: Real>(records: &[LoopRecord<F>]) -> String {
    let mut out = String::from("time,reference,output,error,derror,control,rule_loss\n");
    for r in records {
        let _ = writeln!(
            out,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            r.time, r.reference, r.output, r.error, r.derror, r.control, r.rule_loss
        );
    }
    out
}

/// Mean `|e|` over the last `fraction` of the records.
pub fn tail_mean_abs_error<F: Real>(records: &[LoopRecord<F>], fraction: F) -> F {
    let n = records.len();
    let k = (crate::lit::<F>(n as f64) * fraction).ceil().to_usize().unwrap_or(n).clamp(1, n.max(1));
    let tail = &records[n - k..];
    tail.iter().map(|r| r.error.abs()).fold(F::zero(), |a, b| a + b) / crate::lit(tail.len() as f64)
}

#[derive(Clone, Debug)]
pub struct LoopOutcome<F> {
    pub records: Vec<LoopRecord<F>>,
    pub controller: Mlp<F>,
}

/// Steps the loop, asking `control` for `(u, L_R)` given `(e, ė)`.
fn simulate<F: Real>(
    cfg: &LoopConfig<F>,
    mut control: impl FnMut(F, F) -> Result<(F, F), ControlError>,
) -> Result<Vec<LoopRecord<F>>, ControlError> {
    let mut plant = Plant::new(cfg.plant, cfg.dt, cfg.y0)?;
    let mut records = Vec::with_capacity(cfg.steps);
    let mut prev_error = None;
    for step in 0..cfg.steps {
        let time = cfg.dt * crate::lit::<F>(step as f64);
        let reference = cfg.reference.value(time);
        let output = plant.output();
        let error = reference - output;
        let derror = prev_error.map_or(F::zero(), |p| (error - p) / cfg.dt);
        prev_error = Some(error);
        let (u, rule_loss) = control(error, derror)?;
        records.push(LoopRecord { time, reference, output, error, derror, control: u, rule_loss });
        plant.advance(u);
        let y = plant.output();
        if !y.is_finite() || y.abs() > cfg.divergence_bound {
            return Err(ControlError::Diverged {
                step,
                value: crate::to_f64(y),
                bound: crate::to_f64(cfg.divergence_bound),
            });
        }
    }
    Ok(records)
}

/// The loop with `u ≡ 0`; `rule_loss` is reported as 0.
pub fn run_baseline<F: Real>(cfg: &LoopConfig<F>) -> Result<Vec<LoopRecord<F>>, ControlError> {
    cfg.validate()?;
    simulate(cfg, |_, _| Ok((F::zero(), F::zero())))
}

/// Runs the loop with a freshly initialized controller trained online
/// against `rules` (arity 2: normalized `e`, `ė`).
pub fn run_closed_loop<F: Real>(cfg: &LoopConfig<F>, rules: &RuleSet<F>) -> Result<LoopOutcome<F>, ControlError> {
    cfg.validate()?;
    if rules.arity() != 2 {
        return Err(ControlError::Config(format!("controller rules need 2 inputs, got {}", rules.arity())));
    }
    let mut net = Mlp::init(&cfg.widths(), cfg.seed)?;
    let mut adam = Adam::new(net.params().len(), cfg.learning_rate, cfg.beta1, cfg.beta2);
    let mut tape = Tape::with_capacity(4096);
    let one = F::one();
    let records = simulate(cfg, |error, derror| {
        let e_n = (error * cfg.error_gain).max(-one).min(one);
        let de_n = (derror * cfg.derivative_gain).max(-one).min(one);
        let mut applied = None;
        for _ in 0..cfg.updates_per_step {
            tape.clear();
            let (u_n, loss, grads) = {
                let bound = net.bind(&tape)?;
                let inputs = [Scalar::constant(e_n), Scalar::constant(de_n)];
                let u_n = bound.forward(&inputs)?[0].tanh();
                let loss = rule_loss(rules, &inputs, u_n, cfg.penalty)?;
                let grads = tape.gradient(loss, bound.weights())?;
                (u_n.value(), loss.value(), grads)
            };
            applied.get_or_insert((u_n * cfg.control_gain, loss));
            adam.step(net.params_mut(), &grads);
        }
        Ok(applied.expect("at least one update per step"))
    })?;
    Ok(LoopOutcome { records, controller: net })
}
