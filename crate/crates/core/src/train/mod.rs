//! Optimization loop: collocation sampling, Adam, early stopping and
//! per-epoch telemetry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::{AdError, Scalar, Tape};
use crate::losses::{AuxParam, CompositeLoss, LossError, PerceptionProblem};
use crate::network::{BoundMlp, Mlp, NetworkError};
use crate::Real;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    /// Training stopped on a non-finite value; `partial_csv` holds the
    /// telemetry recorded before the failure.
    #[error("epoch {epoch}: non-finite {term}")]
    NonFinite { epoch: usize, term: String, partial_csv: String },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CollocationStrategy {
    /// Evenly spaced, both endpoints included.
    #[default]
    UniformGrid,
    /// Independent uniform draws, sorted ascending.
    UniformRandom,
}

impl CollocationStrategy {
    pub fn name(self) -> &'static str {
        match self {
            CollocationStrategy::UniformGrid => "uniform-grid",
            CollocationStrategy::UniformRandom => "uniform-random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [CollocationStrategy::UniformGrid, CollocationStrategy::UniformRandom].into_iter().find(|c| c.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Collocation<F> {
    pub count: usize,
    pub lo: F,
    pub hi: F,
    pub strategy: CollocationStrategy,
}

impl<F: Real> Collocation<F> {
    pub fn grid(count: usize, lo: F, hi: F) -> Self {
        Collocation { count, lo, hi, strategy: CollocationStrategy::UniformGrid }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(TrainError::Config(format!("collocation domain [{}, {}] is empty", self.lo, self.hi)));
        }
        let min = if self.strategy == CollocationStrategy::UniformGrid { 2 } else { 1 };
        if self.count < min {
            return Err(TrainError::Config(format!("collocation count must be at least {min}")));
        }
        Ok(())
    }

    /// The collocation points; random draws depend only on `seed`.
    pub fn sample(&self, seed: u64) -> Result<Vec<F>, TrainError> {
        self.validate()?;
        let (lo, hi) = (self.lo, self.hi);
        Ok(match self.strategy {
            CollocationStrategy::UniformGrid => {
                let last = self.count - 1;
                let step = (hi - lo) / crate::lit(last as f64);
                (0..self.count).map(|i| if i == last { hi } else { lo + step * crate::lit(i as f64) }).collect()
            }
            CollocationStrategy::UniformRandom => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (l, h) = (crate::to_f64(lo), crate::to_f64(hi));
                let mut ts: Vec<f64> = (0..self.count).map(|_| rng.gen_range(l..=h)).collect();
                ts.sort_by(f64::total_cmp);
                ts.into_iter().map(crate::lit).collect()
            }
        })
    }
}

/// Training hyperparameters. Defaults: Adam with `lr = 1e-3`,
/// `β = (0.9, 0.999)`, a 101-point grid on `[0, 1]`, early stop below
/// `1e-6`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig<F> {
    pub epochs: usize,
    pub learning_rate: F,
    pub beta1: F,
    pub beta2: F,
    pub collocation: Collocation<F>,
    pub seed: u64,
    /// Training stops once the total loss drops below this.
    pub early_stop: F,
}

impl<F: Real> Default for TrainConfig<F> {
    fn default() -> Self {
        TrainConfig {
            epochs: 5000,
            learning_rate: crate::lit(1e-3),
            beta1: crate::lit(0.9),
            beta2: crate::lit(0.999),
            collocation: Collocation::grid(101, F::zero(), F::one()),
            seed: 0,
            early_stop: crate::lit(1e-6),
        }
    }
}

impl<F: Real> TrainConfig<F> {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > F::zero()) || !self.learning_rate.is_finite() {
            return Err(TrainError::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b >= F::zero() && b < F::one()) {
                return Err(TrainError::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.early_stop >= F::zero()) {
            return Err(TrainError::Config("early-stop tolerance must be nonnegative".into()));
        }
        self.collocation.validate()
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<F> {
    lr: F,
    beta1: F,
    beta2: F,
    eps: F,
    m: Vec<F>,
    v: Vec<F>,
    t: i32,
}

impl<F: Real> Adam<F> {
    pub fn new(n: usize, lr: F, beta1: F, beta2: F) -> Self {
        Adam { lr, beta1, beta2, eps: crate::lit(1e-8), m: vec![F::zero(); n], v: vec![F::zero(); n], t: 0 }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// One update of `params` against `grads` (same length as at
    /// construction).
    pub fn step(&mut self, params: &mut [F], grads: &[F]) {
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        assert_eq!(grads.len(), self.m.len(), "gradient count mismatch");
        self.t += 1;
        let one = F::one();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] = params[i] - self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// What [`fit`] minimizes.
pub trait Objective<F: Real> {
    fn validate(&self) -> Result<(), LossError> {
        Ok(())
    }
    fn term_names(&self) -> Vec<&'static str>;
    fn aux_params(&self) -> Vec<AuxParam<F>>;
    fn evaluate<'t>(
        &self,
        tape: &'t Tape<F>,
        net: &BoundMlp<'t, F>,
        aux: &[Scalar<'t, F>],
    ) -> Result<CompositeLoss<'t, F>, LossError>;
}

impl<F: Real> Objective<F> for PerceptionProblem<F> {
    fn validate(&self) -> Result<(), LossError> {
        PerceptionProblem::validate(self)
    }

    fn term_names(&self) -> Vec<&'static str> {
        PerceptionProblem::term_names(self)
    }

    fn aux_params(&self) -> Vec<AuxParam<F>> {
        PerceptionProblem::aux_params(self)
    }

    fn evaluate<'t>(
        &self,
        tape: &'t Tape<F>,
        net: &BoundMlp<'t, F>,
        aux: &[Scalar<'t, F>],
    ) -> Result<CompositeLoss<'t, F>, LossError> {
        PerceptionProblem::evaluate(self, tape, net, aux)
    }
}

/// One row per epoch: weighted term contributions, their total, and the
/// exposed auxiliary values (μ, α, unknown parameters) at that epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord<F> {
    pub epoch: usize,
    pub terms: Vec<F>,
    pub total: F,
    pub aux: Vec<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTelemetry<F> {
    pub term_names: Vec<String>,
    pub aux_names: Vec<String>,
    pub records: Vec<EpochRecord<F>>,
}

impl<F: Real> RunTelemetry<F> {
    pub fn new(term_names: Vec<String>, aux_names: Vec<String>) -> Self {
        RunTelemetry { term_names, aux_names, records: Vec::new() }
    }

    pub fn header(&self) -> String {
        let mut cols = vec!["epoch".to_string()];
        cols.extend(self.term_names.iter().cloned());
        cols.push("total".into());
        cols.extend(self.aux_names.iter().cloned());
        cols.join(",")
    }

    /// CSV with a header row; values in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = self.header();
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.epoch.to_string());
            for v in r.terms.iter().chain(std::iter::once(&r.total)).chain(&r.aux) {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
        out
    }

    /// Values of one column over all epochs.
    pub fn column(&self, name: &str) -> Option<Vec<F>> {
        if name == "total" {
            return Some(self.records.iter().map(|r| r.total).collect());
        }
        if let Some(i) = self.term_names.iter().position(|n| n == name) {
            return Some(self.records.iter().map(|r| r.terms[i]).collect());
        }
        let i = self.aux_names.iter().position(|n| n == name)?;
        Some(self.records.iter().map(|r| r.aux[i]).collect())
    }

    pub fn last(&self) -> Option<&EpochRecord<F>> {
        self.records.last()
    }
}

/// Result of a completed [`fit`].
#[derive(Clone, Debug)]
pub struct FitOutcome<F> {
    pub net: Mlp<F>,
    pub aux: Vec<AuxParam<F>>,
    pub telemetry: RunTelemetry<F>,
    pub stopped_early: bool,
}

impl<F: Real> FitOutcome<F> {
    /// Exposed value of a named auxiliary parameter.
    pub fn aux_value(&self, name: &str) -> Option<F> {
        self.aux.iter().find(|a| a.name == name).map(|a| a.pinned.unwrap_or_else(|| a.param.value_plain()))
    }
}

/// Minimizes `objective` over the network weights and the unpinned
/// auxiliary parameters with Adam.
pub fn fit<F: Real>(mut net: Mlp<F>, objective: &dyn Objective<F>, cfg: &TrainConfig<F>) -> Result<FitOutcome<F>, TrainError> {
    cfg.validate()?;
    objective.validate()?;
    let mut aux = objective.aux_params();
    let term_names: Vec<String> = objective.term_names().into_iter().map(String::from).collect();
    let mut telemetry = RunTelemetry::new(term_names.clone(), aux.iter().map(|a| a.name.clone()).collect());
    let free: Vec<usize> = (0..aux.len()).filter(|&i| aux[i].pinned.is_none()).collect();
    let n_weights = net.params().len();
    let mut adam = Adam::new(n_weights + free.len(), cfg.learning_rate, cfg.beta1, cfg.beta2);
    let mut flat: Vec<F> = net.params().to_vec();
    flat.extend(free.iter().map(|&i| aux[i].param.raw()));
    let mut tape = Tape::with_capacity(1 << 16);
    let mut stopped_early = false;

    for epoch in 0..cfg.epochs {
        tape.clear();
        let (record, grads) = {
            let bound = net.bind(&tape)?;
            let mut raws = Vec::with_capacity(free.len());
            let values: Vec<Scalar<'_, F>> = aux
                .iter()
                .map(|a| match a.pinned {
                    Some(v) => Ok(Scalar::constant(v)),
                    None => {
                        let raw = tape.var(a.param.raw())?;
                        raws.push(raw);
                        Ok(a.param.value(raw))
                    }
                })
                .collect::<Result<_, AdError>>()?;
            let diverged = |term: &str, telemetry: &RunTelemetry<F>| TrainError::NonFinite {
                epoch,
                term: term.to_string(),
                partial_csv: telemetry.to_csv(),
            };
            let loss = match objective.evaluate(&tape, &bound, &values) {
                Ok(l) => l,
                Err(LossError::BadTerm(name)) => return Err(diverged(&format!("loss term `{name}`"), &telemetry)),
                Err(e) => {
                    if let Some(ad) = tape.error() {
                        return Err(diverged(&format!("value ({ad})"), &telemetry));
                    }
                    return Err(e.into());
                }
            };
            debug_assert_eq!(loss.names(), objective.term_names());
            let total = loss.total();
            if let Some(bad) = loss.terms().iter().find(|t| !t.value.value().is_finite()) {
                return Err(diverged(&format!("loss term `{}`", bad.name), &telemetry));
            }
            if !total.value().is_finite() || tape.error().is_some() {
                return Err(diverged("total loss", &telemetry));
            }
            let mut inputs: Vec<Scalar<'_, F>> = bound.weights().to_vec();
            inputs.extend(raws);
            let grads = match tape.gradient(total, &inputs) {
                Ok(g) => g,
                Err(AdError::NonFinite { .. }) => return Err(diverged("gradient", &telemetry)),
                Err(e) => return Err(e.into()),
            };
            let record = EpochRecord {
                epoch,
                terms: loss.contributions(),
                total: total.value(),
                aux: values.iter().map(|v| v.value()).collect(),
            };
            (record, grads)
        };
        let total = record.total;
        telemetry.records.push(record);
        if total < cfg.early_stop {
            stopped_early = true;
            break;
        }
        adam.step(&mut flat, &grads);
        net.params_mut().copy_from_slice(&flat[..n_weights]);
        for (k, &i) in free.iter().enumerate() {
            aux[i].param.set_raw(flat[n_weights + k]);
        }
    }
    Ok(FitOutcome { net, aux, telemetry, stopped_early })
}

#[cfg(test)]
mod tests;
