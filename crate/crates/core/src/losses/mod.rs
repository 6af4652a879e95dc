//! Loss algebra: data, initial-condition and residual losses, the
//! possibility factor `M^(1−μ)`, sureness, and fuzzy-rule restriction
//! losses, combined per mode by [`Preset`].

mod ode;
mod presets;

pub use ode::{ImpreciseOde, Uncertain};
pub use presets::{AuxParam, PerceptionProblem, Preset};

use thiserror::Error;

use crate::autodiff::{AdError, Scalar};
use crate::fuzzy::{FuzzyError, RuleSet};
use crate::network::Jet;
use crate::Real;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum LossError {
    #[error("{0}: empty batch")]
    Empty(&'static str),
    #[error("{what}: {left} predictions vs {right} observations")]
    Length { what: &'static str, left: usize, right: usize },
    #[error("weight of `{name}` must be finite and nonnegative, got {weight}")]
    Weight { name: String, weight: f64 },
    #[error("penalty coefficient {name} = {value} out of range ({rule})")]
    Penalty { name: &'static str, value: f64, rule: &'static str },
    #[error("loss term `{0}` is negative or non-finite")]
    BadTerm(String),
    #[error("preset `{preset}` cannot be used here: {detail}")]
    Preset { preset: &'static str, detail: String },
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
}

fn mean<'t, F: Real>(items: &[Scalar<'t, F>], what: &'static str) -> Result<Scalar<'t, F>, LossError> {
    if items.is_empty() {
        return Err(LossError::Empty(what));
    }
    Ok(Scalar::sum(items.iter().copied()) / crate::lit::<F>(items.len() as f64))
}

/// `(1/N) Σ (x̂ᵢ − xᵢ)²`.
pub fn data_loss<'t, F: Real>(predictions: &[Scalar<'t, F>], observations: &[F]) -> Result<Scalar<'t, F>, LossError> {
    if predictions.len() != observations.len() {
        return Err(LossError::Length { what: "data", left: predictions.len(), right: observations.len() });
    }
    let sq: Vec<_> = predictions.iter().zip(observations).map(|(&p, &o)| (p - o).square()).collect();
    mean(&sq, "data")
}

/// `(x̂(t₀) − x₀)²`; the target may itself be differentiable (a granule).
pub fn ic_loss<'t, F: Real>(predicted: Scalar<'t, F>, target: Scalar<'t, F>) -> Scalar<'t, F> {
    (predicted - target).square()
}

/// Mean squared residual over precomputed jets.
pub fn residual_loss<'t, F: Real>(
    jets: &[Jet<'t, F>],
    residual: impl Fn(&Jet<'t, F>) -> Scalar<'t, F>,
) -> Result<Scalar<'t, F>, LossError> {
    let sq: Vec<_> = jets.iter().map(|j| residual(j).square()).collect();
    mean(&sq, "residual")
}

/// `M^(1−μ)`, written as `exp((1−μ) ln M)`.
pub fn possibility_factor<'t, F: Real>(mu: Scalar<'t, F>, m: F) -> Result<Scalar<'t, F>, LossError> {
    if !(m > F::one()) || !m.is_finite() {
        return Err(LossError::Penalty { name: "M", value: crate::to_f64(m), rule: "possibility factor needs M > 1" });
    }
    Ok(((Scalar::one() - mu) * m.ln()).exp())
}

/// `μ × likelihood`.
pub fn sureness<'t, F: Real>(mu: Scalar<'t, F>, likelihood: Scalar<'t, F>) -> Scalar<'t, F> {
    mu * likelihood
}

/// `(1 − s)²`.
pub fn sureness_loss<'t, F: Real>(s: Scalar<'t, F>) -> Scalar<'t, F> {
    (Scalar::one() - s).square()
}

fn check_rule_penalty<F: Real>(m: F) -> Result<(), LossError> {
    if m >= F::one() && m.is_finite() {
        Ok(())
    } else {
        Err(LossError::Penalty { name: "M", value: crate::to_f64(m), rule: "rule penalty needs M ≥ 1" })
    }
}

/// `M(1 − R(inputs, output))²`, in `[0, M]`.
pub fn rule_loss<'t, F: Real>(
    rules: &RuleSet<F>,
    inputs: &[Scalar<'t, F>],
    output: Scalar<'t, F>,
    m: F,
) -> Result<Scalar<'t, F>, LossError> {
    check_rule_penalty(m)?;
    let r = rules.restriction_scalar(inputs, output)?;
    Ok((Scalar::one() - r).square() * m)
}

/// Rule loss with the time derivative `dx̂/dt` as output, averaged over
/// jets.
pub fn derivative_rule_loss<'t, F: Real>(rules: &RuleSet<F>, jets: &[Jet<'t, F>], m: F) -> Result<Scalar<'t, F>, LossError> {
    let terms = jets.iter().map(|j| rule_loss(rules, &[j.t], j.dx, m)).collect::<Result<Vec<_>, _>>()?;
    mean(&terms, "derivative rule")
}

/// A named, weighted, nonnegative penalty.
#[derive(Clone, Copy, Debug)]
pub struct LossTerm<'t, F: Real> {
    pub name: &'static str,
    pub weight: F,
    pub value: Scalar<'t, F>,
}

impl<'t, F: Real> LossTerm<'t, F> {
    /// `weight · value`; exactly zero when the weight is zero.
    pub fn contribution(&self) -> Scalar<'t, F> {
        if self.weight == F::zero() {
            Scalar::zero()
        } else {
            self.value * self.weight
        }
    }
}

/// Weighted sum of loss terms.
#[derive(Clone, Debug, Default)]
pub struct CompositeLoss<'t, F: Real> {
    terms: Vec<LossTerm<'t, F>>,
}

impl<'t, F: Real> CompositeLoss<'t, F> {
    pub fn new() -> Self {
        CompositeLoss { terms: Vec::new() }
    }

    pub fn push(&mut self, name: &'static str, weight: F, value: Scalar<'t, F>) -> Result<(), LossError> {
        if !(weight >= F::zero()) || !weight.is_finite() {
            return Err(LossError::Weight { name: name.to_string(), weight: crate::to_f64(weight) });
        }
        let v = value.value();
        if !(v >= F::zero()) || !v.is_finite() {
            return Err(LossError::BadTerm(name.to_string()));
        }
        self.terms.push(LossTerm { name, weight, value });
        Ok(())
    }

    pub fn terms(&self) -> &[LossTerm<'t, F>] {
        &self.terms
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.terms.iter().map(|t| t.name).collect()
    }

    pub fn get(&self, name: &str) -> Option<&LossTerm<'t, F>> {
        self.terms.iter().find(|t| t.name == name)
    }

    /// `Σ weightᵢ·valueᵢ`, skipping zero weights.
    pub fn total(&self) -> Scalar<'t, F> {
        Scalar::sum(self.terms.iter().filter(|t| t.weight != F::zero()).map(|t| t.contribution()))
    }

    /// Weighted contributions in term order; these sum to `total`.
    pub fn contributions(&self) -> Vec<F> {
        self.terms.iter().map(|t| t.contribution().value()).collect()
    }
}
