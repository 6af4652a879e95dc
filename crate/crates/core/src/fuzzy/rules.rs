use super::{FuzzyError, MembershipFunction};
use crate::autodiff::Scalar;
use crate::Real;

/// Conjunction used inside a rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TNorm {
    #[default]
    Min,
    Product,
}

/// Disjunction used across rules. `BoundedSum` is `min(1, Σ)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SNorm {
    #[default]
    Max,
    BoundedSum,
}

impl TNorm {
    pub fn apply<F: Real>(self, a: F, b: F) -> F {
        match self {
            TNorm::Min => a.min(b),
            TNorm::Product => a * b,
        }
    }

    pub fn apply_scalar<'t, F: Real>(self, a: Scalar<'t, F>, b: Scalar<'t, F>) -> Scalar<'t, F> {
        match self {
            TNorm::Min => a.min(b),
            TNorm::Product => a * b,
        }
    }
}

impl SNorm {
    pub fn apply<F: Real>(self, a: F, b: F) -> F {
        match self {
            SNorm::Max => a.max(b),
            SNorm::BoundedSum => (a + b).min(F::one()),
        }
    }

    pub fn apply_scalar<'t, F: Real>(self, a: Scalar<'t, F>, b: Scalar<'t, F>) -> Scalar<'t, F> {
        match self {
            SNorm::Max => a.max(b),
            SNorm::BoundedSum => (a + b).min(Scalar::one()),
        }
    }
}

/// `if x₁ is A₁ and … and xₙ is Aₙ then y is B`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule<F> {
    pub antecedents: Vec<MembershipFunction<F>>,
    pub consequent: MembershipFunction<F>,
}

impl<F: Real> Rule<F> {
    pub fn new(antecedents: Vec<MembershipFunction<F>>, consequent: MembershipFunction<F>) -> Self {
        Rule { antecedents, consequent }
    }

    pub fn arity(&self) -> usize {
        self.antecedents.len()
    }
}

/// A fuzzy graph: the disjunction of the rules' Cartesian products.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleSet<F> {
    rules: Vec<Rule<F>>,
    tnorm: TNorm,
    snorm: SNorm,
}

impl<F: Real> RuleSet<F> {
    pub fn new(rules: Vec<Rule<F>>, tnorm: TNorm, snorm: SNorm) -> Result<Self, FuzzyError> {
        let first = rules.first().ok_or(FuzzyError::EmptyRuleSet)?;
        let arity = first.arity();
        if let Some(bad) = rules.iter().find(|r| r.arity() != arity) {
            return Err(FuzzyError::Arity { expected: arity, got: bad.arity() });
        }
        Ok(RuleSet { rules, tnorm, snorm })
    }

    pub fn rules(&self) -> &[Rule<F>] {
        &self.rules
    }

    pub fn tnorm(&self) -> TNorm {
        self.tnorm
    }

    pub fn snorm(&self) -> SNorm {
        self.snorm
    }

    /// Number of input variables per rule.
    pub fn arity(&self) -> usize {
        self.rules[0].arity()
    }

    fn check_arity(&self, got: usize) -> Result<(), FuzzyError> {
        if got == self.arity() {
            Ok(())
        } else {
            Err(FuzzyError::Arity { expected: self.arity(), got })
        }
    }

    /// Restriction `R(inputs, output) ∈ [0, 1]`.
    pub fn restriction(&self, inputs: &[F], output: F) -> Result<F, FuzzyError> {
        self.check_arity(inputs.len())?;
        let mut acc: Option<F> = None;
        for rule in &self.rules {
            let fire = rule
                .antecedents
                .iter()
                .zip(inputs)
                .map(|(m, &x)| m.eval(x))
                .chain(std::iter::once(rule.consequent.eval(output)))
                .reduce(|a, b| self.tnorm.apply(a, b))
                .expect("consequent always present");
            acc = Some(match acc {
                None => fire,
                Some(prev) => self.snorm.apply(prev, fire),
            });
        }
        Ok(acc.expect("non-empty rule set"))
    }

    /// Differentiable restriction. Inputs and output may be constants or
    /// recorded values.
    pub fn restriction_scalar<'t>(&self, inputs: &[Scalar<'t, F>], output: Scalar<'t, F>) -> Result<Scalar<'t, F>, FuzzyError> {
        self.check_arity(inputs.len())?;
        let mut acc: Option<Scalar<'t, F>> = None;
        for rule in &self.rules {
            let fire = rule
                .antecedents
                .iter()
                .zip(inputs)
                .map(|(m, &x)| m.eval_scalar(x))
                .chain(std::iter::once(rule.consequent.eval_scalar(output)))
                .reduce(|a, b| self.tnorm.apply_scalar(a, b))
                .expect("consequent always present");
            acc = Some(match acc {
                None => fire,
                Some(prev) => self.snorm.apply_scalar(prev, fire),
            });
        }
        Ok(acc.expect("non-empty rule set"))
    }
}
