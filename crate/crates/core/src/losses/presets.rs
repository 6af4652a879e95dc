use std::fmt;
use std::str::FromStr;

use super::{data_loss, derivative_rule_loss, possibility_factor, residual_loss, rule_loss, sureness, sureness_loss};
use super::{CompositeLoss, ImpreciseOde, LossError, Uncertain};
use crate::autodiff::{Scalar, Tape};
use crate::fuzzy::RuleSet;
use crate::network::{ConstrainedParam, Jet, Trial};
use crate::prob::zero_residual_likelihood;
use crate::Real;

/// Mode preset: which terms make up the total loss.
///
/// | preset | total |
/// |---|---|
/// | `singular` | `L_d + L_h + L_g` |
/// | `possibility` | `L_d + φ_h·L_h + M^(1−μ)·L_g(H(g))`, `φ_h = M^(1−μ)` iff the IC is fuzzy, else 1 |
/// | `probability` | `L_d + L_h + mean(1 − N_gᵢ)²` |
/// | `sureness` | possibility + `(1 − μ·mean N_gᵢ)²` |
/// | `sureness-pointwise` | possibility + `mean(1 − μ·N_gᵢ)²` |
/// | `finn` | `L_d + mean M(1 − R(tᵢ, x̂ᵢ))²` |
/// | `finn-derivative` | `L_d + mean M(1 − R(tᵢ, dx̂ᵢ/dt))²` |
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    Singular,
    Possibility,
    Probability,
    Sureness,
    SurenessPointwise,
    Finn,
    FinnDerivative,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Singular,
        Preset::Possibility,
        Preset::Probability,
        Preset::Sureness,
        Preset::SurenessPointwise,
        Preset::Finn,
        Preset::FinnDerivative,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Singular => "singular",
            Preset::Possibility => "possibility",
            Preset::Probability => "probability",
            Preset::Sureness => "sureness",
            Preset::SurenessPointwise => "sureness-pointwise",
            Preset::Finn => "finn",
            Preset::FinnDerivative => "finn-derivative",
        }
    }

    /// Whether the preset learns a membership level `μ`.
    pub fn uses_mu(self) -> bool {
        matches!(self, Preset::Possibility | Preset::Sureness | Preset::SurenessPointwise)
    }

    fn uses_likelihood(self) -> bool {
        matches!(self, Preset::Probability | Preset::Sureness | Preset::SurenessPointwise)
    }

    fn is_rule_based(self) -> bool {
        matches!(self, Preset::Finn | Preset::FinnDerivative)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
            format!("unknown preset `{s}` (expected one of {})", names.join(", "))
        })
    }
}

/// A learnable auxiliary quantity (μ, an α, or an unknown parameter).
#[derive(Clone, Debug, PartialEq)]
pub struct AuxParam<F> {
    pub name: String,
    pub param: ConstrainedParam<F>,
    /// Fixed value; the parameter is then not trained.
    pub pinned: Option<F>,
}

/// Everything a preset needs to build its total loss.
#[derive(Clone, Debug)]
pub struct PerceptionProblem<F: Real> {
    pub preset: Preset,
    pub ode: Option<ImpreciseOde<F>>,
    pub rules: Option<RuleSet<F>>,
    pub t0: F,
    pub collocation: Vec<F>,
    /// `(tᵢ, xᵢ)` observations; empty means no data term.
    pub data: Vec<(F, F)>,
    /// `M` of the possibility factor, `> 1`.
    pub possibility_m: F,
    /// `M` of the rule penalty, `≥ 1`.
    pub rule_m: F,
    pub pin_mu: Option<F>,
    /// Pinned α values by parameter name.
    pub pin_alpha: Vec<(String, F)>,
    /// Per-term weight overrides; unlisted terms weigh 1.
    pub weights: Vec<(String, F)>,
}

impl<F: Real> PerceptionProblem<F> {
    pub fn new(preset: Preset, collocation: Vec<F>) -> Self {
        PerceptionProblem {
            preset,
            ode: None,
            rules: None,
            t0: F::zero(),
            collocation,
            data: Vec::new(),
            possibility_m: crate::lit(10.0),
            rule_m: crate::lit(5.0),
            pin_mu: None,
            pin_alpha: Vec::new(),
            weights: Vec::new(),
        }
    }

    fn bad(&self, detail: impl Into<String>) -> LossError {
        LossError::Preset { preset: self.preset.name(), detail: detail.into() }
    }

    fn ode(&self) -> Result<&ImpreciseOde<F>, LossError> {
        self.ode.as_ref().ok_or_else(|| self.bad("an ODE is required"))
    }

    fn rules(&self) -> Result<&RuleSet<F>, LossError> {
        let rules = self.rules.as_ref().ok_or_else(|| self.bad("a rule set is required"))?;
        if rules.arity() != 1 {
            return Err(self.bad(format!("rules must have one input (time), got {}", rules.arity())));
        }
        Ok(rules)
    }

    /// Checks that the preset's ingredients are present and consistent.
    pub fn validate(&self) -> Result<(), LossError> {
        if self.collocation.is_empty() {
            return Err(LossError::Empty("collocation"));
        }
        if self.preset.is_rule_based() {
            self.rules()?;
            if !(self.rule_m >= F::one()) {
                return Err(LossError::Penalty { name: "M", value: crate::to_f64(self.rule_m), rule: "rule penalty needs M ≥ 1" });
            }
            return Ok(());
        }
        let ode = self.ode()?;
        let params = ode.params();
        if self.preset.uses_mu() {
            if !params.iter().any(|(_, u)| u.fuzzy().is_some()) {
                return Err(self.bad("needs at least one fuzzy parameter"));
            }
            possibility_factor(Scalar::one(), self.possibility_m)?;
        }
        if self.preset.uses_likelihood() && params[0].1.random().is_none() {
            return Err(self.bad(format!("the residual parameter `{}` must carry a normal distribution", params[0].0)));
        }
        if let Some((name, _)) = params[1..].iter().find(|(_, u)| matches!(u, Uncertain::Random(_))) {
            return Err(self.bad(format!("random initial condition `{name}` is not supported")));
        }
        if let Some(mu) = self.pin_mu {
            if !(mu >= F::zero() && mu <= F::one()) {
                return Err(self.bad("pinned mu must lie in [0, 1]"));
            }
        }
        for (name, a) in &self.pin_alpha {
            if !(*a >= F::zero() && *a <= F::one()) {
                return Err(self.bad(format!("pinned alpha_{name} must lie in [0, 1]")));
            }
            if !params.iter().any(|(n, u)| n == name && u.fuzzy().is_some()) {
                return Err(self.bad(format!("alpha pinned for `{name}`, which is not fuzzy")));
            }
        }
        Ok(())
    }

    /// Auxiliary parameters in evaluation order: `mu`, then `alpha_<p>` for
    /// every fuzzy `p`, then every unknown parameter.
    pub fn aux_params(&self) -> Vec<AuxParam<F>> {
        let half = crate::lit(0.5);
        let unit = || ConstrainedParam::bounded(F::zero(), F::one(), half).expect("valid unit interval");
        let mut out = Vec::new();
        let Some(ode) = self.ode.as_ref().filter(|_| !self.preset.is_rule_based()) else {
            return out;
        };
        if self.preset.uses_mu() {
            out.push(AuxParam { name: "mu".into(), param: unit(), pinned: self.pin_mu });
            for (name, u) in ode.params() {
                if u.fuzzy().is_some() {
                    let pinned = self.pin_alpha.iter().find(|(n, _)| n == name).map(|&(_, a)| a);
                    out.push(AuxParam { name: format!("alpha_{name}"), param: unit(), pinned });
                }
            }
        }
        for (name, u) in ode.params() {
            if let Uncertain::Unknown(guess) = u {
                out.push(AuxParam { name: name.into(), param: ConstrainedParam::free(guess), pinned: None });
            }
        }
        out
    }

    fn weight(&self, name: &str) -> F {
        self.weights.iter().find(|(n, _)| n == name).map_or(F::one(), |&(_, w)| w)
    }

    /// Term names `evaluate` produces, in order.
    pub fn term_names(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        if !self.data.is_empty() {
            names.push("data");
        }
        if self.preset.is_rule_based() {
            names.push("rule");
            return names;
        }
        if let Some(ode) = &self.ode {
            names.push("ic");
            if ode.order() == 2 {
                names.push("ic_velocity");
            }
        }
        match self.preset {
            Preset::Probability => names.push("likelihood"),
            Preset::Sureness | Preset::SurenessPointwise => names.extend(["residual", "sureness"]),
            _ => names.push("residual"),
        }
        names
    }

    /// Builds the total loss for `trial`. `aux` holds the exposed values of
    /// [`PerceptionProblem::aux_params`], in the same order.
    pub fn evaluate<'t>(
        &self,
        tape: &'t Tape<F>,
        trial: &dyn Trial<'t, F>,
        aux: &[Scalar<'t, F>],
    ) -> Result<CompositeLoss<'t, F>, LossError> {
        let mut loss = CompositeLoss::new();
        if !self.data.is_empty() {
            let preds: Vec<_> = self.data.iter().map(|&(t, _)| trial.value_at(t)).collect();
            let obs: Vec<_> = self.data.iter().map(|&(_, x)| x).collect();
            loss.push("data", self.weight("data"), data_loss(&preds, &obs)?)?;
        }
        match self.preset {
            Preset::Finn => {
                let rules = self.rules()?;
                let terms = self
                    .collocation
                    .iter()
                    .map(|&t| rule_loss(rules, &[Scalar::constant(t)], trial.value_at(t), self.rule_m))
                    .collect::<Result<Vec<_>, _>>()?;
                loss.push("rule", self.weight("rule"), super::mean(&terms, "rule")?)?;
            }
            Preset::FinnDerivative => {
                let rules = self.rules()?;
                let jets = self.jets(tape, trial, 1)?;
                loss.push("rule", self.weight("rule"), derivative_rule_loss(rules, &jets, self.rule_m)?)?;
            }
            _ => self.ode_terms(tape, trial, aux, &mut loss)?,
        }
        Ok(loss)
    }

    fn jets<'t>(&self, tape: &'t Tape<F>, trial: &dyn Trial<'t, F>, order: usize) -> Result<Vec<Jet<'t, F>>, LossError> {
        Ok(self.collocation.iter().map(|&t| trial.jet_at(tape, t, order)).collect::<Result<Vec<_>, _>>()?)
    }

    fn ode_terms<'t>(
        &self,
        tape: &'t Tape<F>,
        trial: &dyn Trial<'t, F>,
        aux: &[Scalar<'t, F>],
        loss: &mut CompositeLoss<'t, F>,
    ) -> Result<(), LossError> {
        let ode = self.ode()?;
        let params = ode.params();
        let names: Vec<String> = self.aux_params().into_iter().map(|a| a.name).collect();
        if names.len() != aux.len() {
            return Err(self.bad(format!("expected {} auxiliary values, got {}", names.len(), aux.len())));
        }
        let aux_value = |name: &str| names.iter().position(|n| n == name).map(|i| aux[i]);
        let mu = aux_value("mu");

        // Parameter values as the preset sees them.
        let values: Vec<Scalar<'t, F>> = params
            .iter()
            .map(|(name, u)| match (u, mu) {
                (Uncertain::Unknown(_), _) => aux_value(name).expect("unknown parameter registered"),
                (Uncertain::Fuzzy(n) | Uncertain::Z(n, _), Some(mu)) => {
                    n.hmf_scalar(mu, aux_value(&format!("alpha_{name}")).expect("alpha registered"))
                }
                _ => Scalar::constant(u.modal()),
            })
            .collect();
        let factor = match mu {
            Some(mu) => Some(possibility_factor(mu, self.possibility_m)?),
            None => None,
        };

        let jet0 = trial.jet_at(tape, self.t0, 1)?;
        for ((name, value), (_, u)) in ode.ic_terms(&jet0, &values[1..]).into_iter().zip(&params[1..]) {
            let value = match factor {
                Some(f) if u.fuzzy().is_some() => f * value,
                _ => value,
            };
            loss.push(name, self.weight(name), value)?;
        }

        let jets = self.jets(tape, trial, ode.order())?;
        if self.preset != Preset::Probability {
            let lg = residual_loss(&jets, |j| ode.residual(j, values[0]))?;
            let lg = factor.map_or(lg, |f| f * lg);
            loss.push("residual", self.weight("residual"), lg)?;
        }
        if self.preset.uses_likelihood() {
            let base = params[0].1.random().expect("validated");
            let likelihoods: Vec<_> = jets
                .iter()
                .map(|j| {
                    let offset = ode.residual(j, Scalar::zero());
                    let slope = ode.residual(j, Scalar::one()) - offset;
                    zero_residual_likelihood(base, offset, slope)
                })
                .collect();
            match self.preset {
                Preset::Probability => {
                    let sq: Vec<_> = likelihoods.iter().map(|&n| (Scalar::one() - n).square()).collect();
                    loss.push("likelihood", self.weight("likelihood"), super::mean(&sq, "likelihood")?)?;
                }
                Preset::Sureness => {
                    let mu = mu.expect("validated");
                    let s = sureness(mu, super::mean(&likelihoods, "likelihood")?);
                    loss.push("sureness", self.weight("sureness"), sureness_loss(s))?;
                }
                _ => {
                    let mu = mu.expect("validated");
                    let sq: Vec<_> = likelihoods.iter().map(|&n| sureness_loss(sureness(mu, n))).collect();
                    loss.push("sureness", self.weight("sureness"), super::mean(&sq, "sureness")?)?;
                }
            }
        }
        Ok(())
    }
}
