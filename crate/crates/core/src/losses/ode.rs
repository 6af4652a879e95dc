use crate::autodiff::Scalar;
use crate::fuzzy::TriangularFuzzyNumber;
use crate::network::Jet;
use crate::prob::Normal;
use crate::Real;

/// How an ODE parameter is precisiated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Uncertain<F> {
    Crisp(F),
    /// Possibility distribution.
    Fuzzy(TriangularFuzzyNumber<F>),
    /// Probability distribution.
    Random(Normal<F>),
    /// Paired possibility and probability (a Z-number).
    Z(TriangularFuzzyNumber<F>, Normal<F>),
    /// Learned from data, starting at the given guess.
    Unknown(F),
}

impl<F: Real> Uncertain<F> {
    /// The single most representative value: `b` for fuzzy parts, the mean
    /// for random ones.
    pub fn modal(&self) -> F {
        match self {
            Uncertain::Crisp(v) | Uncertain::Unknown(v) => *v,
            Uncertain::Fuzzy(n) | Uncertain::Z(n, _) => n.modal(),
            Uncertain::Random(d) => d.mean(),
        }
    }

    pub fn fuzzy(&self) -> Option<&TriangularFuzzyNumber<F>> {
        match self {
            Uncertain::Fuzzy(n) | Uncertain::Z(n, _) => Some(n),
            _ => None,
        }
    }

    pub fn random(&self) -> Option<&Normal<F>> {
        match self {
            Uncertain::Random(d) | Uncertain::Z(_, d) => Some(d),
            _ => None,
        }
    }
}

/// A differential equation whose parameters and initial conditions may be
/// imprecise.
#[derive(Clone, Debug, PartialEq)]
pub enum ImpreciseOde<F> {
    /// `ẋ = λx`, `x(t₀) = x₀`.
    ExpDecay { rate: Uncertain<F>, x0: Uncertain<F> },
    /// `ẍ + 2ζωẋ + ω²x = 0`, `x(t₀) = x₀`, `ẋ(t₀) = v₀`.
    DampedOscillator { zeta: Uncertain<F>, omega: F, x0: Uncertain<F>, v0: Uncertain<F> },
}

impl<F: Real> ImpreciseOde<F> {
    pub fn order(&self) -> usize {
        match self {
            ImpreciseOde::ExpDecay { .. } => 1,
            ImpreciseOde::DampedOscillator { .. } => 2,
        }
    }

    /// Named parameters; the first one enters the residual, the rest are
    /// initial conditions.
    pub fn params(&self) -> Vec<(&'static str, Uncertain<F>)> {
        match *self {
            ImpreciseOde::ExpDecay { rate, x0 } => vec![("lambda", rate), ("x0", x0)],
            ImpreciseOde::DampedOscillator { zeta, x0, v0, .. } => vec![("zeta", zeta), ("x0", x0), ("v0", v0)],
        }
    }

    /// Residual `g` with the residual parameter set to `p` (affine in `p`).
    pub fn residual<'t>(&self, jet: &Jet<'t, F>, p: Scalar<'t, F>) -> Scalar<'t, F> {
        match *self {
            ImpreciseOde::ExpDecay { .. } => jet.dx - p * jet.x,
            ImpreciseOde::DampedOscillator { omega, .. } => {
                let ddx = jet.ddx.expect("second-order jet");
                ddx + jet.x * (omega * omega) + jet.dx * p * (omega + omega)
            }
        }
    }

    /// Squared initial-condition mismatches, `[(name, loss)]`, for targets
    /// aligned with `params()[1..]`.
    pub fn ic_terms<'t>(&self, jet0: &Jet<'t, F>, targets: &[Scalar<'t, F>]) -> Vec<(&'static str, Scalar<'t, F>)> {
        match self {
            ImpreciseOde::ExpDecay { .. } => vec![("ic", super::ic_loss(jet0.x, targets[0]))],
            ImpreciseOde::DampedOscillator { .. } => vec![
                ("ic", super::ic_loss(jet0.x, targets[0])),
                ("ic_velocity", super::ic_loss(jet0.dx, targets[1])),
            ],
        }
    }
}
