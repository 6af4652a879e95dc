//! Possibility distributions: membership functions, triangular fuzzy
//! numbers with their horizontal membership function (HMF), and fuzzy-graph
//! restrictions built from t-norms and s-norms.

mod rules;

pub use rules::{Rule, RuleSet, SNorm, TNorm};

use thiserror::Error;

use crate::autodiff::Scalar;
use crate::Real;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum FuzzyError {
    #[error("fuzzy number ({a}, {b}, {c}) is not nondecreasing")]
    NotNondecreasing { a: f64, b: f64, c: f64 },
    #[error("{name} = {value} lies outside [0, 1]")]
    OutsideUnit { name: &'static str, value: f64 },
    #[error("non-finite parameter in {0}")]
    NonFinite(&'static str),
    #[error("gaussian width must be positive, got {0}")]
    Width(f64),
    #[error("a rule set needs at least one rule")]
    EmptyRuleSet,
    #[error("arity mismatch: expected {expected} input(s), got {got}")]
    Arity { expected: usize, got: usize },
}

fn check_ordered<F: Real>(points: &[F]) -> Result<(), FuzzyError> {
    if points.iter().any(|p| !p.is_finite()) {
        return Err(FuzzyError::NonFinite("membership function"));
    }
    if points.windows(2).any(|w| w[0] > w[1]) {
        let v: Vec<f64> = points.iter().map(|&p| crate::to_f64(p)).collect();
        let (a, b, c) = (v[0], v[1], v[v.len() - 1]);
        return Err(FuzzyError::NotNondecreasing { a, b, c });
    }
    Ok(())
}

/// Triangular possibility distribution `(a, b, c)` with `a ≤ b ≤ c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriangularFuzzyNumber<F> {
    a: F,
    b: F,
    c: F,
}

impl<F: Real> TriangularFuzzyNumber<F> {
    /// Rejects unordered triples instead of sorting them.
    pub fn new(a: F, b: F, c: F) -> Result<Self, FuzzyError> {
        check_ordered(&[a, b, c])?;
        Ok(TriangularFuzzyNumber { a, b, c })
    }

    /// Degenerate number `(v, v, v)`.
    pub fn crisp(v: F) -> Self {
        TriangularFuzzyNumber { a: v, b: v, c: v }
    }

    pub fn a(&self) -> F {
        self.a
    }

    pub fn b(&self) -> F {
        self.b
    }

    pub fn c(&self) -> F {
        self.c
    }

    /// The modal value `b`.
    pub fn modal(&self) -> F {
        self.b
    }

    pub fn is_crisp(&self) -> bool {
        self.a == self.c
    }

    pub fn membership(&self, x: F) -> F {
        trapezoid(self.a, self.b, self.b, self.c, x)
    }

    /// `μ`-level set `[a + μ(b−a), c − μ(c−b)]`, computed around `b` so that
    /// the core is exact.
    pub fn alpha_cut(&self, mu: F) -> Result<(F, F), FuzzyError> {
        unit("mu", mu)?;
        let rest = F::one() - mu;
        Ok((self.b - rest * (self.b - self.a), self.b + rest * (self.c - self.b)))
    }

    /// Horizontal membership function: the granule
    /// `lo(μ) + α·(hi(μ) − lo(μ))`, written as `b + (1−μ)(α(c−a) − (b−a))`.
    pub fn hmf(&self, g: Granule<F>) -> F {
        let rest = F::one() - g.mu;
        let raw = self.b + rest * (g.alpha * (self.c - self.a) - (self.b - self.a));
        let lo = self.b - rest * (self.b - self.a);
        let hi = self.b + rest * (self.c - self.b);
        raw.max(lo).min(hi)
    }

    /// Differentiable HMF for learnable granule coordinates.
    pub fn hmf_scalar<'t>(&self, mu: Scalar<'t, F>, alpha: Scalar<'t, F>) -> Scalar<'t, F> {
        let rest = Scalar::one() - mu;
        rest * (alpha * (self.c - self.a) - (self.b - self.a)) + self.b
    }
}

fn unit<F: Real>(name: &'static str, v: F) -> Result<F, FuzzyError> {
    if v >= F::zero() && v <= F::one() {
        Ok(v)
    } else {
        Err(FuzzyError::OutsideUnit { name, value: crate::to_f64(v) })
    }
}

/// HMF coordinate: membership level `μ` and relative-distance-measure `α`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Granule<F> {
    mu: F,
    alpha: F,
}

impl<F: Real> Granule<F> {
    pub fn new(mu: F, alpha: F) -> Result<Self, FuzzyError> {
        Ok(Granule { mu: unit("mu", mu)?, alpha: unit("alpha", alpha)? })
    }

    pub fn mu(&self) -> F {
        self.mu
    }

    pub fn alpha(&self) -> F {
        self.alpha
    }
}

/// Shape of a fuzzy set on the real line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MembershipFunction<F> {
    Triangular { a: F, b: F, c: F },
    Trapezoidal { a: F, b: F, c: F, d: F },
    Gaussian { center: F, width: F },
}

/// Piecewise-linear evaluation on half-open pieces `(a, b]`, `(b, c]`,
/// `(c, d]`, which makes the derivative at a kink the left derivative.
fn trapezoid<F: Real>(a: F, b: F, c: F, d: F, x: F) -> F {
    if x > a && x <= b && b > a {
        (x - a) / (b - a)
    } else if x >= b && x <= c {
        F::one()
    } else if x > c && x <= d {
        (d - x) / (d - c)
    } else {
        F::zero()
    }
}

impl<F: Real> MembershipFunction<F> {
    pub fn triangular(a: F, b: F, c: F) -> Result<Self, FuzzyError> {
        check_ordered(&[a, b, c])?;
        Ok(MembershipFunction::Triangular { a, b, c })
    }

    pub fn trapezoidal(a: F, b: F, c: F, d: F) -> Result<Self, FuzzyError> {
        check_ordered(&[a, b, c, d])?;
        Ok(MembershipFunction::Trapezoidal { a, b, c, d })
    }

    pub fn gaussian(center: F, width: F) -> Result<Self, FuzzyError> {
        if !center.is_finite() || !width.is_finite() {
            return Err(FuzzyError::NonFinite("gaussian"));
        }
        if width <= F::zero() {
            return Err(FuzzyError::Width(crate::to_f64(width)));
        }
        Ok(MembershipFunction::Gaussian { center, width })
    }

    fn corners(&self) -> Option<(F, F, F, F)> {
        match *self {
            MembershipFunction::Triangular { a, b, c } => Some((a, b, b, c)),
            MembershipFunction::Trapezoidal { a, b, c, d } => Some((a, b, c, d)),
            MembershipFunction::Gaussian { .. } => None,
        }
    }

    pub fn eval(&self, x: F) -> F {
        match (*self, self.corners()) {
            (MembershipFunction::Gaussian { center, width }, _) => {
                let z = (x - center) / width;
                (-(z * z) * crate::lit(0.5)).exp()
            }
            (_, Some((a, b, c, d))) => trapezoid(a, b, c, d, x),
            _ => unreachable!(),
        }
    }

    /// Same function on a differentiable input.
    pub fn eval_scalar<'t>(&self, x: Scalar<'t, F>) -> Scalar<'t, F> {
        match (*self, self.corners()) {
            (MembershipFunction::Gaussian { center, width }, _) => {
                let z = (x - center) / width;
                (-(z * z) * crate::lit::<F>(0.5)).exp()
            }
            (_, Some((a, b, c, d))) => {
                let v = x.value();
                if v > a && v <= b && b > a {
                    (x - a) / (b - a)
                } else if v >= b && v <= c {
                    Scalar::one()
                } else if v > c && v <= d {
                    (Scalar::constant(d) - x) / (d - c)
                } else {
                    Scalar::zero()
                }
            }
            _ => unreachable!(),
        }
    }

    /// A point of full membership.
    pub fn core(&self) -> F {
        match *self {
            MembershipFunction::Triangular { b, .. } => b,
            MembershipFunction::Trapezoidal { b, c, .. } => (b + c) * crate::lit(0.5),
            MembershipFunction::Gaussian { center, .. } => center,
        }
    }

    /// Closed interval outside of which membership is zero (`None` for
    /// gaussians, which have unbounded support).
    pub fn support(&self) -> Option<(F, F)> {
        self.corners().map(|(a, _, _, d)| (a, d))
    }

    /// Mirror image `x ↦ −x`.
    pub fn negated(&self) -> Self {
        match *self {
            MembershipFunction::Triangular { a, b, c } => MembershipFunction::Triangular { a: -c, b: -b, c: -a },
            MembershipFunction::Trapezoidal { a, b, c, d } => {
                MembershipFunction::Trapezoidal { a: -d, b: -c, c: -b, d: -a }
            }
            MembershipFunction::Gaussian { center, width } => MembershipFunction::Gaussian { center: -center, width },
        }
    }
}

impl<F: Real> From<TriangularFuzzyNumber<F>> for MembershipFunction<F> {
    fn from(n: TriangularFuzzyNumber<F>) -> Self {
        MembershipFunction::Triangular { a: n.a, b: n.b, c: n.c }
    }
}
