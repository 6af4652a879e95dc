//! Probability-distribution mode: normal densities, the affine pushforward
//! of a residual's distribution, mode-normalized likelihood and seeded
//! Monte Carlo sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::Scalar;
use crate::Real;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ProbError {
    #[error("variance must be positive, got {0}")]
    Variance(f64),
    #[error("non-finite distribution parameter")]
    NonFinite,
    /// Zero slope: the pushforward is a point mass at `point`.
    #[error("degenerate pushforward: point mass at {point}")]
    Degenerate { point: f64 },
    #[error("sample count must be at least 1")]
    EmptySample,
}

/// `N(mean, variance)` with `variance > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normal<F> {
    mean: F,
    variance: F,
}

impl<F: Real> Normal<F> {
    pub fn new(mean: F, variance: F) -> Result<Self, ProbError> {
        if !mean.is_finite() || !variance.is_finite() {
            return Err(ProbError::NonFinite);
        }
        if variance <= F::zero() {
            return Err(ProbError::Variance(crate::to_f64(variance)));
        }
        Ok(Normal { mean, variance })
    }

    pub fn standard() -> Self {
        Normal { mean: F::zero(), variance: F::one() }
    }

    pub fn mean(&self) -> F {
        self.mean
    }

    pub fn variance(&self) -> F {
        self.variance
    }

    pub fn std_dev(&self) -> F {
        self.variance.sqrt()
    }

    pub fn pdf(&self, x: F) -> F {
        let two: F = crate::lit(2.0);
        let d = x - self.mean;
        (-(d * d) / (two * self.variance)).exp() / (two * F::PI() * self.variance).sqrt()
    }

    /// `pdf(x) / pdf(mean)`, in `(0, 1]` for finite `x` (may underflow to 0
    /// far in the tails).
    pub fn normalized_likelihood(&self, x: F) -> F {
        let d = x - self.mean;
        (-(d * d) / (crate::lit::<F>(2.0) * self.variance)).exp()
    }

    /// Distribution of `offset + slope·θ` for `θ ~ self`.
    pub fn pushforward(&self, offset: F, slope: F) -> Result<Normal<F>, ProbError> {
        if !offset.is_finite() || !slope.is_finite() {
            return Err(ProbError::NonFinite);
        }
        if slope == F::zero() {
            return Err(ProbError::Degenerate { point: crate::to_f64(offset) });
        }
        Normal::new(offset + slope * self.mean, slope * slope * self.variance)
    }

    /// `n` draws via Box–Muller on a ChaCha8 stream seeded with `seed`.
    pub fn sample(&self, seed: u64, n: usize) -> Result<Vec<F>, ProbError> {
        if n == 0 {
            return Err(ProbError::EmptySample);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        let sd = crate::to_f64(self.std_dev());
        let mean = crate::to_f64(self.mean);
        while out.len() < n {
            let (z0, z1) = box_muller(&mut rng);
            out.push(crate::lit(mean + sd * z0));
            if out.len() < n {
                out.push(crate::lit(mean + sd * z1));
            }
        }
        Ok(out)
    }
}

/// Two independent standard normal deviates.
pub fn box_muller<R: Rng>(rng: &mut R) -> (f64, f64) {
    // 1 − U ∈ (0, 1] keeps the logarithm finite.
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    (r * theta.cos(), r * theta.sin())
}

/// Standardized distance beyond which the likelihood is taken as exactly 0.
const TAIL_CUTOFF: f64 = 40.0;

/// Normalized likelihood of a zero residual when the residual is
/// `offset + slope·θ`, `θ ~ base`. A zero slope is a point mass: 1 iff
/// `offset == 0`, else 0.
pub fn zero_residual_likelihood<'t, F: Real>(base: &Normal<F>, offset: Scalar<'t, F>, slope: Scalar<'t, F>) -> Scalar<'t, F> {
    let s = slope.value();
    let mean = offset + slope * base.mean;
    if s == F::zero() {
        return if offset.value() == F::zero() { Scalar::one() } else { Scalar::zero() };
    }
    let z = crate::to_f64(mean.value()).abs() / (crate::to_f64(s).abs() * crate::to_f64(base.std_dev()));
    if !z.is_finite() || z > TAIL_CUTOFF {
        return Scalar::zero();
    }
    let var = slope.square() * base.variance;
    (-(mean.square()) / (var * crate::lit::<F>(2.0))).exp()
}
