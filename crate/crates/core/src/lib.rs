//! Perception-informed neural network laboratory.
//!
//! A small function approximator is trained against composable perception
//! losses: crisp ODE residuals, fuzzy granular residuals evaluated through
//! horizontal membership functions, probabilistic residual likelihoods,
//! sureness (possibility times probability) and fuzzy-rule restrictions.
//! Every trained result can be checked against the independent oracles in
//! [`oracle`], which never touch the autodiff engine.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below are what the experiment runner uses.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod controlsim;
pub mod fuzzy;
pub mod losses;
pub mod network;
pub mod oracle;
pub mod prob;
pub mod train;

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the whole crate is generic over.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `F`.
#[inline]
pub(crate) fn lit<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("literal representable in the scalar type")
}

/// Converts `F` to `f64` for reporting and RNG plumbing.
#[inline]
pub(crate) fn to_f64<F: Real>(x: F) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub use autodiff::{AdError, Op, Scalar, Tape};
pub use controlsim::{ControlError, LoopConfig, LoopRecord, Plant, PlantKind, Reference};
pub use losses::{CompositeLoss, ImpreciseOde, LossError, LossTerm, PerceptionProblem, Preset, Uncertain};
pub use network::{BoundMlp, ConstrainedParam, Mlp, NetworkError};
pub use fuzzy::{FuzzyError, Granule, MembershipFunction, Rule, RuleSet, SNorm, TNorm, TriangularFuzzyNumber};
pub use oracle::{CrispOde, Envelope, OracleError};
pub use prob::{Normal, ProbError};
pub use train::{Adam, Collocation, CollocationStrategy, RunTelemetry, TrainConfig, TrainError};

pub type Tape64 = Tape<f64>;
pub type Scalar64<'t> = Scalar<'t, f64>;
pub type Tfn64 = TriangularFuzzyNumber<f64>;
pub type Granule64 = Granule<f64>;
pub type Membership64 = MembershipFunction<f64>;
pub type RuleSet64 = RuleSet<f64>;
pub type Normal64 = Normal<f64>;
pub type Mlp64 = Mlp<f64>;
pub type TrainConfig64 = TrainConfig<f64>;
pub type CrispOde64 = CrispOde<f64>;
pub type LoopConfig64 = LoopConfig<f64>;

pub type Tape32 = Tape<f32>;
pub type Tfn32 = TriangularFuzzyNumber<f32>;
pub type Mlp32 = Mlp<f32>;
