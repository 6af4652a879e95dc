//! Ground-truth generators that never touch the autodiff engine: closed
//! forms, classical RK4, brute-force α-cut envelopes and seeded Monte Carlo
//! ensembles.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::losses::{ImpreciseOde, Uncertain};
use crate::prob::box_muller;
use crate::Real;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum OracleError {
    #[error("closed form needs an underdamped oscillator (0 < zeta < 1), got zeta = {0}")]
    NotUnderdamped(f64),
    #[error("step size must be positive and finite, got {0}")]
    Step(f64),
    #[error("time grid must be nonempty, finite, nondecreasing and start at or after t0")]
    Grid,
    #[error("grid density must be at least 2 per parameter, got {0}")]
    Density(usize),
    #[error("Monte Carlo needs at least 100 samples, got {0}")]
    Samples(usize),
    #[error("membership level must lie in [0, 1], got {0}")]
    Level(f64),
    #[error("parameter `{0}` has no usable distribution for this oracle")]
    Param(&'static str),
}

/// A crisp initial value problem with its initial state at `t0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CrispOde<F> {
    /// `ẋ = λx`.
    ExpDecay { rate: F, x0: F },
    /// `ẍ + 2ζωẋ + ω²x = 0`.
    Oscillator { zeta: F, omega: F, x0: F, v0: F },
}

impl<F: Real> CrispOde<F> {
    pub fn order(&self) -> usize {
        match self {
            CrispOde::ExpDecay { .. } => 1,
            CrispOde::Oscillator { .. } => 2,
        }
    }

    /// The crisp instance of `ode` with each parameter set to `values[i]`,
    /// aligned with `ode.params()`.
    pub fn instance(ode: &ImpreciseOde<F>, values: &[F]) -> Self {
        match *ode {
            ImpreciseOde::ExpDecay { .. } => CrispOde::ExpDecay { rate: values[0], x0: values[1] },
            ImpreciseOde::DampedOscillator { omega, .. } => {
                CrispOde::Oscillator { zeta: values[0], omega, x0: values[1], v0: values[2] }
            }
        }
    }

    /// Every parameter at its modal value.
    pub fn modal(ode: &ImpreciseOde<F>) -> Self {
        let v: Vec<F> = ode.params().iter().map(|(_, u)| u.modal()).collect();
        Self::instance(ode, &v)
    }

    fn state0(&self) -> [F; 2] {
        match *self {
            CrispOde::ExpDecay { x0, .. } => [x0, F::zero()],
            CrispOde::Oscillator { x0, v0, .. } => [x0, v0],
        }
    }

    fn rhs(&self, s: [F; 2]) -> [F; 2] {
        match *self {
            CrispOde::ExpDecay { rate, .. } => [rate * s[0], F::zero()],
            CrispOde::Oscillator { zeta, omega, .. } => {
                let two: F = crate::lit(2.0);
                [s[1], -(omega * omega) * s[0] - two * zeta * omega * s[1]]
            }
        }
    }

    /// Closed-form `(x(t), ẋ(t))`; the oscillator branch is underdamped only.
    pub fn analytic_state(&self, t0: F, t: F) -> Result<(F, F), OracleError> {
        let tau = t - t0;
        match *self {
            CrispOde::ExpDecay { rate, x0 } => {
                let x = x0 * (rate * tau).exp();
                Ok((x, rate * x))
            }
            CrispOde::Oscillator { zeta, omega, x0, v0 } => {
                if !(zeta > F::zero() && zeta < F::one()) {
                    return Err(OracleError::NotUnderdamped(crate::to_f64(zeta)));
                }
                let wd = omega * (F::one() - zeta * zeta).sqrt();
                let decay = (-zeta * omega * tau).exp();
                let (s, c) = (wd * tau).sin_cos();
                let x = decay * (x0 * c + (v0 + zeta * omega * x0) / wd * s);
                let v = decay * (v0 * c - (zeta * omega * v0 + omega * omega * x0) / wd * s);
                Ok((x, v))
            }
        }
    }

    pub fn analytic(&self, t0: F, t: F) -> Result<F, OracleError> {
        self.analytic_state(t0, t).map(|(x, _)| x)
    }

    /// Classical RK4 from `t0`, reporting `x` at each of `times`. Each gap
    /// is split into the fewest equal steps no longer than `h`.
    pub fn rk4(&self, t0: F, times: &[F], h: F) -> Result<Vec<F>, OracleError> {
        if !(h > F::zero()) || !h.is_finite() {
            return Err(OracleError::Step(crate::to_f64(h)));
        }
        check_grid(t0, times)?;
        let mut s = self.state0();
        let mut t = t0;
        let mut out = Vec::with_capacity(times.len());
        for &target in times {
            let gap = target - t;
            if gap > F::zero() {
                let n = (gap / h).ceil().max(F::one());
                let dt = gap / n;
                let steps = n.to_usize().ok_or(OracleError::Step(crate::to_f64(h)))?;
                for _ in 0..steps {
                    s = self.rk4_step(s, dt);
                }
            }
            t = target;
            out.push(s[0]);
        }
        Ok(out)
    }

    fn rk4_step(&self, s: [F; 2], dt: F) -> [F; 2] {
        let half: F = crate::lit(0.5);
        let six: F = crate::lit(6.0);
        let two: F = crate::lit(2.0);
        let add = |a: [F; 2], k: [F; 2], w: F| [a[0] + k[0] * w, a[1] + k[1] * w];
        let k1 = self.rhs(s);
        let k2 = self.rhs(add(s, k1, half * dt));
        let k3 = self.rhs(add(s, k2, half * dt));
        let k4 = self.rhs(add(s, k3, dt));
        let mut next = s;
        for i in 0..2 {
            next[i] = s[i] + dt / six * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
        }
        next
    }
}

fn check_grid<F: Real>(t0: F, times: &[F]) -> Result<(), OracleError> {
    let ordered = times.windows(2).all(|w| w[0] <= w[1]);
    if times.is_empty() || !ordered || !times.iter().all(|t| t.is_finite()) || times[0] < t0 {
        return Err(OracleError::Grid);
    }
    Ok(())
}

/// `(t, value)` rows with a header.
pub fn trajectory_csv<F: Real>(times: &[F], values: &[F]) -> String {
    let mut out = String::from("t,value\n");
    for (t, v) in times.iter().zip(values) {
        let _ = writeln!(out, "{t:?},{v:?}");
    }
    out
}

/// Pointwise bounds of the solution set at membership level `mu`.
#[derive(Clone, Debug, PartialEq)]
pub struct Envelope<F> {
    pub mu: F,
    pub times: Vec<F>,
    pub lo: Vec<F>,
    pub hi: Vec<F>,
}

impl<F: Real> Envelope<F> {
    /// Whether `values` lie inside `[lo − inflation, hi + inflation]`.
    pub fn contains(&self, values: &[F], inflation: F) -> bool {
        values.len() == self.times.len()
            && values.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&v, (&l, &h))| v >= l - inflation && v <= h + inflation)
    }

    /// Whether `self` lies inside `outer` at every time (same grid).
    pub fn nested_in(&self, outer: &Envelope<F>) -> bool {
        self.times == outer.times
            && (0..self.times.len()).all(|i| self.lo[i] >= outer.lo[i] && self.hi[i] <= outer.hi[i])
    }

    /// Largest distance of `values` outside the band (0 when contained).
    pub fn max_excursion(&self, values: &[F]) -> F {
        values
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&l, &h))| (l - v).max(v - h).max(F::zero()))
            .fold(F::zero(), F::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,lo,hi\n");
        for i in 0..self.times.len() {
            let _ = writeln!(out, "{:?},{:?},{:?}", self.times[i], self.lo[i], self.hi[i]);
        }
        out
    }
}

/// Default grid points per fuzzy parameter.
pub const ENVELOPE_DENSITY: usize = 9;

/// Per-time min/max of RK4 trajectories over the Cartesian product of `k`
/// evenly spaced points in each fuzzy parameter's α-cut at `mu`. Crisp and
/// unknown parameters stay fixed; random parts of Z-numbers are ignored.
pub fn alpha_cut_envelope<F: Real>(
    ode: &ImpreciseOde<F>,
    mu: F,
    t0: F,
    times: &[F],
    k: usize,
    h: F,
) -> Result<Envelope<F>, OracleError> {
    if k < 2 {
        return Err(OracleError::Density(k));
    }
    if !(mu >= F::zero() && mu <= F::one()) {
        return Err(OracleError::Level(crate::to_f64(mu)));
    }
    let axes: Vec<Vec<F>> = ode
        .params()
        .iter()
        .map(|(name, u)| match u {
            Uncertain::Random(_) => Err(OracleError::Param(name)),
            _ => Ok(match u.fuzzy() {
                Some(n) => {
                    let (lo, hi) = n.alpha_cut(mu).map_err(|_| OracleError::Level(crate::to_f64(mu)))?;
                    let last: F = crate::lit((k - 1) as f64);
                    (0..k).map(|i| if i == k - 1 { hi } else { lo + (hi - lo) * crate::lit::<F>(i as f64) / last }).collect()
                }
                None => vec![u.modal()],
            }),
        })
        .collect::<Result<_, _>>()?;
    let mut lo = vec![F::infinity(); times.len()];
    let mut hi = vec![F::neg_infinity(); times.len()];
    let mut idx = vec![0usize; axes.len()];
    loop {
        let values: Vec<F> = idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
        let traj = CrispOde::instance(ode, &values).rk4(t0, times, h)?;
        for (j, x) in traj.into_iter().enumerate() {
            lo[j] = lo[j].min(x);
            hi[j] = hi[j].max(x);
        }
        // odometer over the product grid
        let mut d = 0;
        while d < axes.len() {
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == axes.len() {
            break;
        }
    }
    Ok(Envelope { mu, times: times.to_vec(), lo, hi })
}

/// Per-time ensemble statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleStats<F> {
    pub times: Vec<F>,
    pub n: usize,
    pub mean: Vec<F>,
    /// Unbiased sample variance.
    pub variance: Vec<F>,
}

impl<F: Real> EnsembleStats<F> {
    /// Standard error of the mean at time index `i`.
    pub fn standard_error(&self, i: usize) -> F {
        (self.variance[i] / crate::lit::<F>(self.n as f64)).sqrt()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mean,variance\n");
        for i in 0..self.times.len() {
            let _ = writeln!(out, "{:?},{:?},{:?}", self.times[i], self.mean[i], self.variance[i]);
        }
        out
    }
}

/// Welford accumulator over trajectories, mergeable across workers.
#[derive(Clone, Debug)]
struct Welford {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(len: usize) -> Self {
        Welford { n: 0.0, mean: vec![0.0; len], m2: vec![0.0; len] }
    }

    fn push(&mut self, xs: &[f64]) {
        self.n += 1.0;
        for (i, &x) in xs.iter().enumerate() {
            let d = x - self.mean[i];
            self.mean[i] += d / self.n;
            self.m2[i] += d * (x - self.mean[i]);
        }
    }

    fn merge(&mut self, other: &Welford) {
        let n = self.n + other.n;
        if other.n == 0.0 {
            return;
        }
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * other.n / n;
            self.m2[i] += other.m2[i] + d * d * self.n * other.n / n;
        }
        self.n = n;
    }
}

/// Monte Carlo over the random parameters of `ode` (random parts of
/// Z-numbers included); other parameters sit at their modal values.
/// Samples are split across `workers` threads, worker `w` drawing from
/// stream `w` of a generator seeded with `seed`, so the result depends
/// only on `(seed, n, workers)`.
pub fn mc_ensemble<F: Real>(
    ode: &ImpreciseOde<F>,
    n: usize,
    seed: u64,
    workers: usize,
    t0: F,
    times: &[F],
    h: F,
) -> Result<EnsembleStats<F>, OracleError> {
    if n < 100 {
        return Err(OracleError::Samples(n));
    }
    if !(h > F::zero()) || !h.is_finite() {
        return Err(OracleError::Step(crate::to_f64(h)));
    }
    check_grid(t0, times)?;
    let params = ode.params();
    let workers = workers.clamp(1, n);
    let results: Vec<Result<Welford, OracleError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let params = &params;
                let share = n / workers + usize::from(w < n % workers);
                scope.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(w as u64);
                    let mut acc = Welford::new(times.len());
                    for _ in 0..share {
                        let values: Vec<F> = params
                            .iter()
                            .map(|(_, u)| match u.random() {
                                Some(d) => {
                                    let z = box_muller(&mut rng).0;
                                    d.mean() + d.std_dev() * crate::lit::<F>(z)
                                }
                                None => u.modal(),
                            })
                            .collect();
                        let traj = CrispOde::instance(ode, &values).rk4(t0, times, h)?;
                        let xs: Vec<f64> = traj.into_iter().map(crate::to_f64).collect();
                        acc.push(&xs);
                    }
                    Ok(acc)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("Monte Carlo worker panicked")).collect()
    });
    let mut total = Welford::new(times.len());
    for r in results {
        total.merge(&r?);
    }
    Ok(EnsembleStats {
        times: times.to_vec(),
        n,
        mean: total.mean.iter().map(|&m| crate::lit(m)).collect(),
        variance: total.m2.iter().map(|&m| crate::lit(m / (total.n - 1.0))).collect(),
    })
}
