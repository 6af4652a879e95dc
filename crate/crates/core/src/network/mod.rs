//! Fully connected tanh networks on the autodiff tape, bounded learnable
//! parameters, and time-derivative jets of scalar trial functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::{AdError, Scalar, Tape};
use crate::Real;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum NetworkError {
    #[error("a network needs at least an input and an output layer")]
    TooFewLayers,
    #[error("layer {0} has zero width")]
    ZeroWidth(usize),
    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("expected {expected} inputs, got {got}")]
    InputCount { expected: usize, got: usize },
    #[error("bounds ({lo}, {hi}) are empty or non-finite")]
    Bounds { lo: f64, hi: f64 },
    #[error("initial value {value} is not strictly inside ({lo}, {hi})")]
    Outside { value: f64, lo: f64, hi: f64 },
    #[error("snapshot line {line}: {detail}")]
    Snapshot { line: usize, detail: String },
    #[error(transparent)]
    Ad(#[from] AdError),
}

/// Multilayer perceptron: tanh on hidden layers, identity on the output.
///
/// Parameters are stored flat; each layer contributes its weight matrix
/// (`out × in`, row-major) followed by its bias vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<F> {
    widths: Vec<usize>,
    params: Vec<F>,
}

fn check_widths(widths: &[usize]) -> Result<usize, NetworkError> {
    if widths.len() < 2 {
        return Err(NetworkError::TooFewLayers);
    }
    if let Some(i) = widths.iter().position(|&w| w == 0) {
        return Err(NetworkError::ZeroWidth(i));
    }
    Ok(widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum())
}

impl<F: Real> Mlp<F> {
    /// Xavier-uniform weights in `±√(6/(fan_in+fan_out))`, zero biases.
    pub fn init(widths: &[usize], seed: u64) -> Result<Self, NetworkError> {
        let count = check_widths(widths)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(count);
        for w in widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| crate::lit::<F>(rng.gen_range(-bound..=bound))));
            params.extend((0..fan_out).map(|_| F::zero()));
        }
        Ok(Mlp { widths: widths.to_vec(), params })
    }

    pub fn from_params(widths: &[usize], params: Vec<F>) -> Result<Self, NetworkError> {
        let expected = check_widths(widths)?;
        if params.len() != expected {
            return Err(NetworkError::ParamCount { expected, got: params.len() });
        }
        Ok(Mlp { widths: widths.to_vec(), params })
    }

    /// All-zero parameters.
    pub fn zeros(widths: &[usize]) -> Result<Self, NetworkError> {
        let count = check_widths(widths)?;
        Ok(Mlp { widths: widths.to_vec(), params: vec![F::zero(); count] })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    pub fn n_inputs(&self) -> usize {
        self.widths[0]
    }

    pub fn n_outputs(&self) -> usize {
        self.widths[self.widths.len() - 1]
    }

    /// Tape-free evaluation.
    pub fn eval(&self, input: &[F]) -> Result<Vec<F>, NetworkError> {
        if input.len() != self.n_inputs() {
            return Err(NetworkError::InputCount { expected: self.n_inputs(), got: input.len() });
        }
        let layers = self.widths.len() - 1;
        let mut act = input.to_vec();
        let mut offset = 0;
        for (l, w) in self.widths.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            act = (0..n_out)
                .map(|j| {
                    let row = &weights[j * n_in..(j + 1) * n_in];
                    let z = row.iter().zip(&act).fold(bias[j], |acc, (&w, &x)| acc + w * x);
                    if l + 1 < layers {
                        z.tanh()
                    } else {
                        z
                    }
                })
                .collect();
        }
        Ok(act)
    }

    /// Registers every parameter as a tape variable.
    pub fn bind<'t>(&self, tape: &'t Tape<F>) -> Result<BoundMlp<'t, F>, NetworkError> {
        Ok(BoundMlp { widths: self.widths.clone(), weights: tape.vars(&self.params)? })
    }

    /// Versioned text snapshot: header, widths, then `index,value` rows.
    /// Values use shortest round-trip formatting, so parsing is exact.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::from("# prinn-snapshot v1\n");
        let widths: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        out.push_str(&format!("widths,{}\n", widths.join(",")));
        out.push_str("index,value\n");
        for (i, p) in self.params.iter().enumerate() {
            out.push_str(&format!("{i},{p:?}\n"));
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self, NetworkError>
    where
        F: std::str::FromStr,
    {
        let bad = |line: usize, detail: &str| NetworkError::Snapshot { line, detail: detail.to_string() };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, "# prinn-snapshot v1")) => {}
            _ => return Err(bad(1, "missing or unsupported version header")),
        }
        let (n, widths_line) = lines.next().ok_or_else(|| bad(2, "missing widths line"))?;
        let widths = widths_line
            .strip_prefix("widths,")
            .ok_or_else(|| bad(n, "expected `widths,...`"))?
            .split(',')
            .map(|w| w.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(n, &e.to_string()))?;
        match lines.next() {
            Some((_, "index,value")) => {}
            other => return Err(bad(other.map_or(3, |(n, _)| n), "expected `index,value` header")),
        }
        let mut params = Vec::new();
        for (n, line) in lines.filter(|(_, l)| !l.is_empty()) {
            let (idx, value) = line.split_once(',').ok_or_else(|| bad(n, "expected `index,value`"))?;
            if idx.trim().parse::<usize>().ok() != Some(params.len()) {
                return Err(bad(n, "indices must count up from 0"));
            }
            params.push(value.trim().parse::<F>().map_err(|_| bad(n, "unparseable value"))?);
        }
        Mlp::from_params(&widths, params)
    }
}

/// An [`Mlp`] whose parameters live on a tape.
#[derive(Clone, Debug)]
pub struct BoundMlp<'t, F: Real> {
    widths: Vec<usize>,
    weights: Vec<Scalar<'t, F>>,
}

impl<'t, F: Real> BoundMlp<'t, F> {
    /// The parameter variables, in the flat layout of [`Mlp::params`].
    pub fn weights(&self) -> &[Scalar<'t, F>] {
        &self.weights
    }

    pub fn forward(&self, input: &[Scalar<'t, F>]) -> Result<Vec<Scalar<'t, F>>, NetworkError> {
        if input.len() != self.widths[0] {
            return Err(NetworkError::InputCount { expected: self.widths[0], got: input.len() });
        }
        let layers = self.widths.len() - 1;
        let mut act = input.to_vec();
        let mut offset = 0;
        for (l, w) in self.widths.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.weights[offset..offset + n_in * n_out];
            let bias = &self.weights[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            act = (0..n_out)
                .map(|j| {
                    let row = &weights[j * n_in..(j + 1) * n_in];
                    let z = row.iter().zip(&act).fold(bias[j], |acc, (&w, &x)| acc + w * x);
                    if l + 1 < layers {
                        z.tanh()
                    } else {
                        z
                    }
                })
                .collect();
        }
        Ok(act)
    }

    /// Single-input, single-output convenience.
    pub fn scalar(&self, t: Scalar<'t, F>) -> Scalar<'t, F> {
        self.forward(&[t]).expect("scalar network")[0]
    }

    /// Forward-mode time jet of a 1-in/1-out network: value, `dx/dt` and
    /// (for `order ≥ 2`) `d²x/dt²` pushed through each layer. Agrees with
    /// [`jet`] but records far fewer nodes than the nested reverse sweep.
    pub fn time_jet(&self, tape: &'t Tape<F>, t: F, order: usize) -> Result<Jet<'t, F>, NetworkError> {
        let (n0, n_last) = (self.widths[0], self.widths[self.widths.len() - 1]);
        if n0 != 1 || n_last != 1 {
            return Err(NetworkError::InputCount { expected: 1, got: n0.max(n_last) });
        }
        let second = order >= 2;
        let tv = tape.var(t)?;
        let layers = self.widths.len() - 1;
        let mut v = vec![tv];
        let mut d1 = vec![Scalar::one()];
        let mut d2 = vec![Scalar::zero()];
        let mut offset = 0;
        for (l, w) in self.widths.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.weights[offset..offset + n_in * n_out];
            let bias = &self.weights[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let (mut nv, mut n1, mut n2) = (Vec::with_capacity(n_out), Vec::with_capacity(n_out), Vec::with_capacity(n_out));
            for j in 0..n_out {
                let row = &weights[j * n_in..(j + 1) * n_in];
                let mut z = bias[j];
                let mut z1 = Scalar::zero();
                let mut z2 = Scalar::zero();
                for k in 0..n_in {
                    z = z + row[k] * v[k];
                    z1 = z1 + row[k] * d1[k];
                    if second {
                        z2 = z2 + row[k] * d2[k];
                    }
                }
                if l + 1 < layers {
                    // h = tanh z, h' = (1 − h²) z', h'' = (1 − h²) z'' − 2 h h' z'.
                    let h = z.tanh();
                    let s = Scalar::one() - h * h;
                    let h1 = s * z1;
                    if second {
                        n2.push(s * z2 - h * h1 * z1 * F::from(2).expect("2"));
                    }
                    nv.push(h);
                    n1.push(h1);
                } else {
                    nv.push(z);
                    n1.push(z1);
                    n2.push(z2);
                }
            }
            v = nv;
            d1 = n1;
            d2 = n2;
        }
        Ok(Jet { t: tv, x: v[0], dx: d1[0], ddx: second.then(|| d2[0]) })
    }
}

/// Value and time derivatives of a scalar trial function at one point.
#[derive(Clone, Copy, Debug)]
pub struct Jet<'t, F: Real> {
    pub t: Scalar<'t, F>,
    pub x: Scalar<'t, F>,
    pub dx: Scalar<'t, F>,
    /// Present when the jet was built with order 2.
    pub ddx: Option<Scalar<'t, F>>,
}

/// Evaluates `f` at a fresh tape variable `t` and records `dx/dt` (and
/// `d²x/dt²` for `order ≥ 2`) as differentiable expressions.
pub fn jet<'t, F: Real>(
    tape: &'t Tape<F>,
    f: &dyn Fn(Scalar<'t, F>) -> Scalar<'t, F>,
    t: F,
    order: usize,
) -> Result<Jet<'t, F>, AdError> {
    let tv = tape.var(t)?;
    let x = f(tv);
    let dx = tape.grad_expr(x, &[tv])?[0];
    let ddx = if order >= 2 { Some(tape.grad_expr(dx, &[tv])?[0]) } else { None };
    Ok(Jet { t: tv, x, dx, ddx })
}

/// Something a loss can evaluate: a bound network or an analytic stub.
pub trait Trial<'t, F: Real> {
    /// Value at a tape-free time point.
    fn value_at(&self, t: F) -> Scalar<'t, F>;
    /// Value and time derivatives at `t` (see [`Jet`]).
    fn jet_at(&self, tape: &'t Tape<F>, t: F, order: usize) -> Result<Jet<'t, F>, AdError>;
}

impl<'t, F: Real> Trial<'t, F> for BoundMlp<'t, F> {
    fn value_at(&self, t: F) -> Scalar<'t, F> {
        self.scalar(Scalar::constant(t))
    }

    fn jet_at(&self, tape: &'t Tape<F>, t: F, order: usize) -> Result<Jet<'t, F>, AdError> {
        self.time_jet(tape, t, order).map_err(|e| match e {
            NetworkError::Ad(e) => e,
            other => AdError::Domain { op: "jet", detail: other.to_string() },
        })
    }
}

/// Closed-form trial function `t ↦ f(t)` composed from tape operations.
pub struct Analytic<G>(pub G);

impl<G> Analytic<G> {
    /// Wraps a closure that works on any tape (helps closure inference).
    pub fn new<F: Real>(g: G) -> Self
    where
        G: for<'t> Fn(Scalar<'t, F>) -> Scalar<'t, F>,
    {
        Analytic(g)
    }
}

impl<'t, F: Real, G: Fn(Scalar<'t, F>) -> Scalar<'t, F>> Trial<'t, F> for Analytic<G> {
    fn value_at(&self, t: F) -> Scalar<'t, F> {
        (self.0)(Scalar::constant(t))
    }

    fn jet_at(&self, tape: &'t Tape<F>, t: F, order: usize) -> Result<Jet<'t, F>, AdError> {
        jet(tape, &self.0, t, order)
    }
}

/// Learnable real, optionally confined to an open interval through
/// `lo + (hi − lo)·sigmoid(raw)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstrainedParam<F> {
    raw: F,
    bounds: Option<(F, F)>,
}

impl<F: Real> ConstrainedParam<F> {
    pub fn free(value: F) -> Self {
        ConstrainedParam { raw: value, bounds: None }
    }

    /// Starts at `value`, which must lie strictly inside `(lo, hi)`.
    pub fn bounded(lo: F, hi: F, value: F) -> Result<Self, NetworkError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(NetworkError::Bounds { lo: crate::to_f64(lo), hi: crate::to_f64(hi) });
        }
        if !(value > lo && value < hi) {
            return Err(NetworkError::Outside {
                value: crate::to_f64(value),
                lo: crate::to_f64(lo),
                hi: crate::to_f64(hi),
            });
        }
        let p = (value - lo) / (hi - lo);
        let raw = (p / (F::one() - p)).ln();
        Ok(ConstrainedParam { raw: raw.max(-Self::raw_limit()).min(Self::raw_limit()), bounds: Some((lo, hi)) })
    }

    /// `|raw|` is capped here so the sigmoid never rounds to 0 or 1.
    fn raw_limit() -> F {
        crate::lit::<F>(0.5) * F::epsilon().recip().ln()
    }

    pub fn raw(&self) -> F {
        self.raw
    }

    pub fn set_raw(&mut self, raw: F) {
        self.raw = raw;
    }

    pub fn bounds(&self) -> Option<(F, F)> {
        self.bounds
    }

    /// Differentiable value for a raw variable (or constant).
    pub fn value<'t>(&self, raw: Scalar<'t, F>) -> Scalar<'t, F> {
        match self.bounds {
            None => raw,
            Some((lo, hi)) => {
                let lim = Self::raw_limit();
                raw.clamp(-lim, lim).sigmoid() * (hi - lo) + lo
            }
        }
    }

    pub fn value_plain(&self) -> F {
        match self.bounds {
            None => self.raw,
            Some((lo, hi)) => {
                let lim = Self::raw_limit();
                let r = self.raw.max(-lim).min(lim);
                let half: F = crate::lit(0.5);
                lo + (hi - lo) * half * (F::one() + (r * half).tanh())
            }
        }
    }
}

#[cfg(test)]
mod tests;
