//! Reverse-mode automatic differentiation on a recording tape.
//!
//! Every elementary operation appends one node holding its operand indices
//! and numeric local partials. [`Tape::gradient`] replays adjoints over the
//! recorded nodes. [`Tape::grad_expr`] instead *records* the adjoint sweep as
//! new nodes, so a first derivative is itself a [`Scalar`] that can be
//! differentiated again; this is how second derivatives of a network with
//! respect to its input (and then with respect to its weights) are obtained.
//!
//! Constants are tape-free. Combining values that live on two different
//! tapes is an error, never a silent promotion.
//!
//! A tape is single-writer: recording goes through interior mutability and
//! `Tape` is deliberately `!Sync`. Use one tape per thread.

mod ops;
mod reverse;

use std::cell::RefCell;
use std::fmt;

use thiserror::Error;

use crate::Real;

/// Elementary operations the tape can record. Everything else is composed
/// from these.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Exp,
    Ln,
    Tanh,
    Sin,
    Min,
    Max,
    Abs,
    Neg,
}

impl Op {
    pub fn name(self) -> &'static str {
        match self {
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Pow => "pow",
            Op::Exp => "exp",
            Op::Ln => "ln",
            Op::Tanh => "tanh",
            Op::Sin => "sin",
            Op::Min => "min",
            Op::Max => "max",
            Op::Abs => "abs",
            Op::Neg => "neg",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Pow | Op::Min | Op::Max => 2,
            Op::Exp | Op::Ln | Op::Tanh | Op::Sin | Op::Abs | Op::Neg => 1,
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum AdError {
    #[error("domain violation in {op}: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("operands of {op} live on different tapes")]
    TapeMismatch { op: &'static str },
    #[error("{op} expects {expected} argument(s), got {got}")]
    Arity { op: &'static str, expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Arg<F> {
    Absent,
    Node(u32),
    Const(F),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Kind {
    Leaf,
    Op(Op),
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Node<F> {
    pub(crate) kind: Kind,
    pub(crate) lhs: Arg<F>,
    pub(crate) rhs: Arg<F>,
    pub(crate) value: F,
    pub(crate) d_lhs: F,
    pub(crate) d_rhs: F,
}

/// Append-only record of elementary operations. Node indices are
/// topologically ordered because a node can only reference earlier nodes.
pub struct Tape<F: Real> {
    nodes: RefCell<Vec<Node<F>>>,
    error: RefCell<Option<AdError>>,
}

impl<F: Real> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> fmt::Debug for Tape<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("len", &self.len()).field("error", &*self.error.borrow()).finish()
    }
}

impl<F: Real> Tape<F> {
    pub fn new() -> Self {
        Self::with_capacity(0)
    }

    pub fn with_capacity(capacity: usize) -> Self {
        Tape { nodes: RefCell::new(Vec::with_capacity(capacity)), error: RefCell::new(None) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops every node (keeping the allocation). Requires that no
    /// [`Scalar`] borrowing this tape is alive.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
        *self.error.get_mut() = None;
    }

    /// First error raised by an infallible operator (`+`, `*`, `.exp()`, ...)
    /// on this tape, if any. Gradient extraction refuses to run while set.
    pub fn error(&self) -> Option<AdError> {
        self.error.borrow().clone()
    }

    /// Registers an independent variable.
    pub fn var(&self, value: F) -> Result<Scalar<'_, F>, AdError> {
        if !value.is_finite() {
            return Err(AdError::NonFinite { op: "var" });
        }
        let index = self.push(Node {
            kind: Kind::Leaf,
            lhs: Arg::Absent,
            rhs: Arg::Absent,
            value,
            d_lhs: F::zero(),
            d_rhs: F::zero(),
        });
        Ok(Scalar { value, var: Some(Var { tape: self, index }) })
    }

    /// Registers a batch of independent variables.
    pub fn vars(&self, values: &[F]) -> Result<Vec<Scalar<'_, F>>, AdError> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    /// Records `op` applied to `args`. Arguments may be tape-free constants
    /// or live on this tape.
    pub fn record<'t>(&'t self, op: Op, args: &[Scalar<'t, F>]) -> Result<Scalar<'t, F>, AdError> {
        if args.len() != op.arity() {
            return Err(AdError::Arity { op: op.name(), expected: op.arity(), got: args.len() });
        }
        for a in args {
            if let Some(v) = a.var {
                if !std::ptr::eq(v.tape, self) {
                    return Err(AdError::TapeMismatch { op: op.name() });
                }
            }
        }
        let out = if op.arity() == 2 { Scalar::binary(op, args[0], args[1])? } else { Scalar::unary(op, args[0])? };
        // All-constant arguments fold to a constant; anchor it on this tape
        // so the caller always gets a recorded value back.
        match out.var {
            Some(_) => Ok(out),
            None => self.var(out.value),
        }
    }

    #[inline]
    fn push(&self, node: Node<F>) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let index = u32::try_from(nodes.len()).expect("tape exceeds u32::MAX nodes");
        nodes.push(node);
        index
    }

    pub(crate) fn node(&self, index: u32) -> Node<F> {
        self.nodes.borrow()[index as usize]
    }

    pub(crate) fn node_range(&self, lo: usize, hi: usize) -> Vec<Node<F>> {
        self.nodes.borrow()[lo..=hi].to_vec()
    }

    pub(crate) fn poison(&self, err: AdError) {
        let mut slot = self.error.borrow_mut();
        if slot.is_none() {
            *slot = Some(err);
        }
    }

    fn check_healthy(&self) -> Result<(), AdError> {
        match self.error() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Copy)]
pub(crate) struct Var<'t, F: Real> {
    pub(crate) tape: &'t Tape<F>,
    pub(crate) index: u32,
}

/// A real value that is either a tape-free constant or a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Scalar<'t, F: Real> {
    value: F,
    var: Option<Var<'t, F>>,
}

impl<F: Real> fmt::Debug for Scalar<'_, F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.var {
            Some(v) => write!(f, "Scalar({:?} @ {})", self.value, v.index),
            None => write!(f, "Scalar({:?} const)", self.value),
        }
    }
}

impl<'t, F: Real> Scalar<'t, F> {
    /// A tape-free constant. Non-finite constants are caught when they are
    /// first combined with a recorded value; use [`Scalar::try_constant`]
    /// to validate external input eagerly.
    pub fn constant(value: F) -> Self {
        Scalar { value, var: None }
    }

    pub fn try_constant(value: F) -> Result<Self, AdError> {
        if value.is_finite() {
            Ok(Self::constant(value))
        } else {
            Err(AdError::NonFinite { op: "constant" })
        }
    }

    pub fn zero() -> Self {
        Self::constant(F::zero())
    }

    pub fn one() -> Self {
        Self::constant(F::one())
    }

    pub fn value(&self) -> F {
        self.value
    }

    pub fn is_constant(&self) -> bool {
        self.var.is_none()
    }

    /// Index of the backing node, if recorded.
    pub fn index(&self) -> Option<usize> {
        self.var.map(|v| v.index as usize)
    }

    pub(crate) fn tape(&self) -> Option<&'t Tape<F>> {
        self.var.map(|v| v.tape)
    }

    pub(crate) fn from_parts(tape: &'t Tape<F>, index: u32, value: F) -> Self {
        Scalar { value, var: Some(Var { tape, index }) }
    }

    pub(crate) fn from_node(tape: &'t Tape<F>, index: u32) -> Self {
        Scalar { value: tape.node(index).value, var: Some(Var { tape, index }) }
    }

    /// Whether two scalars may be combined (at most one tape involved).
    pub fn same_tape(&self, other: &Scalar<'t, F>) -> bool {
        match (self.var, other.var) {
            (Some(a), Some(b)) => std::ptr::eq(a.tape, b.tape),
            _ => true,
        }
    }

    pub(crate) fn unary(op: Op, a: Self) -> Result<Self, AdError> {
        let x = a.value;
        if !x.is_finite() {
            return Err(AdError::NonFinite { op: op.name() });
        }
        let (value, d) = match op {
            Op::Exp => {
                let v = x.exp();
                (v, v)
            }
            Op::Ln => {
                if x <= F::zero() {
                    return Err(AdError::Domain { op: "ln", detail: format!("argument {x:?} is not positive") });
                }
                (x.ln(), x.recip())
            }
            Op::Tanh => {
                let v = x.tanh();
                (v, F::one() - v * v)
            }
            Op::Sin => (x.sin(), x.cos()),
            // Left derivative at the kink.
            Op::Abs => (x.abs(), if x > F::zero() { F::one() } else { -F::one() }),
            Op::Neg => (-x, -F::one()),
            _ => unreachable!("{op} is not unary"),
        };
        if !value.is_finite() {
            return Err(AdError::NonFinite { op: op.name() });
        }
        match a.var {
            None => Ok(Scalar::constant(value)),
            Some(v) => {
                let index = v.tape.push(Node {
                    kind: Kind::Op(op),
                    lhs: Arg::Node(v.index),
                    rhs: Arg::Absent,
                    value,
                    d_lhs: d,
                    d_rhs: F::zero(),
                });
                Ok(Scalar { value, var: Some(Var { tape: v.tape, index }) })
            }
        }
    }

    #[inline]
    pub(crate) fn binary(op: Op, a: Self, b: Self) -> Result<Self, AdError> {
        let tape = match (a.var, b.var) {
            (Some(x), Some(y)) if !std::ptr::eq(x.tape, y.tape) => {
                return Err(AdError::TapeMismatch { op: op.name() });
            }
            (Some(x), _) => Some(x.tape),
            (None, Some(y)) => Some(y.tape),
            (None, None) => None,
        };
        let (x, y) = (a.value, b.value);
        if !x.is_finite() || !y.is_finite() {
            return Err(AdError::NonFinite { op: op.name() });
        }
        let zero = F::zero();
        let one = F::one();

        // Algebraic identities with constants keep recorded derivative
        // graphs small; they never change values.
        if tape.is_some() {
            match op {
                Op::Add if a.is_constant() && x == zero => return Ok(b),
                Op::Add | Op::Sub if b.is_constant() && y == zero => return Ok(a),
                Op::Mul if a.is_constant() && x == one => return Ok(b),
                Op::Mul | Op::Div if b.is_constant() && y == one => return Ok(a),
                Op::Mul if (a.is_constant() && x == zero) || (b.is_constant() && y == zero) => {
                    return Ok(Scalar::zero());
                }
                _ => {}
            }
        }

        let (value, dx, dy) = match op {
            Op::Add => (x + y, one, one),
            Op::Sub => (x - y, one, -one),
            Op::Mul => (x * y, y, x),
            Op::Div => {
                if y == zero {
                    return Err(AdError::Domain { op: "div", detail: "division by zero".into() });
                }
                let v = x / y;
                (v, y.recip(), -v / y)
            }
            Op::Pow => Self::pow_parts(x, y, b.is_constant())?,
            Op::Min => {
                if x <= y {
                    (x, one, zero)
                } else {
                    (y, zero, one)
                }
            }
            Op::Max => {
                if x >= y {
                    (x, one, zero)
                } else {
                    (y, zero, one)
                }
            }
            _ => unreachable!("{op} is not binary"),
        };
        if !value.is_finite() || !dx.is_finite() || !dy.is_finite() {
            return Err(AdError::NonFinite { op: op.name() });
        }
        let Some(tape) = tape else {
            return Ok(Scalar::constant(value));
        };
        let arg = |s: Self| match s.var {
            Some(v) => Arg::Node(v.index),
            None => Arg::Const(s.value),
        };
        let index = tape.push(Node { kind: Kind::Op(op), lhs: arg(a), rhs: arg(b), value, d_lhs: dx, d_rhs: dy });
        Ok(Scalar { value, var: Some(Var { tape, index }) })
    }

    fn pow_parts(base: F, exponent: F, exponent_const: bool) -> Result<(F, F, F), AdError> {
        let zero = F::zero();
        if exponent_const {
            if base < zero && exponent.fract() != zero {
                return Err(AdError::Domain {
                    op: "pow",
                    detail: format!("negative base {base:?} with non-integer exponent {exponent:?}"),
                });
            }
            if base == zero && exponent < F::one() && exponent != zero {
                return Err(AdError::Domain {
                    op: "pow",
                    detail: format!("zero base with exponent {exponent:?} has no finite derivative"),
                });
            }
            if exponent == zero {
                return Ok((F::one(), zero, zero));
            }
            let value = base.powf(exponent);
            Ok((value, exponent * base.powf(exponent - F::one()), zero))
        } else {
            if base <= zero {
                return Err(AdError::Domain {
                    op: "pow",
                    detail: format!("base {base:?} must be positive for a variable exponent"),
                });
            }
            let value = base.powf(exponent);
            Ok((value, exponent * base.powf(exponent - F::one()), value * base.ln()))
        }
    }

    /// Infallible wrapper used by operator overloads: errors poison the
    /// tape and yield a NaN constant.
    #[inline]
    pub(crate) fn binary_or_poison(op: Op, a: Self, b: Self) -> Self {
        match Self::binary(op, a, b) {
            Ok(s) => s,
            Err(e) => {
                if let Some(t) = a.tape().or(b.tape()) {
                    t.poison(e);
                }
                Scalar::constant(F::nan())
            }
        }
    }

    pub(crate) fn unary_or_poison(op: Op, a: Self) -> Self {
        match Self::unary(op, a) {
            Ok(s) => s,
            Err(e) => {
                if let Some(t) = a.tape() {
                    t.poison(e);
                }
                Scalar::constant(F::nan())
            }
        }
    }

    pub fn exp(self) -> Self {
        Self::unary_or_poison(Op::Exp, self)
    }

    pub fn ln(self) -> Self {
        Self::unary_or_poison(Op::Ln, self)
    }

    pub fn tanh(self) -> Self {
        Self::unary_or_poison(Op::Tanh, self)
    }

    pub fn sin(self) -> Self {
        Self::unary_or_poison(Op::Sin, self)
    }

    /// `sin(π/2 − x)`; nesting stays exact at `x = 0`.
    pub fn cos(self) -> Self {
        (Scalar::constant(F::FRAC_PI_2()) - self).sin()
    }

    pub fn abs(self) -> Self {
        Self::unary_or_poison(Op::Abs, self)
    }

    pub fn min(self, other: Self) -> Self {
        Self::binary_or_poison(Op::Min, self, other)
    }

    pub fn max(self, other: Self) -> Self {
        Self::binary_or_poison(Op::Max, self, other)
    }

    pub fn pow(self, exponent: Self) -> Self {
        Self::binary_or_poison(Op::Pow, self, exponent)
    }

    pub fn powf(self, exponent: F) -> Self {
        self.pow(Scalar::constant(exponent))
    }

    pub fn square(self) -> Self {
        self * self
    }

    pub fn sqrt(self) -> Self {
        self.powf(crate::lit(0.5))
    }

    pub fn recip(self) -> Self {
        Scalar::one() / self
    }

    /// Logistic function composed from `tanh`: `0.5 * (1 + tanh(x / 2))`.
    pub fn sigmoid(self) -> Self {
        let half: F = crate::lit(0.5);
        ((self * half).tanh() + F::one()) * half
    }

    /// Clamps into `[lo, hi]` via `min`/`max`; the gradient vanishes outside.
    pub fn clamp(self, lo: F, hi: F) -> Self {
        self.max(Scalar::constant(lo)).min(Scalar::constant(hi))
    }

    /// Sum of an iterator of scalars; empty sums are a zero constant.
    pub fn sum<I: IntoIterator<Item = Self>>(items: I) -> Self {
        items.into_iter().fold(Scalar::zero(), |acc, s| acc + s)
    }
}

impl<F: Real> Tape<F> {
    /// `∂output/∂inputᵢ` as plain numbers. Inputs that `output` does not
    /// depend on (including constants) get zero.
    pub fn gradient<'t>(&'t self, output: Scalar<'t, F>, inputs: &[Scalar<'t, F>]) -> Result<Vec<F>, AdError> {
        self.check_healthy()?;
        self.check_membership(output, inputs)?;
        if !output.value.is_finite() {
            return Err(AdError::NonFinite { op: "gradient" });
        }
        reverse::numeric(self, output, inputs)
    }

    /// `∂output/∂inputᵢ` recorded as new tape nodes, so the results can be
    /// differentiated again.
    pub fn grad_expr<'t>(
        &'t self,
        output: Scalar<'t, F>,
        inputs: &[Scalar<'t, F>],
    ) -> Result<Vec<Scalar<'t, F>>, AdError> {
        self.check_healthy()?;
        self.check_membership(output, inputs)?;
        let out = reverse::recorded(self, output, inputs)?;
        self.check_healthy()?;
        Ok(out)
    }

    /// `d²output/dinput²` via differentiation of the recorded first
    /// derivative.
    pub fn derivative_of_derivative<'t>(&'t self, output: Scalar<'t, F>, input: Scalar<'t, F>) -> Result<F, AdError> {
        let first = self.grad_expr(output, &[input])?;
        Ok(self.gradient(first[0], &[input])?[0])
    }

    fn check_membership<'t>(&'t self, output: Scalar<'t, F>, inputs: &[Scalar<'t, F>]) -> Result<(), AdError> {
        let on_self = |s: &Scalar<'t, F>| s.var.is_none_or(|v| std::ptr::eq(v.tape, self));
        if !on_self(&output) || !inputs.iter().all(on_self) {
            return Err(AdError::TapeMismatch { op: "gradient" });
        }
        Ok(())
    }
}
