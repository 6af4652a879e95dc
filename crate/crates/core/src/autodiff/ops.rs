use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{Op, Scalar};
use crate::Real;

macro_rules! binary_impl {
    ($trait:ident, $method:ident, $op:expr) => {
        impl<'t, F: Real> $trait for Scalar<'t, F> {
            type Output = Scalar<'t, F>;
            fn $method(self, rhs: Scalar<'t, F>) -> Scalar<'t, F> {
                Scalar::binary_or_poison($op, self, rhs)
            }
        }

        impl<'t, F: Real> $trait<F> for Scalar<'t, F> {
            type Output = Scalar<'t, F>;
            fn $method(self, rhs: F) -> Scalar<'t, F> {
                Scalar::binary_or_poison($op, self, Scalar::constant(rhs))
            }
        }

        impl<'t> $trait<Scalar<'t, f64>> for f64 {
            type Output = Scalar<'t, f64>;
            fn $method(self, rhs: Scalar<'t, f64>) -> Scalar<'t, f64> {
                Scalar::binary_or_poison($op, Scalar::constant(self), rhs)
            }
        }

        impl<'t> $trait<Scalar<'t, f32>> for f32 {
            type Output = Scalar<'t, f32>;
            fn $method(self, rhs: Scalar<'t, f32>) -> Scalar<'t, f32> {
                Scalar::binary_or_poison($op, Scalar::constant(self), rhs)
            }
        }
    };
}

binary_impl!(Add, add, Op::Add);
binary_impl!(Sub, sub, Op::Sub);
binary_impl!(Mul, mul, Op::Mul);
binary_impl!(Div, div, Op::Div);

impl<'t, F: Real> Neg for Scalar<'t, F> {
    type Output = Scalar<'t, F>;
    fn neg(self) -> Scalar<'t, F> {
        Scalar::unary_or_poison(Op::Neg, self)
    }
}
