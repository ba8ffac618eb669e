use alloc::format;
use alloc::string::String;

use crate::scalar::Scalar;
use crate::system::ControlAffineSystem;

/// `ẋ1 = x2, ẋ2 = u` with deck `{x1, x2}`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DoubleIntegrator;

impl ControlAffineSystem for DoubleIntegrator {
    fn state_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn deck_len(&self) -> usize {
        2
    }

    fn drift<T: Scalar>(&self, x: &[T], out: &mut [T]) {
        out[0] = x[1];
        out[1] = T::zero();
    }

    fn input_field<T: Scalar>(&self, _j: usize, _x: &[T], out: &mut [T]) {
        out[0] = T::zero();
        out[1] = T::one();
    }

    fn output<T: Scalar>(&self, i: usize, x: &[T]) -> T {
        x[i]
    }

    fn output_name(&self, i: usize) -> String {
        format!("x{}", i + 1)
    }
}
