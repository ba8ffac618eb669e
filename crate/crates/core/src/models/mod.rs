//! Bundled system models.

mod arm3;
mod double_integrator;

pub use arm3::{Arm3, Arm3Params};
pub use double_integrator::DoubleIntegrator;

use alloc::string::String;

use crate::scalar::Scalar;
use crate::system::ControlAffineSystem;

/// Runtime selection among the bundled models.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Arm3(Arm3),
    DoubleIntegrator(DoubleIntegrator),
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            Model::Arm3($m) => $e,
            Model::DoubleIntegrator($m) => $e,
        }
    };
}

impl ControlAffineSystem for Model {
    fn state_dim(&self) -> usize {
        dispatch!(self, m => m.state_dim())
    }
    fn input_dim(&self) -> usize {
        dispatch!(self, m => m.input_dim())
    }
    fn deck_len(&self) -> usize {
        dispatch!(self, m => m.deck_len())
    }
    fn drift<T: Scalar>(&self, x: &[T], out: &mut [T]) {
        dispatch!(self, m => m.drift(x, out))
    }
    fn input_field<T: Scalar>(&self, j: usize, x: &[T], out: &mut [T]) {
        dispatch!(self, m => m.input_field(j, x, out))
    }
    fn output<T: Scalar>(&self, i: usize, x: &[T]) -> T {
        dispatch!(self, m => m.output(i, x))
    }
    fn output_name(&self, i: usize) -> String {
        dispatch!(self, m => m.output_name(i))
    }
}
