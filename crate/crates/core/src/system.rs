use alloc::format;
use alloc::string::String;

use crate::scalar::Scalar;

/// A control-affine system `ẋ = f(x) + Σ g_j(x) u_j` with a deck of `q`
/// candidate scalar outputs `y_i = h_i(x)`.
///
/// Evaluators are generic over [`Scalar`] so the same code runs on plain
/// floats and on lifted jets. They must be smooth and total on the
/// operating region.
pub trait ControlAffineSystem {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn deck_len(&self) -> usize;

    /// Drift vector field `f(x)`, written into `out` (length `n`).
    fn drift<T: Scalar>(&self, x: &[T], out: &mut [T]);

    /// Input vector field `g_j(x)`, written into `out` (length `n`).
    fn input_field<T: Scalar>(&self, j: usize, x: &[T], out: &mut [T]);

    /// Deck output `h_i(x)`.
    fn output<T: Scalar>(&self, i: usize, x: &[T]) -> T;

    fn output_name(&self, i: usize) -> String {
        format!("y{}", i + 1)
    }

    /// Full closed-loop vector field `f(x) + G(x)u` in plain floats.
    fn vector_field(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        self.drift(x, out);
        let n = self.state_dim();
        let mut g = alloc::vec![0.0; n];
        for (j, uj) in u.iter().enumerate() {
            self.input_field(j, x, &mut g);
            for k in 0..n {
                out[k] += g[k] * uj;
            }
        }
    }
}

/// `inner` with its deck restricted to (and reordered as) `outputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubDeck<S> {
    pub inner: S,
    pub outputs: alloc::vec::Vec<usize>,
}

impl<S: ControlAffineSystem> ControlAffineSystem for SubDeck<S> {
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }
    fn deck_len(&self) -> usize {
        self.outputs.len()
    }
    fn drift<T: Scalar>(&self, x: &[T], out: &mut [T]) {
        self.inner.drift(x, out)
    }
    fn input_field<T: Scalar>(&self, j: usize, x: &[T], out: &mut [T]) {
        self.inner.input_field(j, x, out)
    }
    fn output<T: Scalar>(&self, i: usize, x: &[T]) -> T {
        self.inner.output(self.outputs[i], x)
    }
    fn output_name(&self, i: usize) -> String {
        self.inner.output_name(self.outputs[i])
    }
}
