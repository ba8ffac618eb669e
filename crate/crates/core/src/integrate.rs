//! Fixed-step classical Runge–Kutta integration.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::system::ControlAffineSystem;

/// One RK4 step of `ẋ = F(t, x)`. `field` may fail (for instance when a
/// feedback law leaves its domain); the error is passed through.
pub fn rk4<F>(mut field: F, t: f64, x: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("step must be positive"));
    }
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    field(t, x, &mut k1)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    field(t + 0.5 * dt, &tmp, &mut k2)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    field(t + 0.5 * dt, &tmp, &mut k3)?;
    for i in 0..n {
        tmp[i] = x[i] + dt * k3[i];
    }
    field(t + dt, &tmp, &mut k4)?;
    let next: Vec<f64> = (0..n).map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t: t + dt });
    }
    Ok(next)
}

/// RK4 step of a control-affine system with `u` held over the step.
pub fn rk4_step<S: ControlAffineSystem>(sys: &S, x: &[f64], u: &[f64], dt: f64) -> Result<Vec<f64>> {
    rk4(
        |_, x, out| {
            sys.vector_field(x, u, out);
            Ok(())
        },
        0.0,
        x,
        dt,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_single_step() {
        let x = rk4(|_, x, o| { o[0] = -x[0]; Ok(()) }, 0.0, &[1.0], 0.1).unwrap();
        assert!((x[0] - 0.904_837_5).abs() < 1e-9);
        assert!((x[0] - libm::exp(-0.1)).abs() < 1e-7);
        let z = rk4(|_, _, o| { o[0] = 0.0; Ok(()) }, 0.0, &[3.0], 0.1).unwrap();
        assert_eq!(z, vec![3.0]);
    }

    #[test]
    fn non_finite_is_reported() {
        let r = rk4(|_, _, o| { o[0] = f64::INFINITY; Ok(()) }, 1.0, &[0.0], 0.5);
        assert_eq!(r, Err(Error::NonFiniteState { t: 1.5 }));
    }
}
