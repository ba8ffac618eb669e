//! Output-jet coordinates `Φ_σ`, their Newton inverse `Ψ_σ`, and the
//! cross maps `Θ_{i,σ} = Φ_i ∘ Ψ_σ`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lie;
use crate::linalg::cond2;
use crate::meld::{Meld, DEFAULT_COND_MAX};
use crate::system::ControlAffineSystem;

/// Stacked jets `(y_i, …, y_i^{(r_i-1)})` of the given outputs.
pub fn output_jets<S: ControlAffineSystem>(
    sys: &S,
    outputs: &[usize],
    degrees: &[usize],
    x: &[f64],
) -> Result<Vec<f64>> {
    let depth = degrees.iter().copied().max().unwrap_or(1);
    let d = lie::drift_derivatives(sys, outputs, depth.saturating_sub(1), x)?;
    Ok(d.iter().zip(degrees).flat_map(|(row, &r)| row[..r].iter().copied()).collect())
}

/// `Φ_σ(x)`.
pub fn phi_map<S: ControlAffineSystem>(sys: &S, meld: &Meld, x: &[f64]) -> Result<Vec<f64>> {
    output_jets(sys, &meld.outputs, &meld.degrees, x)
}

/// `DΦ_σ(x)` as a dense matrix.
pub fn phi_jacobian<S: ControlAffineSystem>(sys: &S, meld: &Meld, x: &[f64]) -> Result<DMatrix<f64>> {
    let rows = lie::jet_jacobian(sys, &meld.outputs, &meld.degrees, x)?;
    Ok(DMatrix::from_row_slice(meld.dim(), sys.state_dim(), &rows))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Absolute residual target.
    pub tol: f64,
    pub cond_max: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iterations: 50, tol: 1e-10, cond_max: DEFAULT_COND_MAX }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|a| a * a).sum())
}

/// Damped Newton solve of `Φ_σ(x) = target` from `guess`.
pub fn psi_solve<S: ControlAffineSystem>(
    sys: &S,
    meld: &Meld,
    target: &[f64],
    guess: &[f64],
    opts: &NewtonOptions,
) -> Result<NewtonSolution> {
    let n = sys.state_dim();
    if meld.dim() != n || target.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: target.len() });
    }
    let mut x = guess.to_vec();
    let residual_at = |x: &[f64]| -> Result<Vec<f64>> {
        Ok(phi_map(sys, meld, x)?.iter().zip(target).map(|(a, b)| a - b).collect())
    };
    let mut r = residual_at(&x)?;
    let mut rn = norm(&r);
    let mut it = 0;
    while rn > opts.tol {
        if it == opts.max_iterations {
            return Err(Error::InversionFailure { iterations: it, residual: rn });
        }
        it += 1;
        let j = phi_jacobian(sys, meld, &x)?;
        if !(cond2(&j) < opts.cond_max) {
            return Err(Error::InversionFailure { iterations: it, residual: rn });
        }
        let step = j
            .lu()
            .solve(&DVector::from_column_slice(&r))
            .ok_or(Error::InversionFailure { iterations: it, residual: rn })?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a - lambda * d).collect();
            let rt = match residual_at(&trial) {
                Ok(v) => v,
                Err(Error::NonFiniteEvaluation) => alloc::vec![f64::INFINITY; n],
                Err(e) => return Err(e),
            };
            let tn = norm(&rt);
            if tn < rn || lambda < 1e-6 {
                if !(tn < rn) && tn > opts.tol {
                    return Err(Error::InversionFailure { iterations: it, residual: rn });
                }
                x = trial;
                r = rt;
                rn = tn;
                break;
            }
            lambda *= 0.5;
        }
    }
    Ok(NewtonSolution { x, iterations: it, residual: rn })
}

/// `Ψ_σ(target)`.
pub fn psi_map<S: ControlAffineSystem>(
    sys: &S,
    meld: &Meld,
    target: &[f64],
    guess: &[f64],
    opts: &NewtonOptions,
) -> Result<Vec<f64>> {
    psi_solve(sys, meld, target, guess, opts).map(|s| s.x)
}

/// `Θ_{i,σ}(ȳ_σ) = Φ_i(Ψ_σ(ȳ_σ))`, where `r_i` is the degree of output `i`.
#[allow(clippy::too_many_arguments)]
pub fn theta_map<S: ControlAffineSystem>(
    sys: &S,
    i: usize,
    r_i: usize,
    meld: &Meld,
    ybar_sigma: &[f64],
    guess: &[f64],
    opts: &NewtonOptions,
) -> Result<Vec<f64>> {
    let x = psi_map(sys, meld, ybar_sigma, guess, opts)?;
    output_jets(sys, &[i], &[r_i], &x)
}

/// Spectral norms of the Jacobians of `Ψ_σ` and of every `Θ_{i,σ}` at
/// `ȳ_σ = Φ_σ(x)`, obtained from `DΦ` at `x` by the inverse function theorem.
#[derive(Clone, Debug, PartialEq)]
pub struct InverseNorms {
    pub cond: f64,
    pub psi: f64,
    /// Indexed by deck output.
    pub theta: Vec<f64>,
}

fn row_offsets(degrees: &[usize]) -> Vec<usize> {
    degrees
        .iter()
        .scan(0, |acc, r| {
            let o = *acc;
            *acc += r;
            Some(o)
        })
        .collect()
}

/// `DΦ_σ(x)` assembled from the stacked deck Jacobian `DΦ_Δ(x)`.
pub fn select_jacobian(deck_jac: &DMatrix<f64>, deck_degrees: &[usize], meld: &Meld) -> DMatrix<f64> {
    let offsets = row_offsets(deck_degrees);
    let mut dphi = DMatrix::zeros(meld.dim(), deck_jac.ncols());
    let mut row = 0;
    for (&i, &r) in meld.outputs.iter().zip(&meld.degrees) {
        for k in 0..r {
            dphi.set_row(row, &deck_jac.row(offsets[i] + k));
            row += 1;
        }
    }
    dphi
}

/// `deck_jac` is the stacked jet Jacobian of every deck output with
/// `deck_degrees`, as returned by [`lie::jet_jacobian`]. `None` when
/// `DΦ_σ` is not invertible within `cond_max`.
pub fn inverse_jacobian_norms(
    deck_jac: &DMatrix<f64>,
    deck_degrees: &[usize],
    meld: &Meld,
    cond_max: f64,
) -> Option<InverseNorms> {
    let n = deck_jac.ncols();
    let dphi = select_jacobian(deck_jac, deck_degrees, meld);
    if dphi.nrows() != n || dphi.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let svd = dphi.svd(true, true);
    let max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let min = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(cond < cond_max) {
        return None;
    }
    let psi = svd.pseudo_inverse(0.0).ok()?;
    let offsets = row_offsets(deck_degrees);
    let theta = deck_degrees
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let j = deck_jac.rows(offsets[i], r) * &psi;
            let g = &j * j.transpose();
            let top = g.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max);
            libm::sqrt(top)
        })
        .collect();
    Some(InverseNorms { cond, psi: 1.0 / min, theta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meld::Choice;
    use crate::models::Arm3;
    use alloc::vec;

    fn joints() -> Meld {
        Meld::new(Choice::parse_bits("1110000").unwrap(), vec![2, 2, 2]).unwrap()
    }

    #[test]
    fn joint_meld_is_a_permutation() {
        let sys = Arm3::default();
        let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        assert_eq!(phi_map(&sys, &joints(), &x).unwrap(), vec![0.1, 0.4, 0.2, 0.5, 0.3, 0.6]);
        let s = psi_solve(&sys, &joints(), &[0.1, 0.4, 0.2, 0.5, 0.3, 0.6], &[0.0; 6], &NewtonOptions::default())
            .unwrap();
        assert_eq!(s.iterations, 1);
        for (a, b) in s.x.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cartesian_round_trip() {
        let sys = Arm3::default();
        let m = Meld::new(Choice::parse_bits("0011100").unwrap(), vec![2, 2, 2]).unwrap();
        let x = [0.3, 0.9, 0.7, 0.2, -0.1, 0.3];
        let y = phi_map(&sys, &m, &x).unwrap();
        let guess = [0.35, 0.85, 0.72, 0.0, 0.0, 0.0];
        let back = psi_map(&sys, &m, &y, &guess, &NewtonOptions::default()).unwrap();
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-9);
        }
        let th = theta_map(&sys, 5, 2, &m, &y, &guess, &NewtonOptions::default()).unwrap();
        let (yy, yd) = sys.params.forward_outputs(&x[..3], &x[3..]);
        assert!((th[0] - yy[5]).abs() < 1e-9 && (th[1] - yd[5]).abs() < 1e-9);
    }

    #[test]
    fn singular_target_fails_cleanly() {
        let sys = Arm3::default();
        let m = Meld::new(Choice::parse_bits("0000111").unwrap(), vec![2, 2, 2]).unwrap();
        // a gripper target far outside the workspace
        let target = [5.0, 0.0, 5.0, 0.0, 7.0, 0.0];
        let guess = [0.2, 0.8, 0.6, 0.0, 0.0, 0.0];
        assert!(matches!(
            psi_map(&sys, &m, &target, &guess, &NewtonOptions::default()),
            Err(Error::InversionFailure { .. })
        ));
    }
}
