//! Linearizing control law, error chains and exponential envelope constants.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::lie::{self, DeckEvaluation};
use crate::linalg::{cond2, expm, solve_in_place, spectral_norm};
use crate::meld::Meld;
use crate::system::ControlAffineSystem;

/// Gain rows `k_i = [k_i⁰ … k_i^{r_i-1}]`, one per deck output.
#[derive(Clone, Debug, PartialEq)]
pub struct GainProfile {
    pub rows: Vec<Vec<f64>>,
}

impl GainProfile {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if r.is_empty() || !is_hurwitz(r) {
                return Err(Error::NotHurwitz { output: i });
            }
        }
        Ok(Self { rows })
    }

    /// The same row for every output.
    pub fn uniform(row: &[f64], deck_len: usize) -> Result<Self> {
        Self::new(vec![row.to_vec(); deck_len])
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    /// Check row lengths against relative degrees.
    pub fn check_degrees(&self, degrees: &[usize]) -> Result<()> {
        if degrees.len() != self.rows.len() {
            return Err(Error::DimensionMismatch { expected: self.rows.len(), found: degrees.len() });
        }
        for (r, k) in degrees.iter().zip(&self.rows) {
            if *r != k.len() {
                return Err(Error::DimensionMismatch { expected: *r, found: k.len() });
            }
        }
        Ok(())
    }
}

/// Routh test for `λ^r + k_{r-1} λ^{r-1} + … + k_0`.
pub fn is_hurwitz(k: &[f64]) -> bool {
    if k.is_empty() || k.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return false;
    }
    // descending coefficients 1, k_{r-1}, …, k_0
    let a: Vec<f64> = core::iter::once(1.0).chain(k.iter().rev().copied()).collect();
    let mut prev: Vec<f64> = a.iter().step_by(2).copied().collect();
    let mut cur: Vec<f64> = a.iter().skip(1).step_by(2).copied().collect();
    for _ in 0..k.len() {
        if !(cur[0] > 0.0) {
            return false;
        }
        let next: Vec<f64> = (0..prev.len().saturating_sub(1))
            .map(|j| {
                let c1 = cur.get(j + 1).copied().unwrap_or(0.0);
                (cur[0] * prev[j + 1] - prev[0] * c1) / cur[0]
            })
            .collect();
        if next.is_empty() {
            break;
        }
        prev = cur;
        cur = next;
    }
    true
}

/// Error-chain matrix `ξ̇ = A ξ` under `w = y^{d,(r)} + kᵀξ`.
pub fn companion(k: &[f64]) -> DMatrix<f64> {
    let r = k.len();
    let mut a = DMatrix::zeros(r, r);
    for i in 0..r.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    for (j, kj) in k.iter().enumerate() {
        a[(r - 1, j)] = -kj;
    }
    a
}

pub fn companion_roots(k: &[f64]) -> Vec<Complex<f64>> {
    companion(k).complex_eigenvalues().iter().copied().collect()
}

/// `ξ_i = ȳ_i^d − ȳ_i`.
pub fn error_state(reference: &[f64], jet: &[f64]) -> Result<Vec<f64>> {
    if reference.len() != jet.len() {
        return Err(Error::DimensionMismatch { expected: jet.len(), found: reference.len() });
    }
    Ok(reference.iter().zip(jet).map(|(a, b)| a - b).collect())
}

/// `w_i = y_i^{d,(r_i)} + k_iᵀ ξ_i`.
pub fn virtual_input(top_reference: f64, xi: &[f64], k: &[f64]) -> Result<f64> {
    if xi.len() != k.len() {
        return Err(Error::DimensionMismatch { expected: k.len(), found: xi.len() });
    }
    Ok(top_reference + xi.iter().zip(k).map(|(a, b)| a * b).sum::<f64>())
}

/// Virtual inputs for every deck output.
pub fn virtual_inputs(top_references: &[f64], xis: &[Vec<f64>], gains: &GainProfile) -> Result<Vec<f64>> {
    if top_references.len() != xis.len() || xis.len() != gains.rows.len() {
        return Err(Error::DimensionMismatch { expected: gains.rows.len(), found: xis.len() });
    }
    top_references
        .iter()
        .zip(xis)
        .zip(&gains.rows)
        .map(|((t, xi), k)| virtual_input(*t, xi, k))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlOutput {
    pub u: Vec<f64>,
    /// `‖A_σ u + Γ_σ b − Γ_σ w‖`.
    pub residual: f64,
    pub cond: f64,
    pub eval: DeckEvaluation,
}

/// `u = A_σ(x)⁻¹ (−Γ_σ b(x) + Γ_σ w)`; `w` is indexed by deck output.
pub fn control_law<S: ControlAffineSystem>(
    sys: &S,
    meld: &Meld,
    x: &[f64],
    w: &[f64],
    cond_max: f64,
) -> Result<ControlOutput> {
    if w.len() != sys.deck_len() {
        return Err(Error::DimensionMismatch { expected: sys.deck_len(), found: w.len() });
    }
    let eval = lie::evaluate_deck(sys, &meld.outputs, &meld.degrees, x)?;
    let ws: Vec<f64> = meld.outputs.iter().map(|&i| w[i]).collect();
    control_from_eval(eval, &ws, cond_max)
}

/// Control law from a precomputed evaluation and the selected `w_σ`.
pub fn control_from_eval(eval: DeckEvaluation, ws: &[f64], cond_max: f64) -> Result<ControlOutput> {
    let p = ws.len();
    let m = eval.interaction.len().checked_div(p).unwrap_or(0);
    if m != p || eval.top.len() != p {
        return Err(Error::NonSquare { outputs: p, inputs: m });
    }
    let a = DMatrix::from_row_slice(p, p, &eval.interaction);
    let cond = cond2(&a);
    if !(cond < cond_max) {
        return Err(Error::SingularInteraction { cond });
    }
    let rhs: Vec<f64> = ws.iter().zip(&eval.top).map(|(w, b)| w - b).collect();
    let mut u = rhs.clone();
    let mut lu = eval.interaction.clone();
    if !solve_in_place(&mut lu, &mut u, p) {
        return Err(Error::SingularInteraction { cond: f64::INFINITY });
    }
    let mut residual = 0.0;
    for i in 0..p {
        let mut acc = -rhs[i];
        for j in 0..p {
            acc += eval.interaction[i * p + j] * u[j];
        }
        residual += acc * acc;
    }
    Ok(ControlOutput { u, residual: libm::sqrt(residual), cond, eval })
}

/// Envelope `‖e^{A t}‖ ≤ C e^{−α t}` for the error chains of one meld.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeldConstants {
    pub c: f64,
    pub alpha: f64,
}

pub const ALPHA_MARGIN: f64 = 0.01;
pub const DEFECTIVE_GAP: f64 = 1e-6;

/// Envelope constants of a single companion block.
pub fn block_constants(k: &[f64]) -> Result<MeldConstants> {
    if !is_hurwitz(k) {
        return Err(Error::NotHurwitz { output: 0 });
    }
    let roots = companion_roots(k);
    let abscissa = roots.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let alpha = (1.0 - ALPHA_MARGIN) * (-abscissa);
    let r = roots.len();
    let mut gap = f64::INFINITY;
    for i in 0..r {
        for j in i + 1..r {
            gap = gap.min((roots[i] - roots[j]).norm());
        }
    }
    let c = if gap < DEFECTIVE_GAP {
        sampled_envelope(&companion(k), alpha)
    } else {
        let v = DMatrix::from_fn(r, r, |i, j| roots[j].powu(i as u32));
        let sv = v.svd(false, false).singular_values;
        let max = sv.iter().copied().fold(0.0, f64::max);
        let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    };
    Ok(MeldConstants { c: c.max(1.0), alpha })
}

/// `sup_t ‖e^{At}‖ e^{αt}` on a grid over `[0, 20/α]`.
pub fn sampled_envelope(a: &DMatrix<f64>, alpha: f64) -> f64 {
    let samples = 4000;
    let horizon = 20.0 / alpha;
    let step = expm(&(a * (horizon / samples as f64)));
    let mut e = DMatrix::identity(a.nrows(), a.ncols());
    let mut sup: f64 = 1.0;
    for s in 1..=samples {
        e = &e * &step;
        let t = horizon * s as f64 / samples as f64;
        sup = sup.max(spectral_norm(&e) * libm::exp(alpha * t));
    }
    sup
}

/// Constants of a meld: slowest decay and largest overshoot over its outputs.
pub fn meld_constants(meld: &Meld, gains: &GainProfile) -> Result<MeldConstants> {
    let mut out = MeldConstants { c: 1.0, alpha: f64::INFINITY };
    for &i in &meld.outputs {
        let b = block_constants(gains.row(i)).map_err(|_| Error::NotHurwitz { output: i })?;
        out.c = out.c.max(b.c);
        out.alpha = out.alpha.min(b.alpha);
    }
    if meld.outputs.is_empty() {
        return Err(Error::InvalidArgument("meld selects no outputs"));
    }
    Ok(out)
}

/// `(α, C) = (min α_σ, max C_σ)`.
pub fn global_constants(consts: &[MeldConstants]) -> Result<MeldConstants> {
    if consts.is_empty() {
        return Err(Error::EmptyMeldSet);
    }
    Ok(MeldConstants {
        c: consts.iter().map(|m| m.c).fold(f64::NEG_INFINITY, f64::max),
        alpha: consts.iter().map(|m| m.alpha).fold(f64::INFINITY, f64::min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hurwitz_examples() {
        assert!(is_hurwitz(&[15.0, 15.0]));
        assert!(!is_hurwitz(&[-1.0, 1.0]));
        assert!(is_hurwitz(&[2.0]));
        // λ³ + λ² + λ + 2 has roots with positive real part
        assert!(!is_hurwitz(&[2.0, 1.0, 1.0]));
        // (λ+1)³
        assert!(is_hurwitz(&[1.0, 3.0, 3.0]));
    }

    #[test]
    fn virtual_input_arithmetic() {
        assert_eq!(virtual_input(0.0, &[0.1, -0.2], &[15.0, 15.0]).unwrap(), 15.0 * 0.1 + 15.0 * -0.2);
        assert!(virtual_input(0.0, &[0.1], &[15.0, 15.0]).is_err());
        let xi = error_state(&[1.0, 0.0], &[0.9, 0.1]).unwrap();
        assert!((xi[0] - 0.1).abs() < 1e-15 && (xi[1] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn scalar_block_constants() {
        let c = block_constants(&[2.0]).unwrap();
        assert!((c.alpha - 1.98).abs() < 1e-12);
        assert!((c.c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn arm_gain_block() {
        let c = block_constants(&[15.0, 15.0]).unwrap();
        let slow = (-15.0 + libm::sqrt(165.0)) / 2.0;
        assert!((c.alpha - 0.99 * -slow).abs() < 1e-10);
        assert!(c.c >= 1.0);
    }

    #[test]
    fn defective_block_uses_sampling() {
        // (λ+1)², a Jordan block
        let c = block_constants(&[1.0, 2.0]).unwrap();
        assert!((c.alpha - 0.99).abs() < 1e-6);
        assert!(c.c.is_finite() && c.c > 1.0);
    }

    #[test]
    fn global_extremes() {
        let g = global_constants(&[MeldConstants { alpha: 1.0, c: 3.0 }, MeldConstants { alpha: 2.0, c: 2.0 }]).unwrap();
        assert_eq!(g, MeldConstants { alpha: 1.0, c: 3.0 });
        assert_eq!(global_constants(&[]), Err(Error::EmptyMeldSet));
    }
}
