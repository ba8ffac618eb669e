//! Sampling estimates of the reference-consistency bound `N` and the
//! Lipschitz constants `L^Θ`, `L^Ψ`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::coords::{inverse_jacobian_norms, output_jets, psi_solve, NewtonOptions};
use crate::dwell::AssumptionConstants;
use crate::error::{Error, Result};
use crate::lie;
use crate::meld::{Meld, DEFAULT_COND_MAX};
use crate::reference::ReferenceBundle;
use crate::sampling::{nested_box_samples, StateBox};
use crate::schedule::SwitchSchedule;
use crate::system::ControlAffineSystem;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimationOptions {
    /// Latin-hypercube points per dyadic level of the box.
    pub samples_per_level: usize,
    /// Shrinking of the box stops below this half-width.
    pub min_half_width: f64,
    pub seed: u64,
    pub cond_max: f64,
    /// Spacing of the time grid used for `N`.
    pub time_step: f64,
    pub t_end: f64,
    /// Largest tolerated fraction of non-invertible samples.
    pub max_failure_fraction: f64,
    pub newton: NewtonOptions,
}

impl Default for EstimationOptions {
    fn default() -> Self {
        Self {
            samples_per_level: 2500,
            min_half_width: 0.05,
            seed: 42,
            cond_max: DEFAULT_COND_MAX,
            time_step: 0.01,
            t_end: 0.0,
            max_failure_fraction: 0.01,
            newton: NewtonOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimationReport {
    pub constants: AssumptionConstants,
    /// `(sample, meld)` pairs examined over the box.
    pub box_evaluations: usize,
    pub box_failures: usize,
    /// Time-grid points examined along the references.
    pub time_evaluations: usize,
    pub time_failures: usize,
    /// Per-meld `(L^Θ_σ, L^Ψ_σ)`.
    pub per_meld: Vec<(f64, f64)>,
}

fn deck_jacobian<S: ControlAffineSystem>(sys: &S, degrees: &[usize], x: &[f64]) -> Result<DMatrix<f64>> {
    let all: Vec<usize> = (0..sys.deck_len()).collect();
    let rows = lie::jet_jacobian(sys, &all, degrees, x)?;
    Ok(DMatrix::from_row_slice(degrees.iter().sum(), sys.state_dim(), &rows))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Estimate `N`, `L^Θ`, `L^Ψ`.
///
/// Lipschitz constants are the largest Jacobian spectral norms of `Ψ_σ` and
/// `Θ_{i,σ}` over nested Latin-hypercube samples of `bx`, together with
/// the reference states `χ(t)` of the scheduled meld. `N` is the largest
/// `‖ȳ_i^d(t) − Θ_{i,σ(t)}(ȳ^d_{σ(t)}(t))‖` on the time grid, using the meld
/// active at `t`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_assumption_constants<S: ControlAffineSystem>(
    sys: &S,
    deck_degrees: &[usize],
    melds: &[Meld],
    refs: &dyn ReferenceBundle,
    schedule: &SwitchSchedule,
    bx: &StateBox,
    opts: &EstimationOptions,
) -> Result<EstimationReport> {
    if melds.is_empty() {
        return Err(Error::EmptyMeldSet);
    }
    if bx.dim() != sys.state_dim() {
        return Err(Error::DimensionMismatch { expected: sys.state_dim(), found: bx.dim() });
    }
    if deck_degrees.len() != sys.deck_len() {
        return Err(Error::DimensionMismatch { expected: sys.deck_len(), found: deck_degrees.len() });
    }
    let mut per_meld = vec![(0.0f64, 0.0f64); melds.len()];
    let mut absorb = |id: usize, jac: &DMatrix<f64>| -> bool {
        match inverse_jacobian_norms(jac, deck_degrees, &melds[id], opts.cond_max) {
            Some(nrm) => {
                let th = nrm.theta.iter().copied().fold(0.0, f64::max);
                per_meld[id].0 = per_meld[id].0.max(th);
                per_meld[id].1 = per_meld[id].1.max(nrm.psi);
                true
            }
            None => false,
        }
    };

    let samples = nested_box_samples(bx, opts.samples_per_level, opts.min_half_width, opts.seed);
    let mut box_failures = 0;
    for x in &samples {
        let jac = deck_jacobian(sys, deck_degrees, x)?;
        for id in 0..melds.len() {
            if !absorb(id, &jac) {
                box_failures += 1;
            }
        }
    }
    let box_evaluations = samples.len() * melds.len();

    let orders: Vec<usize> = deck_degrees.iter().map(|r| r - 1).collect();
    let steps = if opts.time_step > 0.0 && opts.t_end > schedule.t0() {
        libm::floor((opts.t_end - schedule.t0()) / opts.time_step + 1e-9) as usize + 1
    } else {
        1
    };
    let mut n_bound: f64 = 0.0;
    let mut time_failures = 0;
    let mut guess: Option<Vec<f64>> = None;
    let mut last_meld = usize::MAX;
    for s in 0..steps {
        let t = schedule.t0() + s as f64 * opts.time_step;
        let id = schedule.melds[schedule.interval_at(t)];
        let meld = melds.get(id).ok_or(Error::IndexOutOfRange { index: id, len: melds.len() })?;
        let jets = refs.jets(t, &orders);
        let target: Vec<f64> = meld.outputs.iter().flat_map(|&i| jets[i].iter().copied()).collect();
        let start = match (&guess, refs.state(t)) {
            (Some(g), _) if id == last_meld => g.clone(),
            (_, Some(x)) => x,
            (Some(g), None) => g.clone(),
            (None, None) => bx.center(),
        };
        last_meld = id;
        let chi = match psi_solve(sys, meld, &target, &start, &opts.newton) {
            Ok(sol) => sol.x,
            Err(Error::InversionFailure { .. }) => {
                time_failures += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let jac = deck_jacobian(sys, deck_degrees, &chi)?;
        if !absorb(id, &jac) {
            time_failures += 1;
        }
        let all = output_jets(sys, &(0..sys.deck_len()).collect::<Vec<_>>(), deck_degrees, &chi)?;
        let mut off = 0;
        for (i, r) in deck_degrees.iter().enumerate() {
            n_bound = n_bound.max(dist(&jets[i], &all[off..off + r]));
            off += r;
        }
        guess = Some(chi);
    }

    let total = box_evaluations + steps;
    let failures = box_failures + time_failures;
    if failures as f64 > opts.max_failure_fraction * total as f64 {
        return Err(Error::EstimationFailure { failures, samples: total });
    }
    let l_theta = per_meld.iter().map(|p| p.0).fold(0.0, f64::max);
    let l_psi = per_meld.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(EstimationReport {
        constants: AssumptionConstants { n: n_bound, l_theta, l_psi, sampling_box: bx.clone() },
        box_evaluations,
        box_failures,
        time_evaluations: steps,
        time_failures,
        per_meld,
    })
}
