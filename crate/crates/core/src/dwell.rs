//! Dwell-time and ultimate-bound certificates.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::meld::Meld;
use crate::sampling::StateBox;
use crate::schedule::SwitchSchedule;

/// Reference consistency bound and uniform Lipschitz constants.
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionConstants {
    pub n: f64,
    pub l_theta: f64,
    pub l_psi: f64,
    pub sampling_box: StateBox,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DwellCertificate {
    pub epsilon: f64,
    pub alpha: f64,
    pub c: f64,
    pub l_theta: f64,
    pub l_psi: f64,
    pub n: f64,
    pub p: usize,
    pub tau0: f64,
    pub tau_bar: f64,
    pub s: f64,
    pub t: f64,
}

fn clamped_log_time(arg: f64, alpha: f64) -> f64 {
    if arg > 1.0 {
        libm::log(arg) / alpha
    } else {
        0.0
    }
}

/// `τ0 = ln(L^Θ C Σ‖e0‖ / ε)/α`, `τ̄ = ln(L^Θ C p (ε+N) / ε)/α`, both clamped
/// at zero, and `S = p² L^Ψ L^Θ C (ε+N) + p N`, `T = τ0`.
#[allow(clippy::too_many_arguments)]
pub fn dwell_times(
    n: f64,
    l_theta: f64,
    l_psi: f64,
    alpha: f64,
    c: f64,
    p: usize,
    epsilon: f64,
    initial_error: f64,
) -> Result<DwellCertificate> {
    if !(epsilon > 0.0) {
        return Err(Error::NonpositiveEpsilon);
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument("alpha must be positive"));
    }
    let pf = p as f64;
    let tau0 = clamped_log_time(l_theta * c * initial_error / epsilon, alpha);
    let tau_bar = clamped_log_time(l_theta * c * pf * (epsilon + n) / epsilon, alpha);
    let s = pf * pf * l_psi * l_theta * c * (epsilon + n) + pf * n;
    Ok(DwellCertificate { epsilon, alpha, c, l_theta, l_psi, n, p, tau0, tau_bar, s, t: tau0 })
}

pub fn dwell_from_constants(
    consts: &AssumptionConstants,
    alpha: f64,
    c: f64,
    p: usize,
    epsilon: f64,
    initial_error: f64,
) -> Result<DwellCertificate> {
    dwell_times(consts.n, consts.l_theta, consts.l_psi, alpha, c, p, epsilon, initial_error)
}

/// `𝒮_{k,l}`: outputs active in every interval `k, …, k+l`.
pub fn shared_outputs(schedule: &SwitchSchedule, melds: &[Meld], k: usize, l: usize) -> Result<Vec<usize>> {
    let last = k + l;
    if last >= schedule.intervals() {
        return Err(Error::IndexOutOfRange { index: last, len: schedule.intervals() });
    }
    let meld = |j: usize| -> Result<&Meld> {
        let id = schedule.melds[j];
        melds.get(id).ok_or(Error::IndexOutOfRange { index: id, len: melds.len() })
    };
    let mut out = meld(k)?.outputs.clone();
    for j in k + 1..=last {
        let m = meld(j)?;
        out.retain(|i| m.outputs.contains(i));
    }
    Ok(out)
}
