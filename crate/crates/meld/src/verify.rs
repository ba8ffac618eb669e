//! Bound checks recomputed from trace columns and certificate constants.

use std::fmt;

use meld_core::control::{companion, GainProfile};
use meld_core::dwell::dwell_times;
use meld_core::linalg::expm;
use meld_core::meld::Choice;
use meld_core::schedule::SwitchSchedule;
use nalgebra::{DMatrix, DVector};

use crate::error::CliError;
use crate::files::{num, CertificateFile, TraceColumns};

/// Slack for integration error in the output bounds.
pub const INTEGRATION_TOL: f64 = 1e-6;
/// Largest deviation of a shared output from the unswitched companion fit.
pub const COMPANION_TOL: f64 = 1e-5;
/// Largest tolerated fraction of rows without a `χ` value.
pub const CHI_FAILURE_FRACTION: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotApplicable => "NOT-APPLICABLE",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    /// Smallest `bound − value` over the checked rows (NaN when none).
    pub margin: f64,
    pub rows: usize,
    pub note: String,
}

impl Check {
    fn from_margin(name: &'static str, margin: f64, rows: usize, note: String) -> Self {
        let status = if rows == 0 {
            Status::NotApplicable
        } else if margin >= 0.0 {
            Status::Pass
        } else {
            Status::Fail
        };
        Check { name, status, margin: if rows == 0 { f64::NAN } else { margin }, rows, note }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    /// Interval lengths respect `(τ0, τ̄, τ̄, …)` as recomputed here.
    pub schedule_certified: bool,
    pub tau0: f64,
    pub tau_bar: f64,
    pub s: f64,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verification report")?;
        if self.schedule_certified {
            writeln!(f, "schedule: certified")?;
        } else {
            writeln!(f, "schedule: uncertified schedule (an interval is shorter than its dwell bound)")?;
        }
        writeln!(f, "tau0 {}  tau_bar {}  S {}", num(self.tau0), num(self.tau_bar), num(self.s))?;
        for c in &self.checks {
            write!(f, "{:<15} {:<14} margin {}  rows {}", c.name, c.status.to_string(), num(c.margin), c.rows)?;
            if !c.note.is_empty() {
                write!(f, "  ({})", c.note)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn mismatch(msg: impl Into<String>) -> CliError {
    CliError::Mismatch(msg.into())
}

struct Layout {
    dt: f64,
    /// First row of every interval present in the trace, plus the row count.
    bounds: Vec<usize>,
    melds: Vec<Vec<usize>>,
}

fn layout(tr: &TraceColumns, cert: &CertificateFile) -> Result<Layout, CliError> {
    let q = tr.deck_len();
    if q != cert.deck.len() || cert.gains.len() != q || cert.deck_degrees.len() != q {
        return Err(mismatch(format!("trace has {q} outputs, certificate {}", cert.deck.len())));
    }
    let melds = cert
        .melds
        .iter()
        .map(|b| match Choice::parse_bits(b) {
            Ok(c) if c.deck_len() == q => Ok(c.indices()),
            _ => Err(mismatch(format!("certificate meld {b} does not fit the deck"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let schedule = SwitchSchedule::new(cert.schedule_starts.clone(), cert.schedule_sequence.clone())
        .map_err(|e| mismatch(format!("certificate schedule: {e}")))?;
    if cert.schedule_sequence.iter().any(|&id| id == 0 || id > melds.len()) {
        return Err(mismatch("certificate schedule refers to an unknown meld"));
    }
    let t0 = tr.t[0];
    if (t0 - schedule.t0()).abs() > 1e-9 * t0.abs().max(1.0) {
        return Err(mismatch(format!("trace starts at {t0}, schedule at {}", schedule.t0())));
    }
    let dt = tr.t[1] - tr.t[0];
    if !(dt > 0.0) || tr.t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * w[1].abs().max(1.0)) {
        return Err(CliError::Format { path: "trace".into(), msg: "time column is not a uniform grid".into() });
    }
    let mut bounds: Vec<usize> = schedule.snapped_steps(dt).into_iter().filter(|&k| k < tr.t.len()).collect();
    bounds.push(tr.t.len());
    for (k, w) in bounds.windows(2).enumerate() {
        let id = cert.schedule_sequence[k];
        if let Some(r) = (w[0]..w[1]).find(|&r| tr.meld_id[r] != id) {
            return Err(mismatch(format!("row {r} runs meld {} where the schedule has {id}", tr.meld_id[r])));
        }
    }
    Ok(Layout { dt, bounds, melds })
}

fn block_norm(tr: &TraceColumns, outputs: &[usize], row: usize) -> f64 {
    outputs.iter().map(|&i| tr.err[i][row] * tr.err[i][row]).sum::<f64>().sqrt()
}

/// Largest residual of a least-squares fit of `e` by the free responses of
/// `ξ̇ = A ξ` (first state component), sampled every `dt`.
fn companion_residual(e: &[f64], gains: &[f64], dt: f64) -> f64 {
    let r = gains.len();
    let step = expm(&(companion(gains) * dt));
    let mut phi = DMatrix::<f64>::identity(r, r);
    let mut basis = DMatrix::<f64>::zeros(e.len(), r);
    for row in 0..e.len() {
        basis.set_row(row, &phi.row(0));
        phi = &step * phi;
    }
    let rhs = DVector::from_column_slice(e);
    let coef = basis.clone().svd(true, true).solve(&rhs, 1e-14).expect("SVD with both factors");
    (basis * coef - rhs).amax()
}

pub fn verify(tr: &TraceColumns, cert: &CertificateFile) -> Result<VerificationReport, CliError> {
    let lay = layout(tr, cert)?;
    let gains = GainProfile::new(cert.gains.clone()).map_err(|e| mismatch(format!("certificate gains: {e}")))?;
    let q = tr.deck_len();
    let t0 = tr.t[0];
    let intervals = lay.bounds.len() - 1;
    let seq: Vec<usize> = cert.schedule_sequence.iter().map(|id| id - 1).collect();

    let e0: f64 = lay.melds[seq[0]].iter().map(|&i| tr.err[i][0]).sum();
    let dw = dwell_times(cert.n, cert.l_theta, cert.l_psi, cert.alpha, cert.c, cert.p, cert.epsilon, e0)
        .map_err(|e| mismatch(format!("certificate constants: {e}")))?;
    let schedule_certified = SwitchSchedule::new(cert.schedule_starts.clone(), seq.clone())
        .map(|s| s.respects_dwell(dw.tau0, dw.tau_bar))
        .unwrap_or(false);

    // exponential transient bound on every row of every interval
    let (mut margin, mut rows) = (f64::INFINITY, 0);
    for k in 0..intervals {
        let (a, b) = (lay.bounds[k], lay.bounds[k + 1]);
        let start = block_norm(tr, &lay.melds[seq[k]], a);
        for r in a..b {
            let bound = cert.l_theta * cert.c * (-cert.alpha * (tr.t[r] - tr.t[a])).exp() * start + cert.n + INTEGRATION_TOL;
            for i in 0..q {
                margin = margin.min(bound - tr.err[i][r]);
            }
            rows += 1;
        }
    }
    let transient = Check::from_margin("transient-bound", margin, rows, String::new());

    // output bound after each dwell
    let (mut margin, mut rows) = (f64::INFINITY, 0);
    for k in 0..intervals {
        let (a, b) = (lay.bounds[k], lay.bounds[k + 1]);
        let tau = if k == 0 { dw.tau0 } else { dw.tau_bar };
        for r in a..b {
            if tr.t[r] >= tr.t[a] + tau - 1e-12 {
                for i in 0..q {
                    margin = margin.min(cert.epsilon + cert.n + INTEGRATION_TOL - tr.err[i][r]);
                }
                rows += 1;
            }
        }
    }
    let note = if schedule_certified { String::new() } else { "uncertified schedule".into() };
    let dwell = Check::from_margin("dwell-bound", margin, rows, note.clone());

    // state bound from t0 + T on
    let (mut margin, mut rows, mut missing) = (f64::INFINITY, 0, 0);
    for r in 0..tr.t.len() {
        if tr.t[r] >= t0 + dw.t - 1e-12 {
            if tr.chi_err[r].is_finite() {
                margin = margin.min(dw.s - tr.chi_err[r]);
                rows += 1;
            } else {
                missing += 1;
            }
        }
    }
    let mut state = Check::from_margin("state-bound", margin, rows, note);
    if missing > 0 {
        let frac = missing as f64 / (rows + missing) as f64;
        state.note = format!("{missing} rows without chi ({})", num(frac)).trim().to_string();
        if frac >= CHI_FAILURE_FRACTION {
            state.status = Status::Fail;
        }
    }

    // shared outputs over two-interval blocks
    let (mut margin, mut rows) = (f64::INFINITY, 0);
    for k in 0..intervals.saturating_sub(1) {
        let (a, b) = (lay.bounds[k], lay.bounds[k + 2]);
        for &i in lay.melds[seq[k]].iter().filter(|i| lay.melds[seq[k + 1]].contains(i)) {
            let r_i = gains.row(i).len();
            if b - a <= r_i {
                continue;
            }
            let e: Vec<f64> = (a..b).map(|r| tr.yd[i][r] - tr.y[i][r]).collect();
            margin = margin.min(COMPANION_TOL - companion_residual(&e, gains.row(i), lay.dt));
            rows += b - a;
        }
    }
    let shared = Check::from_margin("shared-outputs", margin, rows, String::new());

    Ok(VerificationReport {
        checks: vec![transient, dwell, state, shared],
        schedule_certified,
        tau0: dw.tau0,
        tau_bar: dw.tau_bar,
        s: dw.s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn companion_fit_is_exact_for_free_responses() {
        let dt = 1e-3;
        let (l1, l2) = ((-15.0 + 165f64.sqrt()) / 2.0, (-15.0 - 165f64.sqrt()) / 2.0);
        let e: Vec<f64> = (0..3000).map(|k| 0.3 * (l1 * k as f64 * dt).exp() - 0.1 * (l2 * k as f64 * dt).exp()).collect();
        assert!(companion_residual(&e, &[15.0, 15.0], dt) < 1e-12);
        let bent: Vec<f64> = e.iter().enumerate().map(|(k, v)| v + 1e-3 * (k as f64 * dt).sin()).collect();
        assert!(companion_residual(&bent, &[15.0, 15.0], dt) > 1e-5);
    }

    #[test]
    fn empty_checks_are_not_applicable() {
        let c = Check::from_margin("x", f64::INFINITY, 0, String::new());
        assert_eq!(c.status, Status::NotApplicable);
        assert!(c.margin.is_nan());
        assert_eq!(Check::from_margin("x", -1.0, 3, String::new()).status, Status::Fail);
    }
}
