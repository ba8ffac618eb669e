//! Closed-loop simulation of the switched controller.

use alloc::vec::Vec;
use core::fmt;

use crate::control::{control_from_eval, error_state, virtual_input, GainProfile};
use crate::coords::{psi_solve, NewtonOptions};
use crate::error::{Error, Result};
use crate::integrate::rk4;
use crate::lie::{self, DeckEvaluation, LieOptions};
use crate::linalg::cond2;
use crate::meld::{Meld, DEFAULT_COND_MAX};
use crate::reference::ReferenceBundle;
use crate::schedule::SwitchSchedule;
use crate::system::ControlAffineSystem;

/// How the input is held across an integration step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hold {
    /// `u(t_k)` held over `[t_k, t_k + dt)`.
    ZeroOrder,
    /// Feedback re-evaluated at every Runge–Kutta stage.
    PerStage,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    pub t_end: f64,
    pub hold: Hold,
    pub cond_max: f64,
    /// Track `χ(t) = Ψ_σ(ȳ^d_σ(t))`.
    pub chi: bool,
    pub newton: NewtonOptions,
    /// Used for the relative-degree part of the switch compatibility check.
    pub lie: LieOptions,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1.0,
            hold: Hold::PerStage,
            cond_max: DEFAULT_COND_MAX,
            chi: true,
            newton: NewtonOptions::default(),
            lie: LieOptions::default().pointwise(),
        }
    }
}

pub struct Scenario<'a, S> {
    pub sys: &'a S,
    /// Relative degree of every deck output.
    pub deck_degrees: &'a [usize],
    pub melds: &'a [Meld],
    pub gains: &'a GainProfile,
    pub refs: &'a dyn ReferenceBundle,
    pub schedule: &'a SwitchSchedule,
    pub x0: &'a [f64],
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    /// Index into the scenario meld list.
    pub meld: usize,
    pub y: Vec<f64>,
    pub yd: Vec<f64>,
    /// `ξ_i = ȳ_i^d − ȳ_i` for every deck output.
    pub xi: Vec<Vec<f64>>,
    /// Virtual inputs for every deck output.
    pub w: Vec<f64>,
    /// `‖χ(t) − x(t)‖`, NaN when the inversion failed or is disabled.
    pub chi_err: f64,
}

impl TraceRow {
    pub fn err(&self, i: usize) -> f64 {
        libm::sqrt(self.xi[i].iter().map(|v| v * v).sum())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompatibilityIssue {
    /// `A_σ` of the incoming meld is singular at the switch state.
    Singular,
    /// A relative degree at the switch state differs from the declared one.
    Degree,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwitchWarning {
    pub t: f64,
    pub from: usize,
    pub to: usize,
    pub issue: CompatibilityIssue,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimTrace {
    pub dt: f64,
    pub rows: Vec<TraceRow>,
    /// Row index at which each schedule interval starts.
    pub interval_rows: Vec<usize>,
    pub warnings: Vec<SwitchWarning>,
    pub chi_failures: usize,
}

impl SimTrace {
    /// Rows of interval `k`.
    pub fn interval(&self, k: usize) -> &[TraceRow] {
        let a = self.interval_rows[k].min(self.rows.len());
        let b = self.interval_rows.get(k + 1).copied().unwrap_or(self.rows.len()).min(self.rows.len());
        &self.rows[a..b]
    }
}

/// A failed run, with the time at which it stopped.
#[derive(Clone, Debug, PartialEq)]
pub struct SimFailure {
    pub t: f64,
    pub error: Error,
}

impl fmt::Display for SimFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at t = {}: {}", self.t, self.error)
    }
}

struct Step {
    u: Vec<f64>,
    xi: Vec<Vec<f64>>,
    w: Vec<f64>,
    eval: DeckEvaluation,
    yd: Vec<Vec<f64>>,
}

fn feedback<S: ControlAffineSystem>(sc: &Scenario<'_, S>, meld: &Meld, t: f64, x: &[f64], cond_max: f64) -> Result<Step> {
    let sys = sc.sys;
    let all: Vec<usize> = (0..sys.deck_len()).collect();
    let eval = lie::evaluate_deck(sys, &all, sc.deck_degrees, x)?;
    let yd = sc.refs.jets(t, sc.deck_degrees);
    let mut xi = Vec::with_capacity(all.len());
    let mut w = Vec::with_capacity(all.len());
    for i in all {
        let r = sc.deck_degrees[i];
        let e = error_state(&yd[i][..r], &eval.jets[i])?;
        w.push(virtual_input(yd[i][r], &e, sc.gains.row(i))?);
        xi.push(e);
    }
    let m = sys.input_dim();
    let sub = DeckEvaluation {
        jets: meld.outputs.iter().map(|&i| eval.jets[i].clone()).collect(),
        top: meld.outputs.iter().map(|&i| eval.top[i]).collect(),
        interaction: meld.outputs.iter().flat_map(|&i| eval.interaction[i * m..(i + 1) * m].iter().copied()).collect(),
    };
    let ws: Vec<f64> = meld.outputs.iter().map(|&i| w[i]).collect();
    let u = control_from_eval(sub, &ws, cond_max)?.u;
    Ok(Step { u, xi, w, eval, yd })
}

fn check_switch<S: ControlAffineSystem>(
    sc: &Scenario<'_, S>,
    eval: &DeckEvaluation,
    meld: &Meld,
    x: &[f64],
    opts: &SimOptions,
) -> Result<Option<CompatibilityIssue>> {
    let m = sc.sys.input_dim();
    let a: Vec<f64> = meld.outputs.iter().flat_map(|&i| eval.interaction[i * m..(i + 1) * m].iter().copied()).collect();
    if !(cond2(&nalgebra::DMatrix::from_row_slice(meld.outputs.len(), m, &a)) < opts.cond_max) {
        return Ok(Some(CompatibilityIssue::Singular));
    }
    let r_max = meld.degrees.iter().copied().max().unwrap_or(1);
    let reports = lie::relative_degrees(sc.sys, &meld.outputs, x, r_max, &opts.lie)?;
    if reports.iter().zip(&meld.degrees).any(|(rep, &r)| rep.r != Some(r)) {
        return Ok(Some(CompatibilityIssue::Degree));
    }
    Ok(None)
}

/// Simulate `ẋ = f(x) + g(x) u` under the switched feedback from `x0` at the
/// schedule's `t0` until `opts.t_end`.
pub fn run_scenario<S: ControlAffineSystem>(
    sc: &Scenario<'_, S>,
    opts: &SimOptions,
) -> core::result::Result<SimTrace, SimFailure> {
    let t0 = sc.schedule.t0();
    let fail = |t: f64| move |error: Error| SimFailure { t, error };
    validate(sc, opts).map_err(fail(t0))?;

    let dt = opts.dt;
    let steps = libm::floor((opts.t_end - t0) / dt + 1e-9) as usize;
    let starts = sc.schedule.snapped_steps(dt);
    let mut trace = SimTrace {
        dt,
        rows: Vec::with_capacity(steps + 1),
        interval_rows: starts.clone(),
        warnings: Vec::new(),
        chi_failures: 0,
    };
    let mut x = sc.x0.to_vec();
    let mut interval = 0;
    let mut chi: Option<Vec<f64>> = None;
    for k in 0..=steps {
        let t = t0 + k as f64 * dt;
        let mut switched = false;
        while interval + 1 < starts.len() && starts[interval + 1] <= k {
            interval += 1;
            switched = true;
        }
        let id = sc.schedule.melds[interval];
        let meld = &sc.melds[id];
        if switched {
            let prev = sc.schedule.melds[interval - 1];
            let eval = lie::evaluate_deck(sc.sys, &(0..sc.sys.deck_len()).collect::<Vec<_>>(), sc.deck_degrees, &x)
                .map_err(fail(t))?;
            if let Some(issue) = check_switch(sc, &eval, meld, &x, opts).map_err(fail(t))? {
                trace.warnings.push(SwitchWarning { t, from: prev, to: id, issue });
            }
        }
        let step = feedback(sc, meld, t, &x, opts.cond_max).map_err(fail(t))?;

        let chi_err = if opts.chi {
            let target: Vec<f64> = meld
                .outputs
                .iter()
                .zip(&meld.degrees)
                .flat_map(|(&i, &r)| step.yd[i][..r].iter().copied())
                .collect();
            let guess = if switched { None } else { chi.take() };
            let guess = guess.unwrap_or_else(|| x.clone());
            match psi_solve(sc.sys, meld, &target, &guess, &opts.newton) {
                Ok(sol) => {
                    let d = libm::sqrt(sol.x.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum());
                    chi = Some(sol.x);
                    d
                }
                Err(Error::InversionFailure { .. }) | Err(Error::NonFiniteEvaluation) => {
                    trace.chi_failures += 1;
                    chi = None;
                    f64::NAN
                }
                Err(e) => return Err(fail(t)(e)),
            }
        } else {
            f64::NAN
        };

        let next = if k < steps {
            Some(match opts.hold {
                Hold::ZeroOrder => {
                    let u = &step.u;
                    rk4(
                        |_, x, out| {
                            sc.sys.vector_field(x, u, out);
                            Ok(())
                        },
                        t,
                        &x,
                        dt,
                    )
                }
                Hold::PerStage => rk4(
                    |s, xs, out| {
                        let u = if s == t { step.u.clone() } else { feedback(sc, meld, s, xs, opts.cond_max)?.u };
                        sc.sys.vector_field(xs, &u, out);
                        Ok(())
                    },
                    t,
                    &x,
                    dt,
                ),
            }
            .map_err(|e| match e {
                Error::NonFiniteState { t } => SimFailure { t, error: e },
                e => fail(t)(e),
            })?)
        } else {
            None
        };

        trace.rows.push(TraceRow {
            t,
            x: x.clone(),
            u: step.u,
            meld: id,
            y: step.eval.jets.iter().map(|j| j[0]).collect(),
            yd: step.yd.iter().map(|j| j[0]).collect(),
            xi: step.xi,
            w: step.w,
            chi_err,
        });
        if let Some(n) = next {
            x = n;
        }
    }
    Ok(trace)
}

fn validate<S: ControlAffineSystem>(sc: &Scenario<'_, S>, opts: &SimOptions) -> Result<()> {
    let sys = sc.sys;
    if !(opts.dt > 0.0) || !opts.dt.is_finite() {
        return Err(Error::InvalidArgument("step must be positive"));
    }
    if !(opts.t_end >= sc.schedule.t0()) {
        return Err(Error::InvalidArgument("end time precedes the schedule start"));
    }
    if sc.x0.len() != sys.state_dim() {
        return Err(Error::DimensionMismatch { expected: sys.state_dim(), found: sc.x0.len() });
    }
    if sc.deck_degrees.len() != sys.deck_len() || sc.refs.deck_len() != sys.deck_len() {
        return Err(Error::DimensionMismatch { expected: sys.deck_len(), found: sc.deck_degrees.len() });
    }
    if sc.melds.is_empty() {
        return Err(Error::EmptyMeldSet);
    }
    sc.gains.check_degrees(sc.deck_degrees)?;
    for m in sc.melds {
        if m.outputs.len() != sys.input_dim() {
            return Err(Error::NonSquare { outputs: m.outputs.len(), inputs: sys.input_dim() });
        }
        if m.dim() != sys.state_dim() {
            return Err(Error::InvalidArgument("meld degree sum must equal the state dimension"));
        }
        if m.outputs.iter().zip(&m.degrees).any(|(&i, &r)| sc.deck_degrees.get(i) != Some(&r)) {
            return Err(Error::InvalidArgument("meld degrees disagree with the deck degrees"));
        }
    }
    if let Some(&id) = sc.schedule.melds.iter().find(|&&id| id >= sc.melds.len()) {
        return Err(Error::IndexOutOfRange { index: id, len: sc.melds.len() });
    }
    Ok(())
}

/// Least-squares slope `−d ln v / dt` over the last `tail` fraction of the
/// samples. Nonpositive values are skipped; `None` with fewer than two
/// usable points.
pub fn fitted_decay_rate(times: &[f64], values: &[f64], tail: f64) -> Option<f64> {
    let n = times.len().min(values.len());
    let first = n - libm::floor(n as f64 * tail) as usize;
    let pts: Vec<(f64, f64)> = (first..n)
        .filter(|&k| values[k] > 0.0 && values[k].is_finite())
        .map(|k| (times[k], libm::log(values[k])))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (st, sl) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mt, ml) = (st / m, sl / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + (p.0 - mt) * (p.1 - ml), b + (p.0 - mt) * (p.0 - mt)));
    if den == 0.0 {
        return None;
    }
    Some(-num / den)
}
