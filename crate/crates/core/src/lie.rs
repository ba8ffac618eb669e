//! Lie derivatives, relative degrees and interaction matrices by jet lifting.
//!
//! The state is lifted one infinitesimal at a time, `X_{d+1} = X_d + ε_d f(X_d)`.
//! After `k` lifts the coefficient of `ε_0 ⋯ ε_{k-1}` in `h(X_k)` is
//! `L_f^k h(x)`, and every lower order sits at the lower prefix masks, so a
//! single lift yields all orders for all outputs. Seeding bit 0 with an input
//! field `g_j` (or any constant direction) before the drift lifts gives
//! `L_{g_j} L_f^k h` at the prefix masks that include bit 0.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::jet::{Jet, MAX_DEPTH};
use crate::sampling;
use crate::system::ControlAffineSystem;

/// Evaluate `$body` with `$n` bound to the jet width `2^depth`.
macro_rules! with_depth {
    ($depth:expr, $n:ident => $body:expr) => {
        match $depth {
            0 => { const $n: usize = 1; $body }
            1 => { const $n: usize = 2; $body }
            2 => { const $n: usize = 4; $body }
            3 => { const $n: usize = 8; $body }
            4 => { const $n: usize = 16; $body }
            5 => { const $n: usize = 32; $body }
            6 => { const $n: usize = 64; $body }
            7 => { const $n: usize = 128; $body }
            8 => { const $n: usize = 256; $body }
            9 => { const $n: usize = 512; $body }
            _ => unreachable!("jet depth is checked against MAX_DEPTH"),
        }
    };
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LieOptions {
    /// Threshold below which a mixed derivative counts as vanished.
    pub tol: f64,
    pub k_max: usize,
    /// Random perturbations used to confirm vanishing near the point.
    pub neighbors: usize,
    pub radius: f64,
    pub seed: u64,
}

impl Default for LieOptions {
    fn default() -> Self {
        Self { tol: 1e-9, k_max: 8, neighbors: 16, radius: 1e-3, seed: 42 }
    }
}

impl LieOptions {
    /// Same options without the neighborhood check.
    pub fn pointwise(self) -> Self {
        Self { neighbors: 0, ..self }
    }
}

#[derive(Clone, Copy, Debug)]
enum Seed<'a> {
    None,
    Input(usize),
    Direction(&'a [f64]),
}

fn check_state<S: ControlAffineSystem>(sys: &S, x: &[f64]) -> Result<()> {
    if x.len() != sys.state_dim() {
        return Err(Error::DimensionMismatch { expected: sys.state_dim(), found: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteEvaluation);
    }
    Ok(())
}

fn check_output<S: ControlAffineSystem>(sys: &S, i: usize) -> Result<()> {
    if i >= sys.deck_len() {
        return Err(Error::IndexOutOfRange { index: i, len: sys.deck_len() });
    }
    Ok(())
}

fn lift<S: ControlAffineSystem, const N: usize>(
    sys: &S,
    x: &[f64],
    seed: Seed<'_>,
    drift_levels: usize,
) -> Vec<Jet<N>> {
    let n = sys.state_dim();
    let mut xs: Vec<Jet<N>> = x.iter().map(|v| Jet::constant(*v)).collect();
    let first = match seed {
        Seed::None => 0,
        Seed::Input(j) => {
            let mut g = vec![0.0; n];
            sys.input_field(j, x, &mut g);
            for (xk, gk) in xs.iter_mut().zip(&g) {
                *xk += Jet::constant(*gk).shift(0);
            }
            1
        }
        Seed::Direction(v) => {
            for (xk, vk) in xs.iter_mut().zip(v) {
                *xk += Jet::constant(*vk).shift(0);
            }
            1
        }
    };
    let mut fx = vec![Jet::<N>::default(); n];
    for level in first..first + drift_levels {
        sys.drift(&xs, &mut fx);
        for (xk, fk) in xs.iter_mut().zip(&fx) {
            *xk += fk.shift(level);
        }
    }
    xs
}

/// Evaluate outputs on a lifted state and read the prefix coefficients.
/// `prefix[k]` is the coefficient at mask `(1 << (offset + k)) - 1`.
fn read_prefixes<S: ControlAffineSystem, const N: usize>(
    sys: &S,
    xs: &[Jet<N>],
    outputs: &[usize],
    offset: usize,
    orders: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(outputs.len());
    for &i in outputs {
        let h = sys.output(i, xs);
        if h.coeffs().iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteEvaluation);
        }
        out.push((0..orders).map(|k| h.coeff((1 << (offset + k)) - 1)).collect());
    }
    Ok(out)
}

/// `L_f^k h_i(x)` for `k = 0..=order`, per requested output.
pub fn drift_derivatives<S: ControlAffineSystem>(
    sys: &S,
    outputs: &[usize],
    order: usize,
    x: &[f64],
) -> Result<Vec<Vec<f64>>> {
    check_state(sys, x)?;
    if order > MAX_DEPTH {
        return Err(Error::OrderOverflow { order, max: MAX_DEPTH });
    }
    for &i in outputs {
        check_output(sys, i)?;
    }
    with_depth!(order, N => {
        let xs = lift::<S, N>(sys, x, Seed::None, order);
        read_prefixes(sys, &xs, outputs, 0, order + 1)
    })
}

/// Derivatives `D(L_f^k h_i)(x)·seed` for `k = 0..order`, per output.
fn seeded_derivatives<S: ControlAffineSystem>(
    sys: &S,
    outputs: &[usize],
    order: usize,
    x: &[f64],
    seed: Seed<'_>,
) -> Result<Vec<Vec<f64>>> {
    check_state(sys, x)?;
    if order == 0 {
        return Ok(vec![Vec::new(); outputs.len()]);
    }
    if order > MAX_DEPTH {
        return Err(Error::OrderOverflow { order: order - 1, max: MAX_DEPTH - 1 });
    }
    for &i in outputs {
        check_output(sys, i)?;
    }
    with_depth!(order, N => {
        let xs = lift::<S, N>(sys, x, seed, order - 1);
        read_prefixes(sys, &xs, outputs, 1, order)
    })
}

/// `L_{g_j} L_f^k h_i(x)` for `k = 0..order`, per requested output.
pub fn mixed_derivatives<S: ControlAffineSystem>(
    sys: &S,
    outputs: &[usize],
    j: usize,
    order: usize,
    x: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if j >= sys.input_dim() {
        return Err(Error::IndexOutOfRange { index: j, len: sys.input_dim() });
    }
    seeded_derivatives(sys, outputs, order, x, Seed::Input(j))
}

/// Directional derivatives `D(L_f^k h_i)(x)·v` for `k = 0..order`.
pub fn directional_derivatives<S: ControlAffineSystem>(
    sys: &S,
    outputs: &[usize],
    order: usize,
    x: &[f64],
    v: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if v.len() != sys.state_dim() {
        return Err(Error::DimensionMismatch { expected: sys.state_dim(), found: v.len() });
    }
    seeded_derivatives(sys, outputs, order, x, Seed::Direction(v))
}

/// `L_f^k h_i(x)`.
pub fn lie_f<S: ControlAffineSystem>(
    sys: &S,
    i: usize,
    k: usize,
    x: &[f64],
    opts: &LieOptions,
) -> Result<f64> {
    if k > opts.k_max {
        return Err(Error::OrderOverflow { order: k, max: opts.k_max });
    }
    Ok(drift_derivatives(sys, &[i], k, x)?[0][k])
}

/// `L_{g_j} L_f^k h_i(x)`.
pub fn lie_g_lie_f<S: ControlAffineSystem>(
    sys: &S,
    i: usize,
    j: usize,
    k: usize,
    x: &[f64],
    opts: &LieOptions,
) -> Result<f64> {
    if k > opts.k_max {
        return Err(Error::OrderOverflow { order: k, max: opts.k_max });
    }
    Ok(mixed_derivatives(sys, &[i], j, k + 1, x)?[0][k])
}

/// Mixed derivative table `[output][k][j]` for `k = 0..order`.
fn mixed_table<S: ControlAffineSystem>(
    sys: &S,
    outputs: &[usize],
    order: usize,
    x: &[f64],
) -> Result<Vec<Vec<Vec<f64>>>> {
    let m = sys.input_dim();
    let mut table = vec![vec![vec![0.0; m]; order]; outputs.len()];
    for j in 0..m {
        let col = mixed_derivatives(sys, outputs, j, order, x)?;
        for (row, c) in table.iter_mut().zip(&col) {
            for (k, v) in c.iter().enumerate() {
                row[k][j] = *v;
            }
        }
    }
    Ok(table)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelativeDegreeReport {
    pub output: usize,
    /// `None` when no order up to `r_max` qualifies.
    pub r: Option<usize>,
    /// `L_{g_j} L_f^{r-1} h_i(x)` over `j`; empty when `r` is undefined.
    pub witness_row: Vec<f64>,
    /// Orders `k` whose mixed row vanished at the point.
    pub vanished_orders: Vec<usize>,
}

/// Relative degrees of several outputs, sharing the lifts.
///
/// `r` is the first order whose mixed row exceeds `tol` at `x`, provided all
/// lower rows vanish at `x` and at every sampled neighbor.
pub fn relative_degrees<S: ControlAffineSystem>(
    sys: &S,
    outputs: &[usize],
    x: &[f64],
    r_max: usize,
    opts: &LieOptions,
) -> Result<Vec<RelativeDegreeReport>> {
    if r_max == 0 {
        return Err(Error::InvalidArgument("r_max must be at least 1"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive"));
    }
    if r_max - 1 > opts.k_max {
        return Err(Error::OrderOverflow { order: r_max - 1, max: opts.k_max });
    }
    // deepen until every output has a nonvanishing row; lifting cost grows
    // geometrically with the order
    let mut depth = 1;
    let at_x = loop {
        let table = mixed_table(sys, outputs, depth, x)?;
        if depth == r_max || table.iter().all(|rows| rows.iter().any(|row| max_abs(row) > opts.tol)) {
            break table;
        }
        depth += 1;
    };
    let mut reports: Vec<RelativeDegreeReport> = Vec::with_capacity(outputs.len());
    for (&i, rows) in outputs.iter().zip(&at_x) {
        let mut rep = RelativeDegreeReport { output: i, r: None, witness_row: Vec::new(), vanished_orders: Vec::new() };
        for (k, row) in rows.iter().enumerate() {
            if max_abs(row) > opts.tol {
                rep.r = Some(k + 1);
                rep.witness_row = row.clone();
                break;
            }
            rep.vanished_orders.push(k);
        }
        reports.push(rep);
    }
    let deepest = reports.iter().filter_map(|r| r.r).max().unwrap_or(0);
    if deepest > 1 && opts.neighbors > 0 {
        for y in sampling::neighborhood(x, opts.radius, opts.neighbors, opts.seed) {
            let near = mixed_table(sys, outputs, deepest - 1, &y)?;
            for (rep, rows) in reports.iter_mut().zip(&near) {
                if let Some(r) = rep.r {
                    if rows[..r - 1].iter().any(|row| max_abs(row) > opts.tol) {
                        rep.r = None;
                        rep.witness_row.clear();
                    }
                }
            }
        }
    }
    Ok(reports)
}

pub fn relative_degree<S: ControlAffineSystem>(
    sys: &S,
    i: usize,
    x: &[f64],
    r_max: usize,
    opts: &LieOptions,
) -> Result<RelativeDegreeReport> {
    Ok(relative_degrees(sys, &[i], x, r_max, opts)?.remove(0))
}

fn defined_degrees<S: ControlAffineSystem>(
    sys: &S,
    outputs: &[usize],
    x: &[f64],
    opts: &LieOptions,
) -> Result<Vec<usize>> {
    let r_max = sys.state_dim().min(opts.k_max + 1);
    relative_degrees(sys, outputs, x, r_max, opts)?
        .into_iter()
        .map(|rep| rep.r.ok_or(Error::UndefinedRelativeDegree { output: rep.output }))
        .collect()
}

/// Stacked `L_f^{r_i} h_i(x)` over the selected outputs.
pub fn drift_vector<S: ControlAffineSystem>(
    sys: &S,
    outputs: &[usize],
    x: &[f64],
    opts: &LieOptions,
) -> Result<Vec<f64>> {
    let r = defined_degrees(sys, outputs, x, opts)?;
    Ok(evaluate_deck(sys, outputs, &r, x)?.top)
}

/// Row-major `p × m` interaction matrix of the selected outputs.
pub fn interaction_matrix<S: ControlAffineSystem>(
    sys: &S,
    outputs: &[usize],
    x: &[f64],
    opts: &LieOptions,
) -> Result<Vec<f64>> {
    let r = defined_degrees(sys, outputs, x, opts)?;
    Ok(evaluate_deck(sys, outputs, &r, x)?.interaction)
}

/// Everything the controller needs for a set of outputs with known degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct DeckEvaluation {
    /// `(y_i, ẏ_i, …, y_i^{(r_i-1)})` per output.
    pub jets: Vec<Vec<f64>>,
    /// `L_f^{r_i} h_i(x)` per output.
    pub top: Vec<f64>,
    /// Row-major `p × m`, rows `L_{g_j} L_f^{r_i-1} h_i(x)`.
    pub interaction: Vec<f64>,
}

pub fn evaluate_deck<S: ControlAffineSystem>(
    sys: &S,
    outputs: &[usize],
    degrees: &[usize],
    x: &[f64],
) -> Result<DeckEvaluation> {
    if outputs.len() != degrees.len() {
        return Err(Error::DimensionMismatch { expected: outputs.len(), found: degrees.len() });
    }
    if degrees.contains(&0) {
        return Err(Error::InvalidArgument("relative degrees must be positive"));
    }
    let depth = degrees.iter().copied().max().unwrap_or(1);
    let m = sys.input_dim();
    let drift = drift_derivatives(sys, outputs, depth, x)?;
    let mixed = mixed_table(sys, outputs, depth, x)?;
    let mut ev = DeckEvaluation {
        jets: Vec::with_capacity(outputs.len()),
        top: Vec::with_capacity(outputs.len()),
        interaction: Vec::with_capacity(outputs.len() * m),
    };
    for ((d, mx), &r) in drift.iter().zip(&mixed).zip(degrees) {
        ev.jets.push(d[..r].to_vec());
        ev.top.push(d[r]);
        ev.interaction.extend_from_slice(&mx[r - 1]);
    }
    Ok(ev)
}

/// Jacobian of the stacked jets, row-major `(Σ r_i) × n`.
pub fn jet_jacobian<S: ControlAffineSystem>(
    sys: &S,
    outputs: &[usize],
    degrees: &[usize],
    x: &[f64],
) -> Result<Vec<f64>> {
    if outputs.len() != degrees.len() {
        return Err(Error::DimensionMismatch { expected: outputs.len(), found: degrees.len() });
    }
    let n = sys.state_dim();
    let depth = degrees.iter().copied().max().unwrap_or(0);
    let rows: usize = degrees.iter().sum();
    let mut jac = vec![0.0; rows * n];
    let mut e = vec![0.0; n];
    for l in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[l] = 1.0;
        let col = directional_derivatives(sys, outputs, depth, x, &e)?;
        let mut row = 0;
        for (c, &r) in col.iter().zip(degrees) {
            for v in &c[..r] {
                jac[row * n + l] = *v;
                row += 1;
            }
        }
    }
    Ok(jac)
}
