//! Reference trajectories for deck outputs.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::jet::{Jet, MAX_DEPTH};
use crate::system::ControlAffineSystem;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Segment {
    t0: f64,
    t1: f64,
    c: [f64; 6],
}

impl Segment {
    fn eval(&self, tau: f64, order: usize) -> f64 {
        if order > 5 {
            return 0.0;
        }
        // coefficients of the `order`-th derivative, Horner in τ
        let mut acc = 0.0;
        for k in (order..6).rev() {
            let mut f = 1.0;
            for j in 0..order {
                f *= (k - j) as f64;
            }
            acc = acc * tau + f * self.c[k];
        }
        acc
    }
}

/// Boundary data `(position, velocity, acceleration)`.
pub type Knot = (f64, f64, f64);

/// Scalar piecewise quintic, held constant outside its segments.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseQuintic {
    segments: Vec<Segment>,
    start: f64,
    end: f64,
}

impl PiecewiseQuintic {
    pub fn constant(v: f64) -> Self {
        Self { segments: Vec::new(), start: v, end: v }
    }

    /// Quintic on `[t0, t1]` matching position, velocity and acceleration
    /// at both ends.
    pub fn hermite(t0: f64, t1: f64, a: Knot, b: Knot) -> Result<Self> {
        if !(t1 > t0) {
            return Err(Error::InvalidArgument("segment must have positive duration"));
        }
        let t = t1 - t0;
        let (p0, v0, a0) = a;
        let (p1, v1, a1) = b;
        let h = p1 - (p0 + v0 * t + 0.5 * a0 * t * t);
        let dv = v1 - (v0 + a0 * t);
        let da = a1 - a0;
        let (t2, t3) = (t * t, t * t * t);
        let c = [
            p0,
            v0,
            0.5 * a0,
            (10.0 * h - 4.0 * dv * t + 0.5 * da * t * t) / t3,
            (-15.0 * h + 7.0 * dv * t - da * t * t) / (t3 * t),
            (6.0 * h - 3.0 * dv * t + 0.5 * da * t * t) / (t3 * t2),
        ];
        Ok(Self { segments: vec![Segment { t0, t1, c }], start: p0, end: p1 })
    }

    /// Rest-to-rest moves from `initial`; each move is `(start, duration,
    /// target)` and moves must not overlap.
    pub fn rest_to_rest(initial: f64, moves: &[(f64, f64, f64)]) -> Result<Self> {
        let mut segments = Vec::with_capacity(moves.len());
        let mut pos = initial;
        let mut free_from = f64::NEG_INFINITY;
        for &(s, d, target) in moves {
            if !(s >= free_from) {
                return Err(Error::InvalidArgument("moves overlap"));
            }
            let seg = Self::hermite(s, s + d, (pos, 0.0, 0.0), (target, 0.0, 0.0))?;
            segments.extend(seg.segments);
            pos = target;
            free_from = s + d;
        }
        Ok(Self { segments, start: initial, end: pos })
    }

    /// `order`-th derivative at `t`.
    pub fn eval(&self, t: f64, order: usize) -> f64 {
        let k = self.segments.partition_point(|s| s.t1 <= t);
        match self.segments.get(k) {
            Some(seg) if t >= seg.t0 => seg.eval(t - seg.t0, order),
            _ => {
                if order > 0 {
                    return 0.0;
                }
                // hold the last completed segment's end value
                if k == 0 {
                    self.start
                } else {
                    let s = &self.segments[k - 1];
                    s.eval(s.t1 - s.t0, 0)
                }
            }
        }
    }

    pub fn final_value(&self) -> f64 {
        self.end
    }
}

/// Vector-valued curve with one quintic per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct QuinticPath {
    pub coords: Vec<PiecewiseQuintic>,
}

impl QuinticPath {
    /// Rest-to-rest moves through waypoints; `moves[k] = (start, duration, target)`.
    pub fn rest_to_rest(initial: &[f64], moves: &[(f64, f64, Vec<f64>)]) -> Result<Self> {
        let mut coords = Vec::with_capacity(initial.len());
        for (d, x) in initial.iter().enumerate() {
            let mv: Vec<(f64, f64, f64)> = moves
                .iter()
                .map(|(s, dur, tgt)| {
                    tgt.get(d)
                        .map(|v| (*s, *dur, *v))
                        .ok_or(Error::DimensionMismatch { expected: initial.len(), found: tgt.len() })
                })
                .collect::<Result<_>>()?;
            coords.push(PiecewiseQuintic::rest_to_rest(*x, &mv)?);
        }
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn eval(&self, t: f64, order: usize) -> Vec<f64> {
        self.coords.iter().map(|c| c.eval(t, order)).collect()
    }
}

/// Desired output jets `(y^d, ẏ^d, …, y^{d,(k)})` for every deck output.
pub trait ReferenceBundle {
    fn deck_len(&self) -> usize;

    /// Jet of output `i` up to derivative `order` inclusive.
    fn jet(&self, i: usize, t: f64, order: usize) -> Vec<f64>;

    /// Jets of all outputs; `orders[i]` is the highest derivative needed.
    fn jets(&self, t: f64, orders: &[usize]) -> Vec<Vec<f64>> {
        orders.iter().enumerate().map(|(i, k)| self.jet(i, t, *k)).collect()
    }

    /// A state that realizes the references exactly, when one exists.
    fn state(&self, _t: f64) -> Option<Vec<f64>> {
        None
    }
}

impl<R: ReferenceBundle + ?Sized> ReferenceBundle for Box<R> {
    fn deck_len(&self) -> usize {
        (**self).deck_len()
    }
    fn jet(&self, i: usize, t: f64, order: usize) -> Vec<f64> {
        (**self).jet(i, t, order)
    }
    fn jets(&self, t: f64, orders: &[usize]) -> Vec<Vec<f64>> {
        (**self).jets(t, orders)
    }
    fn state(&self, t: f64) -> Option<Vec<f64>> {
        (**self).state(t)
    }
}

/// Independent quintic references per output.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputSplines {
    pub outputs: Vec<PiecewiseQuintic>,
}

impl ReferenceBundle for OutputSplines {
    fn deck_len(&self) -> usize {
        self.outputs.len()
    }

    fn jet(&self, i: usize, t: f64, order: usize) -> Vec<f64> {
        (0..=order).map(|k| self.outputs[i].eval(t, k)).collect()
    }
}

/// References generated by one configuration path `s(t)` of a mechanical
/// system with state `x = (s, ṡ)`, so every deck output is evaluated along
/// the same feasible state trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigurationReference<S> {
    pub sys: S,
    pub path: QuinticPath,
}

impl<S: ControlAffineSystem> ConfigurationReference<S> {
    pub fn new(sys: S, path: QuinticPath) -> Result<Self> {
        if 2 * path.dim() != sys.state_dim() {
            return Err(Error::DimensionMismatch { expected: sys.state_dim(), found: 2 * path.dim() });
        }
        Ok(Self { sys, path })
    }

    /// `x^{(k)}(t)` for `k = 0..=order`.
    pub fn state_derivatives(&self, t: f64, order: usize) -> Vec<Vec<f64>> {
        (0..=order)
            .map(|k| {
                let mut v = self.path.eval(t, k);
                v.extend(self.path.eval(t, k + 1));
                v
            })
            .collect()
    }

    fn time_jets<const N: usize>(&self, t: f64, orders: &[usize]) -> Vec<Vec<f64>> {
        let depth = Jet::<N>::depth();
        let derivs = self.state_derivatives(t, depth);
        let n = self.sys.state_dim();
        // x(t + ε_0 + … + ε_{d-1}) = Σ_m x^{(|m|)}(t) ε^m
        let xs: Vec<Jet<N>> = (0..n)
            .map(|c| {
                let mut coeffs = [0.0; N];
                for (m, v) in coeffs.iter_mut().enumerate() {
                    *v = derivs[m.count_ones() as usize][c];
                }
                Jet::from_coeffs(coeffs)
            })
            .collect();
        orders
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let h = self.sys.output(i, &xs);
                (0..=*k).map(|j| h.coeff((1 << j) - 1)).collect()
            })
            .collect()
    }
}

impl<S: ControlAffineSystem> ReferenceBundle for ConfigurationReference<S> {
    fn deck_len(&self) -> usize {
        self.sys.deck_len()
    }

    fn jet(&self, i: usize, t: f64, order: usize) -> Vec<f64> {
        let mut orders = vec![0; self.deck_len()];
        orders[i] = order;
        self.jets(t, &orders).swap_remove(i)
    }

    fn jets(&self, t: f64, orders: &[usize]) -> Vec<Vec<f64>> {
        let depth = orders.iter().copied().max().unwrap_or(0);
        assert!(depth <= MAX_DEPTH, "reference order exceeds the jet depth");
        match depth {
            0 => self.time_jets::<1>(t, orders),
            1 => self.time_jets::<2>(t, orders),
            2 => self.time_jets::<4>(t, orders),
            3 => self.time_jets::<8>(t, orders),
            4 => self.time_jets::<16>(t, orders),
            5 => self.time_jets::<32>(t, orders),
            6 => self.time_jets::<64>(t, orders),
            7 => self.time_jets::<128>(t, orders),
            8 => self.time_jets::<256>(t, orders),
            _ => self.time_jets::<512>(t, orders),
        }
    }

    fn state(&self, t: f64) -> Option<Vec<f64>> {
        Some(self.state_derivatives(t, 0).swap_remove(0))
    }
}

/// Adds `a_i sin(ω t)` to the references of selected outputs, breaking
/// their consistency with the others.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbedReference<R> {
    pub base: R,
    pub amplitude: Vec<f64>,
    pub omega: f64,
}

impl<R: ReferenceBundle> PerturbedReference<R> {
    fn bump(&self, i: usize, t: f64, k: usize) -> f64 {
        let a = self.amplitude.get(i).copied().unwrap_or(0.0);
        if a == 0.0 {
            return 0.0;
        }
        let phase = k as f64 * core::f64::consts::FRAC_PI_2;
        a * libm::pow(self.omega, k as f64) * libm::sin(self.omega * t + phase)
    }
}

impl<R: ReferenceBundle> ReferenceBundle for PerturbedReference<R> {
    fn deck_len(&self) -> usize {
        self.base.deck_len()
    }

    fn jet(&self, i: usize, t: f64, order: usize) -> Vec<f64> {
        let mut j = self.base.jet(i, t, order);
        for (k, v) in j.iter_mut().enumerate() {
            *v += self.bump(i, t, k);
        }
        j
    }

    fn jets(&self, t: f64, orders: &[usize]) -> Vec<Vec<f64>> {
        let mut js = self.base.jets(t, orders);
        for (i, j) in js.iter_mut().enumerate() {
            for (k, v) in j.iter_mut().enumerate() {
                *v += self.bump(i, t, k);
            }
        }
        js
    }
}
