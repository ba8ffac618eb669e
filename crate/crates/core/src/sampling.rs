//! Deterministic sampling of state-space boxes.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Axis-aligned box in state space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl StateBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), found: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidArgument("box bounds must be finite with lower <= upper"));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (u - l)).collect()
    }

    /// Box with the same center and half-widths multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let c = self.center();
        let h = self.half_widths();
        Self {
            lower: c.iter().zip(&h).map(|(c, h)| c - factor * h).collect(),
            upper: c.iter().zip(&h).map(|(c, h)| c + factor * h).collect(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    /// Map a point of the unit cube into the box.
    pub fn map_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(u, (l, h))| l + u * (h - l))
            .collect()
    }
}

/// Latin-hypercube sample of `n` points in `[0,1]^dim`.
pub fn latin_hypercube(dim: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut pts = alloc::vec![alloc::vec![0.0; dim]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for d in 0..dim {
        strata.shuffle(rng);
        for (p, s) in pts.iter_mut().zip(&strata) {
            let jitter: f64 = rng.random();
            p[d] = (*s as f64 + jitter) / n as f64;
        }
    }
    pts
}

/// Samples over a box and its concentric dyadic shrinkings.
///
/// Level `ℓ` covers the box scaled by `2^-ℓ`; levels stop once the largest
/// half-width drops below `min_half_width`. Every level reuses the same unit
/// Latin-hypercube points, so the sample set of a box is contained in the
/// sample set of the box doubled about its center.
pub fn nested_box_samples(
    bx: &StateBox,
    per_level: usize,
    min_half_width: f64,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let unit = latin_hypercube(bx.dim(), per_level, &mut r);
    let mut out = Vec::new();
    let mut level = bx.clone();
    loop {
        for u in &unit {
            out.push(level.map_unit(u));
        }
        let next = level.scaled(0.5);
        let widest = next.half_widths().into_iter().fold(0.0, f64::max);
        if widest < min_half_width || min_half_width <= 0.0 {
            break;
        }
        level = next;
    }
    out
}

/// Uniform perturbations of `x` inside the cube of half-width `radius`.
pub fn neighborhood(x: &[f64], radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| x.iter().map(|v| v + radius * (2.0 * r.random::<f64>() - 1.0)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lhs_has_one_point_per_stratum() {
        let mut r = rng(7);
        let pts = latin_hypercube(3, 50, &mut r);
        for d in 0..3 {
            let mut seen = [false; 50];
            for p in &pts {
                let s = (p[d] * 50.0) as usize;
                assert!(!seen[s]);
                seen[s] = true;
            }
        }
    }

    #[test]
    fn doubled_box_samples_are_a_superset() {
        let b = StateBox::new(alloc::vec![-1.0, 0.0], alloc::vec![1.0, 0.5]).unwrap();
        let small = nested_box_samples(&b, 20, 0.05, 3);
        let big = nested_box_samples(&b.scaled(2.0), 20, 0.05, 3);
        for p in &small {
            assert!(big.iter().any(|q| q.iter().zip(p).all(|(a, b)| (a - b).abs() < 1e-12)));
        }
    }
}
