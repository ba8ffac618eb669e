//! Piecewise-constant switching signals.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// `starts[k]` opens interval `k`, during which `melds[k]` is active.
/// The last interval is unbounded.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchSchedule {
    pub starts: Vec<f64>,
    /// Index into the scenario's meld list, per interval.
    pub melds: Vec<usize>,
}

impl SwitchSchedule {
    pub fn new(starts: Vec<f64>, melds: Vec<usize>) -> Result<Self> {
        if starts.is_empty() || starts.len() != melds.len() {
            return Err(Error::DimensionMismatch { expected: starts.len(), found: melds.len() });
        }
        if starts.iter().any(|t| !t.is_finite()) || starts.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("switching instants must be finite and strictly increasing"));
        }
        Ok(Self { starts, melds })
    }

    /// One meld from `t0` on.
    pub fn single(t0: f64, meld: usize) -> Self {
        Self { starts: alloc::vec![t0], melds: alloc::vec![meld] }
    }

    pub fn t0(&self) -> f64 {
        self.starts[0]
    }

    pub fn intervals(&self) -> usize {
        self.starts.len()
    }

    /// Switching instants `t_1, t_2, …` (excluding `t0`).
    pub fn switches(&self) -> &[f64] {
        &self.starts[1..]
    }

    pub fn interval_at(&self, t: f64) -> usize {
        self.starts.partition_point(|s| *s <= t).saturating_sub(1)
    }

    pub fn end_of(&self, k: usize) -> f64 {
        self.starts.get(k + 1).copied().unwrap_or(f64::INFINITY)
    }

    /// Interval starts as step indices on the grid `t0 + j dt` (floor).
    pub fn snapped_steps(&self, dt: f64) -> Vec<usize> {
        let t0 = self.t0();
        self.starts.iter().map(|t| libm::floor((t - t0) / dt + 1e-9) as usize).collect()
    }

    /// Whether every interval lasts at least its dwell bound (`τ0` first,
    /// `τ̄` afterwards).
    pub fn respects_dwell(&self, tau0: f64, tau_bar: f64) -> bool {
        self.starts
            .windows(2)
            .enumerate()
            .all(|(k, w)| w[1] - w[0] >= if k == 0 { tau0 } else { tau_bar })
    }

    /// Stretch intervals so `t_{k+1} − t_k = max(requested_k, τ_k)`.
    pub fn certified(&self, tau0: f64, tau_bar: f64) -> Self {
        let mut starts = Vec::with_capacity(self.starts.len());
        starts.push(self.starts[0]);
        for (k, w) in self.starts.windows(2).enumerate() {
            let need = if k == 0 { tau0 } else { tau_bar };
            let prev = *starts.last().unwrap();
            starts.push(prev + (w[1] - w[0]).max(need));
        }
        Self { starts, melds: self.melds.clone() }
    }
}
