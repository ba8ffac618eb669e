//! Square output choices, meld certification and validity tests.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lie::{self, LieOptions};
use crate::linalg::cond2;
use crate::system::ControlAffineSystem;

pub const MAX_DECK: usize = 31;
pub const MAX_CHOICES: u64 = 1_000_000;
pub const DEFAULT_COND_MAX: f64 = 1e12;

/// A selection of deck outputs, stored as a bitset (bit `i` ↔ output `i`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Choice {
    bits: u32,
    q: u8,
}

impl Choice {
    pub fn from_indices(indices: &[usize], q: usize) -> Result<Self> {
        if q == 0 || q > MAX_DECK {
            return Err(Error::InvalidArgument("deck size must be in 1..=31"));
        }
        let mut bits = 0u32;
        for &i in indices {
            if i >= q {
                return Err(Error::IndexOutOfRange { index: i, len: q });
            }
            if bits & (1 << i) != 0 {
                return Err(Error::InvalidArgument("repeated output index"));
            }
            bits |= 1 << i;
        }
        Ok(Self { bits, q: q as u8 })
    }

    /// Parse a `0`/`1` string where the first character is output 1.
    pub fn parse_bits(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut idx = Vec::new();
        let mut q = 0;
        for c in s.chars().filter(|c| !c.is_whitespace()) {
            match c {
                '1' => idx.push(q),
                '0' => {}
                _ => return Err(Error::InvalidArgument("choice bits must be 0 or 1")),
            }
            q += 1;
        }
        Self::from_indices(&idx, q)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn deck_len(&self) -> usize {
        self.q as usize
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.deck_len() && self.bits & (1 << i) != 0
    }

    /// Selected outputs, strictly increasing.
    pub fn indices(&self) -> Vec<usize> {
        (0..self.deck_len()).filter(|i| self.contains(*i)).collect()
    }

    pub fn selection(&self) -> SelectionMatrix {
        SelectionMatrix { columns: self.indices(), q: self.deck_len() }
    }

    pub fn to_bit_string(&self) -> String {
        (0..self.deck_len()).map(|i| if self.contains(i) { '1' } else { '0' }).collect()
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bit_string())
    }
}

/// Binomial coefficient, saturating.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u64) / (i as u64 + 1);
    }
    acc
}

/// All `p`-element choices from a deck of `q`, in lexicographic order.
pub fn square_choices(q: usize, p: usize) -> Result<Vec<Choice>> {
    if p == 0 || p >= q {
        return Err(Error::InvalidArgument("square choices need 1 <= p < q"));
    }
    if q > MAX_DECK || binomial(q, p) > MAX_CHOICES {
        return Err(Error::SizeOverflow { q, p });
    }
    let mut out = Vec::with_capacity(binomial(q, p) as usize);
    let mut idx: Vec<usize> = (0..p).collect();
    loop {
        out.push(Choice::from_indices(&idx, q)?);
        let mut k = p;
        while k > 0 && idx[k - 1] == q - p + k - 1 {
            k -= 1;
        }
        if k == 0 {
            return Ok(out);
        }
        idx[k - 1] += 1;
        for t in k..p {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

/// `Γ_σ`: row `k` is the canonical basis vector `e_{columns[k]}` of `ℝ^q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectionMatrix {
    pub columns: Vec<usize>,
    pub q: usize,
}

impl SelectionMatrix {
    pub fn apply<T: Copy>(&self, v: &[T]) -> Vec<T> {
        self.columns.iter().map(|&c| v[c]).collect()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.columns.len(), self.q);
        for (r, &c) in self.columns.iter().enumerate() {
            m[(r, c)] = 1.0;
        }
        m
    }
}

pub fn selection_matrix(sigma: &Choice) -> SelectionMatrix {
    sigma.selection()
}

/// A choice together with the relative degrees of its outputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Meld {
    pub choice: Choice,
    /// `ℐ_σ`, strictly increasing.
    pub outputs: Vec<usize>,
    /// `r_σ`, aligned with `outputs`.
    pub degrees: Vec<usize>,
}

impl Meld {
    pub fn new(choice: Choice, degrees: Vec<usize>) -> Result<Self> {
        let outputs = choice.indices();
        if outputs.len() != degrees.len() {
            return Err(Error::DimensionMismatch { expected: outputs.len(), found: degrees.len() });
        }
        Ok(Self { choice, outputs, degrees })
    }

    /// Build from the degrees of the whole deck.
    pub fn from_deck_degrees(choice: Choice, deck_degrees: &[usize]) -> Result<Self> {
        let degrees = choice.indices().iter().map(|&i| deck_degrees[i]).collect();
        Self::new(choice, degrees)
    }

    /// `Σ r_i`.
    pub fn dim(&self) -> usize {
        self.degrees.iter().sum()
    }

    pub fn degree_of(&self, output: usize) -> Option<usize> {
        self.outputs.iter().position(|&i| i == output).map(|k| self.degrees[k])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RejectReason {
    DegreeSum,
    Singular,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::DegreeSum => "degree_sum",
            RejectReason::Singular => "singular",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeldCertificate {
    pub sigma: Choice,
    pub x0: Vec<f64>,
    pub r_sigma: Vec<usize>,
    pub degree_sum: usize,
    pub det_a: f64,
    pub cond_a: f64,
    pub reject: Option<RejectReason>,
}

impl MeldCertificate {
    pub fn is_meld(&self) -> bool {
        self.reject.is_none()
    }

    pub fn meld(&self) -> Meld {
        Meld { choice: self.sigma, outputs: self.sigma.indices(), degrees: self.r_sigma.clone() }
    }
}

fn classify(
    sigma: Choice,
    x0: &[f64],
    r_sigma: Vec<usize>,
    a: DMatrix<f64>,
    n: usize,
    cond_max: f64,
) -> MeldCertificate {
    let degree_sum = r_sigma.iter().sum();
    let det_a = a.clone().determinant();
    let cond_a = cond2(&a);
    let reject = if degree_sum != n {
        Some(RejectReason::DegreeSum)
    } else if !(det_a != 0.0 && cond_a < cond_max) {
        Some(RejectReason::Singular)
    } else {
        None
    };
    MeldCertificate { sigma, x0: x0.to_vec(), r_sigma, degree_sum, det_a, cond_a, reject }
}

fn check_square<S: ControlAffineSystem>(sys: &S, sigma: &Choice) -> Result<()> {
    if sigma.deck_len() != sys.deck_len() {
        return Err(Error::DimensionMismatch { expected: sys.deck_len(), found: sigma.deck_len() });
    }
    if sigma.len() != sys.input_dim() {
        return Err(Error::NonSquare { outputs: sigma.len(), inputs: sys.input_dim() });
    }
    Ok(())
}

fn r_max<S: ControlAffineSystem>(sys: &S, opts: &LieOptions) -> usize {
    sys.state_dim().min(opts.k_max + 1)
}

/// Degrees of `outputs` at `x`, or the first output whose degree is undefined.
fn degrees_at<S: ControlAffineSystem>(
    sys: &S,
    outputs: &[usize],
    x: &[f64],
    opts: &LieOptions,
) -> Result<core::result::Result<Vec<usize>, usize>> {
    let reps = lie::relative_degrees(sys, outputs, x, r_max(sys, opts), opts)?;
    Ok(reps.iter().map(|r| r.r.ok_or(r.output)).collect())
}

fn interaction(rows: &[f64], p: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(p, m, rows)
}

pub fn certify_meld<S: ControlAffineSystem>(
    sys: &S,
    sigma: &Choice,
    x0: &[f64],
    cond_max: f64,
    opts: &LieOptions,
) -> Result<MeldCertificate> {
    check_square(sys, sigma)?;
    let idx = sigma.indices();
    let r = degrees_at(sys, &idx, x0, opts)?.map_err(|output| Error::UndefinedRelativeDegree { output })?;
    let ev = lie::evaluate_deck(sys, &idx, &r, x0)?;
    let a = interaction(&ev.interaction, idx.len(), sys.input_dim());
    Ok(classify(*sigma, x0, r, a, sys.state_dim(), cond_max))
}

/// Certify every square choice at `x0`, in lexicographic order.
///
/// Degrees and interaction rows are computed once for the whole deck and
/// then selected, which is exactly `Γ_σ A_Δ(x0)`.
pub fn enumerate_melds<S: ControlAffineSystem>(
    sys: &S,
    x0: &[f64],
    cond_max: f64,
    opts: &LieOptions,
) -> Result<Vec<MeldCertificate>> {
    let q = sys.deck_len();
    let m = sys.input_dim();
    let choices = square_choices(q, m)?;
    let all: Vec<usize> = (0..q).collect();
    let r = degrees_at(sys, &all, x0, opts)?.map_err(|output| Error::UndefinedRelativeDegree { output })?;
    let ev = lie::evaluate_deck(sys, &all, &r, x0)?;
    Ok(choices
        .into_iter()
        .map(|c| {
            let idx = c.indices();
            let rows: Vec<f64> = idx.iter().flat_map(|&i| ev.interaction[i * m..(i + 1) * m].iter().copied()).collect();
            let rs = idx.iter().map(|&i| r[i]).collect();
            classify(c, x0, rs, interaction(&rows, idx.len(), m), sys.state_dim(), cond_max)
        })
        .collect())
}

/// Pointwise membership in the validity set of a certified meld.
pub fn validity_membership<S: ControlAffineSystem>(
    sys: &S,
    cert: &MeldCertificate,
    x: &[f64],
    cond_max: f64,
    opts: &LieOptions,
) -> Result<bool> {
    check_square(sys, &cert.sigma)?;
    let idx = cert.sigma.indices();
    let r = match degrees_at(sys, &idx, x, opts)? {
        Ok(r) => r,
        Err(_) => return Ok(false),
    };
    if r != cert.r_sigma {
        return Ok(false);
    }
    let ev = lie::evaluate_deck(sys, &idx, &r, x)?;
    let a = interaction(&ev.interaction, idx.len(), sys.input_dim());
    Ok(cond2(&a) < cond_max)
}

/// Both melds valid at `x` (a pointwise compatibility witness).
pub fn compatible_at<S: ControlAffineSystem>(
    sys: &S,
    a: &MeldCertificate,
    b: &MeldCertificate,
    x: &[f64],
    cond_max: f64,
    opts: &LieOptions,
) -> Result<bool> {
    Ok(validity_membership(sys, a, x, cond_max, opts)? && validity_membership(sys, b, x, cond_max, opts)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::DoubleIntegrator;
    use alloc::vec;

    #[test]
    fn choice_counts_and_order() {
        assert_eq!(square_choices(7, 3).unwrap().len(), 35);
        let c: Vec<Vec<usize>> = square_choices(3, 2).unwrap().iter().map(|c| c.indices()).collect();
        assert_eq!(c, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert!(square_choices(3, 3).is_err());
        assert_eq!(square_choices(31, 15), Err(Error::SizeOverflow { q: 31, p: 15 }));
    }

    #[test]
    fn bit_strings_round_trip() {
        let c = Choice::parse_bits("0011100").unwrap();
        assert_eq!(c.indices(), vec![2, 3, 4]);
        assert_eq!(c.to_bit_string(), "0011100");
    }

    #[test]
    fn selection_applies_in_index_order() {
        let g = Choice::from_indices(&[2, 0], 3).unwrap().selection();
        assert_eq!(g.apply(&['a', 'b', 'c']), vec!['a', 'c']);
        let m = g.to_matrix();
        assert_eq!(&m * m.transpose(), DMatrix::identity(2, 2));
    }

    #[test]
    fn double_integrator_has_one_meld() {
        let o = LieOptions::default();
        let certs = enumerate_melds(&DoubleIntegrator, &[0.3, -0.2], DEFAULT_COND_MAX, &o).unwrap();
        assert_eq!(certs.len(), 2);
        assert!(certs[0].is_meld());
        assert_eq!(certs[1].reject, Some(RejectReason::DegreeSum));
        assert_eq!(certs[1].degree_sum, 1);
    }
}
