//! Small dense linear algebra helpers.

use nalgebra::DMatrix;

use crate::scalar::Scalar;

/// Solve `A x = b` in place by Gaussian elimination with partial pivoting on
/// the real part. `a` is row-major `n × n`; on success `b` holds `x`.
/// Returns `false` when a pivot is exactly zero.
pub fn solve_in_place<T: Scalar>(a: &mut [T], b: &mut [T], n: usize) -> bool {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for col in 0..n {
        let mut piv = col;
        let mut best = libm::fabs(a[col * n + col].value());
        for r in col + 1..n {
            let v = libm::fabs(a[r * n + col].value());
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return false;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] / d;
            for k in col..n {
                let t = a[col * n + k];
                a[r * n + k] -= factor * t;
            }
            let t = b[col];
            b[r] -= factor * t;
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col * n + k] * b[k];
        }
        b[col] = acc / a[col * n + col];
    }
    true
}

/// 2-norm condition number (ratio of extreme singular values).
pub fn cond2(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    if m.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|v| libm::fabs(*v)).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0;
    if norm1 > 0.5 {
        s = libm::ceil(libm::log2(norm1 / 0.5)) as i32;
    }
    let scale = libm::pow(2.0, -(s as f64));
    let b = a * scale;
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=24 {
        term = &term * &b / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Jet;

    #[test]
    fn solves_pivoting_system() {
        let mut a = [0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let mut b = [3.0, 2.0, 4.0];
        assert!(solve_in_place(&mut a, &mut b, 3));
        for (v, e) in b.iter().zip([1.0, 1.0, 1.0]) {
            assert!((v - e).abs() < 1e-14);
        }
    }

    #[test]
    fn solve_propagates_derivatives() {
        // (2 + ε) x = 1  =>  x = 1/2 - ε/4
        let mut a = [Jet::<2>::from_coeffs([2.0, 1.0])];
        let mut b = [Jet::<2>::constant(1.0)];
        assert!(solve_in_place(&mut a, &mut b, 1));
        assert!((b[0].coeff(0) - 0.5).abs() < 1e-15);
        assert!((b[0].coeff(1) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn singular_is_reported() {
        let mut a = [1.0, 2.0, 2.0, 4.0];
        let mut b = [1.0, 1.0];
        // second pivot becomes exactly zero
        assert!(!solve_in_place(&mut a, &mut b, 2));
    }

    #[test]
    fn expm_scalar_and_nilpotent() {
        let a = DMatrix::from_row_slice(1, 1, &[-2.0]);
        assert!((expm(&a)[(0, 0)] - libm::exp(-2.0)).abs() < 1e-14);
        let n = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 0.0, 0.0]);
        let e = expm(&n);
        assert!((e[(0, 1)] - 3.0).abs() < 1e-14 && (e[(0, 0)] - 1.0).abs() < 1e-14);
    }
}
