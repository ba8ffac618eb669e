//! Truncated multivariate jets built from nested first-order dual numbers.
//!
//! A `Jet<N>` carries `N = 2^D` coefficients indexed by bitmasks over `D`
//! infinitesimals `ε_0 … ε_{D-1}` with `ε_k² = 0`. Nesting `D` first-order
//! dual lifts produces exactly this algebra: coefficient `c[m]` multiplies
//! `∏_{k∈m} ε_k`. Products are subset convolutions and smooth functions are
//! applied through their Taylor series in the nilpotent part.

use core::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::scalar::Scalar;

/// Largest supported number of infinitesimals.
pub const MAX_DEPTH: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<const N: usize> {
    c: [f64; N],
}

impl<const N: usize> Jet<N> {
    const DEPTH: usize = {
        assert!(N.is_power_of_two() && N <= (1 << MAX_DEPTH));
        N.trailing_zeros() as usize
    };

    #[inline]
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = v;
        Self { c }
    }

    /// `v + ε_bit`.
    pub fn variable(v: f64, bit: usize) -> Self {
        let mut j = Self::constant(v);
        j.c[1 << bit] = 1.0;
        j
    }

    pub fn from_coeffs(c: [f64; N]) -> Self {
        Self { c }
    }

    pub fn depth() -> usize {
        Self::DEPTH
    }

    #[inline]
    pub fn coeff(&self, mask: usize) -> f64 {
        self.c[mask]
    }

    pub fn coeffs(&self) -> &[f64; N] {
        &self.c
    }

    /// Multiply by `ε_bit`. Terms already containing `ε_bit` vanish.
    #[inline]
    pub fn shift(&self, bit: usize) -> Self {
        let b = 1usize << bit;
        let mut c = [0.0; N];
        for m in 0..N {
            if m & b == 0 {
                c[m | b] = self.c[m];
            }
        }
        Self { c }
    }

    /// Apply a scalar function given its normalized Taylor coefficients
    /// `t[k] = f^(k)(a)/k!` at the real part `a`.
    fn compose(&self, t: &[f64; MAX_DEPTH + 1]) -> Self {
        let d = Self::DEPTH;
        let mut nil = *self;
        nil.c[0] = 0.0;
        let mut acc = Self::constant(t[d]);
        for k in (0..d).rev() {
            acc = acc * nil;
            acc.c[0] = t[k];
        }
        acc
    }

    fn taylor_recip(a: f64) -> [f64; MAX_DEPTH + 1] {
        let mut t = [0.0; MAX_DEPTH + 1];
        t[0] = 1.0 / a;
        for k in 1..=Self::DEPTH {
            t[k] = -t[k - 1] / a;
        }
        t
    }

    fn taylor_pow(a: f64, p: f64, t0: f64) -> [f64; MAX_DEPTH + 1] {
        let mut t = [0.0; MAX_DEPTH + 1];
        t[0] = t0;
        for k in 1..=Self::DEPTH {
            t[k] = t[k - 1] * (p - (k as f64 - 1.0)) / (k as f64 * a);
        }
        t
    }
}

impl<const N: usize> Default for Jet<N> {
    fn default() -> Self {
        Self::constant(0.0)
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a += *b;
        }
        self
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a -= *b;
        }
        self
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        for a in self.c.iter_mut() {
            *a = -*a;
        }
        self
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut c = [0.0; N];
        for (m, out) in c.iter_mut().enumerate() {
            // subsets s of m, starting from s = m
            let mut acc = self.c[m] * rhs.c[0];
            let mut s = m;
            while s != 0 {
                s = (s - 1) & m;
                acc += self.c[s] * rhs.c[m ^ s];
            }
            *out = acc;
        }
        Self { c }
    }
}

impl<const N: usize> Div for Jet<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let mut q = self * rhs.recip();
        q.c[0] = self.c[0] / rhs.c[0];
        q
    }
}

impl<const N: usize> Add<f64> for Jet<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: f64) -> Self {
        self.c[0] += rhs;
        self
    }
}

impl<const N: usize> Sub<f64> for Jet<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: f64) -> Self {
        self.c[0] -= rhs;
        self
    }
}

impl<const N: usize> Mul<f64> for Jet<N> {
    type Output = Self;
    #[inline]
    fn mul(mut self, rhs: f64) -> Self {
        for a in self.c.iter_mut() {
            *a *= rhs;
        }
        self
    }
}

impl<const N: usize> Div<f64> for Jet<N> {
    type Output = Self;
    #[inline]
    fn div(mut self, rhs: f64) -> Self {
        for a in self.c.iter_mut() {
            *a /= rhs;
        }
        self
    }
}

impl<const N: usize> Mul<Jet<N>> for f64 {
    type Output = Jet<N>;
    #[inline]
    fn mul(self, rhs: Jet<N>) -> Jet<N> {
        rhs * self
    }
}

impl<const N: usize> Add<Jet<N>> for f64 {
    type Output = Jet<N>;
    #[inline]
    fn add(self, rhs: Jet<N>) -> Jet<N> {
        rhs + self
    }
}

impl<const N: usize> Sub<Jet<N>> for f64 {
    type Output = Jet<N>;
    #[inline]
    fn sub(self, rhs: Jet<N>) -> Jet<N> {
        -rhs + self
    }
}

macro_rules! assign_ops {
    ($($tr:ident $m:ident $op:tt),*) => {$(
        impl<const N: usize> $tr for Jet<N> {
            #[inline]
            fn $m(&mut self, rhs: Self) { *self = *self $op rhs; }
        }
    )*};
}
assign_ops!(AddAssign add_assign +, SubAssign sub_assign -, MulAssign mul_assign *, DivAssign div_assign /);

impl<const N: usize> Scalar for Jet<N> {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Self::constant(v)
    }

    #[inline]
    fn value(&self) -> f64 {
        self.c[0]
    }

    fn sin(self) -> Self {
        let (s, c) = (libm::sin(self.c[0]), libm::cos(self.c[0]));
        let cycle = [s, c, -s, -c];
        let mut t = [0.0; MAX_DEPTH + 1];
        let mut fact = 1.0;
        for (k, tk) in t.iter_mut().enumerate().take(Self::DEPTH + 1) {
            if k > 0 {
                fact *= k as f64;
            }
            *tk = cycle[k % 4] / fact;
        }
        t[0] = s;
        self.compose(&t)
    }

    fn cos(self) -> Self {
        let (s, c) = (libm::sin(self.c[0]), libm::cos(self.c[0]));
        let cycle = [c, -s, -c, s];
        let mut t = [0.0; MAX_DEPTH + 1];
        let mut fact = 1.0;
        for (k, tk) in t.iter_mut().enumerate().take(Self::DEPTH + 1) {
            if k > 0 {
                fact *= k as f64;
            }
            *tk = cycle[k % 4] / fact;
        }
        t[0] = c;
        self.compose(&t)
    }

    fn exp(self) -> Self {
        let e = libm::exp(self.c[0]);
        let mut t = [0.0; MAX_DEPTH + 1];
        t[0] = e;
        for k in 1..=Self::DEPTH {
            t[k] = t[k - 1] / k as f64;
        }
        self.compose(&t)
    }

    fn ln(self) -> Self {
        let a = self.c[0];
        let mut t = [0.0; MAX_DEPTH + 1];
        t[0] = libm::log(a);
        let mut apow = 1.0;
        for k in 1..=Self::DEPTH {
            apow *= a;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            t[k] = sign / (k as f64 * apow);
        }
        self.compose(&t)
    }

    fn sqrt(self) -> Self {
        let a = self.c[0];
        self.compose(&Self::taylor_pow(a, 0.5, libm::sqrt(a)))
    }

    fn powf(self, p: f64) -> Self {
        let a = self.c[0];
        self.compose(&Self::taylor_pow(a, p, libm::pow(a, p)))
    }

    fn recip(self) -> Self {
        self.compose(&Self::taylor_recip(self.c[0]))
    }

    fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }
}
