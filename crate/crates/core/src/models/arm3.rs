//! Planar three-link arm moving in the horizontal plane (no gravity).
//!
//! State `x = (q1, q2, q3, q̇1, q̇2, q̇3)`, joint torques as inputs. The
//! deck is `q1, q2, q3, xB1, yB1, xB2, yB2` where `B1` sits at the tip of
//! link 2 and `B2` at the tip of link 3.

use alloc::string::String;

use crate::linalg::solve_in_place;
use crate::scalar::Scalar;
use crate::system::ControlAffineSystem;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arm3Params {
    /// Link lengths (m).
    pub l: [f64; 3],
    /// Link masses (kg).
    pub m: [f64; 3],
    /// Joint-to-center-of-mass distances (m).
    pub lc: [f64; 3],
    /// Link inertias about the center of mass (kg·m²).
    pub inertia: [f64; 3],
}

impl Default for Arm3Params {
    /// Point masses at the link tips plus slender-rod inertias.
    fn default() -> Self {
        Self::point_masses([0.5, 0.4, 0.3], [4.0, 3.0, 2.0])
    }
}

impl Arm3Params {
    pub fn point_masses(l: [f64; 3], m: [f64; 3]) -> Self {
        let inertia = [0, 1, 2].map(|i| m[i] * l[i] * l[i] / 12.0);
        Self { l, m, lc: l, inertia }
    }

    pub fn is_valid(&self) -> bool {
        [self.l, self.m, self.lc, self.inertia].iter().flatten().all(|v| v.is_finite() && *v > 0.0)
    }

    fn coupling(&self) -> (f64, f64, f64) {
        let [l1, l2, _] = self.l;
        let [_, m2, m3] = self.m;
        let [_, lc2, lc3] = self.lc;
        (m2 * l1 * lc2 + m3 * l1 * l2, m3 * l2 * lc3, m3 * l1 * lc3)
    }

    fn constant_part(&self) -> [[f64; 3]; 3] {
        let [l1, l2, _] = self.l;
        let [m1, m2, m3] = self.m;
        let [lc1, lc2, lc3] = self.lc;
        let [i1, i2, i3] = self.inertia;
        let m33 = i3 + m3 * lc3 * lc3;
        let m22 = i2 + m2 * lc2 * lc2 + m3 * l2 * l2 + m33;
        let m11 = i1 + m1 * lc1 * lc1 + m2 * l1 * l1 + m3 * l1 * l1 + m22;
        [[m11, m22, m33], [m22, m22, m33], [m33, m33, m33]]
    }

    /// Inertia matrix `M(q)`.
    pub fn mass_matrix<T: Scalar>(&self, q: &[T]) -> [[T; 3]; 3] {
        let (a, b, d) = self.coupling();
        let c2 = q[1].cos();
        let c3 = q[2].cos();
        let c23 = (q[1] + q[2]).cos();
        let m0 = self.constant_part();
        let pa = c2 * a;
        let pb = c3 * b;
        let pd = c23 * d;
        let k = |i: usize, j: usize| T::from_f64(m0[i][j]);
        let m11 = k(0, 0) + pa * 2.0 + pb * 2.0 + pd * 2.0;
        let m12 = k(0, 1) + pa + pb * 2.0 + pd;
        let m13 = k(0, 2) + pb + pd;
        let m22 = k(1, 1) + pb * 2.0;
        let m23 = k(1, 2) + pb;
        let m33 = k(2, 2);
        [[m11, m12, m13], [m12, m22, m23], [m13, m23, m33]]
    }

    /// `∂M/∂q_i` for `i = 0, 1, 2`.
    fn mass_matrix_partials<T: Scalar>(&self, q: &[T]) -> [[[T; 3]; 3]; 3] {
        let (a, b, d) = self.coupling();
        let s2 = q[1].sin();
        let s3 = q[2].sin();
        let s23 = (q[1] + q[2]).sin();
        let z = T::zero();
        // pattern(pa, pb, pd) mirrors the coupling structure of mass_matrix
        let pattern = |pa: T, pb: T, pd: T| {
            let m11 = pa * 2.0 + pb * 2.0 + pd * 2.0;
            let m12 = pa + pb * 2.0 + pd;
            let m13 = pb + pd;
            let m22 = pb * 2.0;
            let m23 = pb;
            [[m11, m12, m13], [m12, m22, m23], [m13, m23, z]]
        };
        let d2 = pattern(-(s2 * a), z, -(s23 * d));
        let d3 = pattern(z, -(s3 * b), -(s23 * d));
        [[[z; 3]; 3], d2, d3]
    }

    /// Coriolis matrix from Christoffel symbols, so `Ṁ − 2C` is skew.
    pub fn coriolis<T: Scalar>(&self, q: &[T], qd: &[T]) -> [[T; 3]; 3] {
        let dm = self.mass_matrix_partials(q);
        let mut c = [[T::zero(); 3]; 3];
        for k in 0..3 {
            for j in 0..3 {
                let mut acc = T::zero();
                for i in 0..3 {
                    acc += (dm[i][k][j] + dm[j][k][i] - dm[k][i][j]) * qd[i];
                }
                c[k][j] = acc * 0.5;
            }
        }
        c
    }

    /// `q̈ = M(q)⁻¹(τ − C(q, q̇) q̇)`.
    pub fn dynamics<T: Scalar>(&self, q: &[T], qd: &[T], tau: &[T]) -> [T; 3] {
        let c = self.coriolis(q, qd);
        let mut rhs = [T::zero(); 3];
        for k in 0..3 {
            let mut acc = tau[k];
            for j in 0..3 {
                acc -= c[k][j] * qd[j];
            }
            rhs[k] = acc;
        }
        self.solve_mass(q, &mut rhs);
        rhs
    }

    /// Overwrite `rhs` with `M(q)⁻¹ rhs`.
    pub fn solve_mass<T: Scalar>(&self, q: &[T], rhs: &mut [T; 3]) {
        let m = self.mass_matrix(q);
        let mut a = [T::zero(); 9];
        for i in 0..3 {
            a[3 * i..3 * i + 3].copy_from_slice(&m[i]);
        }
        let ok = solve_in_place(&mut a, rhs, 3);
        debug_assert!(ok, "inertia matrix is positive definite");
    }

    pub fn kinetic_energy(&self, q: &[f64], qd: &[f64]) -> f64 {
        let m = self.mass_matrix(q);
        let mut e = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                e += qd[i] * m[i][j] * qd[j];
            }
        }
        0.5 * e
    }

    /// Planar positions `(xB1, yB1, xB2, yB2)`.
    pub fn gripper_positions<T: Scalar>(&self, q: &[T]) -> [T; 4] {
        let [l1, l2, l3] = self.l;
        let a1 = q[0];
        let a12 = q[0] + q[1];
        let a123 = a12 + q[2];
        let xb1 = a1.cos() * l1 + a12.cos() * l2;
        let yb1 = a1.sin() * l1 + a12.sin() * l2;
        [xb1, yb1, xb1 + a123.cos() * l3, yb1 + a123.sin() * l3]
    }

    /// Gripper positions and their velocities `J(q) q̇`, in deck order
    /// after the three joints.
    pub fn forward_outputs(&self, q: &[f64], qd: &[f64]) -> ([f64; 7], [f64; 7]) {
        let [l1, l2, l3] = self.l;
        let p = self.gripper_positions(q);
        let w1 = qd[0];
        let w12 = w1 + qd[1];
        let w123 = w12 + qd[2];
        let (s1, c1) = (libm::sin(q[0]), libm::cos(q[0]));
        let (s12, c12) = (libm::sin(q[0] + q[1]), libm::cos(q[0] + q[1]));
        let (s123, c123) = (libm::sin(q[0] + q[1] + q[2]), libm::cos(q[0] + q[1] + q[2]));
        let vxb1 = -l1 * s1 * w1 - l2 * s12 * w12;
        let vyb1 = l1 * c1 * w1 + l2 * c12 * w12;
        let y = [q[0], q[1], q[2], p[0], p[1], p[2], p[3]];
        let yd = [qd[0], qd[1], qd[2], vxb1, vyb1, vxb1 - l3 * s123 * w123, vyb1 + l3 * c123 * w123];
        (y, yd)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Arm3 {
    pub params: Arm3Params,
}

impl Arm3 {
    pub fn new(params: Arm3Params) -> Self {
        Self { params }
    }
}

const NAMES: [&str; 7] = ["q1", "q2", "q3", "xB1", "yB1", "xB2", "yB2"];

impl ControlAffineSystem for Arm3 {
    fn state_dim(&self) -> usize {
        6
    }

    fn input_dim(&self) -> usize {
        3
    }

    fn deck_len(&self) -> usize {
        7
    }

    fn drift<T: Scalar>(&self, x: &[T], out: &mut [T]) {
        let zero = [T::zero(); 3];
        let qdd = self.params.dynamics(&x[..3], &x[3..], &zero);
        out[..3].copy_from_slice(&x[3..6]);
        out[3..6].copy_from_slice(&qdd);
    }

    fn input_field<T: Scalar>(&self, j: usize, x: &[T], out: &mut [T]) {
        let mut e = [T::zero(); 3];
        e[j] = T::one();
        self.params.solve_mass(&x[..3], &mut e);
        out[..3].copy_from_slice(&[T::zero(); 3]);
        out[3..6].copy_from_slice(&e);
    }

    fn output<T: Scalar>(&self, i: usize, x: &[T]) -> T {
        if i < 3 {
            return x[i];
        }
        self.params.gripper_positions(&x[..3])[i - 3]
    }

    fn output_name(&self, i: usize) -> String {
        String::from(NAMES[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stretched_and_rotated_positions() {
        let p = Arm3Params::default();
        let g = p.gripper_positions(&[0.0, 0.0, 0.0]);
        assert_eq!(g, [0.9, 0.0, 1.2, 0.0]);
        let g = p.gripper_positions(&[core::f64::consts::FRAC_PI_2, 0.0, 0.0]);
        assert!(g[2].abs() < 1e-15 && (g[3] - 1.2).abs() < 1e-15);
    }

    #[test]
    fn mass_matrix_matches_expanded_entries() {
        let p = Arm3Params::default();
        let q = [0.3, -0.8, 1.1];
        let m = p.mass_matrix(&q);
        let [l1, l2, _] = p.l;
        let [m1, m2, m3] = p.m;
        let [lc1, lc2, lc3] = p.lc;
        let [i1, i2, i3] = p.inertia;
        let (c2, c3, c23) = (libm::cos(q[1]), libm::cos(q[2]), libm::cos(q[1] + q[2]));
        let e11 = i1 + i2 + i3 + m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2)
            + m3 * (l1 * l1 + l2 * l2 + lc3 * lc3 + 2.0 * l1 * l2 * c2 + 2.0 * l2 * lc3 * c3 + 2.0 * l1 * lc3 * c23);
        let e12 = i2 + i3 + m2 * (lc2 * lc2 + l1 * lc2 * c2)
            + m3 * (l2 * l2 + lc3 * lc3 + l1 * l2 * c2 + 2.0 * l2 * lc3 * c3 + l1 * lc3 * c23);
        let e13 = i3 + m3 * (lc3 * lc3 + l2 * lc3 * c3 + l1 * lc3 * c23);
        let e22 = i2 + i3 + m2 * lc2 * lc2 + m3 * (l2 * l2 + lc3 * lc3 + 2.0 * l2 * lc3 * c3);
        let e23 = i3 + m3 * (lc3 * lc3 + l2 * lc3 * c3);
        let e33 = i3 + m3 * lc3 * lc3;
        let want = [[e11, e12, e13], [e12, e22, e23], [e13, e23, e33]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[i][j] - want[i][j]).abs() < 1e-13, "{i}{j}");
            }
        }
    }

    #[test]
    fn zero_velocity_zero_torque_is_at_rest() {
        let p = Arm3Params::default();
        assert_eq!(p.dynamics(&[0.1, 0.2, 0.3], &[0.0; 3], &[0.0; 3]), [0.0; 3]);
    }
}
