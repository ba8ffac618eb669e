use meld_core::control::{block_constants, companion, global_constants, is_hurwitz, MeldConstants};
use meld_core::coords::{phi_map, psi_map, NewtonOptions};
use meld_core::dwell::dwell_times;
use meld_core::integrate::rk4;
use meld_core::jet::Jet;
use meld_core::lie::{self, LieOptions};
use meld_core::linalg::expm;
use meld_core::meld::{binomial, enumerate_melds, selection_matrix, Choice, Meld, DEFAULT_COND_MAX};
use meld_core::models::Arm3;
use meld_core::reference::PiecewiseQuintic;
use meld_core::{ControlAffineSystem, Scalar};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// `g_j` multiplied by `c`.
struct Scaled {
    inner: Arm3,
    j: usize,
    c: f64,
}

impl ControlAffineSystem for Scaled {
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
        self.inner.drift(x, out)
    }
    fn input_field<T: Scalar>(&self, j: usize, x: &[T], out: &mut [T]) {
        self.inner.input_field(j, x, out);
        if j == self.j {
            for v in out.iter_mut() {
                *v = *v * self.c;
            }
        }
    }
    fn output<T: Scalar>(&self, i: usize, x: &[T]) -> T {
        self.inner.output(i, x)
    }
}

/// Polynomial outputs on a planar drift.
struct Poly;

impl ControlAffineSystem for Poly {
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn deck_len(&self) -> usize {
        1
    }
    fn drift<T: Scalar>(&self, x: &[T], out: &mut [T]) {
        out[0] = x[1];
        out[1] = x[0] * x[0] * -1.0;
    }
    fn input_field<T: Scalar>(&self, _j: usize, _x: &[T], out: &mut [T]) {
        out[0] = T::from_f64(0.0);
        out[1] = T::from_f64(1.0);
    }
    fn output<T: Scalar>(&self, _i: usize, x: &[T]) -> T {
        x[0] * x[0] * x[1] + x[1] * 3.0 - 0.25
    }
}

fn state() -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-3.0..3.0f64, 3), prop::collection::vec(-1.0..1.0f64, 3)).prop_map(|(mut q, v)| {
        q.extend(v);
        q
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn jet_derivative_of_product(v in -2.0..2.0f64) {
        let x = Jet::<2>::variable(v, 0);
        let y = x * x * x.sin();
        let exact = 2.0 * v * v.sin() + v * v * v.cos();
        prop_assert!((y.coeff(1) - exact).abs() < 1e-12);
        let one = x.sin() * x.sin() + x.cos() * x.cos();
        prop_assert!((one.coeff(0) - 1.0).abs() < 1e-14 && one.coeff(1).abs() < 1e-14);
    }

    #[test]
    fn mixed_derivatives_are_linear_in_the_input_field(x in state(), i in 0usize..7, j in 0usize..3, k in 0usize..3) {
        let opts = LieOptions::default().pointwise();
        let base = Arm3::default();
        let a = lie::lie_g_lie_f(&base, i, j, k, &x, &opts).unwrap();
        let b = lie::lie_g_lie_f(&Scaled { inner: base, j, c: 2.0 }, i, j, k, &x, &opts).unwrap();
        prop_assert_eq!(b, 2.0 * a);
    }

    #[test]
    fn order_zero_is_the_output(a in -5.0..5.0f64, b in -5.0..5.0f64) {
        let x = [a, b];
        prop_assert_eq!(lie::lie_f(&Poly, 0, 0, &x, &LieOptions::default()).unwrap(), Poly.output(0, &x));
    }

    #[test]
    fn relative_degree_agrees_with_interaction_rows(x in state()) {
        let sys = Arm3::default();
        let opts = LieOptions::default();
        let all: Vec<usize> = (0..7).collect();
        let reps = lie::relative_degrees(&sys, &all, &x, 6, &opts).unwrap();
        for rep in reps {
            if let Some(r) = rep.r {
                let a = lie::interaction_matrix(&sys, &[rep.output], &x, &opts);
                // the row can only be read back when the degree is stable
                if let Ok(a) = a {
                    prop_assert!(a.iter().fold(0.0f64, |m, v| m.max(v.abs())) > opts.tol);
                }
                for k in 0..r - 1 {
                    for j in 0..3 {
                        prop_assert!(lie::lie_g_lie_f(&sys, rep.output, j, k, &x, &opts.pointwise()).unwrap().abs() <= opts.tol);
                    }
                }
            }
        }
    }

    #[test]
    fn selection_extracts_rows(x in state(), pick in 0usize..35) {
        let sys = Arm3::default();
        let opts = LieOptions::default().pointwise();
        let all: Vec<usize> = (0..7).collect();
        let a = DMatrix::from_row_slice(7, 3, &lie::interaction_matrix(&sys, &all, &x, &opts).unwrap());
        let sigma = meld_core::meld::square_choices(7, 3).unwrap()[pick];
        let selected = selection_matrix(&sigma).to_matrix() * &a;
        for (r, i) in sigma.indices().into_iter().enumerate() {
            for c in 0..3 {
                prop_assert_eq!(selected[(r, c)], a[(i, c)]);
            }
        }
    }

    #[test]
    fn sweep_is_a_partition_with_consistent_bookkeeping(x in state()) {
        let sys = Arm3::default();
        let opts = LieOptions::default().pointwise();
        let certs = enumerate_melds(&sys, &x, DEFAULT_COND_MAX, &opts);
        // degree-degenerate states (a gripper coordinate stationary to first order) are skipped
        prop_assume!(certs.is_ok());
        let certs = certs.unwrap();
        prop_assert_eq!(certs.len() as u64, binomial(7, 3));
        let mut bits: Vec<u32> = certs.iter().map(|c| c.sigma.bits()).collect();
        bits.sort();
        bits.dedup();
        prop_assert_eq!(bits.len(), 35);
        for c in &certs {
            let deck = lie::relative_degrees(&sys, &(0..7).collect::<Vec<_>>(), &x, 6, &opts).unwrap();
            let expect: Vec<usize> = c.sigma.indices().iter().map(|&i| deck[i].r.unwrap()).collect();
            prop_assert_eq!(&c.r_sigma, &expect);
            // full pivoting gives the same decision
            let rows = lie::interaction_matrix(&sys, &c.sigma.indices(), &x, &opts).unwrap();
            let a = DMatrix::from_row_slice(3, 3, &rows);
            let det = a.clone().full_piv_lu().determinant();
            let hadamard: f64 = a.row_iter().map(|r| r.norm()).product();
            prop_assert!((det - c.det_a).abs() <= 1e-12 * hadamard);
            prop_assert_eq!(c.is_meld(), det != 0.0 && c.cond_a < DEFAULT_COND_MAX);
        }
    }

    #[test]
    fn companion_envelope(k0 in 0.1..30.0f64, k1 in 0.1..30.0f64, xi in prop::collection::vec(-1.0..1.0f64, 2)) {
        let k = [k0, k1];
        prop_assume!(is_hurwitz(&k));
        let mc = block_constants(&k).unwrap();
        let a = companion(&k);
        let v = DVector::from_column_slice(&xi);
        let n0 = v.norm();
        for s in 0..=100 {
            let t = s as f64 * 0.1 / mc.alpha;
            let z = expm(&(&a * t)) * &v;
            prop_assert!(z.norm() <= mc.c * (-mc.alpha * t).exp() * n0 * (1.0 + 1e-9) + 1e-14);
        }
    }

    #[test]
    fn dwell_monotonicity(
        n in 0.0..1.0f64, lt in 1.0..10.0f64, c in 1.0..10.0f64, p in 1usize..5,
        eps in 0.01..1.0f64, alpha in 0.1..5.0f64,
    ) {
        let tb = |n: f64, lt: f64, c: f64, p: usize, eps: f64, alpha: f64| dwell_times(n, lt, 1.0, alpha, c, p, eps, 1.0).unwrap().tau_bar;
        let base = tb(n, lt, c, p, eps, alpha);
        let d = 1.1;
        prop_assert!(tb(n * d + 0.01, lt, c, p, eps, alpha) >= base);
        prop_assert!(tb(n, lt * d, c, p, eps, alpha) >= base);
        prop_assert!(tb(n, lt, c * d, p, eps, alpha) >= base);
        prop_assert!(tb(n, lt, c, p + 1, eps, alpha) >= base);
        prop_assert!(tb(n, lt, c, p, eps * d, alpha) <= base);
        prop_assert!(tb(n, lt, c, p, eps, alpha * d) <= base);
    }

    #[test]
    fn global_constants_are_attained(vals in prop::collection::vec((1.0..50.0f64, 0.1..5.0f64), 1..8)) {
        let ms: Vec<MeldConstants> = vals.iter().map(|&(c, alpha)| MeldConstants { c, alpha }).collect();
        let g = global_constants(&ms).unwrap();
        prop_assert!(ms.iter().any(|m| m.c == g.c) && ms.iter().any(|m| m.alpha == g.alpha));
        prop_assert!(ms.iter().all(|m| m.c <= g.c && m.alpha >= g.alpha));
    }

    #[test]
    fn coordinates_round_trip(q in prop::collection::vec(0.3..1.2f64, 3), v in prop::collection::vec(-1.0..1.0f64, 3), dq in prop::collection::vec(-0.05..0.05f64, 3)) {
        let sys = Arm3::default();
        let x: Vec<f64> = q.iter().chain(&v).copied().collect();
        let guess: Vec<f64> = q.iter().zip(&dq).map(|(a, b)| a + b).chain(v.iter().map(|_| 0.0)).collect();
        for bits in ["1110000", "0011100", "0010011", "0100011", "1000011"] {
            let m = Meld::new(Choice::parse_bits(bits).unwrap(), vec![2, 2, 2]).unwrap();
            let y = phi_map(&sys, &m, &x).unwrap();
            let back = psi_map(&sys, &m, &y, &guess, &NewtonOptions::default()).unwrap();
            for (a, b) in back.iter().zip(&x) {
                prop_assert!((a - b).abs() < 1e-9, "{bits}");
            }
        }
    }

    #[test]
    fn rk4_is_fourth_order(a in -2.0..-0.1f64, dt in 0.01..0.1f64) {
        let f = |_: f64, x: &[f64], o: &mut [f64]| { o[0] = a * x[0] + x[1]; o[1] = -x[0] + a * x[1]; Ok(()) };
        let one = rk4(f, 0.0, &[1.0, 0.5], dt).unwrap();
        let half = rk4(f, 0.0, &[1.0, 0.5], dt / 2.0).unwrap();
        let two = rk4(f, dt / 2.0, &half, dt / 2.0).unwrap();
        let scale = (1.0 + a.abs()).powi(5) * dt.powi(5);
        prop_assert!((one[0] - two[0]).abs() <= scale && (one[1] - two[1]).abs() <= scale);
    }

    #[test]
    fn quintic_joins_are_twice_differentiable(w in prop::collection::vec(-2.0..2.0f64, 3)) {
        let moves: Vec<(f64, f64, f64)> = w.iter().enumerate().map(|(k, v)| (k as f64 * 2.0, 1.5, *v)).collect();
        let p = PiecewiseQuintic::rest_to_rest(0.3, &moves).unwrap();
        for &(s, d, _) in &moves {
            for t in [s, s + d] {
                for ord in 0..3 {
                    prop_assert!((p.eval(t - 1e-9, ord) - p.eval(t + 1e-9, ord)).abs() < 1e-6);
                }
                let h = 1e-6;
                let fd = (p.eval(t + h, 0) - p.eval(t - h, 0)) / (2.0 * h);
                prop_assert!((fd - p.eval(t, 1)).abs() < 1e-8);
            }
        }
    }
}
