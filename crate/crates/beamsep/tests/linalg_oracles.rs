//! Independent-oracle checks for the complex linear algebra: schoolbook
//! products, loaded-inverse residuals, a Jacobi eigensolver comparison,
//! and solve/inverse agreement.

mod common;

use beamsep::linalg::{
    hermitian, inv_loaded, matmul, matvec, principal_eigvec, solve_loaded, CMat, CVec,
};
use common::*;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn matmul_matches_schoolbook_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let a = random_cmat(4, 4, &mut rng);
        let b = random_cmat(4, 4, &mut rng);
        let fast = matmul(&a, &b).unwrap();
        let slow = naive_matmul(&a, &b);
        let max_err = fast
            .data
            .iter()
            .zip(&slow.data)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0f64, f64::max);
        assert!(max_err < 1e-12, "matmul oracle mismatch {max_err}");
    }
}

#[test]
fn loaded_inverse_residual_on_random_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for trial in 0..50 {
        let n = 2 + (trial % 5);
        let a = random_hpsd(n, 0.1, &mut rng);
        let inv = inv_loaded(&a, 1e-6).unwrap();
        // Residual against the loaded matrix the inverse actually inverts.
        let lam = loading_of(&a, 1e-6);
        let mut loaded = a.clone();
        for i in 0..n {
            loaded[(i, i)] += Complex64::new(lam, 0.0);
        }
        let prod = matmul(&loaded, &inv).unwrap();
        let mut max_dev = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::default()
                };
                max_dev = max_dev.max((prod[(i, j)] - expect).norm());
            }
        }
        assert!(max_dev < 1e-6, "trial {trial}: residual {max_dev}");
        assert!(inv.hermitian_defect() < 1e-8);
    }
}

#[test]
fn loaded_inverse_is_psd_on_random_probes() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let a = random_hpsd(6, 0.1, &mut rng);
    let inv = inv_loaded(&a, 1e-6).unwrap();
    for _ in 0..200 {
        let x = random_cvec(6, &mut rng);
        let q = x.dotc(&matvec(&inv, &x).unwrap());
        assert!(q.re >= -1e-8, "negative Rayleigh quotient {q}");
        assert!(q.im.abs() < 1e-8);
    }
}

#[test]
fn principal_eigvec_matches_jacobi_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for trial in 0..25 {
        let a = random_hpsd(6, 0.05, &mut rng);
        let v = principal_eigvec(&a, 1e-10, 500).unwrap();
        let (lam_top, v_oracle) = hermitian_top_eigpair(&a);
        // Phase-align the oracle vector to ours before comparing.
        let ip = v_oracle.dotc(&v);
        let phase = if ip.norm() > 0.0 {
            ip / ip.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let aligned = v_oracle.scale(phase);
        let max_err = v
            .data
            .iter()
            .zip(&aligned.data)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0f64, f64::max);
        assert!(max_err < 1e-6, "trial {trial}: eigvec error {max_err}");
        // Rayleigh quotient agrees with the oracle's top eigenvalue.
        let lam = v.dotc(&matvec(&a, &v).unwrap()).re;
        assert!((lam - lam_top).abs() < 1e-6 * lam_top.abs().max(1.0));
    }
}

#[test]
fn solve_agrees_with_explicit_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..20 {
        let a = random_hpsd(4, 0.1, &mut rng);
        let b = random_cvec(4, &mut rng);
        let x1 = solve_loaded(&a, &b, 1e-6).unwrap();
        let x2 = matvec(&inv_loaded(&a, 1e-6).unwrap(), &b).unwrap();
        for (p, q) in x1.data.iter().zip(&x2.data) {
            assert!((p - q).norm() < 1e-8, "{p} vs {q}");
        }
    }
}

#[test]
fn gauss_fallback_handles_indefinite_hermitian() {
    // Hermitian but indefinite: Cholesky fails, the fallback must not.
    let mut a = CMat::zeros(2, 2);
    a[(0, 0)] = Complex64::new(-1.0, 0.0);
    a[(1, 1)] = Complex64::new(2.0, 0.0);
    a[(0, 1)] = Complex64::new(0.5, 0.25);
    a[(1, 0)] = Complex64::new(0.5, -0.25);
    let b = CVec {
        data: vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)],
    };
    let x = solve_loaded(&a, &b, 1e-6).unwrap();
    // Check the residual against the loaded system.
    let lam = loading_of(&a, 1e-6);
    let mut loaded = a.clone();
    for i in 0..2 {
        loaded[(i, i)] += Complex64::new(lam, 0.0);
    }
    let r = matvec(&loaded, &x).unwrap().sub(&b);
    assert!(r.norm() < 1e-9, "fallback residual {}", r.norm());
}

#[test]
fn hermitian_ops_compose() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let a = random_cmat(5, 3, &mut rng);
    let h = hermitian(&a);
    assert_eq!(h.rows, 3);
    assert_eq!(h.cols, 5);
    let hh = hermitian(&h);
    for (x, y) in hh.data.iter().zip(&a.data) {
        assert_eq!(x, y);
    }
}
