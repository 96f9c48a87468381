//! Shared test oracles, kept independent of the library's own
//! implementation paths: a Jacobi eigensolver on the real-block
//! embedding, an elimination solver for KKT systems, brute-force
//! products, and a finite-difference gradient harness.

#![allow(dead_code)]

use beamsep::linalg::{CMat, CVec};
use beamsep::neural::autodiff::Tensor;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Cyclic Jacobi eigendecomposition of a real symmetric matrix.
/// Returns eigenvalues (descending) with matching eigenvectors (columns).
pub fn jacobi_eigh(a_in: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a_in.len();
    let mut a: Vec<Vec<f64>> = a_in.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|j| (a[j][j], (0..n).map(|i| v[i][j]).collect()))
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    let vals = pairs.iter().map(|(l, _)| *l).collect();
    let vecs = pairs.into_iter().map(|(_, v)| v).collect();
    (vals, vecs)
}

/// Top eigenpair of a complex Hermitian matrix via the real-block
/// embedding `[[Re, -Im], [Im, Re]]` and the Jacobi oracle above.
pub fn hermitian_top_eigpair(a: &CMat) -> (f64, CVec) {
    let n = a.rows;
    let mut block = vec![vec![0.0f64; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            let z = a[(i, j)];
            block[i][j] = z.re;
            block[i][n + j] = -z.im;
            block[n + i][j] = z.im;
            block[n + i][n + j] = z.re;
        }
    }
    let (vals, vecs) = jacobi_eigh(&block);
    let top = &vecs[0];
    let mut v = CVec::zeros(n);
    for i in 0..n {
        v.data[i] = Complex64::new(top[i], top[n + i]);
    }
    let norm = v.norm();
    (vals[0], v.scale(Complex64::new(1.0 / norm, 0.0)))
}

/// Plain Gaussian elimination with partial pivoting on a dense complex
/// system; used for the Lagrangian/KKT oracle.
pub fn gauss_solve(a: &CMat, b: &CVec) -> CVec {
    let n = a.rows;
    assert_eq!(a.cols, n);
    assert_eq!(b.dim(), n);
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)]).collect())
        .collect();
    let mut rhs: Vec<Complex64> = b.data.clone();
    for col in 0..n {
        let mut pivot = col;
        let mut best = m[col][col].norm();
        for r in (col + 1)..n {
            if m[r][col].norm() > best {
                best = m[r][col].norm();
                pivot = r;
            }
        }
        assert!(best > 1e-300, "singular system in oracle");
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for r in (col + 1)..n {
            let f = m[r][col] / m[col][col];
            for j in col..n {
                let v = m[col][j] * f;
                m[r][j] -= v;
            }
            let v = rhs[col] * f;
            rhs[r] -= v;
        }
    }
    let mut x = vec![Complex64::default(); n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for j in (i + 1)..n {
            s -= m[i][j] * x[j];
        }
        x[i] = s / m[i][i];
    }
    CVec { data: x }
}

/// Schoolbook ijk triple-loop matrix product (oracle, deliberately the
/// naive loop order).
pub fn naive_matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.cols, b.rows);
    let mut out = CMat::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for j in 0..b.cols {
            let mut acc = Complex64::default();
            for k in 0..a.cols {
                acc += a[(i, k)] * b[(k, j)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Random complex matrix with entries uniform in the unit square.
pub fn random_cmat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
    let mut m = CMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    m
}

pub fn random_cvec(n: usize, rng: &mut ChaCha8Rng) -> CVec {
    CVec {
        data: (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect(),
    }
}

/// Random Hermitian PSD matrix `B B^H + ridge I`.
pub fn random_hpsd(n: usize, ridge: f64, rng: &mut ChaCha8Rng) -> CMat {
    let b = random_cmat(n, n, rng);
    let bh = beamsep::linalg::hermitian(&b);
    let mut a = naive_matmul(&b, &bh);
    for i in 0..n {
        a[(i, i)] += Complex64::new(ridge, 0.0);
    }
    a
}

/// The diagonal loading the library applies, recomputed independently.
pub fn loading_of(a: &CMat, eps_rel: f64) -> f64 {
    (eps_rel * a.trace().re / a.rows as f64).max(1e-10)
}

/// Central finite difference of a scalar-valued rebuild closure with
/// respect to one entry of a parameter tensor.
pub fn finite_difference(
    f: &mut dyn FnMut() -> f64,
    param: &Tensor,
    index: &[usize],
    h: f64,
) -> f64 {
    let original = param.data().clone();
    let mut plus = original.clone();
    plus[index] += h;
    param.set_data(plus);
    let fp = f();
    let mut minus = original.clone();
    minus[index] -= h;
    param.set_data(minus);
    let fm = f();
    param.set_data(original);
    (fp - fm) / (2.0 * h)
}

/// Relative error between an analytic and a numeric gradient entry.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}
