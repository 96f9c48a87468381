//! Dense complex matrix/vector operations: Hermitian transpose, products,
//! diagonally-loaded inversion and solves, and principal-eigenvector
//! extraction by power iteration.
//!
//! Matrices here are small (microphone count, or taps x microphones), so
//! everything is straightforward dense arithmetic over `Complex64`.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Absolute floor for the diagonal loading term.
pub const LOADING_FLOOR: f64 = 1e-10;

/// Default relative diagonal loading.
pub const DEFAULT_EPS_REL: f64 = 1e-6;

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

/// Dense complex vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CVec {
    pub data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![Complex64::default(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[Complex64]]) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        CMat {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn trace(&self) -> Complex64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Max deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        assert!(self.is_square());
        let mut d = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                d = d.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        d
    }

    pub fn scale(&self, c: Complex64) -> CMat {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl CVec {
    pub fn zeros(n: usize) -> Self {
        CVec {
            data: vec![Complex64::default(); n],
        }
    }

    pub fn unit(n: usize, k: usize) -> Self {
        let mut v = CVec::zeros(n);
        v.data[k] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Conjugated inner product `self^H other`.
    pub fn dotc(&self, other: &CVec) -> Complex64 {
        assert_eq!(self.dim(), other.dim());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&self, c: Complex64) -> CVec {
        CVec {
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn sub(&self, other: &CVec) -> CVec {
        assert_eq!(self.dim(), other.dim());
        CVec {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Conjugate transpose.
pub fn hermitian(a: &CMat) -> CMat {
    let mut out = CMat::zeros(a.cols, a.rows);
    for i in 0..a.rows {
        for j in 0..a.cols {
            out[(j, i)] = a[(i, j)].conj();
        }
    }
    out
}

/// Matrix product, kij loop order over the transposed-access pattern.
pub fn matmul(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.cols != b.rows {
        return Err(Error::ShapeMismatch {
            context: "matmul",
            expected: format!("inner dims equal, lhs {}x{}", a.rows, a.cols),
            got: format!("rhs {}x{}", b.rows, b.cols),
        });
    }
    let mut out = CMat::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a[(i, k)];
            for j in 0..b.cols {
                out[(i, j)] += aik * b[(k, j)];
            }
        }
    }
    Ok(out)
}

/// Matrix-vector product.
pub fn matvec(a: &CMat, x: &CVec) -> Result<CVec> {
    if a.cols != x.dim() {
        return Err(Error::ShapeMismatch {
            context: "matvec",
            expected: format!("vector of dim {}", a.cols),
            got: format!("dim {}", x.dim()),
        });
    }
    let mut out = CVec::zeros(a.rows);
    for i in 0..a.rows {
        let mut acc = Complex64::default();
        for j in 0..a.cols {
            acc += a[(i, j)] * x.data[j];
        }
        out.data[i] = acc;
    }
    Ok(out)
}

/// Outer product `x y^H`.
pub fn outer(x: &CVec, y: &CVec) -> CMat {
    let mut out = CMat::zeros(x.dim(), y.dim());
    for i in 0..x.dim() {
        for j in 0..y.dim() {
            out[(i, j)] = x.data[i] * y.data[j].conj();
        }
    }
    out
}

/// Diagonal loading amount for a symmetrized matrix.
fn loading(sym: &CMat, eps_rel: f64) -> f64 {
    let n = sym.rows as f64;
    (eps_rel * sym.trace().re / n).max(LOADING_FLOOR)
}

/// Symmetrize `(a + a^H)/2` and add `lambda I`.
fn symmetrize_and_load(a: &CMat, eps_rel: f64) -> Result<(CMat, f64)> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("matrix entries"));
    }
    let ah = hermitian(a);
    let mut sym = a.add(&ah).scale(Complex64::new(0.5, 0.0));
    let lambda = loading(&sym, eps_rel);
    for i in 0..sym.rows {
        sym[(i, i)] += Complex64::new(lambda, 0.0);
    }
    Ok((sym, lambda))
}

/// Cholesky factorization `A = L L^H` for Hermitian positive definite input.
/// Returns `None` when a pivot is non-positive or non-finite.
fn cholesky(a: &CMat) -> Option<CMat> {
    let n = a.rows;
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d.is_finite() && d > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = Complex64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Solve `L L^H x = b` given the Cholesky factor.
fn cholesky_solve(l: &CMat, b: &CVec) -> CVec {
    let n = l.rows;
    let mut y = b.clone();
    for i in 0..n {
        let mut s = y.data[i];
        for k in 0..i {
            s -= l[(i, k)] * y.data[k];
        }
        y.data[i] = s / l[(i, i)].re;
    }
    for i in (0..n).rev() {
        let mut s = y.data[i];
        for k in (i + 1)..n {
            s -= l[(k, i)].conj() * y.data[k];
        }
        y.data[i] = s / l[(i, i)].re;
    }
    y
}

/// Gauss-Jordan inverse with partial pivoting; fallback when Cholesky fails.
fn gauss_jordan_inverse(a: &CMat) -> Result<CMat> {
    let n = a.rows;
    let mut aug = CMat::zeros(n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = a[(i, j)];
        }
        aug[(i, n + i)] = Complex64::new(1.0, 0.0);
    }
    for col in 0..n {
        let mut pivot = col;
        let mut best = aug[(col, col)].norm();
        for r in (col + 1)..n {
            let v = aug[(r, col)].norm();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best < 1e-300 {
            return Err(Error::Other(format!(
                "singular matrix in Gauss-Jordan at column {col}"
            )));
        }
        if pivot != col {
            for j in 0..2 * n {
                let tmp = aug[(col, j)];
                aug[(col, j)] = aug[(pivot, j)];
                aug[(pivot, j)] = tmp;
            }
        }
        let p = aug[(col, col)];
        for j in 0..2 * n {
            aug[(col, j)] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = aug[(r, col)];
            if factor.norm() == 0.0 {
                continue;
            }
            for j in 0..2 * n {
                let v = aug[(col, j)] * factor;
                aug[(r, j)] -= v;
            }
        }
    }
    let mut inv = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            inv[(i, j)] = aug[(i, n + j)];
        }
    }
    Ok(inv)
}

/// Inverse of `(sym(a) + lambda I)` with `lambda = max(eps_rel*tr/n, 1e-10)`.
pub fn inv_loaded(a: &CMat, eps_rel: f64) -> Result<CMat> {
    let (loaded, _) = symmetrize_and_load(a, eps_rel)?;
    let n = loaded.rows;
    let inv = match cholesky(&loaded) {
        Some(l) => {
            let mut inv = CMat::zeros(n, n);
            for j in 0..n {
                let col = cholesky_solve(&l, &CVec::unit(n, j));
                for i in 0..n {
                    inv[(i, j)] = col.data[i];
                }
            }
            inv
        }
        None => gauss_jordan_inverse(&loaded)?,
    };
    // The exact inverse is Hermitian; symmetrize away roundoff.
    let invh = hermitian(&inv);
    Ok(inv.add(&invh).scale(Complex64::new(0.5, 0.0)))
}

/// Solve `(sym(a) + lambda I) x = b` without forming the inverse.
pub fn solve_loaded(a: &CMat, b: &CVec, eps_rel: f64) -> Result<CVec> {
    let (loaded, _) = symmetrize_and_load(a, eps_rel)?;
    if b.dim() != loaded.rows {
        return Err(Error::ShapeMismatch {
            context: "solve_loaded",
            expected: format!("rhs of dim {}", loaded.rows),
            got: format!("dim {}", b.dim()),
        });
    }
    match cholesky(&loaded) {
        Some(l) => Ok(cholesky_solve(&l, b)),
        None => {
            let inv = gauss_jordan_inverse(&loaded)?;
            matvec(&inv, b)
        }
    }
}

/// Apply the fixed phase gauge: rotate so the entry of largest modulus is
/// real-positive (ties broken by lowest index).
pub fn fix_phase(v: &CVec) -> CVec {
    let mut k = 0;
    let mut best = 0.0f64;
    for (i, z) in v.data.iter().enumerate() {
        let m = z.norm();
        if m > best {
            best = m;
            k = i;
        }
    }
    if best == 0.0 {
        return v.clone();
    }
    let phase = v.data[k] / best;
    v.scale(phase.conj())
}

/// Principal eigenvector of a Hermitian PSD matrix by power iteration.
///
/// Returns a unit-norm vector with `||A v - lambda v|| <= tol * ||A||_F`
/// where `lambda` is the Rayleigh quotient, gauged so the largest-modulus
/// entry is real-positive.
pub fn principal_eigvec(a: &CMat, tol: f64, max_iter: usize) -> Result<CVec> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("matrix entries"));
    }
    let n = a.rows;
    let fro = a.frobenius_norm();
    if fro == 0.0 {
        // Zero matrix: every unit vector is an eigenvector for eigenvalue 0.
        return Ok(CVec::unit(n, 0));
    }
    // Start from the column with largest norm (deterministic).
    let mut v = {
        let mut best_j = 0;
        let mut best = -1.0f64;
        for j in 0..n {
            let s: f64 = (0..n).map(|i| a[(i, j)].norm_sqr()).sum();
            if s > best {
                best = s;
                best_j = j;
            }
        }
        let mut v = CVec::zeros(n);
        for i in 0..n {
            v.data[i] = a[(i, best_j)];
        }
        let nv = v.norm();
        if nv == 0.0 {
            CVec::unit(n, 0)
        } else {
            v.scale(Complex64::new(1.0 / nv, 0.0))
        }
    };

    for _ in 0..max_iter {
        let w = matvec(a, &v)?;
        let lambda = v.dotc(&w); // real for Hermitian input
        let resid = w.sub(&v.scale(lambda)).norm();
        if resid <= tol * fro {
            return Ok(fix_phase(&v));
        }
        let nw = w.norm();
        if nw < 1e-300 {
            // v lies in the null space; the Rayleigh quotient is 0, which
            // satisfies the residual bound only for the zero matrix.
            return Err(Error::NonConvergence {
                max_iter,
                bin: None,
            });
        }
        v = w.scale(Complex64::new(1.0 / nw, 0.0));
    }
    Err(Error::NonConvergence {
        max_iter,
        bin: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hermitian_of_identity_is_identity() {
        let i4 = CMat::identity(4);
        assert_eq!(hermitian(&i4), i4);
    }

    #[test]
    fn hermitian_conjugates() {
        let m = CMat::from_rows(&[&[c(0.0, 1.0)]]);
        assert_eq!(hermitian(&m)[(0, 0)], c(0.0, -1.0));
    }

    #[test]
    fn hermitian_is_involution() {
        let m = CMat::from_rows(&[
            &[c(1.0, 2.0), c(-0.5, 0.25)],
            &[c(3.0, -1.0), c(0.0, 4.0)],
        ]);
        assert_eq!(hermitian(&hermitian(&m)), m);
    }

    #[test]
    fn matmul_identity() {
        let m = CMat::from_rows(&[
            &[c(1.0, 2.0), c(-0.5, 0.25)],
            &[c(3.0, -1.0), c(0.0, 4.0)],
        ]);
        let prod = matmul(&m, &CMat::identity(2)).unwrap();
        for (a, b) in prod.data.iter().zip(&m.data) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn outer_of_one_i_is_hermitian_rank1() {
        let x = CVec {
            data: vec![c(1.0, 0.0), c(0.0, 1.0)],
        };
        let m = outer(&x, &x);
        assert!((m[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((m[(0, 1)] - c(0.0, -1.0)).norm() < 1e-15);
        assert!((m[(1, 0)] - c(0.0, 1.0)).norm() < 1e-15);
        assert!((m[(1, 1)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!(m.hermitian_defect() < 1e-15);
    }

    #[test]
    fn matmul_rejects_shape_mismatch() {
        let a = CMat::zeros(2, 3);
        let b = CMat::zeros(2, 3);
        assert!(matmul(&a, &b).is_err());
    }

    #[test]
    fn inv_loaded_identity_floor_path() {
        let inv = inv_loaded(&CMat::identity(3), 0.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((inv[(i, j)] - c(expect, 0.0)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn inv_loaded_diagonal() {
        let mut d = CMat::zeros(2, 2);
        d[(0, 0)] = c(2.0, 0.0);
        d[(1, 1)] = c(4.0, 0.0);
        let inv = inv_loaded(&d, 0.0).unwrap();
        assert!((inv[(0, 0)] - c(0.5, 0.0)).norm() < 1e-9);
        assert!((inv[(1, 1)] - c(0.25, 0.0)).norm() < 1e-9);
        assert!(inv[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn inv_loaded_rejects_bad_input() {
        assert!(inv_loaded(&CMat::zeros(2, 3), 1e-6).is_err());
        let mut nan = CMat::identity(2);
        nan[(0, 1)] = c(f64::NAN, 0.0);
        assert!(inv_loaded(&nan, 1e-6).is_err());
    }

    #[test]
    fn solve_loaded_identity() {
        let b = CVec {
            data: vec![c(1.0, 0.0), c(0.0, 1.0)],
        };
        let x = solve_loaded(&CMat::identity(2), &b, 0.0).unwrap();
        assert!((x.data[0] - c(1.0, 0.0)).norm() < 1e-9);
        assert!((x.data[1] - c(0.0, 1.0)).norm() < 1e-9);
    }

    #[test]
    fn solve_loaded_diagonal() {
        let mut d = CMat::zeros(2, 2);
        d[(0, 0)] = c(2.0, 0.0);
        d[(1, 1)] = c(2.0, 0.0);
        let b = CVec {
            data: vec![c(2.0, 0.0), c(0.0, 0.0)],
        };
        let x = solve_loaded(&d, &b, 0.0).unwrap();
        assert!((x.data[0] - c(1.0, 0.0)).norm() < 1e-9);
        assert!(x.data[1].norm() < 1e-12);
    }

    #[test]
    fn principal_eigvec_dominant_axis() {
        let mut d = CMat::zeros(2, 2);
        d[(0, 0)] = c(3.0, 0.0);
        d[(1, 1)] = c(1.0, 0.0);
        let v = principal_eigvec(&d, 1e-8, 200).unwrap();
        assert!((v.data[0] - c(1.0, 0.0)).norm() < 1e-7);
        assert!(v.data[1].norm() < 1e-7);
    }

    #[test]
    fn principal_eigvec_rank_one() {
        let u = CVec {
            data: vec![c(1.0, 0.5), c(-0.5, 2.0), c(0.25, -1.0)],
        };
        let a = outer(&u, &u);
        let v = principal_eigvec(&a, 1e-10, 200).unwrap();
        let expect = fix_phase(&u.scale(c(1.0 / u.norm(), 0.0)));
        for (a, b) in v.data.iter().zip(&expect.data) {
            assert!((a - b).norm() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn principal_eigvec_of_identity_returns_unit_vector() {
        // Fully degenerate spectrum: any unit vector is acceptable.
        let v = principal_eigvec(&CMat::identity(4), 1e-8, 50).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigvec_invariant_to_positive_scaling() {
        let u = CVec {
            data: vec![c(1.0, 0.5), c(-0.5, 2.0), c(0.25, -1.0)],
        };
        let mut a = outer(&u, &u);
        for i in 0..3 {
            a[(i, i)] += c(0.3, 0.0);
        }
        let v1 = principal_eigvec(&a, 1e-10, 200).unwrap();
        let v2 = principal_eigvec(&a.scale(c(7.5, 0.0)), 1e-10, 200).unwrap();
        for (x, y) in v1.data.iter().zip(&v2.data) {
            assert!((x - y).norm() < 1e-7);
        }
    }

    #[test]
    fn fix_phase_makes_largest_entry_real_positive() {
        let v = CVec {
            data: vec![c(0.1, 0.2), c(-1.0, 1.0)],
        };
        let g = fix_phase(&v);
        assert!(g.data[1].im.abs() < 1e-15);
        assert!(g.data[1].re > 0.0);
        assert!((g.norm() - v.norm()).abs() < 1e-12);
    }
}
