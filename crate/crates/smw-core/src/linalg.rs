//! Dense real linear algebra primitives: SVD, spectral norm, condition
//! number, Moore-Penrose pseudoinverse, QR orthonormalization, inversion,
//! and seeded Gaussian sampling.
//!
//! Every two-norm in this crate goes through [`svd`] so that bound
//! comparisons are deterministic across runs.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Dense real double-precision matrix, the universal carrier.
pub type Matrix = DMatrix<f64>;

const SVD_MAX_ITER: usize = 10_000;

/// Singular value decomposition triple `m = left · diag(singulars) · rightᵀ`.
///
/// `left` is rows x r and `right` is cols x r with orthonormal columns,
/// r = min(rows, cols); `singulars` is sorted descending.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub left: Matrix,
    pub singulars: Vec<f64>,
    pub right: Matrix,
}

impl SvdFactors {
    /// Largest singular value (0 for an empty spectrum, which cannot occur
    /// for valid matrices).
    pub fn sigma_max(&self) -> f64 {
        self.singulars.first().copied().unwrap_or(0.0)
    }

    /// Smallest singular value.
    pub fn sigma_min(&self) -> f64 {
        self.singulars.last().copied().unwrap_or(0.0)
    }

    /// Rank decision tolerance: `sigma_max * max(rows, cols) * eps`.
    pub fn rank_tolerance(&self) -> f64 {
        let dim = self.left.nrows().max(self.right.nrows()) as f64;
        self.sigma_max() * dim * f64::EPSILON
    }

    /// `left · diag(singulars) · rightᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let r = self.singulars.len();
        let mut scaled = self.left.clone();
        for j in 0..r {
            scaled.column_mut(j).scale_mut(self.singulars[j]);
        }
        &scaled * self.right.transpose()
    }
}

fn ensure_finite(m: &Matrix) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Full SVD with singular values sorted descending.
pub fn svd(m: &Matrix) -> Result<SvdFactors> {
    ensure_finite(m)?;
    let decomp = m
        .clone()
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or(Error::SvdNonConvergence {
            rows: m.nrows(),
            cols: m.ncols(),
        })?;
    let u = decomp.u.expect("u requested");
    let v_t = decomp.v_t.expect("v_t requested");
    let r = decomp.singular_values.len();

    // nalgebra does not guarantee ordering; sort columns by singular value.
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| {
        decomp.singular_values[j]
            .partial_cmp(&decomp.singular_values[i])
            .unwrap()
    });

    let mut left = Matrix::zeros(m.nrows(), r);
    let mut right = Matrix::zeros(m.ncols(), r);
    let mut singulars = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        left.column_mut(dst).copy_from(&u.column(src));
        right.column_mut(dst).copy_from(&v_t.row(src).transpose());
        singulars.push(decomp.singular_values[src]);
    }
    Ok(SvdFactors {
        left,
        singulars,
        right,
    })
}

/// Spectral norm `sigma_max(m)`.
pub fn two_norm(m: &Matrix) -> Result<f64> {
    Ok(svd(m)?.sigma_max())
}

/// Smallest singular value of `m`.
pub fn sigma_min(m: &Matrix) -> Result<f64> {
    Ok(svd(m)?.sigma_min())
}

/// Moore-Penrose pseudoinverse with the standard rank tolerance
/// `sigma_max * max(rows, cols) * eps`.
pub fn pseudo_inverse(m: &Matrix) -> Result<Matrix> {
    let f = svd(m)?;
    let tol = f.rank_tolerance();
    let mut scaled = f.right.clone();
    for j in 0..f.singulars.len() {
        let s = f.singulars[j];
        let inv = if s > tol { 1.0 / s } else { 0.0 };
        scaled.column_mut(j).scale_mut(inv);
    }
    Ok(&scaled * f.left.transpose())
}

/// Condition number `kappa(m) = sigma_max / sigma_min_nonzero` where
/// `sigma_min_nonzero` is the smallest singular value above the rank
/// tolerance. Errors for an all-zero matrix.
pub fn condition_number(m: &Matrix) -> Result<f64> {
    let f = svd(m)?;
    let tol = f.rank_tolerance();
    let smallest_nonzero = f
        .singulars
        .iter()
        .copied()
        .filter(|&s| s > tol)
        .last()
        .ok_or(Error::ZeroMatrix)?;
    Ok(f.sigma_max() / smallest_nonzero)
}

/// Seeded standard-Gaussian matrix via ChaCha8, portable across platforms.
pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// n x n matrix with orthonormal columns obtained from the QR decomposition
/// of a seeded Gaussian matrix. Deterministic per seed.
pub fn orthonormal_from_gaussian(n: usize, seed: u64) -> Matrix {
    let qr = gaussian(n, n, seed).qr();
    qr.q()
}

/// Inverse of a square, numerically nonsingular matrix (LU with partial
/// pivoting). The singularity decision uses the SVD rank tolerance so the
/// error can carry `sigma_min`.
pub fn invert(m: &Matrix) -> Result<Matrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::dim(format!(
            "invert requires a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    ensure_finite(m)?;
    let f = svd(m)?;
    let smin = f.sigma_min();
    if smin <= f.rank_tolerance() {
        return Err(Error::Singular { sigma_min: smin });
    }
    m.clone()
        .try_inverse()
        .ok_or(Error::Singular { sigma_min: smin })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    // ── independent eigenvalue oracle: characteristic polynomial of the
    //    symmetric matrix MᵀM via Faddeev-LeVerrier, roots by bisection ──

    fn char_poly_coeffs(m: &Matrix) -> Vec<f64> {
        // returns c so that det(xI - M) = x^n + c[0] x^{n-1} + ... + c[n-1]
        let n = m.nrows();
        let mut coeffs = Vec::with_capacity(n);
        let mut aux = Matrix::identity(n, n);
        for k in 1..=n {
            aux = m * aux;
            let c = -aux.trace() / k as f64;
            coeffs.push(c);
            for i in 0..n {
                aux[(i, i)] += c;
            }
        }
        coeffs
    }

    fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
        let mut acc = 1.0;
        for &c in coeffs {
            acc = acc * x + c;
        }
        acc
    }

    fn bisect_root(coeffs: &[f64], mut lo: f64, mut hi: f64) -> f64 {
        let flo = poly_eval(coeffs, lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fmid = poly_eval(coeffs, mid);
            if (fmid > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvalues of symmetric positive semidefinite `s`, descending, found
    /// by sign changes of the characteristic polynomial on a fine grid.
    fn symmetric_eigenvalues_oracle(s: &Matrix) -> Vec<f64> {
        let n = s.nrows();
        let coeffs = char_poly_coeffs(s);
        let upper = s.trace() + 1.0; // eigenvalues of PSD s are within [0, trace]
        let steps = 2_000_000;
        let mut roots = Vec::new();
        let mut prev_x = -1e-9;
        let mut prev_f = poly_eval(&coeffs, prev_x);
        for i in 1..=steps {
            let x = -1e-9 + (upper + 1e-9) * i as f64 / steps as f64;
            let f = poly_eval(&coeffs, x);
            if (f > 0.0) != (prev_f > 0.0) {
                roots.push(bisect_root(&coeffs, prev_x, x));
            }
            prev_x = x;
            prev_f = f;
        }
        assert_eq!(roots.len(), n, "oracle expected {} distinct roots", n);
        roots.sort_by(|a, b| b.partial_cmp(a).unwrap());
        roots
    }

    #[test]
    fn svd_identity_and_diagonal() {
        let f = svd(&Matrix::identity(3, 3)).unwrap();
        for s in &f.singulars {
            assert!((s - 1.0).abs() < 1e-14);
        }
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0]));
        let f = svd(&d).unwrap();
        assert!((f.singulars[0] - 3.0).abs() < 1e-14);
        assert!((f.singulars[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn svd_matches_char_poly_eigen_oracle_4x4() {
        let m = gaussian(4, 4, 42);
        let singulars = svd(&m).unwrap().singulars;
        let gram = m.transpose() * &m;
        let eigs = symmetric_eigenvalues_oracle(&gram);
        for (s, e) in singulars.iter().zip(&eigs) {
            assert!(
                rel_err(*s, e.sqrt()) < 1e-9,
                "sigma {} vs oracle {}",
                s,
                e.sqrt()
            );
        }
    }

    #[test]
    fn sigma_min_matches_eigen_oracle_5x5() {
        let m = gaussian(5, 5, 7);
        let smin = sigma_min(&m).unwrap();
        let gram = m.transpose() * &m;
        let eigs = symmetric_eigenvalues_oracle(&gram);
        assert!(rel_err(smin, eigs.last().unwrap().sqrt()) < 1e-9);
    }

    #[test]
    fn sigma_min_trivial_cases() {
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![5.0, 2.0]));
        assert!((sigma_min(&d).unwrap() - 2.0).abs() < 1e-14);
        assert!((sigma_min(&Matrix::identity(4, 4)).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_norm_trivial_and_rank_one() {
        assert_eq!(two_norm(&Matrix::zeros(2, 2)).unwrap(), 0.0);
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![5.0, 2.0]));
        assert!((two_norm(&d).unwrap() - 5.0).abs() < 1e-14);

        // rank-1 outer product: ||x yᵀ||₂ = ||x||₂ ||y||₂, closed form
        let x = nalgebra::DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let y = nalgebra::DVector::from_vec(vec![0.5, 4.0]);
        let outer = &x * y.transpose();
        let expected = x.norm() * y.norm();
        assert!(rel_err(two_norm(&outer).unwrap(), expected) < 1e-13);
    }

    #[test]
    fn pseudo_inverse_trivial_and_singular_diagonal() {
        let pinv = pseudo_inverse(&Matrix::identity(3, 3)).unwrap();
        assert!((pinv - Matrix::identity(3, 3)).norm() < 1e-13);

        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.0]));
        let pinv = pseudo_inverse(&d).unwrap();
        assert!((pinv[(0, 0)] - 0.5).abs() < 1e-14);
        assert_eq!(pinv[(1, 1)], 0.0);
    }

    #[test]
    fn pseudo_inverse_tall_matches_normal_equations_oracle() {
        // (mᵀm)⁻¹mᵀ with the 2x2 inverse written in closed form
        let m = gaussian(6, 2, 11);
        let g = m.transpose() * &m;
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        let mut g_inv = Matrix::zeros(2, 2);
        g_inv[(0, 0)] = g[(1, 1)] / det;
        g_inv[(1, 1)] = g[(0, 0)] / det;
        g_inv[(0, 1)] = -g[(0, 1)] / det;
        g_inv[(1, 0)] = -g[(1, 0)] / det;
        let oracle = g_inv * m.transpose();
        let pinv = pseudo_inverse(&m).unwrap();
        assert!((&pinv - &oracle).norm() / oracle.norm() < 1e-10);
        // full column rank: pinv * m = I
        let residual = &pinv * &m - Matrix::identity(2, 2);
        assert!(residual.norm() < 1e-10);
    }

    #[test]
    fn pseudo_inverse_satisfies_penrose_conditions() {
        let m = gaussian(5, 3, 23);
        let p = pseudo_inverse(&m).unwrap();
        let scale = m.norm().max(p.norm());
        assert!((&m * &p * &m - &m).norm() / scale < 1e-10);
        assert!((&p * &m * &p - &p).norm() / scale < 1e-10);
        let mp = &m * &p;
        assert!((&mp - mp.transpose()).norm() / scale < 1e-10);
        let pm = &p * &m;
        assert!((&pm - pm.transpose()).norm() / scale < 1e-10);
    }

    #[test]
    fn condition_number_cases() {
        assert!((condition_number(&Matrix::identity(3, 3)).unwrap() - 1.0).abs() < 1e-13);
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![10.0, 1.0]));
        assert!((condition_number(&d).unwrap() - 10.0).abs() < 1e-13);
        assert!(matches!(
            condition_number(&Matrix::zeros(2, 2)),
            Err(Error::ZeroMatrix)
        ));
        // seeded 3x3 against the svd factor ratio
        let m = gaussian(3, 3, 5);
        let f = svd(&m).unwrap();
        let expected = f.sigma_max() / f.sigma_min();
        assert!(rel_err(condition_number(&m).unwrap(), expected) < 1e-12);
    }

    #[test]
    fn orthonormal_from_gaussian_properties() {
        let q1 = orthonormal_from_gaussian(1, 3);
        assert!((q1[(0, 0)].abs() - 1.0).abs() < 1e-14);

        let q = orthonormal_from_gaussian(8, 99);
        let residual = q.transpose() * &q - Matrix::identity(8, 8);
        assert!(two_norm(&residual).unwrap() <= 1e-12);

        let q2 = orthonormal_from_gaussian(8, 99);
        assert_eq!(q, q2, "determinism: same seed must give identical output");
    }

    #[test]
    fn invert_trivial_cases() {
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 4.0]));
        let inv = invert(&d).unwrap();
        assert!((inv[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((inv[(1, 1)] - 0.25).abs() < 1e-15);
        let inv = invert(&Matrix::identity(4, 4)).unwrap();
        assert!((inv - Matrix::identity(4, 4)).norm() < 1e-14);
    }

    #[test]
    fn invert_matches_adjugate_oracle_3x3() {
        let m = gaussian(3, 3, 17);
        let det = m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
            - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
            + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)]);
        let cof = |r: usize, c: usize| -> f64 {
            let rows: Vec<usize> = (0..3).filter(|&i| i != r).collect();
            let cols: Vec<usize> = (0..3).filter(|&j| j != c).collect();
            let minor = m[(rows[0], cols[0])] * m[(rows[1], cols[1])]
                - m[(rows[0], cols[1])] * m[(rows[1], cols[0])];
            if (r + c) % 2 == 0 {
                minor
            } else {
                -minor
            }
        };
        let oracle = Matrix::from_fn(3, 3, |i, j| cof(j, i) / det);
        let inv = invert(&m).unwrap();
        assert!((&inv - &oracle).norm() / oracle.norm() < 1e-12);
    }

    #[test]
    fn invert_rejects_singular() {
        let mut m = Matrix::zeros(2, 2);
        m[(0, 0)] = 1.0;
        match invert(&m) {
            Err(Error::Singular { sigma_min }) => assert!(sigma_min <= 1e-15),
            other => panic!("expected singularity error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn invert_residual_scales_with_condition() {
        for seed in 0..20u64 {
            let m = gaussian(6, 6, seed);
            let inv = invert(&m).unwrap();
            let residual = &m * &inv - Matrix::identity(6, 6);
            let kappa = condition_number(&m).unwrap();
            assert!(two_norm(&residual).unwrap() <= 1e-10 * kappa);
        }
    }

    #[test]
    fn inverse_norm_equals_reciprocal_sigma_min() {
        for seed in 0..20u64 {
            let m = gaussian(7, 7, 100 + seed);
            let inv = invert(&m).unwrap();
            let lhs = two_norm(&inv).unwrap();
            let rhs = 1.0 / sigma_min(&m).unwrap();
            assert!(rel_err(lhs, rhs) < 1e-9);
            // pseudo_inverse agrees with invert for square nonsingular inputs
            let pinv = pseudo_inverse(&m).unwrap();
            assert!((&pinv - &inv).norm() / inv.norm() < 1e-9);
        }
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut m = Matrix::zeros(2, 2);
        m[(0, 0)] = f64::NAN;
        assert!(matches!(svd(&m), Err(Error::NonFinite)));
    }

    #[test]
    fn gaussian_is_deterministic() {
        assert_eq!(gaussian(5, 3, 77), gaussian(5, 3, 77));
        assert_ne!(gaussian(5, 3, 77), gaussian(5, 3, 78));
    }
}
