//! Controlled error injection: Gaussian matrices with exactly prescribed
//! two-norms, scaled update pairs (U, V), and the perturbed inverses
//! `Ã⁻¹ = A⁻¹ + E₁` and `Z⁻¹ = (I + VᵀÃ⁻¹U)⁻¹ + E₂`.

use crate::linalg::{self, invert, two_norm, Matrix};
use crate::smw::{capacitance, ProblemInstance};
use crate::{Error, Result};

/// Target error magnitudes `eps1 = ||E₁||₂`, `eps2 = ||E₂||₂` and the trial
/// seed. E₁ and E₂ draw from distinct substreams (seed, seed^1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    pub eps1: f64,
    pub eps2: f64,
    pub seed: u64,
}

/// Raw seeded Gaussian matrix together with its two-norm; callers rescale.
pub(crate) fn raw_gaussian_norm(rows: usize, cols: usize, seed: u64) -> Result<(Matrix, f64)> {
    let raw = linalg::gaussian(rows, cols, seed);
    let norm = two_norm(&raw)?;
    Ok((raw, norm))
}

/// Rescale `raw` (with two-norm `norm`) to `target_norm`. The expression is
/// the same as in [`gaussian_with_norm`] so cached and uncached paths are
/// bit-identical.
pub(crate) fn scale_to_norm(raw: &Matrix, norm: f64, target_norm: f64) -> Matrix {
    if target_norm == 0.0 {
        Matrix::zeros(raw.nrows(), raw.ncols())
    } else {
        raw * (target_norm / norm)
    }
}

/// Seeded standard-Gaussian matrix rescaled so `two_norm(result)` equals
/// `target_norm` (within 1e-12 relative). A zero target yields the zero
/// matrix.
pub fn gaussian_with_norm(rows: usize, cols: usize, target_norm: f64, seed: u64) -> Result<Matrix> {
    if !(target_norm >= 0.0) {
        return Err(Error::param(format!(
            "target_norm must be >= 0, got {target_norm}"
        )));
    }
    let (raw, norm) = raw_gaussian_norm(rows, cols, seed)?;
    Ok(scale_to_norm(&raw, norm, target_norm))
}

/// Independent seeded Gaussian `U`, `V`, each rescaled to two-norm
/// `sqrt(lambda)` so that `||U||₂ ||V||₂ = lambda`. Substreams seed^2 and
/// seed^3.
pub fn make_update_pair(n: usize, k: usize, lambda: f64, seed: u64) -> Result<(Matrix, Matrix)> {
    if !(lambda > 0.0) {
        return Err(Error::param(format!("lambda must be > 0, got {lambda}")));
    }
    if k > n {
        return Err(Error::param(format!("k = {k} must be <= n = {n}")));
    }
    let target = lambda.sqrt();
    let u = gaussian_with_norm(n, k, target, seed ^ 2)?;
    let v = gaussian_with_norm(n, k, target, seed ^ 3)?;
    Ok((u, v))
}

/// Core of [`perturb_instance`] with precomputed `A⁻¹` and raw error
/// directions, so sweeps can share them across grid points. The scaling
/// matches `gaussian_with_norm` bit-for-bit.
pub(crate) fn perturb_from_parts(
    a: &Matrix,
    a_inv_exact: &Matrix,
    u: &Matrix,
    v: &Matrix,
    e1_raw: &Matrix,
    e1_norm: f64,
    e2_raw: &Matrix,
    e2_norm: f64,
    eps1: f64,
    eps2: f64,
) -> Result<ProblemInstance> {
    let e1 = scale_to_norm(e1_raw, e1_norm, eps1);
    let a_inv_approx = a_inv_exact + e1;

    let cap_tilde = capacitance(&a_inv_approx, u, v)?;
    let cap_tilde_inv = invert(&cap_tilde).map_err(|e| match e {
        Error::Singular { sigma_min } => Error::SingularCapacitance { sigma_min },
        other => other,
    })?;
    let e2 = scale_to_norm(e2_raw, e2_norm, eps2);
    let z_inv = cap_tilde_inv + e2;

    let lambda = two_norm(u)? * two_norm(v)?;
    Ok(ProblemInstance {
        a: a.clone(),
        u: u.clone(),
        v: v.clone(),
        a_inv_exact: a_inv_exact.clone(),
        a_inv_approx,
        z_inv,
        lambda,
    })
}

/// Build a [`ProblemInstance`] realizing the error model with equality:
/// `||Ã⁻¹ − A⁻¹||₂ = eps1` and `||Z⁻¹ − (I + VᵀÃ⁻¹U)⁻¹||₂ = eps2` exactly
/// (within scaling roundoff). Note that E₂ perturbs the inverse of the
/// *already perturbed* capacitance `I + VᵀÃ⁻¹U`, not the clean one.
pub fn perturb_instance(
    a: &Matrix,
    u: &Matrix,
    v: &Matrix,
    spec: &PerturbationSpec,
) -> Result<ProblemInstance> {
    if !(spec.eps1 >= 0.0 && spec.eps1.is_finite() && spec.eps2 >= 0.0 && spec.eps2.is_finite()) {
        return Err(Error::param(format!(
            "eps1/eps2 must be finite and >= 0, got {} / {}",
            spec.eps1, spec.eps2
        )));
    }
    let a_inv_exact = invert(a)?;
    let n = a.nrows();
    let k = u.ncols();
    let (e1_raw, e1_norm) = raw_gaussian_norm(n, n, spec.seed)?;
    let (e2_raw, e2_norm) = raw_gaussian_norm(k, k, spec.seed ^ 1)?;
    perturb_from_parts(
        a,
        &a_inv_exact,
        u,
        v,
        &e1_raw,
        e1_norm,
        &e2_raw,
        e2_norm,
        spec.eps1,
        spec.eps2,
    )
}
