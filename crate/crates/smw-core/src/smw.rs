//! The SMW identity: exact and approximate variants, the capacitance
//! matrix, identity-residual checks, and the direct-inversion baseline.

use crate::linalg::{invert, pseudo_inverse, two_norm, Matrix};
use crate::perturb;
use crate::{Error, Result};

/// One trial of the approximate-inversion setting: the tuple
/// `(A, U, V, Ã⁻¹, Z⁻¹)` plus cached derived quantities.
///
/// `a_inv_approx` plays the role of the approximate inverse of `A`, and
/// `z_inv` the approximate inverse of the perturbed capacitance matrix
/// `I + Vᵀ·Ã⁻¹·U`. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub a: Matrix,
    pub u: Matrix,
    pub v: Matrix,
    pub a_inv_exact: Matrix,
    pub a_inv_approx: Matrix,
    pub z_inv: Matrix,
    /// Update magnitude `lambda = ||U||₂ ||V||₂`.
    pub lambda: f64,
}

fn check_update_dims(a_inv: &Matrix, u: &Matrix, v: &Matrix) -> Result<()> {
    let n = a_inv.nrows();
    if a_inv.ncols() != n || u.nrows() != n || v.nrows() != n || u.ncols() != v.ncols() {
        return Err(Error::dim(format!(
            "capacitance expects a_inv {n}x{n}, u and v {n}xk; got a_inv {}x{}, u {}x{}, v {}x{}",
            a_inv.nrows(),
            a_inv.ncols(),
            u.nrows(),
            u.ncols(),
            v.nrows(),
            v.ncols()
        )));
    }
    Ok(())
}

/// Capacitance matrix `I + Vᵀ·A⁻¹·U` (k x k).
pub fn capacitance(a_inv: &Matrix, u: &Matrix, v: &Matrix) -> Result<Matrix> {
    check_update_dims(a_inv, u, v)?;
    let k = u.ncols();
    Ok(Matrix::identity(k, k) + v.transpose() * a_inv * u)
}

/// Exact SMW update: `A⁻¹ − A⁻¹·U·C⁻¹·Vᵀ·A⁻¹` with `C` the capacitance.
pub fn smw_inverse_exact(a_inv: &Matrix, u: &Matrix, v: &Matrix) -> Result<Matrix> {
    let c = capacitance(a_inv, u, v)?;
    let c_inv = invert(&c).map_err(|e| match e {
        Error::Singular { sigma_min } => Error::SingularCapacitance { sigma_min },
        other => other,
    })?;
    let w = a_inv * u;
    let y = v.transpose() * a_inv;
    Ok(a_inv - w * c_inv * y)
}

/// Approximate SMW update `Ã⁻¹ − Ã⁻¹·U·Z⁻¹·Vᵀ·Ã⁻¹`, evaluated exactly as
/// written: `W = Ã⁻¹U`, `Y = VᵀÃ⁻¹`, result `Ã⁻¹ − W·Z⁻¹·Y`. The fixed
/// evaluation order keeps floating-point results comparable across runs.
/// `Z⁻¹` is taken as given; its quality is the experiment's subject.
pub fn smw_inverse_approx(inst: &ProblemInstance) -> Matrix {
    let w = &inst.a_inv_approx * &inst.u;
    let y = inst.v.transpose() * &inst.a_inv_approx;
    &inst.a_inv_approx - w * &inst.z_inv * y
}

/// Residuals of the two capacitance identities
/// `I + VᵀA⁻¹U = VᵀA⁻¹B(Vᵀ)†` and `(I + VᵀA⁻¹U)⁻¹ = VᵀB⁻¹A(Vᵀ)†`
/// where `B = A + UVᵀ`. Returns the two-norms of both differences.
pub fn lemma2_identity_residuals(a: &Matrix, u: &Matrix, v: &Matrix) -> Result<(f64, f64)> {
    let a_inv = invert(a)?;
    check_update_dims(&a_inv, u, v)?;
    let b = a + u * v.transpose();
    let b_inv = invert(&b)?;
    let vt_pinv = pseudo_inverse(&v.transpose())?;
    let c = capacitance(&a_inv, u, v)?;
    let c_inv = invert(&c).map_err(|e| match e {
        Error::Singular { sigma_min } => Error::SingularCapacitance { sigma_min },
        other => other,
    })?;

    let r1 = two_norm(&(&c - v.transpose() * &a_inv * &b * &vt_pinv))?;
    let r2 = two_norm(&(&c_inv - v.transpose() * &b_inv * a * &vt_pinv))?;
    Ok((r1, r2))
}

/// Direct-inversion baseline: `B⁻¹ + E₃` with `E₃` a seeded Gaussian matrix
/// scaled so `||E₃||₂ = eps3` exactly.
pub fn direct_inverse_perturbed(b: &Matrix, eps3: f64, seed: u64) -> Result<Matrix> {
    let b_inv = invert(b)?;
    let e3 = perturb::gaussian_with_norm(b.nrows(), b.ncols(), eps3, seed)?;
    Ok(b_inv + e3)
}
