//! Synthetic problem builders with prescribed spectra: a forward family
//! that pins the capacitance's smallest singular value at `1/alpha`, and a
//! backward family whose capacitance is exactly `I + S` for a chosen `S`.

use crate::linalg::{orthonormal_from_gaussian, two_norm, Matrix};
use crate::perturb::gaussian_with_norm;
use crate::smw::capacitance;
use crate::{Error, Result};

/// Geometric grid of `count` values from `10^start_exp` to `10^end_exp`
/// inclusive.
pub fn logspace(start_exp: f64, end_exp: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2, "logspace needs at least two points");
    let step = (end_exp - start_exp) / (count - 1) as f64;
    (0..count)
        .map(|i| 10f64.powf(start_exp + step * i as f64))
        .collect()
}

/// A constructed `(A, U, V)` triple together with the exact inverse of `A`
/// (assembled from the construction's factors, not by numerical inversion).
#[derive(Debug, Clone)]
pub struct ConstructedProblem {
    pub a: Matrix,
    pub u: Matrix,
    pub v: Matrix,
    pub a_inv_exact: Matrix,
}

/// Parameters for the forward construction: `alpha > 1` is the target
/// `||(I + VᵀA⁻¹U)⁻¹||₂`, `lambda` sets the leading diagonal entry of the
/// update scaling.
#[derive(Debug, Clone, Copy)]
pub struct ForwardConstructionParams {
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub seed: u64,
}

/// Build the forward family: `A = U_A Σ V_Aᵀ` with `Σ` log-spaced over
/// `[10⁻², 10²]` and random orthonormal factors; `U = U_A Q`,
/// `V = V_A Q S` with `Q` selecting the last `k` columns and `S` diagonal:
///
/// - `S₀ = lambda`,
/// - `Sⱼ = |1/alpha − 1| σ_{n−k+1+j}(A)` for the middle entries,
/// - `S_{k−1} = (1/alpha − 1) σ_min(A)`.
///
/// With these choices `I + VᵀA⁻¹U = I + S Σ_last⁻¹` is diagonal with last
/// entry `1/alpha`, so the capacitance hits `sigma_min = 1/alpha` exactly;
/// the builder verifies this to 1e-8 before returning. Requires `k >= 2`
/// (the leading and trailing entries play different roles).
pub fn build_forward_instance(p: &ForwardConstructionParams) -> Result<ConstructedProblem> {
    let ForwardConstructionParams {
        n,
        k,
        alpha,
        lambda,
        seed,
    } = *p;
    if k < 2 || k > n {
        return Err(Error::param(format!(
            "forward construction needs 2 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::param(format!("alpha must be >= 1, got {alpha}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(format!("lambda must be > 0, got {lambda}")));
    }

    let sigmas = logspace(2.0, -2.0, n);
    let u_a = orthonormal_from_gaussian(n, seed);
    let v_a = orthonormal_from_gaussian(n, seed ^ 1);
    let sigma_diag = Matrix::from_diagonal(&nalgebra::DVector::from_vec(sigmas.clone()));
    let a = &u_a * &sigma_diag * v_a.transpose();
    let sigma_inv_diag = Matrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        sigmas.iter().map(|s| 1.0 / s),
    ));
    let a_inv_exact = &v_a * &sigma_inv_diag * u_a.transpose();

    // last-k column selector
    let mut q = Matrix::zeros(n, k);
    for j in 0..k {
        q[(n - k + j, j)] = 1.0;
    }

    let ratio = 1.0 / alpha - 1.0;
    let mut s_entries = vec![0.0; k];
    s_entries[0] = lambda;
    for j in 1..k - 1 {
        s_entries[j] = ratio.abs() * sigmas[n - k + j];
    }
    s_entries[k - 1] = ratio * sigmas[n - 1];
    let s = Matrix::from_diagonal(&nalgebra::DVector::from_vec(s_entries));

    let u = &u_a * &q;
    let v = &v_a * &q * &s;

    // post-condition: the capacitance must realize sigma_min = 1/alpha
    let cap = capacitance(&a_inv_exact, &u, &v)?;
    let f = crate::linalg::svd(&cap)?;
    let target = 1.0 / alpha;
    if (f.sigma_min() - target).abs() > 1e-8 * target.max(1.0) {
        return Err(Error::ConstructionFailed {
            context: format!(
                "capacitance sigma_min = {:.6e}, wanted {:.6e}",
                f.sigma_min(),
                target
            ),
        });
    }
    Ok(ConstructedProblem {
        a,
        u,
        v,
        a_inv_exact,
    })
}

/// Spectrum of the diagonal `A` in the backward construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackwardSpectrum {
    /// `||A||₂ = 10⁻²`: the first `floor(0.6 n)` entries log-spaced over
    /// `[10⁻², 10⁻⁸]`, the rest pinned at `10⁻⁸`.
    SmallNorm,
    /// `||A||₂ = 10²`: entries log-spaced over `[10², 10⁻²]`.
    LargeNorm,
}

/// Parameters for the backward construction. `block_offset` places the
/// identity block of the selector `Q` (rows `block_offset .. block_offset+k`).
#[derive(Debug, Clone, Copy)]
pub struct BackwardConstructionParams {
    pub n: usize,
    pub k: usize,
    pub lambda: f64,
    pub block_offset: usize,
    pub spectrum: BackwardSpectrum,
    pub seed: u64,
}

/// Build the backward family: diagonal `A`, `U = AQ`, `V = QSᵀ` with a
/// Gaussian `S` rescaled so `||S||₂ = lambda / ||U||₂`. Because
/// `VᵀA⁻¹U = S QᵀQ = S`, the capacitance is exactly `I + S`; the builder
/// verifies `||C − (I+S)|| <= 1e-12` before returning.
pub fn build_backward_instance(p: &BackwardConstructionParams) -> Result<ConstructedProblem> {
    let BackwardConstructionParams {
        n,
        k,
        lambda,
        block_offset,
        spectrum,
        seed,
    } = *p;
    if k == 0 || k > n {
        return Err(Error::param(format!(
            "backward construction needs 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    if block_offset + k > n {
        return Err(Error::param(format!(
            "block_offset = {block_offset} with k = {k} exceeds n = {n}"
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(format!("lambda must be > 0, got {lambda}")));
    }

    let diag = match spectrum {
        BackwardSpectrum::SmallNorm => {
            let head = (6 * n) / 10;
            let mut d = logspace(-2.0, -8.0, head.max(2));
            d.truncate(head);
            d.resize(n, 1e-8);
            d
        }
        BackwardSpectrum::LargeNorm => logspace(2.0, -2.0, n),
    };
    let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(diag.clone()));
    let a_inv_exact = Matrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        diag.iter().map(|d| 1.0 / d),
    ));

    let mut q = Matrix::zeros(n, k);
    for j in 0..k {
        q[(block_offset + j, j)] = 1.0;
    }
    let u = &a * &q;
    let norm_u = two_norm(&u)?;
    let s = gaussian_with_norm(k, k, lambda / norm_u, seed)?;
    let v = &q * s.transpose();

    // post-condition: the capacitance is exactly I + S
    let cap = capacitance(&a_inv_exact, &u, &v)?;
    let expected = Matrix::identity(k, k) + &s;
    let dev = two_norm(&(&cap - &expected))?;
    if dev > 1e-12 * (1.0 + two_norm(&expected)?) {
        return Err(Error::ConstructionFailed {
            context: format!("capacitance deviates from I + S by {dev:.3e}"),
        });
    }
    Ok(ConstructedProblem {
        a,
        u,
        v,
        a_inv_exact,
    })
}

/// Block offsets for a `beta` sweep: `floor(n/4)` up to `floor(3n/4)` in
/// steps of `k`, keeping only offsets whose block fits inside `n`.
pub fn sweep_offsets(n: usize, k: usize) -> Vec<usize> {
    (n / 4..=(3 * n) / 4)
        .step_by(k.max(1))
        .filter(|&o| o + k <= n)
        .collect()
}
