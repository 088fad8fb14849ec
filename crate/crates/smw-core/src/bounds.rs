//! Forward and backward error bound evaluators with per-term breakdowns
//! and assumption flags, plus the prior-work diagnostics (inverse-difference
//! lemma, two-norm backward bound, capacitance condition-number bounds).
//!
//! Assumption violations are flagged, never fatal: the experiment sweeps
//! deliberately run past the validity thresholds, so every evaluator
//! produces a value together with honest flags.

use crate::linalg::{condition_number, invert, svd, two_norm, Matrix};
use crate::perturb::PerturbationSpec;
use crate::smw::{capacitance, ProblemInstance};
use crate::{Error, Result};

/// Every scalar a bound theorem consumes. `alpha` and `beta` are measured
/// from the clean capacitance `I + VᵀA⁻¹U`; they are independent
/// measurements, not reciprocals of one another.
#[derive(Debug, Clone, Copy)]
pub struct BoundInputs {
    pub eps1: f64,
    pub eps2: f64,
    /// `lambda = ||U||₂ ||V||₂`.
    pub lambda: f64,
    /// `||(I + VᵀA⁻¹U)⁻¹||₂`.
    pub alpha: f64,
    /// `||I + VᵀA⁻¹U||₂`.
    pub beta: f64,
    /// `||A||₂`.
    pub norm_a: f64,
    /// `||A⁻¹||₂`.
    pub norm_a_inv: f64,
    /// `kappa(V)`.
    pub kappa_v: f64,
    /// `||B⁻¹A||₂`.
    pub norm_binv_a: f64,
    /// `||A⁻¹B||₂`.
    pub norm_ainv_b: f64,
}

/// Inputs for the prior-work two-norm backward bound: `rho` caps all six
/// norms of A, A⁻¹, U, V, B, B⁻¹ and `gamma` caps `||U||₂`, `||V||₂`.
#[derive(Debug, Clone, Copy)]
pub struct GhadiriBoundInputs {
    pub rho: f64,
    pub gamma: f64,
    pub eps1: f64,
    pub eps2: f64,
}

/// One named validity assumption: `ok` and the margin `threshold - actual`
/// (positive when satisfied).
#[derive(Debug, Clone)]
pub struct Assumption {
    pub name: &'static str,
    pub ok: bool,
    pub margin: f64,
}

impl Assumption {
    fn strict_less(name: &'static str, actual: f64, threshold: f64) -> Self {
        Assumption {
            name,
            ok: actual < threshold,
            margin: threshold - actual,
        }
    }

    fn at_most(name: &'static str, actual: f64, threshold: f64) -> Self {
        Assumption {
            name,
            ok: actual <= threshold,
            margin: threshold - actual,
        }
    }

    fn at_least(name: &'static str, actual: f64, threshold: f64) -> Self {
        Assumption {
            name,
            ok: actual >= threshold,
            margin: actual - threshold,
        }
    }

    fn equal(name: &'static str, a: f64, b: f64) -> Self {
        Assumption {
            name,
            ok: a == b,
            margin: -(a - b).abs(),
        }
    }
}

/// An evaluated bound: the value, its additive term breakdown (terms sum to
/// the value), assumption flags with margins, and any non-summand named
/// diagnostic quantities.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub value: f64,
    pub terms: Vec<(&'static str, f64)>,
    pub assumptions: Vec<Assumption>,
    pub diagnostics: Vec<(&'static str, f64)>,
}

impl BoundReport {
    /// True iff every recorded assumption holds.
    pub fn all_ok(&self) -> bool {
        self.assumptions.iter().all(|a| a.ok)
    }

    /// Largest single term of the breakdown.
    pub fn dominant_term(&self) -> f64 {
        self.terms
            .iter()
            .map(|&(_, t)| t)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Append an externally supplied flag (e.g. invertibility conditions
    /// the evaluator cannot see from scalars alone).
    pub fn push_external(&mut self, assumption: Assumption) {
        self.assumptions.push(assumption);
    }
}

fn ensure_finite_inputs(values: &[f64]) -> Result<()> {
    if values.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::param("bound inputs must be finite".to_string()))
    }
}

/// Gather every scalar the theorems consume from one instance. `alpha` and
/// `beta` come from the SVD of the exact capacitance `I + VᵀA⁻¹U`; a
/// numerically singular capacitance reports `alpha = +inf` so downstream
/// evaluators flag it rather than fail.
pub fn measure_inputs(
    a: &Matrix,
    u: &Matrix,
    v: &Matrix,
    spec: &PerturbationSpec,
) -> Result<BoundInputs> {
    let fa = svd(a)?;
    let a_inv = invert(a)?;
    let cap = capacitance(&a_inv, u, v)?;
    let fc = svd(&cap)?;
    let alpha = if fc.sigma_min() > fc.rank_tolerance() {
        1.0 / fc.sigma_min()
    } else {
        f64::INFINITY
    };
    let beta = fc.sigma_max();
    let lambda = two_norm(u)? * two_norm(v)?;
    let b = a + u * v.transpose();
    let b_inv = invert(&b)?;
    Ok(BoundInputs {
        eps1: spec.eps1,
        eps2: spec.eps2,
        lambda,
        alpha,
        beta,
        norm_a: fa.sigma_max(),
        norm_a_inv: 1.0 / fa.sigma_min(),
        kappa_v: condition_number(v)?,
        norm_binv_a: two_norm(&(&b_inv * a))?,
        norm_ainv_b: two_norm(&(&a_inv * b))?,
    })
}

fn eq9_assumption(eps1: f64, lambda: f64, alpha: f64) -> Assumption {
    let threshold = 1.0 / (2.0 * lambda * alpha); // +inf when lambda = 0
    Assumption::strict_less("eq9_eps1_lt_inv_2_lambda_alpha", eps1, threshold)
}

fn forward_bound_with_alpha(inp: &BoundInputs, alpha: f64) -> Result<BoundReport> {
    ensure_finite_inputs(&[inp.eps1, inp.eps2, inp.lambda, inp.norm_a_inv])?;
    let BoundInputs {
        eps1,
        eps2,
        lambda,
        norm_a_inv,
        ..
    } = *inp;
    let t_e1 = eps1;
    let t_alpha = eps1 * lambda * alpha * (2.0 * norm_a_inv + eps1);
    let t_cap = lambda * (norm_a_inv + eps1).powi(2) * (eps2 + 2.0 * eps1 * lambda * alpha * alpha);
    Ok(BoundReport {
        value: t_e1 + t_alpha + t_cap,
        terms: vec![
            ("e1_term", t_e1),
            ("alpha_term", t_alpha),
            ("capacitance_term", t_cap),
        ],
        assumptions: vec![eq9_assumption(eps1, lambda, alpha)],
        diagnostics: vec![],
    })
}

/// Full forward error bound:
/// `eps1 + eps1*lambda*alpha*(2||A⁻¹|| + eps1)
///  + lambda*(||A⁻¹|| + eps1)²*(eps2 + 2*eps1*lambda*alpha²)`.
pub fn forward_bound(inp: &BoundInputs) -> Result<BoundReport> {
    forward_bound_with_alpha(inp, inp.alpha)
}

fn small_update_assumptions(inp: &BoundInputs) -> Vec<Assumption> {
    let sigma_min_a = 1.0 / inp.norm_a_inv;
    vec![
        Assumption::at_most("eps1_le_1", inp.eps1, 1.0),
        Assumption::at_most("eps2_le_1", inp.eps2, 1.0),
        Assumption::at_most("sigma_min_a_le_1", sigma_min_a, 1.0),
        Assumption::at_most("lambda_le_half_sigma_min_a", inp.lambda, 0.5 * sigma_min_a),
    ]
}

/// Small-update forward simplification: `2*eps2*||A⁻¹|| + 12*eps1`.
pub fn forward_bound_simplified(inp: &BoundInputs) -> Result<BoundReport> {
    ensure_finite_inputs(&[inp.eps1, inp.eps2, inp.norm_a_inv])?;
    let t_eps2 = 2.0 * inp.eps2 * inp.norm_a_inv;
    let t_eps1 = 12.0 * inp.eps1;
    let mut assumptions = small_update_assumptions(inp);
    assumptions.push(eq9_assumption(inp.eps1, inp.lambda, inp.alpha));
    Ok(BoundReport {
        value: t_eps2 + t_eps1,
        terms: vec![("eps2_term", t_eps2), ("eps1_term", t_eps1)],
        assumptions,
        diagnostics: vec![],
    })
}

/// Large-alpha forward simplification: `16*eps*lambda²*||A⁻¹||²*alpha²`
/// under `alpha >= max(1/lambda, 1)` and `eps1 = eps2 = eps`.
pub fn forward_bound_alpha_large(inp: &BoundInputs) -> Result<BoundReport> {
    ensure_finite_inputs(&[inp.eps1, inp.eps2, inp.lambda, inp.norm_a_inv, inp.alpha])?;
    let eps = inp.eps1;
    let value =
        16.0 * eps * inp.lambda.powi(2) * inp.norm_a_inv.powi(2) * inp.alpha.powi(2);
    let sigma_min_a = 1.0 / inp.norm_a_inv;
    let assumptions = vec![
        Assumption::equal("eps1_eq_eps2", inp.eps1, inp.eps2),
        Assumption::at_most("eps_le_1", eps, 1.0),
        Assumption::at_most("sigma_min_a_le_1", sigma_min_a, 1.0),
        Assumption::at_least(
            "alpha_ge_max_inv_lambda_1",
            inp.alpha,
            (1.0 / inp.lambda).max(1.0),
        ),
        eq9_assumption(inp.eps1, inp.lambda, inp.alpha),
    ];
    Ok(BoundReport {
        value,
        terms: vec![("alpha_sq_term", value)],
        assumptions,
        diagnostics: vec![],
    })
}

/// Alternative forward formulation with `alpha` replaced by
/// `kappa(V)*||B⁻¹A||₂`.
pub fn forward_bound_kappa_v(inp: &BoundInputs) -> Result<BoundReport> {
    let alpha_sub = inp.kappa_v * inp.norm_binv_a;
    let mut report = forward_bound_with_alpha(inp, alpha_sub)?;
    report.diagnostics.push(("kappa_v_norm_binv_a", alpha_sub));
    Ok(report)
}

fn thm2_assumptions(inp: &BoundInputs) -> Vec<Assumption> {
    let perturbed_beta = inp.beta + inp.lambda * inp.eps1;
    vec![
        Assumption::strict_less("eq13_eps1_lt_inv_2_norm_a", inp.eps1, 1.0 / (2.0 * inp.norm_a)),
        Assumption::strict_less(
            "eq14_eps2_lt_inv_2_perturbed_beta",
            inp.eps2,
            1.0 / (2.0 * perturbed_beta),
        ),
        Assumption::strict_less(
            "eq15_2_perturbed_beta_sq_eps2_lt_half",
            2.0 * perturbed_beta.powi(2) * inp.eps2,
            0.5,
        ),
    ]
}

fn backward_bound_with_beta(inp: &BoundInputs, beta: f64) -> Result<BoundReport> {
    ensure_finite_inputs(&[inp.eps1, inp.eps2, inp.lambda, inp.norm_a])?;
    let s1 = 2.0 * inp.eps1 * inp.norm_a.powi(2);
    let s2 = 4.0 * inp.lambda * inp.eps2 * (beta + inp.lambda * inp.eps1).powi(2);
    let mut local = inp.clone();
    local.beta = beta;
    Ok(BoundReport {
        value: s1 + s2,
        terms: vec![("s1_term", s1), ("s2_term", s2)],
        assumptions: thm2_assumptions(&local),
        diagnostics: vec![],
    })
}

/// Full backward error bound: `2*eps1*||A||² + 4*lambda*eps2*(beta + lambda*eps1)²`.
///
/// The invertibility requirements of the theorem (Ã and `(Z⁻¹)⁻¹ − VᵀÃ⁻¹U`)
/// cannot be seen from scalars; callers append them via
/// [`eq12_invertibility_flags`] and [`BoundReport::push_external`].
pub fn backward_bound(inp: &BoundInputs) -> Result<BoundReport> {
    backward_bound_with_beta(inp, inp.beta)
}

/// Small-update backward simplification: `2*eps1*||A||² + 8*eps2`.
pub fn backward_bound_simplified(inp: &BoundInputs) -> Result<BoundReport> {
    ensure_finite_inputs(&[inp.eps1, inp.eps2, inp.norm_a])?;
    let s1 = 2.0 * inp.eps1 * inp.norm_a.powi(2);
    let s2 = 8.0 * inp.eps2;
    let mut assumptions = small_update_assumptions(inp);
    assumptions.extend(thm2_assumptions(inp));
    Ok(BoundReport {
        value: s1 + s2,
        terms: vec![("eps1_term", s1), ("eps2_term", s2)],
        assumptions,
        diagnostics: vec![],
    })
}

/// Large-beta backward simplification: `18*lambda*eps*beta²` under
/// `beta >= max(lambda, ||A||/sqrt(lambda), 1)` and `eps1 = eps2 = eps`.
pub fn backward_bound_beta_large(inp: &BoundInputs) -> Result<BoundReport> {
    ensure_finite_inputs(&[inp.eps1, inp.eps2, inp.lambda, inp.norm_a, inp.beta])?;
    let eps = inp.eps1;
    let value = 18.0 * inp.lambda * eps * inp.beta.powi(2);
    let beta_floor = inp
        .lambda
        .max(inp.norm_a / inp.lambda.sqrt())
        .max(1.0);
    let mut assumptions = vec![
        Assumption::equal("eps1_eq_eps2", inp.eps1, inp.eps2),
        Assumption::at_most("eps_le_1", eps, 1.0),
        Assumption::at_most("sigma_min_a_le_1", 1.0 / inp.norm_a_inv, 1.0),
        Assumption::at_least("beta_ge_floor", inp.beta, beta_floor),
    ];
    assumptions.extend(thm2_assumptions(inp));
    Ok(BoundReport {
        value,
        terms: vec![("beta_sq_term", value)],
        assumptions,
        diagnostics: vec![],
    })
}

/// Alternative backward formulation with `beta` replaced by
/// `kappa(V)*||A⁻¹B||₂`.
pub fn backward_bound_kappa_v(inp: &BoundInputs) -> Result<BoundReport> {
    let beta_sub = inp.kappa_v * inp.norm_ainv_b;
    let mut report = backward_bound_with_beta(inp, beta_sub)?;
    report.diagnostics.push(("kappa_v_norm_ainv_b", beta_sub));
    Ok(report)
}

/// Inverse-difference lemma: for `||N⁻¹||₂ <= rho` and `||M − N||₂ <= eps
/// <= 1/(2 rho)`, returns `(2*rho²*eps, 2*rho)` — the bound on
/// `||M⁻¹ − N⁻¹||₂` and the cap on `||M⁻¹||₂`.
pub fn lemma1_bound(rho: f64, eps: f64) -> (f64, f64) {
    (2.0 * rho * rho * eps, 2.0 * rho)
}

/// Invertibility flags of the backward theorem, measured on one instance:
/// sigma_min of `Ã = (Ã⁻¹)⁻¹`-surrogate (i.e. of `Ã⁻¹` itself) and of
/// `(Z⁻¹)⁻¹ − VᵀÃ⁻¹U`, each against the rank tolerance.
pub fn eq12_invertibility_flags(inst: &ProblemInstance) -> Result<Vec<Assumption>> {
    let fa = svd(&inst.a_inv_approx)?;
    let a_tilde_flag = Assumption {
        name: "eq12_a_tilde_invertible",
        ok: fa.sigma_min() > fa.rank_tolerance(),
        margin: fa.sigma_min() - fa.rank_tolerance(),
    };
    let inner = match invert(&inst.z_inv) {
        Ok(z) => {
            let m = z - inst.v.transpose() * &inst.a_inv_approx * &inst.u;
            let fm = svd(&m)?;
            Assumption {
                name: "eq12_inner_matrix_invertible",
                ok: fm.sigma_min() > fm.rank_tolerance(),
                margin: fm.sigma_min() - fm.rank_tolerance(),
            }
        }
        Err(_) => Assumption {
            name: "eq12_inner_matrix_invertible",
            ok: false,
            margin: f64::NEG_INFINITY,
        },
    };
    Ok(vec![a_tilde_flag, inner])
}

/// Prior-work two-norm backward bound `512*eps2*rho^14 + eps1`, with the
/// appendix intermediate `8*(1+gamma)⁴*rho⁴*(gamma²rho+1)²*eps2` exposed as
/// a diagnostic.
pub fn ghadiri_two_norm_bound(inp: &GhadiriBoundInputs) -> Result<BoundReport> {
    ensure_finite_inputs(&[inp.rho, inp.gamma, inp.eps1, inp.eps2])?;
    let GhadiriBoundInputs {
        rho,
        gamma,
        eps1,
        eps2,
    } = *inp;
    let rho14_term = 512.0 * eps2 * rho.powi(14);
    let intermediate =
        8.0 * (1.0 + gamma).powi(4) * rho.powi(4) * (gamma * gamma * rho + 1.0).powi(2) * eps2;
    let sharp_threshold = rho.powi(3) / (8.0 * (1.0 + rho).powi(4) * (rho.powi(3) + 1.0).powi(2));
    let assumptions = vec![
        Assumption::at_least("rho_ge_1", rho, 1.0),
        Assumption::at_most("eps2_le_inv_512_rho7", eps2, 1.0 / (512.0 * rho.powi(7))),
        Assumption::at_most("eps2_le_sharp_threshold", eps2, sharp_threshold),
        Assumption::at_most("gamma_le_rho", gamma, rho),
    ];
    Ok(BoundReport {
        value: rho14_term + eps1,
        terms: vec![("rho14_term", rho14_term), ("eps1_term", eps1)],
        assumptions,
        diagnostics: vec![("appendix_intermediate", intermediate)],
    })
}

/// Condition-number diagnostics for the capacitance matrix: reports
/// `kappa(C)`, the general bound `min{kappa²(U), kappa²(Vᵀ)}·kappa(A)·kappa(B)`,
/// and the structured bound `kappa(A)·kappa(B)` which applies only when
/// `UVᵀ` has exactly n−k zero rows (tested numerically on row norms).
pub fn yip_capacitance_diagnostics(a: &Matrix, u: &Matrix, v: &Matrix) -> Result<BoundReport> {
    let a_inv = invert(a)?;
    let b = a + u * v.transpose();
    // invertibility of both A and B is a precondition
    invert(&b)?;
    let cap = capacitance(&a_inv, u, v)?;
    let kappa_c = condition_number(&cap)?;
    let kappa_a = condition_number(a)?;
    let kappa_b = condition_number(&b)?;
    let kappa_u = condition_number(u)?;
    let kappa_vt = condition_number(&v.transpose())?;
    let general = kappa_u.powi(2).min(kappa_vt.powi(2)) * kappa_a * kappa_b;
    let structured = kappa_a * kappa_b;

    // structural test: UVᵀ has exactly n−k zero rows
    let uvt = u * v.transpose();
    let scale = two_norm(&uvt)?;
    let tol = scale * uvt.nrows() as f64 * f64::EPSILON;
    let zero_rows = (0..uvt.nrows())
        .filter(|&i| uvt.row(i).iter().map(|x| x * x).sum::<f64>().sqrt() <= tol)
        .count();
    let expected_zero = uvt.nrows() - u.ncols();
    let structured_applicable = zero_rows == expected_zero;

    let mut assumptions = vec![Assumption {
        name: "general_bound_holds",
        ok: kappa_c <= general,
        margin: general - kappa_c,
    }];
    assumptions.push(Assumption {
        name: "structured_bound_applicable",
        ok: structured_applicable,
        margin: expected_zero as f64 - zero_rows as f64,
    });
    if structured_applicable {
        assumptions.push(Assumption {
            name: "structured_bound_holds",
            ok: kappa_c <= structured,
            margin: structured - kappa_c,
        });
    }
    Ok(BoundReport {
        value: kappa_c,
        terms: vec![("kappa_capacitance", kappa_c)],
        assumptions,
        diagnostics: vec![
            ("general_bound", general),
            ("structured_bound", structured),
        ],
    })
}
