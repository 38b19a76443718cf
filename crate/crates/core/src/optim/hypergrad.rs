//! Hypergradients of the upper loss with respect to the outer variables.
//!
//! All three estimators share the form ∂U/∂φ − J·w, where J is the mixed
//! lower-level Jacobian applied through [`BilevelProblem::jvp_mixed`] and `w`
//! approximates H⁻¹·∂U/∂θ with H the lower-level Hessian:
//!
//! * finite difference: w = ξ·∂U/∂θ (a single unrolled step),
//! * Neumann: w = ξ·Σₖ (I − ξH)ᵏ ∂U/∂θ, truncated after K terms,
//! * conjugate gradient: K CG iterations on H·w = ∂U/∂θ, started from the
//!   previous solution when that has a smaller residual than zero.
//!
//! With ξ = 1 the Neumann recursion is the unscaled series Σₖ (I − H)ᵏ.

use ndarray::Array2;

use super::problem::BilevelProblem;
use crate::error::Result;

fn norm(x: &Array2<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn inner_product(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// One-step (DARTS-style) finite-difference hypergradient.
pub fn hypergrad_fd<P: BilevelProblem + ?Sized>(
    problem: &P,
    inner: &Array2<f64>,
    outer: &Array2<f64>,
    lr_fd: f64,
    hvp_eps: f64,
) -> Result<Array2<f64>> {
    let (_, gi, go) = problem.upper_grads(inner, outer)?;
    if lr_fd == 0.0 {
        return Ok(go);
    }
    let j = problem.jvp_mixed(inner, outer, &gi, hvp_eps)?;
    Ok(go - &(j * lr_fd))
}

#[derive(Debug, Clone)]
pub struct NeumannOutcome {
    pub grad: Array2<f64>,
    /// Series terms after v₀ actually accumulated.
    pub terms: usize,
    /// Set when the divergence guard cut the series short.
    pub truncated: bool,
}

/// Growth of ‖v_k‖ over ‖v_0‖ beyond which the series is cut.
pub const NEUMANN_GROWTH_LIMIT: f64 = 10.0;

pub fn hypergrad_neumann<P: BilevelProblem + ?Sized>(
    problem: &P,
    inner: &Array2<f64>,
    outer: &Array2<f64>,
    k: usize,
    lr_inner: f64,
    hvp_eps: f64,
) -> Result<NeumannOutcome> {
    let (_, gi, go) = problem.upper_grads(inner, outer)?;
    let limit = NEUMANN_GROWTH_LIMIT * norm(&gi);
    let mut sum = gi.clone();
    let mut v = gi;
    let mut terms = 0;
    let mut truncated = false;
    for step in 1..=k {
        let hv = problem.hvp(inner, outer, &v, hvp_eps)?;
        let next = &v - &(hv * lr_inner);
        if norm(&next) > limit {
            log::warn!("Neumann series diverging at term {step}; truncating to {terms} terms");
            truncated = true;
            break;
        }
        sum += &next;
        v = next;
        terms = step;
    }
    let j = problem.jvp_mixed(inner, outer, &sum, hvp_eps)?;
    Ok(NeumannOutcome {
        grad: go - &(j * lr_inner),
        terms,
        truncated,
    })
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub grad: Array2<f64>,
    /// Final iterate, to warm-start the next solve.
    pub w: Array2<f64>,
    pub iterations: usize,
    pub negative_curvature: bool,
    /// ‖∂U/∂θ − H·w‖ at the last iterate, when any iteration ran.
    pub residual: Option<f64>,
}

pub fn hypergrad_cg<P: BilevelProblem + ?Sized>(
    problem: &P,
    inner: &Array2<f64>,
    outer: &Array2<f64>,
    k: usize,
    w0: Option<&Array2<f64>>,
    hvp_eps: f64,
) -> Result<CgOutcome> {
    let (_, b, go) = problem.upper_grads(inner, outer)?;
    let mut w = match w0 {
        Some(w0) if w0.dim() == b.dim() => w0.clone(),
        _ => Array2::zeros(b.dim()),
    };
    let mut iterations = 0;
    let mut negative_curvature = false;
    let mut residual = None;
    if k > 0 {
        let mut r = &b - &problem.hvp(inner, outer, &w, hvp_eps)?;
        if norm(&r) >= norm(&b) {
            // The warm start is no better than zero here.
            w.fill(0.0);
            r = b.clone();
        }
        let mut p = r.clone();
        let mut rr = inner_product(&r, &r);
        let tiny = 1e-30 * inner_product(&b, &b).max(f64::MIN_POSITIVE);
        while iterations < k && rr > tiny {
            let hp = problem.hvp(inner, outer, &p, hvp_eps)?;
            let curvature = inner_product(&p, &hp);
            if curvature <= 0.0 {
                log::debug!("CG hit non-positive curvature {curvature:e} at iteration {iterations}");
                negative_curvature = true;
                break;
            }
            let alpha = rr / curvature;
            w.scaled_add(alpha, &p);
            r.scaled_add(-alpha, &hp);
            let rr_next = inner_product(&r, &r);
            p = &r + &(p * (rr_next / rr));
            rr = rr_next;
            iterations += 1;
        }
        residual = Some(rr.sqrt());
    }
    let j = problem.jvp_mixed(inner, outer, &w, hvp_eps)?;
    Ok(CgOutcome {
        grad: go - &j,
        w,
        iterations,
        negative_curvature,
        residual,
    })
}
