//! Analytic gradients of the SMO loss and finite-difference curvature
//! products built on top of them.
//!
//! Chain: ∂L/∂Z → ∂Z/∂I = β Z (1 − Z) (with a d² factor per dose branch) →
//! Abbe adjoint (mask transmission and raw source weights, including the
//! Σ j normalization) → sigmoid activations to θ_M and θ_J.

use ndarray::{Array2, Zip};

use crate::config::OpticalConfig;
use crate::error::{check_shape, Result, SmoError};
use crate::loss::{LossValue, SmoEval, SmoModel};
use crate::params::{ParamField, ParamKind};
use crate::target::TargetPattern;

/// Partial derivatives of the loss with respect to θ_J and θ_M.
#[derive(Debug, Clone, PartialEq)]
pub struct GradPair {
    pub wrt_source: Array2<f64>,
    pub wrt_mask: Array2<f64>,
}

/// Default relative step for curvature products.
pub const DEFAULT_HVP_EPS: f64 = 1e-2;

fn intensity_cotangent(eval: &SmoEval, model: &SmoModel) -> Array2<f64> {
    let cfg = &model.cfg;
    let beta = cfg.resist_steepness;
    let branches = [
        (&eval.window.nominal.values, cfg.gamma, 1.0),
        (&eval.window.min.values, cfg.eta, cfg.dose_min * cfg.dose_min),
        (&eval.window.max.values, cfg.eta, cfg.dose_max * cfg.dose_max),
    ];
    let mut g = Array2::zeros(eval.window.nominal.dim());
    for (z, weight, d2) in branches {
        if weight == 0.0 {
            continue;
        }
        let c = 2.0 * weight * beta * d2;
        Zip::from(&mut g)
            .and(z)
            .and(&model.target.pixels)
            .for_each(|g, &z, &t| *g += c * (z - f64::from(t)) * z * (1.0 - z));
    }
    g
}

impl SmoModel {
    /// Loss and both parameter gradients from one forward/adjoint pass.
    pub fn gradient(&self, theta_j: &ParamField, theta_m: &ParamField) -> Result<(LossValue, GradPair)> {
        let eval = self.evaluate(theta_j, theta_m)?;
        let g = intensity_cotangent(&eval, self);
        let back = self.imager.backward(&eval.abbe, &g);

        let (am, aj) = (self.cfg.alpha_m, self.cfg.alpha_j);
        let mut wrt_mask = back.wrt_mask;
        Zip::from(&mut wrt_mask)
            .and(&eval.mask.transmission)
            .for_each(|d, &m| *d *= am * m * (1.0 - m));
        let mut wrt_source = back.wrt_source;
        Zip::from(&mut wrt_source)
            .and(&eval.source.intensities)
            .for_each(|d, &j| *d *= aj * j * (1.0 - j));

        if wrt_mask.iter().chain(wrt_source.iter()).any(|v| !v.is_finite()) {
            return Err(SmoError::Numeric("non-finite gradient".into()));
        }
        Ok((eval.loss, GradPair { wrt_source, wrt_mask }))
    }

    /// [∂²L/∂θ_J²]·v by central differences of the analytic source gradient.
    pub fn hvp_source(
        &self,
        theta_j: &ParamField,
        theta_m: &ParamField,
        v: &Array2<f64>,
        eps: f64,
    ) -> Result<Array2<f64>> {
        check_shape("hvp direction", theta_j.dim(), v.dim())?;
        central_difference(&theta_j.values, v, eps, |tj| {
            Ok(self.gradient(&with_values(theta_j, tj), theta_m)?.1.wrt_source)
        })
    }

    /// wᵀ·[∂²L/∂θ_J∂θ_M]: change of the mask gradient along a source
    /// perturbation `w`, by central differences.
    pub fn jvp_mixed(
        &self,
        theta_j: &ParamField,
        theta_m: &ParamField,
        w: &Array2<f64>,
        eps: f64,
    ) -> Result<Array2<f64>> {
        check_shape("jvp direction", theta_j.dim(), w.dim())?;
        if w.iter().all(|&x| x == 0.0) {
            return Ok(Array2::zeros(theta_m.dim()));
        }
        central_difference(&theta_j.values, w, eps, |tj| {
            Ok(self.gradient(&with_values(theta_j, tj), theta_m)?.1.wrt_mask)
        })
    }
}

/// Relative step ε̂ = eps / max(‖v‖∞, 1e-12).
pub fn scaled_step(v: &Array2<f64>, eps: f64) -> f64 {
    let norm = v.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    eps / norm.max(1e-12)
}

/// (f(θ + ε̂v) − f(θ − ε̂v)) / (2ε̂) for a vector-valued `f`.
pub fn central_difference<F>(theta: &Array2<f64>, v: &Array2<f64>, eps: f64, f: F) -> Result<Array2<f64>>
where
    F: Fn(&Array2<f64>) -> Result<Array2<f64>>,
{
    if !(eps > 0.0) {
        return Err(SmoError::Config(format!(
            "finite-difference eps must be positive, got {eps}"
        )));
    }
    check_shape("finite-difference direction", theta.dim(), v.dim())?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(SmoError::Numeric("non-finite direction".into()));
    }
    if v.iter().all(|&x| x == 0.0) {
        let probe = f(theta)?;
        return Ok(Array2::zeros(probe.dim()));
    }
    let h = scaled_step(v, eps);
    let gp = f(&(theta + &(v * h)))?;
    let gm = f(&(theta - &(v * h)))?;
    Ok((gp - gm) / (2.0 * h))
}

fn with_values(field: &ParamField, values: &Array2<f64>) -> ParamField {
    ParamField {
        values: values.clone(),
        kind: field.kind,
    }
}

pub fn grad_smo(
    theta_j: &ParamField,
    theta_m: &ParamField,
    cfg: &OpticalConfig,
    target: &TargetPattern,
) -> Result<GradPair> {
    Ok(SmoModel::new(cfg, target)?.gradient(theta_j, theta_m)?.1)
}

pub fn hvp_so_jj(
    theta_j: &ParamField,
    theta_m: &ParamField,
    v: &Array2<f64>,
    cfg: &OpticalConfig,
    target: &TargetPattern,
    eps: f64,
) -> Result<Array2<f64>> {
    if v.iter().all(|&x| x == 0.0) {
        check_shape("hvp direction", theta_j.dim(), v.dim())?;
        return Ok(Array2::zeros(v.dim()));
    }
    SmoModel::new(cfg, target)?.hvp_source(theta_j, theta_m, v, eps)
}

pub fn jvp_so_mj(
    theta_j: &ParamField,
    theta_m: &ParamField,
    w: &Array2<f64>,
    cfg: &OpticalConfig,
    target: &TargetPattern,
    eps: f64,
) -> Result<Array2<f64>> {
    SmoModel::new(cfg, target)?.jvp_mixed(theta_j, theta_m, w, eps)
}

/// Central finite-difference gradient of the total loss, one coordinate at a
/// time. Used as the independent oracle for the analytic gradient.
pub fn finite_difference_gradient(
    model: &SmoModel,
    theta_j: &ParamField,
    theta_m: &ParamField,
    kind: ParamKind,
    step: f64,
    coords: Option<&[(usize, usize)]>,
) -> Result<Array2<f64>> {
    let base = match kind {
        ParamKind::SourceParams => theta_j,
        ParamKind::MaskParams => theta_m,
    };
    let all: Vec<(usize, usize)>;
    let coords = match coords {
        Some(c) => c,
        None => {
            let (r, c) = base.dim();
            all = (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).collect();
            &all
        }
    };
    let mut out = Array2::zeros(base.dim());
    for &(i, j) in coords {
        let mut plus = base.clone();
        plus.values[[i, j]] += step;
        let mut minus = base.clone();
        minus.values[[i, j]] -= step;
        let (lp, lm) = match kind {
            ParamKind::SourceParams => (model.loss(&plus, theta_m)?, model.loss(&minus, theta_m)?),
            ParamKind::MaskParams => (model.loss(theta_j, &plus)?, model.loss(theta_j, &minus)?),
        };
        out[[i, j]] = (lp.total - lm.total) / (2.0 * step);
    }
    Ok(out)
}

/// max |a − b| / max |b|, the error measure used by gradient audits.
pub fn max_relative_error(analytic: &Array2<f64>, reference: &Array2<f64>) -> f64 {
    let num = Zip::from(analytic)
        .and(reference)
        .fold(0.0f64, |m, &a, &b| m.max((a - b).abs()));
    let den = reference.iter().fold(0.0f64, |m, &b| m.max(b.abs()));
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
