//! The bilevel interface the drivers run against, and its SMO instance.
//!
//! Inner variables are the lower-level (source) parameters and outer
//! variables the upper-level (mask) parameters. Curvature products default
//! to central differences of the analytic lower-level gradients.

use std::sync::Mutex;

use ndarray::Array2;

use crate::error::{check_shape, Result, SmoError};
use crate::grad::{central_difference, max_relative_error, GradPair};
use crate::loss::{LossValue, SmoModel};
use crate::params::{ParamField, ParamKind};

pub trait BilevelProblem: Sync {
    fn inner_shape(&self) -> (usize, usize);
    fn outer_shape(&self) -> (usize, usize);

    /// Factor from this problem's loss to the loss on which step sizes are
    /// defined. Gradient-descent steps and the curvature step ξ of the
    /// finite-difference and Neumann hypergradients are multiplied by it.
    fn step_scale(&self) -> f64 {
        1.0
    }

    fn lower_loss(&self, inner: &Array2<f64>, outer: &Array2<f64>) -> Result<f64>;
    fn upper_loss(&self, inner: &Array2<f64>, outer: &Array2<f64>) -> Result<LossValue>;

    /// Lower-level gradient with respect to (inner, outer).
    fn lower_grads(&self, inner: &Array2<f64>, outer: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)>;

    /// Upper-level value and gradient with respect to (inner, outer).
    fn upper_grads(&self, inner: &Array2<f64>, outer: &Array2<f64>) -> Result<(LossValue, Array2<f64>, Array2<f64>)>;

    /// [∂²L_lower/∂inner²]·v.
    fn hvp(&self, inner: &Array2<f64>, outer: &Array2<f64>, v: &Array2<f64>, eps: f64) -> Result<Array2<f64>> {
        check_shape("hvp direction", self.inner_shape(), v.dim())?;
        if v.iter().all(|&x| x == 0.0) {
            return Ok(Array2::zeros(v.dim()));
        }
        central_difference(inner, v, eps, |x| Ok(self.lower_grads(x, outer)?.0))
    }

    /// wᵀ·[∂²L_lower/∂inner∂outer], an outer-shaped array.
    fn jvp_mixed(&self, inner: &Array2<f64>, outer: &Array2<f64>, w: &Array2<f64>, eps: f64) -> Result<Array2<f64>> {
        check_shape("jvp direction", self.inner_shape(), w.dim())?;
        if w.iter().all(|&x| x == 0.0) {
            return Ok(Array2::zeros(self.outer_shape()));
        }
        central_difference(inner, w, eps, |x| Ok(self.lower_grads(x, outer)?.1))
    }
}

/// Relative errors of a finite-difference spot check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditReport {
    pub inner_error: f64,
    pub outer_error: f64,
}

impl AuditReport {
    pub fn max_error(&self) -> f64 {
        self.inner_error.max(self.outer_error)
    }
}

/// Up to `probes` evenly spaced coordinates of an `r × c` array.
pub fn probe_coords(dim: (usize, usize), probes: usize) -> Vec<(usize, usize)> {
    let total = dim.0 * dim.1;
    let count = probes.min(total).max(1);
    (0..count)
        .map(|k| {
            let flat = k * total / count + (total / count) / 2;
            (flat / dim.1, flat % dim.1)
        })
        .collect()
}

fn fd_on_coords<F>(x: &Array2<f64>, coords: &[(usize, usize)], step: f64, f: F) -> Result<Vec<f64>>
where
    F: Fn(&Array2<f64>) -> Result<f64>,
{
    coords
        .iter()
        .map(|&c| {
            let mut plus = x.clone();
            plus[c] += step;
            let mut minus = x.clone();
            minus[c] -= step;
            Ok((f(&plus)? - f(&minus)?) / (2.0 * step))
        })
        .collect()
}

/// Compare the upper-level gradients against central differences of the
/// upper loss on a handful of coordinates.
pub fn audit_gradients<P: BilevelProblem + ?Sized>(
    problem: &P,
    inner: &Array2<f64>,
    outer: &Array2<f64>,
    probes: usize,
    step: f64,
) -> Result<AuditReport> {
    let (_, gi, go) = problem.upper_grads(inner, outer)?;
    let ci = probe_coords(problem.inner_shape(), probes);
    let co = probe_coords(problem.outer_shape(), probes);
    let fi = fd_on_coords(inner, &ci, step, |x| Ok(problem.upper_loss(x, outer)?.total))?;
    let fo = fd_on_coords(outer, &co, step, |x| Ok(problem.upper_loss(inner, x)?.total))?;
    let pick = |g: &Array2<f64>, cs: &[(usize, usize)]| Array2::from_shape_fn((1, cs.len()), |(_, k)| g[cs[k]]);
    let as_row = |v: Vec<f64>| Array2::from_shape_vec((1, v.len()), v).expect("row shape");
    Ok(AuditReport {
        inner_error: max_relative_error(&pick(&gi, &ci), &as_row(fi)),
        outer_error: max_relative_error(&pick(&go, &co), &as_row(fo)),
    })
}

/// Threshold above which an audit is reported as a failure.
pub const AUDIT_TOLERANCE: f64 = 1e-3;

pub fn require_audit<P: BilevelProblem + ?Sized>(
    problem: &P,
    inner: &Array2<f64>,
    outer: &Array2<f64>,
) -> Result<AuditReport> {
    let report = audit_gradients(problem, inner, outer, 6, 1e-5)?;
    log::info!(
        "gradient audit: inner {:.3e}, outer {:.3e}",
        report.inner_error,
        report.outer_error
    );
    if report.max_error() > AUDIT_TOLERANCE || !report.max_error().is_finite() {
        return Err(SmoError::GradCheck(format!(
            "gradient audit failed: inner {:.3e}, outer {:.3e} (tolerance {AUDIT_TOLERANCE:e})",
            report.inner_error, report.outer_error
        )));
    }
    Ok(report)
}

type CacheEntry = (Array2<f64>, Array2<f64>, LossValue, GradPair);

/// SMO as a bilevel problem: source optimization below, mask optimization
/// above, both minimizing the same γ·L2 + η·PVB loss.
#[derive(Debug)]
pub struct SmoProblem {
    pub model: SmoModel,
    cache: Mutex<Option<CacheEntry>>,
}

impl SmoProblem {
    pub fn new(model: SmoModel) -> Self {
        SmoProblem {
            model,
            cache: Mutex::new(None),
        }
    }

    pub fn fields(&self, inner: &Array2<f64>, outer: &Array2<f64>) -> (ParamField, ParamField) {
        (
            ParamField {
                values: inner.clone(),
                kind: ParamKind::SourceParams,
            },
            ParamField {
                values: outer.clone(),
                kind: ParamKind::MaskParams,
            },
        )
    }

    /// Loss and gradients, reusing the previous result when called again at
    /// the same point.
    pub fn evaluate(&self, inner: &Array2<f64>, outer: &Array2<f64>) -> Result<(LossValue, GradPair)> {
        if let Some((ci, co, loss, grads)) = self.cache.lock().expect("cache lock").as_ref() {
            if ci == inner && co == outer {
                return Ok((*loss, grads.clone()));
            }
        }
        let (tj, tm) = self.fields(inner, outer);
        let (loss, grads) = self.model.gradient(&tj, &tm)?;
        *self.cache.lock().expect("cache lock") = Some((inner.clone(), outer.clone(), loss, grads.clone()));
        Ok((loss, grads))
    }
}

impl BilevelProblem for SmoProblem {
    fn inner_shape(&self) -> (usize, usize) {
        (self.model.cfg.n_source, self.model.cfg.n_source)
    }

    /// Step sizes refer to the per-pixel mean loss, so they carry over
    /// between grid sizes while reported losses stay pixel sums.
    fn step_scale(&self) -> f64 {
        1.0 / (self.model.cfg.n_mask * self.model.cfg.n_mask) as f64
    }

    fn outer_shape(&self) -> (usize, usize) {
        (self.model.cfg.n_mask, self.model.cfg.n_mask)
    }

    fn lower_loss(&self, inner: &Array2<f64>, outer: &Array2<f64>) -> Result<f64> {
        Ok(self.upper_loss(inner, outer)?.total)
    }

    fn upper_loss(&self, inner: &Array2<f64>, outer: &Array2<f64>) -> Result<LossValue> {
        let (tj, tm) = self.fields(inner, outer);
        self.model.loss(&tj, &tm)
    }

    fn lower_grads(&self, inner: &Array2<f64>, outer: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        let (_, g) = self.evaluate(inner, outer)?;
        Ok((g.wrt_source, g.wrt_mask))
    }

    fn upper_grads(&self, inner: &Array2<f64>, outer: &Array2<f64>) -> Result<(LossValue, Array2<f64>, Array2<f64>)> {
        let (loss, g) = self.evaluate(inner, outer)?;
        Ok((loss, g.wrt_source, g.wrt_mask))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probes_are_in_range_and_distinct() {
        let c = probe_coords((3, 3), 6);
        assert_eq!(c.len(), 6);
        let mut flat: Vec<usize> = c.iter().map(|&(i, j)| i * 3 + j).collect();
        flat.dedup();
        assert_eq!(flat.len(), 6);
        assert!(c.iter().all(|&(i, j)| i < 3 && j < 3));
        assert_eq!(probe_coords((1, 1), 6), vec![(0, 0)]);
    }
}
