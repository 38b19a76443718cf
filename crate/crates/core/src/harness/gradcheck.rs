//! Gradient audit on small instances: analytic gradients against central
//! finite differences, plus a symmetry check of the source Hessian product.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::suite::synthetic_instance;
use crate::config::{parse_value, Settings};
use crate::error::{Result, SmoError};
use crate::grad::{finite_difference_gradient, max_relative_error};
use crate::loss::SmoModel;
use crate::optim::{audit_gradients, QuadraticBilevel};
use crate::params::ParamKind;

/// Largest mask side the audit accepts.
pub const MAX_GRADCHECK_MASK: usize = 64;

/// Errors above this fail the audit.
pub const GRADCHECK_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckSpec {
    pub n_mask: usize,
    pub n_source: usize,
    pub seed: u64,
    /// Finite-difference step in parameter units.
    pub fd_step: f64,
    /// Probe size for the Hessian symmetry check.
    pub hvp_eps: f64,
    /// Multiplies the analytic mask gradient before comparison. Only useful
    /// to confirm that the audit catches a wrong gradient.
    pub corrupt_mask_gradient: Option<f64>,
}

impl Default for GradcheckSpec {
    fn default() -> Self {
        GradcheckSpec {
            n_mask: 32,
            n_source: 3,
            seed: 11,
            fd_step: 1e-5,
            hvp_eps: 1e-4,
            corrupt_mask_gradient: None,
        }
    }
}

impl Settings for GradcheckSpec {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "n_mask" => self.n_mask = parse_value(key, value)?,
            "n_source" => self.n_source = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "fd_step" => self.fd_step = parse_value(key, value)?,
            "hvp_eps" => self.hvp_eps = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckReport {
    pub mask_error: f64,
    pub source_error: f64,
    /// |uᵀHv − vᵀHu| / (|uᵀHv| + |vᵀHu|) for random u, v.
    pub hvp_symmetry: f64,
    /// Audit error on the quadratic bilevel fixture.
    pub fixture_error: f64,
}

impl GradcheckReport {
    pub fn max_error(&self) -> f64 {
        [
            self.mask_error,
            self.source_error,
            self.hvp_symmetry,
            self.fixture_error,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_error() <= GRADCHECK_TOLERANCE
    }

    /// `Err(GradCheck)` when any error exceeds [`GRADCHECK_TOLERANCE`].
    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            Ok(self)
        } else {
            Err(SmoError::GradCheck(format!(
                "mask {:.3e}, source {:.3e}, hvp symmetry {:.3e}, fixture {:.3e} (tolerance {GRADCHECK_TOLERANCE:e})",
                self.mask_error, self.source_error, self.hvp_symmetry, self.fixture_error
            )))
        }
    }
}

fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn gradcheck(spec: &GradcheckSpec) -> Result<GradcheckReport> {
    if spec.n_mask > MAX_GRADCHECK_MASK {
        return Err(SmoError::Validation(format!(
            "gradcheck evaluates every coordinate and is limited to n_mask <= {MAX_GRADCHECK_MASK}, got {}",
            spec.n_mask
        )));
    }
    let inst = synthetic_instance(spec.n_mask, spec.n_source, spec.seed)?;
    let model = SmoModel::new(&inst.cfg, &inst.target)?;
    let (_, mut g) = model.gradient(&inst.theta_j, &inst.theta_m)?;
    if let Some(factor) = spec.corrupt_mask_gradient {
        g.wrt_mask *= factor;
    }
    let fd_m = finite_difference_gradient(
        &model,
        &inst.theta_j,
        &inst.theta_m,
        ParamKind::MaskParams,
        spec.fd_step,
        None,
    )?;
    let fd_j = finite_difference_gradient(
        &model,
        &inst.theta_j,
        &inst.theta_m,
        ParamKind::SourceParams,
        spec.fd_step,
        None,
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(1));
    let mut random = || Array2::from_shape_fn(inst.theta_j.dim(), |_| rng.gen_range(-1.0..1.0));
    let (u, v) = (random(), random());
    let hv = model.hvp_source(&inst.theta_j, &inst.theta_m, &v, spec.hvp_eps)?;
    let hu = model.hvp_source(&inst.theta_j, &inst.theta_m, &u, spec.hvp_eps)?;
    let (uhv, vhu) = (dot(&u, &hv), dot(&v, &hu));
    let hvp_symmetry = (uhv - vhu).abs() / (uhv.abs() + vhu.abs()).max(f64::MIN_POSITIVE);

    let fixture = QuadraticBilevel::random(9, 6, 0.5, 2.0, spec.seed);
    let (fi, fo) = fixture.zeros();
    let fixture_error = audit_gradients(&fixture, &(fi + 0.3), &(fo - 0.2), 6, 1e-4)?.max_error();

    Ok(GradcheckReport {
        mask_error: max_relative_error(&g.wrt_mask, &fd_m),
        source_error: max_relative_error(&g.wrt_source, &fd_j),
        hvp_symmetry,
        fixture_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_large_instances() {
        let spec = GradcheckSpec {
            n_mask: 128,
            ..GradcheckSpec::default()
        };
        assert!(matches!(gradcheck(&spec), Err(SmoError::Validation(_))));
    }

    #[test]
    fn small_instance_passes_and_corruption_fails() {
        let spec = GradcheckSpec {
            n_mask: 16,
            ..GradcheckSpec::default()
        };
        let report = gradcheck(&spec).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.fixture_error < 1e-8);
        let bad = GradcheckSpec {
            corrupt_mask_gradient: Some(1.05),
            ..spec
        };
        let err = gradcheck(&bad).unwrap().into_result().unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
