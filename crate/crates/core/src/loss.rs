//! The SMO objective γ·L2 + η·PVB and a reusable model that evaluates it.

use ndarray::{Array2, Zip};

use crate::config::OpticalConfig;
use crate::error::{check_shape, Result, SmoError};
use crate::imaging::{build_pupil, resist, AbbeForward, AbbeImager, AerialImage, ProcessWindow, Pupil, ResistImage};
use crate::params::{activate_mask, activate_source, MaskGrid, ParamField, ParamKind, SourceGrid};
use crate::target::TargetPattern;

/// Weighted loss and its two unweighted parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub l2_term: f64,
    pub pvb_term: f64,
}

impl LossValue {
    pub fn new(l2_term: f64, pvb_term: f64, gamma: f64, eta: f64) -> Self {
        LossValue {
            total: gamma * l2_term + eta * pvb_term,
            l2_term,
            pvb_term,
        }
    }
}

fn squared_error(z: &Array2<f64>, target: &TargetPattern) -> f64 {
    Zip::from(z).and(&target.pixels).fold(0.0, |acc, &a, &t| {
        let d = a - f64::from(t);
        acc + d * d
    })
}

/// ‖Z − Z_t‖² summed over pixels.
pub fn loss_l2(z: &ResistImage, target: &TargetPattern) -> Result<f64> {
    check_shape("loss_l2", target.pixels.dim(), z.dim())?;
    Ok(squared_error(&z.values, target))
}

/// ‖Z_max − Z_t‖² + ‖Z_min − Z_t‖².
pub fn loss_pvb(z_min: &ResistImage, z_max: &ResistImage, target: &TargetPattern) -> Result<f64> {
    check_shape("loss_pvb", target.pixels.dim(), z_min.dim())?;
    check_shape("loss_pvb", target.pixels.dim(), z_max.dim())?;
    Ok(squared_error(&z_max.values, target) + squared_error(&z_min.values, target))
}

/// One forward evaluation of the SMO model.
#[derive(Debug, Clone)]
pub struct SmoEval {
    pub loss: LossValue,
    pub window: ProcessWindow,
    pub source: SourceGrid,
    pub mask: MaskGrid,
    pub(crate) abbe: AbbeForward,
}

impl SmoEval {
    pub fn aerial(&self) -> &AerialImage {
        &self.abbe.aerial
    }
}

/// Optical model bound to one target, reused across loss and gradient calls.
///
/// The min/max-dose images use I(d·M) = d²·I(M), which holds exactly for the
/// quadratic imaging model, so each evaluation needs one Abbe pass.
#[derive(Debug, Clone)]
pub struct SmoModel {
    pub cfg: OpticalConfig,
    pub target: TargetPattern,
    pub pupil: Pupil,
    pub imager: AbbeImager,
}

impl SmoModel {
    pub fn new(cfg: &OpticalConfig, target: &TargetPattern) -> Result<Self> {
        cfg.validate()?;
        check_shape("SmoModel target", (cfg.n_mask, cfg.n_mask), target.pixels.dim())?;
        let pupil = build_pupil(cfg);
        let imager = AbbeImager::new(cfg, &pupil)?;
        Ok(SmoModel {
            cfg: cfg.clone(),
            target: target.clone(),
            pupil,
            imager,
        })
    }

    pub fn check_params(&self, theta_j: &ParamField, theta_m: &ParamField) -> Result<()> {
        if theta_j.kind != ParamKind::SourceParams || theta_m.kind != ParamKind::MaskParams {
            return Err(SmoError::Config("expected (source, mask) parameter fields".into()));
        }
        check_shape("theta_J", (self.cfg.n_source, self.cfg.n_source), theta_j.dim())?;
        check_shape("theta_M", (self.cfg.n_mask, self.cfg.n_mask), theta_m.dim())
    }

    pub fn evaluate(&self, theta_j: &ParamField, theta_m: &ParamField) -> Result<SmoEval> {
        self.check_params(theta_j, theta_m)?;
        let source = activate_source(theta_j, &self.cfg)?;
        let mask = activate_mask(theta_m, &self.cfg)?;
        let abbe = self.imager.forward(&source, &mask)?;
        let cfg = &self.cfg;
        let nominal = resist(&abbe.aerial, cfg);
        let min = resist(&abbe.aerial.scaled(cfg.dose_min * cfg.dose_min), cfg);
        let max = resist(&abbe.aerial.scaled(cfg.dose_max * cfg.dose_max), cfg);
        let l2 = squared_error(&nominal.values, &self.target);
        let pvb = squared_error(&max.values, &self.target) + squared_error(&min.values, &self.target);
        let loss = LossValue::new(l2, pvb, cfg.gamma, cfg.eta);
        if !loss.total.is_finite() {
            return Err(SmoError::Numeric(format!("non-finite loss {}", loss.total)));
        }
        Ok(SmoEval {
            loss,
            window: ProcessWindow { nominal, min, max },
            source,
            mask,
            abbe,
        })
    }

    pub fn loss(&self, theta_j: &ParamField, theta_m: &ParamField) -> Result<LossValue> {
        Ok(self.evaluate(theta_j, theta_m)?.loss)
    }
}

pub fn loss_smo(
    theta_j: &ParamField,
    theta_m: &ParamField,
    cfg: &OpticalConfig,
    target: &TargetPattern,
) -> Result<LossValue> {
    SmoModel::new(cfg, target)?.loss(theta_j, theta_m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn target(n: usize, seed: u64) -> TargetPattern {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TargetPattern::from_pixels(Array2::from_shape_fn((n, n), |_| u8::from(rng.gen_bool(0.4))), 1.0).unwrap()
    }

    #[test]
    fn l2_basic_cases() {
        let t = target(8, 1);
        let exact = ResistImage { values: t.as_f64() };
        assert_eq!(loss_l2(&exact, &t).unwrap(), 0.0);

        let zero = TargetPattern::from_pixels(Array2::zeros((8, 8)), 1.0).unwrap();
        let ones = ResistImage {
            values: Array2::ones((8, 8)),
        };
        assert_eq!(loss_l2(&ones, &zero).unwrap(), 64.0);
    }

    #[test]
    fn l2_matches_scalar_loop() {
        let t = target(8, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = ResistImage {
            values: Array2::from_shape_fn((8, 8), |_| rng.gen()),
        };
        let mut want = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                let d = z.values[[i, j]] - t.pixels[[i, j]] as f64;
                want += d * d;
            }
        }
        assert!((loss_l2(&z, &t).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn pvb_cases() {
        let t = target(8, 3);
        let exact = ResistImage { values: t.as_f64() };
        assert_eq!(loss_pvb(&exact, &exact, &t).unwrap(), 0.0);

        let mut off = t.as_f64();
        for k in 0..5 {
            off[[k, k]] = 1.0 - off[[k, k]];
        }
        let off = ResistImage { values: off };
        assert_eq!(loss_pvb(&exact, &off, &t).unwrap(), 5.0);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = ResistImage {
            values: Array2::from_shape_fn((8, 8), |_| rng.gen()),
        };
        let b = ResistImage {
            values: Array2::from_shape_fn((8, 8), |_| rng.gen()),
        };
        let want = loss_l2(&a, &t).unwrap() + loss_l2(&b, &t).unwrap();
        assert!((loss_pvb(&a, &b, &t).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let t = target(8, 4);
        let z = ResistImage {
            values: Array2::zeros((4, 4)),
        };
        assert!(matches!(loss_l2(&z, &t), Err(SmoError::Shape { .. })));
    }

    #[test]
    fn weights_combine() {
        let v = LossValue::new(2.0, 3.0, 1000.0, 3000.0);
        assert_eq!(v.total, 11000.0);
        let v = LossValue::new(2.0, 3.0, 0.0, 0.0);
        assert_eq!(v.total, 0.0);
    }
}
