//! Forward optical models: pupil, Abbe and Hopkins aerial images, resist
//! thresholding and dose-conditioned imaging.
//!
//! Aerial intensity is normalized by the total effective source energy Σ j_σ,
//! so a clear-field mask under any source images to 1.

pub mod abbe;
pub mod coherent;
pub mod hopkins;
pub mod parallel;
pub mod pupil;

use ndarray::Array2;

pub use abbe::{abbe_aerial, AbbeForward, AbbeGradient, AbbeImager};
pub use hopkins::{build_tcc, hopkins_aerial, socs_decompose, HopkinsImager, SocsKernels, TccMatrix};
pub use pupil::{build_pupil, Pupil};

use crate::config::OpticalConfig;
use crate::error::Result;
use crate::params::{activate_mask, activate_source, sigmoid, ParamField};

#[derive(Debug, Clone, PartialEq)]
pub struct AerialImage {
    pub intensity: Array2<f64>,
}

impl AerialImage {
    pub fn scaled(&self, factor: f64) -> AerialImage {
        AerialImage {
            intensity: &self.intensity * factor,
        }
    }
}

/// Continuous resist image with values in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ResistImage {
    pub values: Array2<f64>,
}

impl ResistImage {
    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }
}

/// Sigmoid resist threshold Z = σ(β (I − I_tr)).
pub fn resist(aerial: &AerialImage, cfg: &OpticalConfig) -> ResistImage {
    let (beta, thr) = (cfg.resist_steepness, cfg.resist_threshold);
    ResistImage {
        values: aerial.intensity.mapv(|i| sigmoid(beta * (i - thr))),
    }
}

/// Resist images at nominal, minimum and maximum dose.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessWindow {
    pub nominal: ResistImage,
    pub min: ResistImage,
    pub max: ResistImage,
}

/// Run the three dose conditions through independent Abbe evaluations of the
/// dose-scaled masks.
pub fn forward_process_window(
    theta_j: &ParamField,
    theta_m: &ParamField,
    cfg: &OpticalConfig,
) -> Result<ProcessWindow> {
    let pupil = build_pupil(cfg);
    let imager = AbbeImager::new(cfg, &pupil)?;
    let source = activate_source(theta_j, cfg)?;
    let mask = activate_mask(theta_m, cfg)?;
    let nominal = imager.aerial(&source, &mask)?;
    let low = imager.aerial(&source, &mask.scaled(cfg.dose_min))?;
    let high = imager.aerial(&source, &mask.scaled(cfg.dose_max))?;
    Ok(ProcessWindow {
        nominal: resist(&nominal, cfg),
        min: resist(&low, cfg),
        max: resist(&high, cfg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resist_values() {
        let cfg = OpticalConfig::desk();
        let a = AerialImage {
            intensity: Array2::from_elem((4, 4), cfg.resist_threshold),
        };
        assert!(resist(&a, &cfg).values.iter().all(|&z| z == 0.5));

        let a = AerialImage {
            intensity: Array2::from_elem((4, 4), cfg.resist_threshold + 0.1),
        };
        // σ(3) = 1 / (1 + e^-3)
        let z = resist(&a, &cfg).values[[0, 0]];
        assert!((z - 0.952_574_126_822_433_4).abs() < 1e-12);

        let a = AerialImage {
            intensity: Array2::zeros((4, 4)),
        };
        let want = sigmoid(-cfg.resist_steepness * cfg.resist_threshold);
        let z = resist(&a, &cfg);
        assert!(z.values.iter().all(|&v| v == want));
        assert!(want < 1e-2);
    }
}
