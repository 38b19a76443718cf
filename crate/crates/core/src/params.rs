//! Optimization variables and their sigmoid activation into physical grids.

use ndarray::{Array2, Zip};

use crate::config::OpticalConfig;
use crate::error::{check_shape, Result, SmoError};
use crate::target::TargetPattern;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    SourceParams,
    MaskParams,
}

/// Unconstrained real-valued parameters, θ_J for the source or θ_M for the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamField {
    pub values: Array2<f64>,
    pub kind: ParamKind,
}

impl ParamField {
    pub fn new(values: Array2<f64>, kind: ParamKind, cfg: &OpticalConfig) -> Result<Self> {
        let n = match kind {
            ParamKind::SourceParams => cfg.n_source,
            ParamKind::MaskParams => cfg.n_mask,
        };
        check_shape("ParamField::new", (n, n), values.dim())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SmoError::Numeric("parameter field has non-finite entries".into()));
        }
        Ok(ParamField { values, kind })
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }
}

/// Activated source: per-pixel intensities and their σ-unit pupil coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceGrid {
    pub intensities: Array2<f64>,
    /// `(x, y)` in σ units; x grows with the column, y with the row.
    pub coords: Array2<(f64, f64)>,
}

impl SourceGrid {
    pub fn new(intensities: Array2<f64>) -> Result<Self> {
        let (r, c) = intensities.dim();
        if r != c || r < 1 || r % 2 == 0 {
            return Err(SmoError::Config(format!(
                "source grid must be square with odd side, got {r}x{c}"
            )));
        }
        if intensities.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(SmoError::Validation("source intensities must lie in [0,1]".into()));
        }
        Ok(SourceGrid {
            coords: source_coords(r),
            intensities,
        })
    }

    /// A single on-axis point of unit intensity.
    pub fn on_axis(n_source: usize) -> Result<Self> {
        let mut j = Array2::zeros((n_source, n_source));
        j[[n_source / 2, n_source / 2]] = 1.0;
        Self::new(j)
    }

    pub fn side(&self) -> usize {
        self.intensities.nrows()
    }
}

/// σ-unit coordinates of an `n`x`n` source grid spanning [-1, 1]².
pub fn source_coords(n: usize) -> Array2<(f64, f64)> {
    let step = if n > 1 { 2.0 / (n - 1) as f64 } else { 0.0 };
    let half = (n / 2) as f64;
    Array2::from_shape_fn((n, n), |(i, j)| ((j as f64 - half) * step, (i as f64 - half) * step))
}

/// Grayscale mask transmission in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct MaskGrid {
    pub transmission: Array2<f64>,
}

impl MaskGrid {
    pub fn new(transmission: Array2<f64>) -> Result<Self> {
        if transmission.nrows() != transmission.ncols() {
            return Err(SmoError::Config("mask grid must be square".into()));
        }
        Ok(MaskGrid { transmission })
    }

    pub fn side(&self) -> usize {
        self.transmission.nrows()
    }

    /// Binary view, thresholded at 0.5.
    pub fn binary(&self) -> Array2<u8> {
        self.transmission.mapv(|v| u8::from(v >= 0.5))
    }

    pub fn scaled(&self, factor: f64) -> MaskGrid {
        MaskGrid {
            transmission: &self.transmission * factor,
        }
    }
}

pub fn init_mask_params(target: &TargetPattern, cfg: &OpticalConfig) -> Result<ParamField> {
    check_shape("init_mask_params", (cfg.n_mask, cfg.n_mask), target.pixels.dim())?;
    let m0 = cfg.m0;
    Ok(ParamField {
        values: target.pixels.mapv(|p| if p == 1 { m0 } else { -m0 }),
        kind: ParamKind::MaskParams,
    })
}

fn activate(theta: &Array2<f64>, steepness: f64) -> Result<Array2<f64>> {
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(SmoError::Numeric("cannot activate non-finite parameters".into()));
    }
    let mut out = Array2::zeros(theta.dim());
    Zip::from(&mut out)
        .and(theta)
        .for_each(|o, &t| *o = sigmoid(steepness * t));
    Ok(out)
}

pub fn activate_mask(theta: &ParamField, cfg: &OpticalConfig) -> Result<MaskGrid> {
    if theta.kind != ParamKind::MaskParams {
        return Err(SmoError::Config("activate_mask needs mask parameters".into()));
    }
    MaskGrid::new(activate(&theta.values, cfg.alpha_m)?)
}

pub fn activate_source(theta: &ParamField, cfg: &OpticalConfig) -> Result<SourceGrid> {
    if theta.kind != ParamKind::SourceParams {
        return Err(SmoError::Config("activate_source needs source parameters".into()));
    }
    SourceGrid::new(activate(&theta.values, cfg.alpha_j)?)
}
