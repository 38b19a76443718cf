//! Abbe imaging: intensity as the source-weighted sum of coherent images,
//! one per effective source point.
//!
//! Source points whose rounded frequency shift coincides produce identical
//! coherent fields, so they are grouped and evaluated once with their summed
//! weight. Groups are formed and reduced in ascending point-index order.

use std::collections::HashMap;

use ndarray::Array2;
use num_complex::Complex64;

use super::coherent::{dot, intensity, CoherentEngine, SpectralFilter};
use super::parallel::{map_ordered, map_reduce};
use super::pupil::{source_shift_bins, Pupil};
use super::AerialImage;
use crate::config::OpticalConfig;
use crate::error::{check_shape, Result, SmoError};
use crate::params::{source_coords, MaskGrid, SourceGrid};

/// Source points sharing one rounded frequency shift.
#[derive(Debug, Clone)]
pub struct ShiftGroup {
    /// `(sy, sx)` in frequency bins.
    pub shift: (i64, i64),
    pub filter: SpectralFilter,
    /// Flat (row-major) source indices, ascending.
    pub members: Vec<usize>,
}

/// Precomputed Abbe imaging setup for one optical configuration.
#[derive(Debug, Clone)]
pub struct AbbeImager {
    n_mask: usize,
    n_source: usize,
    threshold: f64,
    width: usize,
    deterministic: bool,
    engine: CoherentEngine,
    groups: Vec<ShiftGroup>,
    point_group: Vec<usize>,
}

/// Forward-pass state kept for the adjoint.
#[derive(Debug, Clone)]
pub struct AbbeForward {
    /// Per group: `Some(field)` if the group carries weight.
    pub(crate) fields: Vec<Option<Array2<Complex64>>>,
    pub(crate) group_weight: Vec<f64>,
    pub(crate) active: Vec<bool>,
    /// Σ j_σ over effective points.
    pub total_weight: f64,
    pub(crate) coarse_intensity: Array2<f64>,
    pub aerial: AerialImage,
}

/// Gradients of ⟨G, I⟩ with respect to mask transmission and raw source
/// intensities.
#[derive(Debug, Clone)]
pub struct AbbeGradient {
    pub wrt_mask: Array2<f64>,
    pub wrt_source: Array2<f64>,
}

impl AbbeImager {
    pub fn new(cfg: &OpticalConfig, pupil: &Pupil) -> Result<Self> {
        cfg.validate()?;
        check_shape("AbbeImager::new", (cfg.n_mask, cfg.n_mask), pupil.passband.dim())?;
        let coords = source_coords(cfg.n_source);
        let mut groups: Vec<ShiftGroup> = Vec::new();
        let mut index: HashMap<(i64, i64), usize> = HashMap::new();
        let mut point_group = Vec::with_capacity(coords.len());
        for (flat, &(x, y)) in coords.iter().enumerate() {
            let shift = source_shift_bins(x, y, cfg);
            let g = *index.entry(shift).or_insert_with(|| {
                groups.push(ShiftGroup {
                    shift,
                    filter: SpectralFilter::binary(pupil.shifted_support(shift.0, shift.1)),
                    members: Vec::new(),
                });
                groups.len() - 1
            });
            groups[g].members.push(flat);
            point_group.push(g);
        }
        let extent = groups
            .iter()
            .map(|g| CoherentEngine::extent_of(&g.filter.bins, cfg.n_mask))
            .max()
            .unwrap_or(0);
        Ok(AbbeImager {
            n_mask: cfg.n_mask,
            n_source: cfg.n_source,
            threshold: cfg.source_threshold,
            width: cfg.parallel_width,
            deterministic: cfg.deterministic,
            engine: CoherentEngine::new(cfg.n_mask, extent),
            groups,
            point_group,
        })
    }

    /// Same imager with every field evaluated on the full mask grid.
    pub fn without_resampling(mut self) -> Self {
        self.engine = CoherentEngine::full_grid(self.n_mask);
        self
    }

    pub fn with_parallel_width(mut self, width: usize) -> Self {
        self.width = width.max(1);
        self
    }

    pub fn with_deterministic(mut self, deterministic: bool) -> Self {
        self.deterministic = deterministic;
        self
    }

    pub fn groups(&self) -> &[ShiftGroup] {
        &self.groups
    }

    pub fn engine(&self) -> &CoherentEngine {
        &self.engine
    }

    /// Number of source points above the activity threshold.
    pub fn active_points(&self, source: &SourceGrid) -> usize {
        source.intensities.iter().filter(|&&j| j > self.threshold).count()
    }

    /// Number of distinct coherent fields needed for `source`.
    pub fn active_groups(&self, source: &SourceGrid) -> usize {
        let mut seen = vec![false; self.groups.len()];
        for (flat, &j) in source.intensities.iter().enumerate() {
            if j > self.threshold {
                seen[self.point_group[flat]] = true;
            }
        }
        seen.into_iter().filter(|&s| s).count()
    }

    fn check(&self, source: &SourceGrid, mask: &MaskGrid) -> Result<()> {
        check_shape("abbe source", (self.n_source, self.n_source), source.intensities.dim())?;
        check_shape("abbe mask", (self.n_mask, self.n_mask), mask.transmission.dim())
    }

    pub fn forward(&self, source: &SourceGrid, mask: &MaskGrid) -> Result<AbbeForward> {
        self.check(source, mask)?;
        let mut group_weight = vec![0.0; self.groups.len()];
        let mut active = vec![false; source.intensities.len()];
        let mut total = 0.0;
        for (flat, &j) in source.intensities.iter().enumerate() {
            if j > self.threshold {
                active[flat] = true;
                group_weight[self.point_group[flat]] += j;
                total += j;
            }
        }
        let m = self.engine.coarse_side();
        let spectrum = self.engine.mask_spectrum(&mask.transmission);
        if !(total > 0.0) {
            if self.threshold < 0.0 {
                return Ok(AbbeForward {
                    fields: vec![None; self.groups.len()],
                    group_weight,
                    active,
                    total_weight: 0.0,
                    coarse_intensity: Array2::zeros((m, m)),
                    aerial: AerialImage {
                        intensity: Array2::zeros((self.n_mask, self.n_mask)),
                    },
                });
            }
            return Err(SmoError::DarkSource {
                threshold: self.threshold,
            });
        }

        let fields: Vec<Option<Array2<Complex64>>> = map_ordered(self.groups.len(), self.width, |g| {
            (group_weight[g] > 0.0).then(|| self.engine.field(&spectrum, &self.groups[g].filter))
        });
        let inv_total = 1.0 / total;
        let coarse_intensity = map_reduce(
            fields.len(),
            self.width,
            self.deterministic,
            |g| match &fields[g] {
                Some(f) => intensity(f) * (group_weight[g] * inv_total),
                None => Array2::zeros((m, m)),
            },
            Array2::zeros((m, m)),
            |a, b| a + b,
        );
        let aerial = AerialImage {
            intensity: self.engine.upsample(&coarse_intensity),
        };
        Ok(AbbeForward {
            fields,
            group_weight,
            active,
            total_weight: total,
            coarse_intensity,
            aerial,
        })
    }

    pub fn aerial(&self, source: &SourceGrid, mask: &MaskGrid) -> Result<AerialImage> {
        Ok(self.forward(source, mask)?.aerial)
    }

    /// |A_σ|² of a single source point on the mask grid, without weighting.
    pub fn point_intensity(&self, point: usize, mask: &MaskGrid) -> Result<Array2<f64>> {
        check_shape("abbe mask", (self.n_mask, self.n_mask), mask.transmission.dim())?;
        let g = *self
            .point_group
            .get(point)
            .ok_or_else(|| SmoError::Config(format!("source point {point} out of range")))?;
        let spectrum = self.engine.mask_spectrum(&mask.transmission);
        let f = self.engine.field(&spectrum, &self.groups[g].filter);
        Ok(self.engine.upsample(&intensity(&f)))
    }

    /// Pull back a cotangent `g = ∂L/∂I` (mask grid) to the mask transmission
    /// and to every raw source intensity, including the normalization's
    /// quotient-rule term. Inactive points get zero gradient.
    pub fn backward(&self, fwd: &AbbeForward, g: &Array2<f64>) -> AbbeGradient {
        let n = self.n_mask;
        let mut wrt_source = Array2::zeros((self.n_source, self.n_source));
        if !(fwd.total_weight > 0.0) {
            return AbbeGradient {
                wrt_mask: Array2::zeros((n, n)),
                wrt_source,
            };
        }
        let gc = self.engine.upsample_adjoint(g);
        let base = dot(&gc, &fwd.coarse_intensity);
        let inv_total = 1.0 / fwd.total_weight;

        let per_group: Vec<Option<(Vec<Complex64>, f64)>> = map_ordered(self.groups.len(), self.width, |k| {
            fwd.fields[k].as_ref().map(|field| {
                let filt = &self.groups[k].filter;
                let contrib = self.engine.field_adjoint(field, &gc, filt);
                let d = dot(&gc, &intensity(field));
                (contrib, d)
            })
        });

        let mut acc = Array2::<Complex64>::zeros((n, n));
        let mut group_dot = vec![0.0; self.groups.len()];
        for (k, item) in per_group.iter().enumerate() {
            if let Some((contrib, d)) = item {
                CoherentEngine::scatter(
                    &mut acc,
                    &self.groups[k].filter,
                    contrib,
                    fwd.group_weight[k] * inv_total,
                );
                group_dot[k] = *d;
            }
        }
        let wrt_mask = self.engine.mask_gradient(acc);
        for (flat, v) in wrt_source.iter_mut().enumerate() {
            if fwd.active[flat] {
                *v = (group_dot[self.point_group[flat]] - base) * inv_total;
            }
        }
        AbbeGradient { wrt_mask, wrt_source }
    }
}

/// Abbe aerial image for one source/mask pair.
pub fn abbe_aerial(source: &SourceGrid, mask: &MaskGrid, pupil: &Pupil, cfg: &OpticalConfig) -> Result<AerialImage> {
    AbbeImager::new(cfg, pupil)?.aerial(source, mask)
}
