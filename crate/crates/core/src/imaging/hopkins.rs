//! Hopkins imaging: transmission cross-coefficients, their truncated
//! eigendecomposition (SOCS) and the resulting sum of coherent kernels.

use std::collections::HashMap;

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;

use super::abbe::AbbeImager;
use super::coherent::{intensity, CoherentEngine, SpectralFilter};
use super::parallel::{map_ordered, map_reduce};
use super::pupil::Pupil;
use super::AerialImage;
use crate::config::OpticalConfig;
use crate::error::{check_shape, Result, SmoError};
use crate::fft::Fft2;
use crate::params::{MaskGrid, SourceGrid};

/// TCC restricted to the frequency window where any shifted pupil passes light.
#[derive(Debug, Clone)]
pub struct TccMatrix {
    pub entries: DMatrix<Complex64>,
    /// FFT-order bins `(row, col)` on the mask grid, one per matrix row.
    pub band_index: Vec<(usize, usize)>,
    pub n_mask: usize,
}

impl TccMatrix {
    pub fn dim(&self) -> usize {
        self.band_index.len()
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|v| v.re).sum()
    }

    /// max |T - Tᴴ| / max |T|
    pub fn hermitian_residual(&self) -> f64 {
        let d = &self.entries - self.entries.adjoint();
        let num = d.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let den = self.entries.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }
}

pub fn build_tcc(source: &SourceGrid, pupil: &Pupil, cfg: &OpticalConfig) -> Result<TccMatrix> {
    let imager = AbbeImager::new(cfg, pupil)?;
    check_shape(
        "build_tcc source",
        (cfg.n_source, cfg.n_source),
        source.intensities.dim(),
    )?;
    let groups = imager.groups();
    let mut weight = vec![0.0; groups.len()];
    let mut total = 0.0;
    for (k, g) in groups.iter().enumerate() {
        for &flat in &g.members {
            let j = source.intensities.as_slice().expect("standard layout")[flat];
            if j > cfg.source_threshold {
                weight[k] += j;
                total += j;
            }
        }
    }
    if !(total > 0.0) {
        return Err(SmoError::DarkSource {
            threshold: cfg.source_threshold,
        });
    }

    let mut band: Vec<(usize, usize)> = groups
        .iter()
        .zip(&weight)
        .filter(|(_, &w)| w > 0.0)
        .flat_map(|(g, _)| g.filter.bins.iter().copied())
        .collect();
    band.sort_unstable();
    band.dedup();
    let pos: HashMap<(usize, usize), usize> = band.iter().enumerate().map(|(i, &b)| (b, i)).collect();

    let d = band.len();
    let mut entries = DMatrix::<Complex64>::zeros(d, d);
    for (g, &w) in groups.iter().zip(&weight) {
        if w <= 0.0 {
            continue;
        }
        let c = Complex64::new(w / total, 0.0);
        let idx: Vec<usize> = g.filter.bins.iter().map(|b| pos[b]).collect();
        for &a in &idx {
            for &b in &idx {
                entries[(a, b)] += c;
            }
        }
    }
    Ok(TccMatrix {
        entries,
        band_index: band,
        n_mask: cfg.n_mask,
    })
}

/// Truncated SOCS decomposition of a TCC.
#[derive(Debug, Clone)]
pub struct SocsKernels {
    /// Every TCC eigenvalue, descending.
    pub eigenvalues: Vec<f64>,
    /// Kernel spectra over `band_index`, one per retained eigenpair.
    pub spectra: Vec<Vec<Complex64>>,
    pub band_index: Vec<(usize, usize)>,
    pub n_mask: usize,
    pub q_used: usize,
}

impl SocsKernels {
    /// Spatial kernel φ_q on the mask grid, so that φ_q ⊗ M = IFFT(Φ_q ⊙ O).
    pub fn kernel(&self, q: usize) -> Array2<Complex64> {
        let n = self.n_mask;
        let mut a = Array2::<Complex64>::zeros((n, n));
        for (&bin, &v) in self.band_index.iter().zip(&self.spectra[q]) {
            a[bin] = v;
        }
        Fft2::new(n).inverse(&mut a);
        let s = 1.0 / (n * n) as f64;
        a.mapv(|v| v * s)
    }

    pub fn kernels(&self) -> Vec<Array2<Complex64>> {
        (0..self.q_used).map(|q| self.kernel(q)).collect()
    }

    /// Fraction of the TCC trace captured by the retained eigenvalues.
    pub fn energy_fraction(&self) -> f64 {
        let all: f64 = self.eigenvalues.iter().sum();
        let kept: f64 = self.eigenvalues[..self.q_used].iter().sum();
        if all == 0.0 {
            0.0
        } else {
            kept / all
        }
    }
}

pub fn socs_decompose(tcc: &TccMatrix, q: usize) -> SocsKernels {
    let d = tcc.dim();
    let q_used = if q > d {
        log::warn!("requested {q} SOCS kernels but the TCC has dimension {d}; clamping");
        d
    } else {
        q
    };
    let eig = tcc.entries.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let spectra = order[..q_used]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    SocsKernels {
        eigenvalues,
        spectra,
        band_index: tcc.band_index.clone(),
        n_mask: tcc.n_mask,
        q_used,
    }
}

/// Reusable Hopkins imaging setup built from SOCS kernels.
#[derive(Debug, Clone)]
pub struct HopkinsImager {
    engine: CoherentEngine,
    filters: Vec<SpectralFilter>,
    kappa: Vec<f64>,
    n_mask: usize,
    width: usize,
    deterministic: bool,
}

impl HopkinsImager {
    pub fn new(kernels: &SocsKernels, width: usize, deterministic: bool) -> Self {
        let n = kernels.n_mask;
        let extent = CoherentEngine::extent_of(&kernels.band_index, n);
        let filters = kernels.spectra[..kernels.q_used]
            .iter()
            .map(|s| SpectralFilter {
                bins: kernels.band_index.clone(),
                weights: Some(s.clone()),
            })
            .collect();
        HopkinsImager {
            engine: CoherentEngine::new(n, extent),
            filters,
            kappa: kernels.eigenvalues[..kernels.q_used].to_vec(),
            n_mask: n,
            width: width.max(1),
            deterministic,
        }
    }

    pub fn without_resampling(mut self) -> Self {
        self.engine = CoherentEngine::full_grid(self.n_mask);
        self
    }

    pub fn aerial(&self, mask: &MaskGrid) -> Result<AerialImage> {
        let n = self.n_mask;
        check_shape("hopkins mask", (n, n), mask.transmission.dim())?;
        if self.filters.is_empty() {
            return Ok(AerialImage {
                intensity: Array2::zeros((n, n)),
            });
        }
        let m = self.engine.coarse_side();
        let spectrum = self.engine.mask_spectrum(&mask.transmission);
        let coarse = map_reduce(
            self.filters.len(),
            self.width,
            self.deterministic,
            |q| intensity(&self.engine.field(&spectrum, &self.filters[q])) * self.kappa[q],
            Array2::zeros((m, m)),
            |a, b| a + b,
        );
        Ok(AerialImage {
            intensity: self.engine.upsample(&coarse),
        })
    }

    /// Per-kernel coherent intensities κ_q |φ_q ⊗ M|², in kernel order.
    pub fn kernel_images(&self, mask: &MaskGrid) -> Result<Vec<Array2<f64>>> {
        check_shape("hopkins mask", (self.n_mask, self.n_mask), mask.transmission.dim())?;
        let spectrum = self.engine.mask_spectrum(&mask.transmission);
        Ok(map_ordered(self.filters.len(), self.width, |q| {
            self.engine
                .upsample(&(intensity(&self.engine.field(&spectrum, &self.filters[q])) * self.kappa[q]))
        }))
    }
}

pub fn hopkins_aerial(kernels: &SocsKernels, mask: &MaskGrid) -> Result<AerialImage> {
    HopkinsImager::new(kernels, 1, true).aerial(mask)
}
