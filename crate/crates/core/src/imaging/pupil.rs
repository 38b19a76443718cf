use ndarray::Array2;

use crate::config::OpticalConfig;
use crate::fft::{signed_index, wrap_index};

/// Ideal low-pass projection pupil on the mask frequency grid.
///
/// `passband` is stored in FFT order (DC at `[0, 0]`); use [`Pupil::centered`]
/// for a DC-centered view.
#[derive(Debug, Clone, PartialEq)]
pub struct Pupil {
    pub passband: Array2<u8>,
    /// NA/λ in 1/nm.
    pub cutoff: f64,
    /// Frequency bin spacing in 1/nm.
    pub freq_step: f64,
}

pub fn build_pupil(cfg: &OpticalConfig) -> Pupil {
    let n = cfg.n_mask;
    let df = cfg.freq_step();
    let cutoff = cfg.cutoff();
    if cutoff < df {
        log::warn!("pupil cutoff {cutoff:.3e}/nm is below one frequency bin ({df:.3e}/nm); images will be DC-only");
    }
    let passband = Array2::from_shape_fn((n, n), |(r, c)| {
        let fy = signed_index(r, n) as f64 * df;
        let fx = signed_index(c, n) as f64 * df;
        u8::from((fx * fx + fy * fy).sqrt() <= cutoff)
    });
    Pupil {
        passband,
        cutoff,
        freq_step: df,
    }
}

impl Pupil {
    pub fn side(&self) -> usize {
        self.passband.nrows()
    }

    /// Pupil value at signed bin `(ky, kx)`, periodic in the grid.
    #[inline]
    pub fn at(&self, ky: i64, kx: i64) -> bool {
        let n = self.side();
        self.passband[[wrap_index(ky, n), wrap_index(kx, n)]] == 1
    }

    pub fn in_band_count(&self) -> usize {
        self.passband.iter().filter(|&&v| v == 1).count()
    }

    /// Cutoff radius in bins.
    pub fn cutoff_bins(&self) -> f64 {
        self.cutoff / self.freq_step
    }

    /// DC-centered copy of the passband.
    pub fn centered(&self) -> Array2<u8> {
        let n = self.side();
        let h = n / 2;
        Array2::from_shape_fn((n, n), |(r, c)| self.passband[[(r + n - h) % n, (c + n - h) % n]])
    }

    /// Bins `(row, col)` in FFT order where the pupil shifted by a source point
    /// at bin offset `(sy, sx)` passes light, i.e. H(k + s) = 1.
    pub fn shifted_support(&self, sy: i64, sx: i64) -> Vec<(usize, usize)> {
        let n = self.side();
        let r = self.cutoff_bins().floor() as i64 + 1;
        let mut out = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if self.at(dy, dx) {
                    let ky = wrap_index(dy - sy, n);
                    let kx = wrap_index(dx - sx, n);
                    out.push((ky, kx));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Frequency-bin offset `(sy, sx)` of a source point at σ coordinates `(x, y)`,
/// rounded to the nearest bin.
pub fn source_shift_bins(x: f64, y: f64, cfg: &OpticalConfig) -> (i64, i64) {
    let scale = cfg.cutoff() / cfg.freq_step();
    ((y * scale).round() as i64, (x * scale).round() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dc_always_passes() {
        let p = build_pupil(&OpticalConfig::desk());
        assert_eq!(p.passband[[0, 0]], 1);
        let tiny = OpticalConfig {
            na: 0.01,
            ..OpticalConfig::desk()
        };
        let p = build_pupil(&tiny);
        assert_eq!(p.passband[[0, 0]], 1);
        assert_eq!(p.in_band_count(), 1);
    }

    #[test]
    fn cutoff_value() {
        let p = build_pupil(&OpticalConfig::desk());
        assert!((p.cutoff - 1.35 / 193.0).abs() < 1e-18);
        assert!((p.cutoff - 6.995e-3).abs() < 1e-6);
    }

    #[test]
    fn in_band_count_matches_enumeration() {
        let cfg = OpticalConfig::desk();
        let df = 1.0 / (128.0 * 4.0);
        let cut = 1.35 / 193.0;
        let mut count = 0;
        for i in -64i32..64 {
            for j in -64i32..64 {
                let f = (i as f64) * df;
                let g = (j as f64) * df;
                if (f * f + g * g).sqrt() <= cut {
                    count += 1;
                }
            }
        }
        assert_eq!(build_pupil(&cfg).in_band_count(), count);
        assert_eq!(count, 37);
    }

    #[test]
    fn shifted_support_matches_brute_force() {
        let p = build_pupil(&OpticalConfig::desk());
        let n = 128;
        let got = p.shifted_support(2, -3);
        let mut want = Vec::new();
        for r in 0..n {
            for c in 0..n {
                let ky = signed_index(r, n) + 2;
                let kx = signed_index(c, n) - 3;
                if p.at(ky, kx) {
                    want.push((r, c));
                }
            }
        }
        assert_eq!(got, want);
        assert_eq!(got.len(), p.in_band_count());
    }

    #[test]
    fn centered_view_is_symmetric() {
        let p = build_pupil(&OpticalConfig::desk());
        let c = p.centered();
        assert_eq!(c[[64, 64]], 1);
        for r in 1..128 {
            for k in 1..128 {
                assert_eq!(c[[r, k]], c[[128 - r, 128 - k]]);
            }
        }
    }
}
