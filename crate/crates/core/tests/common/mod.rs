//! Oracles shared by the integration test targets.

use litho_smo::params::SourceGrid;
use litho_smo::OpticalConfig;
use ndarray::Array2;
use num_complex::Complex64;
use std::f64::consts::PI;

pub fn max_rel(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let num = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    num / b.iter().fold(0.0f64, |m, y| m.max(y.abs()))
}

fn signed(k: usize, n: usize) -> i64 {
    if k < n.div_ceil(2) {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Direct evaluation of the partially coherent imaging integral on the
/// discrete grid: for every pixel, sum over source points and both mask
/// frequencies, with a naive DFT of the mask and a pupil computed from
/// physical frequencies.
pub fn six_fold_sum(cfg: &OpticalConfig, source: &SourceGrid, mask: &Array2<f64>) -> Array2<f64> {
    let n = cfg.n_mask;
    let df = 1.0 / (n as f64 * cfg.pixel_nm);
    let cutoff = cfg.na / cfg.wavelength_nm;
    let freqs: Vec<(i64, i64)> = (0..n)
        .flat_map(|r| (0..n).map(move |c| (signed(r, n), signed(c, n))))
        .collect();
    let spectrum: Vec<Complex64> = freqs
        .iter()
        .map(|&(fy, fx)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for ((y, x), &m) in mask.indexed_iter() {
                let phase = -2.0 * PI * (fy as f64 * y as f64 + fx as f64 * x as f64) / n as f64;
                acc += Complex64::from_polar(m, phase);
            }
            acc
        })
        .collect();
    let pupil = |fy: i64, fx: i64| -> bool { ((fy as f64 * df).powi(2) + (fx as f64 * df).powi(2)).sqrt() <= cutoff };

    let mut image = Array2::<f64>::zeros((n, n));
    let mut total = 0.0;
    for ((i, j), &w) in source.intensities.indexed_iter() {
        if w <= cfg.source_threshold {
            continue;
        }
        total += w;
        let (sx, sy) = source.coords[[i, j]];
        let shift = |s: f64| (s * cutoff / df).round() as i64;
        let (oy, ox) = (shift(sy), shift(sx));
        let passed: Vec<usize> = (0..freqs.len())
            .filter(|&k| pupil(freqs[k].0 + oy, freqs[k].1 + ox))
            .collect();
        for ((y, x), px) in image.indexed_iter_mut() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &k1 in &passed {
                for &k2 in &passed {
                    let (f1, f2) = (freqs[k1], freqs[k2]);
                    let phase =
                        2.0 * PI * (((f1.0 - f2.0) * y as i64) as f64 + ((f1.1 - f2.1) * x as i64) as f64) / n as f64;
                    acc += spectrum[k1] * spectrum[k2].conj() * Complex64::from_polar(1.0, phase);
                }
            }
            *px += w * acc.re / (n * n * n * n) as f64;
        }
    }
    image / total
}
