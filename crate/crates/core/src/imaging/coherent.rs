//! Band-limited evaluation of sums of coherent images.
//!
//! Both Abbe source points and Hopkins SOCS kernels reduce to the same
//! primitive: filter the mask spectrum O by a sparse set of frequency bins
//! (weights W), inverse transform, and take |·|². If every filter lives within
//! `extent` bins of DC, each |A|² is band-limited to `2 * extent` bins, so it
//! is sampled exactly on any grid of side `m >= 4 * extent + 2`. The engine
//! evaluates fields on that coarse grid and band-limited interpolates the
//! summed intensity back to the mask grid, which is exact in exact arithmetic.
//! When the band does not fit below the mask grid, `m == n` and no resampling
//! takes place.

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::fft::{signed_index, to_complex, wrap_index, Fft2};

/// A sparse frequency-domain filter on the mask grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFilter {
    /// Bins `(row, col)` in FFT order on the `n`-grid.
    pub bins: Vec<(usize, usize)>,
    /// Complex weight per bin; `None` means a binary (all-ones) filter.
    pub weights: Option<Vec<Complex64>>,
}

impl SpectralFilter {
    pub fn binary(bins: Vec<(usize, usize)>) -> Self {
        SpectralFilter { bins, weights: None }
    }

    #[inline]
    fn weight(&self, i: usize) -> Complex64 {
        match &self.weights {
            Some(w) => w[i],
            None => Complex64::new(1.0, 0.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoherentEngine {
    n: usize,
    m: usize,
    fft_n: Fft2,
    fft_m: Fft2,
}

fn fast_size_at_least(min: usize) -> usize {
    let mut best = usize::MAX;
    let mut p2 = 1usize;
    while p2 < 4 * min {
        for mult in [1usize, 3, 5] {
            let s = p2 * mult;
            if s >= min && s.is_multiple_of(2) && s < best {
                best = s;
            }
        }
        p2 *= 2;
    }
    best
}

impl CoherentEngine {
    /// `extent` is the largest |signed bin index| (per axis) any filter uses.
    pub fn new(n: usize, extent: usize) -> Self {
        let needed = 4 * extent + 2;
        let m = if needed >= n {
            n
        } else {
            fast_size_at_least(needed).min(n)
        };
        CoherentEngine {
            n,
            m,
            fft_n: Fft2::new(n),
            fft_m: if m == n { Fft2::new(n) } else { Fft2::new(m) },
        }
    }

    /// Engine without resampling; every field is evaluated on the mask grid.
    pub fn full_grid(n: usize) -> Self {
        let fft = Fft2::new(n);
        CoherentEngine {
            n,
            m: n,
            fft_n: fft.clone(),
            fft_m: fft,
        }
    }

    pub fn mask_side(&self) -> usize {
        self.n
    }

    pub fn coarse_side(&self) -> usize {
        self.m
    }

    pub fn is_resampled(&self) -> bool {
        self.m != self.n
    }

    /// Largest |signed index| on either axis over a set of bins.
    pub fn extent_of(bins: &[(usize, usize)], n: usize) -> usize {
        bins.iter()
            .map(|&(r, c)| signed_index(r, n).unsigned_abs().max(signed_index(c, n).unsigned_abs()) as usize)
            .max()
            .unwrap_or(0)
    }

    #[inline]
    fn coarse(&self, (r, c): (usize, usize)) -> (usize, usize) {
        if self.m == self.n {
            (r, c)
        } else {
            (
                wrap_index(signed_index(r, self.n), self.m),
                wrap_index(signed_index(c, self.n), self.m),
            )
        }
    }

    /// Unnormalized forward transform of a real mask.
    pub fn mask_spectrum(&self, mask: &Array2<f64>) -> Array2<Complex64> {
        let mut o = to_complex(mask);
        self.fft_n.forward(&mut o);
        o
    }

    /// Coherent field A = IFFT(W ⊙ O) sampled on the coarse grid.
    pub fn field(&self, spectrum: &Array2<Complex64>, filter: &SpectralFilter) -> Array2<Complex64> {
        let mut a = Array2::<Complex64>::zeros((self.m, self.m));
        for (i, &bin) in filter.bins.iter().enumerate() {
            a[self.coarse(bin)] = filter.weight(i) * spectrum[bin];
        }
        self.fft_m.inverse(&mut a);
        let scale = 1.0 / (self.n * self.n) as f64;
        a.mapv_inplace(|v| v * scale);
        a
    }

    /// Band-limited interpolation of a coarse-grid real image to the mask grid.
    pub fn upsample(&self, coarse: &Array2<f64>) -> Array2<f64> {
        if self.m == self.n {
            return coarse.clone();
        }
        let (m, n) = (self.m, self.n);
        let mut f = to_complex(coarse);
        self.fft_m.forward(&mut f);
        let mut big = Array2::<Complex64>::zeros((n, n));
        let lim = (m / 2) as i64;
        for r in 0..m {
            let sr = signed_index(r, m);
            if sr.abs() >= lim {
                continue;
            }
            for c in 0..m {
                let sc = signed_index(c, m);
                if sc.abs() >= lim {
                    continue;
                }
                big[[wrap_index(sr, n), wrap_index(sc, n)]] = f[[r, c]];
            }
        }
        self.fft_n.inverse(&mut big);
        let scale = 1.0 / (m * m) as f64;
        big.mapv(|v| v.re * scale)
    }

    /// Transpose of [`CoherentEngine::upsample`]: pulls a mask-grid cotangent
    /// back onto the coarse grid.
    pub fn upsample_adjoint(&self, g: &Array2<f64>) -> Array2<f64> {
        if self.m == self.n {
            return g.clone();
        }
        let (m, n) = (self.m, self.n);
        let mut big = to_complex(g);
        self.fft_n.inverse(&mut big);
        let mut small = Array2::<Complex64>::zeros((m, m));
        let lim = (m / 2) as i64;
        for r in 0..m {
            let sr = signed_index(r, m);
            if sr.abs() >= lim {
                continue;
            }
            for c in 0..m {
                let sc = signed_index(c, m);
                if sc.abs() >= lim {
                    continue;
                }
                small[[r, c]] = big[[wrap_index(sr, n), wrap_index(sc, n)]];
            }
        }
        self.fft_m.forward(&mut small);
        let scale = 1.0 / (m * m) as f64;
        small.mapv(|v| v.re * scale)
    }

    /// Back-propagate a coarse-grid cotangent `g` of |A|² through the field of
    /// `filter`: returns per-bin spectral contributions (aligned with
    /// `filter.bins`) that, accumulated with [`CoherentEngine::scatter`] and
    /// passed to [`CoherentEngine::mask_gradient`], give ∂⟨g, |A|²⟩/∂M.
    pub fn field_adjoint(&self, field: &Array2<Complex64>, g: &Array2<f64>, filter: &SpectralFilter) -> Vec<Complex64> {
        let mut b = Array2::<Complex64>::zeros((self.m, self.m));
        Zip::from(&mut b).and(field).and(g).for_each(|b, &a, &gv| *b = a * gv);
        self.fft_m.forward(&mut b);
        filter
            .bins
            .iter()
            .enumerate()
            .map(|(i, &bin)| filter.weight(i).conj() * b[self.coarse(bin)])
            .collect()
    }

    /// Add `coef * contrib` into a mask-grid spectrum accumulator.
    pub fn scatter(acc: &mut Array2<Complex64>, filter: &SpectralFilter, contrib: &[Complex64], coef: f64) {
        for (&bin, &v) in filter.bins.iter().zip(contrib) {
            acc[bin] += v * coef;
        }
    }

    /// Real-space mask gradient from an accumulated spectrum: 2·Re(IFFT(Y)).
    pub fn mask_gradient(&self, mut acc: Array2<Complex64>) -> Array2<f64> {
        self.fft_n.inverse(&mut acc);
        let scale = 2.0 / (self.n * self.n) as f64;
        acc.mapv(|v| v.re * scale)
    }
}

pub(crate) fn intensity(field: &Array2<Complex64>) -> Array2<f64> {
    field.mapv(|a| a.norm_sqr())
}

pub(crate) fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    Zip::from(a).and(b).fold(0.0, |acc, &x, &y| acc + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disk_bins(n: usize, radius: f64, shift: (i64, i64)) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for r in 0..n {
            for c in 0..n {
                let y = (signed_index(r, n) + shift.0) as f64;
                let x = (signed_index(c, n) + shift.1) as f64;
                if (x * x + y * y).sqrt() <= radius {
                    v.push((r, c));
                }
            }
        }
        v
    }

    #[test]
    fn coarse_path_matches_full_grid() {
        let n = 64;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mask = Array2::from_shape_fn((n, n), |_| rng.gen::<f64>());
        let filters: Vec<SpectralFilter> = [(0, 0), (2, -3), (-3, 1)]
            .iter()
            .map(|&s| SpectralFilter::binary(disk_bins(n, 3.2, s)))
            .collect();
        let extent = filters
            .iter()
            .map(|f| CoherentEngine::extent_of(&f.bins, n))
            .max()
            .unwrap();
        let coarse = CoherentEngine::new(n, extent);
        assert!(coarse.is_resampled());
        let full = CoherentEngine::full_grid(n);

        let oc = coarse.mask_spectrum(&mask);
        let of = full.mask_spectrum(&mask);
        let mut ic = Array2::zeros((coarse.coarse_side(), coarse.coarse_side()));
        let mut ifl = Array2::zeros((n, n));
        for f in &filters {
            ic = ic + intensity(&coarse.field(&oc, f));
            ifl = ifl + intensity(&full.field(&of, f));
        }
        let up = coarse.upsample(&ic);
        let max = ifl.iter().cloned().fold(0.0, f64::max);
        for (a, b) in up.iter().zip(ifl.iter()) {
            assert!((a - b).abs() < 1e-12 * max, "{a} vs {b}");
        }
    }

    #[test]
    fn upsample_adjoint_is_transpose() {
        let n = 48;
        let eng = CoherentEngine::new(n, 3);
        let m = eng.coarse_side();
        assert!(m < n);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // a band-limited coarse image: an intensity of a filtered field
        let mask = Array2::from_shape_fn((n, n), |_| rng.gen::<f64>());
        let f = SpectralFilter::binary(disk_bins(n, 2.5, (1, 0)));
        let x = intensity(&eng.field(&eng.mask_spectrum(&mask), &f));
        let g = Array2::from_shape_fn((n, n), |_| rng.gen::<f64>() - 0.5);
        let lhs = dot(&g, &eng.upsample(&x));
        let rhs = dot(&eng.upsample_adjoint(&g), &x);
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn field_adjoint_matches_finite_differences() {
        let n = 32;
        let eng = CoherentEngine::new(n, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mask = Array2::from_shape_fn((n, n), |_| rng.gen::<f64>());
        let bins = disk_bins(n, 3.0, (1, -1));
        let weights: Vec<Complex64> = bins.iter().map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
        let filt = SpectralFilter {
            bins,
            weights: Some(weights),
        };
        let m = eng.coarse_side();
        let g = Array2::from_shape_fn((m, m), |_| rng.gen::<f64>() - 0.5);
        let objective = |mk: &Array2<f64>| dot(&g, &intensity(&eng.field(&eng.mask_spectrum(mk), &filt)));

        let field = eng.field(&eng.mask_spectrum(&mask), &filt);
        let contrib = eng.field_adjoint(&field, &g, &filt);
        let mut acc = Array2::zeros((n, n));
        CoherentEngine::scatter(&mut acc, &filt, &contrib, 1.0);
        let grad = eng.mask_gradient(acc);

        let h = 1e-5;
        for &(i, j) in &[(0, 0), (5, 17), (31, 2), (16, 16)] {
            let mut p = mask.clone();
            p[[i, j]] += h;
            let mut q = mask.clone();
            q[[i, j]] -= h;
            let fd = (objective(&p) - objective(&q)) / (2.0 * h);
            assert!(
                (fd - grad[[i, j]]).abs() < 1e-8 * fd.abs().max(1e-3),
                "{fd} vs {}",
                grad[[i, j]]
            );
        }
    }

    #[test]
    fn fast_sizes() {
        assert_eq!(fast_size_at_least(30), 32);
        assert_eq!(fast_size_at_least(34), 40);
        assert_eq!(fast_size_at_least(46), 48);
    }
}
