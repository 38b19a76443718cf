//! Square 2-D FFTs over row-major `Array2<Complex64>` buffers.
//!
//! Both directions are unnormalized, matching rustfft.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({0}x{0})", self.n)
    }
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn forward(&self, a: &mut Array2<Complex64>) {
        self.run(a, &self.forward);
    }

    pub fn inverse(&self, a: &mut Array2<Complex64>) {
        self.run(a, &self.inverse);
    }

    fn run(&self, a: &mut Array2<Complex64>, plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(a.dim(), (n, n), "Fft2 size mismatch");
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        {
            let buf = a.as_slice_mut().expect("contiguous array");
            plan.process_with_scratch(buf, &mut scratch);
        }
        let mut t = transpose(a);
        plan.process_with_scratch(t.as_slice_mut().expect("contiguous array"), &mut scratch);
        *a = transpose(&t);
    }
}

fn transpose(a: &Array2<Complex64>) -> Array2<Complex64> {
    let n = a.nrows();
    let src = a.as_slice().expect("contiguous array");
    let mut out = vec![Complex64::default(); n * n];
    const B: usize = 16;
    for ib in (0..n).step_by(B) {
        for jb in (0..n).step_by(B) {
            for i in ib..(ib + B).min(n) {
                for j in jb..(jb + B).min(n) {
                    out[j * n + i] = src[i * n + j];
                }
            }
        }
    }
    Array2::from_shape_vec((n, n), out).expect("square buffer")
}

/// Signed frequency of FFT index `k` on an `n`-point grid, in (-n/2, n/2].
#[inline]
pub fn signed_index(k: usize, n: usize) -> i64 {
    let k = k as i64;
    let n = n as i64;
    if k > n / 2 {
        k - n
    } else {
        k
    }
}

/// FFT index of signed frequency `s` on an `n`-point grid (periodic).
#[inline]
pub fn wrap_index(s: i64, n: usize) -> usize {
    s.rem_euclid(n as i64) as usize
}

pub fn to_complex(a: &Array2<f64>) -> Array2<Complex64> {
    a.mapv(|v| Complex64::new(v, 0.0))
}
