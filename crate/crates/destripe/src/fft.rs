//! Minimal 2D FFT on row-major complex buffers, built on rustfft.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Forward/inverse 2D transforms for one slice size. The inverse includes
/// the 1/(nx*ny) normalization so forward-then-inverse is the identity.
pub(crate) struct Fft2 {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            nx,
            ny,
            fwd_x: planner.plan_fft_forward(nx),
            inv_x: planner.plan_fft_inverse(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_y: planner.plan_fft_inverse(ny),
        }
    }

    fn transform_rows(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        for row in data.chunks_exact_mut(self.nx) {
            fft.process_with_scratch(row, &mut scratch);
        }
    }

    fn transform_cols(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let mut col = vec![Complex64::default(); self.ny];
        for x in 0..self.nx {
            for y in 0..self.ny {
                col[y] = data[y * self.nx + x];
            }
            fft.process_with_scratch(&mut col, &mut scratch);
            for y in 0..self.ny {
                data[y * self.nx + x] = col[y];
            }
        }
    }

    /// In-place forward transform of an ny-by-nx row-major buffer.
    pub fn forward(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.nx * self.ny);
        self.transform_rows(data, &self.fwd_x);
        self.transform_cols(data, &self.fwd_y);
    }

    /// In-place inverse transform, normalized.
    pub fn inverse(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.nx * self.ny);
        self.transform_rows(data, &self.inv_x);
        self.transform_cols(data, &self.inv_y);
        let scale = 1.0 / (self.nx * self.ny) as f64;
        for v in data {
            *v *= scale;
        }
    }
}

/// Signed frequency coordinate of bin `j` on an axis of length `n`
/// (0, 1, ..., n/2, -(n/2 - 1), ..., -1 for even n).
#[inline]
pub(crate) fn signed_freq(j: usize, n: usize) -> f64 {
    if j <= n / 2 {
        j as f64
    } else {
        j as f64 - n as f64
    }
}
