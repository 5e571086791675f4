//! In-place n-dimensional complex FFT on row-major data with equal axis
//! lengths, built on rustfft. Forward is the unnormalized DFT; inverse
//! carries the 1/N^n factor, so `inverse(forward(x)) == x` up to roundoff.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub(crate) struct NdFft {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for NdFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NdFft").field("dim", &self.dim).field("n", &self.n).finish()
    }
}

impl NdFft {
    pub fn new(dim: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Self { dim, n, forward, inverse }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / (self.n.pow(self.dim as u32) as f64);
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Transform along every axis. The last axis is contiguous in
    /// row-major layout; other axes are gathered through a stride.
    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let total = n.pow(self.dim as u32);
        assert_eq!(data.len(), total, "field length does not match grid");
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];

        // contiguous axis
        for row in data.chunks_exact_mut(n) {
            fft.process_with_scratch(row, &mut scratch);
        }

        // strided axes
        let mut line = vec![Complex64::default(); n];
        for axis in 0..self.dim - 1 {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = stride * n;
            for base in 0..total / block {
                for offset in 0..stride {
                    let start = base * block + offset;
                    for (i, v) in line.iter_mut().enumerate() {
                        *v = data[start + i * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (i, v) in line.iter().enumerate() {
                        data[start + i * stride] = *v;
                    }
                }
            }
        }
    }
}
