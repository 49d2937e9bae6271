//! FFT plumbing shared by the propagation and receiver code.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse FFT pair of one length with a reusable scratch buffer.
/// The inverse is normalised by `1/n`.
pub struct Spectral {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Self { n, fwd, inv, scratch: vec![Complex64::default(); scratch_len] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&mut self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n);
        self.fwd.process_with_scratch(buf, &mut self.scratch);
    }

    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n);
        self.inv.process_with_scratch(buf, &mut self.scratch);
        let k = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= k);
    }
}

/// Frequencies in Hz in FFT bin order (0, +df, ..., -df).
pub fn fft_frequencies(n: usize, sample_rate: f64) -> Vec<f64> {
    let df = sample_rate / n as f64;
    (0..n)
        .map(|k| {
            let k = k as isize;
            let kk = if k < (n as isize + 1) / 2 { k } else { k - n as isize };
            kk as f64 * df
        })
        .collect()
}

/// Angular frequencies in rad/s in FFT bin order.
pub fn angular_frequencies(n: usize, sample_rate: f64) -> Vec<f64> {
    fft_frequencies(n, sample_rate).into_iter().map(|f| 2.0 * PI * f).collect()
}

/// Multiplies both fields by a frequency-domain transfer function.
pub fn apply_transfer(
    spectral: &mut Spectral,
    x: &mut [Complex64],
    y: &mut [Complex64],
    h: &[Complex64],
) {
    for buf in [x, y] {
        spectral.forward(buf);
        buf.iter_mut().zip(h).for_each(|(a, b)| *a *= b);
        spectral.inverse(buf);
    }
}
