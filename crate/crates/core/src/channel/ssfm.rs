use num_complex::Complex64;

use super::{FiberParams, SsfmConfig};
use crate::error::{invalid, Result};
use crate::spectral::{angular_frequencies, Spectral};
use crate::txdsp::SampledWaveform;

/// Polarisation-averaged Kerr factor of the Manakov equation.
pub const MANAKOV_FACTOR: f64 = 8.0 / 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    /// Back-propagation: negated beta2 and gamma, loss becomes gain, steps run in reverse.
    Inverse,
}

/// Step lengths (metres) covering `length_m`: uniform `step_m`, with a final short step if
/// the span is not an integer number of steps.
pub fn step_grid(length_m: f64, step_m: f64) -> Result<Vec<f64>> {
    if !(step_m > 0.0) {
        return Err(invalid(format!("SSFM step must be positive, got {step_m} m")));
    }
    if step_m > length_m * (1.0 + 1e-12) {
        return Err(invalid(format!(
            "SSFM step {:.3} km is longer than the span {:.3} km",
            step_m / 1e3,
            length_m / 1e3
        )));
    }
    let n = (length_m / step_m - 1e-9).ceil().max(1.0) as usize;
    let mut steps = vec![step_m; n];
    steps[n - 1] = length_m - step_m * (n - 1) as f64;
    Ok(steps)
}

/// Nonlinear length of a step referred to the field at the step midpoint, where the
/// symmetric scheme applies the Kerr rotation: `(1 - e^{-a h}) / a * e^{a h / 2}`.
fn effective_length(alpha: f64, h: f64) -> f64 {
    if alpha * h < 1e-12 {
        h
    } else {
        2.0 * (alpha * h / 2.0).sinh() / alpha
    }
}

/// Reusable split-step integrator for one waveform length and sample rate.
pub struct SsfmPropagator {
    spectral: Spectral,
    omega: Vec<f64>,
    half_ops: Vec<(u64, Vec<Complex64>)>,
    op_key: Option<(u64, u64, Direction)>,
}

impl SsfmPropagator {
    pub fn new(n: usize, sample_rate: f64) -> Self {
        Self {
            spectral: Spectral::new(n),
            omega: angular_frequencies(n, sample_rate),
            half_ops: Vec::new(),
            op_key: None,
        }
    }

    fn half_op(&mut self, h: f64, alpha: f64, beta2: f64, dir: Direction) -> usize {
        let key = (alpha.to_bits(), beta2.to_bits(), dir);
        if self.op_key != Some(key) {
            self.half_ops.clear();
            self.op_key = Some(key);
        }
        if let Some(i) = self.half_ops.iter().position(|(k, _)| *k == h.to_bits()) {
            return i;
        }
        let s = match dir {
            Direction::Forward => 1.0,
            Direction::Inverse => -1.0,
        };
        let op = self
            .omega
            .iter()
            .map(|&w| {
                let re = -s * alpha / 2.0 * (h / 2.0);
                let im = s * beta2 * w * w / 2.0 * (h / 2.0);
                Complex64::from_polar(re.exp(), im)
            })
            .collect();
        self.half_ops.push((h.to_bits(), op));
        self.half_ops.len() - 1
    }

    /// Integrates over `steps` (metres, in forward order) with the given Kerr coefficient
    /// (1/(W m)). Inverse direction traverses the steps last to first.
    pub fn propagate(
        &mut self,
        wave: &mut SampledWaveform,
        steps: &[f64],
        alpha: f64,
        beta2: f64,
        gamma: f64,
        dir: Direction,
    ) {
        let n = wave.len();
        assert_eq!(n, self.spectral.len(), "propagator built for another length");
        let order: Vec<f64> = match dir {
            Direction::Forward => steps.to_vec(),
            Direction::Inverse => steps.iter().rev().cloned().collect(),
        };
        let kerr_sign = match dir {
            Direction::Forward => 1.0,
            Direction::Inverse => -1.0,
        };
        let idx: Vec<usize> = order.iter().map(|&h| self.half_op(h, alpha, beta2, dir)).collect();

        let SampledWaveform { x, y, .. } = wave;
        self.spectral.forward(x);
        self.spectral.forward(y);
        for (&h, &k) in order.iter().zip(&idx) {
            let op = &self.half_ops[k].1;
            for buf in [&mut *x, &mut *y] {
                buf.iter_mut().zip(op).for_each(|(a, b)| *a *= b);
                self.spectral.inverse(buf);
            }
            if gamma != 0.0 {
                let k_nl = kerr_sign * MANAKOV_FACTOR * gamma * effective_length(alpha, h);
                for (a, b) in x.iter_mut().zip(y.iter_mut()) {
                    let phi = k_nl * (a.norm_sqr() + b.norm_sqr());
                    let rot = Complex64::new(phi.cos(), phi.sin());
                    *a *= rot;
                    *b *= rot;
                }
            }
            let op = &self.half_ops[k].1;
            for buf in [&mut *x, &mut *y] {
                self.spectral.forward(buf);
                buf.iter_mut().zip(op).for_each(|(a, b)| *a *= b);
            }
        }
        self.spectral.inverse(x);
        self.spectral.inverse(y);
    }

    /// Propagates through one span of `fiber` with `steps` and an optional Kerr override.
    pub fn propagate_span(
        &mut self,
        wave: &mut SampledWaveform,
        fiber: &FiberParams,
        steps: &[f64],
        gamma: f64,
        dir: Direction,
    ) {
        self.propagate(wave, steps, fiber.alpha_per_m(), fiber.beta2(), gamma, dir);
    }
}

/// Symmetric split-step solution of the Manakov equation over one span.
pub fn ssfm_propagate(
    wave: &SampledWaveform,
    fiber: &FiberParams,
    cfg: &SsfmConfig,
    direction: Direction,
) -> Result<SampledWaveform> {
    if wave.is_empty() {
        return Err(invalid("cannot propagate an empty waveform"));
    }
    let steps = step_grid(fiber.length_m(), cfg.step_km * 1e3)?;
    let mut out = wave.clone();
    let mut p = SsfmPropagator::new(wave.len(), wave.sample_rate);
    p.propagate_span(&mut out, fiber, &steps, fiber.gamma_per_w_m(), direction);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_grid_short_last() {
        let s = step_grid(1000.0, 300.0).unwrap();
        assert_eq!(s.len(), 4);
        assert!((s[3] - 100.0).abs() < 1e-9);
        assert_eq!(step_grid(50e3, 100.0).unwrap().len(), 500);
        assert!(step_grid(100.0, 200.0).is_err());
        assert!(step_grid(100.0, 0.0).is_err());
    }

    #[test]
    fn effective_length_limits() {
        assert_eq!(effective_length(0.0, 5.0), 5.0);
        let a = 0.23 * 10f64.ln() / 10.0 / 1e3;
        let h = 100.0;
        let leff = (1.0 - (-a * h).exp()) / a;
        assert!((effective_length(a, h) - leff * (a * h / 2.0).exp()).abs() < 1e-9);
    }
}
