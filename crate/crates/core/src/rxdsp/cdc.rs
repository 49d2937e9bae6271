use num_complex::Complex64;

use crate::channel::beta2_from_dispersion;
use crate::spectral::{angular_frequencies, apply_transfer, Spectral};
use crate::txdsp::SampledWaveform;

/// All-pass `exp(-i beta2_total w^2 / 2)` that undoes `total_dispersion_ps_nm`.
pub fn cdc_transfer(n: usize, sample_rate: f64, total_dispersion_ps_nm: f64, wavelength_nm: f64) -> Vec<Complex64> {
    // ps/nm -> s/m
    let b2_total = beta2_from_dispersion(total_dispersion_ps_nm * 1e-3, wavelength_nm);
    angular_frequencies(n, sample_rate)
        .into_iter()
        .map(|w| Complex64::from_polar(1.0, -b2_total * w * w / 2.0))
        .collect()
}

pub fn cdc_compensate(
    wave: &SampledWaveform,
    total_dispersion_ps_nm: f64,
    wavelength_nm: f64,
) -> SampledWaveform {
    let mut out = wave.clone();
    if total_dispersion_ps_nm == 0.0 || wave.is_empty() {
        return out;
    }
    let h = cdc_transfer(wave.len(), wave.sample_rate, total_dispersion_ps_nm, wavelength_nm);
    let mut s = Spectral::new(wave.len());
    apply_transfer(&mut s, &mut out.x, &mut out.y, &h);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_dispersion_is_identity() {
        let w = SampledWaveform::new(vec![Complex64::new(1.0, 2.0); 8], vec![Complex64::new(0.0, -1.0); 8], 1e9).unwrap();
        assert_eq!(cdc_compensate(&w, 0.0, 1550.0), w);
    }

    #[test]
    fn energy_conserved() {
        let x: Vec<Complex64> = (0..256).map(|k| Complex64::new((k as f64 * 0.3).sin(), (k as f64 * 0.7).cos())).collect();
        let w = SampledWaveform::new(x.clone(), x, 68.8e9).unwrap();
        let out = cdc_compensate(&w, 1260.0, 1550.0);
        assert!(((out.energy() - w.energy()) / w.energy()).abs() < 1e-12);
    }
}
