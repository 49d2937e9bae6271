use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::PLANCK;
use crate::txdsp::SampledWaveform;

/// Lumped amplifier with optional ASE.
#[derive(Debug, Clone, PartialEq)]
pub struct Edfa {
    pub gain_db: f64,
    pub noise_figure_db: f64,
    pub ase_enabled: bool,
    pub carrier_hz: f64,
}

/// ASE power spectral density per polarisation (W/Hz): `(NF G - 1) h nu / 2`.
pub fn ase_psd_per_pol(gain_db: f64, noise_figure_db: f64, carrier_hz: f64) -> f64 {
    let g = 10f64.powf(gain_db / 10.0);
    let nf = 10f64.powf(noise_figure_db / 10.0);
    (nf * g - 1.0) * PLANCK * carrier_hz / 2.0
}

impl Edfa {
    pub fn amplify(&self, wave: &mut SampledWaveform, rng_seed: u64) {
        wave.scale(10f64.powf(self.gain_db / 20.0));
        if !self.ase_enabled {
            return;
        }
        let psd = ase_psd_per_pol(self.gain_db, self.noise_figure_db, self.carrier_hz);
        // each complex sample carries psd * fs, split over I and Q
        let sigma = (psd * wave.sample_rate / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        for buf in [&mut wave.x, &mut wave.y] {
            for c in buf.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *c += Complex64::new(re, im) * sigma;
            }
        }
    }
}

pub fn edfa_amplify(
    wave: &SampledWaveform,
    gain_db: f64,
    noise_figure_db: f64,
    ase_enabled: bool,
    carrier_hz: f64,
    rng_seed: u64,
) -> crate::Result<SampledWaveform> {
    if !(gain_db > 0.0) {
        return Err(crate::error::invalid(format!("EDFA gain must be positive, got {gain_db} dB")));
    }
    let mut out = wave.clone();
    Edfa { gain_db, noise_figure_db, ase_enabled, carrier_hz }.amplify(&mut out, rng_seed);
    Ok(out)
}
