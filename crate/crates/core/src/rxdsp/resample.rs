
use crate::error::{invalid, Result};
use crate::spectral::{fft_frequencies, Spectral};
use crate::txdsp::SampledWaveform;

/// Ideal (brick-wall) resampling to `new_sample_rate`, optionally low-passed to
/// `|f| <= passband_hz`. The output length must be a whole number of samples.
pub fn resample(wave: &SampledWaveform, new_sample_rate: f64, passband_hz: Option<f64>) -> Result<SampledWaveform> {
    let n = wave.len();
    let ratio = new_sample_rate / wave.sample_rate;
    let m_f = n as f64 * ratio;
    let m = m_f.round() as usize;
    if m == 0 || (m_f - m as f64).abs() > 1e-6 {
        return Err(invalid(format!("resampling {n} samples by {ratio} does not give an integer length")));
    }
    if m == n && passband_hz.is_none() {
        return Ok(wave.clone());
    }
    let f_in = fft_frequencies(n, wave.sample_rate);
    let df = wave.sample_rate / n as f64;
    let nyq = new_sample_rate.min(wave.sample_rate) / 2.0;
    let limit = passband_hz.map_or(nyq, |p| p.min(nyq));
    let mut fwd = Spectral::new(n);
    let mut inv = Spectral::new(m);
    let scale = m as f64 / n as f64;
    let mut out = SampledWaveform::zeros(m, new_sample_rate);
    out.center_frequency_offset = wave.center_frequency_offset;
    for (src, dst) in [(&wave.x, &mut out.x), (&wave.y, &mut out.y)] {
        let mut buf = src.clone();
        fwd.forward(&mut buf);
        for (k, &f) in f_in.iter().enumerate() {
            // strictly inside the new Nyquist band; the Nyquist bin itself is ambiguous
            if f.abs() < nyq - 1e-9 * df && f.abs() <= limit {
                let bin = (f / df).round() as i64;
                let j = if bin >= 0 { bin as usize } else { (m as i64 + bin) as usize };
                dst[j] = buf[k] * scale;
            }
        }
        inv.inverse(dst);
    }
    Ok(out)
}

/// Isolates the channel under test: resample to `baud * sps` with a brick-wall of
/// `baud * (1 + roll_off) / 2`. A waveform already at the target rate is returned untouched.
pub fn select_channel(wave: &SampledWaveform, baud_rate: f64, sps: usize, roll_off: f64) -> Result<SampledWaveform> {
    let target = baud_rate * sps as f64;
    if (wave.sample_rate - target).abs() <= 1e-9 * target {
        return Ok(wave.clone());
    }
    resample(wave, target, Some(baud_rate * (1.0 + roll_off) / 2.0))
}
