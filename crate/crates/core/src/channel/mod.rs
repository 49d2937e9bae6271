//! Fibre channel: split-step Fourier propagation of the Manakov equation, EDFA gain and
//! ASE noise, and WDM neighbour channels.

mod edfa;
mod link;
mod ssfm;
mod wdm;

use serde::{Deserialize, Serialize};

pub use edfa::{ase_psd_per_pol, edfa_amplify, Edfa};
pub use link::link_transmit;
pub use ssfm::{ssfm_propagate, step_grid, Direction, SsfmPropagator, MANAKOV_FACTOR};
pub use wdm::{required_wdm_sample_rate, wdm_multiplex};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const PLANCK: f64 = 6.626_070_15e-34;

/// One fibre span. Units follow the usual datasheet conventions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiberParams {
    pub attenuation_db_per_km: f64,
    pub dispersion_ps_nm_km: f64,
    pub gamma_per_w_km: f64,
    pub length_km: f64,
    pub reference_wavelength_nm: f64,
}

impl Default for FiberParams {
    /// TrueWave Classic at 1550 nm, 50 km span.
    fn default() -> Self {
        Self {
            attenuation_db_per_km: 0.23,
            dispersion_ps_nm_km: 2.8,
            gamma_per_w_km: 2.5,
            length_km: 50.0,
            reference_wavelength_nm: 1550.0,
        }
    }
}

impl FiberParams {
    /// Field-power attenuation in 1/m.
    pub fn alpha_per_m(&self) -> f64 {
        self.attenuation_db_per_km * std::f64::consts::LN_10 / 10.0 / 1e3
    }

    /// GVD parameter in s^2/m: `-D lambda^2 / (2 pi c)`.
    pub fn beta2(&self) -> f64 {
        beta2_from_dispersion(self.dispersion_ps_nm_km * 1e-6, self.reference_wavelength_nm)
    }

    pub fn gamma_per_w_m(&self) -> f64 {
        self.gamma_per_w_km * 1e-3
    }

    pub fn length_m(&self) -> f64 {
        self.length_km * 1e3
    }

    pub fn span_loss_db(&self) -> f64 {
        self.attenuation_db_per_km * self.length_km
    }

    pub fn carrier_frequency(&self) -> f64 {
        SPEED_OF_LIGHT / (self.reference_wavelength_nm * 1e-9)
    }

    pub fn validate(&self) -> crate::Result<()> {
        let fields = [
            ("attenuation_db_per_km", self.attenuation_db_per_km),
            ("dispersion_ps_nm_km", self.dispersion_ps_nm_km),
            ("gamma_per_w_km", self.gamma_per_w_km),
            ("length_km", self.length_km),
            ("reference_wavelength_nm", self.reference_wavelength_nm),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(crate::Error::Config { field: name.into(), msg: format!("must be finite and non-negative, got {v}") });
            }
        }
        if self.length_km <= 0.0 || self.reference_wavelength_nm <= 0.0 {
            return Err(crate::Error::Config { field: "length_km".into(), msg: "span length and wavelength must be positive".into() });
        }
        Ok(())
    }
}

/// `beta2 = -D lambda^2 / (2 pi c)` with D in s/m^2.
pub fn beta2_from_dispersion(d_s_per_m2: f64, wavelength_nm: f64) -> f64 {
    let lambda = wavelength_nm * 1e-9;
    -d_s_per_m2 * lambda * lambda / (2.0 * std::f64::consts::PI * SPEED_OF_LIGHT)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    pub span: FiberParams,
    pub n_spans: usize,
    pub amp_noise_figure_db: f64,
    /// `None` means the amplifier exactly compensates the span loss.
    pub amp_gain_db: Option<f64>,
    pub ase_enabled: bool,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            span: FiberParams::default(),
            n_spans: 9,
            amp_noise_figure_db: 4.5,
            amp_gain_db: None,
            ase_enabled: true,
        }
    }
}

impl LinkConfig {
    pub fn gain_db(&self) -> f64 {
        self.amp_gain_db.unwrap_or_else(|| self.span.span_loss_db())
    }

    pub fn total_dispersion_ps_nm(&self) -> f64 {
        self.span.dispersion_ps_nm_km * self.span.length_km * self.n_spans as f64
    }

    pub fn amplifier(&self) -> Edfa {
        Edfa {
            gain_db: self.gain_db(),
            noise_figure_db: self.amp_noise_figure_db,
            ase_enabled: self.ase_enabled,
            carrier_hz: self.span.carrier_frequency(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborFormat {
    Qpsk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WdmConfig {
    /// Number of neighbours; placed symmetrically, so it must be even.
    pub n_neighbors: usize,
    pub grid_spacing_ghz: f64,
    pub neighbor_format: NeighborFormat,
    /// Per-channel launch power of each neighbour. `None` follows the channel under test.
    pub neighbor_power_dbm: Option<f64>,
    pub neighbor_baud_gbd: f64,
    pub neighbor_roll_off: f64,
}

impl Default for WdmConfig {
    fn default() -> Self {
        Self {
            n_neighbors: 4,
            grid_spacing_ghz: 50.0,
            neighbor_format: NeighborFormat::Qpsk,
            neighbor_power_dbm: None,
            neighbor_baud_gbd: 34.4,
            neighbor_roll_off: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SsfmScheme {
    /// Linear half step, nonlinear step, linear half step.
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SsfmConfig {
    pub step_km: f64,
    pub scheme: SsfmScheme,
}

impl Default for SsfmConfig {
    fn default() -> Self {
        Self { step_km: 0.1, scheme: SsfmScheme::Symmetric }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twc_derived_constants() {
        let f = FiberParams::default();
        // 2.8 ps/(nm km) at 1550 nm -> about -3.57 ps^2/km
        let b2_ps2_km = f.beta2() * 1e24 * 1e3;
        assert!((b2_ps2_km + 3.5713).abs() < 1e-3, "{b2_ps2_km}");
        assert!((f.span_loss_db() - 11.5).abs() < 1e-12);
        assert!((f.alpha_per_m() - 0.23 * 10f64.ln() / 10.0 / 1e3).abs() < 1e-18);
        let l = LinkConfig::default();
        assert!((l.total_dispersion_ps_nm() - 1260.0).abs() < 1e-9);
        assert_eq!(l.gain_db(), 11.5);
    }
}
