use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::txdsp::SymbolFrame;

/// Per-polarisation result of the least-squares scalar fit `c = argmin |c rx - tx|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    /// Rotation of `rx` relative to `tx`, i.e. `-arg(c)`, per polarisation [x, y].
    pub phase_offset_rad: [f64; 2],
    /// `|c|`, the gain applied to `rx`.
    pub amplitude_scale: [f64; 2],
    /// EVM of the aligned symbols against `tx`, both polarisations pooled.
    pub residual_evm_db: f64,
}

fn ls_scalar(rx: &[Complex64], tx: &[Complex64]) -> Result<Complex64> {
    let p: f64 = rx.iter().map(|c| c.norm_sqr()).sum();
    if !(p > 0.0) {
        return Err(invalid("received polarisation has zero power; cannot align"));
    }
    let corr: Complex64 = rx.iter().zip(tx).map(|(r, t)| r.conj() * t).sum();
    Ok(corr / p)
}

/// EVM in dB: `10 log10(sum|a - b|^2 / sum|b|^2)`.
pub(crate) fn evm_db_pairs<'a>(pairs: impl Iterator<Item = (&'a Complex64, &'a Complex64)>) -> f64 {
    let (mut e, mut r) = (0.0, 0.0);
    for (a, b) in pairs {
        e += (a - b).norm_sqr();
        r += b.norm_sqr();
    }
    10.0 * (e / r).log10()
}

/// Data-aided constant phase/amplitude correction, one complex scalar per polarisation.
pub fn phase_amplitude_align(rx: &SymbolFrame, tx: &SymbolFrame) -> Result<(SymbolFrame, AlignmentReport)> {
    if rx.len() != tx.len() {
        return Err(invalid(format!("rx has {} symbols, tx has {}", rx.len(), tx.len())));
    }
    let cx = ls_scalar(&rx.x, &tx.x)?;
    let cy = ls_scalar(&rx.y, &tx.y)?;
    let out = SymbolFrame {
        x: rx.x.iter().map(|v| v * cx).collect(),
        y: rx.y.iter().map(|v| v * cy).collect(),
        baud_rate: rx.baud_rate,
    };
    let evm = evm_db_pairs(out.x.iter().zip(&tx.x).chain(out.y.iter().zip(&tx.y)));
    let report = AlignmentReport {
        phase_offset_rad: [-cx.arg(), -cy.arg()],
        amplitude_scale: [cx.norm(), cy.norm()],
        residual_evm_db: evm,
    };
    Ok((out, report))
}

/// EVM of `rx` against `tx` in dB, both polarisations pooled.
pub fn evm_of(rx: &SymbolFrame, tx: &SymbolFrame) -> f64 {
    evm_db_pairs(rx.x.iter().zip(&tx.x).chain(rx.y.iter().zip(&tx.y)))
}
