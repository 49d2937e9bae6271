use std::f64::consts::{PI, SQRT_2};


use crate::error::{invalid, Error, Result};
use crate::txdsp::{frame_to_bits, BitSequence, SymbolFrame};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerResult {
    pub bit_errors: u64,
    pub bits_counted: u64,
    pub ber: f64,
}

impl BerResult {
    pub fn new(bit_errors: u64, bits_counted: u64) -> Result<Self> {
        if bits_counted == 0 {
            return Err(invalid("BER needs at least one counted bit"));
        }
        Ok(Self { bit_errors, bits_counted, ber: bit_errors as f64 / bits_counted as f64 })
    }

    /// Q-factor in dB. With zero errors the BER is floored at `1/bits_counted` and the
    /// second value is `true`, marking the Q as a lower bound.
    pub fn q_db(&self) -> Result<(f64, bool)> {
        if self.bit_errors == 0 {
            Ok((q_factor_from_ber(1.0 / self.bits_counted as f64)?, true))
        } else {
            Ok((q_factor_from_ber(self.ber)?, false))
        }
    }
}

pub fn ber_count(decided: &BitSequence, reference: &BitSequence) -> Result<BerResult> {
    if decided.len() != reference.len() {
        return Err(invalid(format!(
            "bit sequences differ in length: {} vs {}",
            decided.len(),
            reference.len()
        )));
    }
    let errors = decided.bits.iter().zip(&reference.bits).filter(|(a, b)| (*a ^ *b) & 1 != 0).count();
    BerResult::new(errors as u64, decided.len() as u64)
}

/// Hard-decision bit errors between two aligned frames, both polarisations pooled.
pub fn count_frame_errors(rx: &SymbolFrame, tx: &SymbolFrame) -> Result<(u64, u64)> {
    if rx.len() != tx.len() {
        return Err(invalid(format!("frames differ in length: {} vs {}", rx.len(), tx.len())));
    }
    let a = frame_to_bits(rx);
    let b = frame_to_bits(tx);
    let e = a.iter().zip(&b).filter(|(x, y)| x != y).count() as u64;
    Ok((e, a.len() as u64))
}

pub fn frame_ber(rx: &SymbolFrame, tx: &SymbolFrame) -> Result<BerResult> {
    let (e, n) = count_frame_errors(rx, tx)?;
    BerResult::new(e, n)
}

/// EVM in dB of `rx` against `tx`, both polarisations pooled.
pub fn evm_db(rx: &SymbolFrame, tx: &SymbolFrame) -> f64 {
    crate::rxdsp::evm_of(rx, tx)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Inverse complementary error function on (0, 2), by safeguarded Newton iteration on
/// `ln erfc(x) = ln y` (keeps full relative accuracy deep in the tail).
pub fn erfc_inv(y: f64) -> Result<f64> {
    if !(y > 0.0 && y < 2.0) {
        return Err(Error::OutOfDomain { value: y, domain: "(0, 2)" });
    }
    if y > 1.0 {
        return Ok(-erfc_inv(2.0 - y)?);
    }
    if y == 1.0 {
        return Ok(0.0);
    }
    let target = y.ln();
    let (mut lo, mut hi) = (0.0f64, 27.0f64);
    let mut x = 1.0f64.min(hi);
    for _ in 0..200 {
        let e = erfc(x);
        let g = e.ln() - target;
        if g > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // d/dx ln erfc(x) = -2/sqrt(pi) exp(-x^2) / erfc(x)
        let dg = -2.0 / PI.sqrt() * (-x * x).exp() / e;
        let mut next = x - g / dg;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-16 * x.abs().max(1e-300) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// `Q = 20 log10(sqrt(2) erfcinv(2 BER))`, in dB.
pub fn q_factor_from_ber(ber: f64) -> Result<f64> {
    if !(ber > 0.0 && ber < 0.5) {
        return Err(Error::OutOfDomain { value: ber, domain: "0 < BER < 0.5" });
    }
    Ok(20.0 * (SQRT_2 * erfc_inv(2.0 * ber)?).log10())
}

/// Inverse of [`q_factor_from_ber`].
pub fn ber_from_q_db(q_db: f64) -> f64 {
    0.5 * erfc(10f64.powf(q_db / 20.0) / SQRT_2)
}

/// Standard normal pdf and cdf.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ber_counting() {
        let a = BitSequence::from_bits(vec![0, 1, 1, 0, 1]);
        assert_eq!(ber_count(&a, &a).unwrap().ber, 0.0);
        let c = BitSequence::from_bits(a.bits.iter().map(|b| b ^ 1).collect());
        assert_eq!(ber_count(&c, &a).unwrap().ber, 1.0);
        let mut bits = vec![0u8; 1000];
        bits[3] = 1;
        bits[500] = 1;
        bits[999] = 1;
        let r = ber_count(&BitSequence::from_bits(bits), &BitSequence::from_bits(vec![0; 1000])).unwrap();
        assert_eq!(r.bit_errors, 3);
        assert!((r.ber - 0.003).abs() < 1e-15);
        assert!(ber_count(&a, &BitSequence::from_bits(vec![0; 4])).is_err());
    }

    #[test]
    fn erfc_inv_tail_accuracy() {
        for &y in &[1e-300, 1e-20, 1e-8, 2e-3, 0.3, 0.999, 1.0, 1.5, 1.999] {
            let x = erfc_inv(y).unwrap();
            assert!(((erfc(x) - y) / y).abs() < 1e-12, "y={y} x={x}");
        }
        assert!(erfc_inv(0.0).is_err());
        assert!(erfc_inv(2.0).is_err());
    }

    #[test]
    fn q_domain() {
        assert!(q_factor_from_ber(0.0).is_err());
        assert!(q_factor_from_ber(0.5).is_err());
        assert!(q_factor_from_ber(-1.0).is_err());
    }

    #[test]
    fn zero_error_floor() {
        let r = BerResult::new(0, 1000).unwrap();
        let (q, lb) = r.q_db().unwrap();
        assert!(lb);
        assert!((q - q_factor_from_ber(1e-3).unwrap()).abs() < 1e-12);
    }
}
