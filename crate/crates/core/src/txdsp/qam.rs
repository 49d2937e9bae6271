use num_complex::Complex64;

use super::prbs::BitSequence;
use crate::error::{invalid, Result};

/// Per-quadrature amplitude levels indexed by the 2-bit Gray label `(b0 << 1) | b1`,
/// before the 1/sqrt(10) normalisation: 00 -> -3, 01 -> -1, 10 -> +3, 11 -> +1.
pub const QAM16_LEVELS: [f64; 4] = [-3.0, -1.0, 3.0, 1.0];

fn norm() -> f64 {
    1.0 / 10f64.sqrt()
}

/// Aligned dual-polarisation symbol streams.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    pub baud_rate: f64,
}

impl SymbolFrame {
    pub fn new(x: Vec<Complex64>, y: Vec<Complex64>, baud_rate: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(invalid(format!(
                "polarisation lengths differ: x has {}, y has {}",
                x.len(),
                y.len()
            )));
        }
        Ok(Self { x, y, baud_rate })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Drops `front` symbols from the start and `back` from the end of both polarisations.
    pub fn trimmed(&self, front: usize, back: usize) -> Result<Self> {
        if front + back > self.len() {
            return Err(invalid(format!(
                "cannot trim {front}+{back} symbols from a frame of {}",
                self.len()
            )));
        }
        let end = self.len() - back;
        Ok(Self {
            x: self.x[front..end].to_vec(),
            y: self.y[front..end].to_vec(),
            baud_rate: self.baud_rate,
        })
    }

    pub fn mean_power(&self) -> f64 {
        let n = self.len().max(1) as f64;
        (self.x.iter().chain(&self.y).map(|c| c.norm_sqr()).sum::<f64>()) / (2.0 * n)
    }
}

fn level_of(b0: u8, b1: u8) -> f64 {
    QAM16_LEVELS[((b0 & 1) << 1 | (b1 & 1)) as usize]
}

fn map4(b: &[u8]) -> Complex64 {
    Complex64::new(level_of(b[0], b[1]), level_of(b[2], b[3])) * norm()
}

/// Gray-maps bits onto DP-16QAM. Each 8-bit group yields one x symbol (first 4 bits)
/// and one y symbol (last 4 bits); within a symbol the first two bits drive I.
pub fn qam16_map(bits: &BitSequence, baud_rate: f64) -> Result<SymbolFrame> {
    if bits.bits.is_empty() || !bits.bits.len().is_multiple_of(8) {
        return Err(invalid(format!(
            "bit count {} must be a positive multiple of 8 (4 bits/symbol x 2 polarisations)",
            bits.bits.len()
        )));
    }
    let n = bits.bits.len() / 8;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for g in bits.bits.chunks_exact(8) {
        x.push(map4(&g[..4]));
        y.push(map4(&g[4..]));
    }
    SymbolFrame::new(x, y, baud_rate)
}

/// DP-QPSK with unit average power; each 4-bit group yields (x, y).
pub fn qpsk_map(bits: &[u8], baud_rate: f64) -> Result<SymbolFrame> {
    if bits.is_empty() || !bits.len().is_multiple_of(4) {
        return Err(invalid("QPSK bit count must be a positive multiple of 4"));
    }
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let lvl = |b: u8| if b & 1 == 0 { -a } else { a };
    let (x, y) = bits
        .chunks_exact(4)
        .map(|g| {
            (
                Complex64::new(lvl(g[0]), lvl(g[1])),
                Complex64::new(lvl(g[2]), lvl(g[3])),
            )
        })
        .unzip();
    SymbolFrame::new(x, y, baud_rate)
}

/// Hard decision of one quadrature onto its 2-bit Gray label.
fn slice_level(v: f64) -> [u8; 2] {
    let s = v / norm();
    if s < -2.0 {
        [0, 0]
    } else if s < 0.0 {
        [0, 1]
    } else if s < 2.0 {
        [1, 1]
    } else {
        [1, 0]
    }
}

/// Nearest-point 16-QAM decision, returned as 4 bits.
pub fn qam16_demap(s: Complex64) -> [u8; 4] {
    let i = slice_level(s.re);
    let q = slice_level(s.im);
    [i[0], i[1], q[0], q[1]]
}

/// Nearest constellation point.
pub fn qam16_slice(s: Complex64) -> Complex64 {
    let b = qam16_demap(s);
    map4(&b)
}

/// Hard-decision bits of a frame, in the same order [`qam16_map`] consumes them.
pub fn frame_to_bits(frame: &SymbolFrame) -> Vec<u8> {
    let mut out = Vec::with_capacity(frame.len() * 8);
    for (x, y) in frame.x.iter().zip(&frame.y) {
        out.extend_from_slice(&qam16_demap(*x));
        out.extend_from_slice(&qam16_demap(*y));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::txdsp::prbs_generate;

    #[test]
    fn table_anchor() {
        let s = map4(&[0, 0, 0, 0]);
        let r = 10f64.sqrt();
        assert!((s - Complex64::new(-3.0 / r, -3.0 / r)).norm() < 1e-15);
        let s = map4(&[1, 0, 0, 1]);
        assert!((s - Complex64::new(3.0 / r, -1.0 / r)).norm() < 1e-15);
    }

    #[test]
    fn alphabet_unit_power() {
        let p: f64 = (0..16u8)
            .map(|k| map4(&[k >> 3 & 1, k >> 2 & 1, k >> 1 & 1, k & 1]).norm_sqr())
            .sum::<f64>()
            / 16.0;
        assert!((p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gray_neighbours_differ_by_one_bit() {
        let order = [0usize, 1, 3, 2];
        for w in order.windows(2) {
            assert!(QAM16_LEVELS[w[0]] < QAM16_LEVELS[w[1]]);
            assert_eq!((w[0] ^ w[1]).count_ones(), 1);
        }
    }

    #[test]
    fn round_trip_noiseless() {
        let bits = prbs_generate(99, 8 * 1000).unwrap();
        let f = qam16_map(&bits, 1.0).unwrap();
        assert_eq!(frame_to_bits(&f), bits.bits);
    }

    #[test]
    fn rejects_bad_length() {
        let e = qam16_map(&BitSequence::from_bits(vec![0; 12]), 1.0).unwrap_err();
        assert!(e.to_string().contains("multiple of 8"));
    }

    #[test]
    fn empirical_power() {
        let bits = prbs_generate(5, 8 << 16).unwrap();
        let f = qam16_map(&bits, 1.0).unwrap();
        assert!((f.mean_power() - 1.0).abs() < 0.01);
    }
}
