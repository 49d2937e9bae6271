use crate::error::{invalid, Result};

/// Order of the generator polynomial x^32 + x^22 + x^2 + x + 1.
pub const PRBS_ORDER: u32 = 32;

/// Fibonacci LFSR producing the order-32 maximal-length sequence.
///
/// Bit `i` of the state holds `a[n + i]`; the register realises the recurrence
/// `a[n+32] = a[n+22] ^ a[n+2] ^ a[n+1] ^ a[n]` and emits `a[n]`.
#[derive(Debug, Clone)]
pub struct Prbs32 {
    state: u32,
}

impl Prbs32 {
    pub fn new(seed: u32) -> Result<Self> {
        if seed == 0 {
            return Err(invalid("PRBS seed must be non-zero (the all-zero LFSR state is degenerate)"));
        }
        Ok(Self { state: seed })
    }

    #[inline]
    pub fn next_bit(&mut self) -> u8 {
        let s = self.state;
        let out = (s & 1) as u8;
        let fb = (s ^ (s >> 1) ^ (s >> 2) ^ (s >> 22)) & 1;
        self.state = (s >> 1) | (fb << 31);
        out
    }

    pub fn state(&self) -> u32 {
        self.state
    }
}

impl Iterator for Prbs32 {
    type Item = u8;

    fn next(&mut self) -> Option<u8> {
        Some(self.next_bit())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSequence {
    pub bits: Vec<u8>,
    pub seed: u32,
    pub generator_order: u32,
}

impl BitSequence {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Wraps externally produced bits (e.g. demapped decisions) that did not come from an LFSR.
    pub fn from_bits(bits: Vec<u8>) -> Self {
        Self { bits, seed: 0, generator_order: 0 }
    }
}

/// Generates `n_bits` of the order-32 PRBS starting from LFSR state `seed`.
pub fn prbs_generate(seed: u32, n_bits: usize) -> Result<BitSequence> {
    if n_bits == 0 {
        return Err(invalid("n_bits must be positive"));
    }
    let gen = Prbs32::new(seed)?;
    Ok(BitSequence { bits: gen.take(n_bits).collect(), seed, generator_order: PRBS_ORDER })
}
