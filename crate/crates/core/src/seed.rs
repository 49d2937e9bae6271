//! Seed derivation. Every random stream in the crate is seeded from an explicit value
//! mixed with the identity of its consumer, so results never depend on scheduling.

/// One round of SplitMix64.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with an ordered list of stream labels.
pub fn derive(base: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(base), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

/// Hashes a textual label into a stream id.
pub fn label(s: &str) -> u64 {
    s.bytes()
        .fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01B3))
}

/// A non-zero 32-bit LFSR state derived from `base` and `labels`.
pub fn derive_prbs_seed(base: u64, labels: &[u64]) -> u32 {
    let mut z = derive(base, labels);
    loop {
        let s = (z ^ (z >> 32)) as u32;
        if s != 0 {
            return s;
        }
        z = splitmix64(z);
    }
}
