use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnequalizer::{Activation, ArchSpec};

/// Integers `lo, lo + step, ...` not exceeding `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntRange {
    pub lo: i64,
    pub hi: i64,
    #[serde(default = "one")]
    pub step: i64,
}

fn one() -> i64 {
    1
}

impl IntRange {
    pub fn new(lo: i64, hi: i64, step: i64) -> Self {
        Self { lo, hi, step }
    }

    pub fn single(v: i64) -> Self {
        Self { lo: v, hi: v, step: 1 }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if self.step <= 0 || self.hi < self.lo {
            return Err(Error::Config {
                field: field.into(),
                msg: format!("empty range {}..={} step {}", self.lo, self.hi, self.step),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.hi - self.lo) / self.step + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn value(&self, i: usize) -> i64 {
        self.lo + self.step * i as i64
    }

    pub fn contains(&self, v: i64) -> bool {
        v >= self.lo && v <= self.hi && (v - self.lo) % self.step == 0
    }

    /// Position in `[0, 1]` (0 for a single-valued range).
    pub fn normalize(&self, v: i64) -> f64 {
        if self.len() == 1 {
            0.0
        } else {
            (v - self.lo) as f64 / (self.value(self.len() - 1) - self.lo) as f64
        }
    }

    /// Nearest valid value to a normalised coordinate.
    pub fn round(&self, u: f64) -> i64 {
        let k = (u.clamp(0.0, 1.0) * (self.len() - 1) as f64).round() as usize;
        self.value(k)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> i64 {
        self.value(rng.random_range(0..self.len()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub n_taps: IntRange,
    pub filters: IntRange,
    pub hidden: IntRange,
    pub kernel: IntRange,
    pub batch: IntRange,
    pub activations: Vec<Activation>,
}

impl Default for SearchSpace {
    /// N in [5, 40], X and Y in [32, 256], Z in {3, 5, 7, 9}, B in [256, 8192].
    fn default() -> Self {
        Self {
            n_taps: IntRange::new(5, 40, 1),
            filters: IntRange::new(32, 256, 1),
            hidden: IntRange::new(32, 256, 1),
            kernel: IntRange::new(3, 9, 2),
            batch: IntRange::new(256, 8192, 1),
            activations: vec![Activation::LeakyRelu(0.2), Activation::Relu, Activation::Tanh],
        }
    }
}

/// One candidate configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperPoint {
    pub n_taps: usize,
    pub filters: usize,
    pub hidden: usize,
    pub kernel: usize,
    pub batch: usize,
    pub activation: Activation,
}

impl HyperPoint {
    /// `base` with this point's N, X, Y, Z and activation.
    pub fn apply(&self, base: &ArchSpec) -> ArchSpec {
        ArchSpec {
            n_taps: self.n_taps,
            filters: self.filters,
            hidden: self.hidden,
            kernel: self.kernel,
            activation: self.activation,
            ..base.clone()
        }
    }
}

impl fmt::Display for HyperPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "N={} X={} Y={} Z={} B={} act={}",
            self.n_taps, self.filters, self.hidden, self.kernel, self.batch, self.activation
        )
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        self.n_taps.validate("n_taps")?;
        self.filters.validate("filters")?;
        self.hidden.validate("hidden")?;
        self.kernel.validate("kernel")?;
        self.batch.validate("batch")?;
        if self.n_taps.lo < 0 || self.filters.lo < 1 || self.hidden.lo < 1 || self.batch.lo < 1 {
            return Err(Error::Config { field: "search".into(), msg: "sizes must be positive (N may be 0)".into() });
        }
        if self.kernel.lo < 1 || self.kernel.lo % 2 == 0 || self.kernel.step % 2 != 0 && self.kernel.len() > 1 {
            return Err(Error::Config { field: "kernel".into(), msg: "kernel sizes must all be odd".into() });
        }
        if self.activations.is_empty() {
            return Err(Error::Config { field: "activations".into(), msg: "at least one activation is required".into() });
        }
        Ok(())
    }

    fn ints(&self) -> [&IntRange; 5] {
        [&self.n_taps, &self.filters, &self.hidden, &self.kernel, &self.batch]
    }

    /// Number of distinct points.
    pub fn cardinality(&self) -> f64 {
        self.ints().iter().map(|r| r.len() as f64).product::<f64>() * self.activations.len() as f64
    }

    pub fn contains(&self, p: &HyperPoint) -> bool {
        let v = [p.n_taps, p.filters, p.hidden, p.kernel, p.batch];
        self.ints().iter().zip(v).all(|(r, v)| r.contains(v as i64)) && self.activations.contains(&p.activation)
    }

    /// Integers scaled to `[0, 1]`, the activation one-hot.
    pub fn encode(&self, p: &HyperPoint) -> Vec<f64> {
        let v = [p.n_taps, p.filters, p.hidden, p.kernel, p.batch];
        let mut out: Vec<f64> = self.ints().iter().zip(v).map(|(r, v)| r.normalize(v as i64)).collect();
        out.extend(self.activations.iter().map(|a| if *a == p.activation { 1.0 } else { 0.0 }));
        out
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> HyperPoint {
        let [n, x, y, z, b] = self.ints().map(|r| r.sample(rng) as usize);
        let activation = self.activations[rng.random_range(0..self.activations.len())];
        HyperPoint { n_taps: n, filters: x, hidden: y, kernel: z, batch: b, activation }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn range_rounding_stays_valid() {
        let r = IntRange::new(3, 9, 2);
        assert_eq!(r.len(), 4);
        for u in [-0.3, 0.0, 0.2, 0.5, 0.9, 1.4] {
            assert!(r.contains(r.round(u)));
        }
        assert_eq!(r.normalize(9), 1.0);
        assert_eq!(IntRange::single(4).normalize(4), 0.0);
        assert!(IntRange::new(5, 4, 1).validate("n").is_err());
    }

    #[test]
    fn samples_are_inside() {
        let s = SearchSpace::default();
        s.validate().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let p = s.sample(&mut rng);
            assert!(s.contains(&p));
            assert_eq!(s.encode(&p).len(), 8);
        }
    }
}
