use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{self, FeatShape, LayerCache, LayerSpec};
use super::{AdamState, ArchSpec, Architecture, Scalar, Tensor, FEATURES};
use crate::error::{Error, Result};

/// A feed-forward stack of layers over `(b, M, 4)` windows with a `(b, 2)` output.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualizerModel<T: Scalar = f64> {
    pub architecture: Architecture,
    pub spec: ArchSpec,
    layers: Vec<LayerSpec>,
    /// Per-sample shape entering each layer, plus the final output shape.
    shapes: Vec<FeatShape>,
    offsets: Vec<usize>,
    pub params: Vec<T>,
    pub adam: AdamState<T>,
}

pub(crate) struct Trace<T> {
    acts: Vec<Vec<T>>,
    caches: Vec<LayerCache<T>>,
}

impl<T: Scalar> EqualizerModel<T> {
    /// Builds the architecture's layer list with seeded Glorot initialisation.
    pub fn new(architecture: Architecture, spec: &ArchSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut m = Self::from_layers(architecture, spec.clone(), spec.layers(architecture))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, l) in m.layers.iter().enumerate() {
            let (a, b) = (m.offsets[i], m.offsets[i + 1]);
            l.init(&mut m.params[a..b], &mut rng);
        }
        Ok(m)
    }

    /// Zero-parameter model over an explicit layer list (shapes are checked here).
    pub fn from_layers(architecture: Architecture, spec: ArchSpec, layers: Vec<LayerSpec>) -> Result<Self> {
        let mut shapes = vec![FeatShape::Seq { len: spec.memory(), channels: FEATURES }];
        let mut offsets = vec![0];
        for l in &layers {
            let next = l.output_shape(*shapes.last().unwrap())?;
            shapes.push(next);
            offsets.push(offsets.last().unwrap() + l.n_params());
        }
        if *shapes.last().unwrap() != FeatShape::Flat(2) {
            return Err(Error::ShapeMismatch {
                expected: vec![2],
                actual: shapes.last().unwrap().with_batch(1)[1..].to_vec(),
            });
        }
        let n = *offsets.last().unwrap();
        Ok(Self { architecture, spec, layers, shapes, offsets, params: vec![T::zero(); n], adam: AdamState::new(n) })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn n_taps(&self) -> usize {
        self.spec.n_taps
    }

    /// Parameter slice of layer `i`.
    pub fn layer_params(&self, i: usize) -> &[T] {
        &self.params[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn layer_params_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.params[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Batched shapes of every layer output, e.g. `(b, 41, 244) -> ... -> (b, 2)`.
    pub fn layer_shapes(&self, batch: usize) -> Vec<Vec<usize>> {
        self.shapes[1..].iter().map(|s| s.with_batch(batch)).collect()
    }

    pub fn input_width(&self) -> usize {
        self.shapes[0].size()
    }

    pub fn cast<U: Scalar>(&self) -> EqualizerModel<U> {
        EqualizerModel {
            architecture: self.architecture,
            spec: self.spec.clone(),
            layers: self.layers.clone(),
            shapes: self.shapes.clone(),
            offsets: self.offsets.clone(),
            params: self.params.iter().map(|v| U::of(v.f64())).collect(),
            adam: self.adam.cast(),
        }
    }

    fn layer_label(&self, i: usize) -> String {
        format!("{} (#{i})", self.layers[i].name())
    }

    pub(crate) fn trace(&self, x: &[T], b: usize) -> Result<Trace<T>> {
        if x.len() != b * self.input_width() {
            return Err(Error::ShapeMismatch {
                expected: self.shapes[0].with_batch(b),
                actual: vec![x.len()],
            });
        }
        let mut acts: Vec<Vec<T>> = vec![x.to_vec()];
        let mut caches = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let p = self.layer_params(i);
            let input = acts.last().unwrap();
            let (out, cache) = match (*l, self.shapes[i]) {
                (LayerSpec::Dense { inputs, outputs, activation }, _) => {
                    layers::dense_forward(p, input, b, inputs, outputs, activation)
                }
                (LayerSpec::Conv1d { in_channels, filters, kernel, activation }, FeatShape::Seq { len, .. }) => {
                    layers::conv_forward(p, input, b, len, in_channels, filters, kernel, activation)
                }
                (LayerSpec::Lstm { inputs, hidden, bidirectional }, FeatShape::Seq { len, .. }) => {
                    layers::lstm_forward(p, input, b, len, inputs, hidden, bidirectional)
                }
                (LayerSpec::Flatten, _) => (input.clone(), LayerCache::None),
                _ => unreachable!("shapes checked at construction"),
            };
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { layer: self.layer_label(i) });
            }
            acts.push(out);
            caches.push(cache);
        }
        Ok(Trace { acts, caches })
    }

    /// Forward pass on a flat `(b, M*4)` buffer; returns `(b, 2)` values.
    pub fn predict_flat(&self, x: &[T], b: usize) -> Result<Vec<T>> {
        Ok(self.trace(x, b)?.acts.pop().unwrap())
    }

    /// Mean squared error over `b x 2` outputs and its gradient w.r.t. all parameters.
    pub fn loss_and_grad(&self, x: &[T], targets: &[T], b: usize) -> Result<(f64, Vec<T>)> {
        if targets.len() != 2 * b {
            return Err(Error::ShapeMismatch { expected: vec![b, 2], actual: vec![targets.len()] });
        }
        let tr = self.trace(x, b)?;
        let y = tr.acts.last().unwrap();
        let scale = T::of(2.0 / (2 * b) as f64);
        let mut loss = 0.0;
        let mut dy: Vec<T> = y
            .iter()
            .zip(targets)
            .map(|(&y, &t)| {
                let d = y - t;
                loss += d.f64() * d.f64();
                d * scale
            })
            .collect();
        loss /= (2 * b) as f64;
        let mut grad = vec![T::zero(); self.params.len()];
        for i in (0..self.layers.len()).rev() {
            let p = self.layer_params(i);
            let g = &mut grad[self.offsets[i]..self.offsets[i + 1]];
            let (x_in, y_out, cache) = (&tr.acts[i], &tr.acts[i + 1], &tr.caches[i]);
            let dx = match (self.layers[i], self.shapes[i]) {
                (LayerSpec::Dense { inputs, outputs, activation }, _) => {
                    layers::dense_backward(p, g, x_in, y_out, cache, &dy, b, inputs, outputs, activation)
                }
                (LayerSpec::Conv1d { in_channels, filters, kernel, activation }, FeatShape::Seq { len, .. }) => {
                    layers::conv_backward(p, g, y_out, cache, &dy, b, len, in_channels, filters, kernel, activation)
                }
                (LayerSpec::Lstm { inputs, hidden, bidirectional }, FeatShape::Seq { len, .. }) => {
                    layers::lstm_backward(p, g, cache, &dy, b, len, inputs, hidden, bidirectional)
                }
                (LayerSpec::Flatten, _) => dy,
                _ => unreachable!("shapes checked at construction"),
            };
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { layer: self.layer_label(i) });
            }
            dy = dx;
        }
        Ok((loss, grad))
    }

    /// Tensor front end of the forward pass: `(b, M, 4) -> (b, 2)`.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        let b = self.check_batch(batch)?;
        let x: Vec<T> = batch.data.iter().map(|&v| T::of(v)).collect();
        let y = self.predict_flat(&x, b)?;
        Ok(Tensor { shape: vec![b, 2], data: y.iter().map(|v| v.f64()).collect() })
    }

    /// Gradient of the batch-mean MSE w.r.t. every parameter.
    pub fn backward(&self, batch: &Tensor, targets: &Tensor) -> Result<Vec<f64>> {
        let b = self.check_batch(batch)?;
        if targets.shape != [b, 2] {
            return Err(Error::ShapeMismatch { expected: vec![b, 2], actual: targets.shape.clone() });
        }
        let x: Vec<T> = batch.data.iter().map(|&v| T::of(v)).collect();
        let t: Vec<T> = targets.data.iter().map(|&v| T::of(v)).collect();
        let (_, g) = self.loss_and_grad(&x, &t, b)?;
        Ok(g.iter().map(|v| v.f64()).collect())
    }

    /// Batch-mean MSE.
    pub fn loss(&self, batch: &Tensor, targets: &Tensor) -> Result<f64> {
        let y = self.forward(batch)?;
        if targets.shape != y.shape {
            return Err(Error::ShapeMismatch { expected: y.shape, actual: targets.shape.clone() });
        }
        Ok(y.data.iter().zip(&targets.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
    }

    fn check_batch(&self, batch: &Tensor) -> Result<usize> {
        let m = self.spec.memory();
        match batch.shape.as_slice() {
            &[b, mm, FEATURES] if mm == m => Ok(b),
            _ => Err(Error::ShapeMismatch {
                expected: vec![batch.shape.first().copied().unwrap_or(0), m, FEATURES],
                actual: batch.shape.clone(),
            }),
        }
    }
}
