use super::Scalar;
use crate::error::Result;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second moment estimates and step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(n: usize) -> Self {
        Self { m: vec![T::zero(); n], v: vec![T::zero(); n], t: 0 }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub(crate) fn cast<U: Scalar>(&self) -> AdamState<U> {
        AdamState {
            m: self.m.iter().map(|v| U::of(v.f64())).collect(),
            v: self.v.iter().map(|v| U::of(v.f64())).collect(),
            t: self.t,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<T: Scalar>(params: &mut [T], grads: &[T], state: &mut AdamState<T>, lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.len() {
        return Err(crate::Error::ShapeMismatch { expected: vec![params.len()], actual: vec![grads.len(), state.len()] });
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (T::of(ADAM_BETA1), T::of(ADAM_BETA2));
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    // fold both corrections into the step size and epsilon
    let step = T::of(lr * c2.sqrt() / c1);
    let eps = T::of(ADAM_EPS * c2.sqrt());
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(state.m.iter_mut()).zip(state.v.iter_mut()) {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        *p -= step * *m / (v.sqrt() + eps);
    }
    Ok(())
}
