use rayon::prelude::*;

use super::{build_inference_windows, EqualizerModel, Scalar, WindowedDataset};
use crate::error::{invalid, Result};
use crate::txdsp::SymbolFrame;
use crate::Complex64;

/// One model per output polarisation; both see all four input features.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationPair {
    pub x: EqualizerModel<f64>,
    pub y: EqualizerModel<f64>,
}

impl PolarizationPair {
    pub fn n_taps(&self) -> usize {
        self.x.n_taps()
    }
}

/// Model outputs for every row of `data`, evaluated in batches of `batch` rows.
pub fn predict<T: Scalar>(model: &EqualizerModel<T>, data: &WindowedDataset, batch: usize) -> Result<Vec<Complex64>> {
    if data.n_taps != model.n_taps() {
        return Err(invalid(format!("windows use N = {} but the model expects N = {}", data.n_taps, model.n_taps())));
    }
    let batch = batch.max(1);
    let rows = data.rows();
    let width = model.input_width();
    let starts: Vec<usize> = (0..rows).step_by(batch).collect();
    let parts: Vec<Vec<Complex64>> = starts
        .par_iter()
        .map(|&s0| {
            let b = batch.min(rows - s0);
            let mut x = Vec::with_capacity(b * width);
            for r in s0..s0 + b {
                x.extend(data.input_row(r).iter().map(|&v| T::of(v)));
            }
            let y = model.predict_flat(&x, b)?;
            Ok(y.chunks_exact(2).map(|p| Complex64::new(p[0].f64(), p[1].f64())).collect())
        })
        .collect::<Result<_>>()?;
    Ok(parts.concat())
}

/// Sliding-window inference of a single model over a received stream (`L - 2N` outputs).
pub fn equalize_frame<T: Scalar>(model: &EqualizerModel<T>, rx: &SymbolFrame, batch: usize) -> Result<Vec<Complex64>> {
    let w = build_inference_windows(rx, model.n_taps())?;
    predict(model, &w, batch)
}

/// Applies both polarisation models; the output frame has `L - 2N` symbols.
pub fn equalize(pair: &PolarizationPair, rx: &SymbolFrame) -> Result<SymbolFrame> {
    if pair.x.n_taps() != pair.y.n_taps() {
        return Err(invalid("x and y models use different window sizes"));
    }
    let x = equalize_frame(&pair.x, rx, 4096)?;
    let y = equalize_frame(&pair.y, rx, 4096)?;
    SymbolFrame::new(x, y, rx.baud_rate)
}
