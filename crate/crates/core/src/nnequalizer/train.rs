use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::equalize::{predict, PolarizationPair};
use super::{
    adam_step, build_windows, ArchSpec, Architecture, EqualizerModel, Polarization, Precision, Scalar,
    TrainConfig, WindowedDataset,
};
use crate::error::{invalid, Error, Result};
use crate::seed;
use crate::txdsp::{qam16_demap, SymbolFrame};
use crate::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub val_ber: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (`None` when no epoch ran).
    pub best_epoch: Option<usize>,
}

impl TrainingLog {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.best_epoch.and_then(|e| self.records.iter().find(|r| r.epoch == e))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "epoch,train_mse,val_mse,val_ber")?;
        for r in &self.records {
            writeln!(f, "{},{:e},{:e},{:e}", r.epoch, r.train_mse, r.val_mse, r.val_ber)?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Validation MSE and hard-decision BER of one polarisation model.
/// Validation MSE (per real dimension) and hard-decision BER of `model` on `data`.
pub fn evaluate<T: Scalar>(model: &EqualizerModel<T>, data: &WindowedDataset) -> Result<(f64, f64)> {
    let out = predict(model, data, 4096)?;
    let mut se = 0.0;
    let mut errors = 0u64;
    for (s, y) in out.iter().enumerate() {
        let [re, im] = data.target_row(s);
        se += (y.re - re).powi(2) + (y.im - im).powi(2);
        let a = qam16_demap(*y);
        let b = qam16_demap(Complex64::new(re, im));
        errors += a.iter().zip(&b).filter(|(p, q)| p != q).count() as u64;
    }
    let n = out.len().max(1) as f64;
    Ok((se / (2.0 * n), errors as f64 / (4.0 * n)))
}

/// Mini-batch Adam on the MSE loss. The returned model carries the parameters (and
/// optimiser state) of the epoch with the lowest validation BER, ties broken by
/// validation MSE.
pub fn train<T: Scalar>(
    model: &EqualizerModel<T>,
    data: &WindowedDataset,
    validation: &WindowedDataset,
    cfg: &TrainConfig,
) -> Result<(EqualizerModel<T>, TrainingLog)> {
    cfg.validate()?;
    if data.n_taps != model.n_taps() || validation.n_taps != model.n_taps() {
        return Err(invalid(format!(
            "dataset window N = {} / {} does not match the model's N = {}",
            data.n_taps,
            validation.n_taps,
            model.n_taps()
        )));
    }
    let rows = data.rows();
    if rows < cfg.mini_batch {
        return Err(invalid(format!("{rows} training rows is fewer than one mini-batch of {}", cfg.mini_batch)));
    }
    let mut log = TrainingLog::default();
    if cfg.epochs == 0 {
        return Ok((model.clone(), log));
    }
    let width = model.input_width();
    let mut current = model.clone();
    let mut best: Option<(f64, f64, EqualizerModel<T>)> = None;
    let mut order: Vec<usize> = (0..rows).collect();
    let mut xb: Vec<T> = Vec::with_capacity(cfg.mini_batch * width);
    let mut tb: Vec<T> = Vec::with_capacity(cfg.mini_batch * 2);
    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.shuffle_seed, &[epoch as u64]));
            order.shuffle(&mut rng);
        }
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.mini_batch) {
            xb.clear();
            tb.clear();
            for &r in chunk {
                xb.extend(data.input_row(r).iter().map(|&v| T::of(v)));
                let [re, im] = data.target_row(r);
                tb.push(T::of(re));
                tb.push(T::of(im));
            }
            let (loss, grad) = current.loss_and_grad(&xb, &tb, chunk.len()).map_err(|e| match e {
                Error::NonFinite { .. } => Error::Diverged { epoch },
                e => e,
            })?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            sum += loss * chunk.len() as f64;
            let EqualizerModel { params, adam, .. } = &mut current;
            adam_step(params, &grad, adam, cfg.learning_rate)?;
        }
        let train_mse = sum / rows as f64;
        let (val_mse, val_ber) = evaluate(&current, validation).map_err(|e| match e {
            Error::NonFinite { .. } => Error::Diverged { epoch },
            e => e,
        })?;
        log::debug!("{} epoch {epoch}: train {train_mse:.4e} val {val_mse:.4e} ber {val_ber:.4e}", model.architecture);
        log.records.push(EpochRecord { epoch, train_mse, val_mse, val_ber });
        let better = match &best {
            None => true,
            Some((b, m, _)) => val_ber < *b || (val_ber == *b && val_mse < *m),
        };
        if better {
            best = Some((val_ber, val_mse, current.clone()));
            log.best_epoch = Some(epoch);
        }
    }
    Ok((best.map(|b| b.2).unwrap_or(current), log))
}

/// Trains the x- and y-polarisation models of one architecture on aligned frames.
/// Parameters are initialised from `seed`; the returned models are 64-bit.
#[allow(clippy::too_many_arguments)]
pub fn train_pair(
    arch: Architecture,
    spec: &ArchSpec,
    train_rx: &SymbolFrame,
    train_tx: &SymbolFrame,
    val_rx: &SymbolFrame,
    val_tx: &SymbolFrame,
    cfg: &TrainConfig,
    seed_base: u64,
) -> Result<(PolarizationPair, [TrainingLog; 2])> {
    let (x, lx) = train_polarization(arch, spec, (train_rx, train_tx), (val_rx, val_tx), cfg, Polarization::X, seed_base)?;
    let (y, ly) = train_polarization(arch, spec, (train_rx, train_tx), (val_rx, val_tx), cfg, Polarization::Y, seed_base)?;
    Ok((PolarizationPair { x, y }, [lx, ly]))
}

/// Trains the model of one output polarisation; `train_pair` is this for X and Y.
pub fn train_polarization(
    arch: Architecture,
    spec: &ArchSpec,
    train_frames: (&SymbolFrame, &SymbolFrame),
    val_frames: (&SymbolFrame, &SymbolFrame),
    cfg: &TrainConfig,
    pol: Polarization,
    seed_base: u64,
) -> Result<(EqualizerModel<f64>, TrainingLog)> {
    let data = build_windows(train_frames.0, train_frames.1, spec.n_taps, pol)?;
    let val = build_windows(val_frames.0, val_frames.1, spec.n_taps, pol)?;
    let init = seed::derive(seed_base, &[seed::label(arch.label()), pol.index() as u64]);
    let mut c = cfg.clone();
    c.shuffle_seed = seed::derive(cfg.shuffle_seed, &[pol.index() as u64]);
    match cfg.precision {
        Precision::F64 => train(&EqualizerModel::<f64>::new(arch, spec, init)?, &data, &val, &c),
        Precision::F32 => {
            let (m, log) = train(&EqualizerModel::<f32>::new(arch, spec, init)?, &data, &val, &c)?;
            Ok((m.cast::<f64>(), log))
        }
    }
}
