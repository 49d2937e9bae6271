//! `FNN1` checkpoints: magic, u32 architecture descriptor, f64 parameters, Adam state.
//! All values little-endian.

use std::io::{Read, Write};
use std::path::Path;

use super::{Activation, AdamState, ArchSpec, Architecture, EqualizerModel, LayerSpec};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FNN1";
const VERSION: u32 = 1;

fn layer_words(l: &LayerSpec) -> [u32; 5] {
    match *l {
        LayerSpec::Dense { inputs, outputs, activation } => [1, inputs as u32, outputs as u32, activation.to_code(), 0],
        LayerSpec::Conv1d { in_channels, filters, kernel, activation } => {
            [2, in_channels as u32, filters as u32, kernel as u32, activation.to_code()]
        }
        LayerSpec::Lstm { inputs, hidden, bidirectional } => [3, inputs as u32, hidden as u32, bidirectional as u32, 0],
        LayerSpec::Flatten => [4, 0, 0, 0, 0],
    }
}

fn descriptor(m: &EqualizerModel<f64>) -> Vec<u32> {
    let s = &m.spec;
    let mut d = vec![
        VERSION,
        m.architecture.code(),
        s.n_taps as u32,
        s.filters as u32,
        s.kernel as u32,
        s.hidden as u32,
        s.mlp_units as u32,
        s.activation.to_code(),
        m.layers().len() as u32,
    ];
    for l in m.layers() {
        d.extend(layer_words(l));
    }
    d
}

pub fn save_checkpoint(path: &Path, model: &EqualizerModel<f64>) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + 24 * model.n_params());
    buf.extend_from_slice(MAGIC);
    let d = descriptor(model);
    buf.extend((d.len() as u32).to_le_bytes());
    for w in d {
        buf.extend(w.to_le_bytes());
    }
    buf.extend((model.n_params() as u64).to_le_bytes());
    for v in &model.params {
        buf.extend(v.to_le_bytes());
    }
    buf.extend(model.adam.t.to_le_bytes());
    for v in model.adam.m.iter().chain(&model.adam.v) {
        buf.extend(v.to_le_bytes());
    }
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp)?;
    f.write_all(&buf)?;
    f.sync_all()?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(self.err("truncated file"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(8 * n)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Format { path: self.path.to_path_buf(), msg: msg.into() }
    }
}

/// Loads a checkpoint. With `expected`, the stored architecture must match it exactly.
pub fn load_checkpoint(path: &Path, expected: Option<(Architecture, &ArchSpec)>) -> Result<EqualizerModel<f64>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut c = Cursor { buf: &buf, pos: 0, path };
    if c.take(4)? != MAGIC {
        return Err(c.err("missing FNN1 header"));
    }
    let n_words = c.u32()? as usize;
    if n_words < 9 {
        return Err(c.err("architecture descriptor too short"));
    }
    let d: Vec<u32> = (0..n_words).map(|_| c.u32()).collect::<Result<_>>()?;
    if d[0] != VERSION {
        return Err(c.err(format!("unsupported version {}", d[0])));
    }
    let arch = Architecture::from_code(d[1]).map_err(|e| c.err(e.to_string()))?;
    let spec = ArchSpec {
        n_taps: d[2] as usize,
        filters: d[3] as usize,
        kernel: d[4] as usize,
        hidden: d[5] as usize,
        mlp_units: d[6] as usize,
        activation: Activation::from_code(d[7]).map_err(|e| c.err(e.to_string()))?,
    };
    if let Some((a, s)) = expected {
        if a != arch || *s != spec {
            return Err(c.err(format!(
                "checkpoint holds {arch} {spec:?}, but the configuration asks for {a} {s:?}"
            )));
        }
    }
    let mut model = EqualizerModel::<f64>::from_layers(arch, spec.clone(), spec.layers(arch))?;
    if descriptor(&model) != d {
        return Err(c.err("layer list does not match the architecture descriptor"));
    }
    let n = c.u64()? as usize;
    if n != model.n_params() {
        return Err(c.err(format!("{n} parameters stored, architecture needs {}", model.n_params())));
    }
    model.params = c.f64s(n)?;
    if model.params.iter().any(|v| !v.is_finite()) {
        return Err(c.err("non-finite parameter"));
    }
    let t = c.u64()?;
    let m = c.f64s(n)?;
    let v = c.f64s(n)?;
    model.adam = AdamState { m, v, t };
    if c.pos != buf.len() {
        return Err(c.err("trailing bytes after Adam state"));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_validation() {
        let spec = ArchSpec { n_taps: 2, filters: 3, kernel: 3, hidden: 2, mlp_units: 5, activation: Activation::Tanh };
        let mut m = EqualizerModel::<f64>::new(Architecture::Crnn, &spec, 9).unwrap();
        m.adam.t = 17;
        m.adam.m[3] = 0.25;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.fnn");
        save_checkpoint(&p, &m).unwrap();
        let back = load_checkpoint(&p, Some((Architecture::Crnn, &spec))).unwrap();
        assert_eq!(back, m);
        let other = ArchSpec { hidden: 3, ..spec.clone() };
        assert!(load_checkpoint(&p, Some((Architecture::Crnn, &other))).is_err());
        assert!(load_checkpoint(&p, Some((Architecture::BiLstm, &spec))).is_err());
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&p, None), Err(Error::Format { .. })));
    }
}
