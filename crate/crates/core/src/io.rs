//! Binary waveform (`FWV1`) and symbol-frame (`FSY1`) files. All numbers little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::txdsp::{SampledWaveform, SymbolFrame};

pub const WAVEFORM_MAGIC: &[u8; 4] = b"FWV1";
pub const SYMBOLS_MAGIC: &[u8; 4] = b"FSY1";

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), msg: msg.into() }
}

fn write_samples<W: Write>(w: &mut W, x: &[Complex64], y: &[Complex64]) -> std::io::Result<()> {
    for (a, b) in x.iter().zip(y) {
        for v in [a.re, a.im, b.re, b.im] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_samples<R: Read>(r: &mut R, n: usize) -> std::io::Result<(Vec<Complex64>, Vec<Complex64>)> {
    let mut buf = vec![0u8; n * 32];
    r.read_exact(&mut buf)?;
    let f = |i: usize| f64::from_le_bytes(buf[i * 8..i * 8 + 8].try_into().unwrap());
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for k in 0..n {
        x.push(Complex64::new(f(4 * k), f(4 * k + 1)));
        y.push(Complex64::new(f(4 * k + 2), f(4 * k + 3)));
    }
    Ok((x, y))
}

fn read_header<R: Read>(r: &mut R, path: &Path, magic: &[u8; 4]) -> Result<usize> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m).map_err(|_| format_err(path, "truncated header"))?;
    if &m != magic {
        return Err(format_err(
            path,
            format!("magic {:?} != expected {:?}", String::from_utf8_lossy(&m), String::from_utf8_lossy(magic)),
        ));
    }
    let mut n = [0u8; 4];
    r.read_exact(&mut n).map_err(|_| format_err(path, "truncated header"))?;
    Ok(u32::from_le_bytes(n) as usize)
}

fn count_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::InvalidArgument(format!("{n} samples exceed the u32 header field")))
}

pub fn write_waveform(path: &Path, w: &SampledWaveform) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(WAVEFORM_MAGIC)?;
    f.write_all(&count_u32(w.len())?.to_le_bytes())?;
    f.write_all(&w.sample_rate.to_le_bytes())?;
    write_samples(&mut f, &w.x, &w.y)?;
    f.flush()?;
    Ok(())
}

pub fn read_waveform(path: &Path) -> Result<SampledWaveform> {
    let mut f = BufReader::new(File::open(path)?);
    let n = read_header(&mut f, path, WAVEFORM_MAGIC)?;
    let mut fs = [0u8; 8];
    f.read_exact(&mut fs).map_err(|_| format_err(path, "truncated header"))?;
    let (x, y) = read_samples(&mut f, n).map_err(|_| format_err(path, "truncated sample data"))?;
    SampledWaveform::new(x, y, f64::from_le_bytes(fs))
}

pub fn write_symbols(path: &Path, s: &SymbolFrame) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(SYMBOLS_MAGIC)?;
    f.write_all(&count_u32(s.len())?.to_le_bytes())?;
    write_samples(&mut f, &s.x, &s.y)?;
    f.flush()?;
    Ok(())
}

/// The symbol file carries no rate, so the caller supplies it.
pub fn read_symbols(path: &Path, baud_rate: f64) -> Result<SymbolFrame> {
    let mut f = BufReader::new(File::open(path)?);
    let n = read_header(&mut f, path, SYMBOLS_MAGIC)?;
    let (x, y) = read_samples(&mut f, n).map_err(|_| format_err(path, "truncated symbol data"))?;
    SymbolFrame::new(x, y, baud_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waveform_layout_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.fwv");
        let w = SampledWaveform::new(
            vec![Complex64::new(1.0, 2.0), Complex64::new(5.0, 6.0)],
            vec![Complex64::new(3.0, 4.0), Complex64::new(7.0, 8.0)],
            68.8e9,
        )
        .unwrap();
        write_waveform(&p, &w).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"FWV1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(bytes[8..16].try_into().unwrap()), 68.8e9);
        let vals: Vec<f64> = bytes[16..].chunks(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        assert_eq!(vals, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(read_waveform(&p).unwrap(), w);
    }

    #[test]
    fn symbols_round_trip_and_magic_check() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.fsy");
        let s = SymbolFrame::new(vec![Complex64::new(0.5, -0.25)], vec![Complex64::new(-1.0, 1.0)], 34.4e9).unwrap();
        write_symbols(&p, &s).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"FSY1");
        assert_eq!(bytes.len(), 8 + 32);
        assert_eq!(read_symbols(&p, 34.4e9).unwrap(), s);
        assert!(read_waveform(&p).is_err());
    }
}
