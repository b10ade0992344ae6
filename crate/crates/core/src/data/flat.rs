//! Flat binary persistence: `N`, `D`, `L` as little-endian `u64`, then `N`
//! labels as little-endian `u64`, then `N × D` row-major little-endian `f64`.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::dataset::{Dataset, Split};
use crate::error::{Error, Result};

const HEADER: usize = 24;

pub fn encode(features: &Array2<f64>, labels: &[usize], num_labels: usize) -> Vec<u8> {
    let (n, d) = features.dim();
    let mut out = Vec::with_capacity(HEADER + 8 * n + 8 * n * d);
    for v in [n, d, num_labels] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for &y in labels {
        out.extend_from_slice(&(y as u64).to_le_bytes());
    }
    for &x in features.iter() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<(Array2<f64>, Vec<usize>, usize)> {
    let word = |i: usize| -> u64 {
        let mut b = [0u8; 8];
        b.copy_from_slice(&bytes[8 * i..8 * i + 8]);
        u64::from_le_bytes(b)
    };
    if bytes.len() < HEADER {
        return Err(Error::Data("flat file shorter than its header".into()));
    }
    let (n, d, l) = (word(0) as usize, word(1) as usize, word(2) as usize);
    let expected = n
        .checked_mul(d)
        .and_then(|nd| nd.checked_add(n))
        .and_then(|w| w.checked_mul(8))
        .and_then(|b| b.checked_add(HEADER))
        .ok_or_else(|| Error::Data("flat header sizes overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Data(format!(
            "flat file has {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let labels: Vec<usize> = (0..n).map(|i| word(3 + i) as usize).collect();
    let body = &bytes[HEADER + 8 * n..];
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let features =
        Array2::from_shape_vec((n, d), values).map_err(|e| Error::Data(e.to_string()))?;
    Ok((features, labels, l))
}

pub fn write_flat(
    path: impl AsRef<Path>,
    features: &Array2<f64>,
    labels: &[usize],
    num_labels: usize,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(features, labels, num_labels)).map_err(|e| Error::io(path, e))
}

pub fn read_flat(path: impl AsRef<Path>) -> Result<(Array2<f64>, Vec<usize>, usize)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

impl Dataset {
    pub fn save_flat(&self, path: impl AsRef<Path>) -> Result<()> {
        write_flat(path, self.features(), self.labels(), self.num_labels())
    }

    pub fn load_flat(path: impl AsRef<Path>, split: Split) -> Result<Dataset> {
        let (features, labels, l) = read_flat(path)?;
        Dataset::new(features, labels, l, split)
    }
}
