//! CIFAR binary-format readers.
//!
//! CIFAR-10 records are 1 label byte followed by 3072 channel-planar pixel
//! bytes (R, G, B planes of 32×32). CIFAR-100 records carry two label bytes,
//! coarse then fine; the fine label is used.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::dataset::{Dataset, ImageShape, Split};
use crate::error::{Error, Result};

const PIXELS: usize = 3072;

/// Record layout of one CIFAR variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordFormat {
    /// Number of label bytes preceding the pixels.
    pub label_bytes: usize,
    /// Which label byte holds the class used for training.
    pub label_offset: usize,
    pub num_labels: usize,
}

impl RecordFormat {
    pub const CIFAR10: RecordFormat = RecordFormat {
        label_bytes: 1,
        label_offset: 0,
        num_labels: 10,
    };
    pub const CIFAR100: RecordFormat = RecordFormat {
        label_bytes: 2,
        label_offset: 1,
        num_labels: 100,
    };

    pub fn record_len(&self) -> usize {
        self.label_bytes + PIXELS
    }
}

/// Decodes raw record bytes into labels and pixel rows scaled to `[0, 1]`.
pub fn parse_records(bytes: &[u8], format: RecordFormat) -> Result<(Vec<usize>, Vec<f64>)> {
    let record_len = format.record_len();
    if !bytes.len().is_multiple_of(record_len) {
        return Err(Error::Data(format!(
            "file size {} is not a multiple of the {record_len}-byte record size",
            bytes.len()
        )));
    }
    let n = bytes.len() / record_len;
    let mut labels = Vec::with_capacity(n);
    let mut pixels = Vec::with_capacity(n * PIXELS);
    for (i, record) in bytes.chunks_exact(record_len).enumerate() {
        let label = record[format.label_offset] as usize;
        if label >= format.num_labels {
            return Err(Error::Data(format!(
                "corrupt record {i}: label {label} >= {}",
                format.num_labels
            )));
        }
        labels.push(label);
        pixels.extend(
            record[format.label_bytes..]
                .iter()
                .map(|&p| p as f64 / 255.0),
        );
    }
    Ok((labels, pixels))
}

fn read_files(dir: &Path, names: &[&str], format: RecordFormat, split: Split) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut pixels = Vec::new();
    for name in names {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let (l, p) = parse_records(&bytes, format)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        labels.extend(l);
        pixels.extend(p);
    }
    let features = Array2::from_shape_vec((labels.len(), PIXELS), pixels)
        .map_err(|e| Error::Data(e.to_string()))?;
    Dataset::new(features, labels, format.num_labels, split)?.with_image_shape(ImageShape::CIFAR)
}

/// Loads `data_batch_{1..5}.bin` and `test_batch.bin` from `dir`.
pub fn load_cifar10(dir: impl AsRef<Path>) -> Result<(Dataset, Dataset)> {
    let dir = dir.as_ref();
    let train = read_files(
        dir,
        &[
            "data_batch_1.bin",
            "data_batch_2.bin",
            "data_batch_3.bin",
            "data_batch_4.bin",
            "data_batch_5.bin",
        ],
        RecordFormat::CIFAR10,
        Split::Train,
    )?;
    let test = read_files(dir, &["test_batch.bin"], RecordFormat::CIFAR10, Split::Test)?;
    Ok((train, test))
}

/// Loads `train.bin` and `test.bin` from `dir`, keeping fine labels.
pub fn load_cifar100(dir: impl AsRef<Path>) -> Result<(Dataset, Dataset)> {
    let dir = dir.as_ref();
    let train = read_files(dir, &["train.bin"], RecordFormat::CIFAR100, Split::Train)?;
    let test = read_files(dir, &["test.bin"], RecordFormat::CIFAR100, Split::Test)?;
    Ok((train, test))
}
