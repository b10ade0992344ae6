//! Datasets: CIFAR binary readers, synthetic blobs, flat binary persistence,
//! and mini-batch samplers.

mod augment;
mod blobs;
mod cifar;
mod dataset;
mod flat;
mod sampler;

pub use augment::crop_and_flip;
pub use blobs::{make_blobs, BlobsSpec};
pub use cifar::{load_cifar10, load_cifar100, parse_records, RecordFormat};
pub use dataset::{Dataset, ImageShape, Split};
pub use flat::{read_flat, write_flat};
pub use sampler::{sample_batch, shuffled_batches, LabelSampler};
