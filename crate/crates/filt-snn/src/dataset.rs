//! MNIST-style IDX ingestion, fixture writing, deterministic subsetting,
//! and batch planning.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::plasticity::TrainConfig;

pub const IMAGE_PIXELS: usize = 784;
const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// One 28x28 image with its class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    pub pixels: [u8; IMAGE_PIXELS],
    pub label: u8,
}

/// Ordered sample indices for every batch; drawn with replacement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub batches: Vec<Vec<usize>>,
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::data(format!("{}: truncated header", path.display())))
}

/// Parse an IDX image file: big-endian magic, count, 28, 28, then raw bytes.
pub fn load_idx_images(path: &Path) -> Result<Vec<[u8; IMAGE_PIXELS]>> {
    let bytes = fs::read(path).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::data(format!(
            "{}: bad image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}",
            path.display()
        )));
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)?;
    let cols = be_u32(&bytes, 12, path)?;
    if (rows, cols) != (28, 28) {
        return Err(Error::data(format!(
            "{}: expected 28x28 images, got {rows}x{cols}",
            path.display()
        )));
    }
    let expected = 16 + count * IMAGE_PIXELS;
    if bytes.len() != expected {
        return Err(Error::data(format!(
            "{}: payload is {} bytes, header implies {expected}",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes[16..]
        .chunks_exact(IMAGE_PIXELS)
        .map(|c| {
            let mut px = [0u8; IMAGE_PIXELS];
            px.copy_from_slice(c);
            px
        })
        .collect())
}

/// Parse an IDX label file: big-endian magic, count, then one byte each.
pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != LABEL_MAGIC {
        return Err(Error::data(format!(
            "{}: bad label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}",
            path.display()
        )));
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    if bytes.len() != 8 + count {
        return Err(Error::data(format!(
            "{}: payload is {} bytes, header implies {}",
            path.display(),
            bytes.len(),
            8 + count
        )));
    }
    let labels = bytes[8..].to_vec();
    if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::data(format!("{}: label {bad} out of range 0-9", path.display())));
    }
    Ok(labels)
}

/// Pair image and label files loaded from the same source, preserving order.
pub fn pair(images: Vec<[u8; IMAGE_PIXELS]>, labels: Vec<u8>) -> Result<Vec<RawImage>> {
    if images.len() != labels.len() {
        return Err(Error::data(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    Ok(images
        .into_iter()
        .zip(labels)
        .map(|(pixels, label)| RawImage { pixels, label })
        .collect())
}

/// Load and pair an image/label file pair.
pub fn load_pair(images: &Path, labels: &Path) -> Result<Vec<RawImage>> {
    pair(load_idx_images(images)?, load_idx_labels(labels)?)
}

/// Write an IDX image file (tests and fixtures).
pub fn write_idx_images(path: &Path, images: &[[u8; IMAGE_PIXELS]]) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + images.len() * IMAGE_PIXELS);
    buf.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    buf.extend_from_slice(&(images.len() as u32).to_be_bytes());
    buf.extend_from_slice(&28u32.to_be_bytes());
    buf.extend_from_slice(&28u32.to_be_bytes());
    for img in images {
        buf.extend_from_slice(img);
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Write an IDX label file (tests and fixtures).
pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + labels.len());
    buf.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    buf.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    buf.extend_from_slice(labels);
    fs::write(path, buf)?;
    Ok(())
}

/// Draw every batch's sample indices uniformly with replacement.
///
/// A dedicated rng stream keeps the plan independent of weight
/// initialization under the same seed.
pub fn make_batches(n_samples: usize, cfg: &TrainConfig, seed: u64) -> Result<BatchPlan> {
    if n_samples < cfg.batch_size {
        return Err(Error::data(format!(
            "cannot draw batches of {} from {} samples",
            cfg.batch_size, n_samples
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let batches = (0..cfg.batches)
        .map(|_| (0..cfg.batch_size).map(|_| rng.random_range(0..n_samples)).collect())
        .collect();
    Ok(BatchPlan { batches })
}

/// Deterministic subsample without replacement, order-preserving.
pub fn sample_subset(n_total: usize, n_take: usize, seed: u64) -> Result<Vec<usize>> {
    if n_take > n_total {
        return Err(Error::data(format!("cannot take {n_take} of {n_total} samples")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(4);
    let mut picked = rand::seq::index::sample(&mut rng, n_total, n_take).into_vec();
    picked.sort_unstable();
    Ok(picked)
}
