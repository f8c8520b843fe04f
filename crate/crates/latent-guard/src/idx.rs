//! IDX (MNIST distribution format) reading and writing. Gzip-compressed
//! files are detected by their magic bytes and decompressed transparently.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use latent_guard_core::ImageDataset;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Truncated {
            path: path.to_path_buf(),
            needed: at + 4,
            actual: bytes.len(),
        })
}

/// Parses an IDX buffer with the given magic and rank, returning the
/// dimension sizes and the payload.
fn parse<'a>(bytes: &'a [u8], magic: u32, rank: usize, path: &Path) -> Result<(Vec<usize>, &'a [u8])> {
    let found = be_u32(bytes, 0, path)?;
    if found != magic {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found,
            expected: magic,
        });
    }
    let dims = (0..rank)
        .map(|i| be_u32(bytes, 4 + 4 * i, path).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let header = 4 + 4 * rank;
    let needed = header + dims.iter().product::<usize>();
    if bytes.len() < needed {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            needed,
            actual: bytes.len(),
        });
    }
    Ok((dims, &bytes[header..needed]))
}

/// Raw image bytes and `(count, rows, cols)`.
pub fn read_images(path: &Path) -> Result<(Vec<u8>, usize, usize, usize)> {
    let bytes = read_all(path)?;
    let (dims, payload) = parse(&bytes, IMAGES_MAGIC, 3, path)?;
    Ok((payload.to_vec(), dims[0], dims[1], dims[2]))
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_all(path)?;
    let (_, payload) = parse(&bytes, LABELS_MAGIC, 1, path)?;
    Ok(payload.to_vec())
}

/// Loads an image/label file pair, scaling pixels to `[0, 1]`.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<ImageDataset> {
    let (pixels, count, rows, cols) = read_images(images_path)?;
    let labels = read_labels(labels_path)?;
    if count != labels.len() {
        return Err(Error::CountMismatch {
            images: count,
            labels: labels.len(),
        });
    }
    Ok(ImageDataset::from_bytes(rows, cols, &pixels, labels)?)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn write_images(path: &Path, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    let count = pixels.len() / (rows * cols).max(1);
    let mut bytes = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    bytes.extend_from_slice(pixels);
    write_file(path, &bytes)
}

pub fn write_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + labels.len());
    for v in [LABELS_MAGIC, labels.len() as u32] {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    bytes.extend_from_slice(labels);
    write_file(path, &bytes)
}

/// Standard MNIST file names, each tried with and without a `.gz` suffix.
pub fn find_split(dir: &Path, split: Split) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    let (img, lbl) = match split {
        Split::Train => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        Split::Test => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    };
    let pick = |name: &str| {
        [name.to_string(), format!("{name}.gz")]
            .into_iter()
            .map(|n| dir.join(n))
            .find(|p| p.exists())
            .ok_or_else(|| Error::io(dir.join(name), std::io::Error::from(std::io::ErrorKind::NotFound)))
    };
    Ok((pick(img)?, pick(lbl)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

pub fn load_split(dir: &Path, split: Split) -> Result<ImageDataset> {
    let (images, labels) = find_split(dir, split)?;
    load_idx(&images, &labels)
}
