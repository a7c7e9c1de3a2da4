//! MNIST IDX ingestion and binarization.
//!
//! IDX files start with a big-endian header: magic (`0x00000803` for images,
//! `0x00000801` for labels), item count, and for images the row and column
//! counts. Pixels follow row-major, one byte each. Gzip-wrapped files are
//! detected by their magic bytes and decompressed transparently.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use thiserror::Error;

use crate::config::DataConfig;
use crate::crossbar::{get_bit, pack_bools, words_for};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
pub const MNIST_SIDE: usize = 28;
pub const MNIST_PIXELS: usize = MNIST_SIDE * MNIST_SIDE;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic 0x{found:08x}, expected 0x{expected:08x}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },
    #[error("{path}: truncated, header promises {expected} bytes but file holds {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("{path}: label {label} at index {index} is not a digit")]
    BadLabel {
        path: PathBuf,
        index: usize,
        label: u8,
    },
    #[error("no {what} file found in {dir} (tried {tried})")]
    NotFound {
        what: &'static str,
        dir: PathBuf,
        tried: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn stems(self) -> (&'static str, &'static str) {
        match self {
            Split::Train => ("train-images", "train-labels"),
            Split::Test => ("t10k-images", "t10k-labels"),
        }
    }
}

/// Gray-scale images as loaded from disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDataset {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }
}

/// Binary images, bit-packed per image, with their labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinarizedDataset {
    input_dim: usize,
    words_per_image: usize,
    bits: Vec<u64>,
    labels: Vec<u8>,
}

impl BinarizedDataset {
    pub fn from_bools(images: &[Vec<bool>], labels: &[u8]) -> Self {
        assert_eq!(images.len(), labels.len(), "one label per image");
        let input_dim = images.first().map_or(MNIST_PIXELS, Vec::len);
        let words_per_image = words_for(input_dim);
        let mut bits = Vec::with_capacity(images.len() * words_per_image);
        for img in images {
            assert_eq!(img.len(), input_dim, "images must share one size");
            bits.extend(pack_bools(img));
        }
        Self {
            input_dim,
            words_per_image,
            bits,
            labels: labels.to_vec(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn image_words(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words_per_image..(i + 1) * self.words_per_image]
    }

    pub fn image_bools(&self, i: usize) -> Vec<bool> {
        let words = self.image_words(i);
        (0..self.input_dim).map(|k| get_bit(words, k)).collect()
    }

    pub fn active_pixels(&self, i: usize) -> u32 {
        self.image_words(i).iter().map(|w| w.count_ones()).sum()
    }

    /// Contiguous slice `[offset, offset + count)`, clamped to the dataset.
    pub fn subset(&self, offset: usize, count: usize) -> Self {
        let start = offset.min(self.len());
        let end = start.saturating_add(count).min(self.len());
        Self {
            input_dim: self.input_dim,
            words_per_image: self.words_per_image,
            bits: self.bits[start * self.words_per_image..end * self.words_per_image].to_vec(),
            labels: self.labels[start..end].to_vec(),
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, IdxError> {
    let io = |source| IdxError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut raw = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut raw)).map_err(io)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out).map_err(io)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn header(path: &Path, bytes: &[u8], magic: u32, fields: usize) -> Result<Vec<usize>, IdxError> {
    let need = 4 * (fields + 1);
    if bytes.len() >= 4 {
        let found = be_u32(bytes, 0);
        if found != magic {
            return Err(IdxError::BadMagic {
                path: path.to_path_buf(),
                expected: magic,
                found,
            });
        }
    }
    if bytes.len() < need {
        return Err(IdxError::Truncated {
            path: path.to_path_buf(),
            expected: need,
            found: bytes.len(),
        });
    }
    Ok((0..fields).map(|i| be_u32(bytes, 4 + 4 * i) as usize).collect())
}

pub fn load_idx_images(path: &Path) -> Result<(usize, usize, usize, Vec<u8>), IdxError> {
    let bytes = read_file(path)?;
    let h = header(path, &bytes, IMAGES_MAGIC, 3)?;
    let (count, rows, cols) = (h[0], h[1], h[2]);
    let expected = 16 + count * rows * cols;
    if bytes.len() < expected {
        return Err(IdxError::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    Ok((count, rows, cols, bytes[16..expected].to_vec()))
}

pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>, IdxError> {
    let bytes = read_file(path)?;
    let count = header(path, &bytes, LABELS_MAGIC, 1)?[0];
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(IdxError::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    let labels = bytes[8..expected].to_vec();
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
        return Err(IdxError::BadLabel {
            path: path.to_path_buf(),
            index,
            label,
        });
    }
    Ok(labels)
}

/// Load a matching pair of IDX image and label files.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<RawDataset, IdxError> {
    let (count, rows, cols, pixels) = load_idx_images(images_path)?;
    let labels = load_idx_labels(labels_path)?;
    if labels.len() != count {
        return Err(IdxError::CountMismatch {
            images: count,
            labels: labels.len(),
        });
    }
    Ok(RawDataset {
        rows,
        cols,
        pixels,
        labels,
    })
}

fn find(dir: &Path, stem: &str, idx: &str, what: &'static str) -> Result<PathBuf, IdxError> {
    let candidates = [
        format!("{stem}-{idx}-ubyte"),
        format!("{stem}-{idx}-ubyte.gz"),
        format!("{stem}.{idx}-ubyte"),
        format!("{stem}.{idx}-ubyte.gz"),
    ];
    candidates
        .iter()
        .map(|name| dir.join(name))
        .find(|p| p.is_file())
        .ok_or_else(|| IdxError::NotFound {
            what,
            dir: dir.to_path_buf(),
            tried: candidates.join(", "),
        })
}

/// Load the train or test split from a directory holding the standard files.
pub fn load_split(dir: &Path, split: Split) -> Result<RawDataset, IdxError> {
    let (images, labels) = split.stems();
    let images = find(dir, images, "idx3", "images")?;
    let labels = find(dir, labels, "idx1", "labels")?;
    load_idx(&images, &labels)
}

/// `bit = pixel >= threshold`, row-major.
pub fn binarize(raw: &RawDataset, threshold: u8) -> BinarizedDataset {
    let input_dim = raw.rows * raw.cols;
    let words_per_image = words_for(input_dim);
    let mut bits = vec![0u64; raw.len() * words_per_image];
    for i in 0..raw.len() {
        let out = &mut bits[i * words_per_image..(i + 1) * words_per_image];
        for (k, &px) in raw.image(i).iter().enumerate() {
            if px >= threshold {
                out[k / 64] |= 1u64 << (k % 64);
            }
        }
    }
    BinarizedDataset {
        input_dim,
        words_per_image,
        bits,
        labels: raw.labels.clone(),
    }
}

/// Load, binarize and slice one split as configured in `data`. The offset
/// applies to the training split only.
pub fn load_binarized(dir: &Path, split: Split, data: &DataConfig) -> Result<BinarizedDataset, IdxError> {
    let full = binarize(&load_split(dir, split)?, data.binarize_threshold);
    Ok(match split {
        Split::Train => full.subset(data.train_offset, data.train_count.unwrap_or(usize::MAX)),
        Split::Test => full.subset(0, data.test_count.unwrap_or(usize::MAX)),
    })
}

/// Test helper and tooling: encode images and labels as IDX bytes.
pub fn encode_idx(raw: &RawDataset) -> (Vec<u8>, Vec<u8>) {
    let mut images = Vec::with_capacity(16 + raw.pixels.len());
    images.extend(IMAGES_MAGIC.to_be_bytes());
    images.extend((raw.len() as u32).to_be_bytes());
    images.extend((raw.rows as u32).to_be_bytes());
    images.extend((raw.cols as u32).to_be_bytes());
    images.extend(&raw.pixels);
    let mut labels = Vec::with_capacity(8 + raw.len());
    labels.extend(LABELS_MAGIC.to_be_bytes());
    labels.extend((raw.len() as u32).to_be_bytes());
    labels.extend(&raw.labels);
    (images, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tiny() -> RawDataset {
        RawDataset {
            rows: 2,
            cols: 3,
            pixels: vec![0, 127, 128, 200, 255, 1, 9, 9, 9, 0, 0, 0],
            labels: vec![3, 7],
        }
    }

    fn write_pair(dir: &Path, raw: &RawDataset) -> (PathBuf, PathBuf) {
        let (img, lbl) = encode_idx(raw);
        let ip = dir.join("img");
        let lp = dir.join("lbl");
        std::fs::write(&ip, img).unwrap();
        std::fs::write(&lp, lbl).unwrap();
        (ip, lp)
    }

    #[test]
    fn roundtrip_plain() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_pair(dir.path(), &tiny());
        assert_eq!(load_idx(&ip, &lp).unwrap(), tiny());
    }

    #[test]
    fn roundtrip_gzip() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = encode_idx(&tiny());
        for (name, data) in [("img.gz", img), ("lbl.gz", lbl)] {
            let f = File::create(dir.path().join(name)).unwrap();
            let mut gz = flate2::write::GzEncoder::new(f, flate2::Compression::default());
            gz.write_all(&data).unwrap();
            gz.finish().unwrap();
        }
        let raw = load_idx(&dir.path().join("img.gz"), &dir.path().join("lbl.gz")).unwrap();
        assert_eq!(raw, tiny());
    }

    #[test]
    fn swapped_files_fail_on_magic() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_pair(dir.path(), &tiny());
        match load_idx(&lp, &ip).unwrap_err() {
            IdxError::BadMagic { expected, found, .. } => {
                assert_eq!(expected, IMAGES_MAGIC);
                assert_eq!(found, LABELS_MAGIC);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_and_mismatched() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_pair(dir.path(), &tiny());
        let mut bytes = std::fs::read(&ip).unwrap();
        bytes.truncate(bytes.len() - 1);
        std::fs::write(&ip, &bytes).unwrap();
        assert!(matches!(load_idx(&ip, &lp), Err(IdxError::Truncated { .. })));
        std::fs::write(&ip, &bytes[..10]).unwrap();
        assert!(matches!(load_idx(&ip, &lp), Err(IdxError::Truncated { .. })));

        let mut one_label = tiny();
        one_label.labels.pop();
        let (_, lbl) = encode_idx(&one_label);
        let (img, _) = encode_idx(&tiny());
        std::fs::write(&ip, img).unwrap();
        std::fs::write(&lp, lbl).unwrap();
        assert!(matches!(
            load_idx(&ip, &lp),
            Err(IdxError::CountMismatch { images: 2, labels: 1 })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_idx(Path::new("/no/such/img"), Path::new("/no/such/lbl")),
            Err(IdxError::Io { .. })
        ));
    }

    #[test]
    fn bad_label_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut raw = tiny();
        raw.labels[1] = 12;
        let (ip, lp) = write_pair(dir.path(), &raw);
        assert!(matches!(load_idx(&ip, &lp), Err(IdxError::BadLabel { index: 1, .. })));
    }

    #[test]
    fn binarize_thresholds() {
        let b = binarize(&tiny(), 128);
        assert_eq!(b.image_bools(0), vec![false, false, true, true, true, false]);
        assert_eq!(b.image_bools(1), vec![false; 6]);
        let all = binarize(&tiny(), 0);
        assert!(all.image_bools(0).iter().chain(&all.image_bools(1)).all(|&x| x));
        let ones = binarize(&tiny(), 1);
        assert_eq!(ones.image_bools(1), vec![true, true, true, false, false, false]);
        assert_eq!(b.labels(), &[3, 7]);
        assert_eq!(b.input_dim(), 6);
    }

    #[test]
    fn binarize_idempotent_on_binary_data() {
        let b = binarize(&tiny(), 128);
        let as_raw = RawDataset {
            rows: 2,
            cols: 3,
            pixels: (0..b.len()).flat_map(|i| b.image_bools(i)).map(u8::from).collect(),
            labels: b.labels().to_vec(),
        };
        assert_eq!(binarize(&as_raw, 1), b);
    }

    #[test]
    fn subset_clamps() {
        let b = binarize(&tiny(), 128);
        let s = b.subset(1, 10);
        assert_eq!(s.len(), 1);
        assert_eq!(s.label(0), 7);
        assert!(b.subset(5, 5).is_empty());
    }

    #[test]
    fn split_lookup_in_directory() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = encode_idx(&tiny());
        std::fs::write(dir.path().join("t10k-images-idx3-ubyte"), img).unwrap();
        std::fs::write(dir.path().join("t10k-labels-idx1-ubyte"), lbl).unwrap();
        assert_eq!(load_split(dir.path(), Split::Test).unwrap(), tiny());
        assert!(matches!(
            load_split(dir.path(), Split::Train),
            Err(IdxError::NotFound { .. })
        ));
    }
}
