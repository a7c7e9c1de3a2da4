#![allow(dead_code)]

pub mod oracles;

use std::path::{Path, PathBuf};

use mram_snn::mnist::{encode_idx, RawDataset};
use mram_snn::rng::mix64;

/// MNIST directory from `MRAM_SNN_DATA`, else `data/mnist` at the workspace root.
pub fn mnist_dir() -> Option<PathBuf> {
    let dir = std::env::var_os("MRAM_SNN_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"));
    dir.join("train-images-idx3-ubyte").exists().then_some(dir)
}

/// Four classes of 4x4 gray images: a bright horizontal bar at row `class`,
/// plus sparse noise.
pub fn bars(count: usize, seed: u64) -> RawDataset {
    let mut s = seed;
    let mut pixels = Vec::with_capacity(count * 16);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let class = i % 4;
        for y in 0..4 {
            for _x in 0..4 {
                s = mix64(s);
                let on = y == class || s.is_multiple_of(13);
                pixels.push(if on { 200 + (s % 56) as u8 } else { (s % 100) as u8 });
            }
        }
        labels.push(class as u8);
    }
    RawDataset {
        rows: 4,
        cols: 4,
        pixels,
        labels,
    }
}

/// Write train and test splits under the standard file names.
pub fn write_split_files(dir: &Path, train: &RawDataset, test: &RawDataset) {
    for (set, stem) in [(train, "train"), (test, "t10k")] {
        let (images, labels) = encode_idx(set);
        std::fs::write(dir.join(format!("{stem}-images-idx3-ubyte")), images).unwrap();
        std::fs::write(dir.join(format!("{stem}-labels-idx1-ubyte")), labels).unwrap();
    }
}

/// Config for networks over the 4x4 bar images.
pub const BARS_CONFIG: &str = r#"
[network]
input_dim = 16
neurons = 12
max_cycles_per_image = 20

[device]
p_pot = 0.3
p_dep = 0.3

[homeostasis]
t_low = 2.0
n_active = 10
n_inactive = 200
"#;
