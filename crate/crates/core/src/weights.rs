//! Receptive-field images of trained neurons.
//!
//! Each neuron's row is rendered as a square image per synapse copy, Parallel
//! white and AntiParallel black. With `r > 1` a majority-vote composite is
//! written as well (a pixel is white when more than half of its copies are
//! Parallel).

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::network::Network;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("input dimension {0} is not a square image")]
    NotSquare(usize),
    #[error("neuron {neuron} out of range ({neurons} neurons)")]
    NeuronOutOfRange { neuron: usize, neurons: usize },
}

/// Binary PGM (`P5`, maxval 255).
pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<(), ExportError> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&encode_pgm(width, height, pixels)))
        .map_err(|source| ExportError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn side_of(input_dim: usize) -> Result<usize, ExportError> {
    let side = (input_dim as f64).sqrt().round() as usize;
    if side * side == input_dim {
        Ok(side)
    } else {
        Err(ExportError::NotSquare(input_dim))
    }
}

/// Gray levels of copy `copy` of `neuron`'s synapses, one byte per pixel.
pub fn copy_map(network: &Network, neuron: usize, copy: usize) -> Vec<u8> {
    let cfg = network.config();
    let a = network.synapses();
    (0..cfg.input_dim)
        .map(|k| {
            if a.get(neuron, k * cfg.replication + copy).is_parallel() {
                255
            } else {
                0
            }
        })
        .collect()
}

/// Majority-vote map over all copies.
pub fn majority_map(network: &Network, neuron: usize) -> Vec<u8> {
    let cfg = network.config();
    let r = cfg.replication;
    let a = network.synapses();
    (0..cfg.input_dim)
        .map(|k| {
            let parallel = (0..r).filter(|&c| a.get(neuron, k * r + c).is_parallel()).count();
            if 2 * parallel > r {
                255
            } else {
                0
            }
        })
        .collect()
}

/// Write the maps of `neurons` into `out_dir`; returns the files written.
pub fn export_weight_maps(
    network: &Network,
    neurons: &[usize],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ExportError> {
    let cfg = network.config();
    let side = side_of(cfg.input_dim)?;
    std::fs::create_dir_all(out_dir).map_err(|source| ExportError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for &j in neurons {
        if j >= cfg.neurons {
            return Err(ExportError::NeuronOutOfRange {
                neuron: j,
                neurons: cfg.neurons,
            });
        }
        if cfg.replication == 1 {
            let path = out_dir.join(format!("neuron_{j:05}.pgm"));
            write_pgm(&path, side, side, &copy_map(network, j, 0))?;
            written.push(path);
            continue;
        }
        for c in 0..cfg.replication {
            let path = out_dir.join(format!("neuron_{j:05}_copy{c}.pgm"));
            write_pgm(&path, side, side, &copy_map(network, j, c))?;
            written.push(path);
        }
        let path = out_dir.join(format!("neuron_{j:05}_majority.pgm"));
        write_pgm(&path, side, side, &majority_map(network, j))?;
        written.push(path);
    }
    Ok(written)
}

/// Tile the majority maps of `neurons` into one image, `columns` per row,
/// separated by a one-pixel gray border.
pub fn export_weight_grid(
    network: &Network,
    neurons: &[usize],
    columns: usize,
    path: &Path,
) -> Result<(), ExportError> {
    let side = side_of(network.config().input_dim)?;
    let columns = columns.max(1);
    let rows = neurons.len().div_ceil(columns).max(1);
    let cell = side + 1;
    let (w, h) = (columns * cell + 1, rows * cell + 1);
    let mut pixels = vec![128u8; w * h];
    for (i, &j) in neurons.iter().enumerate() {
        if j >= network.config().neurons {
            return Err(ExportError::NeuronOutOfRange {
                neuron: j,
                neurons: network.config().neurons,
            });
        }
        let map = majority_map(network, j);
        let (ox, oy) = ((i % columns) * cell + 1, (i / columns) * cell + 1);
        for y in 0..side {
            let dst = (oy + y) * w + ox;
            pixels[dst..dst + side].copy_from_slice(&map[y * side..(y + 1) * side]);
        }
    }
    write_pgm(path, w, h, &pixels)
}

/// Text rendering for terminals: `#` for white pixels, `.` for black.
pub fn ascii_map(map: &[u8], side: usize) -> String {
    map.chunks(side)
        .map(|row| row.iter().map(|&p| if p > 127 { '#' } else { '.' }).collect::<String>())
        .collect::<Vec<_>>()
        .join("\n")
}
