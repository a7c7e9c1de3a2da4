//! Binary model snapshots.
//!
//! Layout (all integers little-endian, floats as IEEE-754 bit patterns):
//!
//! ```text
//! magic            8 bytes  "MRAMSNN1"
//! version          u32      FORMAT_VERSION
//! config           input_dim u32, r u32, neurons u32, max_cycles u32,
//!                  leak, init_parallel, tmr, p_pot, p_dep, t_low, t_high (f64),
//!                  n_active u64, n_inactive u64, homeostasis_during_eval u8,
//!                  binarize_threshold u8, train_offset u64, train_count u64,
//!                  test_count u64, epochs u32, seed u64
//! dimensions       rows u32, cols u32, words_per_row u32
//! clock            cycle u64, pending_fire u64, learning u8, homeostasis u8
//! synapses         rows * words_per_row u64 (bit c of a row = column c, 1 = Parallel)
//! neurons          per neuron: integration f64, threshold f64, last_fire_cycle u64
//! trace            ceil(input_dim / 64) u64
//! allocation       present u8; if 1: classes u32, classes * neurons u32 counts
//! ```
//!
//! Optional counts and cycles use `u64::MAX` for "none". The data directory
//! is not stored. Because learning draws are keyed by `(seed, cycle, row, col)`,
//! the seed and cycle counter are all the RNG state needed to resume.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::allocation::AllocationMap;
use crate::config::{DataConfig, SimConfig};
use crate::crossbar::{words_for, SynapseArray};
use crate::device::DeviceConfig;
use crate::network::Network;
use crate::neuron::{HomeostasisConfig, NeuronState};
use crate::stdp::InputTrace;

pub const MAGIC: &[u8; 8] = b"MRAMSNN1";
pub const FORMAT_VERSION: u32 = 1;
const NONE: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("cannot access snapshot {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a snapshot: bad magic")]
    BadMagic,
    #[error("snapshot format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("snapshot truncated while reading {0}")]
    Truncated(&'static str),
    #[error("inconsistent snapshot: {0}")]
    Inconsistent(String),
}

/// A network with its optional post-training allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub network: Network,
    pub allocation: Option<AllocationMap>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend(v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend(v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn opt(&mut self, v: Option<u64>) {
        self.u64(v.unwrap_or(NONE));
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], SnapshotError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(SnapshotError::Truncated(what))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self, what: &'static str) -> Result<u8, SnapshotError> {
        Ok(self.take(1, what)?[0])
    }
    fn u32(&mut self, what: &'static str) -> Result<u32, SnapshotError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn u64(&mut self, what: &'static str) -> Result<u64, SnapshotError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn f64(&mut self, what: &'static str) -> Result<f64, SnapshotError> {
        Ok(f64::from_bits(self.u64(what)?))
    }
    fn opt(&mut self, what: &'static str) -> Result<Option<u64>, SnapshotError> {
        Ok(Some(self.u64(what)?).filter(|&v| v != NONE))
    }
    fn flag(&mut self, what: &'static str) -> Result<bool, SnapshotError> {
        match self.u8(what)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(SnapshotError::Inconsistent(format!("{what} flag is {other}"))),
        }
    }
}

fn to_u32(v: usize, what: &str) -> u32 {
    u32::try_from(v).unwrap_or_else(|_| panic!("{what} exceeds u32"))
}

fn write_config(w: &mut Writer, c: &SimConfig) {
    w.u32(to_u32(c.input_dim, "input_dim"));
    w.u32(to_u32(c.replication, "replication"));
    w.u32(to_u32(c.neurons, "neurons"));
    w.u32(c.max_cycles_per_image);
    for v in [
        c.leak,
        c.init_parallel,
        c.device.tmr,
        c.device.p_pot,
        c.device.p_dep,
        c.homeostasis.t_low,
        c.homeostasis.t_high,
    ] {
        w.f64(v);
    }
    w.u64(c.homeostasis.n_active);
    w.u64(c.homeostasis.n_inactive);
    w.u8(c.homeostasis_during_eval as u8);
    w.u8(c.data.binarize_threshold);
    w.u64(c.data.train_offset as u64);
    w.opt(c.data.train_count.map(|v| v as u64));
    w.opt(c.data.test_count.map(|v| v as u64));
    w.u32(c.data.epochs);
    w.u64(c.seed);
}

fn read_config(r: &mut Reader) -> Result<SimConfig, SnapshotError> {
    let input_dim = r.u32("config")? as usize;
    let replication = r.u32("config")? as usize;
    let neurons = r.u32("config")? as usize;
    let max_cycles_per_image = r.u32("config")?;
    let leak = r.f64("config")?;
    let init_parallel = r.f64("config")?;
    let tmr = r.f64("config")?;
    let p_pot = r.f64("config")?;
    let p_dep = r.f64("config")?;
    let t_low = r.f64("config")?;
    let t_high = r.f64("config")?;
    let n_active = r.u64("config")?;
    let n_inactive = r.u64("config")?;
    let homeostasis_during_eval = r.flag("config")?;
    let binarize_threshold = r.u8("config")?;
    let train_offset = r.u64("config")? as usize;
    let train_count = r.opt("config")?.map(|v| v as usize);
    let test_count = r.opt("config")?.map(|v| v as usize);
    let epochs = r.u32("config")?;
    let seed = r.u64("config")?;
    let cfg = SimConfig {
        input_dim,
        replication,
        neurons,
        leak,
        max_cycles_per_image,
        init_parallel,
        device: DeviceConfig { tmr, p_pot, p_dep },
        homeostasis: HomeostasisConfig {
            t_high,
            t_low,
            n_active,
            n_inactive,
        },
        homeostasis_during_eval,
        seed,
        data: DataConfig {
            dir: None,
            binarize_threshold,
            train_offset,
            train_count,
            test_count,
            epochs,
        },
    };
    cfg.validate()
        .map_err(|e| SnapshotError::Inconsistent(format!("stored config invalid: {e}")))?;
    Ok(cfg)
}

impl Snapshot {
    pub fn new(network: Network, allocation: Option<AllocationMap>) -> Self {
        Self {
            network,
            allocation,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let net = &self.network;
        let cfg = net.config();
        let a = net.synapses();
        let mut w = Writer(Vec::with_capacity(256 + a.words().len() * 8 + cfg.neurons * 24));
        w.0.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);
        write_config(&mut w, cfg);
        w.u32(to_u32(a.rows(), "rows"));
        w.u32(to_u32(a.cols(), "cols"));
        w.u32(to_u32(a.words_per_row(), "words_per_row"));
        w.u64(net.cycle());
        w.opt(net.pending_fire().map(|j| j as u64));
        w.u8(net.learning_enabled() as u8);
        w.u8(net.homeostasis_enabled() as u8);
        for &word in a.words() {
            w.u64(word);
        }
        for n in net.neurons() {
            w.f64(n.integration);
            w.f64(n.threshold);
            w.opt(n.last_fire_cycle);
        }
        for &word in net.trace().words() {
            w.u64(word);
        }
        match &self.allocation {
            None => w.u8(0),
            Some(m) => {
                w.u8(1);
                w.u32(to_u32(m.classes(), "classes"));
                for &c in m.counts() {
                    w.u32(c);
                }
            }
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SnapshotError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len(), "magic").map_err(|_| SnapshotError::BadMagic)? != MAGIC {
            return Err(SnapshotError::BadMagic);
        }
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(SnapshotError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let cfg = read_config(&mut r)?;
        let rows = r.u32("dimensions")? as usize;
        let cols = r.u32("dimensions")? as usize;
        let wpr = r.u32("dimensions")? as usize;
        if rows != cfg.neurons || cols != cfg.cols() || wpr != words_for(cols) {
            return Err(SnapshotError::Inconsistent(format!(
                "crossbar {rows}x{cols} ({wpr} words/row) does not match config {}x{}",
                cfg.neurons,
                cfg.cols()
            )));
        }
        let cycle = r.u64("clock")?;
        let pending = r.opt("clock")?.map(|v| v as usize);
        let learning = r.flag("clock")?;
        let homeostasis = r.flag("clock")?;

        let n_words = rows
            .checked_mul(wpr)
            .ok_or_else(|| SnapshotError::Inconsistent("crossbar too large".into()))?;
        let raw = r.take(n_words.saturating_mul(8), "synapses")?;
        let words: Vec<u64> = raw
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let synapses = SynapseArray::from_words(rows, cols, words)
            .map_err(|e| SnapshotError::Inconsistent(e.to_string()))?;

        let mut neurons = Vec::with_capacity(rows);
        for _ in 0..rows {
            neurons.push(NeuronState {
                integration: r.f64("neurons")?,
                threshold: r.f64("neurons")?,
                last_fire_cycle: r.opt("neurons")?,
            });
        }
        let trace_words = (0..words_for(cfg.input_dim))
            .map(|_| r.u64("trace"))
            .collect::<Result<Vec<_>, _>>()?;
        let trace = InputTrace::from_words(cfg.input_dim, trace_words)
            .map_err(|e| SnapshotError::Inconsistent(e.to_string()))?;

        let allocation = if r.flag("allocation")? {
            let classes = r.u32("allocation")? as usize;
            let counts = (0..classes * rows)
                .map(|_| r.u32("allocation"))
                .collect::<Result<Vec<_>, _>>()?;
            if classes > 256 {
                return Err(SnapshotError::Inconsistent(format!("{classes} classes")));
            }
            Some(AllocationMap::from_counts(classes, rows, counts))
        } else {
            None
        };
        if r.pos != bytes.len() {
            return Err(SnapshotError::Inconsistent(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }

        let mut network = Network::from_parts(cfg, synapses, neurons, trace, cycle, pending)
            .map_err(|e| SnapshotError::Inconsistent(e.to_string()))?;
        network.set_learning(learning);
        network.set_homeostasis(homeostasis);
        Ok(Self {
            network,
            allocation,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), SnapshotError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| SnapshotError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, SnapshotError> {
        let bytes = std::fs::read(path).map_err(|source| SnapshotError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Stimulus;

    fn busy_network() -> Network {
        let mut cfg = SimConfig::small(20, 3, 7);
        cfg.homeostasis.t_low = 4.0;
        cfg.homeostasis.t_high = 12.0;
        cfg.device.p_pot = 0.4;
        cfg.device.p_dep = 0.2;
        cfg.data.train_count = Some(33);
        let mut net = Network::new(cfg).unwrap();
        for t in 0..41u64 {
            let input: Vec<bool> = (0..20).map(|k| (k as u64 * 7 + t) % 5 < 2).collect();
            net.step(&Stimulus::from_bools(&input, 3)).unwrap();
        }
        net
    }

    #[test]
    fn roundtrip_is_exact() {
        let net = busy_network();
        let alloc = AllocationMap::from_counts(10, 7, (0..70).map(|i| (i * 13 % 5) as u32).collect());
        for snap in [Snapshot::new(net.clone(), None), Snapshot::new(net, Some(alloc))] {
            let bytes = snap.to_bytes();
            let back = Snapshot::from_bytes(&bytes).unwrap();
            assert_eq!(back, snap);
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let mut bytes = Snapshot::new(busy_network(), None).to_bytes();
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(matches!(Snapshot::from_bytes(&wrong), Err(SnapshotError::BadMagic)));
        assert!(matches!(Snapshot::from_bytes(b"MRA"), Err(SnapshotError::BadMagic)));
        bytes[8] = 2;
        assert!(matches!(
            Snapshot::from_bytes(&bytes),
            Err(SnapshotError::VersionMismatch { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn rejects_every_truncation() {
        let bytes = Snapshot::new(busy_network(), None).to_bytes();
        for len in (0..bytes.len()).step_by(7).chain([bytes.len() - 1]) {
            assert!(Snapshot::from_bytes(&bytes[..len]).is_err(), "len {len}");
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(Snapshot::from_bytes(&long), Err(SnapshotError::Inconsistent(_))));
    }

    #[test]
    fn rejects_dimension_inconsistency() {
        let mut bytes = Snapshot::new(busy_network(), None).to_bytes();
        // rows field sits right after the config block
        let rows_at = 8 + 4 + 16 + 7 * 8 + 16 + 2 + 24 + 4 + 8;
        assert_eq!(u32::from_le_bytes(bytes[rows_at..rows_at + 4].try_into().unwrap()), 7);
        bytes[rows_at] = 8;
        assert!(matches!(Snapshot::from_bytes(&bytes), Err(SnapshotError::Inconsistent(_))));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let snap = Snapshot::new(busy_network(), None);
        snap.save(&path).unwrap();
        assert_eq!(Snapshot::load(&path).unwrap(), snap);
        assert!(matches!(
            Snapshot::load(&dir.path().join("missing")),
            Err(SnapshotError::Io { .. })
        ));
    }
}
