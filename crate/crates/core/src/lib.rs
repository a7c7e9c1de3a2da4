//! Behavioral simulator of a synchronous spiking neural network whose
//! synapses are binary stochastic STT-MRAM junctions.
//!
//! The crate is organised bottom-up:
//!
//! * [`rng`] and [`device`]: counter-based draws and the two-state junction model.
//! * [`crossbar`]: the bit-packed synapse matrix.
//! * [`neuron`], [`stdp`], [`network`]: output neurons, the learning block and
//!   the clocked scheduler.
//! * [`mnist`], [`harness`], [`allocation`], [`sweep`], [`weights`]: data
//!   ingestion and the train / allocate / evaluate pipeline.
//! * [`config`], [`snapshot`]: configuration files and model persistence.

pub mod allocation;
pub mod config;
pub mod crossbar;
pub mod device;
pub mod error;
pub mod harness;
pub mod mnist;
pub mod network;
pub mod neuron;
pub mod rng;
pub mod snapshot;
pub mod stdp;
pub mod sweep;
pub mod weights;

pub use allocation::AllocationMap;
pub use config::{parse_config, ConfigError, RawConfig, SimConfig};
pub use crossbar::SynapseArray;
pub use device::{conductance, stochastic_switch, DeviceConfig, MtjState, Pulse};
pub use error::SimError;
pub use harness::{allocate, evaluate, present_until_fire, run_experiment, train, RunReport};
pub use mnist::{binarize, load_idx, BinarizedDataset};
pub use network::{CycleOutcome, Network, Phase, Stimulus};
pub use neuron::{HomeostasisConfig, NeuronState};
pub use rng::{CounterRng, StreamId};
pub use snapshot::Snapshot;
pub use stdp::InputTrace;
