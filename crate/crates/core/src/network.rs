//! The clocked network: crossbar, output neurons, learning block and the
//! two-phase cycle scheduler.
//!
//! Every cycle is either an *integrate* cycle or a *learn* cycle. An integrate
//! cycle drives the crossbar with the current input, integrates each row, leaks,
//! updates thresholds and runs winner-take-all. If a neuron fires, the next
//! cycle is a learn cycle: the fired row receives STDP pulses, all neurons are
//! reset and the input is ignored.

use rayon::prelude::*;

use crate::config::SimConfig;
use crate::crossbar::{pack_bools, words_for, SynapseArray};
use crate::device::DeviceConfig;
use crate::error::SimError;
use crate::neuron::{self, NeuronState};
use crate::rng::CounterRng;
use crate::stdp::{apply_learning_packed, InputTrace};

const INIT_STREAM: u64 = 1;
const LEARN_STREAM: u64 = 2;

/// Below this many crossbar words per cycle, row integration stays sequential.
const PARALLEL_MIN_WORDS: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Integrate,
    Learn,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleOutcome {
    pub phase: Phase,
    pub fired: Option<usize>,
    pub waiting_list: Vec<usize>,
}

/// One binary input frame, packed per pixel and expanded to the `r` copies of
/// each pixel along the crossbar columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stimulus {
    input_dim: usize,
    replication: usize,
    pixels: Vec<u64>,
    columns: Vec<u64>,
    active_columns: u32,
}

impl Stimulus {
    pub fn from_bools(input: &[bool], replication: usize) -> Self {
        Self::from_packed(&pack_bools(input), input.len(), replication)
            .expect("packed length matches")
    }

    pub fn from_packed(
        pixels: &[u64],
        input_dim: usize,
        replication: usize,
    ) -> Result<Self, SimError> {
        if pixels.len() != words_for(input_dim) {
            return Err(SimError::DimensionMismatch {
                expected: words_for(input_dim),
                got: pixels.len(),
            });
        }
        let columns = expand_columns(pixels, input_dim, replication);
        let active_columns = columns.iter().map(|w| w.count_ones()).sum();
        Ok(Self {
            input_dim,
            replication,
            pixels: pixels.to_vec(),
            columns,
            active_columns,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn pixels(&self) -> &[u64] {
        &self.pixels
    }

    pub fn columns(&self) -> &[u64] {
        &self.columns
    }

    pub fn active_columns(&self) -> u32 {
        self.active_columns
    }

    fn check(&self, input_dim: usize, replication: usize) -> Result<(), SimError> {
        if self.input_dim != input_dim || self.replication != replication {
            return Err(SimError::DimensionMismatch {
                expected: input_dim * replication,
                got: self.input_dim * self.replication,
            });
        }
        Ok(())
    }
}

/// Pixel bit `k` becomes column bits `k*r .. k*r + r`.
pub fn expand_columns(pixels: &[u64], input_dim: usize, replication: usize) -> Vec<u64> {
    if replication == 1 {
        return pixels.to_vec();
    }
    let mut out = vec![0u64; words_for(input_dim * replication)];
    for (w, &word) in pixels.iter().enumerate() {
        let mut bits = word;
        while bits != 0 {
            let k = w * 64 + bits.trailing_zeros() as usize;
            bits &= bits - 1;
            for col in k * replication..(k + 1) * replication {
                out[col / 64] |= 1u64 << (col % 64);
            }
        }
    }
    out
}

/// Add each row's crossbar current for this input to its neuron.
pub fn integrate_cycle(
    array: &SynapseArray,
    input: &Stimulus,
    neurons: &mut [NeuronState],
    device: &DeviceConfig,
) -> Result<(), SimError> {
    if input.columns.len() != array.words_per_row()
        || input.input_dim * input.replication != array.cols()
    {
        return Err(SimError::DimensionMismatch {
            expected: array.cols(),
            got: input.input_dim * input.replication,
        });
    }
    if neurons.len() != array.rows() {
        return Err(SimError::DimensionMismatch {
            expected: array.rows(),
            got: neurons.len(),
        });
    }
    let g_p = device.g_parallel();
    let g_ap = device.g_antiparallel();
    let active = input.active_columns;
    let mask = input.columns.as_slice();
    let update = |(row, n): (usize, &mut NeuronState)| {
        let parallel = array.overlap(row, mask);
        n.integration += parallel as f64 * g_p + (active - parallel) as f64 * g_ap;
    };
    if array.rows() * array.words_per_row() >= PARALLEL_MIN_WORDS {
        neurons.par_iter_mut().enumerate().with_min_len(64).for_each(update);
    } else {
        neurons.iter_mut().enumerate().for_each(update);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: SimConfig,
    synapses: SynapseArray,
    neurons: Vec<NeuronState>,
    trace: InputTrace,
    cycle: u64,
    pending_fire: Option<usize>,
    learning: bool,
    homeostasis: bool,
    learn_rng: CounterRng,
}

impl Network {
    /// Fresh network with randomly initialized synapses.
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        config
            .validate()
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        let init_rng = CounterRng::new(config.seed).derive(INIT_STREAM);
        let synapses = crate::device::init_random(
            config.neurons,
            config.cols(),
            config.init_parallel,
            &init_rng,
        )?;
        Self::with_synapses(config, synapses)
    }

    /// Network around an explicit crossbar, all neurons cold.
    pub fn with_synapses(config: SimConfig, synapses: SynapseArray) -> Result<Self, SimError> {
        if synapses.rows() != config.neurons || synapses.cols() != config.cols() {
            return Err(SimError::InvalidConfig(format!(
                "crossbar is {}x{}, config expects {}x{}",
                synapses.rows(),
                synapses.cols(),
                config.neurons,
                config.cols()
            )));
        }
        let neurons = vec![NeuronState::cold(config.homeostasis.t_low); config.neurons];
        Ok(Self {
            trace: InputTrace::new(config.input_dim),
            learn_rng: CounterRng::new(config.seed).derive(LEARN_STREAM),
            config,
            synapses,
            neurons,
            cycle: 0,
            pending_fire: None,
            learning: true,
            homeostasis: true,
        })
    }

    /// Reassemble a network from saved state.
    pub fn from_parts(
        config: SimConfig,
        synapses: SynapseArray,
        neurons: Vec<NeuronState>,
        trace: InputTrace,
        cycle: u64,
        pending_fire: Option<usize>,
    ) -> Result<Self, SimError> {
        let mut net = Self::with_synapses(config, synapses)?;
        if neurons.len() != net.config.neurons {
            return Err(SimError::DimensionMismatch {
                expected: net.config.neurons,
                got: neurons.len(),
            });
        }
        if trace.input_dim() != net.config.input_dim {
            return Err(SimError::DimensionMismatch {
                expected: net.config.input_dim,
                got: trace.input_dim(),
            });
        }
        if let Some(row) = pending_fire {
            if row >= net.config.neurons {
                return Err(SimError::RowOutOfRange {
                    row,
                    rows: net.config.neurons,
                });
            }
        }
        net.neurons = neurons;
        net.trace = trace;
        net.cycle = cycle;
        net.pending_fire = pending_fire;
        Ok(net)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn synapses(&self) -> &SynapseArray {
        &self.synapses
    }

    pub fn neurons(&self) -> &[NeuronState] {
        &self.neurons
    }

    /// Direct access for tests and tools that stage neuron state.
    pub fn neurons_mut(&mut self) -> &mut [NeuronState] {
        &mut self.neurons
    }

    pub fn trace(&self) -> &InputTrace {
        &self.trace
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn pending_fire(&self) -> Option<usize> {
        self.pending_fire
    }

    /// Phase the next call to `step` will execute.
    pub fn next_phase(&self) -> Phase {
        if self.pending_fire.is_some() {
            Phase::Learn
        } else {
            Phase::Integrate
        }
    }

    pub fn learning_enabled(&self) -> bool {
        self.learning
    }

    pub fn set_learning(&mut self, on: bool) {
        self.learning = on;
    }

    pub fn homeostasis_enabled(&self) -> bool {
        self.homeostasis
    }

    pub fn set_homeostasis(&mut self, on: bool) {
        self.homeostasis = on;
    }

    pub fn stimulus(&self, input: &[bool]) -> Result<Stimulus, SimError> {
        if input.len() != self.config.input_dim {
            return Err(SimError::DimensionMismatch {
                expected: self.config.input_dim,
                got: input.len(),
            });
        }
        Ok(Stimulus::from_bools(input, self.config.replication))
    }

    pub fn stimulus_packed(&self, pixels: &[u64]) -> Result<Stimulus, SimError> {
        Stimulus::from_packed(pixels, self.config.input_dim, self.config.replication)
    }

    /// Clear integrations and the input trace between presentations.
    /// Has no effect on a pending learn cycle.
    pub fn clear_transients(&mut self) {
        neuron::reset_all(&mut self.neurons);
        self.trace.clear();
    }

    /// Advance one clock cycle.
    pub fn step(&mut self, input: &Stimulus) -> Result<CycleOutcome, SimError> {
        self.advance(input, true)
    }

    /// Same as [`step`](Self::step) without building the waiting list.
    pub fn step_quiet(&mut self, input: &Stimulus) -> Result<(Phase, Option<usize>), SimError> {
        let out = self.advance(input, false)?;
        Ok((out.phase, out.fired))
    }

    fn advance(&mut self, input: &Stimulus, full: bool) -> Result<CycleOutcome, SimError> {
        input.check(self.config.input_dim, self.config.replication)?;
        if let Some(row) = self.pending_fire.take() {
            self.learn(row);
            self.cycle += 1;
            return Ok(CycleOutcome {
                phase: Phase::Learn,
                fired: None,
                waiting_list: Vec::new(),
            });
        }

        self.trace.record_packed(&input.pixels);
        integrate_cycle(&self.synapses, input, &mut self.neurons, &self.config.device)?;
        neuron::leak_cycle(&mut self.neurons, self.config.leak);
        if self.homeostasis {
            neuron::adjust_thresholds(&mut self.neurons, self.cycle, &self.config.homeostasis);
        }
        let (fired, waiting_list) = if full {
            let sel = neuron::select_winner(&self.neurons);
            (sel.fired, sel.waiting_list)
        } else {
            (neuron::winner(&self.neurons), Vec::new())
        };
        if let Some(j) = fired {
            self.neurons[j].last_fire_cycle = Some(self.cycle);
            self.pending_fire = Some(j);
        }
        self.cycle += 1;
        Ok(CycleOutcome {
            phase: Phase::Integrate,
            fired,
            waiting_list,
        })
    }

    fn learn(&mut self, row: usize) {
        if self.learning {
            let potentiate = expand_columns(
                self.trace.words(),
                self.config.input_dim,
                self.config.replication,
            );
            apply_learning_packed(
                &mut self.synapses,
                row,
                &potentiate,
                &self.config.device,
                &self.learn_rng,
                self.cycle,
            );
        }
        self.trace.clear();
        neuron::reset_all(&mut self.neurons);
    }
}
