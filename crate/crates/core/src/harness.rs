//! Train / allocate / evaluate pipeline.
//!
//! Each image is presented repeatedly until some neuron fires or
//! `max_cycles_per_image` integrate cycles pass. The learn cycle that follows
//! a fire runs before the next image. Integrations and the input trace are
//! cleared between images.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::allocation::{AllocationCounter, AllocationMap};
use crate::config::SimConfig;
use crate::error::SimError;
use crate::mnist::BinarizedDataset;
use crate::network::{Network, Phase, Stimulus};

pub const NUM_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    /// Winning neuron, or `None` on timeout.
    pub fired: Option<usize>,
    /// Integrate cycles spent on the image.
    pub cycles: u32,
}

/// Step `network` with `input` until a fire (followed by its learn cycle) or a timeout.
pub fn present_until_fire(
    network: &mut Network,
    input: &Stimulus,
    max_cycles: u32,
) -> Result<Presentation, SimError> {
    if network.next_phase() == Phase::Learn {
        network.step_quiet(input)?;
    }
    network.clear_transients();
    for cycle in 1..=max_cycles {
        let (_, fired) = network.step_quiet(input)?;
        if let Some(j) = fired {
            let (phase, _) = network.step_quiet(input)?;
            debug_assert_eq!(phase, Phase::Learn);
            return Ok(Presentation {
                fired: Some(j),
                cycles: cycle,
            });
        }
    }
    Ok(Presentation {
        fired: None,
        cycles: max_cycles,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epoch: u32,
    pub image: usize,
    pub label: u8,
    pub fired: Option<usize>,
    pub cycles: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
}

impl TrainLog {
    pub fn fires(&self) -> usize {
        self.records.iter().filter(|r| r.fired.is_some()).count()
    }

    pub fn timeouts(&self) -> usize {
        self.records.len() - self.fires()
    }

    /// One JSON object per line.
    pub fn write_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save_jsonl(&self, path: &Path) -> std::io::Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_jsonl(&mut w)?;
        w.flush()
    }
}

fn check_dims(network: &Network, data: &BinarizedDataset) -> Result<(), SimError> {
    if !data.is_empty() && data.input_dim() != network.config().input_dim {
        return Err(SimError::DimensionMismatch {
            expected: network.config().input_dim,
            got: data.input_dim(),
        });
    }
    Ok(())
}

/// Online training: every presentation that fires applies STDP to the winner.
pub fn train(
    network: &mut Network,
    data: &BinarizedDataset,
    epochs: u32,
) -> Result<TrainLog, SimError> {
    check_dims(network, data)?;
    network.set_learning(true);
    network.set_homeostasis(true);
    let max_cycles = network.config().max_cycles_per_image;
    let mut log = TrainLog {
        records: Vec::with_capacity(data.len() * epochs as usize),
    };
    for epoch in 0..epochs {
        for i in 0..data.len() {
            let stim = network.stimulus_packed(data.image_words(i))?;
            let p = present_until_fire(network, &stim, max_cycles)?;
            log.records.push(TrainRecord {
                epoch,
                image: i,
                label: data.label(i),
                fired: p.fired,
                cycles: p.cycles,
            });
            if (i + 1) % 5000 == 0 {
                log::debug!("epoch {epoch}: {} images presented", i + 1);
            }
        }
    }
    Ok(log)
}

/// Frozen copy of `network` for allocation and evaluation passes.
fn frozen(network: &Network) -> Network {
    let mut net = network.clone();
    if net.next_phase() == Phase::Learn {
        // finish the outstanding learn cycle with learning off: reset only
        net.set_learning(false);
        let stim = Stimulus::from_packed(
            &vec![0; crate::crossbar::words_for(net.config().input_dim)],
            net.config().input_dim,
            net.config().replication,
        )
        .expect("well-formed blank input");
        net.step_quiet(&stim).expect("blank input matches");
    }
    net.set_learning(false);
    let adaptive = net.config().homeostasis_during_eval;
    net.set_homeostasis(adaptive);
    net
}

/// Count winners per digit over `data` with learning disabled, then allocate.
pub fn allocate(network: &Network, data: &BinarizedDataset) -> Result<AllocationMap, SimError> {
    check_dims(network, data)?;
    let mut net = frozen(network);
    let max_cycles = net.config().max_cycles_per_image;
    let mut counter = AllocationCounter::new(NUM_CLASSES, net.config().neurons);
    for i in 0..data.len() {
        let stim = net.stimulus_packed(data.image_words(i))?;
        if let Some(j) = present_until_fire(&mut net, &stim, max_cycles)?.fired {
            counter.record(data.label(i), j);
        }
    }
    Ok(counter.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub accuracy: f64,
    pub correct: u64,
    pub total: u64,
    pub per_digit_correct: Vec<u64>,
    pub per_digit_total: Vec<u64>,
    /// Test images for which no neuron fired.
    pub no_fire_count: u64,
    /// Test images won by a neuron that has no digit.
    pub unallocated_fire_count: u64,
    /// `histogram[c]` counts images that fired after `c` integrate cycles.
    pub cycle_histogram: Vec<u64>,
    pub allocated_neurons: usize,
    pub config: SimConfig,
    pub seed: u64,
}

impl RunReport {
    pub fn per_digit_accuracy(&self) -> Vec<Option<f64>> {
        self.per_digit_correct
            .iter()
            .zip(&self.per_digit_total)
            .map(|(&c, &t)| (t > 0).then(|| c as f64 / t as f64))
            .collect()
    }
}

/// Classify `data` with the allocated neurons. Timeouts and unallocated
/// winners count as errors. The synapses of `network` are not touched.
pub fn evaluate(
    network: &Network,
    allocation: &AllocationMap,
    data: &BinarizedDataset,
) -> Result<RunReport, SimError> {
    check_dims(network, data)?;
    let mut net = frozen(network);
    let max_cycles = net.config().max_cycles_per_image;
    let mut per_digit_correct = vec![0u64; NUM_CLASSES];
    let mut per_digit_total = vec![0u64; NUM_CLASSES];
    let mut cycle_histogram = vec![0u64; max_cycles as usize + 1];
    let (mut no_fire, mut unallocated) = (0u64, 0u64);
    for i in 0..data.len() {
        let label = data.label(i);
        per_digit_total[label as usize] += 1;
        let stim = net.stimulus_packed(data.image_words(i))?;
        let p = present_until_fire(&mut net, &stim, max_cycles)?;
        match p.fired {
            None => no_fire += 1,
            Some(j) => {
                cycle_histogram[p.cycles as usize] += 1;
                match allocation.label_of(j) {
                    Some(d) if d == label => per_digit_correct[label as usize] += 1,
                    Some(_) => {}
                    None => unallocated += 1,
                }
            }
        }
    }
    let correct: u64 = per_digit_correct.iter().sum();
    let total = data.len() as u64;
    Ok(RunReport {
        accuracy: if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        },
        correct,
        total,
        per_digit_correct,
        per_digit_total,
        no_fire_count: no_fire,
        unallocated_fire_count: unallocated,
        cycle_histogram,
        allocated_neurons: allocation.allocated(),
        config: network.config().clone(),
        seed: network.config().seed,
    })
}

/// Everything a full run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub network: Network,
    pub train_log: TrainLog,
    pub allocation: AllocationMap,
    pub report: RunReport,
}

/// Fresh network, train on `train_set`, allocate on it, evaluate on `test_set`.
pub fn run_experiment(
    config: &SimConfig,
    train_set: &BinarizedDataset,
    test_set: &BinarizedDataset,
) -> Result<RunOutput, SimError> {
    let mut network = Network::new(config.clone())?;
    let train_log = train(&mut network, train_set, config.data.epochs)?;
    let allocation = allocate(&network, train_set)?;
    let report = evaluate(&network, &allocation, test_set)?;
    Ok(RunOutput {
        network,
        train_log,
        allocation,
        report,
    })
}
