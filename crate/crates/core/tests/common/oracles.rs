//! Oracles shared by the property suite and the acceptance runner.
//! Written as plain index loops on purpose.
#![allow(clippy::needless_range_loop)]

use mram_snn::crossbar::SynapseArray;
use mram_snn::device::MtjState;
use mram_snn::network::Phase;
use mram_snn::neuron::NeuronState;
use mram_snn::{CounterRng, Network, SimConfig, StreamId};

/// Waiting list and winner by a plain scan over all neurons.
pub fn oracle_winner(neurons: &[NeuronState]) -> (Vec<usize>, Option<usize>) {
    let waiting: Vec<usize> = (0..neurons.len())
        .filter(|&j| neurons[j].integration >= neurons[j].threshold)
        .collect();
    let mut best: Option<usize> = None;
    for &j in &waiting {
        let rj = neurons[j].integration / neurons[j].threshold;
        let better = match best {
            None => true,
            Some(b) => {
                let rb = neurons[b].integration / neurons[b].threshold;
                rj > rb
            }
        };
        if better {
            best = Some(j);
        }
    }
    (waiting, best)
}

/// Greedy allocation by repeated global maximum search.
pub fn oracle_allocation(classes: usize, neurons: usize, counts: &[u32]) -> Vec<Option<u8>> {
    let mut label = vec![None; neurons];
    loop {
        let mut best: Option<(u32, usize, usize)> = None;
        for d in 0..classes {
            for j in 0..neurons {
                let c = counts[d * neurons + j];
                if c == 0 || label[j].is_some() {
                    continue;
                }
                // strict > while scanning in (digit, neuron) order keeps the lowest tie
                if best.is_none_or(|(bc, _, _)| c > bc) {
                    best = Some((c, d, j));
                }
            }
        }
        match best {
            Some((_, d, j)) => label[j] = Some(d as u8),
            None => return label,
        }
    }
}

pub fn random_array(rows: usize, cols: usize, bits: &[bool]) -> SynapseArray {
    let mut a = SynapseArray::new(rows, cols, MtjState::AntiParallel).unwrap();
    for r in 0..rows {
        for c in 0..cols {
            a.set(r, c, MtjState::from_bit(bits[r * cols + c]));
        }
    }
    a
}

/// Straight-line reimplementation of one clocked network, one synapse at a time.
pub struct Reference {
    input_dim: usize,
    r: usize,
    g: [f64; 2],
    p_pot: f64,
    p_dep: f64,
    leak: f64,
    t_low: f64,
    t_high: f64,
    n_active: u64,
    n_inactive: u64,
    pub synapses: Vec<Vec<bool>>,
    pub integration: Vec<f64>,
    pub threshold: Vec<f64>,
    pub last_fire: Vec<Option<u64>>,
    seen: Vec<bool>,
    pub cycle: u64,
    pending: Option<usize>,
    rng: CounterRng,
}

impl Reference {
    pub fn new(cfg: &SimConfig, synapses: Vec<Vec<bool>>) -> Self {
        let n = synapses.len();
        Self {
            input_dim: cfg.input_dim,
            r: cfg.replication,
            g: [1.0 / (1.0 + cfg.device.tmr), 1.0],
            p_pot: cfg.device.p_pot,
            p_dep: cfg.device.p_dep,
            leak: cfg.leak,
            t_low: cfg.homeostasis.t_low,
            t_high: cfg.homeostasis.t_high,
            n_active: cfg.homeostasis.n_active,
            n_inactive: cfg.homeostasis.n_inactive,
            synapses,
            integration: vec![0.0; n],
            threshold: vec![cfg.homeostasis.t_low; n],
            last_fire: vec![None; n],
            seen: vec![false; cfg.input_dim],
            cycle: 0,
            pending: None,
            // learning stream: salt 2 off the run seed
            rng: CounterRng::new(cfg.seed).derive(2),
        }
    }

    pub fn step(&mut self, input: &[bool]) -> (Phase, Option<usize>) {
        let n = self.synapses.len();
        if let Some(j) = self.pending.take() {
            for k in 0..self.input_dim {
                for c in 0..self.r {
                    let col = k * self.r + c;
                    let state = self.synapses[j][col];
                    let (target, p) = if self.seen[k] { (true, self.p_pot) } else { (false, self.p_dep) };
                    if state != target && self.rng.bernoulli(StreamId::new(self.cycle, j, col), p) {
                        self.synapses[j][col] = target;
                    }
                }
            }
            self.seen.iter_mut().for_each(|s| *s = false);
            self.integration.iter_mut().for_each(|v| *v = 0.0);
            self.cycle += 1;
            return (Phase::Learn, None);
        }
        for k in 0..self.input_dim {
            self.seen[k] |= input[k];
        }
        for j in 0..n {
            let mut sum = 0.0;
            for k in 0..self.input_dim {
                if input[k] {
                    for c in 0..self.r {
                        sum += self.g[self.synapses[j][k * self.r + c] as usize];
                    }
                }
            }
            self.integration[j] += sum;
            self.integration[j] = (self.integration[j] - self.leak).max(0.0);
        }
        for j in 0..n {
            match self.last_fire[j] {
                Some(l) if self.cycle - l <= self.n_active => self.threshold[j] = self.t_high,
                Some(l) if self.cycle - l >= self.n_inactive => self.threshold[j] = self.t_low,
                None if self.cycle >= self.n_inactive => self.threshold[j] = self.t_low,
                _ => {}
            }
        }
        let mut fired: Option<usize> = None;
        for j in 0..n {
            if self.integration[j] >= self.threshold[j] {
                let rj = self.integration[j] / self.threshold[j];
                if fired.is_none_or(|b| rj > self.integration[b] / self.threshold[b]) {
                    fired = Some(j);
                }
            }
        }
        if let Some(j) = fired {
            self.last_fire[j] = Some(self.cycle);
            self.pending = Some(j);
        }
        self.cycle += 1;
        (Phase::Integrate, fired)
    }
}

macro_rules! ensure_eq {
    ($a:expr, $b:expr, $($msg:tt)+) => {
        if $a != $b {
            return Err(format!("{}: {:?} != {:?}", format!($($msg)+), $a, $b));
        }
    };
}

/// Step a random 5-row network and the scalar reference side by side for
/// 1000 cycles. Returns the number of fires, or the first divergence.
pub fn scheduler_matches_reference(seed: u64, input_dim: usize, r: usize) -> Result<usize, String> {
    const ROWS: usize = 5;
    let mut cfg = SimConfig::small(input_dim, r, ROWS);
    cfg.seed = seed;
    cfg.leak = 0.25;
    cfg.device.p_pot = 0.3;
    cfg.device.p_dep = 0.2;
    cfg.homeostasis.t_low = 1.5;
    cfg.homeostasis.t_high = 3.0;
    cfg.homeostasis.n_active = 4;
    cfg.homeostasis.n_inactive = 25;
    cfg.validate().unwrap();

    let mut s = seed ^ 0xdead_beef;
    let mut next = move || {
        s = mram_snn::rng::mix64(s);
        s
    };
    let cols = input_dim * r;
    let bits: Vec<bool> = (0..ROWS * cols).map(|_| next() & 1 == 1).collect();
    let rows: Vec<Vec<bool>> = bits.chunks(cols).map(<[bool]>::to_vec).collect();
    let mut net = Network::with_synapses(cfg.clone(), random_array(ROWS, cols, &bits)).unwrap();
    let mut reference = Reference::new(&cfg, rows);

    let mut fires = 0;
    let mut input: Vec<bool> = vec![false; input_dim];
    for cycle in 0..1000 {
        // hold each frame a few cycles, like an image presentation
        if next() % 4 == 0 {
            input = (0..input_dim).map(|_| next() % 3 != 0).collect();
        }
        let stim = net.stimulus(&input).unwrap();
        let got = net.step(&stim).unwrap();
        let want = reference.step(&input);
        ensure_eq!((got.phase, got.fired), want, "seed {seed} cycle {cycle}");
        fires += want.1.is_some() as usize;
        ensure_eq!(net.cycle(), reference.cycle, "seed {seed} cycle {cycle}");
        for j in 0..ROWS {
            let n = &net.neurons()[j];
            ensure_eq!(n.integration.to_bits(), reference.integration[j].to_bits(), "seed {seed} cycle {cycle} neuron {j} integration");
            ensure_eq!(n.threshold, reference.threshold[j], "seed {seed} cycle {cycle} neuron {j} threshold");
            ensure_eq!(n.last_fire_cycle, reference.last_fire[j], "seed {seed} cycle {cycle} neuron {j} last fire");
            for c in 0..cols {
                ensure_eq!(
                    net.synapses().get(j, c).is_parallel(),
                    reference.synapses[j][c],
                    "seed {seed} cycle {cycle} synapse ({j}, {c})"
                );
            }
        }
    }
    // the comparison is only meaningful if learning actually happened
    if fires <= 50 {
        return Err(format!("seed {seed}: only {fires} fires"));
    }
    Ok(fires)
}

