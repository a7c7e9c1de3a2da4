//! Binary MTJ synapse model.
//!
//! A synapse is a magnetic tunnel junction in one of two states. The parallel
//! state has the low resistance; its conductance is the unit of every current
//! and threshold in the simulator. The anti-parallel conductance follows from
//! the tunnel magnetoresistance `TMR = (R_AP - R_P) / R_P`.
//!
//! Switching is stochastic: a potentiation pulse drives the junction to
//! `Parallel` with probability `p_pot`, a depression pulse drives it to
//! `AntiParallel` with probability `p_dep`. A pulse toward the state the
//! junction already holds does nothing.

use serde::{Deserialize, Serialize};

use crate::crossbar::SynapseArray;
use crate::error::SimError;
use crate::rng::{CounterRng, StreamId};

/// Conductance of the parallel state. Everything else is expressed in these units.
pub const G_PARALLEL: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MtjState {
    /// Low resistance.
    Parallel,
    /// High resistance.
    AntiParallel,
}

impl MtjState {
    #[inline]
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            MtjState::Parallel
        } else {
            MtjState::AntiParallel
        }
    }

    #[inline]
    pub fn is_parallel(self) -> bool {
        matches!(self, MtjState::Parallel)
    }
}

/// Learning pulse routed to a synapse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pulse {
    Potentiate,
    Depress,
}

impl Pulse {
    /// State the pulse drives the junction toward.
    #[inline]
    pub fn target(self) -> MtjState {
        match self {
            Pulse::Potentiate => MtjState::Parallel,
            Pulse::Depress => MtjState::AntiParallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    /// Tunnel magnetoresistance as a ratio (3.0 means 300 %).
    pub tmr: f64,
    /// Probability that a potentiation pulse switches AP -> P.
    pub p_pot: f64,
    /// Probability that a depression pulse switches P -> AP.
    pub p_dep: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            tmr: crate::config::DEFAULT_TMR,
            p_pot: crate::config::DEFAULT_P_POT,
            p_dep: crate::config::DEFAULT_P_DEP,
        }
    }
}

impl DeviceConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.tmr.is_finite() && self.tmr > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "tmr must be finite and > 0, got {}",
                self.tmr
            )));
        }
        for (name, p) in [("p_pot", self.p_pot), ("p_dep", self.p_dep)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::InvalidConfig(format!(
                    "{name} must lie in [0, 1], got {p}"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn g_parallel(&self) -> f64 {
        G_PARALLEL
    }

    #[inline]
    pub fn g_antiparallel(&self) -> f64 {
        G_PARALLEL / (1.0 + self.tmr)
    }

    #[inline]
    pub fn switch_probability(&self, pulse: Pulse) -> f64 {
        match pulse {
            Pulse::Potentiate => self.p_pot,
            Pulse::Depress => self.p_dep,
        }
    }
}

/// Normalized conductance of a junction at unit read voltage.
#[inline]
pub fn conductance(state: MtjState, cfg: &DeviceConfig) -> f64 {
    match state {
        MtjState::Parallel => cfg.g_parallel(),
        MtjState::AntiParallel => cfg.g_antiparallel(),
    }
}

/// Apply one learning pulse under the draw identified by `id`.
#[inline]
pub fn stochastic_switch(
    state: MtjState,
    pulse: Pulse,
    cfg: &DeviceConfig,
    rng: &CounterRng,
    id: StreamId,
) -> MtjState {
    let target = pulse.target();
    if state == target {
        return state;
    }
    if rng.bernoulli(id, cfg.switch_probability(pulse)) {
        target
    } else {
        state
    }
}

/// Random crossbar where every cell is independently `Parallel` with
/// probability `p_parallel`.
pub fn init_random(
    rows: usize,
    cols: usize,
    p_parallel: f64,
    rng: &CounterRng,
) -> Result<SynapseArray, SimError> {
    SynapseArray::random(rows, cols, p_parallel, rng)
}
