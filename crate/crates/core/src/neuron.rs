//! Output neurons: leaky integration, homeostatic thresholds and
//! ratio-based winner-take-all selection.

use serde::{Deserialize, Serialize};

use crate::error::SimError;

/// Two-level homeostatic threshold schedule.
///
/// A neuron that fired within the last `n_active` cycles sits at `t_high`; one
/// that has not fired for `n_inactive` cycles (or never) drops to `t_low`. In
/// between, the threshold keeps whatever value it had.
///
/// Thresholds are only re-evaluated on integrate cycles. A fire is followed by
/// a learn cycle, so the fired neuron is next seen two cycles later and
/// `n_active = 1` never raises it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomeostasisConfig {
    pub t_high: f64,
    pub t_low: f64,
    pub n_active: u64,
    pub n_inactive: u64,
}

impl HomeostasisConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.t_low.is_finite() && self.t_low > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "t_low must be finite and > 0, got {}",
                self.t_low
            )));
        }
        if !(self.t_high.is_finite() && self.t_high > self.t_low) {
            return Err(SimError::InvalidConfig(format!(
                "t_high ({}) must exceed t_low ({})",
                self.t_high, self.t_low
            )));
        }
        if self.n_active < 1 || self.n_inactive < self.n_active {
            return Err(SimError::InvalidConfig(format!(
                "need n_inactive ({}) >= n_active ({}) >= 1",
                self.n_inactive, self.n_active
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronState {
    pub integration: f64,
    pub threshold: f64,
    pub last_fire_cycle: Option<u64>,
}

impl NeuronState {
    /// Cold start: nothing integrated, never fired, low threshold.
    pub fn cold(t_low: f64) -> Self {
        Self {
            integration: 0.0,
            threshold: t_low,
            last_fire_cycle: None,
        }
    }

    #[inline]
    pub fn ratio(&self) -> f64 {
        self.integration / self.threshold
    }
}

/// Result of the threshold comparison at the end of an integrate cycle.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Selection {
    /// Neurons whose integration reached their threshold, in index order.
    pub waiting_list: Vec<usize>,
    pub fired: Option<usize>,
}

/// `integration <- max(0, integration - leak)`.
pub fn leak_cycle(neurons: &mut [NeuronState], leak: f64) {
    if leak == 0.0 {
        return;
    }
    for n in neurons {
        n.integration = (n.integration - leak).max(0.0);
    }
}

pub fn adjust_thresholds(neurons: &mut [NeuronState], current_cycle: u64, cfg: &HomeostasisConfig) {
    for n in neurons {
        match n.last_fire_cycle {
            Some(last) => {
                let since = current_cycle.saturating_sub(last);
                if since <= cfg.n_active {
                    n.threshold = cfg.t_high;
                }
                if since >= cfg.n_inactive {
                    n.threshold = cfg.t_low;
                }
            }
            None => {
                if current_cycle >= cfg.n_inactive {
                    n.threshold = cfg.t_low;
                }
            }
        }
    }
}

/// Waiting list and ratio winner; exact ties go to the lowest index.
pub fn select_winner(neurons: &[NeuronState]) -> Selection {
    let mut waiting_list = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for (j, n) in neurons.iter().enumerate() {
        if n.integration >= n.threshold {
            waiting_list.push(j);
            let ratio = n.ratio();
            if best.is_none_or(|(_, r)| ratio > r) {
                best = Some((j, ratio));
            }
        }
    }
    Selection {
        waiting_list,
        fired: best.map(|(j, _)| j),
    }
}

/// Index of the winner only, without materializing the waiting list.
pub fn winner(neurons: &[NeuronState]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, n) in neurons.iter().enumerate() {
        if n.integration >= n.threshold {
            let ratio = n.ratio();
            if best.is_none_or(|(_, r)| ratio > r) {
                best = Some((j, ratio));
            }
        }
    }
    best.map(|(j, _)| j)
}

pub fn reset_all(neurons: &mut [NeuronState]) {
    for n in neurons {
        n.integration = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with(integrations: &[f64], thresholds: &[f64]) -> Vec<NeuronState> {
        integrations
            .iter()
            .zip(thresholds)
            .map(|(&integration, &threshold)| NeuronState {
                integration,
                threshold,
                last_fire_cycle: None,
            })
            .collect()
    }

    fn homeo() -> HomeostasisConfig {
        HomeostasisConfig {
            t_high: 30.0,
            t_low: 10.0,
            n_active: 50,
            n_inactive: 500,
        }
    }

    #[test]
    fn leak_examples() {
        let mut n = with(&[5.0, 0.5, 0.0], &[1.0; 3]);
        leak_cycle(&mut n, 1.0);
        assert_eq!(n[0].integration, 4.0);
        assert_eq!(n[1].integration, 0.0);
        assert_eq!(n[2].integration, 0.0);
        let mut m = with(&[3.0], &[1.0]);
        leak_cycle(&mut m, 0.0);
        assert_eq!(m[0].integration, 3.0);
    }

    #[test]
    fn threshold_recently_fired_goes_high() {
        let mut n = vec![NeuronState {
            integration: 0.0,
            threshold: 10.0,
            last_fire_cycle: Some(999),
        }];
        adjust_thresholds(&mut n, 1000, &homeo());
        assert_eq!(n[0].threshold, 30.0);
    }

    #[test]
    fn threshold_never_fired_goes_low() {
        let mut n = vec![NeuronState::cold(10.0)];
        n[0].threshold = 30.0;
        adjust_thresholds(&mut n, 1_000_000, &homeo());
        assert_eq!(n[0].threshold, 10.0);
        // before n_inactive cycles have elapsed nothing happens
        let mut m = vec![NeuronState::cold(10.0)];
        m[0].threshold = 30.0;
        adjust_thresholds(&mut m, 499, &homeo());
        assert_eq!(m[0].threshold, 30.0);
    }

    #[test]
    fn threshold_between_windows_unchanged() {
        for start in [10.0, 30.0] {
            let mut n = vec![NeuronState {
                integration: 0.0,
                threshold: start,
                last_fire_cycle: Some(900),
            }];
            adjust_thresholds(&mut n, 1000, &homeo());
            assert_eq!(n[0].threshold, start);
        }
    }

    #[test]
    fn threshold_window_edges() {
        let h = homeo();
        let mut n = vec![NeuronState {
            integration: 0.0,
            threshold: 10.0,
            last_fire_cycle: Some(0),
        }];
        adjust_thresholds(&mut n, 50, &h);
        assert_eq!(n[0].threshold, 30.0);
        adjust_thresholds(&mut n, 499, &h);
        assert_eq!(n[0].threshold, 30.0);
        adjust_thresholds(&mut n, 500, &h);
        assert_eq!(n[0].threshold, 10.0);
    }

    #[test]
    fn winner_by_ratio() {
        let s = select_winner(&with(&[3.0, 6.0], &[2.0, 5.0]));
        assert_eq!(s.waiting_list, vec![0, 1]);
        assert_eq!(s.fired, Some(0));
    }

    #[test]
    fn no_winner_below_threshold() {
        let s = select_winner(&with(&[1.0, 1.0], &[2.0, 2.0]));
        assert!(s.waiting_list.is_empty());
        assert_eq!(s.fired, None);
    }

    #[test]
    fn tie_goes_to_lowest_index() {
        let s = select_winner(&with(&[4.0, 4.0], &[2.0, 2.0]));
        assert_eq!(s.fired, Some(0));
        let s = select_winner(&with(&[1.0, 4.0, 4.0], &[2.0, 2.0, 2.0]));
        assert_eq!(s.fired, Some(1));
    }

    #[test]
    fn equality_counts_as_reaching_threshold() {
        let s = select_winner(&with(&[2.0], &[2.0]));
        assert_eq!(s.fired, Some(0));
    }

    #[test]
    fn winner_matches_select_winner() {
        let n = with(&[3.0, 9.0, 7.0, 1.0], &[2.0, 6.0, 4.0, 0.5]);
        assert_eq!(winner(&n), select_winner(&n).fired);
    }

    #[test]
    fn reset_touches_only_integration() {
        let mut n = with(&[3.2, 0.1, 7.7], &[1.0, 2.0, 3.0]);
        n[1].last_fire_cycle = Some(4);
        let before = n.clone();
        reset_all(&mut n);
        for (a, b) in n.iter().zip(&before) {
            assert_eq!(a.integration, 0.0);
            assert_eq!(a.threshold, b.threshold);
            assert_eq!(a.last_fire_cycle, b.last_fire_cycle);
        }
        reset_all(&mut n);
        assert!(n.iter().all(|x| x.integration == 0.0));
    }

    #[test]
    fn homeostasis_validation() {
        assert!(homeo().validate().is_ok());
        let mut h = homeo();
        h.t_high = 5.0;
        assert!(h.validate().is_err());
        let mut h = homeo();
        h.n_inactive = 10;
        assert!(h.validate().is_err());
        let mut h = homeo();
        h.n_active = 0;
        assert!(h.validate().is_err());
        let mut h = homeo();
        h.t_low = 0.0;
        assert!(h.validate().is_err());
    }
}
