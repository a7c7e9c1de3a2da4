//! Parameter sweeps over neuron count, replication and seed.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::config::RawConfig;
use crate::harness::{run_experiment, RunReport};
use crate::mnist::BinarizedDataset;

/// Default neuron-count axis of a full sweep.
pub const DEFAULT_NEURON_COUNTS: [usize; 6] = [1000, 2000, 4000, 6000, 8000, 10_000];
/// Default replication axis of a full sweep.
pub const DEFAULT_R_VALUES: [usize; 4] = [1, 2, 4, 8];

pub const CSV_HEADER: &str = "n_neurons,r,seed,accuracy,no_fire_count,wall_time";

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub n_neurons: usize,
    pub r: usize,
    pub seed: u64,
    pub outcome: Result<RunReport, String>,
    /// Seconds spent on train + allocate + evaluate.
    pub wall_time: f64,
}

/// Cartesian grid in `(n, r, seed)` order, one independent run per cell.
/// Thresholds and leak not pinned in `base` are re-derived for each cell's `r`.
pub fn sweep(
    base: &RawConfig,
    neuron_counts: &[usize],
    r_values: &[usize],
    seeds: &[u64],
    train_set: &BinarizedDataset,
    test_set: &BinarizedDataset,
) -> Vec<SweepCell> {
    let grid: Vec<(usize, usize, u64)> = neuron_counts
        .iter()
        .flat_map(|&n| {
            r_values
                .iter()
                .flat_map(move |&r| seeds.iter().map(move |&s| (n, r, s)))
        })
        .collect();
    grid.into_par_iter()
        .map(|(n, r, seed)| {
            let start = Instant::now();
            let overrides = RawConfig {
                neurons: Some(n),
                r: Some(r),
                seed: Some(seed),
                ..Default::default()
            };
            let outcome = base
                .merged_with(&overrides)
                .resolve(None)
                .map_err(|e| e.to_string())
                .and_then(|cfg| {
                    run_experiment(&cfg, train_set, test_set)
                        .map(|out| out.report)
                        .map_err(|e| e.to_string())
                });
            if let Err(e) = &outcome {
                log::warn!("sweep cell n={n} r={r} seed={seed} failed: {e}");
            }
            SweepCell {
                n_neurons: n,
                r,
                seed,
                outcome,
                wall_time: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

/// Results table. Failed cells keep their row with `NaN` accuracy and an
/// empty no-fire count.
pub fn write_csv(cells: &[SweepCell], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for c in cells {
        match &c.outcome {
            Ok(rep) => writeln!(
                out,
                "{},{},{},{:.6},{},{:.3}",
                c.n_neurons, c.r, c.seed, rep.accuracy, rep.no_fire_count, c.wall_time
            )?,
            Err(_) => writeln!(out, "{},{},{},NaN,,{:.3}", c.n_neurons, c.r, c.seed, c.wall_time)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_data() -> BinarizedDataset {
        let images: Vec<Vec<bool>> = (0..40)
            .map(|i| (0..16).map(|k| (k / 4) == (i % 4)).collect())
            .collect();
        let labels: Vec<u8> = (0..40).map(|i| (i % 4) as u8).collect();
        BinarizedDataset::from_bools(&images, &labels)
    }

    fn base() -> RawConfig {
        RawConfig {
            input_dim: Some(16),
            t_low: Some(2.0),
            p_pot: Some(0.5),
            p_dep: Some(0.5),
            ..Default::default()
        }
    }

    #[test]
    fn grid_cardinality_and_order() {
        let data = toy_data();
        let cells = sweep(&base(), &[4, 8, 12], &[1], &[1, 2, 3], &data, &data);
        assert_eq!(cells.len(), 9);
        let keys: Vec<(usize, u64)> = cells.iter().map(|c| (c.n_neurons, c.seed)).collect();
        assert_eq!(keys[0], (4, 1));
        assert_eq!(keys[4], (8, 2));
        assert_eq!(keys[8], (12, 3));
        assert!(cells.iter().all(|c| c.outcome.is_ok()));
    }

    #[test]
    fn empty_seed_list_gives_empty_table() {
        let data = toy_data();
        assert!(sweep(&base(), &[4], &[1, 2], &[], &data, &data).is_empty());
    }

    #[test]
    fn failures_are_isolated() {
        let data = toy_data();
        // r = 0 is invalid; the r = 1 cell must still run
        let cells = sweep(&base(), &[4], &[0, 1], &[1], &data, &data);
        assert!(cells[0].outcome.is_err());
        assert!(cells[1].outcome.is_ok());
        let mut buf = Vec::new();
        write_csv(&cells, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("4,0,1,NaN,,"));
        assert!(lines[2].starts_with("4,1,1,"));
    }

    #[test]
    fn reports_are_reproducible() {
        let data = toy_data();
        let a = sweep(&base(), &[6], &[2], &[5], &data, &data);
        let b = sweep(&base(), &[6], &[2], &[5], &data, &data);
        assert_eq!(a[0].outcome, b[0].outcome);
    }

    #[test]
    fn default_grid() {
        assert_eq!(DEFAULT_NEURON_COUNTS, [1000, 2000, 4000, 6000, 8000, 10000]);
        assert_eq!(DEFAULT_R_VALUES, [1, 2, 4, 8]);
    }
}
