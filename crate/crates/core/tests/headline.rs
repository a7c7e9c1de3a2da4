//! Full-scale accuracy run. Takes many minutes in release mode:
//!
//! ```text
//! cargo test --release --test headline -- --ignored --nocapture
//! ```

mod common;

use mram_snn::config::RawConfig;
use mram_snn::harness::run_experiment;
use mram_snn::mnist::{load_binarized, Split};

#[test]
#[ignore = "multi-minute full-scale run"]
fn ten_thousand_neurons_r8_full_training_set() {
    let dir = common::mnist_dir().expect("MNIST required; set MRAM_SNN_DATA");
    let cfg = RawConfig {
        neurons: Some(10_000),
        r: Some(8),
        seed: Some(1),
        ..Default::default()
    }
    .resolve(None)
    .unwrap();
    let train = load_binarized(&dir, Split::Train, &cfg.data).unwrap();
    let test = load_binarized(&dir, Split::Test, &cfg.data).unwrap();
    let out = run_experiment(&cfg, &train, &test).unwrap();
    let acc = out.report.accuracy;
    println!("accuracy {:.2}% (no fire {})", 100.0 * acc, out.report.no_fire_count);
    assert!((acc - 0.90).abs() <= 0.03, "accuracy {acc}");
}
