use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mram_snn::config::{env_data_dir, parse_config, RawConfig, SimConfig};
use mram_snn::harness::{self, RunReport};
use mram_snn::mnist::{self, BinarizedDataset, Split};
use mram_snn::snapshot::Snapshot;
use mram_snn::sweep::{self, DEFAULT_NEURON_COUNTS, DEFAULT_R_VALUES};
use mram_snn::weights;
use mram_snn::Network;

#[derive(Parser)]
#[command(name = "mram-snn", version, about = "Stochastic MRAM-synapse spiking network simulator")]
struct Cli {
    /// Log level filter (error, warn, info, debug, trace)
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a fresh network (or resume one) and write a snapshot
    Train(TrainArgs),
    /// Map trained neurons to digits using the training split
    Allocate(SnapshotArgs),
    /// Classify the test split with an allocated snapshot
    Eval(EvalArgs),
    /// Train/allocate/evaluate over a grid of neuron counts, r and seeds
    Sweep(SweepArgs),
    /// Write receptive-field images as PGM
    ExportWeights(ExportArgs),
    /// Print snapshot dimensions and synapse statistics
    Info(InfoArgs),
}

/// Parameter overrides shared by every command that builds a config.
#[derive(Args, Clone, Default)]
struct Params {
    /// TOML config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding the MNIST IDX files
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    p_pot: Option<f64>,
    #[arg(long)]
    p_dep: Option<f64>,
    #[arg(long)]
    tmr: Option<f64>,
    #[arg(long)]
    t_low: Option<f64>,
    #[arg(long)]
    t_high: Option<f64>,
    #[arg(long)]
    leak: Option<f64>,
    #[arg(long)]
    n_active: Option<u64>,
    #[arg(long)]
    n_inactive: Option<u64>,
    #[arg(long)]
    max_cycles: Option<u32>,
    #[arg(long)]
    init_parallel: Option<f64>,
    /// Keep thresholds adapting while allocating and evaluating
    #[arg(long)]
    homeostasis_during_eval: Option<bool>,
    #[command(flatten)]
    data: DataParams,
}

#[derive(Args, Clone, Default)]
struct DataParams {
    #[arg(long)]
    train_offset: Option<usize>,
    #[arg(long)]
    train_count: Option<usize>,
    #[arg(long)]
    test_count: Option<usize>,
    #[arg(long)]
    binarize_threshold: Option<i64>,
    #[arg(long)]
    epochs: Option<u32>,
}

impl Params {
    fn raw(&self) -> RawConfig {
        let mut raw = self.data.raw();
        raw.data_dir = self.data_dir.clone();
        raw.p_pot = self.p_pot;
        raw.p_dep = self.p_dep;
        raw.tmr = self.tmr;
        raw.t_low = self.t_low;
        raw.t_high = self.t_high;
        raw.leak = self.leak;
        raw.n_active = self.n_active;
        raw.n_inactive = self.n_inactive;
        raw.max_cycles_per_image = self.max_cycles;
        raw.init_parallel = self.init_parallel;
        raw.during_eval = self.homeostasis_during_eval;
        raw
    }

    fn file(&self) -> Result<RawConfig> {
        match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                Ok(RawConfig::from_toml_str(&text)?)
            }
            None => Ok(RawConfig::default()),
        }
    }

    /// Data directory by precedence: flag, environment, file.
    fn data_dir(&self) -> Result<Option<PathBuf>> {
        Ok(self
            .data_dir
            .clone()
            .or_else(env_data_dir)
            .or(self.file()?.data_dir))
    }
}

impl DataParams {
    fn raw(&self) -> RawConfig {
        RawConfig {
            train_offset: self.train_offset,
            train_count: self.train_count,
            test_count: self.test_count,
            binarize_threshold: self.binarize_threshold,
            epochs: self.epochs,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    params: Params,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    neurons: Option<usize>,
    /// Synapse copies per pixel
    #[arg(long)]
    r: Option<usize>,
    /// Continue training the network stored in this snapshot
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Snapshot to write
    #[arg(long, default_value = "runs/snapshot.bin")]
    out: PathBuf,
    /// Per-image training log (JSON lines); defaults to the snapshot path with `.jsonl`
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct SnapshotArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataParams,
    /// Where to write the allocated snapshot; defaults to overwriting the input
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataParams,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    params: Params,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_NEURON_COUNTS)]
    neurons: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_R_VALUES)]
    r: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1u64])]
    seeds: Vec<u64>,
    /// Results CSV; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    snapshot: PathBuf,
    /// Output directory for per-neuron PGM files
    #[arg(long, default_value = "runs/weights")]
    out: PathBuf,
    /// Neurons to export; defaults to every allocated neuron, or all neurons
    #[arg(long, value_delimiter = ',')]
    neurons: Option<Vec<usize>>,
    /// Also write one tiled image of the exported neurons
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    grid_columns: usize,
}

#[derive(Args)]
struct InfoArgs {
    #[arg(long)]
    snapshot: PathBuf,
}

/// Config stored in a snapshot with data-selection flags applied on top.
struct SnapshotContext {
    snapshot: Snapshot,
    data_dir: PathBuf,
    config: SimConfig,
}

fn open_snapshot(
    path: &Path,
    config: &Option<PathBuf>,
    data_dir: &Option<PathBuf>,
    data: &DataParams,
) -> Result<SnapshotContext> {
    let snapshot =
        Snapshot::load(path).with_context(|| format!("loading snapshot {}", path.display()))?;
    let params = Params {
        config: config.clone(),
        data_dir: data_dir.clone(),
        data: data.clone(),
        ..Default::default()
    };
    let file = params.file()?;
    let file_data = RawConfig {
        train_offset: file.train_offset,
        train_count: file.train_count,
        test_count: file.test_count,
        binarize_threshold: file.binarize_threshold,
        epochs: file.epochs,
        ..Default::default()
    };
    let config = RawConfig::from_sim(snapshot.network.config())
        .merged_with(&file_data)
        .merged_with(&data.raw())
        .resolve(None)?;
    let data_dir = params
        .data_dir()?
        .ok_or(mram_snn::ConfigError::MissingDatasetPath)?;
    Ok(SnapshotContext {
        snapshot,
        data_dir,
        config,
    })
}

fn load(dir: &Path, split: Split, cfg: &SimConfig) -> Result<BinarizedDataset> {
    let data = mnist::load_binarized(dir, split, &cfg.data)?;
    log::info!("{:?} split: {} images from {}", split, data.len(), dir.display());
    Ok(data)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn save(snapshot: &Snapshot, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(&snapshot.to_bytes())?;
    w.flush()?;
    log::info!("wrote snapshot {}", path.display());
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut overrides = args.params.raw();
    overrides.seed = args.seed;
    overrides.neurons = args.neurons;
    overrides.r = args.r;
    let (mut network, cfg) = match &args.resume {
        Some(path) => {
            if args.seed.is_some() || args.neurons.is_some() || args.r.is_some() {
                bail!("--seed, --neurons and --r come from the snapshot when resuming");
            }
            let snap = Snapshot::load(path)
                .with_context(|| format!("loading snapshot {}", path.display()))?;
            let mut raw = RawConfig::from_sim(snap.network.config()).merged_with(&args.params.file()?);
            raw = raw.merged_with(&overrides);
            raw.data_dir = args.params.data_dir()?;
            let cfg = raw.resolve(None)?;
            let net = Network::from_parts(
                cfg.clone(),
                snap.network.synapses().clone(),
                snap.network.neurons().to_vec(),
                snap.network.trace().clone(),
                snap.network.cycle(),
                snap.network.pending_fire(),
            )?;
            (net, cfg)
        }
        None => {
            let file = args.params.config.as_deref();
            let cfg = parse_config(file, &overrides, env_data_dir())?;
            (Network::new(cfg.clone())?, cfg)
        }
    };
    let dir = cfg.data_dir()?.to_path_buf();
    let data = load(&dir, Split::Train, &cfg)?;
    log::info!(
        "training {} neurons, r = {}, seed {}, {} epoch(s)",
        cfg.neurons,
        cfg.replication,
        cfg.seed,
        cfg.data.epochs
    );
    let log = harness::train(&mut network, &data, cfg.data.epochs)?;
    log::info!("{} fires, {} timeouts", log.fires(), log.timeouts());
    save(&Snapshot::new(network, None), &args.out)?;
    let log_path = args.log.unwrap_or_else(|| args.out.with_extension("jsonl"));
    let mut w = create(&log_path)?;
    log.write_jsonl(&mut w)?;
    w.flush()?;
    log::info!("wrote training log {}", log_path.display());
    Ok(())
}

fn cmd_allocate(args: SnapshotArgs) -> Result<()> {
    let ctx = open_snapshot(&args.snapshot, &args.config, &args.data_dir, &args.data)?;
    let data = load(&ctx.data_dir, Split::Train, &ctx.config)?;
    let alloc = harness::allocate(&ctx.snapshot.network, &data)?;
    log::info!("{} neurons allocated", alloc.allocated());
    let out = args.out.unwrap_or(args.snapshot);
    save(&Snapshot::new(ctx.snapshot.network, Some(alloc)), &out)
}

fn print_report(r: &RunReport) {
    eprintln!(
        "accuracy {:.2}% ({}/{}), no fire {}, unallocated winner {}",
        100.0 * r.accuracy,
        r.correct,
        r.total,
        r.no_fire_count,
        r.unallocated_fire_count
    );
    for (d, acc) in r.per_digit_accuracy().iter().enumerate() {
        if let Some(a) = acc {
            eprintln!("  digit {d}: {:.2}%", 100.0 * a);
        }
    }
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let mut ctx = open_snapshot(&args.snapshot, &args.config, &args.data_dir, &args.data)?;
    let alloc = match ctx.snapshot.allocation.take() {
        Some(a) => a,
        None => {
            log::info!("snapshot has no allocation; allocating on the training split");
            let train = load(&ctx.data_dir, Split::Train, &ctx.config)?;
            harness::allocate(&ctx.snapshot.network, &train)?
        }
    };
    let test = load(&ctx.data_dir, Split::Test, &ctx.config)?;
    let report = harness::evaluate(&ctx.snapshot.network, &alloc, &test)?;
    print_report(&report);
    let json = serde_json::to_string_pretty(&report)?;
    match args.report {
        Some(path) => {
            let mut w = create(&path)?;
            writeln!(w, "{json}")?;
            w.flush()?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let mut base = args.params.file()?.merged_with(&args.params.raw());
    base.data_dir = args.params.data_dir()?;
    // resolve once for the data selection; per-cell values are re-derived
    let cfg = base.resolve(None)?;
    let dir = cfg.data_dir()?.to_path_buf();
    let train = load(&dir, Split::Train, &cfg)?;
    let test = load(&dir, Split::Test, &cfg)?;
    log::info!(
        "sweep over {} cells",
        args.neurons.len() * args.r.len() * args.seeds.len()
    );
    let cells = sweep::sweep(&base, &args.neurons, &args.r, &args.seeds, &train, &test);
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            sweep::write_csv(&cells, &mut w)?;
            w.flush()?;
            log::info!("wrote {}", path.display());
        }
        None => sweep::write_csv(&cells, std::io::stdout().lock())?,
    }
    let failed = cells.iter().filter(|c| c.outcome.is_err()).count();
    if failed > 0 {
        bail!("{failed} sweep cell(s) failed");
    }
    Ok(())
}

fn cmd_export(args: ExportArgs) -> Result<()> {
    let snap = Snapshot::load(&args.snapshot)
        .with_context(|| format!("loading snapshot {}", args.snapshot.display()))?;
    let neurons = match args.neurons {
        Some(n) => n,
        None => match &snap.allocation {
            Some(a) => {
                let mut all: Vec<usize> = a.lists().iter().flatten().copied().collect();
                all.sort_unstable();
                all
            }
            None => (0..snap.network.config().neurons).collect(),
        },
    };
    let files = weights::export_weight_maps(&snap.network, &neurons, &args.out)?;
    log::info!("wrote {} maps to {}", files.len(), args.out.display());
    if let Some(grid) = &args.grid {
        weights::export_weight_grid(&snap.network, &neurons, args.grid_columns, grid)?;
        log::info!("wrote grid {}", grid.display());
    }
    Ok(())
}

fn cmd_info(args: InfoArgs) -> Result<()> {
    let snap = Snapshot::load(&args.snapshot)
        .with_context(|| format!("loading snapshot {}", args.snapshot.display()))?;
    let net = &snap.network;
    let cfg = net.config();
    let a = net.synapses();
    println!("neurons          {}", a.rows());
    println!("columns          {} ({} pixels x r = {})", a.cols(), cfg.input_dim, cfg.replication);
    println!("parallel         {} of {}", a.parallel_count(), a.rows() * a.cols());
    println!("parallel_fraction {:.6}", a.parallel_fraction());
    println!("cycle            {}", net.cycle());
    println!("seed             {}", cfg.seed);
    match &snap.allocation {
        Some(al) => {
            println!("allocated        {}", al.allocated());
            for d in 0..al.classes() {
                println!("  digit {d}: {} neurons", al.list(d).len());
            }
        }
        None => println!("allocated        none"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp_secs()
        .init();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Allocate(a) => cmd_allocate(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::ExportWeights(a) => cmd_export(a),
        Command::Info(a) => cmd_info(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
