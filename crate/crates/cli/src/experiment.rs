//! Per-seed training, artifact writing and attack sweeps.
//!
//! Output layout:
//!
//! ```text
//! <output_dir>/config.resolved
//! <output_dir>/summary.md
//! <output_dir>/seed-<s>/trace_standalone.csv
//! <output_dir>/seed-<s>/trace_central.csv
//! <output_dir>/seed-<s>/trace_distributed.csv
//! <output_dir>/seed-<s>/messages.csv
//! <output_dir>/seed-<s>/sweep.csv
//! <output_dir>/seed-<s>/weights/*.dgw
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use dgids_core::attack::{feature_variance, run_scenario_sweep, write_sweep_csv, DetectorSet, ModelKind, SweepRow};
use dgids_core::data::{
    fit_normalizer, load_dataset, make_synthetic, partition_aligned, split, Dataset, Partition, SyntheticSpec,
};
use dgids_core::federation::{device_ring, train_distributed, write_message_log, DistributedTraceRow};
use dgids_core::gan::{train_with_monitor, LossReport};
use dgids_core::rng::{derive_path, derive_seed};
use log::info;
use ndarray::{s, Array2};

use crate::config::{DatasetSource, ExperimentConfig, Mode, Normalization};
use crate::models::{load_models, save_models, Expect, ModelBundle};
use crate::report::write_summary;
use crate::CliError;

// Seed streams for data handling and for the non-distributed trainers. The
// distributed trainer consumes the run seed directly.
const STREAM_DATA: u64 = 10;
const STREAM_SPLIT: u64 = 11;
const STREAM_PARTITION: u64 = 12;
const STREAM_STANDALONE: u64 = 13;
const STREAM_CENTRAL: u64 = 14;

pub const RESOLVED_CONFIG_FILE: &str = "config.resolved";

pub fn seed_dir(output_dir: &Path, seed: u64) -> PathBuf {
    output_dir.join(format!("seed-{seed}"))
}

/// Train/test shares for one seed, after normalisation.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Partition,
    pub test: Partition,
    /// Per-feature variance of the pooled training rows; the attack's signal
    /// power.
    pub feature_power: Vec<f64>,
    /// Held-out rows on which traces measure the mean discriminator output.
    pub monitor: Array2<f64>,
}

impl PreparedData {
    pub fn train_shares(&self) -> Vec<Array2<f64>> {
        self.train.shares().iter().map(|s| s.features().to_owned()).collect()
    }

    pub fn test_shares(&self) -> Vec<Array2<f64>> {
        self.test.shares().iter().map(|s| s.features().to_owned()).collect()
    }
}

fn load_source(config: &ExperimentConfig, seed: u64) -> Result<Dataset, CliError> {
    Ok(match &config.dataset {
        DatasetSource::Synthetic => make_synthetic(
            &SyntheticSpec::heterogeneous_benchmark(),
            config.synthetic_rows,
            derive_seed(seed, STREAM_DATA),
        )?,
        DatasetSource::Csv(path) => load_dataset(path, config.csv_profile)?,
    })
}

pub fn prepare_data(config: &ExperimentConfig, seed: u64) -> Result<PreparedData, CliError> {
    let source = load_source(config, seed)?;
    let (train, test) = split(&source, config.test_fraction, derive_seed(seed, STREAM_SPLIT))?;
    let partition_seed = derive_seed(seed, STREAM_PARTITION);
    let (train, test) = match config.normalization {
        Normalization::Pooled => {
            let stats = fit_normalizer(&train)?;
            let (train, test) = (stats.apply(&train)?, stats.apply(&test)?);
            partition_aligned(&train, &test, config.n_devices, config.partition, partition_seed)?
        }
        Normalization::PerDevice => {
            let (train, test) = partition_aligned(&train, &test, config.n_devices, config.partition, partition_seed)?;
            let mut train_shares = Vec::with_capacity(train.n_devices());
            let mut test_shares = Vec::with_capacity(train.n_devices());
            for (tr, te) in train.shares().iter().zip(test.shares()) {
                let stats = fit_normalizer(tr)?;
                train_shares.push(stats.apply(tr)?);
                test_shares.push(stats.apply(te)?);
            }
            (
                Partition::from_shares(train_shares, config.partition)?,
                Partition::from_shares(test_shares, config.partition)?,
            )
        }
        Normalization::None => {
            partition_aligned(&train, &test, config.n_devices, config.partition, partition_seed)?
        }
    };
    let pooled_train = train.pooled();
    let feature_power = feature_variance(pooled_train.features())?;
    let pooled_test = test.pooled();
    let rows = config.monitor_rows.min(pooled_test.len());
    let monitor = pooled_test.features().slice(s![..rows, ..]).to_owned();
    Ok(PreparedData {
        train,
        test,
        feature_power,
        monitor,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_trace(path: &Path, trace: &[LossReport]) -> Result<(), CliError> {
    let mut out = create(path)?;
    writeln!(out, "{}", LossReport::CSV_HEADER)?;
    for row in trace {
        writeln!(out, "{}", row.csv_row())?;
    }
    out.flush()?;
    Ok(())
}

fn write_standalone_traces(path: &Path, traces: &[Vec<LossReport>]) -> Result<(), CliError> {
    let mut out = create(path)?;
    writeln!(out, "device,{}", LossReport::CSV_HEADER)?;
    for (i, trace) in traces.iter().enumerate() {
        for row in trace {
            writeln!(out, "{i},{}", row.csv_row())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn write_distributed_trace(path: &Path, trace: &[DistributedTraceRow], n: usize) -> Result<(), CliError> {
    let mut out = create(path)?;
    write!(out, "{}", LossReport::CSV_HEADER)?;
    for i in 0..n {
        write!(out, ",mean_output_device_{i}")?;
    }
    writeln!(out)?;
    for row in trace {
        write!(out, "{}", row.report.csv_row())?;
        for v in &row.device_mean_outputs {
            write!(out, ",{v:.9}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    let mut out = create(path)?;
    write_sweep_csv(rows, &mut out)?;
    out.flush()?;
    Ok(())
}

fn detector_sets(bundle: ModelBundle) -> Vec<DetectorSet> {
    let mut sets = Vec::new();
    if !bundle.standalone.is_empty() {
        sets.push(DetectorSet {
            kind: ModelKind::Standalone,
            discriminators: bundle.standalone,
        });
    }
    if let Some(d) = bundle.central {
        sets.push(DetectorSet {
            kind: ModelKind::Central,
            discriminators: vec![d],
        });
    }
    if !bundle.distributed.is_empty() {
        sets.push(DetectorSet {
            kind: ModelKind::Distributed,
            discriminators: bundle.distributed,
        });
    }
    sets
}

fn sweep(config: &ExperimentConfig, data: &PreparedData, bundle: ModelBundle, seed: u64) -> Result<Vec<SweepRow>, CliError> {
    let ring = device_ring(config.n_devices, seed)?;
    Ok(run_scenario_sweep(
        &detector_sets(bundle),
        &data.test_shares(),
        &ring,
        &data.feature_power,
        &config.ratios,
        config.eps,
        seed,
    )?)
}

/// Everything one seed produced.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub dir: PathBuf,
    pub sweep: Vec<SweepRow>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub output_dir: PathBuf,
    pub runs: Vec<SeedRun>,
}

fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedRun, CliError> {
    let dir = seed_dir(&config.output_dir, seed);
    std::fs::create_dir_all(&dir)?;
    let started = Instant::now();
    let data = prepare_data(config, seed)?;
    let shares = data.train_shares();
    let monitor = Some(data.monitor.view());
    let gan = config.gan();
    let mut bundle = ModelBundle::default();

    if config.mode.includes(Mode::Standalone) {
        let mut traces = Vec::with_capacity(shares.len());
        for (i, share) in shares.iter().enumerate() {
            info!("seed {seed}: standalone device {i} ({} rows)", share.nrows());
            let out = train_with_monitor(share.view(), monitor, &gan, derive_path(seed, &[STREAM_STANDALONE, i as u64]))?;
            traces.push(out.trace);
            bundle.standalone.push(out.discriminator);
        }
        write_standalone_traces(&dir.join("trace_standalone.csv"), &traces)?;
    }
    if config.mode.includes(Mode::Central) {
        info!("seed {seed}: central");
        let pooled = data.train.pooled();
        let out = train_with_monitor(pooled.features(), monitor, &gan, derive_seed(seed, STREAM_CENTRAL))?;
        write_trace(&dir.join("trace_central.csv"), &out.trace)?;
        bundle.central = Some(out.discriminator);
    }
    if config.mode.includes(Mode::Distributed) {
        info!("seed {seed}: distributed over {} devices", shares.len());
        let (state, trace) = train_distributed(shares.clone(), monitor, &config.federation(), seed)?;
        write_distributed_trace(&dir.join("trace_distributed.csv"), &trace, state.n_devices())?;
        let mut log = create(&dir.join("messages.csv"))?;
        write_message_log(state.message_log(), &mut log)?;
        log.flush()?;
        bundle.distributed = state.extract_discriminators();
        bundle.generator = Some(state.center().clone());
    }
    save_models(&bundle, &dir.join("weights"))?;
    let rows = sweep(config, &data, bundle, seed)?;
    write_sweep(&dir.join("sweep.csv"), &rows)?;
    info!("seed {seed}: done in {:.1?}", started.elapsed());
    Ok(SeedRun { seed, dir, sweep: rows })
}

fn write_resolved(config: &ExperimentConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&config.output_dir)?;
    std::fs::write(config.output_dir.join(RESOLVED_CONFIG_FILE), config.to_resolved_string())?;
    Ok(())
}

/// Trains the configured mode(s) for every seed, then writes the summary.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome, CliError> {
    config.validate()?;
    write_resolved(config)?;
    let runs = config
        .seeds
        .iter()
        .map(|&seed| run_seed(config, seed))
        .collect::<Result<Vec<_>, _>>()?;
    write_summary(&config.output_dir)?;
    Ok(ExperimentOutcome {
        output_dir: config.output_dir.clone(),
        runs,
    })
}

/// Re-runs the attack sweep from saved weights, e.g. with different ratios
/// or threshold, and rewrites each `sweep.csv` and the summary.
pub fn run_sweep(config: &ExperimentConfig) -> Result<ExperimentOutcome, CliError> {
    config.validate()?;
    write_resolved(config)?;
    let expect = Expect {
        standalone: config.mode.includes(Mode::Standalone),
        central: config.mode.includes(Mode::Central),
        distributed: config.mode.includes(Mode::Distributed),
    };
    let gan = config.gan();
    let mut runs = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let dir = seed_dir(&config.output_dir, seed);
        let data = prepare_data(config, seed)?;
        let bundle = load_models(&dir.join("weights"), config.n_devices, data.train.dim(), &gan, expect)?;
        let rows = sweep(config, &data, bundle, seed)?;
        write_sweep(&dir.join("sweep.csv"), &rows)?;
        runs.push(SeedRun { seed, dir, sweep: rows });
    }
    write_summary(&config.output_dir)?;
    Ok(ExperimentOutcome {
        output_dir: config.output_dir.clone(),
        runs,
    })
}
