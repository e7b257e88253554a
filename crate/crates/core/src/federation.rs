//! Distributed training: one central generator, `n` device-resident
//! discriminators, periodic center exchanges and discriminator swaps around
//! a ring.
//!
//! Every transfer between participants is appended to a message log, so the
//! in-process simulation records exactly what a networked deployment would
//! send.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;

use ndarray::{s, Array2, ArrayView2};
use rand::seq::SliceRandom;

use crate::gan::{
    generator_feedback, Discriminator, GanConfig, Generator, LossReport,
};
use crate::gan::train::{
    discriminator_step, generate_batch, generator_step, sample_rows, STREAM_DISCRIMINATOR_INIT,
    STREAM_GENERATOR_INIT, STREAM_TRAINING,
};
use crate::nn::{io::encoded_len, AdamState};
use crate::rng::{derive_path, derive_seed, rng_from, SimRng};
use crate::{Error, Result};

/// Directed ring over device indices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingTopology {
    device_ids: Vec<u32>,
    successor: Vec<usize>,
}

/// Uniformly random single cycle through all devices.
pub fn build_ring(device_ids: &[u32], seed: u64) -> Result<RingTopology> {
    let n = device_ids.len();
    if n < 2 {
        return Err(Error::Topology(format!("a ring needs at least 2 devices, got {n}")));
    }
    let mut seen = HashSet::with_capacity(n);
    for id in device_ids {
        if !seen.insert(id) {
            return Err(Error::InvalidArgument(format!("duplicate device id {id}")));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(seed));
    let mut successor = vec![0; n];
    for k in 0..n {
        successor[order[k]] = order[(k + 1) % n];
    }
    Ok(RingTopology {
        device_ids: device_ids.to_vec(),
        successor,
    })
}

impl RingTopology {
    pub fn len(&self) -> usize {
        self.successor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.successor.is_empty()
    }

    pub fn device_ids(&self) -> &[u32] {
        &self.device_ids
    }

    /// Successor index of device index `i`.
    pub fn successor(&self, i: usize) -> usize {
        self.successor[i]
    }

    pub fn predecessor(&self, i: usize) -> usize {
        self.successor
            .iter()
            .position(|&s| s == i)
            .expect("successor is a permutation")
    }

    pub fn successors(&self) -> &[usize] {
        &self.successor
    }

    /// Device indices in ring order starting from index 0.
    pub fn cycle_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.len());
        let mut at = 0;
        for _ in 0..self.len() {
            order.push(at);
            at = self.successor[at];
        }
        order
    }

    /// True when following successors from any device visits every device
    /// before returning.
    pub fn is_single_cycle(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return false;
        }
        let mut at = 0;
        for step in 1..=n {
            at = self.successor[at];
            if at == 0 {
                return step == n;
            }
        }
        false
    }
}

/// Center exchanges fire at epochs `T, 2T, ...`; swaps at `E, 2E, ...`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    exchange_period: usize,
    swap_period: usize,
    total_epochs: usize,
}

impl Schedule {
    pub fn new(exchange_period: usize, swap_period: usize, total_epochs: usize) -> Result<Self> {
        if exchange_period == 0 || swap_period == 0 {
            return Err(Error::Config(format!(
                "periods must be positive (T={exchange_period}, E={swap_period})"
            )));
        }
        Ok(Self {
            exchange_period,
            swap_period,
            total_epochs,
        })
    }

    pub fn exchange_period(&self) -> usize {
        self.exchange_period
    }

    pub fn swap_period(&self) -> usize {
        self.swap_period
    }

    pub fn total_epochs(&self) -> usize {
        self.total_epochs
    }

    pub fn exchanges_at(&self, epoch: usize) -> bool {
        epoch > 0 && epoch % self.exchange_period == 0
    }

    pub fn swaps_at(&self, epoch: usize) -> bool {
        epoch > 0 && epoch % self.swap_period == 0
    }

    pub fn exchange_count(&self) -> usize {
        self.total_epochs / self.exchange_period
    }

    pub fn swap_count(&self) -> usize {
        self.total_epochs / self.swap_period
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Participant {
    Center,
    Device(u32),
}

impl fmt::Display for Participant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Participant::Center => f.write_str("center"),
            Participant::Device(id) => write!(f, "device-{id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Exchange,
    Swap,
    GenUpdate,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Exchange => "exchange",
            EventKind::Swap => "swap",
            EventKind::GenUpdate => "gen-update",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayloadKind {
    /// Generated points sent from the center to a device.
    GeneratedBatches,
    /// A device's generator loss and its gradient with respect to the
    /// generated points it scored.
    LossFeedback,
    /// Discriminator parameters plus their Adam moments.
    DiscriminatorWeights,
    /// The center's own parameter update; nothing leaves the center.
    GeneratorStep,
    /// Rows of a device's private dataset. The protocol never sends these;
    /// the kind exists so the privacy invariant can be stated and checked.
    RawData,
}

impl PayloadKind {
    pub fn name(self) -> &'static str {
        match self {
            PayloadKind::GeneratedBatches => "generated-batches",
            PayloadKind::LossFeedback => "loss-feedback",
            PayloadKind::DiscriminatorWeights => "discriminator-weights",
            PayloadKind::GeneratorStep => "generator-step",
            PayloadKind::RawData => "raw-data",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub epoch: usize,
    pub event: EventKind,
    pub sender: Participant,
    pub receiver: Participant,
    pub payload: PayloadKind,
    pub payload_bytes: u64,
}

pub const MESSAGE_CSV_HEADER: &str = "epoch,event,sender,receiver,payload_kind,payload_bytes";

pub fn write_message_log<W: Write>(log: &[Message], mut out: W) -> Result<()> {
    writeln!(out, "{MESSAGE_CSV_HEADER}")?;
    for m in log {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            m.epoch,
            m.event.name(),
            m.sender,
            m.receiver,
            m.payload.name(),
            m.payload_bytes
        )?;
    }
    Ok(())
}

/// Number of distinct epochs at which `event` occurred.
pub fn event_count(log: &[Message], event: EventKind) -> usize {
    log.iter()
        .filter(|m| m.event == event)
        .map(|m| m.epoch)
        .collect::<HashSet<_>>()
        .len()
}

/// Mean of the device generator losses, as computed by the center.
pub fn average_generator_loss(losses: &[f64]) -> Result<f64> {
    if losses.is_empty() {
        return Err(Error::InvalidArgument("no device losses to average".into()));
    }
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationConfig {
    pub gan: GanConfig,
    pub exchange_period: usize,
    pub swap_period: usize,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            gan: GanConfig::default(),
            exchange_period: 1,
            swap_period: 10,
        }
    }
}

impl FederationConfig {
    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::new(self.exchange_period, self.swap_period, self.gan.epochs)
    }
}

/// A discriminator together with its optimizer state and the index of the
/// device where it was initialised. All three travel together on a swap.
#[derive(Debug, Clone)]
struct Resident {
    disc: Discriminator,
    adam: AdamState,
    origin: usize,
}

#[derive(Debug, Clone)]
struct Device {
    id: u32,
    data: Array2<f64>,
    rng: SimRng,
    resident: Resident,
}

/// Per-exchange training summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeReport {
    /// Device losses `L_i` before each ascent step.
    pub discriminator_losses: Vec<f64>,
    /// Device generator losses `L_i^g`.
    pub generator_losses: Vec<f64>,
    /// Mean discriminator output on each device's real minibatch.
    pub mean_real_outputs: Vec<f64>,
}

impl ExchangeReport {
    pub fn average_generator_loss(&self) -> f64 {
        average_generator_loss(&self.generator_losses).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone)]
pub struct FederationState {
    center: Generator,
    center_adam: AdamState,
    center_rng: SimRng,
    devices: Vec<Device>,
    ring: RingTopology,
    schedule: Schedule,
    batch_size: usize,
    objective: crate::gan::GeneratorObjective,
    epoch: usize,
    log: Vec<Message>,
}

// Extra seed streams beyond the ones the standalone trainer uses.
const STREAM_RING: u64 = 3;
const STREAM_DEVICE: u64 = 4;

/// The ring a run with `seed` and `n` devices (ids `0..n`) will use.
pub fn device_ring(n: usize, seed: u64) -> Result<RingTopology> {
    let ids: Vec<u32> = (0..n as u32).collect();
    build_ring(&ids, derive_seed(seed, STREAM_RING))
}

impl FederationState {
    /// Device `i` holds `datasets[i]` and gets id `i`.
    pub fn new(datasets: Vec<Array2<f64>>, config: &FederationConfig, seed: u64) -> Result<Self> {
        config.gan.validate()?;
        let schedule = config.schedule()?;
        let n = datasets.len();
        let ring = device_ring(n, seed)?;
        let d = datasets[0].ncols();
        for (i, data) in datasets.iter().enumerate() {
            if data.nrows() == 0 {
                return Err(Error::InvalidArgument(format!("device {i} has no data")));
            }
            if data.ncols() != d {
                return Err(Error::shape("device feature count", d, data.ncols()));
            }
            if data.nrows() < config.gan.batch_size {
                log::warn!(
                    "device {i} has {} rows for batch size {}; sampling with replacement",
                    data.nrows(),
                    config.gan.batch_size
                );
            }
        }
        let center = config.gan.init_generator(d, derive_seed(seed, STREAM_GENERATOR_INIT))?;
        let center_adam = AdamState::new(center.params(), config.gan.generator_adam);
        let devices = datasets
            .into_iter()
            .enumerate()
            .map(|(i, data)| {
                let disc = config
                    .gan
                    .init_discriminator(d, derive_path(seed, &[STREAM_DISCRIMINATOR_INIT, i as u64]))?;
                let adam = AdamState::new(disc.params(), config.gan.discriminator_adam);
                Ok(Device {
                    id: i as u32,
                    data,
                    rng: rng_from(derive_path(seed, &[STREAM_DEVICE, i as u64])),
                    resident: Resident { disc, adam, origin: i },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            center,
            center_adam,
            center_rng: rng_from(derive_seed(seed, STREAM_TRAINING)),
            devices,
            ring,
            schedule,
            batch_size: config.gan.batch_size,
            objective: config.gan.objective,
            epoch: 0,
            log: Vec::new(),
        })
    }

    pub fn n_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn center(&self) -> &Generator {
        &self.center
    }

    pub fn ring(&self) -> &RingTopology {
        &self.ring
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn message_log(&self) -> &[Message] {
        &self.log
    }

    pub fn device_ids(&self) -> Vec<u32> {
        self.devices.iter().map(|d| d.id).collect()
    }

    /// The discriminator currently resident at device index `i`.
    pub fn discriminator(&self, i: usize) -> &Discriminator {
        &self.devices[i].resident.disc
    }

    pub fn adam_state(&self, i: usize) -> &AdamState {
        &self.devices[i].resident.adam
    }

    /// Device index where each resident discriminator was initialised.
    pub fn resident_origins(&self) -> Vec<usize> {
        self.devices.iter().map(|d| d.resident.origin).collect()
    }

    pub fn device_data(&self, i: usize) -> ArrayView2<'_, f64> {
        self.devices[i].data.view()
    }

    /// One center exchange: the center generates `2n` batches, each device
    /// takes one ascent step and scores its feedback batch, and the center
    /// descends on the averaged generator loss.
    pub fn center_exchange(&mut self) -> Result<ExchangeReport> {
        let epoch = self.epoch;
        let n = self.devices.len();
        let b = self.batch_size;
        let d = self.center.data_dim();
        let row_bytes = (d * 8) as u64;

        // rows [i·b, (i+1)·b) feed device i's ascent step, rows
        // [(n+i)·b, (n+i+1)·b) are its feedback batch
        let batch = generate_batch(&self.center, 2 * n * b, &mut self.center_rng)?;
        let mut upstream = Array2::zeros((2 * n * b, d));
        let mut report = ExchangeReport {
            discriminator_losses: Vec::with_capacity(n),
            generator_losses: Vec::with_capacity(n),
            mean_real_outputs: Vec::with_capacity(n),
        };
        let inv_n = 1.0 / n as f64;
        for (i, device) in self.devices.iter_mut().enumerate() {
            self.log.push(Message {
                epoch,
                event: EventKind::Exchange,
                sender: Participant::Center,
                receiver: Participant::Device(device.id),
                payload: PayloadKind::GeneratedBatches,
                payload_bytes: 2 * b as u64 * row_bytes,
            });
            let adversarial = batch.samples.slice(s![i * b..(i + 1) * b, ..]);
            let feedback_rows = batch.samples.slice(s![(n + i) * b..(n + i + 1) * b, ..]);
            let real = sample_rows(device.data.view(), b, &mut device.rng);
            let resident = &mut device.resident;
            let eval = discriminator_step(&mut resident.disc, &mut resident.adam, real.view(), adversarial, epoch)?;
            let feedback = generator_feedback(&resident.disc, feedback_rows, self.objective)?;
            if !feedback.loss.is_finite() {
                return Err(Error::TrainingDivergence {
                    epoch,
                    detail: format!("generator loss from device {} is not finite", device.id),
                });
            }
            upstream
                .slice_mut(s![(n + i) * b..(n + i + 1) * b, ..])
                .assign(&(&feedback.sample_gradient * inv_n));
            self.log.push(Message {
                epoch,
                event: EventKind::Exchange,
                sender: Participant::Device(device.id),
                receiver: Participant::Center,
                payload: PayloadKind::LossFeedback,
                payload_bytes: 8 + b as u64 * row_bytes,
            });
            report.discriminator_losses.push(eval.loss);
            report.generator_losses.push(feedback.loss);
            report.mean_real_outputs.push(eval.mean_real_output);
        }
        generator_step(&mut self.center, &mut self.center_adam, &batch, upstream.view(), epoch)?;
        self.log.push(Message {
            epoch,
            event: EventKind::GenUpdate,
            sender: Participant::Center,
            receiver: Participant::Center,
            payload: PayloadKind::GeneratorStep,
            payload_bytes: 0,
        });
        Ok(report)
    }

    /// Every device sends its resident discriminator (with Adam state) to
    /// its ring successor. Datasets stay where they are.
    pub fn swap_weights(&mut self) {
        let n = self.devices.len();
        let outgoing: Vec<Resident> = self.devices.iter().map(|d| d.resident.clone()).collect();
        for (i, resident) in outgoing.into_iter().enumerate() {
            let to = self.ring.successor(i);
            let params = resident.disc.params();
            // DGW1 body plus two moment tensors and the timestep
            let bytes = (encoded_len(params) + 16 * params.param_count() + 8) as u64;
            self.log.push(Message {
                epoch: self.epoch,
                event: EventKind::Swap,
                sender: Participant::Device(self.devices[i].id),
                receiver: Participant::Device(self.devices[to].id),
                payload: PayloadKind::DiscriminatorWeights,
                payload_bytes: bytes,
            });
            self.devices[to].resident = resident;
        }
        debug_assert_eq!(self.devices.len(), n);
    }

    /// Advances one epoch, running whatever the schedule triggers. Returns
    /// the exchange report when an exchange happened.
    pub fn advance(&mut self) -> Result<Option<ExchangeReport>> {
        self.epoch += 1;
        let report = if self.schedule.exchanges_at(self.epoch) {
            Some(self.center_exchange()?)
        } else {
            None
        };
        if self.schedule.swaps_at(self.epoch) {
            self.swap_weights();
        }
        Ok(report)
    }

    /// Clones of the resident discriminators, indexed by device.
    pub fn extract_discriminators(&self) -> Vec<Discriminator> {
        self.devices.iter().map(|d| d.resident.disc.clone()).collect()
    }
}

/// One trace row per center exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributedTraceRow {
    pub report: LossReport,
    /// Each resident discriminator's mean output on the monitor set (or on
    /// its device's real minibatch without one).
    pub device_mean_outputs: Vec<f64>,
}

/// Runs the full schedule. The trace's `discriminator_loss` is the mean of
/// the device losses and `generator_loss` the center's averaged loss.
pub fn train_distributed(
    datasets: Vec<Array2<f64>>,
    monitor: Option<ArrayView2<f64>>,
    config: &FederationConfig,
    seed: u64,
) -> Result<(FederationState, Vec<DistributedTraceRow>)> {
    if datasets.is_empty() {
        return Err(Error::Topology("no devices".into()));
    }
    let mut state = FederationState::new(datasets, config, seed)?;
    if let Some(m) = monitor {
        if m.ncols() != state.center.data_dim() {
            return Err(Error::shape("monitor columns", state.center.data_dim(), m.ncols()));
        }
    }
    let mut trace = Vec::with_capacity(state.schedule.exchange_count());
    for _ in 0..state.schedule.total_epochs() {
        let Some(report) = state.advance()? else {
            continue;
        };
        let device_mean_outputs = match monitor {
            Some(m) => state
                .devices
                .iter()
                .map(|d| d.resident.disc.mean_output(m))
                .collect::<Result<Vec<_>>>()?,
            None => report.mean_real_outputs.clone(),
        };
        let n = report.discriminator_losses.len() as f64;
        trace.push(DistributedTraceRow {
            report: LossReport {
                epoch: state.epoch,
                discriminator_loss: report.discriminator_losses.iter().sum::<f64>() / n,
                generator_loss: report.average_generator_loss(),
                mean_disc_output_real: device_mean_outputs.iter().sum::<f64>() / n,
            },
            device_mean_outputs,
        });
    }
    Ok((state, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(epochs: usize, t: usize, e: usize) -> FederationConfig {
        FederationConfig {
            gan: GanConfig {
                latent_dim: 3,
                generator_hidden: vec![6],
                discriminator_hidden: vec![6],
                batch_size: 8,
                epochs,
                ..GanConfig::default()
            },
            exchange_period: t,
            swap_period: e,
        }
    }

    fn shards(n: usize) -> Vec<Array2<f64>> {
        (0..n)
            .map(|i| Array2::from_shape_fn((20, 2), |(r, c)| i as f64 + 0.01 * (r * 2 + c) as f64))
            .collect()
    }

    #[test]
    fn three_ring_has_order_three() {
        let ring = build_ring(&[1, 2, 3], 11).unwrap();
        assert!(ring.is_single_cycle());
        for i in 0..3 {
            let mut at = i;
            for _ in 0..3 {
                at = ring.successor(at);
            }
            assert_eq!(at, i);
            assert_ne!(ring.successor(i), i);
            assert_eq!(ring.predecessor(ring.successor(i)), i);
        }
        assert_eq!(ring, build_ring(&[1, 2, 3], 11).unwrap());
    }

    #[test]
    fn ring_preconditions() {
        assert!(matches!(build_ring(&[4], 0), Err(Error::Topology(_))));
        assert!(matches!(build_ring(&[], 0), Err(Error::Topology(_))));
        assert!(matches!(build_ring(&[1, 2, 1], 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn schedule_arithmetic() {
        let s = Schedule::new(1, 10, 40).unwrap();
        assert_eq!((s.exchange_count(), s.swap_count()), (40, 4));
        assert!(!s.swaps_at(0) && !s.exchanges_at(0));
        assert!(s.swaps_at(30) && !s.swaps_at(31));
        assert_eq!(Schedule::new(3, 50, 40).unwrap().swap_count(), 0);
        assert!(Schedule::new(0, 1, 1).is_err());
    }

    #[test]
    fn generator_loss_average() {
        assert_eq!(average_generator_loss(&[-1.0, -2.0, -3.0]).unwrap(), -2.0);
        assert_eq!(average_generator_loss(&[-0.7]).unwrap(), -0.7);
        assert!(average_generator_loss(&[]).is_err());
    }

    #[test]
    fn exchange_message_counts() {
        let mut state = FederationState::new(shards(3), &tiny_config(1, 1, 100), 2).unwrap();
        let report = state.center_exchange().unwrap();
        assert_eq!(report.generator_losses.len(), 3);
        let log = state.message_log();
        let batches: Vec<_> = log.iter().filter(|m| m.payload == PayloadKind::GeneratedBatches).collect();
        assert_eq!(batches.len(), 3);
        // two b×d batches of f64 per device: 2 batches, 8 rows, 2 columns
        assert!(batches.iter().all(|m| m.payload_bytes == 2 * 8 * 2 * 8));
        let feedback = log.iter().filter(|m| m.payload == PayloadKind::LossFeedback).count();
        assert_eq!(feedback, 3);
        assert_eq!(log.iter().filter(|m| m.event == EventKind::GenUpdate).count(), 1);
    }

    #[test]
    fn two_swaps_on_two_devices_restore_residents() {
        let mut state = FederationState::new(shards(2), &tiny_config(1, 1, 1), 5).unwrap();
        let before = state.extract_discriminators();
        state.swap_weights();
        assert_eq!(state.resident_origins(), vec![1, 0]);
        assert_eq!(state.discriminator(0), &before[1]);
        state.swap_weights();
        assert_eq!(state.extract_discriminators(), before);
    }

    #[test]
    fn swap_moves_to_successor_and_leaves_data() {
        let mut state = FederationState::new(shards(4), &tiny_config(1, 1, 1), 8).unwrap();
        let data_before: Vec<_> = (0..4).map(|i| state.device_data(i).to_owned()).collect();
        let before = state.extract_discriminators();
        state.swap_weights();
        for i in 0..4 {
            assert_eq!(state.discriminator(state.ring().successor(i)), &before[i]);
            assert_eq!(state.device_data(i), data_before[i].view());
        }
    }

    #[test]
    fn idle_epochs_change_nothing() {
        let mut state = FederationState::new(shards(2), &tiny_config(10, 5, 100), 1).unwrap();
        let before = state.extract_discriminators();
        for _ in 0..4 {
            assert!(state.advance().unwrap().is_none());
        }
        assert_eq!(state.extract_discriminators(), before);
        assert!(state.message_log().is_empty());
        assert!(state.advance().unwrap().is_some());
        assert_eq!(state.epoch(), 5);
    }

    #[test]
    fn distributed_run_is_deterministic_and_logs_schedule() {
        let config = tiny_config(40, 1, 10);
        let (a, trace_a) = train_distributed(shards(4), None, &config, 3).unwrap();
        let (b, trace_b) = train_distributed(shards(4), None, &config, 3).unwrap();
        assert_eq!(trace_a, trace_b);
        assert_eq!(a.message_log(), b.message_log());
        assert_eq!(a.extract_discriminators(), b.extract_discriminators());
        assert_eq!(trace_a.len(), 40);
        assert_eq!(event_count(a.message_log(), EventKind::Swap), 4);
        assert_eq!(event_count(a.message_log(), EventKind::Exchange), 40);
        assert!(a.message_log().iter().all(|m| m.payload != PayloadKind::RawData));
        // four swaps on a 4-ring bring every discriminator home
        assert_eq!(a.resident_origins(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn message_log_csv() {
        let mut state = FederationState::new(shards(2), &tiny_config(1, 1, 1), 0).unwrap();
        state.advance().unwrap();
        let mut buf = Vec::new();
        write_message_log(state.message_log(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], MESSAGE_CSV_HEADER);
        assert_eq!(lines.len(), 1 + state.message_log().len());
        assert!(lines[1].starts_with("1,exchange,center,device-0,generated-batches,"));
        assert!(text.contains(",swap,"));
        assert!(text.contains("1,gen-update,center,center,generator-step,0"));
    }

    #[test]
    fn rejects_mismatched_shards() {
        let mut data = shards(2);
        data[1] = Array2::zeros((5, 3));
        assert!(FederationState::new(data, &tiny_config(1, 1, 1), 0).is_err());
        assert!(matches!(
            FederationState::new(shards(1), &tiny_config(1, 1, 1), 0),
            Err(Error::Topology(_))
        ));
    }
}
