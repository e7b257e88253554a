//! GAN building blocks: priors, generator/discriminator wrappers, the
//! clamped batch losses and their gradients, and Monte-Carlo value
//! estimates.
//!
//! The discriminator maximises
//! `L(θ) = (1/b)[Σ_real ln D(x) + Σ_fake ln(1 − D(x))]`; the generator
//! minimises `L^g = (1/b) Σ_fake ln(1 − D(x))`. Discriminator outputs are
//! clamped to `[δ, 1 − δ]` with `δ = 1e-7` before every logarithm.

pub(crate) mod train;

use std::fmt;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::distr::{Distribution, Uniform};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::nn::{Activation, Gradient, Mlp};
use crate::rng::rng_from;
use crate::{Error, Result};

pub use train::{
    fit_best_response, train_centralized, train_standalone, train_with_monitor, GanConfig,
    GeneratorObjective, TrainOutcome,
};

/// Lower clamp for discriminator outputs.
pub const CLAMP_FLOOR: f64 = 1e-7;

#[inline]
fn clamp_output(d: f64) -> f64 {
    d.clamp(CLAMP_FLOOR, 1.0 - CLAMP_FLOOR)
}

#[inline]
fn within_clamp(d: f64) -> bool {
    d > CLAMP_FLOOR && d < 1.0 - CLAMP_FLOOR
}

/// Distribution of the latent input `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorFamily {
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, std: f64 },
}

impl Default for PriorFamily {
    fn default() -> Self {
        PriorFamily::Uniform {
            low: -1.0,
            high: 1.0,
        }
    }
}

impl PriorFamily {
    /// Accepts `uniform`, `uniform:LOW:HIGH`, `normal` and `normal:MEAN:STD`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.trim().split(':').collect();
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("prior parameter {s:?} is not a number")))
        };
        let family = match parts.as_slice() {
            ["uniform"] => PriorFamily::default(),
            ["uniform", lo, hi] => PriorFamily::Uniform {
                low: num(lo)?,
                high: num(hi)?,
            },
            ["normal"] | ["gaussian"] => PriorFamily::Normal {
                mean: 0.0,
                std: 1.0,
            },
            ["normal", m, sd] | ["gaussian", m, sd] => PriorFamily::Normal {
                mean: num(m)?,
                std: num(sd)?,
            },
            _ => return Err(Error::Config(format!("unsupported prior family {spec:?}"))),
        };
        family.validate()?;
        Ok(family)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PriorFamily::Uniform { low, high } if low < high && low.is_finite() && high.is_finite() => Ok(()),
            PriorFamily::Normal { mean, std } if std > 0.0 && mean.is_finite() && std.is_finite() => Ok(()),
            other => Err(Error::Config(format!("invalid prior parameters {other:?}"))),
        }
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, latent_dim: usize, b: usize, rng: &mut R) -> Array2<f64> {
        match *self {
            PriorFamily::Uniform { low, high } => {
                let dist = Uniform::new_inclusive(low, high).expect("validated bounds");
                Array2::from_shape_simple_fn((b, latent_dim), || dist.sample(rng))
            }
            PriorFamily::Normal { mean, std } => Array2::from_shape_simple_fn((b, latent_dim), || {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }),
        }
    }
}

impl fmt::Display for PriorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorFamily::Uniform { low, high } => write!(f, "uniform:{low}:{high}"),
            PriorFamily::Normal { mean, std } => write!(f, "normal:{mean}:{std}"),
        }
    }
}

/// `b × latent_dim` latent batch, deterministic per seed.
pub fn sample_prior(prior: &PriorFamily, latent_dim: usize, b: usize, seed: u64) -> Result<Array2<f64>> {
    prior.validate()?;
    if b == 0 || latent_dim == 0 {
        return Err(Error::InvalidArgument(format!(
            "latent batch needs positive size, got {b}x{latent_dim}"
        )));
    }
    Ok(prior.sample_with(latent_dim, b, &mut rng_from(seed)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    params: Mlp,
    prior: PriorFamily,
}

impl Generator {
    pub fn new(params: Mlp, prior: PriorFamily) -> Result<Self> {
        prior.validate()?;
        Ok(Self { params, prior })
    }

    pub fn params(&self) -> &Mlp {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Mlp {
        &mut self.params
    }

    pub fn prior(&self) -> &PriorFamily {
        &self.prior
    }

    pub fn latent_dim(&self) -> usize {
        self.params.in_size()
    }

    pub fn data_dim(&self) -> usize {
        self.params.out_size()
    }

    /// Draws `b` latent vectors and maps them to data space.
    pub fn generate(&self, b: usize, seed: u64) -> Result<Array2<f64>> {
        let z = sample_prior(&self.prior, self.latent_dim(), b, seed)?;
        self.params.predict(z.view())
    }

    pub fn generate_with<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> Result<Array2<f64>> {
        let z = self.prior.sample_with(self.latent_dim(), b, rng);
        self.params.predict(z.view())
    }
}

/// Network with a single sigmoid output.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    params: Mlp,
}

impl Discriminator {
    pub fn new(params: Mlp) -> Result<Self> {
        if params.out_size() != 1 {
            return Err(Error::InvalidArchitecture(format!(
                "discriminator must have one output, has {}",
                params.out_size()
            )));
        }
        if params.output_activation() != Activation::Sigmoid {
            return Err(Error::InvalidArchitecture(
                "discriminator output activation must be sigmoid".into(),
            ));
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &Mlp {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Mlp {
        &mut self.params
    }

    pub fn into_params(self) -> Mlp {
        self.params
    }

    pub fn input_dim(&self) -> usize {
        self.params.in_size()
    }

    /// Raw (unclamped) outputs, one per row.
    pub fn outputs(&self, batch: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(self.params.predict(batch)?.column(0).to_vec())
    }

    pub fn output(&self, x: &[f64]) -> Result<f64> {
        let row = ArrayView2::from_shape((1, x.len()), x)
            .map_err(|_| Error::shape("discriminator input", self.input_dim(), x.len()))?;
        Ok(self.params.predict(row)?[[0, 0]])
    }

    pub fn mean_output(&self, batch: ArrayView2<f64>) -> Result<f64> {
        let out = self.params.predict(batch)?;
        Ok(out.mean().unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub epoch: usize,
    pub discriminator_loss: f64,
    pub generator_loss: f64,
    pub mean_disc_output_real: f64,
}

impl LossReport {
    pub const CSV_HEADER: &'static str = "epoch,discriminator_loss,generator_loss,mean_disc_output_real";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.9},{:.9},{:.9}",
            self.epoch, self.discriminator_loss, self.generator_loss, self.mean_disc_output_real
        )
    }
}

fn check_batches(disc: &Discriminator, real: &ArrayView2<f64>, fake: &ArrayView2<f64>) -> Result<()> {
    if real.nrows() == 0 {
        return Err(Error::InvalidArgument("empty real batch".into()));
    }
    if real.nrows() != fake.nrows() {
        return Err(Error::shape("discriminator batch rows", real.nrows(), fake.nrows()));
    }
    if real.ncols() != disc.input_dim() {
        return Err(Error::shape("real batch columns", disc.input_dim(), real.ncols()));
    }
    if fake.ncols() != disc.input_dim() {
        return Err(Error::shape("fake batch columns", disc.input_dim(), fake.ncols()));
    }
    Ok(())
}

/// `(1/b)[Σ_real ln D(x) + Σ_fake ln(1 − D(x))]`, clamped.
pub fn discriminator_loss(disc: &Discriminator, real: ArrayView2<f64>, fake: ArrayView2<f64>) -> Result<f64> {
    check_batches(disc, &real, &fake)?;
    let b = real.nrows() as f64;
    let real_term: f64 = disc.outputs(real)?.into_iter().map(|d| clamp_output(d).ln()).sum();
    let fake_term: f64 = disc
        .outputs(fake)?
        .into_iter()
        .map(|d| (1.0 - clamp_output(d)).ln())
        .sum();
    Ok((real_term + fake_term) / b)
}

/// Discriminator loss plus its gradient with respect to the parameters.
/// Also returns the mean raw output on the real rows.
#[derive(Debug, Clone)]
pub struct DiscriminatorEval {
    pub loss: f64,
    pub gradient: Gradient,
    pub mean_real_output: f64,
}

pub fn discriminator_loss_grad(
    disc: &Discriminator,
    real: ArrayView2<f64>,
    fake: ArrayView2<f64>,
) -> Result<DiscriminatorEval> {
    check_batches(disc, &real, &fake)?;
    let b = real.nrows();
    let stacked = ndarray::concatenate(Axis(0), &[real, fake]).expect("widths checked");
    let (out, cache) = disc.params.forward(stacked.view())?;
    let inv_b = 1.0 / b as f64;
    let mut loss = 0.0;
    let mut mean_real = 0.0;
    let mut upstream = Array2::zeros((2 * b, 1));
    for r in 0..2 * b {
        let d = out[[r, 0]];
        if r < b {
            mean_real += d;
            loss += clamp_output(d).ln();
            if within_clamp(d) {
                upstream[[r, 0]] = inv_b / d;
            }
        } else {
            loss += (1.0 - clamp_output(d)).ln();
            if within_clamp(d) {
                upstream[[r, 0]] = -inv_b / (1.0 - d);
            }
        }
    }
    let gradient = disc.params.backward(&cache, upstream.view())?;
    Ok(DiscriminatorEval {
        loss: loss * inv_b,
        gradient,
        mean_real_output: mean_real * inv_b,
    })
}

/// `(1/b) Σ ln(1 − D(x))` over generated points, clamped.
pub fn generator_feedback_loss(disc: &Discriminator, fake: ArrayView2<f64>) -> Result<f64> {
    if fake.nrows() == 0 {
        return Err(Error::InvalidArgument("empty generated batch".into()));
    }
    let b = fake.nrows() as f64;
    let total: f64 = disc
        .outputs(fake)?
        .into_iter()
        .map(|d| (1.0 - clamp_output(d)).ln())
        .sum();
    Ok(total / b)
}

/// What a device returns for one generated batch: the feedback loss
/// `L^g_i` and the gradient of the generator objective with respect to each
/// generated point.
#[derive(Debug, Clone)]
pub struct GeneratorFeedback {
    pub loss: f64,
    pub sample_gradient: Array2<f64>,
}

pub fn generator_feedback(
    disc: &Discriminator,
    fake: ArrayView2<f64>,
    objective: GeneratorObjective,
) -> Result<GeneratorFeedback> {
    if fake.nrows() == 0 {
        return Err(Error::InvalidArgument("empty generated batch".into()));
    }
    let b = fake.nrows();
    let inv_b = 1.0 / b as f64;
    let (out, cache) = disc.params.forward(fake)?;
    let mut loss = 0.0;
    let mut upstream = Array2::zeros((b, 1));
    for r in 0..b {
        let d = out[[r, 0]];
        loss += (1.0 - clamp_output(d)).ln();
        if within_clamp(d) {
            upstream[[r, 0]] = match objective {
                // d/dD ln(1 − D)
                GeneratorObjective::Minimax => -inv_b / (1.0 - d),
                // d/dD (−ln D)
                GeneratorObjective::NonSaturating => -inv_b / d,
            };
        }
    }
    let (_, sample_gradient) = disc.params.backward_with_input(&cache, upstream.view())?;
    Ok(GeneratorFeedback {
        loss: loss * inv_b,
        sample_gradient,
    })
}

/// Monte-Carlo estimate of `E_data[ln D(x)] + E_z[ln(1 − D(G(z)))]`.
///
/// The data term averages over every row of `data_sample`; the generator
/// term over `mc_draws` fresh latent draws.
pub fn estimate_value_function(
    disc: &Discriminator,
    gen: &Generator,
    data_sample: ArrayView2<f64>,
    mc_draws: usize,
    seed: u64,
) -> Result<f64> {
    if mc_draws == 0 {
        return Err(Error::InvalidArgument("mc_draws must be at least 1".into()));
    }
    if data_sample.nrows() == 0 {
        return Err(Error::InvalidArgument("empty data sample".into()));
    }
    let data_term = mean_log(disc, data_sample, |d| clamp_output(d).ln())?;
    let mut rng = rng_from(seed);
    const CHUNK: usize = 4096;
    let mut total = 0.0;
    let mut remaining = mc_draws;
    while remaining > 0 {
        let n = remaining.min(CHUNK);
        let fake = gen.generate_with(n, &mut rng)?;
        total += disc
            .outputs(fake.view())?
            .into_iter()
            .map(|d| (1.0 - clamp_output(d)).ln())
            .sum::<f64>();
        remaining -= n;
    }
    Ok(data_term + total / mc_draws as f64)
}

fn mean_log(disc: &Discriminator, batch: ArrayView2<f64>, f: impl Fn(f64) -> f64) -> Result<f64> {
    const CHUNK: usize = 4096;
    let mut total = 0.0;
    let mut start = 0;
    while start < batch.nrows() {
        let end = (start + CHUNK).min(batch.nrows());
        total += disc
            .outputs(batch.slice(s![start..end, ..]))?
            .into_iter()
            .map(&f)
            .sum::<f64>();
        start = end;
    }
    Ok(total / batch.nrows() as f64)
}
