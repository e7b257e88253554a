use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::index;
use rand::Rng;

use super::{
    discriminator_loss_grad, generator_feedback, DiscriminatorEval, Discriminator, Generator,
    LossReport, PriorFamily,
};
use crate::nn::{Activation, AdamConfig, AdamState, ForwardCache, Gradient, Mlp};
use crate::rng::{derive_seed, rng_from};
use crate::{Error, Result};

/// Which quantity the generator descends. Reported generator losses are
/// always the minimax feedback `(1/b) Σ ln(1 − D)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeneratorObjective {
    /// `ln(1 − D(G(z)))`, the objective of the minimax game.
    #[default]
    Minimax,
    /// `−ln D(G(z))`, stronger gradients early in training.
    NonSaturating,
}

impl GeneratorObjective {
    pub fn name(self) -> &'static str {
        match self {
            GeneratorObjective::Minimax => "minimax",
            GeneratorObjective::NonSaturating => "non-saturating",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "minimax" => Ok(GeneratorObjective::Minimax),
            "non-saturating" | "nonsaturating" => Ok(GeneratorObjective::NonSaturating),
            other => Err(Error::Config(format!("unknown generator objective {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanConfig {
    pub latent_dim: usize,
    pub prior: PriorFamily,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    /// Hidden activation of the discriminator; generator hidden layers use tanh.
    pub discriminator_activation: Activation,
    pub batch_size: usize,
    pub epochs: usize,
    pub generator_adam: AdamConfig,
    pub discriminator_adam: AdamConfig,
    pub objective: GeneratorObjective,
}

impl Default for GanConfig {
    fn default() -> Self {
        let adam = AdamConfig {
            learning_rate: 2e-3,
            beta1: 0.5,
            ..AdamConfig::default()
        };
        Self {
            latent_dim: 32,
            prior: PriorFamily::default(),
            generator_hidden: vec![64],
            discriminator_hidden: vec![64, 32],
            discriminator_activation: Activation::Relu,
            batch_size: 64,
            epochs: 5000,
            generator_adam: adam,
            discriminator_adam: adam,
            objective: GeneratorObjective::Minimax,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.generator_hidden.contains(&0) || self.discriminator_hidden.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        self.prior.validate()?;
        self.generator_adam.validate()?;
        self.discriminator_adam.validate()
    }

    pub fn generator_sizes(&self, data_dim: usize) -> Vec<usize> {
        let mut sizes = vec![self.latent_dim];
        sizes.extend(&self.generator_hidden);
        sizes.push(data_dim);
        sizes
    }

    pub fn discriminator_sizes(&self, data_dim: usize) -> Vec<usize> {
        let mut sizes = vec![data_dim];
        sizes.extend(&self.discriminator_hidden);
        sizes.push(1);
        sizes
    }

    pub fn init_generator(&self, data_dim: usize, seed: u64) -> Result<Generator> {
        let mut acts = vec![Activation::Tanh; self.generator_hidden.len()];
        acts.push(Activation::Identity);
        Generator::new(Mlp::init(&self.generator_sizes(data_dim), &acts, seed)?, self.prior)
    }

    pub fn init_discriminator(&self, data_dim: usize, seed: u64) -> Result<Discriminator> {
        let mut acts = vec![self.discriminator_activation; self.discriminator_hidden.len()];
        acts.push(Activation::Sigmoid);
        Discriminator::new(Mlp::init(&self.discriminator_sizes(data_dim), &acts, seed)?)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub trace: Vec<LossReport>,
}

// Seed streams shared with the federated trainer.
pub(crate) const STREAM_GENERATOR_INIT: u64 = 0;
pub(crate) const STREAM_DISCRIMINATOR_INIT: u64 = 1;
pub(crate) const STREAM_TRAINING: u64 = 2;

pub(crate) fn diverged(epoch: usize, err: Error) -> Error {
    match err {
        Error::NonFinite { layer } => Error::TrainingDivergence {
            epoch,
            detail: format!("non-finite gradient in layer {layer}"),
        },
        other => other,
    }
}

/// Draws `b` rows, without replacement when the data has at least `b` rows.
pub(crate) fn sample_rows<R: Rng + ?Sized>(data: ArrayView2<f64>, b: usize, rng: &mut R) -> Array2<f64> {
    let m = data.nrows();
    let picks: Vec<usize> = if m >= b {
        index::sample(rng, m, b).into_vec()
    } else {
        (0..b).map(|_| rng.random_range(0..m)).collect()
    };
    data.select(Axis(0), &picks)
}

/// One ascent step on the discriminator loss. Returns the loss evaluated
/// before the update.
pub(crate) fn discriminator_step(
    disc: &mut Discriminator,
    adam: &mut AdamState,
    real: ArrayView2<f64>,
    fake: ArrayView2<f64>,
    epoch: usize,
) -> Result<DiscriminatorEval> {
    let mut eval = discriminator_loss_grad(disc, real, fake)?;
    if !eval.loss.is_finite() {
        return Err(Error::TrainingDivergence {
            epoch,
            detail: "discriminator loss is not finite".into(),
        });
    }
    // Adam descends, the discriminator ascends
    let mut descent = eval.gradient.clone();
    descent.scale(-1.0);
    adam.step(disc.params_mut(), &descent).map_err(|e| diverged(epoch, e))?;
    eval.gradient = descent;
    Ok(eval)
}

/// Forward pass of the generator over a latent batch, keeping the cache for
/// the later update.
pub(crate) struct GeneratedBatch {
    pub samples: Array2<f64>,
    pub cache: ForwardCache,
}

pub(crate) fn generate_batch<R: Rng + ?Sized>(gen: &Generator, rows: usize, rng: &mut R) -> Result<GeneratedBatch> {
    let z = gen.prior().sample_with(gen.latent_dim(), rows, rng);
    let (samples, cache) = gen.params().forward(z.view())?;
    Ok(GeneratedBatch { samples, cache })
}

/// Descends the generator along `sample_gradient`, which holds the
/// objective's gradient with respect to every generated row of `batch`.
pub(crate) fn generator_step(
    gen: &mut Generator,
    adam: &mut AdamState,
    batch: &GeneratedBatch,
    sample_gradient: ArrayView2<f64>,
    epoch: usize,
) -> Result<()> {
    let grad: Gradient = gen.params().backward(&batch.cache, sample_gradient)?;
    adam.step(gen.params_mut(), &grad).map_err(|e| diverged(epoch, e))
}

/// Trains one GAN on `data` (rows are samples).
///
/// Each epoch draws a real minibatch and `2b` generated points: the first
/// `b` feed the discriminator ascent step, the second `b` are scored by the
/// updated discriminator and drive the generator descent step.
pub fn train_standalone(data: ArrayView2<f64>, config: &GanConfig, seed: u64) -> Result<TrainOutcome> {
    train_with_monitor(data, None, config, seed)
}

/// Same training as [`train_standalone`] over the pooled data set.
pub fn train_centralized(pooled: ArrayView2<f64>, config: &GanConfig, seed: u64) -> Result<TrainOutcome> {
    train_with_monitor(pooled, None, config, seed)
}

/// [`train_standalone`] with an optional held-out set; when present, the
/// trace's mean discriminator output is measured on it instead of on the
/// real minibatch.
pub fn train_with_monitor(
    data: ArrayView2<f64>,
    monitor: Option<ArrayView2<f64>>,
    config: &GanConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.nrows() == 0 {
        return Err(Error::InvalidArgument("training data is empty".into()));
    }
    let d = data.ncols();
    if let Some(m) = monitor {
        if m.ncols() != d {
            return Err(Error::shape("monitor columns", d, m.ncols()));
        }
    }
    let b = config.batch_size;
    if data.nrows() < b {
        log::warn!(
            "{} training rows for batch size {b}; sampling with replacement",
            data.nrows()
        );
    }
    let mut gen = config.init_generator(d, derive_seed(seed, STREAM_GENERATOR_INIT))?;
    let mut disc = config.init_discriminator(d, derive_seed(seed, STREAM_DISCRIMINATOR_INIT))?;
    let mut gen_adam = AdamState::new(gen.params(), config.generator_adam);
    let mut disc_adam = AdamState::new(disc.params(), config.discriminator_adam);
    let mut rng = rng_from(derive_seed(seed, STREAM_TRAINING));
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let real = sample_rows(data, b, &mut rng);
        let batch = generate_batch(&gen, 2 * b, &mut rng)?;
        let adversarial = batch.samples.slice(s![..b, ..]);
        let feedback_rows = batch.samples.slice(s![b.., ..]);

        let eval = discriminator_step(&mut disc, &mut disc_adam, real.view(), adversarial, epoch)?;
        let feedback = generator_feedback(&disc, feedback_rows, config.objective)?;
        if !feedback.loss.is_finite() {
            return Err(Error::TrainingDivergence {
                epoch,
                detail: "generator loss is not finite".into(),
            });
        }
        let mut upstream = Array2::zeros((2 * b, d));
        upstream.slice_mut(s![b.., ..]).assign(&feedback.sample_gradient);
        generator_step(&mut gen, &mut gen_adam, &batch, upstream.view(), epoch)?;

        let mean_real = match monitor {
            Some(m) => disc.mean_output(m)?,
            None => eval.mean_real_output,
        };
        trace.push(LossReport {
            epoch,
            discriminator_loss: eval.loss,
            generator_loss: feedback.loss,
            mean_disc_output_real: mean_real,
        });
    }
    Ok(TrainOutcome {
        generator: gen,
        discriminator: disc,
        trace,
    })
}

/// Trains `disc` against a frozen generator: the inner maximisation of the
/// value function for fixed `gen`.
pub fn fit_best_response(
    mut disc: Discriminator,
    data: ArrayView2<f64>,
    gen: &Generator,
    steps: usize,
    batch_size: usize,
    adam: AdamConfig,
    seed: u64,
) -> Result<Discriminator> {
    adam.validate()?;
    if data.nrows() == 0 || batch_size == 0 {
        return Err(Error::InvalidArgument("best response needs data and a positive batch".into()));
    }
    let mut state = AdamState::new(disc.params(), adam);
    let mut rng = rng_from(seed);
    for step in 1..=steps {
        let real = sample_rows(data, batch_size, &mut rng);
        let fake = gen.generate_with(batch_size, &mut rng)?;
        discriminator_step(&mut disc, &mut state, real.view(), fake.view(), step)?;
    }
    Ok(disc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::estimate_value_function;

    fn small_config(epochs: usize) -> GanConfig {
        GanConfig {
            latent_dim: 4,
            generator_hidden: vec![8],
            discriminator_hidden: vec![8],
            batch_size: 16,
            epochs,
            ..GanConfig::default()
        }
    }

    fn toy_data(rows: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, 2), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 11.0)
    }

    #[test]
    fn zero_epochs_returns_initialisation() {
        let config = small_config(0);
        let data = toy_data(20);
        let out = train_standalone(data.view(), &config, 5).unwrap();
        assert!(out.trace.is_empty());
        assert_eq!(out.generator, config.init_generator(2, derive_seed(5, STREAM_GENERATOR_INIT)).unwrap());
        assert_eq!(
            out.discriminator,
            config.init_discriminator(2, derive_seed(5, STREAM_DISCRIMINATOR_INIT)).unwrap()
        );
    }

    #[test]
    fn training_is_deterministic() {
        let config = small_config(30);
        let data = toy_data(40);
        let a = train_standalone(data.view(), &config, 9).unwrap();
        let b = train_standalone(data.view(), &config, 9).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.generator, b.generator);
        let c = train_standalone(data.view(), &config, 10).unwrap();
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn centralized_on_one_shard_equals_standalone() {
        let config = small_config(20);
        let data = toy_data(30);
        let a = train_standalone(data.view(), &config, 3).unwrap();
        let b = train_centralized(data.view(), &config, 3).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.discriminator, b.discriminator);
    }

    #[test]
    fn trace_values_are_finite() {
        let config = small_config(50);
        // fewer rows than the batch: falls back to sampling with replacement
        let data = toy_data(5);
        let out = train_standalone(data.view(), &config, 1).unwrap();
        assert_eq!(out.trace.len(), 50);
        assert_eq!(out.trace.last().unwrap().epoch, 50);
        for r in &out.trace {
            assert!(r.discriminator_loss.is_finite() && r.generator_loss.is_finite());
            assert!((0.0..=1.0).contains(&r.mean_disc_output_real));
        }
    }

    #[test]
    fn rejects_bad_input() {
        let config = small_config(5);
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(train_standalone(empty.view(), &config, 0).is_err());
        let bad = GanConfig {
            batch_size: 0,
            ..small_config(5)
        };
        assert!(matches!(train_standalone(toy_data(4).view(), &bad, 0), Err(Error::Config(_))));
        let data = toy_data(8);
        let monitor = Array2::zeros((3, 5));
        assert!(train_with_monitor(data.view(), Some(monitor.view()), &config, 0).is_err());
    }

    #[test]
    fn objective_names_round_trip() {
        for o in [GeneratorObjective::Minimax, GeneratorObjective::NonSaturating] {
            assert_eq!(GeneratorObjective::parse(o.name()).unwrap(), o);
        }
        assert!(GeneratorObjective::parse("wasserstein").is_err());
    }

    #[test]
    fn best_response_beats_initial_discriminator() {
        let config = small_config(0);
        let gen = config.init_generator(2, 1).unwrap();
        let disc = config.init_discriminator(2, 2).unwrap();
        let data = toy_data(64).mapv(|v| v + 3.0);
        let before = estimate_value_function(&disc, &gen, data.view(), 2000, 7).unwrap();
        let adam = AdamConfig {
            learning_rate: 1e-2,
            ..AdamConfig::default()
        };
        let fitted = fit_best_response(disc, data.view(), &gen, 200, 32, adam, 4).unwrap();
        let after = estimate_value_function(&fitted, &gen, data.view(), 2000, 7).unwrap();
        assert!(after > before, "{before} -> {after}");
        assert!(after > -0.1, "separable data should give a value near 0, got {after}");
    }
}
