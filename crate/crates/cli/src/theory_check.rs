//! Trained standalone value estimates against their closed-form predictions.
//!
//! Each case pairs a device distribution `p_i` with a population `p`, both
//! 1-D Gaussian mixtures. A standalone GAN is trained on samples of `p_i`;
//! its generator is then frozen and a fresh discriminator is fitted as the
//! best response against population samples. The value estimate of that pair
//! on held-out population rows is compared with `-ln 4 + JSD(p_i ‖ p)`.

use std::fmt::Write as _;

use dgids_core::data::{make_synthetic, SyntheticComponent, SyntheticSpec};
use dgids_core::gan::{estimate_value_function, fit_best_response, train_standalone, GanConfig};
use dgids_core::nn::AdamConfig;
use dgids_core::rng::derive_path;
use dgids_core::theory::{
    bin_gaussian_mixture, js_divergence, standalone_optimal_value, standalone_tp_bound, DiscreteDistribution,
    GaussianComponent, MeasureChoice, LN_4,
};
use log::info;

use crate::CliError;

const BIN_LO: f64 = -6.0;
const BIN_HI: f64 = 6.0;
const BINS: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryCase {
    pub name: &'static str,
    pub device: Vec<GaussianComponent>,
    pub population: Vec<GaussianComponent>,
}

fn g(weight: f64, mean: f64) -> GaussianComponent {
    GaussianComponent { weight, mean, std: 0.5 }
}

/// `p_i = p`, a half-overlapping population, and a population in which the
/// device's mode holds only 2% of the mass.
pub fn default_cases() -> Vec<TheoryCase> {
    vec![
        TheoryCase {
            name: "identical",
            device: vec![g(1.0, -3.0)],
            population: vec![g(1.0, -3.0)],
        },
        TheoryCase {
            name: "half-shared",
            device: vec![g(1.0, -3.0)],
            population: vec![g(0.5, -3.0), g(0.5, 3.0)],
        },
        TheoryCase {
            name: "minority",
            device: vec![g(1.0, -3.0)],
            population: vec![g(0.02, -3.0), g(0.98, 3.0)],
        },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheorySettings {
    pub gan: GanConfig,
    pub device_rows: usize,
    pub population_rows: usize,
    pub holdout_rows: usize,
    pub mc_draws: usize,
    pub best_response_steps: usize,
    pub best_response_batch: usize,
    pub best_response_adam: AdamConfig,
    pub tolerance: f64,
}

impl Default for TheorySettings {
    fn default() -> Self {
        Self {
            gan: GanConfig::default(),
            device_rows: 2000,
            population_rows: 4000,
            holdout_rows: 20000,
            mc_draws: 20000,
            best_response_steps: 3000,
            best_response_batch: 256,
            best_response_adam: AdamConfig {
                learning_rate: 1e-3,
                ..AdamConfig::default()
            },
            tolerance: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryRow {
    pub name: String,
    pub jsd: f64,
    /// `-ln 4 + JSD`.
    pub predicted: f64,
    /// `-ln 4 + 2 JSD`, the value a best response against a generator that
    /// matches `p_i` attains.
    pub predicted_doubled: f64,
    pub measured: Option<f64>,
    pub tp_bound: f64,
}

impl TheoryRow {
    pub fn error(&self) -> Option<f64> {
        self.measured.map(|m| (m - self.predicted).abs())
    }

    pub fn within(&self, tolerance: f64) -> Option<bool> {
        self.error().map(|e| e <= tolerance)
    }
}

fn discretise(components: &[GaussianComponent]) -> Result<DiscreteDistribution, CliError> {
    Ok(bin_gaussian_mixture(components, BIN_LO, BIN_HI, BINS)?)
}

fn sampler(components: &[GaussianComponent]) -> Result<SyntheticSpec, CliError> {
    let comps = components
        .iter()
        .map(|c| SyntheticComponent {
            mean: vec![c.mean],
            std: c.std,
            weight: c.weight,
        })
        .collect();
    Ok(SyntheticSpec::new(comps)?)
}

pub fn run_case(case: &TheoryCase, settings: &TheorySettings, seed: u64) -> Result<TheoryRow, CliError> {
    let pi = discretise(&case.device)?;
    let p = discretise(&case.population)?;
    let jsd = js_divergence(&pi, &p)?;
    let device = make_synthetic(&sampler(&case.device)?, settings.device_rows, derive_path(seed, &[1]))?;
    let population_spec = sampler(&case.population)?;
    let population = make_synthetic(&population_spec, settings.population_rows, derive_path(seed, &[2]))?;
    let holdout = make_synthetic(&population_spec, settings.holdout_rows, derive_path(seed, &[3]))?;

    info!("theory case {}: training standalone GAN", case.name);
    let trained = train_standalone(device.features(), &settings.gan, derive_path(seed, &[4]))?;
    let fresh = settings.gan.init_discriminator(1, derive_path(seed, &[5]))?;
    let best = fit_best_response(
        fresh,
        population.features(),
        &trained.generator,
        settings.best_response_steps,
        settings.best_response_batch,
        settings.best_response_adam,
        derive_path(seed, &[6]),
    )?;
    let measured = estimate_value_function(&best, &trained.generator, holdout.features(), settings.mc_draws, derive_path(seed, &[7]))?;
    Ok(TheoryRow {
        name: case.name.to_string(),
        jsd,
        predicted: standalone_optimal_value(&pi, &p)?,
        predicted_doubled: -LN_4 + 2.0 * jsd,
        measured: Some(measured),
        tp_bound: standalone_tp_bound(&pi, &p, MeasureChoice::UnderPopulation)?,
    })
}

/// Closed form only: two devices with disjoint supports, measured against
/// each other, where the prediction is `-ln 2`.
pub fn disjoint_row() -> Result<TheoryRow, CliError> {
    let a = DiscreteDistribution::from_probabilities(vec![1.0, 0.0])?;
    let b = DiscreteDistribution::from_probabilities(vec![0.0, 1.0])?;
    let jsd = js_divergence(&a, &b)?;
    Ok(TheoryRow {
        name: "disjoint-devices".into(),
        jsd,
        predicted: standalone_optimal_value(&a, &b)?,
        predicted_doubled: -LN_4 + 2.0 * jsd,
        measured: None,
        tp_bound: standalone_tp_bound(&a, &b, MeasureChoice::UnderPopulation)?,
    })
}

pub fn verify_theory(settings: &TheorySettings, seed: u64) -> Result<Vec<TheoryRow>, CliError> {
    let mut rows = default_cases()
        .iter()
        .map(|c| run_case(c, settings, seed))
        .collect::<Result<Vec<_>, _>>()?;
    rows.push(disjoint_row()?);
    Ok(rows)
}

pub const THEORY_CSV_HEADER: &str = "case,jsd,predicted,predicted_doubled,measured,abs_error,within_tolerance,tp_bound";

pub fn theory_csv(rows: &[TheoryRow], tolerance: f64) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
    let mut out = format!("{THEORY_CSV_HEADER}\n");
    for r in rows {
        let within = r.within(tolerance).map_or("NA", |w| if w { "yes" } else { "no" });
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{},{},{within},{:.6}",
            r.name,
            r.jsd,
            r.predicted,
            r.predicted_doubled,
            opt(r.measured),
            opt(r.error()),
            r.tp_bound
        );
    }
    out
}
