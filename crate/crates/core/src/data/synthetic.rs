use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::rng::rng_from;
use crate::{Error, Result};

pub const MAX_SYNTHETIC_DIM: usize = 8;

/// Isotropic Gaussian cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticComponent {
    pub mean: Vec<f64>,
    pub std: f64,
    pub weight: f64,
}

/// A Gaussian mixture, optionally split across subjects.
///
/// Without subject profiles each row's subject is its component index. With
/// them, a row first picks a subject uniformly, then a component using that
/// subject's mixture weights (component `weight`s are then unused).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub components: Vec<SyntheticComponent>,
    pub subject_weights: Vec<Vec<f64>>,
}

impl SyntheticSpec {
    pub fn new(components: Vec<SyntheticComponent>) -> Result<Self> {
        Self::with_subjects(components, Vec::new())
    }

    pub fn with_subjects(components: Vec<SyntheticComponent>, subject_weights: Vec<Vec<f64>>) -> Result<Self> {
        let spec = Self {
            components,
            subject_weights,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Four activity-like clusters in four dimensions shared by four
    /// subjects. Subject `s` draws 70% of its rows from cluster `s` and 10%
    /// from each other cluster, so a by-subject partition gives every device
    /// a skewed view of the same modes.
    pub fn heterogeneous_benchmark() -> Self {
        let means = [
            [2.0, 2.0, 0.0, 0.0],
            [-2.0, 2.0, 0.0, 0.0],
            [0.0, -2.0, 2.0, 0.0],
            [0.0, -2.0, -2.0, 0.0],
        ];
        let subject_weights = (0..4)
            .map(|s| (0..4).map(|k| if k == s { 0.7 } else { 0.1 }).collect())
            .collect();
        Self {
            components: means
                .iter()
                .map(|m| SyntheticComponent {
                    mean: m.to_vec(),
                    std: 0.5,
                    weight: 1.0,
                })
                .collect(),
            subject_weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.mean.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Config("synthetic spec has no components".into()));
        }
        let d = self.dim();
        if d == 0 || d > MAX_SYNTHETIC_DIM {
            return Err(Error::Config(format!(
                "synthetic dimension {d} outside 1..={MAX_SYNTHETIC_DIM}"
            )));
        }
        for (k, c) in self.components.iter().enumerate() {
            if c.mean.len() != d {
                return Err(Error::Config(format!(
                    "component {k} has {} coordinates, expected {d}",
                    c.mean.len()
                )));
            }
            if !(c.std >= 0.0 && c.std.is_finite()) {
                return Err(Error::Config(format!("component {k} has std {}", c.std)));
            }
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::Config(format!("component {k} has weight {}", c.weight)));
            }
            if c.mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("component {k} has a non-finite mean")));
            }
        }
        for (s, w) in self.subject_weights.iter().enumerate() {
            if w.len() != self.components.len() {
                return Err(Error::Config(format!(
                    "subject {s} has {} weights for {} components",
                    w.len(),
                    self.components.len()
                )));
            }
            if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Config(format!("subject {s} has invalid mixture weights")));
            }
        }
        Ok(())
    }
}

/// Draws `m` rows. The label of a row from component `k` is `c{k}`.
pub fn make_synthetic(spec: &SyntheticSpec, m: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if m == 0 {
        return Err(Error::InvalidArgument("synthetic dataset needs at least one row".into()));
    }
    let d = spec.dim();
    let weight_err = |e: rand::distr::weighted::Error| Error::Config(format!("mixture weights: {e}"));
    let pickers: Vec<WeightedIndex<f64>> = if spec.subject_weights.is_empty() {
        vec![WeightedIndex::new(spec.components.iter().map(|c| c.weight)).map_err(weight_err)?]
    } else {
        spec.subject_weights
            .iter()
            .map(|w| WeightedIndex::new(w).map_err(weight_err))
            .collect::<Result<_>>()?
    };
    let mut rng = rng_from(seed);
    let mut features = Array2::zeros((m, d));
    let mut labels = Vec::with_capacity(m);
    let mut subjects = Vec::with_capacity(m);
    for i in 0..m {
        let subject = if pickers.len() > 1 { rng.random_range(0..pickers.len()) } else { 0 };
        let k = pickers[subject].sample(&mut rng);
        let c = &spec.components[k];
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            features[[i, j]] = c.mean[j] + c.std * z;
        }
        labels.push(format!("c{k}"));
        subjects.push(if spec.subject_weights.is_empty() { k } else { subject } as u32);
    }
    Dataset::new(features, labels, subjects)
}
