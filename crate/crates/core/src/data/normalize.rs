use ndarray::{Array1, Axis, Zip};

use super::Dataset;
use crate::{Error, Result};

/// Per-feature z-score statistics fitted on a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    mean: Array1<f64>,
    std: Array1<f64>,
    constant: Vec<bool>,
}

pub fn fit_normalizer(train: &Dataset) -> Result<NormalizationStats> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("cannot fit a normalizer on an empty dataset".into()));
    }
    let x = train.features();
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    // population standard deviation, so the fit set maps to unit variance
    let std = x.std_axis(Axis(0), 0.0);
    let constant = mean
        .iter()
        .zip(std.iter())
        .map(|(m, s)| *s <= 1e-12 * m.abs().max(1.0))
        .collect();
    Ok(NormalizationStats {
        mean,
        std,
        constant,
    })
}

impl NormalizationStats {
    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn std(&self) -> &Array1<f64> {
        &self.std
    }

    /// Features with zero spread; these pass through unchanged.
    pub fn constant_features(&self) -> &[bool] {
        &self.constant
    }

    fn check(&self, dataset: &Dataset) -> Result<()> {
        if dataset.dim() != self.mean.len() {
            return Err(Error::shape("normalizer width", self.mean.len(), dataset.dim()));
        }
        Ok(())
    }

    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        self.check(dataset)?;
        let mut x = dataset.features().to_owned();
        for mut row in x.rows_mut() {
            Zip::from(&mut row)
                .and(&self.mean)
                .and(&self.std)
                .and(&self.constant[..])
                .for_each(|v, &m, &s, &c| {
                    if !c {
                        *v = (*v - m) / s;
                    }
                });
        }
        dataset.with_features(x)
    }

    pub fn invert(&self, dataset: &Dataset) -> Result<Dataset> {
        self.check(dataset)?;
        let mut x = dataset.features().to_owned();
        for mut row in x.rows_mut() {
            Zip::from(&mut row)
                .and(&self.mean)
                .and(&self.std)
                .and(&self.constant[..])
                .for_each(|v, &m, &s, &c| {
                    if !c {
                        *v = *v * s + m;
                    }
                });
        }
        dataset.with_features(x)
    }
}
