//! Discrete divergence oracles and closed-form GAN optima.
//!
//! Distributions live on an explicit finite support. Continuous toy
//! densities are turned into [`DiscreteDistribution`]s by exact bin
//! integration ([`bin_gaussian_mixture`]) before any divergence is taken.
//! All values are in nats.

use std::f64::consts::LN_2;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

/// ln 4, the magnitude of the game value when generator and data coincide.
pub const LN_4: f64 = 2.0 * LN_2;

pub const MAX_BINS: usize = 512;

const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    support: Vec<f64>,
    probabilities: Vec<f64>,
}

impl DiscreteDistribution {
    /// Probabilities must be non-negative and sum to one within 1e-12.
    pub fn new(support: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        if support.len() != probabilities.len() {
            return Err(Error::InvalidArgument(format!(
                "{} support points but {} probabilities",
                support.len(),
                probabilities.len()
            )));
        }
        if probabilities.is_empty() {
            return Err(Error::InvalidArgument("empty distribution".into()));
        }
        if let Some(bad) = probabilities.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidArgument(format!("invalid probability {bad}")));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self {
            support,
            probabilities,
        })
    }

    /// Support `0, 1, ..., k-1`.
    pub fn from_probabilities(probabilities: Vec<f64>) -> Result<Self> {
        let support = (0..probabilities.len()).map(|i| i as f64).collect();
        Self::new(support, probabilities)
    }

    /// Normalises non-negative weights.
    pub fn from_weights(support: Vec<f64>, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidArgument(format!("weights sum to {total}")));
        }
        Self::new(support, weights.iter().map(|w| w / total).collect())
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// `weight * self + (1 - weight) * other` on a shared support.
    pub fn mix(&self, other: &Self, weight: f64) -> Result<Self> {
        check_aligned(self, other)?;
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidArgument(format!("mixture weight {weight}")));
        }
        let probs: Vec<f64> = self
            .probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(a, b)| weight * a + (1.0 - weight) * b)
            .collect();
        Self::from_weights(self.support.clone(), &probs)
    }
}

fn check_aligned(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<()> {
    if p.support != q.support {
        return Err(Error::InvalidArgument(format!(
            "supports are not aligned ({} vs {} points)",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceKind {
    KullbackLeibler,
    JensenShannon,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceResult {
    pub value: f64,
    pub kind: DivergenceKind,
}

/// `Σ p ln(p/q)` with `0 ln(0/q) = 0`.
pub fn kl_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    check_aligned(p, q)?;
    let mut total = 0.0;
    for (index, (&pi, &qi)) in p.probabilities.iter().zip(&q.probabilities).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::DivergenceInfinite { index });
        }
        total += pi * (pi / qi).ln();
    }
    // cancellation can leave tiny negatives when p ≈ q
    Ok(total.max(0.0))
}

/// Jensen-Shannon divergence with equal weights; always in `[0, ln 2]`.
pub fn js_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    check_aligned(p, q)?;
    let mut total = 0.0;
    for (&pi, &qi) in p.probabilities.iter().zip(&q.probabilities) {
        let m = 0.5 * (pi + qi);
        if pi > 0.0 {
            total += 0.5 * pi * (pi / m).ln();
        }
        if qi > 0.0 {
            total += 0.5 * qi * (qi / m).ln();
        }
    }
    Ok(total.clamp(0.0, LN_2))
}

pub fn divergence(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    kind: DivergenceKind,
) -> Result<DivergenceResult> {
    let value = match kind {
        DivergenceKind::KullbackLeibler => kl_divergence(p, q)?,
        DivergenceKind::JensenShannon => js_divergence(p, q)?,
    };
    Ok(DivergenceResult { value, kind })
}

/// `D*(x) = p_data(x) / (p_data(x) + p_g(x))` per support index.
///
/// Points where both densities vanish carry no information and are left out
/// of the returned `(index, value)` list.
pub fn optimal_discriminator(
    p_data: &DiscreteDistribution,
    p_g: &DiscreteDistribution,
) -> Result<Vec<(usize, f64)>> {
    check_aligned(p_data, p_g)?;
    let mut out = Vec::with_capacity(p_data.len());
    let mut skipped = 0usize;
    for (i, (&pd, &pg)) in p_data.probabilities.iter().zip(&p_g.probabilities).enumerate() {
        if pd + pg > 0.0 {
            out.push((i, pd / (pd + pg)));
        } else {
            skipped += 1;
        }
    }
    if skipped > 0 {
        log::info!("optimal discriminator undefined at {skipped} zero-density points; omitted");
    }
    Ok(out)
}

/// Game value `Σ p ln D + p_g ln(1 - D)` for explicit discriminator outputs.
/// Terms with zero weight contribute nothing.
pub fn value_function(
    p_data: &DiscreteDistribution,
    p_g: &DiscreteDistribution,
    disc: &[f64],
) -> Result<f64> {
    check_aligned(p_data, p_g)?;
    if disc.len() != p_data.len() {
        return Err(Error::shape("value_function discriminator", p_data.len(), disc.len()));
    }
    let mut total = 0.0;
    for ((&pd, &pg), &d) in p_data.probabilities.iter().zip(&p_g.probabilities).zip(disc) {
        if pd > 0.0 {
            total += pd * d.ln();
        }
        if pg > 0.0 {
            total += pg * (1.0 - d).ln();
        }
    }
    Ok(total)
}

/// Game value at the best-response discriminator, i.e. `max_D V(D, p_g)`.
///
/// Equal to `-ln 4 + 2·JS(p_data ‖ p_g)`.
pub fn best_response_value(p_data: &DiscreteDistribution, p_g: &DiscreteDistribution) -> Result<f64> {
    check_aligned(p_data, p_g)?;
    let mut total = 0.0;
    for (&pd, &pg) in p_data.probabilities.iter().zip(&p_g.probabilities) {
        let s = pd + pg;
        if pd > 0.0 {
            total += pd * (pd / s).ln();
        }
        if pg > 0.0 {
            total += pg * (pg / s).ln();
        }
    }
    Ok(total)
}

/// Optimal value of a device that only sees `p_device`, measured against
/// the population `p_population`: `-ln 4 + JS(p_device ‖ p_population)`.
pub fn standalone_optimal_value(
    p_device: &DiscreteDistribution,
    p_population: &DiscreteDistribution,
) -> Result<f64> {
    Ok(-LN_4 + js_divergence(p_device, p_population)?)
}

/// Measure under which the true-positive bound is averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeasureChoice {
    /// Expectation over the population distribution.
    #[default]
    UnderPopulation,
    /// Expectation over the device's own distribution.
    UnderDevice,
}

/// `E[1 - |(1/2 - p/(p_i + p)) / (1/2)|]` under the chosen measure.
pub fn standalone_tp_bound(
    p_device: &DiscreteDistribution,
    p_population: &DiscreteDistribution,
    measure: MeasureChoice,
) -> Result<f64> {
    check_aligned(p_device, p_population)?;
    let mut total = 0.0;
    for (&pi, &p) in p_device.probabilities.iter().zip(&p_population.probabilities) {
        let weight = match measure {
            MeasureChoice::UnderPopulation => p,
            MeasureChoice::UnderDevice => pi,
        };
        if weight == 0.0 {
            continue;
        }
        let ratio = p / (pi + p);
        total += weight * (1.0 - (1.0 - 2.0 * ratio).abs());
    }
    Ok(total)
}

/// One component of a 1-D Gaussian mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

/// Integrates a 1-D Gaussian mixture over `bins` equal-width bins spanning
/// `[lo, hi]`, renormalising the captured mass. Support points are bin
/// centres.
pub fn bin_gaussian_mixture(
    components: &[GaussianComponent],
    lo: f64,
    hi: f64,
    bins: usize,
) -> Result<DiscreteDistribution> {
    if bins == 0 || bins > MAX_BINS {
        return Err(Error::InvalidArgument(format!(
            "bin count {bins} outside 1..={MAX_BINS}"
        )));
    }
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("empty range [{lo}, {hi}]")));
    }
    if components.is_empty() {
        return Err(Error::InvalidArgument("mixture has no components".into()));
    }
    let mut normals = Vec::with_capacity(components.len());
    for c in components {
        if !(c.weight >= 0.0 && c.std > 0.0) {
            return Err(Error::InvalidArgument(format!("bad component {c:?}")));
        }
        let n = Normal::new(c.mean, c.std)
            .map_err(|e| Error::InvalidArgument(format!("bad component {c:?}: {e}")))?;
        normals.push((c.weight, n));
    }
    let width = (hi - lo) / bins as f64;
    let cdf = |x: f64| normals.iter().map(|(w, n)| w * n.cdf(x)).sum::<f64>();
    let mut weights = Vec::with_capacity(bins);
    let mut support = Vec::with_capacity(bins);
    let mut left = cdf(lo);
    for b in 0..bins {
        let edge = if b + 1 == bins { hi } else { lo + width * (b + 1) as f64 };
        let right = cdf(edge);
        weights.push((right - left).max(0.0));
        support.push(lo + width * (b as f64 + 0.5));
        left = right;
    }
    DiscreteDistribution::from_weights(support, &weights)
}
