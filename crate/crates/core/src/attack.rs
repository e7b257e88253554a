//! False-data-injection attacks and discriminator-based detection.
//!
//! An attacked row is a clean row plus Gaussian noise whose per-feature
//! variance is `r` times that feature's variance in clean training data. A
//! discriminator flags a point as anomalous when its output strays more
//! than `eps` from 1/2.

use std::fmt;
use std::io::Write;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand_distr::{Distribution, StandardNormal};

use crate::federation::RingTopology;
use crate::gan::Discriminator;
use crate::rng::{derive_path, rng_from};
use crate::{Error, Result};

pub const DEFAULT_EPS: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scope {
    /// Each device checks its own data.
    Internal,
    /// Each device checks its ring successor's data.
    External,
    /// Both scopes at once; used for a single shared detector where the two
    /// coincide.
    Combined,
}

impl Scope {
    pub fn name(self) -> &'static str {
        match self {
            Scope::Internal => "internal",
            Scope::External => "external",
            Scope::Combined => "combined",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "internal" => Ok(Scope::Internal),
            "external" => Ok(Scope::External),
            "combined" => Ok(Scope::Combined),
            other => Err(Error::Config(format!("unknown scope {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackScenario {
    pub ratio: f64,
    pub seed: u64,
    pub scope: Scope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Normal,
    Anomalous,
}

/// Per-feature population variance.
pub fn feature_variance(data: ArrayView2<f64>) -> Result<Vec<f64>> {
    if data.nrows() == 0 {
        return Err(Error::InvalidArgument("feature variance of an empty batch".into()));
    }
    Ok(data.var_axis(Axis(0), 0.0).to_vec())
}

/// Adds `N(0, ratio · feature_power[j])` noise to every entry of column `j`.
///
/// The underlying standard-normal draws depend only on `scenario.seed`, so
/// the same seed at two ratios gives proportional perturbations.
pub fn inject_attack(batch: ArrayView2<f64>, scenario: &AttackScenario, feature_power: &[f64]) -> Result<Array2<f64>> {
    if !(scenario.ratio >= 0.0 && scenario.ratio.is_finite()) {
        return Err(Error::InvalidArgument(format!("attack ratio {} must be >= 0", scenario.ratio)));
    }
    if feature_power.len() != batch.ncols() {
        return Err(Error::shape("feature power length", batch.ncols(), feature_power.len()));
    }
    if let Some(p) = feature_power.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return Err(Error::InvalidArgument(format!("feature power {p} must be >= 0")));
    }
    let scale: Vec<f64> = feature_power.iter().map(|p| (scenario.ratio * p).sqrt()).collect();
    let mut rng = rng_from(scenario.seed);
    let mut out = batch.to_owned();
    for mut row in out.rows_mut() {
        Zip::from(&mut row).and(&scale[..]).for_each(|v, &s| {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += s * z;
        });
    }
    Ok(out)
}

#[inline]
pub fn verdict_for(output: f64, eps: f64) -> Verdict {
    if (output - 0.5).abs() <= eps {
        Verdict::Normal
    } else {
        Verdict::Anomalous
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("eps {eps} outside (0, 0.5)")))
    }
}

pub fn detect(disc: &Discriminator, x: ArrayView1<f64>, eps: f64) -> Result<Verdict> {
    check_eps(eps)?;
    let out = disc.output(&x.to_vec())?;
    Ok(verdict_for(out, eps))
}

pub fn detect_batch(disc: &Discriminator, batch: ArrayView2<f64>, eps: f64) -> Result<Vec<Verdict>> {
    check_eps(eps)?;
    Ok(disc.outputs(batch)?.into_iter().map(|d| verdict_for(d, eps)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DetectionOutcome {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl DetectionOutcome {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Adds one verdict; `attacked` is the ground truth.
    pub fn record(&mut self, attacked: bool, verdict: Verdict) {
        match (attacked, verdict) {
            (true, Verdict::Anomalous) => self.tp += 1,
            (true, Verdict::Normal) => self.fn_ += 1,
            (false, Verdict::Anomalous) => self.fp += 1,
            (false, Verdict::Normal) => self.tn += 1,
        }
    }

    pub fn merge(&mut self, other: &DetectionOutcome) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

/// Derived rates; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub counts: DetectionOutcome,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub fpr: Option<f64>,
    pub tpr: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn compute_metrics(outcome: &DetectionOutcome) -> Result<MetricsReport> {
    let total = outcome.total();
    if total == 0 {
        return Err(Error::InvalidArgument("no evaluated points".into()));
    }
    let DetectionOutcome { tp, fp, tn, fn_ } = *outcome;
    Ok(MetricsReport {
        counts: *outcome,
        accuracy: (tp + tn) as f64 / total as f64,
        precision: ratio(tp, tp + fp),
        fpr: ratio(fp, fp + tn),
        tpr: ratio(tp, tp + fn_),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Standalone,
    Central,
    Distributed,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Standalone, ModelKind::Central, ModelKind::Distributed];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Standalone => "standalone",
            ModelKind::Central => "central",
            ModelKind::Distributed => "distributed",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "standalone" => Ok(ModelKind::Standalone),
            "central" | "centralized" => Ok(ModelKind::Central),
            "distributed" => Ok(ModelKind::Distributed),
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Detectors of one model kind. A single discriminator is shared by every
/// device; otherwise there is one per device.
#[derive(Debug, Clone)]
pub struct DetectorSet {
    pub kind: ModelKind,
    pub discriminators: Vec<Discriminator>,
}

impl DetectorSet {
    pub fn is_shared(&self) -> bool {
        self.discriminators.len() == 1
    }

    fn for_device(&self, i: usize) -> &Discriminator {
        if self.is_shared() {
            &self.discriminators[0]
        } else {
            &self.discriminators[i]
        }
    }
}

/// Clean test rows of each device together with their attacked copies at
/// one ratio.
#[derive(Debug, Clone)]
pub struct AttackedShares {
    pub clean: Vec<Array2<f64>>,
    pub attacked: Vec<Array2<f64>>,
}

/// Attack seed for device `i`'s test rows. Independent of the ratio so that
/// sweeps reuse the same noise directions.
pub fn attack_seed(seed: u64, device: usize) -> u64 {
    derive_path(seed, &[0xA77A, device as u64])
}

pub fn attack_shares(test_shares: &[Array2<f64>], ratio: f64, feature_power: &[f64], seed: u64) -> Result<AttackedShares> {
    let attacked = test_shares
        .iter()
        .enumerate()
        .map(|(i, share)| {
            let scenario = AttackScenario {
                ratio,
                seed: attack_seed(seed, i),
                scope: Scope::Internal,
            };
            inject_attack(share.view(), &scenario, feature_power)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AttackedShares {
        clean: test_shares.to_vec(),
        attacked,
    })
}

/// Runs each device's detector over the share selected by `scope` and
/// accumulates counts in device order.
pub fn evaluate(
    detectors: &DetectorSet,
    shares: &AttackedShares,
    ring: &RingTopology,
    scope: Scope,
    eps: f64,
) -> Result<DetectionOutcome> {
    check_eps(eps)?;
    let n = shares.clean.len();
    if !detectors.is_shared() && detectors.discriminators.len() != n {
        return Err(Error::shape("detectors per device", n, detectors.discriminators.len()));
    }
    if ring.len() != n {
        return Err(Error::shape("ring size", n, ring.len()));
    }
    let mut outcome = DetectionOutcome::default();
    for i in 0..n {
        let disc = detectors.for_device(i);
        let targets: &[usize] = match scope {
            Scope::Internal => &[i],
            Scope::External => &[ring.successor(i)],
            Scope::Combined => &[i, ring.successor(i)],
        };
        for &j in targets {
            if shares.clean[j].nrows() == 0 {
                log::warn!("device {j} has an empty test share; skipped");
                continue;
            }
            for v in detect_batch(disc, shares.clean[j].view(), eps)? {
                outcome.record(false, v);
            }
            for v in detect_batch(disc, shares.attacked[j].view(), eps)? {
                outcome.record(true, v);
            }
        }
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub model: ModelKind,
    pub scope: Scope,
    pub ratio: f64,
    pub eps: f64,
    pub metrics: MetricsReport,
}

/// Scopes evaluated for a detector set: a shared detector sees the same
/// data either way, so it gets one combined row per ratio.
pub fn scopes_for(detectors: &DetectorSet) -> &'static [Scope] {
    if detectors.is_shared() {
        &[Scope::Internal]
    } else {
        &[Scope::Internal, Scope::External]
    }
}

/// Full factorial over models × scopes × ratios, in that nesting order.
/// Shared detectors contribute one row per ratio, labelled
/// [`Scope::Combined`] and evaluated on every device's own data.
pub fn run_scenario_sweep(
    models: &[DetectorSet],
    test_shares: &[Array2<f64>],
    ring: &RingTopology,
    feature_power: &[f64],
    ratios: &[f64],
    eps: f64,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if ratios.is_empty() {
        return Err(Error::InvalidArgument("no attack ratios".into()));
    }
    check_eps(eps)?;
    let attacked: Vec<AttackedShares> = ratios
        .iter()
        .map(|&r| attack_shares(test_shares, r, feature_power, seed))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for model in models {
        for &scope in scopes_for(model) {
            for (k, &ratio) in ratios.iter().enumerate() {
                let outcome = evaluate(model, &attacked[k], ring, scope, eps)?;
                rows.push(SweepRow {
                    model: model.kind,
                    scope: if model.is_shared() { Scope::Combined } else { scope },
                    ratio,
                    eps,
                    metrics: compute_metrics(&outcome)?,
                });
            }
        }
    }
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: &str = "model,scope,ratio,eps,tp,fp,tn,fn,accuracy,precision,fpr,tpr";

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        let c = r.metrics.counts;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.6},{},{},{}",
            r.model,
            r.scope.name(),
            r.ratio,
            r.eps,
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            r.metrics.accuracy,
            fmt_opt(r.metrics.precision),
            fmt_opt(r.metrics.fpr),
            fmt_opt(r.metrics.tpr),
        )?;
    }
    Ok(())
}
