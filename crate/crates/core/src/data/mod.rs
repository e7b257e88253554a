//! Datasets, splitting and per-device partitioning.
//!
//! A [`Dataset`] is immutable once built. Every record carries a stable
//! `record_id` so that splits and partitions can be checked for exactness
//! (nothing duplicated, nothing dropped) after rows have been shuffled around.

mod csv_io;
mod normalize;
mod synthetic;

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;

use crate::rng::rng_from;
use crate::{Error, Result};

pub use csv_io::{load_dataset, parse_dataset, write_dataset, CsvProfile, ACTIVITY_FEATURES};
pub use normalize::{fit_normalizer, NormalizationStats};
pub use synthetic::{make_synthetic, SyntheticComponent, SyntheticSpec, MAX_SYNTHETIC_DIM};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<String>,
    subjects: Vec<u32>,
    record_ids: Vec<u64>,
}

impl Dataset {
    /// Record ids default to `0..m`.
    pub fn new(features: Array2<f64>, labels: Vec<String>, subjects: Vec<u32>) -> Result<Self> {
        let ids = (0..features.nrows() as u64).collect();
        Self::with_record_ids(features, labels, subjects, ids)
    }

    pub fn with_record_ids(
        features: Array2<f64>,
        labels: Vec<String>,
        subjects: Vec<u32>,
        record_ids: Vec<u64>,
    ) -> Result<Self> {
        let m = features.nrows();
        if labels.len() != m || subjects.len() != m || record_ids.len() != m {
            return Err(Error::InvalidArgument(format!(
                "{m} rows but {} labels, {} subjects, {} ids",
                labels.len(),
                subjects.len(),
                record_ids.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("dataset contains non-finite features".into()));
        }
        Ok(Self {
            features,
            labels,
            subjects,
            record_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Feature count `d`.
    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn subjects(&self) -> &[u32] {
        &self.subjects
    }

    pub fn record_ids(&self) -> &[u64] {
        &self.record_ids
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            subjects: indices.iter().map(|&i| self.subjects[i]).collect(),
            record_ids: indices.iter().map(|&i| self.record_ids[i]).collect(),
        }
    }

    /// Same records with replaced feature values (used by transforms).
    pub(crate) fn with_features(&self, features: Array2<f64>) -> Result<Dataset> {
        if features.dim() != self.features.dim() {
            return Err(Error::shape(
                "dataset features",
                format!("{:?}", self.features.dim()),
                format!("{:?}", features.dim()),
            ));
        }
        Dataset::with_record_ids(
            features,
            self.labels.clone(),
            self.subjects.clone(),
            self.record_ids.clone(),
        )
    }

    /// Stacks datasets with equal feature counts.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        let d = first.dim();
        if let Some(bad) = parts.iter().find(|p| p.dim() != d) {
            return Err(Error::shape("concat feature count", d, bad.dim()));
        }
        let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
        let features = ndarray::concatenate(Axis(0), &views).expect("widths checked");
        Ok(Dataset {
            features,
            labels: parts.iter().flat_map(|p| p.labels.iter().cloned()).collect(),
            subjects: parts.iter().flat_map(|p| p.subjects.iter().copied()).collect(),
            record_ids: parts.iter().flat_map(|p| p.record_ids.iter().copied()).collect(),
        })
    }
}

/// Random disjoint split; the test side gets `floor(m · test_fraction)` rows.
/// Both sides keep the source row order.
pub fn split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let m = dataset.len();
    let test_size = (m as f64 * test_fraction).floor() as usize;
    if test_size == 0 || test_size == m {
        return Err(Error::InvalidArgument(format!(
            "fraction {test_fraction} of {m} rows leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng_from(seed));
    let mut test_idx = order[..test_size].to_vec();
    let mut train_idx = order[test_size..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((dataset.select(&train_idx), dataset.select(&test_idx)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PartitionStrategy {
    IidShuffle,
    ByLabel,
    BySubject,
}

impl PartitionStrategy {
    pub fn name(self) -> &'static str {
        match self {
            PartitionStrategy::IidShuffle => "iid-shuffle",
            PartitionStrategy::ByLabel => "by-label",
            PartitionStrategy::BySubject => "by-subject",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.trim() {
            "iid-shuffle" | "iid" => Some(PartitionStrategy::IidShuffle),
            "by-label" => Some(PartitionStrategy::ByLabel),
            "by-subject" => Some(PartitionStrategy::BySubject),
            _ => None,
        }
    }
}

/// Per-device shares `D_1 … D_n` of one source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    shares: Vec<Dataset>,
    strategy: PartitionStrategy,
}

impl Partition {
    pub fn from_shares(shares: Vec<Dataset>, strategy: PartitionStrategy) -> Result<Self> {
        if shares.is_empty() {
            return Err(Error::Partition("no shares".into()));
        }
        let d = shares[0].dim();
        if shares.iter().any(|s| s.dim() != d) {
            return Err(Error::Partition("shares disagree on feature count".into()));
        }
        Ok(Self { shares, strategy })
    }

    pub fn shares(&self) -> &[Dataset] {
        &self.shares
    }

    pub fn share(&self, device: usize) -> &Dataset {
        &self.shares[device]
    }

    pub fn n_devices(&self) -> usize {
        self.shares.len()
    }

    pub fn strategy(&self) -> PartitionStrategy {
        self.strategy
    }

    pub fn dim(&self) -> usize {
        self.shares[0].dim()
    }

    /// Union of all shares, device order.
    pub fn pooled(&self) -> Dataset {
        let refs: Vec<&Dataset> = self.shares.iter().collect();
        Dataset::concat(&refs).expect("shares share a width")
    }

    pub fn total_len(&self) -> usize {
        self.shares.iter().map(Dataset::len).sum()
    }
}

fn group_key(dataset: &Dataset, row: usize, strategy: PartitionStrategy) -> String {
    match strategy {
        PartitionStrategy::ByLabel => dataset.labels[row].clone(),
        PartitionStrategy::BySubject => format!("{:010}", dataset.subjects[row]),
        PartitionStrategy::IidShuffle => unreachable!("iid partitions are not grouped"),
    }
}

/// Group-to-device map: sorted group keys, shuffled by `seed`, dealt
/// round-robin.
fn deal_groups(
    keys: impl IntoIterator<Item = String>,
    n: usize,
    seed: u64,
) -> Result<BTreeMap<String, usize>> {
    let mut unique: Vec<String> = keys.into_iter().collect();
    unique.sort();
    unique.dedup();
    if n > unique.len() {
        return Err(Error::Partition(format!(
            "{n} devices but only {} groups",
            unique.len()
        )));
    }
    unique.shuffle(&mut rng_from(seed));
    Ok(unique
        .into_iter()
        .enumerate()
        .map(|(k, key)| (key, k % n))
        .collect())
}

fn assign_grouped(
    dataset: &Dataset,
    n: usize,
    strategy: PartitionStrategy,
    assignment: &BTreeMap<String, usize>,
) -> Result<Partition> {
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for r in 0..dataset.len() {
        let device = assignment[&group_key(dataset, r, strategy)];
        rows[device].push(r);
    }
    if let Some(empty) = rows.iter().position(Vec::is_empty) {
        return Err(Error::Partition(format!("device {empty} received no records")));
    }
    Partition::from_shares(rows.iter().map(|r| dataset.select(r)).collect(), strategy)
}

fn assign_iid(dataset: &Dataset, n: usize, seed: u64) -> Result<Partition> {
    let m = dataset.len();
    if m < n {
        return Err(Error::Partition(format!("{m} records cannot fill {n} devices")));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng_from(seed));
    let base = m / n;
    let extra = m % n;
    let mut start = 0;
    let mut shares = Vec::with_capacity(n);
    for k in 0..n {
        let len = base + usize::from(k < extra);
        let mut idx = order[start..start + len].to_vec();
        idx.sort_unstable();
        shares.push(dataset.select(&idx));
        start += len;
    }
    Partition::from_shares(shares, PartitionStrategy::IidShuffle)
}

pub fn partition(
    dataset: &Dataset,
    n: usize,
    strategy: PartitionStrategy,
    seed: u64,
) -> Result<Partition> {
    if n == 0 {
        return Err(Error::Partition("need at least one device".into()));
    }
    match strategy {
        PartitionStrategy::IidShuffle => assign_iid(dataset, n, seed),
        grouped => {
            let keys = (0..dataset.len()).map(|r| group_key(dataset, r, grouped));
            let assignment = deal_groups(keys, n, seed)?;
            assign_grouped(dataset, n, grouped, &assignment)
        }
    }
}

/// Partitions a train/test pair so that device `i` owns the same groups on
/// both sides. Iid partitions shuffle each side independently.
pub fn partition_aligned(
    train: &Dataset,
    test: &Dataset,
    n: usize,
    strategy: PartitionStrategy,
    seed: u64,
) -> Result<(Partition, Partition)> {
    if n == 0 {
        return Err(Error::Partition("need at least one device".into()));
    }
    match strategy {
        PartitionStrategy::IidShuffle => Ok((
            assign_iid(train, n, seed)?,
            assign_iid(test, n, crate::rng::derive_seed(seed, 1))?,
        )),
        grouped => {
            let keys = (0..train.len())
                .map(|r| group_key(train, r, grouped))
                .chain((0..test.len()).map(|r| group_key(test, r, grouped)));
            let assignment = deal_groups(keys, n, seed)?;
            Ok((
                assign_grouped(train, n, grouped, &assignment)?,
                assign_grouped(test, n, grouped, &assignment)?,
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn toy(m: usize, labels: usize, subjects: usize) -> Dataset {
        let features = Array2::from_shape_fn((m, 2), |(i, j)| (i * 2 + j) as f64);
        Dataset::new(
            features,
            (0..m).map(|i| format!("act{}", i % labels)).collect(),
            (0..m).map(|i| (i % subjects) as u32).collect(),
        )
        .unwrap()
    }

    fn ids(p: &Partition) -> Vec<u64> {
        let mut all: Vec<u64> = p.shares().iter().flat_map(|s| s.record_ids().to_vec()).collect();
        all.sort_unstable();
        all
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let ds = toy(2365, 12, 30);
        let (train, test) = split(&ds, 0.2, 1).unwrap();
        assert_eq!(test.len(), 473);
        assert_eq!(train.len(), 1892);
        let (train, test) = split(&toy(10, 2, 2), 0.5, 1).unwrap();
        assert_eq!((train.len(), test.len()), (5, 5));
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let ds = toy(100, 3, 5);
        let (a_train, a_test) = split(&ds, 0.3, 9).unwrap();
        let (b_train, b_test) = split(&ds, 0.3, 9).unwrap();
        assert_eq!(a_test.record_ids(), b_test.record_ids());
        assert_eq!(a_train, b_train);
        let train: BTreeSet<u64> = a_train.record_ids().iter().copied().collect();
        assert!(a_test.record_ids().iter().all(|id| !train.contains(id)));
        assert_eq!(train.len() + a_test.len(), 100);
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let ds = toy(10, 2, 2);
        for f in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(split(&ds, f, 0), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn iid_shares_are_balanced() {
        let p = partition(&toy(100, 3, 5), 4, PartitionStrategy::IidShuffle, 3).unwrap();
        let sizes: Vec<usize> = p.shares().iter().map(Dataset::len).collect();
        assert_eq!(sizes, vec![25, 25, 25, 25]);
        let p = partition(&toy(10, 3, 5), 3, PartitionStrategy::IidShuffle, 3).unwrap();
        let sizes: Vec<usize> = p.shares().iter().map(Dataset::len).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
    }

    #[test]
    fn one_activity_per_device() {
        let ds = toy(240, 12, 30);
        let p = partition(&ds, 12, PartitionStrategy::ByLabel, 0).unwrap();
        let mut seen = BTreeSet::new();
        for share in p.shares() {
            let labels: BTreeSet<&String> = share.labels().iter().collect();
            assert_eq!(labels.len(), 1);
            assert!(seen.insert(labels.into_iter().next().unwrap().clone()));
        }
    }

    #[test]
    fn every_strategy_is_an_exact_partition() {
        let ds = toy(97, 5, 7);
        for strategy in [
            PartitionStrategy::IidShuffle,
            PartitionStrategy::ByLabel,
            PartitionStrategy::BySubject,
        ] {
            let p = partition(&ds, 4, strategy, 11).unwrap();
            assert_eq!(ids(&p), (0..97).collect::<Vec<u64>>(), "{strategy:?}");
            assert!(p.shares().iter().all(|s| !s.is_empty()));
        }
    }

    #[test]
    fn too_many_devices_for_groups() {
        let ds = toy(50, 3, 5);
        assert!(matches!(
            partition(&ds, 4, PartitionStrategy::ByLabel, 0),
            Err(Error::Partition(_))
        ));
        assert!(partition(&ds, 5, PartitionStrategy::BySubject, 0).is_ok());
        assert!(matches!(
            partition(&ds, 0, PartitionStrategy::IidShuffle, 0),
            Err(Error::Partition(_))
        ));
    }

    #[test]
    fn aligned_partitions_share_groups() {
        let ds = toy(300, 6, 10);
        let (train, test) = split(&ds, 0.2, 5).unwrap();
        let (ptrain, ptest) = partition_aligned(&train, &test, 3, PartitionStrategy::BySubject, 2).unwrap();
        for k in 0..3 {
            let a: BTreeSet<u32> = ptrain.share(k).subjects().iter().copied().collect();
            let b: BTreeSet<u32> = ptest.share(k).subjects().iter().copied().collect();
            assert!(b.is_subset(&a));
        }
        assert_eq!(ptrain.total_len() + ptest.total_len(), 300);
    }
}
