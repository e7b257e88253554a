//! Aggregates per-seed `sweep.csv` tables into `summary.md`.
//!
//! The summary is built only from the CSVs on disk, so `report` on an
//! existing output directory reproduces the file `train` wrote.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use dgids_core::attack::{ModelKind, Scope, SWEEP_CSV_HEADER};

use crate::CliError;

/// Reference gaps of distributed over standalone detection: relative
/// accuracy gain, relative precision gain and relative FPR reduction.
pub const REFERENCE_ACCURACY_GAIN: f64 = 0.20;
pub const REFERENCE_PRECISION_GAIN: f64 = 0.25;
pub const REFERENCE_FPR_REDUCTION: f64 = 0.60;

/// One parsed row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub model: ModelKind,
    pub scope: Scope,
    pub ratio: f64,
    pub eps: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub fpr: Option<f64>,
    pub tpr: Option<f64>,
}

fn report_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Report(format!("{}:{line}: {msg}", path.display()))
}

pub fn parse_sweep(text: &str, path: &Path) -> Result<Vec<SweepRecord>, CliError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == SWEEP_CSV_HEADER => {}
        _ => return Err(report_err(path, 1, "missing or unexpected header")),
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let n = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 12 {
            return Err(report_err(path, n, format!("expected 12 fields, found {}", f.len())));
        }
        let num = |i: usize| -> Result<f64, CliError> {
            f[i].parse().map_err(|_| report_err(path, n, format!("bad number `{}`", f[i])))
        };
        let count = |i: usize| -> Result<u64, CliError> {
            f[i].parse().map_err(|_| report_err(path, n, format!("bad count `{}`", f[i])))
        };
        let opt = |i: usize| -> Result<Option<f64>, CliError> {
            if f[i] == "NA" {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        out.push(SweepRecord {
            model: ModelKind::parse(f[0]).map_err(|e| report_err(path, n, e))?,
            scope: Scope::parse(f[1]).map_err(|e| report_err(path, n, e))?,
            ratio: num(2)?,
            eps: num(3)?,
            tp: count(4)?,
            fp: count(5)?,
            tn: count(6)?,
            fn_: count(7)?,
            accuracy: num(8)?,
            precision: opt(9)?,
            fpr: opt(10)?,
            tpr: opt(11)?,
        });
    }
    Ok(out)
}

/// Every `seed-<s>/sweep.csv` under `dir`, ordered by seed.
pub fn load_sweeps(dir: &Path) -> Result<BTreeMap<u64, Vec<SweepRecord>>, CliError> {
    let mut sweeps = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let Some(seed) = name.to_str().and_then(|n| n.strip_prefix("seed-")).and_then(|s| s.parse::<u64>().ok()) else {
            continue;
        };
        let path = entry.path().join("sweep.csv");
        if !path.is_file() {
            continue;
        }
        let text = std::fs::read_to_string(&path)?;
        sweeps.insert(seed, parse_sweep(&text, &path)?);
    }
    if sweeps.is_empty() {
        return Err(CliError::Report(format!("no seed-*/sweep.csv under {}", dir.display())));
    }
    Ok(sweeps)
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Means over seeds and ratios for one model and scope. Undefined rates are
/// left out of their mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupMeans {
    pub model: ModelKind,
    pub scope: Scope,
    pub rows: usize,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub fpr: Option<f64>,
    pub tpr: Option<f64>,
}

fn groups(sweeps: &BTreeMap<u64, Vec<SweepRecord>>) -> Vec<(ModelKind, Scope)> {
    let mut order = Vec::new();
    for rec in sweeps.values().flatten() {
        if !order.contains(&(rec.model, rec.scope)) {
            order.push((rec.model, rec.scope));
        }
    }
    order
}

fn records<'a>(
    sweeps: &'a BTreeMap<u64, Vec<SweepRecord>>,
    model: ModelKind,
    scope: Scope,
) -> impl Iterator<Item = &'a SweepRecord> + Clone {
    sweeps.values().flatten().filter(move |r| r.model == model && r.scope == scope)
}

pub fn group_means(sweeps: &BTreeMap<u64, Vec<SweepRecord>>) -> Vec<GroupMeans> {
    groups(sweeps)
        .into_iter()
        .map(|(model, scope)| {
            let recs = records(sweeps, model, scope);
            GroupMeans {
                model,
                scope,
                rows: recs.clone().count(),
                accuracy: mean(recs.clone().map(|r| r.accuracy)).unwrap_or(f64::NAN),
                precision: mean(recs.clone().filter_map(|r| r.precision)),
                fpr: mean(recs.clone().filter_map(|r| r.fpr)),
                tpr: mean(recs.filter_map(|r| r.tpr)),
            }
        })
        .collect()
}

fn find(means: &[GroupMeans], model: ModelKind, scope: Scope) -> Option<&GroupMeans> {
    means.iter().find(|g| g.model == model && g.scope == scope)
}

/// One directional comparison of the summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn compare(name: String, lhs: Option<f64>, rhs: Option<f64>, at_least: bool) -> Check {
    match (lhs, rhs) {
        (Some(a), Some(b)) => {
            let passed = if at_least { a >= b } else { a <= b };
            let op = if at_least { ">=" } else { "<=" };
            Check {
                name,
                passed,
                detail: format!("{a:.4} {op} {b:.4}"),
            }
        }
        _ => Check {
            name,
            passed: false,
            detail: "undefined".into(),
        },
    }
}

/// Distributed against standalone (same scope) and against the shared
/// central detector, plus per-seed FPR constancy across ratios.
pub fn directional_checks(sweeps: &BTreeMap<u64, Vec<SweepRecord>>) -> Vec<Check> {
    let means = group_means(sweeps);
    let mut checks = Vec::new();
    let central = find(&means, ModelKind::Central, Scope::Combined);
    for scope in [Scope::Internal, Scope::External] {
        let (Some(dist), Some(stand)) = (
            find(&means, ModelKind::Distributed, scope),
            find(&means, ModelKind::Standalone, scope),
        ) else {
            continue;
        };
        let s = scope.name();
        checks.push(compare(
            format!("{s}: distributed accuracy >= standalone"),
            Some(dist.accuracy),
            Some(stand.accuracy),
            true,
        ));
        if let Some(c) = central {
            checks.push(compare(
                format!("{s}: distributed accuracy >= central"),
                Some(dist.accuracy),
                Some(c.accuracy),
                true,
            ));
        }
        checks.push(compare(
            format!("{s}: distributed precision >= standalone"),
            dist.precision,
            stand.precision,
            true,
        ));
        checks.push(compare(format!("{s}: distributed FPR <= standalone"), dist.fpr, stand.fpr, false));
    }
    let mut varying = Vec::new();
    for (seed, recs) in sweeps {
        for (model, scope) in groups(sweeps) {
            let fprs: Vec<Option<f64>> = recs
                .iter()
                .filter(|r| r.model == model && r.scope == scope)
                .map(|r| (r.fp + r.tn > 0).then(|| r.fp as f64 / (r.fp + r.tn) as f64))
                .collect();
            if fprs.windows(2).any(|w| w[0] != w[1]) {
                varying.push(format!("seed {seed} {model}/{}", scope.name()));
            }
        }
    }
    checks.push(Check {
        name: "FPR constant across ratios".into(),
        passed: varying.is_empty(),
        detail: if varying.is_empty() {
            "every model, scope and seed".into()
        } else {
            format!("varies for {}", varying.join("; "))
        },
    });
    checks
}

/// Per ratio `r >= min_ratio`: in how many seeds the standalone internal TPR
/// is strictly below the distributed one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TprDominance {
    pub ratio: f64,
    pub wins: usize,
    pub seeds: usize,
}

impl TprDominance {
    pub fn majority(&self) -> bool {
        2 * self.wins > self.seeds
    }
}

pub fn tpr_dominance(sweeps: &BTreeMap<u64, Vec<SweepRecord>>, min_ratio: f64) -> Vec<TprDominance> {
    let mut ratios: Vec<f64> = sweeps
        .values()
        .flatten()
        .map(|r| r.ratio)
        .filter(|&r| r >= min_ratio)
        .collect();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    ratios
        .into_iter()
        .map(|ratio| {
            let mut wins = 0;
            let mut seeds = 0;
            for recs in sweeps.values() {
                let tpr = |model| {
                    recs.iter()
                        .find(|r| r.model == model && r.scope == Scope::Internal && r.ratio == ratio)
                        .and_then(|r| r.tpr)
                };
                if let (Some(s), Some(d)) = (tpr(ModelKind::Standalone), tpr(ModelKind::Distributed)) {
                    seeds += 1;
                    if s < d {
                        wins += 1;
                    }
                }
            }
            TprDominance { ratio, wins, seeds }
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.4}"))
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{:+.1}%", 100.0 * x))
}

fn relative(num: Option<f64>, base: Option<f64>) -> Option<f64> {
    match (num, base) {
        (Some(n), Some(b)) if b != 0.0 => Some(n / b),
        _ => None,
    }
}

pub fn render_summary(sweeps: &BTreeMap<u64, Vec<SweepRecord>>) -> String {
    let means = group_means(sweeps);
    let seeds: Vec<String> = sweeps.keys().map(u64::to_string).collect();
    let mut md = String::new();
    let _ = writeln!(md, "# Detection summary\n");
    let _ = writeln!(md, "Seeds: {}. Means are over seeds and attack ratios; undefined rates are excluded from their mean.\n", seeds.join(", "));

    let _ = writeln!(md, "## Mean metrics\n");
    let _ = writeln!(md, "| model | scope | rows | accuracy | precision | FPR | TPR |");
    let _ = writeln!(md, "|---|---|---:|---:|---:|---:|---:|");
    for g in &means {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {:.4} | {} | {} | {} |",
            g.model,
            g.scope.name(),
            g.rows,
            g.accuracy,
            fmt_opt(g.precision),
            fmt_opt(g.fpr),
            fmt_opt(g.tpr)
        );
    }

    let _ = writeln!(md, "\n## Mean TPR by ratio\n");
    let mut ratios: Vec<f64> = sweeps.values().flatten().map(|r| r.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    let header: Vec<String> = ratios.iter().map(|r| format!("r={r}")).collect();
    let _ = writeln!(md, "| model | scope | {} |", header.join(" | "));
    let _ = writeln!(md, "|---|---|{}", "---:|".repeat(ratios.len()));
    for g in &means {
        let cells: Vec<String> = ratios
            .iter()
            .map(|&ratio| fmt_opt(mean(records(sweeps, g.model, g.scope).filter(|r| r.ratio == ratio).filter_map(|r| r.tpr))))
            .collect();
        let _ = writeln!(md, "| {} | {} | {} |", g.model, g.scope.name(), cells.join(" | "));
    }

    let _ = writeln!(md, "\n## Distributed versus standalone\n");
    let _ = writeln!(md, "| scope | accuracy gain | precision gain | FPR reduction |");
    let _ = writeln!(md, "|---|---:|---:|---:|");
    for scope in [Scope::Internal, Scope::External] {
        let (Some(d), Some(s)) = (
            find(&means, ModelKind::Distributed, scope),
            find(&means, ModelKind::Standalone, scope),
        ) else {
            continue;
        };
        let acc = relative(Some(d.accuracy - s.accuracy), Some(s.accuracy));
        let prec = relative(d.precision.zip(s.precision).map(|(a, b)| a - b), s.precision);
        let fpr = relative(d.fpr.zip(s.fpr).map(|(a, b)| b - a), s.fpr);
        let _ = writeln!(md, "| {} | {} | {} | {} |", scope.name(), fmt_pct(acc), fmt_pct(prec), fmt_pct(fpr));
    }
    let _ = writeln!(
        md,
        "| reference target | {} | {} | {} |",
        fmt_pct(Some(REFERENCE_ACCURACY_GAIN)),
        fmt_pct(Some(REFERENCE_PRECISION_GAIN)),
        fmt_pct(Some(REFERENCE_FPR_REDUCTION))
    );

    let checks = directional_checks(sweeps);
    if !checks.is_empty() {
        let _ = writeln!(md, "\n## Directional checks\n");
        for c in &checks {
            let mark = if c.passed { "yes" } else { "no" };
            let _ = writeln!(md, "- {}: {mark} ({})", c.name, c.detail);
        }
    }
    let dominance = tpr_dominance(sweeps, 0.5);
    if !dominance.is_empty() {
        let _ = writeln!(md, "\n## Internal TPR, standalone below distributed\n");
        let _ = writeln!(md, "| ratio | seeds where standalone < distributed |");
        let _ = writeln!(md, "|---:|---:|");
        for d in &dominance {
            let _ = writeln!(md, "| {} | {}/{} |", d.ratio, d.wins, d.seeds);
        }
    }
    md
}

/// Reads every sweep under `dir` and writes `dir/summary.md`.
pub fn write_summary(dir: &Path) -> Result<String, CliError> {
    let md = render_summary(&load_sweeps(dir)?);
    std::fs::write(dir.join("summary.md"), &md)?;
    Ok(md)
}
