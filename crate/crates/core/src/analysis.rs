//! Pairwise score tables over many systems, rank correlations between metrics
//! and within-metric z-scores by system-family pair.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::divergence::{cles_from_runs, soc, LogBase, SmoothingPrior, DEFAULT_ALPHA};
use crate::domain::{
    build_joint_view, ConfidenceTable, GroundTruth, JointView, MetricResult, RepresentationMatrix, SystemRun,
};
use crate::error::{AlignError, Result};
use crate::kappa::{error_consistency, misclassification_agreement};
use crate::numeric::{mean, pairwise_sum};
use crate::representation::linear_cka;

pub const LOG_MA: &str = "log_ma";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Ec,
    Ma,
    Cles,
    Soc,
    Soce,
    Cka,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Ec,
        Metric::Ma,
        Metric::Cles,
        Metric::Soc,
        Metric::Soce,
        Metric::Cka,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Ec => "ec",
            Metric::Ma => "ma",
            Metric::Cles => "cles",
            Metric::Soc => "soc",
            Metric::Soce => "soce",
            Metric::Cka => "cka",
        }
    }

    fn needs_view(self) -> bool {
        matches!(self, Metric::Ec | Metric::Ma | Metric::Soce)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = AlignError;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| AlignError::Usage(format!("unknown metric `{s}` (expected ec|ma|cles|soc|soce|cka)")))
    }
}

/// Parses a comma-separated metric list, keeping the first occurrence of each.
pub fn parse_metric_list(s: &str) -> Result<Vec<Metric>> {
    let mut out: Vec<Metric> = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let m: Metric = part.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(AlignError::Usage("no metrics requested".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub domain: String,
    pub system_a: String,
    pub system_b: String,
    pub metric: String,
    pub value: Option<f64>,
    pub reason: Option<String>,
    pub support: usize,
}

impl ScoreRow {
    pub fn from_result(domain: &str, system_a: &str, system_b: &str, result: MetricResult) -> Self {
        ScoreRow {
            domain: domain.to_string(),
            system_a: system_a.to_string(),
            system_b: system_b.to_string(),
            metric: result.metric,
            value: result.value,
            reason: result.reason,
            support: result.support,
        }
    }

    fn sort_key(&self) -> (&str, &str, &str, &str) {
        (&self.domain, &self.system_a, &self.system_b, &self.metric)
    }
}

/// Metric scores for unordered system pairs. Pairs are stored with
/// `system_a < system_b`; rows are sorted by domain, pair and metric.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairwiseScoreTable {
    rows: Vec<ScoreRow>,
}

impl PairwiseScoreTable {
    pub fn new(rows: Vec<ScoreRow>) -> Result<Self> {
        let mut rows: Vec<ScoreRow> = rows
            .into_iter()
            .map(|mut r| {
                if r.system_a > r.system_b {
                    std::mem::swap(&mut r.system_a, &mut r.system_b);
                }
                r
            })
            .collect();
        rows.sort_by(|x, y| x.sort_key().cmp(&y.sort_key()));
        for pair in rows.windows(2) {
            if pair[0].sort_key() == pair[1].sort_key() {
                return Err(AlignError::Usage(format!(
                    "duplicate score for ({}, {}, {}, {})",
                    pair[0].domain, pair[0].system_a, pair[0].system_b, pair[0].metric
                )));
            }
        }
        Ok(PairwiseScoreTable { rows })
    }

    pub fn merge(tables: impl IntoIterator<Item = PairwiseScoreTable>) -> Result<Self> {
        PairwiseScoreTable::new(tables.into_iter().flat_map(|t| t.rows).collect())
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn metrics(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.metric.as_str()).collect()
    }

    pub fn domains(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.domain.as_str()).collect()
    }

    /// Drops rows where either system belongs to one of `excluded`.
    pub fn exclude_families(&self, families: &FamilyMap, excluded: &[String]) -> Result<Self> {
        let mut rows = Vec::with_capacity(self.rows.len());
        for r in &self.rows {
            let fa = families.family(&r.system_a)?;
            let fb = families.family(&r.system_b)?;
            if !excluded.iter().any(|e| e == fa || e == fb) {
                rows.push(r.clone());
            }
        }
        Ok(PairwiseScoreTable { rows })
    }

    /// Replaces every `ma` row by `log_ma = ln(ma)`; non-positive MA becomes undefined.
    pub fn with_log_ma(&self) -> Self {
        let mut rows: Vec<ScoreRow> = self
            .rows
            .iter()
            .map(|r| {
                if r.metric != crate::kappa::MA {
                    return r.clone();
                }
                let mut out = r.clone();
                out.metric = LOG_MA.to_string();
                match r.value {
                    Some(v) if v > 0.0 => out.value = Some(v.ln()),
                    Some(_) => {
                        out.value = None;
                        out.reason = Some("non-positive MA under log".into());
                    }
                    None => {}
                }
                out
            })
            .collect();
        rows.sort_by(|x, y| x.sort_key().cmp(&y.sort_key()));
        PairwiseScoreTable { rows }
    }
}

/// One system's hard labels plus the optional inputs some metrics need.
#[derive(Debug, Clone)]
pub struct SystemInput {
    pub run: SystemRun,
    pub confidences: Option<ConfidenceTable>,
    pub representations: Option<RepresentationMatrix>,
}

impl SystemInput {
    pub fn new(run: SystemRun) -> Self {
        SystemInput {
            run,
            confidences: None,
            representations: None,
        }
    }

    pub fn id(&self) -> &str {
        self.run.system_id()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreOptions {
    pub alpha: f64,
    pub log_base: LogBase,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            alpha: DEFAULT_ALPHA,
            log_base: LogBase::Two,
        }
    }
}

fn check_aux(systems: &[&SystemInput], metrics: &[Metric]) -> Result<()> {
    for s in systems {
        for &m in metrics {
            let missing = match m {
                Metric::Soc | Metric::Soce if s.confidences.is_none() => Some("confidences"),
                Metric::Cka if s.representations.is_none() => Some("representations"),
                _ => None,
            };
            if let Some(what) = missing {
                return Err(AlignError::MissingAux {
                    metric: m.name().to_string(),
                    system: s.id().to_string(),
                    what,
                });
            }
        }
    }
    Ok(())
}

/// Scores one ordered pair on each metric.
pub fn score_pair(
    truth: &GroundTruth,
    a: &SystemInput,
    b: &SystemInput,
    metrics: &[Metric],
    opts: ScoreOptions,
) -> Result<Vec<MetricResult>> {
    check_aux(&[a, b], metrics)?;
    let prior = SmoothingPrior::uniform(truth.vocab().len(), opts.alpha)?;
    let view: Option<std::result::Result<JointView, String>> = if metrics.iter().any(|m| m.needs_view()) {
        Some(match build_joint_view(truth, &a.run, &b.run) {
            Ok(v) => Ok(v),
            Err(AlignError::NoCommonInstances) => Err("no common instances".to_string()),
            Err(e) => return Err(e),
        })
    } else {
        None
    };
    let undefined = |m: Metric, reason: &str| MetricResult::undefined(m.name(), reason, 0);
    metrics
        .iter()
        .map(|&m| {
            let view = view.as_ref();
            Ok(match m {
                Metric::Ec => match view {
                    Some(Ok(v)) => error_consistency(v),
                    Some(Err(r)) => undefined(m, r),
                    None => unreachable!(),
                },
                Metric::Ma => match view {
                    Some(Ok(v)) => misclassification_agreement(v),
                    Some(Err(r)) => undefined(m, r),
                    None => unreachable!(),
                },
                Metric::Soce => match view {
                    Some(Ok(v)) => soc(
                        a.confidences.as_ref().expect("checked"),
                        b.confidences.as_ref().expect("checked"),
                        Some(v),
                        opts.log_base,
                    )?,
                    Some(Err(r)) => undefined(m, r),
                    None => unreachable!(),
                },
                Metric::Cles => cles_from_runs(truth, &a.run, &b.run, &prior, opts.log_base)?,
                Metric::Soc => soc(
                    a.confidences.as_ref().expect("checked"),
                    b.confidences.as_ref().expect("checked"),
                    None,
                    opts.log_base,
                )?,
                Metric::Cka => linear_cka(
                    a.representations.as_ref().expect("checked"),
                    b.representations.as_ref().expect("checked"),
                )?,
            })
        })
        .collect()
}

/// Scores every unordered pair of `systems` on every metric. Pairs are
/// evaluated in parallel on the current rayon pool; the result does not
/// depend on the input order or the thread count.
pub fn pairwise_scores(
    domain: &str,
    systems: &[SystemInput],
    truth: &GroundTruth,
    metrics: &[Metric],
    opts: ScoreOptions,
) -> Result<PairwiseScoreTable> {
    if systems.len() < 2 {
        return Err(AlignError::Usage(format!(
            "pairwise scoring needs at least 2 systems, got {}",
            systems.len()
        )));
    }
    let mut sorted: Vec<&SystemInput> = systems.iter().collect();
    sorted.sort_by(|x, y| x.id().cmp(y.id()));
    let mut seen = HashSet::new();
    for s in &sorted {
        if !seen.insert(s.id()) {
            return Err(AlignError::DuplicateSystem(s.id().to_string()));
        }
    }
    check_aux(&sorted, metrics)?;

    let pairs: Vec<(&SystemInput, &SystemInput)> = (0..sorted.len())
        .flat_map(|i| ((i + 1)..sorted.len()).map(move |j| (i, j)))
        .map(|(i, j)| (sorted[i], sorted[j]))
        .collect();
    let per_pair: Vec<Vec<ScoreRow>> = pairs
        .par_iter()
        .map(|(a, b)| {
            let results = score_pair(truth, a, b, metrics, opts)?;
            Ok(results
                .into_iter()
                .map(|r| ScoreRow::from_result(domain, a.id(), b.id(), r))
                .collect())
        })
        .collect::<Result<_>>()?;
    PairwiseScoreTable::new(per_pair.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankUndefined {
    LengthMismatch,
    TooFewPoints(usize),
    ZeroVariance,
}

impl fmt::Display for RankUndefined {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankUndefined::LengthMismatch => f.write_str("length mismatch"),
            RankUndefined::TooFewPoints(n) => write!(f, "fewer than 3 points ({n})"),
            RankUndefined::ZeroVariance => f.write_str("zero rank variance"),
        }
    }
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> std::result::Result<f64, RankUndefined> {
    let mx = mean(xs).ok_or(RankUndefined::TooFewPoints(0))?;
    let my = mean(ys).ok_or(RankUndefined::TooFewPoints(0))?;
    let dx: Vec<f64> = xs.iter().map(|x| x - mx).collect();
    let dy: Vec<f64> = ys.iter().map(|y| y - my).collect();
    let sxy = pairwise_sum(&dx.iter().zip(&dy).map(|(a, b)| a * b).collect::<Vec<_>>());
    let sxx = pairwise_sum(&dx.iter().map(|a| a * a).collect::<Vec<_>>());
    let syy = pairwise_sum(&dy.iter().map(|b| b * b).collect::<Vec<_>>());
    if sxx == 0.0 || syy == 0.0 {
        return Err(RankUndefined::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation: Pearson correlation of average ranks.
pub fn spearman_r(xs: &[f64], ys: &[f64]) -> std::result::Result<f64, RankUndefined> {
    if xs.len() != ys.len() {
        return Err(RankUndefined::LengthMismatch);
    }
    if xs.len() < 3 {
        return Err(RankUndefined::TooFewPoints(xs.len()));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MetricPair {
    pub x: String,
    pub y: String,
}

impl FromStr for MetricPair {
    type Err = AlignError;

    /// `x:y`, e.g. `ma:cles`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some((x, y)) if !x.is_empty() && !y.is_empty() && x != y => Ok(MetricPair {
                x: x.to_string(),
                y: y.to_string(),
            }),
            _ => Err(AlignError::Usage(format!(
                "metric pair must look like `ma:cles`, got `{s}`"
            ))),
        }
    }
}

/// All unordered pairs of the table's metrics, in sorted order.
pub fn all_metric_pairs(table: &PairwiseScoreTable) -> Vec<MetricPair> {
    let metrics: Vec<&str> = table.metrics().into_iter().collect();
    let mut out = Vec::new();
    for i in 0..metrics.len() {
        for j in (i + 1)..metrics.len() {
            out.push(MetricPair {
                x: metrics[i].to_string(),
                y: metrics[j].to_string(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    pub r: Option<f64>,
    pub reason: Option<String>,
    /// Pairs that entered the correlation.
    pub n: usize,
    /// Pairs dropped because either score was missing or undefined.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairCorrelation {
    pub pair: MetricPair,
    pub global: Correlation,
    pub per_domain: Vec<(String, Correlation)>,
    /// Unweighted mean of the defined per-domain r values.
    pub average: Option<f64>,
    /// Domains whose r was undefined and so left out of the average.
    pub excluded_domains: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrelationReport {
    pub entries: Vec<PairCorrelation>,
}

/// Joined points of one domain and how many keys were dropped.
type DomainPoints = (Vec<(f64, f64)>, usize);

type PairKey<'a> = (&'a str, &'a str, &'a str);

/// Rows with both scores defined, and the keys dropped because either was
/// missing or undefined.
fn joined<'a>(
    table: &'a PairwiseScoreTable,
    pair: &MetricPair,
) -> (BTreeMap<PairKey<'a>, (f64, f64)>, Vec<PairKey<'a>>) {
    let mut xs: BTreeMap<PairKey, Option<f64>> = BTreeMap::new();
    let mut ys: BTreeMap<PairKey, Option<f64>> = BTreeMap::new();
    for r in table.rows() {
        let key = (r.domain.as_str(), r.system_a.as_str(), r.system_b.as_str());
        if r.metric == pair.x {
            xs.insert(key, r.value);
        } else if r.metric == pair.y {
            ys.insert(key, r.value);
        }
    }
    let keys: BTreeSet<PairKey> = xs.keys().chain(ys.keys()).copied().collect();
    let mut points = BTreeMap::new();
    let mut dropped = Vec::new();
    for k in keys {
        match (xs.get(&k).copied().flatten(), ys.get(&k).copied().flatten()) {
            (Some(x), Some(y)) => {
                points.insert(k, (x, y));
            }
            _ => dropped.push(k),
        }
    }
    (points, dropped)
}

fn correlate(points: &[(f64, f64)], dropped: usize) -> Correlation {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    match spearman_r(&xs, &ys) {
        Ok(r) => Correlation {
            r: Some(r),
            reason: None,
            n: points.len(),
            dropped,
        },
        Err(e) => Correlation {
            r: None,
            reason: Some(e.to_string()),
            n: points.len(),
            dropped,
        },
    }
}

/// Global r pools every (domain, pair) row; average r is the unweighted mean of
/// the per-domain r values that are defined.
pub fn correlation_report(table: &PairwiseScoreTable, pairs: &[MetricPair]) -> CorrelationReport {
    let entries = pairs
        .iter()
        .map(|pair| {
            let (points, dropped) = joined(table, pair);
            let all: Vec<(f64, f64)> = points.values().copied().collect();
            let global = correlate(&all, dropped.len());

            let mut by_domain: BTreeMap<&str, DomainPoints> =
                table.domains().into_iter().map(|d| (d, (Vec::new(), 0))).collect();
            for (&(d, _, _), &p) in &points {
                by_domain.entry(d).or_default().0.push(p);
            }
            for &(d, _, _) in &dropped {
                by_domain.entry(d).or_default().1 += 1;
            }

            let per_domain: Vec<(String, Correlation)> = by_domain
                .into_iter()
                .map(|(d, (pts, dropped))| (d.to_string(), correlate(&pts, dropped)))
                .collect();
            let defined: Vec<f64> = per_domain.iter().filter_map(|(_, c)| c.r).collect();
            let excluded_domains = per_domain
                .iter()
                .filter(|(_, c)| c.r.is_none())
                .map(|(d, _)| d.clone())
                .collect();
            PairCorrelation {
                pair: pair.clone(),
                global,
                per_domain,
                average: mean(&defined),
                excluded_domains,
            }
        })
        .collect();
    CorrelationReport { entries }
}

/// System id → family name (e.g. CNN, ViT, human).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FamilyMap(BTreeMap<String, String>);

impl FamilyMap {
    pub fn new(map: BTreeMap<String, String>) -> Self {
        FamilyMap(map)
    }

    pub fn insert(&mut self, system: impl Into<String>, family: impl Into<String>) -> Result<()> {
        let system = system.into();
        let family = family.into();
        match self.0.get(&system) {
            Some(existing) if *existing != family => Err(AlignError::Usage(format!(
                "system `{system}` has conflicting families `{existing}` and `{family}`"
            ))),
            _ => {
                self.0.insert(system, family);
                Ok(())
            }
        }
    }

    pub fn family(&self, system: &str) -> Result<&str> {
        self.0
            .get(system)
            .map(String::as_str)
            .ok_or_else(|| AlignError::MissingFamily(system.to_string()))
    }

    /// Canonical family pair, e.g. `CNN-human`.
    pub fn family_pair(&self, a: &str, b: &str) -> Result<String> {
        let fa = self.family(a)?;
        let fb = self.family(b)?;
        Ok(if fa <= fb {
            format!("{fa}-{fb}")
        } else {
            format!("{fb}-{fa}")
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZScoreRow {
    pub domain: String,
    pub system_a: String,
    pub system_b: String,
    pub family_pair: String,
    pub metric: String,
    pub z: Option<f64>,
    pub reason: Option<String>,
}

/// Standardizes each metric's defined scores within a domain using the
/// population standard deviation (denominator n).
pub fn zscore_by_metric(table: &PairwiseScoreTable, families: &FamilyMap) -> Result<Vec<ZScoreRow>> {
    let mut groups: BTreeMap<(&str, &str), Vec<&ScoreRow>> = BTreeMap::new();
    for r in table.rows() {
        groups
            .entry((r.domain.as_str(), r.metric.as_str()))
            .or_default()
            .push(r);
    }
    let mut out = Vec::with_capacity(table.len());
    for rows in groups.values() {
        let values: Vec<f64> = rows.iter().filter_map(|r| r.value).collect();
        let stats: std::result::Result<(f64, f64), &str> = if values.len() < 2 {
            Err("fewer than 2 values")
        } else {
            let m = mean(&values).expect("non-empty");
            let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
            let sd = (pairwise_sum(&sq) / values.len() as f64).sqrt();
            if sd == 0.0 {
                Err("zero variance")
            } else {
                Ok((m, sd))
            }
        };
        for r in rows {
            let (z, reason) = match (r.value, stats) {
                (None, _) => (None, Some("undefined score".to_string())),
                (Some(_), Err(e)) => (None, Some(e.to_string())),
                (Some(v), Ok((m, sd))) => (Some((v - m) / sd), None),
            };
            out.push(ZScoreRow {
                domain: r.domain.clone(),
                system_a: r.system_a.clone(),
                system_b: r.system_b.clone(),
                family_pair: families.family_pair(&r.system_a, &r.system_b)?,
                metric: r.metric.clone(),
                z,
                reason,
            });
        }
    }
    out.sort_by(|x, y| {
        (&x.domain, &x.system_a, &x.system_b, &x.metric).cmp(&(&y.domain, &y.system_a, &y.system_b, &y.metric))
    });
    Ok(out)
}
