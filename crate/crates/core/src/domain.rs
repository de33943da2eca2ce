//! Shared vocabulary of datasets, predictions, count matrices and distributions.
//!
//! Every container keyed by instance id uses a `BTreeMap`, so iteration is in
//! lexicographic id order and all derived outputs are reproducible.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::error::{AlignError, Result};

/// Ordered set of class names. `index` is a bijection onto `0..len()`.
#[derive(Debug, Clone)]
pub struct LabelVocabulary {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl PartialEq for LabelVocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels
    }
}

impl Eq for LabelVocabulary {}

impl LabelVocabulary {
    /// Builds a vocabulary keeping the given order.
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(AlignError::DuplicateLabel(label.clone()));
            }
        }
        if labels.len() < 2 {
            return Err(AlignError::VocabularyTooSmall(labels.len()));
        }
        Ok(LabelVocabulary { labels, index })
    }

    /// Builds a vocabulary from the sorted, de-duplicated union of the given labels.
    pub fn from_union<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        LabelVocabulary::new(set)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    fn resolve(&self, instance: &str, label: &str) -> Result<usize> {
        self.index_of(label).ok_or_else(|| AlignError::UnknownLabel {
            instance: instance.to_string(),
            label: label.to_string(),
        })
    }
}

fn collect_labeled<I, K, L>(vocab: &LabelVocabulary, entries: I) -> Result<BTreeMap<String, usize>>
where
    I: IntoIterator<Item = (K, L)>,
    K: Into<String>,
    L: AsRef<str>,
{
    let mut map = BTreeMap::new();
    for (id, label) in entries {
        let id = id.into();
        let class = vocab.resolve(&id, label.as_ref())?;
        if map.contains_key(&id) {
            return Err(AlignError::DuplicateInstance(id));
        }
        map.insert(id, class);
    }
    Ok(map)
}

fn check_indices(vocab: &LabelVocabulary, entries: &BTreeMap<String, usize>) -> Result<()> {
    for (id, &class) in entries {
        if class >= vocab.len() {
            return Err(AlignError::UnknownLabel {
                instance: id.clone(),
                label: format!("#{class}"),
            });
        }
    }
    Ok(())
}

/// Ground-truth class of every instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    vocab: Arc<LabelVocabulary>,
    entries: BTreeMap<String, usize>,
}

impl GroundTruth {
    pub fn from_labels<I, K, L>(vocab: Arc<LabelVocabulary>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, L)>,
        K: Into<String>,
        L: AsRef<str>,
    {
        let entries = collect_labeled(&vocab, entries)?;
        Ok(GroundTruth { vocab, entries })
    }

    pub fn from_indices(vocab: Arc<LabelVocabulary>, entries: BTreeMap<String, usize>) -> Result<Self> {
        check_indices(&vocab, &entries)?;
        Ok(GroundTruth { vocab, entries })
    }

    pub fn vocab(&self) -> &Arc<LabelVocabulary> {
        &self.vocab
    }

    pub fn entries(&self) -> &BTreeMap<String, usize> {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.entries.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Hard-label predictions of one system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemRun {
    system_id: String,
    vocab: Arc<LabelVocabulary>,
    entries: BTreeMap<String, usize>,
}

impl SystemRun {
    pub fn from_labels<I, K, L>(system_id: impl Into<String>, vocab: Arc<LabelVocabulary>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, L)>,
        K: Into<String>,
        L: AsRef<str>,
    {
        let entries = collect_labeled(&vocab, entries)?;
        Ok(SystemRun {
            system_id: system_id.into(),
            vocab,
            entries,
        })
    }

    pub fn from_indices(
        system_id: impl Into<String>,
        vocab: Arc<LabelVocabulary>,
        entries: BTreeMap<String, usize>,
    ) -> Result<Self> {
        check_indices(&vocab, &entries)?;
        Ok(SystemRun {
            system_id: system_id.into(),
            vocab,
            entries,
        })
    }

    pub fn system_id(&self) -> &str {
        &self.system_id
    }

    pub fn vocab(&self) -> &Arc<LabelVocabulary> {
        &self.vocab
    }

    pub fn entries(&self) -> &BTreeMap<String, usize> {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.entries.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointRow {
    pub id: String,
    pub truth: usize,
    pub pred_a: usize,
    pub pred_b: usize,
}

impl JointRow {
    pub fn a_correct(&self) -> bool {
        self.pred_a == self.truth
    }

    pub fn b_correct(&self) -> bool {
        self.pred_b == self.truth
    }

    pub fn pred(&self, which: Which) -> usize {
        match which {
            Which::A => self.pred_a,
            Which::B => self.pred_b,
        }
    }
}

/// Truth and both systems' predictions aligned over their common instances.
#[derive(Debug, Clone, PartialEq)]
pub struct JointView {
    vocab: Arc<LabelVocabulary>,
    rows: Vec<JointRow>,
    dropped: usize,
}

impl JointView {
    /// Builds a view from explicit rows; they are sorted by id and must be unique.
    pub fn from_rows(vocab: Arc<LabelVocabulary>, mut rows: Vec<JointRow>) -> Result<Self> {
        rows.sort_by(|x, y| x.id.cmp(&y.id));
        for pair in rows.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(AlignError::DuplicateInstance(pair[0].id.clone()));
            }
        }
        let c = vocab.len();
        if let Some(row) = rows.iter().find(|r| r.truth >= c || r.pred_a >= c || r.pred_b >= c) {
            return Err(AlignError::UnknownLabel {
                instance: row.id.clone(),
                label: "out of range".into(),
            });
        }
        Ok(JointView {
            vocab,
            rows,
            dropped: 0,
        })
    }

    pub fn vocab(&self) -> &Arc<LabelVocabulary> {
        &self.vocab
    }

    pub fn rows(&self) -> &[JointRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Ids present in at least one input but not in all three.
    pub fn dropped_ids(&self) -> usize {
        self.dropped
    }

    pub fn jointly_correct(&self) -> usize {
        self.rows.iter().filter(|r| r.a_correct() && r.b_correct()).count()
    }

    pub fn jointly_incorrect(&self) -> usize {
        self.rows.iter().filter(|r| !r.a_correct() && !r.b_correct()).count()
    }

    pub fn only_a_correct(&self) -> usize {
        self.rows.iter().filter(|r| r.a_correct() && !r.b_correct()).count()
    }

    pub fn only_b_correct(&self) -> usize {
        self.rows.iter().filter(|r| !r.a_correct() && r.b_correct()).count()
    }

    pub(crate) fn filtered(&self, keep: impl Fn(&JointRow) -> bool) -> JointView {
        JointView {
            vocab: Arc::clone(&self.vocab),
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
            dropped: self.dropped,
        }
    }
}

/// Aligns truth and two runs over the ids present in all three.
pub fn build_joint_view(truth: &GroundTruth, run_a: &SystemRun, run_b: &SystemRun) -> Result<JointView> {
    if *truth.vocab != *run_a.vocab || *truth.vocab != *run_b.vocab {
        return Err(AlignError::VocabularyMismatch);
    }
    let rows: Vec<JointRow> = truth
        .entries
        .iter()
        .filter_map(|(id, &t)| {
            let a = run_a.get(id)?;
            let b = run_b.get(id)?;
            Some(JointRow {
                id: id.clone(),
                truth: t,
                pred_a: a,
                pred_b: b,
            })
        })
        .collect();
    if rows.is_empty() {
        return Err(AlignError::NoCommonInstances);
    }
    let union: BTreeSet<&String> = truth
        .entries
        .keys()
        .chain(run_a.entries.keys())
        .chain(run_b.entries.keys())
        .collect();
    Ok(JointView {
        vocab: Arc::clone(&truth.vocab),
        dropped: union.len() - rows.len(),
        rows,
    })
}

/// Fraction of rows where the selected system matches truth. `None` on an empty view.
pub fn accuracy(view: &JointView, which: Which) -> Option<f64> {
    if view.is_empty() {
        return None;
    }
    let correct = view.rows.iter().filter(|r| r.pred(which) == r.truth).count();
    Some(correct as f64 / view.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    /// Rows are system A's prediction, columns system B's.
    Agreement,
    /// Rows are ground truth, columns the prediction.
    Confusion,
}

/// Square count matrix over the label vocabulary, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    dim: usize,
    data: Vec<u64>,
    kind: MatrixKind,
}

impl CountMatrix {
    pub fn zeros(dim: usize, kind: MatrixKind) -> Self {
        CountMatrix {
            dim,
            data: vec![0; dim * dim],
            kind,
        }
    }

    pub fn from_rows(rows: &[Vec<u64>], kind: MatrixKind) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(AlignError::DimensionMismatch {
                    left: dim,
                    right: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(CountMatrix { dim, data, kind })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.data[row * self.dim + col]
    }

    pub fn increment(&mut self, row: usize, col: usize) {
        self.data[row * self.dim + col] += 1;
    }

    pub fn set(&mut self, row: usize, col: usize, value: u64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn row(&self, row: usize) -> &[u64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn row_sum(&self, row: usize) -> u64 {
        self.row(row).iter().sum()
    }

    pub fn col_sum(&self, col: usize) -> u64 {
        (0..self.dim).map(|r| self.get(r, col)).sum()
    }

    pub fn total(&self) -> u64 {
        self.data.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn transpose(&self) -> CountMatrix {
        let mut out = CountMatrix::zeros(self.dim, self.kind);
        for r in 0..self.dim {
            for c in 0..self.dim {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    /// Multiplies every entry by `k`.
    pub fn scaled(&self, k: u64) -> CountMatrix {
        CountMatrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * k).collect(),
            kind: self.kind,
        }
    }

    /// Zeroes the diagonal and returns the number of counts removed.
    pub fn zero_diagonal(&mut self) -> u64 {
        let mut dropped = 0;
        for i in 0..self.dim {
            dropped += self.get(i, i);
            self.set(i, i, 0);
        }
        dropped
    }
}

/// Tolerance on the sum of a [`ProbVector`].
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// Categorical distribution; entries are non-negative and sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(AlignError::InvalidDistribution("empty vector".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(AlignError::InvalidDistribution(format!(
                "entry {v} is not a probability"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(AlignError::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(ProbVector(values))
    }

    /// Scales non-negative weights to sum to 1.
    pub fn normalize(weights: Vec<f64>) -> Result<Self> {
        if let Some(v) = weights.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(AlignError::InvalidDistribution(format!(
                "weight {v} is negative or not finite"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(AlignError::InvalidDistribution("weights sum to zero".into()));
        }
        ProbVector::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-instance class probabilities of one system.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceTable {
    system_id: String,
    dim: usize,
    entries: BTreeMap<String, ProbVector>,
}

impl ConfidenceTable {
    pub fn new(system_id: impl Into<String>, dim: usize, entries: BTreeMap<String, ProbVector>) -> Result<Self> {
        if let Some(bad) = entries.values().find(|p| p.len() != dim) {
            return Err(AlignError::DimensionMismatch {
                left: dim,
                right: bad.len(),
            });
        }
        Ok(ConfidenceTable {
            system_id: system_id.into(),
            dim,
            entries,
        })
    }

    pub fn system_id(&self) -> &str {
        &self.system_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &BTreeMap<String, ProbVector> {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&ProbVector> {
        self.entries.get(id)
    }
}

/// Layer activations of one system, one row per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationMatrix {
    system_id: String,
    dim: usize,
    rows: BTreeMap<String, Vec<f64>>,
}

impl RepresentationMatrix {
    pub fn new(system_id: impl Into<String>, rows: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(AlignError::InvalidRepresentation(format!(
                "need at least 2 instances, got {}",
                rows.len()
            )));
        }
        let dim = rows.values().next().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(AlignError::InvalidRepresentation("feature dimension is zero".into()));
        }
        for (id, row) in &rows {
            if row.len() != dim {
                return Err(AlignError::InvalidRepresentation(format!(
                    "instance `{id}` has {} features, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(AlignError::InvalidRepresentation(format!(
                    "instance `{id}` has a non-finite feature"
                )));
            }
        }
        Ok(RepresentationMatrix {
            system_id: system_id.into(),
            dim,
            rows,
        })
    }

    pub fn system_id(&self) -> &str {
        &self.system_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Undefined,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Ok => "ok",
            Status::Undefined => "undefined",
        })
    }
}

/// A metric value, or the reason it could not be computed.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricResult {
    pub metric: String,
    pub value: Option<f64>,
    pub reason: Option<String>,
    /// Number of instances (or joint errors) the value was computed from.
    pub support: usize,
}

impl MetricResult {
    pub fn ok(metric: impl Into<String>, value: f64, support: usize) -> Self {
        MetricResult {
            metric: metric.into(),
            value: Some(value),
            reason: None,
            support,
        }
    }

    pub fn undefined(metric: impl Into<String>, reason: impl Into<String>, support: usize) -> Self {
        let reason = reason.into();
        debug_assert!(!reason.is_empty());
        MetricResult {
            metric: metric.into(),
            value: None,
            reason: Some(reason),
            support,
        }
    }

    pub fn status(&self) -> Status {
        if self.value.is_some() {
            Status::Ok
        } else {
            Status::Undefined
        }
    }

    pub fn is_defined(&self) -> bool {
        self.value.is_some()
    }

    pub fn renamed(mut self, metric: impl Into<String>) -> Self {
        self.metric = metric.into();
        self
    }
}
