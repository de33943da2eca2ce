//! Divergence-based metrics: Jensen-Shannon divergence, Dirichlet-smoothed
//! class-level error distributions (CLED / CLES), and similarity of confidences
//! (SOC / SOCE).

use std::fmt;
use std::str::FromStr;

use crate::domain::{
    ConfidenceTable, CountMatrix, GroundTruth, JointView, MatrixKind, MetricResult, ProbVector, SystemRun,
};
use crate::error::{AlignError, Result};
use crate::kappa::joint_error_set;
use crate::numeric::{mean, pairwise_sum};

pub const CLED: &str = "cled";
pub const CLES: &str = "cles";
pub const SOC: &str = "soc";
pub const SOCE: &str = "soce";

/// Default Dirichlet shape parameter per class.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Logarithm base for all divergences. Base 2 bounds JSD to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Two,
    E,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Two => x.log2(),
            LogBase::E => x.ln(),
        }
    }

    /// Largest possible JSD in this base.
    pub fn jsd_max(self) -> f64 {
        match self {
            LogBase::Two => 1.0,
            LogBase::E => std::f64::consts::LN_2,
        }
    }
}

impl FromStr for LogBase {
    type Err = AlignError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2" => Ok(LogBase::Two),
            "e" => Ok(LogBase::E),
            other => Err(AlignError::Usage(format!("log base must be `2` or `e`, got `{other}`"))),
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogBase::Two => "2",
            LogBase::E => "e",
        })
    }
}

/// Jensen-Shannon divergence between two distributions on the same support.
pub fn jsd(p: &ProbVector, q: &ProbVector, base: LogBase) -> Result<f64> {
    if p.len() != q.len() {
        return Err(AlignError::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(jsd_values(p.values(), q.values(), base))
}

pub(crate) fn jsd_values(p: &[f64], q: &[f64], base: LogBase) -> f64 {
    let terms: Vec<f64> = p
        .iter()
        .zip(q)
        .map(|(&pk, &qk)| {
            let m = 0.5 * (pk + qk);
            let from_p = if pk > 0.0 { pk * base.log(pk / m) } else { 0.0 };
            let from_q = if qk > 0.0 { qk * base.log(qk / m) } else { 0.0 };
            0.5 * (from_p + from_q)
        })
        .collect();
    pairwise_sum(&terms).clamp(0.0, base.jsd_max())
}

/// Dirichlet prior shape parameters, one per class.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingPrior {
    alpha: Vec<f64>,
}

impl SmoothingPrior {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || alpha.iter().any(|a| !a.is_finite() || *a <= 0.0) {
            return Err(AlignError::InvalidDistribution(
                "prior shape parameters must be positive".into(),
            ));
        }
        Ok(SmoothingPrior { alpha })
    }

    pub fn uniform(classes: usize, alpha: f64) -> Result<Self> {
        SmoothingPrior::new(vec![alpha; classes])
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// Posterior-mean categorical estimate `(f + α) / Σ(f + α)`.
pub fn dirichlet_row_estimate(counts: &[u64], prior: &SmoothingPrior) -> Result<ProbVector> {
    if counts.len() != prior.len() {
        return Err(AlignError::DimensionMismatch {
            left: counts.len(),
            right: prior.len(),
        });
    }
    let smoothed: Vec<f64> = counts.iter().zip(prior.alpha()).map(|(&f, &a)| f as f64 + a).collect();
    let total = pairwise_sum(&smoothed);
    ProbVector::new(smoothed.into_iter().map(|v| v / total).collect())
}

/// Confusion matrix over the instances `run` gets wrong; the diagonal is zero.
/// Instances missing from `truth` are ignored.
pub fn error_confusion_matrix(truth: &GroundTruth, run: &SystemRun) -> Result<CountMatrix> {
    if **truth.vocab() != **run.vocab() {
        return Err(AlignError::VocabularyMismatch);
    }
    let mut m = CountMatrix::zeros(truth.vocab().len(), MatrixKind::Confusion);
    for (id, &pred) in run.entries() {
        if let Some(t) = truth.get(id) {
            if t != pred {
                m.increment(t, pred);
            }
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassTerm {
    pub weight: f64,
    pub dist_a: ProbVector,
    pub dist_b: ProbVector,
}

/// Per-ground-truth-class smoothed error distributions of two systems, with
/// weights proportional to the errors each class contributes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassErrorProfile {
    pub classes: Vec<ClassTerm>,
    pub total_errors: u64,
}

fn check_error_matrix(m: &CountMatrix) -> Result<()> {
    if m.kind() != MatrixKind::Confusion {
        return Err(AlignError::InvalidMatrix("expected a confusion matrix".into()));
    }
    if m.trace() != 0 {
        return Err(AlignError::InvalidMatrix(
            "error confusion matrix must have a zero diagonal".into(),
        ));
    }
    Ok(())
}

pub fn class_error_profile(
    conf_a: &CountMatrix,
    conf_b: &CountMatrix,
    prior: &SmoothingPrior,
) -> Result<ClassErrorProfile> {
    if conf_a.dim() != conf_b.dim() || conf_a.dim() != prior.len() {
        return Err(AlignError::VocabularyMismatch);
    }
    check_error_matrix(conf_a)?;
    check_error_matrix(conf_b)?;
    let total_errors = conf_a.total() + conf_b.total();
    let classes = (0..conf_a.dim())
        .map(|c| {
            let weight = if total_errors == 0 {
                0.0
            } else {
                (conf_a.row_sum(c) + conf_b.row_sum(c)) as f64 / total_errors as f64
            };
            Ok(ClassTerm {
                weight,
                dist_a: dirichlet_row_estimate(conf_a.row(c), prior)?,
                dist_b: dirichlet_row_estimate(conf_b.row(c), prior)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassErrorProfile { classes, total_errors })
}

/// Class-level error distance: error-weighted mean JSD between the two systems'
/// smoothed per-class error distributions.
pub fn cled(conf_a: &CountMatrix, conf_b: &CountMatrix, prior: &SmoothingPrior, base: LogBase) -> Result<MetricResult> {
    let profile = class_error_profile(conf_a, conf_b, prior)?;
    let support = profile.total_errors as usize;
    if profile.total_errors == 0 {
        return Ok(MetricResult::undefined(CLED, "no errors", 0));
    }
    let terms: Vec<f64> = profile
        .classes
        .iter()
        .map(|t| t.weight * jsd_values(t.dist_a.values(), t.dist_b.values(), base))
        .collect();
    Ok(MetricResult::ok(CLED, pairwise_sum(&terms), support))
}

/// Class-level error similarity, `1 / (1 + CLED)`.
pub fn cles(conf_a: &CountMatrix, conf_b: &CountMatrix, prior: &SmoothingPrior, base: LogBase) -> Result<MetricResult> {
    let distance = cled(conf_a, conf_b, prior, base)?;
    Ok(match distance.value {
        Some(d) => MetricResult::ok(CLES, 1.0 / (1.0 + d), distance.support),
        None => distance.renamed(CLES),
    })
}

/// CLES from hard-label runs. The runs need not cover the same instances.
pub fn cles_from_runs(
    truth: &GroundTruth,
    run_a: &SystemRun,
    run_b: &SystemRun,
    prior: &SmoothingPrior,
    base: LogBase,
) -> Result<MetricResult> {
    let conf_a = error_confusion_matrix(truth, run_a)?;
    let conf_b = error_confusion_matrix(truth, run_b)?;
    cles(&conf_a, &conf_b, prior, base)
}

/// Similarity of confidences: `1 / (1 + mean per-instance JSD)` over the
/// instances both tables share. With `restrict`, only that view's joint-error
/// instances are used (SOCE).
pub fn soc(
    conf_a: &ConfidenceTable,
    conf_b: &ConfidenceTable,
    restrict: Option<&JointView>,
    base: LogBase,
) -> Result<MetricResult> {
    if conf_a.dim() != conf_b.dim() {
        return Err(AlignError::DimensionMismatch {
            left: conf_a.dim(),
            right: conf_b.dim(),
        });
    }
    let name = if restrict.is_some() { SOCE } else { SOC };
    let divergences: Vec<f64> = match restrict {
        None => conf_a
            .entries()
            .iter()
            .filter_map(|(id, p)| conf_b.get(id).map(|q| jsd_values(p.values(), q.values(), base)))
            .collect(),
        Some(view) => {
            let errors = joint_error_set(view);
            if errors.is_empty() {
                return Ok(MetricResult::undefined(name, "no joint errors", 0));
            }
            errors
                .rows()
                .iter()
                .filter_map(|r| {
                    let p = conf_a.get(&r.id)?;
                    let q = conf_b.get(&r.id)?;
                    Some(jsd_values(p.values(), q.values(), base))
                })
                .collect()
        }
    };
    match mean(&divergences) {
        Some(m) => Ok(MetricResult::ok(name, 1.0 / (m + 1.0), divergences.len())),
        None => Ok(MetricResult::undefined(name, "no instances", 0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_joint_view, LabelVocabulary};
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    /// JSD through two explicit KL divergences in nats, converted to bits.
    fn oracle_jsd(p: &[f64], q: &[f64]) -> f64 {
        let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| (a + b) / 2.0).collect();
        let kl = |x: &[f64]| -> f64 {
            x.iter()
                .zip(&m)
                .filter(|(xi, _)| **xi > 0.0)
                .map(|(xi, mi)| xi * (xi / mi).ln())
                .sum()
        };
        (0.5 * kl(p) + 0.5 * kl(q)) / std::f64::consts::LN_2
    }

    fn conf(rows: &[Vec<u64>]) -> CountMatrix {
        CountMatrix::from_rows(rows, MatrixKind::Confusion).unwrap()
    }

    fn prior3() -> SmoothingPrior {
        SmoothingPrior::uniform(3, DEFAULT_ALPHA).unwrap()
    }

    #[test]
    fn jsd_examples() {
        let p = pv(&[0.2, 0.3, 0.5]);
        assert_eq!(jsd(&p, &p, LogBase::Two).unwrap(), 0.0);
        assert_eq!(jsd(&pv(&[1.0, 0.0]), &pv(&[0.0, 1.0]), LogBase::Two).unwrap(), 1.0);
        let v = jsd(&pv(&[0.5, 0.5]), &pv(&[1.0, 0.0]), LogBase::Two).unwrap();
        assert!((v - oracle_jsd(&[0.5, 0.5], &[1.0, 0.0])).abs() < 1e-15);
        assert!((v - 0.311_278_124_459_132_8).abs() < 1e-12);
        let nats = jsd(&pv(&[1.0, 0.0]), &pv(&[0.0, 1.0]), LogBase::E).unwrap();
        assert!((nats - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn jsd_dimension_mismatch() {
        assert!(jsd(&pv(&[1.0]), &pv(&[0.5, 0.5]), LogBase::Two).is_err());
    }

    #[test]
    fn dirichlet_examples() {
        let p2 = SmoothingPrior::uniform(2, 0.5).unwrap();
        assert_eq!(dirichlet_row_estimate(&[0, 0], &p2).unwrap().values(), [0.5, 0.5]);
        let est = dirichlet_row_estimate(&[3, 0, 1], &prior3()).unwrap();
        for (got, want) in est.values().iter().zip([3.5 / 5.5, 0.5 / 5.5, 1.5 / 5.5]) {
            assert!((got - want).abs() < 1e-15);
        }
        let uniform = dirichlet_row_estimate(&[4, 4, 4], &prior3()).unwrap();
        assert!(uniform.values().iter().all(|v| *v == uniform.values()[0]));
        assert!(dirichlet_row_estimate(&[1, 2], &prior3()).is_err());
        assert!(SmoothingPrior::new(vec![0.5, 0.0]).is_err());
    }

    fn vocab3() -> Arc<LabelVocabulary> {
        Arc::new(LabelVocabulary::new(["c0", "c1", "c2"]).unwrap())
    }

    #[test]
    fn error_confusion_tally() {
        let v = vocab3();
        let truth = GroundTruth::from_labels(
            v.clone(),
            [
                ("a", "c0"),
                ("b", "c1"),
                ("c", "c2"),
                ("d", "c0"),
                ("e", "c1"),
                ("f", "c2"),
            ],
        )
        .unwrap();
        let perfect = SystemRun::from_indices("P", v.clone(), truth.entries().clone()).unwrap();
        assert_eq!(error_confusion_matrix(&truth, &perfect).unwrap().total(), 0);

        let run = SystemRun::from_labels(
            "R",
            v.clone(),
            [
                ("a", "c2"),
                ("b", "c1"),
                ("c", "c0"),
                ("d", "c2"),
                ("e", "c1"),
                ("f", "c2"),
            ],
        )
        .unwrap();
        let m = error_confusion_matrix(&truth, &run).unwrap();
        let mut oracle = [[0u64; 3]; 3];
        for (id, &p) in run.entries() {
            let t = truth.get(id).unwrap();
            if t != p {
                oracle[t][p] += 1;
            }
        }
        for (r, row) in oracle.iter().enumerate() {
            for (c, &want) in row.iter().enumerate() {
                assert_eq!(m.get(r, c), want);
            }
        }
        assert_eq!(m.total(), 3);
        assert_eq!(m.trace(), 0);

        let single_truth = GroundTruth::from_labels(v.clone(), [("x", "c1")]).unwrap();
        let single = SystemRun::from_labels("S", v, [("x", "c2")]).unwrap();
        assert_eq!(error_confusion_matrix(&single_truth, &single).unwrap().get(1, 2), 1);
    }

    #[test]
    fn cled_identity_and_empty() {
        let a = conf(&[vec![0, 2, 1], vec![1, 0, 0], vec![0, 3, 0]]);
        assert_eq!(cled(&a, &a, &prior3(), LogBase::Two).unwrap().value, Some(0.0));
        assert_eq!(cles(&a, &a, &prior3(), LogBase::Two).unwrap().value, Some(1.0));
        let z = conf(&[vec![0; 3], vec![0; 3], vec![0; 3]]);
        let r = cled(&z, &z, &prior3(), LogBase::Two).unwrap();
        assert_eq!(r.reason.as_deref(), Some("no errors"));
        let r = cles(&z, &z, &prior3(), LogBase::Two).unwrap();
        assert_eq!(r.metric, CLES);
        assert_eq!(r.value, None);
    }

    #[test]
    fn cled_opposite_error_targets() {
        let a = conf(&[vec![0, 4, 0], vec![0, 0, 0], vec![0, 0, 0]]);
        let b = conf(&[vec![0, 0, 4], vec![0, 0, 0], vec![0, 0, 0]]);
        let pa = [0.5 / 5.5, 4.5 / 5.5, 0.5 / 5.5];
        let pb = [0.5 / 5.5, 0.5 / 5.5, 4.5 / 5.5];
        // Only class 0 carries weight, so CLED is that row's JSD.
        let expected = oracle_jsd(&pa, &pb);
        let got = cled(&a, &b, &prior3(), LogBase::Two).unwrap();
        assert!((got.value.unwrap() - expected).abs() < 1e-14);
        assert_eq!(got.support, 8);
        let s = cles(&a, &b, &prior3(), LogBase::Two).unwrap().value.unwrap();
        assert!((s - 1.0 / (1.0 + expected)).abs() < 1e-14);
    }

    #[test]
    fn cled_rejects_mismatch_and_nonzero_diagonal() {
        let a = conf(&[vec![0, 1], vec![1, 0]]);
        let b = conf(&[vec![0, 1, 0], vec![1, 0, 0], vec![0, 0, 0]]);
        assert!(cled(&a, &b, &prior3(), LogBase::Two).is_err());
        let full = conf(&[vec![1, 1, 0], vec![1, 0, 0], vec![0, 0, 0]]);
        assert!(matches!(
            cled(&full, &b, &prior3(), LogBase::Two),
            Err(AlignError::InvalidMatrix(_))
        ));
    }

    #[test]
    fn cles_against_a_perfect_system() {
        let v = vocab3();
        let truth = GroundTruth::from_labels(v.clone(), [("a", "c0"), ("b", "c1"), ("c", "c2")]).unwrap();
        let a = SystemRun::from_labels("A", v.clone(), [("a", "c1"), ("b", "c1"), ("c", "c2")]).unwrap();
        let b = SystemRun::from_indices("B", v, truth.entries().clone()).unwrap();
        let got = cles_from_runs(&truth, &a, &b, &prior3(), LogBase::Two).unwrap();
        // Class 0 is the only weighted row: A has one error into class 1, B is prior-only.
        let expected = 1.0 / (1.0 + oracle_jsd(&[0.5 / 2.5, 1.5 / 2.5, 0.5 / 2.5], &[1.0 / 3.0; 3]));
        assert!((got.value.unwrap() - expected).abs() < 1e-14);

        let both = cles_from_runs(&truth, &b, &b, &prior3(), LogBase::Two).unwrap();
        assert_eq!(both.reason.as_deref(), Some("no errors"));
        assert_eq!(
            cles_from_runs(&truth, &a, &a, &prior3(), LogBase::Two).unwrap().value,
            Some(1.0)
        );
    }

    fn table(id: &str, rows: &[(&str, &[f64])]) -> ConfidenceTable {
        let entries: BTreeMap<String, ProbVector> = rows.iter().map(|(k, v)| (k.to_string(), pv(v))).collect();
        ConfidenceTable::new(id, rows[0].1.len(), entries).unwrap()
    }

    #[test]
    fn soc_bounds() {
        let a = table("A", &[("x", &[0.7, 0.3]), ("y", &[0.1, 0.9])]);
        let r = soc(&a, &a, None, LogBase::Two).unwrap();
        assert_eq!(r.value, Some(1.0));
        assert_eq!(r.support, 2);

        let p = table("P", &[("x", &[1.0, 0.0]), ("y", &[0.0, 1.0])]);
        let q = table("Q", &[("x", &[0.0, 1.0]), ("y", &[1.0, 0.0])]);
        assert_eq!(soc(&p, &q, None, LogBase::Two).unwrap().value, Some(0.5));

        let other = table("O", &[("z", &[0.5, 0.5])]);
        assert_eq!(
            soc(&a, &other, None, LogBase::Two).unwrap().reason.as_deref(),
            Some("no instances")
        );
    }

    #[test]
    fn soce_uses_joint_errors_only() {
        let v = Arc::new(LabelVocabulary::new(["c0", "c1"]).unwrap());
        let truth = GroundTruth::from_labels(v.clone(), [("x", "c0"), ("y", "c0")]).unwrap();
        let a = SystemRun::from_labels("A", v.clone(), [("x", "c0"), ("y", "c1")]).unwrap();
        let b = SystemRun::from_labels("B", v.clone(), [("x", "c1"), ("y", "c1")]).unwrap();
        let view = build_joint_view(&truth, &a, &b).unwrap();
        let ca = table("A", &[("x", &[1.0, 0.0]), ("y", &[0.2, 0.8])]);
        let cb = table("B", &[("x", &[0.0, 1.0]), ("y", &[0.2, 0.8])]);
        let r = soc(&ca, &cb, Some(&view), LogBase::Two).unwrap();
        assert_eq!(r.metric, SOCE);
        assert_eq!(r.value, Some(1.0));
        assert_eq!(r.support, 1);

        let correct = build_joint_view(&truth, &a, &a).unwrap().clone();
        let no_errors = JointView::from_rows(v, correct.rows().iter().take(1).cloned().collect()).unwrap();
        let r = soc(&ca, &cb, Some(&no_errors), LogBase::Two).unwrap();
        assert_eq!(r.value, None);
    }
}
