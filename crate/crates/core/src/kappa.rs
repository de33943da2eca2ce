//! Cohen's kappa and the two agreement metrics built on it: error consistency
//! (agreement on *whether* each instance is misclassified) and misclassification
//! agreement (agreement on *which* wrong label is given, over joint errors only).

use crate::domain::{accuracy, CountMatrix, JointView, MatrixKind, MetricResult, Which};

pub const EC: &str = "ec";
pub const MA: &str = "ma";

/// Observed and chance agreement of a square count matrix, and the resulting kappa.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaBreakdown {
    pub p_o: f64,
    pub p_e: f64,
    pub kappa: Option<f64>,
    pub reason: Option<&'static str>,
    pub n: u64,
}

/// Multiclass Cohen's kappa of an agreement matrix.
///
/// Computed as `(n·trace − Σ rᵢcᵢ) / (n² − Σ rᵢcᵢ)` in exact integer arithmetic
/// followed by a single division, which is algebraically `(p_o − p_e)/(1 − p_e)`.
/// When chance agreement is total (`p_e = 1`) the result is 1 if observed
/// agreement is also total, otherwise undefined.
pub fn cohens_kappa(m: &CountMatrix) -> KappaBreakdown {
    let n = m.total();
    if n == 0 {
        return KappaBreakdown {
            p_o: 0.0,
            p_e: 0.0,
            kappa: None,
            reason: Some("empty matrix"),
            n,
        };
    }
    let trace = m.trace();
    let chance: u128 = (0..m.dim())
        .map(|i| u128::from(m.row_sum(i)) * u128::from(m.col_sum(i)))
        .sum();
    let n128 = u128::from(n);
    let n_sq = n128 * n128;
    let nf = n as f64;
    let p_o = trace as f64 / nf;
    let p_e = chance as f64 / (nf * nf);

    let (kappa, reason) = if chance == n_sq {
        if trace == n {
            (Some(1.0), None)
        } else {
            (None, Some("p_e=1"))
        }
    } else {
        let observed = n128 * u128::from(trace);
        let num = if observed >= chance {
            (observed - chance) as f64
        } else {
            -((chance - observed) as f64)
        };
        let den = (n_sq - chance) as f64;
        (Some((num / den).clamp(-1.0, 1.0)), None)
    };
    KappaBreakdown {
        p_o,
        p_e,
        kappa,
        reason,
        n,
    }
}

/// Rows where both systems are wrong.
pub fn joint_error_set(view: &JointView) -> JointView {
    view.filtered(|r| !r.a_correct() && !r.b_correct())
}

/// Cell `(i, j)` counts rows where A predicted `i` and B predicted `j`.
pub fn error_agreement_matrix(joint_errors: &JointView) -> CountMatrix {
    let mut m = CountMatrix::zeros(joint_errors.vocab().len(), MatrixKind::Agreement);
    for row in joint_errors.rows() {
        m.increment(row.pred_a, row.pred_b);
    }
    m
}

/// 2×2 matrix of correctness agreement: index 0 = correct, 1 = incorrect;
/// rows are system A, columns system B.
pub fn correctness_agreement_matrix(view: &JointView) -> CountMatrix {
    let mut m = CountMatrix::zeros(2, MatrixKind::Agreement);
    for row in view.rows() {
        m.increment(usize::from(!row.a_correct()), usize::from(!row.b_correct()));
    }
    m
}

/// Kappa of the error agreement matrix over the joint-error rows.
pub fn misclassification_agreement(view: &JointView) -> MetricResult {
    let errors = joint_error_set(view);
    let support = errors.len();
    if support == 0 {
        return MetricResult::undefined(MA, "no joint errors", 0);
    }
    let k = cohens_kappa(&error_agreement_matrix(&errors));
    match k.kappa {
        Some(v) => MetricResult::ok(MA, v, support),
        None => MetricResult::undefined(MA, k.reason.unwrap_or("undefined kappa"), support),
    }
}

/// Error consistency: kappa of observed vs chance-expected error overlap.
pub fn error_consistency(view: &JointView) -> MetricResult {
    let (Some(p_a), Some(p_b)) = (accuracy(view, Which::A), accuracy(view, Which::B)) else {
        return MetricResult::undefined(EC, "empty view", 0);
    };
    let n = view.len();
    let agree = view.jointly_correct() + view.jointly_incorrect();
    let p_obs = agree as f64 / n as f64;
    let p_exp = p_a * p_b + (1.0 - p_a) * (1.0 - p_b);
    if agree == n {
        return MetricResult::ok(EC, 1.0, n);
    }
    if p_exp >= 1.0 {
        return MetricResult::undefined(EC, "p_exp=1", n);
    }
    let ec = (p_obs - p_exp) / (1.0 - p_exp);
    MetricResult::ok(EC, ec.clamp(-1.0, 1.0), n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{JointRow, LabelVocabulary};
    use std::sync::Arc;

    fn view(c: usize, rows: &[(usize, usize, usize)]) -> JointView {
        let vocab = Arc::new(LabelVocabulary::new((0..c).map(|i| format!("c{i}"))).unwrap());
        let rows = rows
            .iter()
            .enumerate()
            .map(|(i, &(t, a, b))| JointRow {
                id: format!("i{i:03}"),
                truth: t,
                pred_a: a,
                pred_b: b,
            })
            .collect();
        JointView::from_rows(vocab, rows).unwrap()
    }

    /// Kappa straight from a list of label pairs, no matrix involved.
    fn brute_kappa(pairs: &[(usize, usize)], c: usize) -> f64 {
        let n = pairs.len() as f64;
        let agree = pairs.iter().filter(|(a, b)| a == b).count() as f64;
        let mut p_e = 0.0;
        for k in 0..c {
            let fa = pairs.iter().filter(|(a, _)| *a == k).count() as f64 / n;
            let fb = pairs.iter().filter(|(_, b)| *b == k).count() as f64 / n;
            p_e += fa * fb;
        }
        (agree / n - p_e) / (1.0 - p_e)
    }

    #[test]
    fn diagonal_matrix_is_perfect() {
        let m = CountMatrix::from_rows(&[vec![3, 0], vec![0, 5]], MatrixKind::Agreement).unwrap();
        let k = cohens_kappa(&m);
        assert_eq!(k.p_o, 1.0);
        assert_eq!(k.kappa, Some(1.0));
    }

    #[test]
    fn uniform_matrix_is_chance() {
        let m = CountMatrix::from_rows(&[vec![25, 25], vec![25, 25]], MatrixKind::Agreement).unwrap();
        let k = cohens_kappa(&m);
        assert_eq!(k.p_o, 0.5);
        assert_eq!(k.p_e, 0.5);
        assert_eq!(k.kappa, Some(0.0));
    }

    #[test]
    fn three_class_matches_brute_force() {
        let m = CountMatrix::from_rows(&[vec![1, 1, 0], vec![0, 1, 0], vec![0, 0, 1]], MatrixKind::Agreement).unwrap();
        let pairs = [(0, 0), (0, 1), (1, 1), (2, 2)];
        let expected = brute_kappa(&pairs, 3);
        assert!((expected - 7.0 / 11.0).abs() < 1e-15);
        assert!((cohens_kappa(&m).kappa.unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn degenerate_and_empty_kappa() {
        let m = CountMatrix::from_rows(&[vec![4, 0], vec![0, 0]], MatrixKind::Agreement).unwrap();
        assert_eq!(cohens_kappa(&m).kappa, Some(1.0));
        let empty = CountMatrix::zeros(3, MatrixKind::Agreement);
        let k = cohens_kappa(&empty);
        assert_eq!(k.kappa, None);
        assert_eq!(k.reason, Some("empty matrix"));
    }

    #[test]
    fn joint_error_filtering() {
        let all_right = view(3, &[(0, 0, 0), (1, 1, 1)]);
        assert!(joint_error_set(&all_right).is_empty());
        let all_wrong = view(3, &[(0, 1, 2), (1, 0, 0)]);
        assert_eq!(joint_error_set(&all_wrong), all_wrong);

        let rows = [
            (0, 0, 0),
            (0, 1, 2),
            (1, 1, 0),
            (1, 2, 2),
            (2, 0, 1),
            (2, 2, 2),
            (0, 2, 0),
            (1, 0, 2),
            (2, 1, 1),
            (0, 1, 1),
        ];
        let v = view(3, &rows);
        let expected: Vec<&JointRow> = v
            .rows()
            .iter()
            .filter(|r| r.pred_a != r.truth && r.pred_b != r.truth)
            .collect();
        let got = joint_error_set(&v);
        assert_eq!(got.rows().iter().collect::<Vec<_>>(), expected);
        assert_eq!(got.len(), v.jointly_incorrect());
    }

    #[test]
    fn error_agreement_tally() {
        let empty = view(4, &[(0, 0, 0)]);
        assert_eq!(error_agreement_matrix(&joint_error_set(&empty)).total(), 0);

        let single = view(4, &[(0, 2, 3)]);
        let m = error_agreement_matrix(&joint_error_set(&single));
        assert_eq!(m.get(2, 3), 1);
        assert_eq!(m.total(), 1);

        let v = view(4, &[(0, 2, 2), (0, 2, 3), (0, 3, 3), (1, 3, 3)]);
        let m = error_agreement_matrix(&joint_error_set(&v));
        assert_eq!(m.get(2, 2), 1);
        assert_eq!(m.get(2, 3), 1);
        assert_eq!(m.get(3, 3), 2);
        assert_eq!(m.total(), 4);
    }

    #[test]
    fn ma_worked_example() {
        let v = view(4, &[(0, 2, 2), (0, 2, 3), (0, 3, 3), (1, 3, 3)]);
        let k = cohens_kappa(&error_agreement_matrix(&joint_error_set(&v)));
        assert_eq!(k.p_o, 0.75);
        assert_eq!(k.p_e, 0.5);
        let ma = misclassification_agreement(&v);
        assert_eq!(ma.value, Some(0.5));
        assert_eq!(ma.support, 4);
        let brute = brute_kappa(&[(2, 2), (2, 3), (3, 3), (3, 3)], 4);
        assert!((brute - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ma_self_comparison_and_no_errors() {
        let v = view(3, &[(0, 1, 1), (1, 2, 2), (2, 2, 2), (0, 0, 0)]);
        assert_eq!(misclassification_agreement(&v).value, Some(1.0));
        let none = view(3, &[(0, 0, 1), (1, 1, 1)]);
        let r = misclassification_agreement(&none);
        assert_eq!(r.value, None);
        assert_eq!(r.reason.as_deref(), Some("no joint errors"));
    }

    #[test]
    fn ec_worked_example() {
        // 6 jointly correct, 2 only-A correct, 1 only-B correct, 1 joint error.
        let mut rows = vec![(0, 0, 0); 6];
        rows.extend([(0, 0, 1), (0, 0, 1), (0, 1, 0), (0, 1, 1)]);
        let v = view(2, &rows);
        assert_eq!(accuracy(&v, Which::A), Some(0.8));
        assert_eq!(accuracy(&v, Which::B), Some(0.7));
        // arithmetic oracle: p_obs = 0.7, p_exp = 0.8*0.7 + 0.2*0.3 = 0.62
        let expected = (0.7 - 0.62) / (1.0 - 0.62);
        let ec = error_consistency(&v).value.unwrap();
        assert!((ec - expected).abs() < 1e-12);
        assert!((ec - 0.210_526_315_789_473_7).abs() < 1e-12);
    }

    #[test]
    fn ec_degenerate_cases() {
        let perfect = view(2, &[(0, 0, 0), (1, 1, 1)]);
        assert_eq!(error_consistency(&perfect).value, Some(1.0));
        let identical = view(3, &[(0, 0, 0), (1, 2, 2), (2, 2, 2)]);
        assert_eq!(error_consistency(&identical).value, Some(1.0));
        let empty = perfect.filtered(|_| false);
        assert_eq!(error_consistency(&empty).value, None);
    }

    #[test]
    fn ma_transpose_symmetry() {
        let v = view(3, &[(0, 1, 2), (0, 2, 2), (1, 0, 2), (2, 1, 0), (2, 0, 0)]);
        let m = error_agreement_matrix(&joint_error_set(&v));
        assert_eq!(cohens_kappa(&m).kappa, cohens_kappa(&m.transpose()).kappa);
    }
}
