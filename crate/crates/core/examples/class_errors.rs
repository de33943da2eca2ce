//! Class-level error similarity (CLES), from per-instance predictions and from
//! confusion matrices alone (e.g. when only published tables are available).

use std::sync::Arc;

use error_align::divergence::{
    class_error_profile, cles, cles_from_runs, error_confusion_matrix, LogBase, SmoothingPrior, DEFAULT_ALPHA,
};
use error_align::domain::{CountMatrix, GroundTruth, LabelVocabulary, MatrixKind, SystemRun};

fn main() -> error_align::Result<()> {
    let vocab = Arc::new(LabelVocabulary::new(["car", "truck", "bus"])?);
    let truth = GroundTruth::from_labels(
        vocab.clone(),
        [
            ("a", "car"),
            ("b", "car"),
            ("c", "truck"),
            ("d", "truck"),
            ("e", "bus"),
            ("f", "bus"),
        ],
    )?;
    // A and B confuse trucks with buses the same way, on different instances
    let a = SystemRun::from_labels(
        "A",
        vocab.clone(),
        [
            ("a", "car"),
            ("b", "car"),
            ("c", "bus"),
            ("d", "truck"),
            ("e", "bus"),
            ("f", "truck"),
        ],
    )?;
    let b = SystemRun::from_labels(
        "B",
        vocab.clone(),
        [
            ("a", "car"),
            ("b", "car"),
            ("c", "truck"),
            ("d", "bus"),
            ("e", "truck"),
            ("f", "bus"),
        ],
    )?;
    let prior = SmoothingPrior::uniform(vocab.len(), DEFAULT_ALPHA)?;
    let from_runs = cles_from_runs(&truth, &a, &b, &prior, LogBase::Two)?;
    println!(
        "CLES from predictions: {:?} (support {})",
        from_runs.value, from_runs.support
    );

    let ca = error_confusion_matrix(&truth, &a)?;
    let profile = class_error_profile(&ca, &error_confusion_matrix(&truth, &b)?, &prior)?;
    for (c, term) in profile.classes.iter().enumerate() {
        println!(
            "  {:>5}: weight {:.3}  A {:?}  B {:?}",
            vocab.label(c),
            term.weight,
            term.dist_a.values(),
            term.dist_b.values()
        );
    }

    // Confusion matrices only: rows are the true class, diagonal zero.
    let historical_a = CountMatrix::from_rows(
        &[vec![0, 30, 5], vec![12, 0, 40], vec![3, 35, 0]],
        MatrixKind::Confusion,
    )?;
    let historical_b = CountMatrix::from_rows(
        &[vec![0, 25, 9], vec![20, 0, 31], vec![2, 44, 0]],
        MatrixKind::Confusion,
    )?;
    for base in [LogBase::Two, LogBase::E] {
        let r = cles(&historical_a, &historical_b, &prior, base)?;
        println!("CLES from confusion matrices (log base {base}): {:?}", r.value);
    }
    Ok(())
}
