//! Error consistency vs misclassification agreement on two hand-built runs.
//!
//! Both pairs below make their mistakes on exactly the same instances, so EC
//! cannot tell them apart. MA looks at *which* wrong label each system chose.

use std::sync::Arc;

use error_align::domain::{build_joint_view, GroundTruth, LabelVocabulary, SystemRun};
use error_align::kappa::{error_agreement_matrix, error_consistency, joint_error_set, misclassification_agreement};

fn main() -> error_align::Result<()> {
    let vocab = Arc::new(LabelVocabulary::new(["cat", "dog", "fox", "owl"])?);
    let truth = GroundTruth::from_labels(
        vocab.clone(),
        [
            ("i1", "cat"),
            ("i2", "dog"),
            ("i3", "fox"),
            ("i4", "owl"),
            ("i5", "cat"),
            ("i6", "dog"),
            ("i7", "fox"),
            ("i8", "owl"),
        ],
    )?;
    let a = SystemRun::from_labels(
        "A",
        vocab.clone(),
        [
            ("i1", "dog"),
            ("i2", "cat"),
            ("i3", "owl"),
            ("i4", "owl"),
            ("i5", "cat"),
            ("i6", "dog"),
            ("i7", "fox"),
            ("i8", "fox"),
        ],
    )?;
    // same error positions and same wrong labels
    let b_same = SystemRun::from_labels(
        "B",
        vocab.clone(),
        [
            ("i1", "dog"),
            ("i2", "cat"),
            ("i3", "owl"),
            ("i4", "owl"),
            ("i5", "cat"),
            ("i6", "fox"),
            ("i7", "fox"),
            ("i8", "fox"),
        ],
    )?;
    // same error positions, different wrong labels
    let b_other = SystemRun::from_labels(
        "B",
        vocab.clone(),
        [
            ("i1", "fox"),
            ("i2", "owl"),
            ("i3", "cat"),
            ("i4", "owl"),
            ("i5", "cat"),
            ("i6", "fox"),
            ("i7", "fox"),
            ("i8", "cat"),
        ],
    )?;

    for (name, b) in [("same wrong labels", &b_same), ("different wrong labels", &b_other)] {
        let view = build_joint_view(&truth, &a, b)?;
        let ec = error_consistency(&view);
        let ma = misclassification_agreement(&view);
        println!("{name}:");
        println!("  EC = {:?}  MA = {:?}", ec.value, ma.value);
        let m = error_agreement_matrix(&joint_error_set(&view));
        println!("  joint errors: {}, error agreement matrix rows:", m.total());
        for r in 0..m.dim() {
            println!("    {:>4} {:?}", vocab.label(r), m.row(r));
        }
    }
    Ok(())
}
