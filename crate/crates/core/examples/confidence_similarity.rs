//! SOC and SOCE: similarity of output confidences, over all shared instances
//! and over the instances both systems get wrong.

use std::collections::BTreeMap;
use std::sync::Arc;

use error_align::divergence::{jsd, soc, LogBase};
use error_align::domain::{build_joint_view, ConfidenceTable, GroundTruth, LabelVocabulary, ProbVector, SystemRun};

fn table(id: &str, rows: &[(&str, [f64; 3])]) -> error_align::Result<ConfidenceTable> {
    let entries = rows
        .iter()
        .map(|(k, p)| Ok((k.to_string(), ProbVector::new(p.to_vec())?)))
        .collect::<error_align::Result<BTreeMap<_, _>>>()?;
    ConfidenceTable::new(id, 3, entries)
}

fn argmax(t: &ConfidenceTable) -> BTreeMap<String, usize> {
    t.entries()
        .iter()
        .map(|(k, p)| {
            let best = (0..p.len())
                .max_by(|&i, &j| p.values()[i].total_cmp(&p.values()[j]))
                .unwrap();
            (k.clone(), best)
        })
        .collect()
}

fn main() -> error_align::Result<()> {
    let vocab = Arc::new(LabelVocabulary::new(["x", "y", "z"])?);
    let truth = GroundTruth::from_labels(vocab.clone(), [("n1", "x"), ("n2", "y"), ("n3", "z"), ("n4", "x")])?;
    let a = table(
        "A",
        &[
            ("n1", [0.8, 0.1, 0.1]),
            ("n2", [0.6, 0.3, 0.1]),
            ("n3", [0.2, 0.2, 0.6]),
            ("n4", [0.1, 0.7, 0.2]),
        ],
    )?;
    let b = table(
        "B",
        &[
            ("n1", [0.7, 0.2, 0.1]),
            ("n2", [0.5, 0.4, 0.1]),
            ("n3", [0.1, 0.1, 0.8]),
            ("n4", [0.2, 0.2, 0.6]),
        ],
    )?;
    for (id, p) in a.entries() {
        println!("JSD({id}) = {:.4}", jsd(p, b.get(id).unwrap(), LogBase::Two)?);
    }
    println!("SOC  = {:?}", soc(&a, &b, None, LogBase::Two)?.value);

    let run_a = SystemRun::from_indices("A", vocab.clone(), argmax(&a))?;
    let run_b = SystemRun::from_indices("B", vocab.clone(), argmax(&b))?;
    let view = build_joint_view(&truth, &run_a, &run_b)?;
    let soce = soc(&a, &b, Some(&view), LogBase::Two)?;
    println!("SOCE = {:?} over {} joint errors", soce.value, soce.support);
    Ok(())
}
