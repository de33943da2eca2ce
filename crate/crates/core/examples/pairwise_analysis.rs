//! Score every pair of systems across two domains, then correlate metrics and
//! z-score them by family pair.

use std::collections::BTreeMap;
use std::sync::Arc;

use error_align::analysis::{
    correlation_report, pairwise_scores, zscore_by_metric, FamilyMap, Metric, MetricPair, PairwiseScoreTable,
    ScoreOptions, SystemInput,
};
use error_align::domain::{GroundTruth, LabelVocabulary, SystemRun};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CLASSES: usize = 5;

/// Systems share a per-instance difficulty; each has its own favourite wrong label.
fn domain(name: &str, seed: u64) -> error_align::Result<(GroundTruth, Vec<SystemInput>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = Arc::new(LabelVocabulary::new((0..CLASSES).map(|c| format!("{name}-{c}")))?);
    let n = 400;
    let truth: BTreeMap<String, usize> = (0..n)
        .map(|i| (format!("i{i:04}"), rng.random_range(0..CLASSES)))
        .collect();
    let difficulty: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let systems = (0..6)
        .map(|s| {
            let skill: f64 = rng.random_range(0.3..0.9);
            let bias = 1 + s % (CLASSES - 1);
            let preds = truth
                .iter()
                .zip(&difficulty)
                .map(|((id, &t), &d)| {
                    let p = if d < skill {
                        t
                    } else if rng.random_bool(0.7) {
                        (t + bias) % CLASSES
                    } else {
                        (t + rng.random_range(1..CLASSES)) % CLASSES
                    };
                    (id.clone(), p)
                })
                .collect();
            Ok(SystemInput::new(SystemRun::from_indices(
                format!("sys{s}"),
                vocab.clone(),
                preds,
            )?))
        })
        .collect::<error_align::Result<Vec<_>>>()?;
    Ok((GroundTruth::from_indices(vocab, truth)?, systems))
}

fn main() -> error_align::Result<()> {
    let metrics = [Metric::Ec, Metric::Ma, Metric::Cles];
    let mut tables = Vec::new();
    for (name, seed) in [("north", 1), ("south", 2)] {
        let (truth, systems) = domain(name, seed)?;
        tables.push(pairwise_scores(
            name,
            &systems,
            &truth,
            &metrics,
            ScoreOptions::default(),
        )?);
    }
    let table = PairwiseScoreTable::merge(tables)?;
    println!("{} score rows", table.len());

    let pairs: Vec<MetricPair> = ["ma:cles", "ec:ma", "ec:cles"]
        .iter()
        .map(|p| p.parse())
        .collect::<Result<_, _>>()?;
    for e in correlation_report(&table, &pairs).entries {
        println!(
            "{}:{}  global r {:?}  average r {:?}",
            e.pair.x, e.pair.y, e.global.r, e.average
        );
    }

    let mut families = FamilyMap::default();
    for s in 0..6 {
        families.insert(format!("sys{s}"), if s < 3 { "CNN" } else { "ViT" })?;
    }
    let z = zscore_by_metric(&table, &families)?;
    let mut by_family: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for r in &z {
        if let Some(v) = r.z {
            by_family
                .entry((r.metric.as_str(), r.family_pair.as_str()))
                .or_default()
                .push(v);
        }
    }
    for ((metric, fam), zs) in by_family {
        println!(
            "{metric:>5} {fam:<8} mean z {:+.3}",
            zs.iter().sum::<f64>() / zs.len() as f64
        );
    }
    Ok(())
}
