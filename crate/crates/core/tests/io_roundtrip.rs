use std::collections::BTreeMap;
use std::fs;
use std::sync::Arc;

use error_align::analysis::{PairwiseScoreTable, ScoreRow};
use error_align::domain::{
    ConfidenceTable, CountMatrix, LabelVocabulary, MatrixKind, ProbVector, RepresentationMatrix,
};
use error_align::io;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn large_representation_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows: BTreeMap<String, Vec<f64>> = (0..40)
        .map(|i| {
            let row = (0..512)
                .map(|_| (rng.random::<f64>() - 0.5) * 10f64.powi(rng.random_range(-8..8)))
                .collect();
            (format!("n{i}"), row)
        })
        .collect();
    let x = RepresentationMatrix::new("X", rows).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    io::write_atomic(&path, &io::representations_to_csv(&x)).unwrap();
    assert_eq!(io::load_representations(&path, "X").unwrap(), x);
}

#[test]
fn confidence_roundtrip() {
    let vocab = LabelVocabulary::new(["a", "b", "c", "d"]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let entries = (0..30)
        .map(|i| {
            let w: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            (format!("i{i:02}"), ProbVector::normalize(w).unwrap())
        })
        .collect();
    let table = ConfidenceTable::new("S", 4, entries).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    fs::write(&path, io::confidences_to_csv(&table, &vocab)).unwrap();
    let loaded = io::load_confidences(&path, "S", &vocab).unwrap();
    for (id, p) in table.entries() {
        let q = loaded.table.get(id).unwrap();
        for (x, y) in p.values().iter().zip(q.values()) {
            // a row already summing to 1 within 1e-9 may be renormalized by one ulp
            assert!((x - y).abs() <= 4.0 * f64::EPSILON);
        }
    }
}

#[test]
fn score_table_roundtrip() {
    let rows = vec![
        ScoreRow {
            domain: "d, with comma".into(),
            system_a: "m1".into(),
            system_b: "m2".into(),
            metric: "ma".into(),
            value: Some(-0.1 / 3.0),
            reason: None,
            support: 7,
        },
        ScoreRow {
            domain: "d, with comma".into(),
            system_a: "m1".into(),
            system_b: "m2".into(),
            metric: "ec".into(),
            value: None,
            reason: Some("p_exp=1".into()),
            support: 3,
        },
        ScoreRow {
            domain: "e".into(),
            system_a: "m2".into(),
            system_b: "m1".into(),
            metric: "cka".into(),
            value: Some(1e-300),
            reason: None,
            support: 10,
        },
    ];
    let table = PairwiseScoreTable::new(rows).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    fs::write(&path, io::scores_to_csv(&table)).unwrap();
    assert_eq!(io::load_scores(&path).unwrap(), table);
}

#[test]
fn confusion_and_labels_roundtrip() {
    let vocab = Arc::new(LabelVocabulary::new(["x", "y", "z"]).unwrap());
    let m = CountMatrix::from_rows(&[vec![0, 4, 1], vec![2, 0, 0], vec![9, 3, 0]], MatrixKind::Confusion).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    fs::write(&path, io::confusion_to_csv(&m, &vocab)).unwrap();
    let loaded = io::load_confusion(&path, &vocab).unwrap();
    assert_eq!(loaded.matrix, m);
    assert_eq!(loaded.dropped_diagonal, 0);

    let labels: BTreeMap<String, usize> = [("q1".to_string(), 2), ("q0".to_string(), 0)].into_iter().collect();
    let path = dir.path().join("p.csv");
    fs::write(&path, io::labels_to_csv(&labels, &vocab)).unwrap();
    assert_eq!(io::load_predictions(&path, "P", &vocab).unwrap().entries(), &labels);
}

#[test]
fn confidence_tolerances() {
    let vocab = LabelVocabulary::new(["a", "b"]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    fs::write(&path, "instance_id,a,b\ni1,0.5000004,0.5\n").unwrap();
    let loaded = io::load_confidences(&path, "S", &vocab).unwrap();
    assert_eq!(loaded.renormalized, 0);
    assert!((loaded.table.get("i1").unwrap().values().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    fs::write(&path, "instance_id,a,b\ni1,0.4,0.5\n").unwrap();
    assert!(io::load_confidences(&path, "S", &vocab).is_err());
}
