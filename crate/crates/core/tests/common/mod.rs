//! Golden-file helpers shared by the CLI and acceptance test targets.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use error_align::cli;

pub fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

pub fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

pub fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(
        std::iter::once("error-align").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub fn check_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(
        expected == actual,
        "{name} differs from golden\n--- expected\n{expected}\n--- actual\n{actual}"
    );
}

pub fn golden(name: &str, args: &[&str]) {
    let (code, out, err) = run(args);
    assert_eq!(code, 0, "{name}: {err}");
    check_golden(name, &out);
}

/// Every golden case, shared with the acceptance target.
pub fn run_all() {
    let truth = fixture("truth.csv");
    let (m1, m2) = (fixture("m1.csv"), fixture("m2.csv"));
    let pair = [
        "--truth", &truth, "--a", &m1, "--b", &m2, "--a-id", "m1", "--b-id", "m2",
    ];
    for metric in ["ec", "ma", "cles"] {
        let mut args = vec!["score", "--metric", metric];
        args.extend(pair);
        golden(&format!("score_{metric}.csv"), &args);
    }
    let (c1, c2) = (fixture("m1_conf.csv"), fixture("m2_conf.csv"));
    for metric in ["soc", "soce"] {
        let mut args = vec!["score", "--metric", metric, "--a-conf", &c1, "--b-conf", &c2];
        args.extend(pair);
        golden(&format!("score_{metric}.csv"), &args);
    }
    let (r1, r2) = (fixture("m1_repr.csv"), fixture("m2_repr.csv"));
    let mut args = vec!["score", "--metric", "cka", "--a-repr", &r1, "--b-repr", &r2];
    args.extend(pair);
    golden("score_cka.csv", &args);
    let (ca, cb) = (fixture("confusion_a.csv"), fixture("confusion_b.csv"));
    golden(
        "score_cles_confusion.csv",
        &[
            "score",
            "--metric",
            "cles",
            "--a-confusion",
            &ca,
            "--b-confusion",
            &cb,
            "--domain",
            "historical",
        ],
    );

    let manifest = fixture("manifest.toml");
    let all = "ec,ma,cles,soc,soce,cka";
    golden(
        "pairwise.csv",
        &["pairwise", "--manifest", &manifest, "--metrics", all, "--jobs", "1"],
    );
    golden(
        "pairwise.csv",
        &["pairwise", "--manifest", &manifest, "--metrics", all, "--jobs", "4"],
    );

    let scores = fixture("simpson/scores.csv");
    let families = fixture("simpson/manifest.toml");
    golden("correlate.csv", &["correlate", &scores]);
    golden(
        "correlate_global.csv",
        &["correlate", &scores, "--global", "--pairs", "ma:cles"],
    );
    golden(
        "correlate_log_ma_exclude.csv",
        &[
            "correlate",
            &scores,
            "--per-domain",
            "--log-ma",
            "--pairs",
            "ma:cles",
            "--manifest",
            &families,
            "--exclude-family",
            "human",
        ],
    );
    golden("zscore.csv", &["zscore", "--scores", &scores, "--manifest", &families]);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scenario");
    let (code, _, err) = run(&[
        "synth",
        "--preset",
        "dual-error-agreeing",
        "--n",
        "40",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    for file in ["truth.csv", "a.csv", "b.csv", "manifest.toml"] {
        check_golden(&format!("synth_{file}"), &fs::read_to_string(out.join(file)).unwrap());
    }
    // the emitted manifest is directly usable
    golden(
        "synth_pairwise.csv",
        &[
            "pairwise",
            "--manifest",
            out.join("manifest.toml").to_str().unwrap(),
            "--metrics",
            "ec,ma,cles",
        ],
    );
}
