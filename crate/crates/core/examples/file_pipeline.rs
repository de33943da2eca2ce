//! End to end through files: generate a scenario on disk, score it from its
//! manifest, write and re-read the score table, and run the CLI on the same
//! files.

use error_align::analysis::{pairwise_scores, parse_metric_list, ScoreOptions};
use error_align::io;

fn main() -> error_align::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| error_align::AlignError::Internal(e.to_string()))?;
    let out = dir.path().join("scenario");
    let mut stdout = std::io::stdout();
    let mut stderr = std::io::stderr();

    let synth = [
        "error-align",
        "synth",
        "--preset",
        "dual-error-disagreeing",
        "--n",
        "2000",
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(error_align::cli::run(synth, &mut stdout, &mut stderr), 0);
    println!("wrote {}", out.display());

    let manifest = io::load_manifest(&out.join("manifest.toml"))?;
    let (truth, systems) = io::load_manifest_inputs(&manifest)?;
    let table = pairwise_scores(
        &manifest.domain,
        &systems,
        &truth,
        &parse_metric_list("ec,ma,cles")?,
        ScoreOptions::default(),
    )?;
    let scores = out.join("scores.csv");
    io::write_atomic(&scores, &io::scores_to_csv(&table))?;
    assert_eq!(io::load_scores(&scores)?, table);
    print!("{}", io::scores_to_csv(&table));

    println!("\nsame thing through the CLI:");
    let manifest_path = out.join("manifest.toml");
    let pairwise = [
        "error-align",
        "pairwise",
        "--manifest",
        manifest_path.to_str().unwrap(),
        "--metrics",
        "ec,ma,cles",
    ];
    assert_eq!(error_align::cli::run(pairwise, &mut stdout, &mut stderr), 0);
    Ok(())
}
