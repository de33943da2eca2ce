//! File formats: label, confidence, representation and confusion-matrix CSVs,
//! score/report CSVs, and the run manifest.
//!
//! All CSVs are UTF-8, comma-separated, with a header row; CRLF and LF line
//! endings are both accepted. Reals are written with 17 significant digits so
//! every value survives a write/read round trip.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::{CorrelationReport, FamilyMap, PairwiseScoreTable, ScoreRow, SystemInput, ZScoreRow};
use crate::domain::{
    ConfidenceTable, CountMatrix, GroundTruth, LabelVocabulary, MatrixKind, ProbVector, RepresentationMatrix, SystemRun,
};
use crate::error::{AlignError, Result};

/// Rows whose sum is off by at most this much are silently renormalized.
pub const SUM_SILENT_TOLERANCE: f64 = 1e-6;
/// Rows off by more than this are rejected; in between they are renormalized with a warning.
pub const SUM_REJECT_TOLERANCE: f64 = 1e-2;

/// Formats a real with 17 significant digits, locale-independent. Plain
/// decimal notation for exponents in `-5..=15`, scientific otherwise.
pub fn format_real(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let v = if v == 0.0 { 0.0 } else { v };
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    if (0..=15).contains(&exp) {
        let split = exp as usize + 1;
        format!("{sign}{}.{}", &digits[..split], &digits[split..])
    } else if (-5..0).contains(&exp) {
        format!("{sign}0.{}{digits}", "0".repeat((-exp - 1) as usize))
    } else {
        format!("{sign}{mantissa}e{exp}")
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AlignError + '_ {
    move |source| AlignError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `contents` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let out_err = |message: String| AlignError::Output {
        path: path.to_path_buf(),
        message,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| out_err(e.to_string()))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| out_err(e.to_string()))?;
    tmp.flush().map_err(|e| out_err(e.to_string()))?;
    tmp.persist(path).map_err(|e| out_err(e.error.to_string()))?;
    Ok(())
}

struct CsvTable {
    header: Vec<String>,
    /// (line number, fields)
    rows: Vec<(u64, Vec<String>)>,
}

fn read_csv(path: &Path) -> Result<CsvTable> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| AlignError::parse(path, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(String::is_empty) {
        return Err(AlignError::parse(path, 1, "missing header row"));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            AlignError::parse(path, line, e.to_string())
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(AlignError::parse(
                path,
                line,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(CsvTable { header, rows })
}

fn expect_header(path: &Path, header: &[String], expected: &[&str]) -> Result<()> {
    if header != expected {
        return Err(AlignError::parse(
            path,
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), header.join(",")),
        ));
    }
    Ok(())
}

/// `instance_id,label` rows with unique ids.
fn read_labels(path: &Path) -> Result<Vec<(u64, String, String)>> {
    let table = read_csv(path)?;
    expect_header(path, &table.header, &["instance_id", "label"])?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, mut fields) in table.rows {
        let label = fields.pop().expect("two fields");
        let id = fields.pop().expect("two fields");
        if id.is_empty() || label.is_empty() {
            return Err(AlignError::parse(path, line, "empty instance_id or label"));
        }
        if !seen.insert(id.clone()) {
            return Err(AlignError::parse(path, line, format!("duplicate instance_id `{id}`")));
        }
        out.push((line, id, label));
    }
    Ok(out)
}

fn resolve_labels(
    path: &Path,
    vocab: &LabelVocabulary,
    rows: Vec<(u64, String, String)>,
) -> Result<BTreeMap<String, usize>> {
    rows.into_iter()
        .map(|(line, id, label)| match vocab.index_of(&label) {
            Some(i) => Ok((id, i)),
            None => Err(AlignError::parse(path, line, format!("unknown label `{label}`"))),
        })
        .collect()
}

/// Loads ground truth. The vocabulary is the sorted union of the labels in the
/// file and `declared`.
pub fn load_truth(path: &Path, declared: &[String]) -> Result<GroundTruth> {
    let rows = read_labels(path)?;
    let vocab = LabelVocabulary::from_union(rows.iter().map(|r| r.2.clone()).chain(declared.iter().cloned()))
        .map_err(|e| AlignError::input(path, e.to_string()))?;
    let vocab = Arc::new(vocab);
    let entries = resolve_labels(path, &vocab, rows)?;
    GroundTruth::from_indices(vocab, entries)
}

/// Loads one system's predictions; labels outside `vocab` are errors.
pub fn load_predictions(path: &Path, system_id: &str, vocab: &Arc<LabelVocabulary>) -> Result<SystemRun> {
    let rows = read_labels(path)?;
    let entries = resolve_labels(path, vocab, rows)?;
    SystemRun::from_indices(system_id, Arc::clone(vocab), entries)
}

/// `instance_id,label` CSV for a truth or prediction map.
pub fn labels_to_csv(entries: &BTreeMap<String, usize>, vocab: &LabelVocabulary) -> String {
    let mut out = String::from("instance_id,label\n");
    for (id, &class) in entries {
        out.push_str(&csv_line(&[id, vocab.label(class)]));
    }
    out
}

fn csv_line(fields: &[&str]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(fields).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfidences {
    pub table: ConfidenceTable,
    /// Rows renormalized with a warning (sum off by more than 1e-6).
    pub renormalized: usize,
}

/// Loads `instance_id,<class>...` confidences; class columns are matched to
/// the vocabulary by name.
pub fn load_confidences(path: &Path, system_id: &str, vocab: &LabelVocabulary) -> Result<LoadedConfidences> {
    let table = read_csv(path)?;
    if table.header.first().map(String::as_str) != Some("instance_id") {
        return Err(AlignError::parse(path, 1, "first column must be `instance_id`"));
    }
    let mut columns = Vec::with_capacity(vocab.len());
    let mut seen = BTreeSet::new();
    for name in &table.header[1..] {
        let idx = vocab
            .index_of(name)
            .ok_or_else(|| AlignError::parse(path, 1, format!("unknown class column `{name}`")))?;
        if !seen.insert(idx) {
            return Err(AlignError::parse(path, 1, format!("duplicate class column `{name}`")));
        }
        columns.push(idx);
    }
    if columns.len() != vocab.len() {
        let missing: Vec<&str> = (0..vocab.len())
            .filter(|i| !seen.contains(i))
            .map(|i| vocab.label(i))
            .collect();
        return Err(AlignError::parse(
            path,
            1,
            format!("missing class columns: {}", missing.join(", ")),
        ));
    }

    let mut entries = BTreeMap::new();
    let mut renormalized = 0;
    for (line, fields) in table.rows {
        let id = fields[0].clone();
        let mut values = vec![0.0; vocab.len()];
        for (cell, &idx) in fields[1..].iter().zip(&columns) {
            let v: f64 = cell
                .parse()
                .map_err(|_| AlignError::parse(path, line, format!("non-numeric cell `{cell}`")))?;
            if !v.is_finite() || v < 0.0 {
                return Err(AlignError::parse(path, line, format!("invalid probability `{cell}`")));
            }
            values[idx] = v;
        }
        let sum: f64 = values.iter().sum();
        let off = (sum - 1.0).abs();
        if off > SUM_REJECT_TOLERANCE {
            return Err(AlignError::parse(path, line, format!("probabilities sum to {sum}")));
        }
        if off > SUM_SILENT_TOLERANCE {
            log::warn!("{}:{line}: probabilities sum to {sum}; renormalizing", path.display());
            renormalized += 1;
        }
        let p = ProbVector::normalize(values).map_err(|e| AlignError::parse(path, line, e.to_string()))?;
        if entries.insert(id.clone(), p).is_some() {
            return Err(AlignError::parse(path, line, format!("duplicate instance_id `{id}`")));
        }
    }
    Ok(LoadedConfidences {
        table: ConfidenceTable::new(system_id, vocab.len(), entries)?,
        renormalized,
    })
}

/// `instance_id,<class>...` CSV in vocabulary order.
pub fn confidences_to_csv(table: &ConfidenceTable, vocab: &LabelVocabulary) -> String {
    let mut header = vec!["instance_id"];
    header.extend(vocab.labels().iter().map(String::as_str));
    let mut out = csv_line(&header);
    for (id, p) in table.entries() {
        let cells: Vec<String> = p.values().iter().map(|v| format_real(*v)).collect();
        let mut fields = vec![id.as_str()];
        fields.extend(cells.iter().map(String::as_str));
        out.push_str(&csv_line(&fields));
    }
    out
}

/// Loads `instance_id,f0,...,f{D-1}` activations.
pub fn load_representations(path: &Path, system_id: &str) -> Result<RepresentationMatrix> {
    let table = read_csv(path)?;
    if table.header.first().map(String::as_str) != Some("instance_id") || table.header.len() < 2 {
        return Err(AlignError::parse(path, 1, "expected header `instance_id,f0,...`"));
    }
    let mut rows = BTreeMap::new();
    for (line, fields) in table.rows {
        let values = fields[1..]
            .iter()
            .map(|c| {
                c.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| AlignError::parse(path, line, format!("non-numeric feature `{c}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if rows.insert(fields[0].clone(), values).is_some() {
            return Err(AlignError::parse(
                path,
                line,
                format!("duplicate instance_id `{}`", fields[0]),
            ));
        }
    }
    RepresentationMatrix::new(system_id, rows).map_err(|e| AlignError::input(path, e.to_string()))
}

pub fn representations_to_csv(x: &RepresentationMatrix) -> String {
    let mut out = String::from("instance_id");
    for d in 0..x.dim() {
        out.push_str(&format!(",f{d}"));
    }
    out.push('\n');
    for (id, row) in x.rows() {
        let cells: Vec<String> = row.iter().map(|v| format_real(*v)).collect();
        let mut fields = vec![id.as_str()];
        fields.extend(cells.iter().map(String::as_str));
        out.push_str(&csv_line(&fields));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfusion {
    pub matrix: CountMatrix,
    /// Counts removed from a nonzero diagonal (full confusion matrix input).
    pub dropped_diagonal: u64,
}

/// Class names from a confusion CSV header, for building a vocabulary when
/// no ground-truth file is available.
pub fn confusion_labels(path: &Path) -> Result<Vec<String>> {
    let table = read_csv(path)?;
    Ok(table.header[1..].to_vec())
}

/// Loads a square confusion CSV (rows = truth, columns = prediction), both
/// axes labelled by class name. A nonzero diagonal is zeroed with a warning.
pub fn load_confusion(path: &Path, vocab: &LabelVocabulary) -> Result<LoadedConfusion> {
    let table = read_csv(path)?;
    let c = vocab.len();
    let index = |name: &str, line: u64| {
        vocab
            .index_of(name)
            .ok_or_else(|| AlignError::parse(path, line, format!("unknown class `{name}`")))
    };
    let cols = table.header[1..]
        .iter()
        .map(|n| index(n, 1))
        .collect::<Result<Vec<usize>>>()?;
    if cols.len() != c || cols.iter().collect::<BTreeSet<_>>().len() != c {
        return Err(AlignError::parse(path, 1, "class columns do not match the vocabulary"));
    }
    if table.rows.len() != c {
        return Err(AlignError::input(
            path,
            format!("confusion matrix is not square: {} rows, {c} columns", table.rows.len()),
        ));
    }
    let mut matrix = CountMatrix::zeros(c, MatrixKind::Confusion);
    let mut seen_rows = BTreeSet::new();
    for (line, fields) in &table.rows {
        let r = index(&fields[0], *line)?;
        if !seen_rows.insert(r) {
            return Err(AlignError::parse(path, *line, format!("duplicate row `{}`", fields[0])));
        }
        for (cell, &col) in fields[1..].iter().zip(&cols) {
            let v: i64 = cell
                .parse()
                .map_err(|_| AlignError::parse(path, *line, format!("non-integer count `{cell}`")))?;
            if v < 0 {
                return Err(AlignError::parse(path, *line, format!("negative count `{cell}`")));
            }
            matrix.set(r, col, v as u64);
        }
    }
    let dropped_diagonal = matrix.zero_diagonal();
    if dropped_diagonal > 0 {
        log::warn!(
            "{}: nonzero diagonal; dropped {dropped_diagonal} correct predictions",
            path.display()
        );
    }
    Ok(LoadedConfusion {
        matrix,
        dropped_diagonal,
    })
}

pub fn confusion_to_csv(m: &CountMatrix, vocab: &LabelVocabulary) -> String {
    let mut header = vec!["truth\\pred"];
    header.extend(vocab.labels().iter().map(String::as_str));
    let mut out = csv_line(&header);
    for r in 0..m.dim() {
        let cells: Vec<String> = m.row(r).iter().map(u64::to_string).collect();
        let mut fields = vec![vocab.label(r)];
        fields.extend(cells.iter().map(String::as_str));
        out.push_str(&csv_line(&fields));
    }
    out
}

pub const SCORE_HEADER: [&str; 8] = [
    "domain", "system_a", "system_b", "metric", "value", "status", "reason", "support",
];

fn opt_real(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

fn status(defined: bool) -> &'static str {
    if defined {
        "ok"
    } else {
        "undefined"
    }
}

pub fn score_rows_to_csv<'a>(rows: impl IntoIterator<Item = &'a ScoreRow>) -> String {
    let mut out = csv_line(&SCORE_HEADER);
    for r in rows {
        let value = opt_real(r.value);
        let support = r.support.to_string();
        out.push_str(&csv_line(&[
            &r.domain,
            &r.system_a,
            &r.system_b,
            &r.metric,
            &value,
            status(r.value.is_some()),
            r.reason.as_deref().unwrap_or(""),
            &support,
        ]));
    }
    out
}

pub fn scores_to_csv(table: &PairwiseScoreTable) -> String {
    score_rows_to_csv(table.rows())
}

/// Reads a score CSV written by [`scores_to_csv`].
pub fn load_scores(path: &Path) -> Result<PairwiseScoreTable> {
    let table = read_csv(path)?;
    expect_header(path, &table.header, &SCORE_HEADER)?;
    let mut rows = Vec::with_capacity(table.rows.len());
    for (line, f) in table.rows {
        let value = if f[4].is_empty() {
            None
        } else {
            Some(
                f[4].parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| AlignError::parse(path, line, format!("invalid value `{}`", f[4])))?,
            )
        };
        match (f[5].as_str(), value.is_some()) {
            ("ok", true) | ("undefined", false) => {}
            _ => {
                return Err(AlignError::parse(
                    path,
                    line,
                    format!("status `{}` does not match value `{}`", f[5], f[4]),
                ))
            }
        }
        let support = f[7]
            .parse()
            .map_err(|_| AlignError::parse(path, line, format!("invalid support `{}`", f[7])))?;
        rows.push(ScoreRow {
            domain: f[0].clone(),
            system_a: f[1].clone(),
            system_b: f[2].clone(),
            metric: f[3].clone(),
            value,
            reason: (!f[6].is_empty()).then(|| f[6].clone()),
            support,
        });
    }
    PairwiseScoreTable::new(rows).map_err(|e| AlignError::input(path, e.to_string()))
}

pub const CORRELATION_HEADER: [&str; 10] = [
    "metric_x",
    "metric_y",
    "scope",
    "domain",
    "r",
    "status",
    "reason",
    "n",
    "dropped",
    "excluded_domains",
];

/// Which sections of a correlation report to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportSections {
    pub global: bool,
    pub per_domain: bool,
}

impl Default for ReportSections {
    fn default() -> Self {
        ReportSections {
            global: true,
            per_domain: true,
        }
    }
}

/// One `global` row, one `domain` row per domain, and one `average` row per
/// metric pair. `n` on the average row counts the domains averaged.
pub fn correlation_to_csv(report: &CorrelationReport, sections: ReportSections) -> String {
    let mut out = csv_line(&CORRELATION_HEADER);
    for e in &report.entries {
        let (x, y) = (e.pair.x.as_str(), e.pair.y.as_str());
        if sections.global {
            let g = &e.global;
            out.push_str(&csv_line(&[
                x,
                y,
                "global",
                "",
                &opt_real(g.r),
                status(g.r.is_some()),
                g.reason.as_deref().unwrap_or(""),
                &g.n.to_string(),
                &g.dropped.to_string(),
                "",
            ]));
        }
        if sections.per_domain {
            for (d, c) in &e.per_domain {
                out.push_str(&csv_line(&[
                    x,
                    y,
                    "domain",
                    d,
                    &opt_real(c.r),
                    status(c.r.is_some()),
                    c.reason.as_deref().unwrap_or(""),
                    &c.n.to_string(),
                    &c.dropped.to_string(),
                    "",
                ]));
            }
            let averaged = e.per_domain.len() - e.excluded_domains.len();
            out.push_str(&csv_line(&[
                x,
                y,
                "average",
                "",
                &opt_real(e.average),
                status(e.average.is_some()),
                if e.average.is_some() {
                    ""
                } else {
                    "no domain with defined r"
                },
                &averaged.to_string(),
                "",
                &e.excluded_domains.join(";"),
            ]));
        }
    }
    out
}

pub const ZSCORE_HEADER: [&str; 8] = [
    "domain",
    "system_a",
    "system_b",
    "family_pair",
    "metric",
    "z",
    "status",
    "reason",
];

pub fn zscores_to_csv(rows: &[ZScoreRow]) -> String {
    let mut out = csv_line(&ZSCORE_HEADER);
    for r in rows {
        out.push_str(&csv_line(&[
            &r.domain,
            &r.system_a,
            &r.system_b,
            &r.family_pair,
            &r.metric,
            &opt_real(r.z),
            status(r.z.is_some()),
            r.reason.as_deref().unwrap_or(""),
        ]));
    }
    out
}

/// One system entry in a run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSystem {
    pub id: String,
    pub family: String,
    pub predictions: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidences: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representations: Option<PathBuf>,
}

/// TOML run manifest:
///
/// ```toml
/// domain = "imagenet-a"
/// truth = "truth.csv"
/// labels = ["cat", "dog"]      # optional extra vocabulary
///
/// [[systems]]
/// id = "resnet50"
/// family = "CNN"
/// predictions = "resnet50.csv"
/// confidences = "resnet50_conf.csv"        # optional
/// representations = "resnet50_repr.csv"    # optional
/// ```
///
/// Relative paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub domain: String,
    pub truth: PathBuf,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    pub systems: Vec<ManifestSystem>,
}

impl RunManifest {
    pub fn families(&self) -> Result<FamilyMap> {
        let mut f = FamilyMap::default();
        for s in &self.systems {
            f.insert(&s.id, &s.family)?;
        }
        Ok(f)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| AlignError::Internal(e.to_string()))
    }
}

/// Parses a manifest, resolves its paths and checks that every file exists.
pub fn load_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut m: RunManifest = toml::from_str(&text).map_err(|e| AlignError::input(path, e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let resolve = |p: &mut PathBuf| -> Result<()> {
        if p.is_relative() {
            *p = base.join(&*p);
        }
        if !p.is_file() {
            return Err(AlignError::input(
                path,
                format!("referenced file {} does not exist", p.display()),
            ));
        }
        Ok(())
    };
    resolve(&mut m.truth)?;
    let mut ids = BTreeSet::new();
    for s in &mut m.systems {
        if !ids.insert(s.id.clone()) {
            return Err(AlignError::DuplicateSystem(s.id.clone()));
        }
        resolve(&mut s.predictions)?;
        if let Some(p) = s.confidences.as_mut() {
            resolve(p)?;
        }
        if let Some(p) = s.representations.as_mut() {
            resolve(p)?;
        }
    }
    Ok(m)
}

/// Loads the truth file and every system listed in a manifest.
pub fn load_manifest_inputs(m: &RunManifest) -> Result<(GroundTruth, Vec<SystemInput>)> {
    let truth = load_truth(&m.truth, &m.labels)?;
    let vocab = Arc::clone(truth.vocab());
    let systems = m
        .systems
        .iter()
        .map(|s| {
            let mut input = SystemInput::new(load_predictions(&s.predictions, &s.id, &vocab)?);
            if let Some(p) = &s.confidences {
                input.confidences = Some(load_confidences(p, &s.id, &vocab)?.table);
            }
            if let Some(p) = &s.representations {
                input.representations = Some(load_representations(p, &s.id)?);
            }
            Ok(input)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((truth, systems))
}
