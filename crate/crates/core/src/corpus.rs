//! Trace corpora on disk and the evaluation report.
//!
//! A corpus directory holds `<label>_<n>.trace` files plus `manifest.txt`,
//! one `<file> <label>` pair per line. Labels are either a static letter
//! (`A`..`Y` without `J`) or a word class name (`hello`, `J`, `none`, ...).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::calibration::GloveCalibration;
use crate::glovesim::{read_trace, synthesize, write_trace, RawSample, SensorProfile, TraceReadError};
use crate::recognition::{build_code_map, Emission, EmissionKind};
use crate::session::{Session, SessionSetup};
use crate::templates::{letter_script, static_letters, word_corpus, CorpusSpec, TemplateError};
use crate::wordmodel::WordLabel;

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no {MANIFEST_FILE} in {0}")]
    MissingManifest(PathBuf),
    #[error("manifest line {line}: expected `<file> <label>`")]
    ManifestSyntax { line: usize },
    #[error("unknown label {0:?} in manifest")]
    UnknownLabel(String),
    #[error("corpus is empty")]
    Empty,
    #[error("{path}: {source}")]
    Trace { path: PathBuf, source: TraceReadError },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// What a corpus trace is supposed to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expected {
    Letter(char),
    Word(WordLabel),
}

impl Expected {
    pub fn parse(label: &str) -> Option<Expected> {
        if let Ok(w) = label.parse::<WordLabel>() {
            return Some(Expected::Word(w));
        }
        let mut chars = label.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if build_code_map().code_for(c).is_some() => Some(Expected::Letter(c)),
            _ => None,
        }
    }

    /// The label this trace was judged as, given everything the session emitted.
    /// Letter traces are judged by their last alphabet emission, word traces
    /// by their last word emission; no matching emission reads as `none`.
    pub fn judge(&self, emissions: &[Emission]) -> String {
        let kind = match self {
            Expected::Letter(_) => EmissionKind::Alphabet,
            Expected::Word(_) => EmissionKind::Word,
        };
        emissions
            .iter()
            .rev()
            .find(|e| e.kind == kind)
            .map_or_else(|| WordLabel::None.name().to_string(), |e| e.text.clone())
    }
}

impl fmt::Display for Expected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expected::Letter(c) => write!(f, "{c}"),
            Expected::Word(w) => write!(f, "{w}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub file: PathBuf,
    pub expected: Expected,
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(file), Some(label), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(CorpusError::ManifestSyntax { line: i + 1 });
        };
        let expected = Expected::parse(label).ok_or_else(|| CorpusError::UnknownLabel(label.to_string()))?;
        out.push(ManifestEntry {
            file: file.into(),
            expected,
        });
    }
    Ok(out)
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestEntry>, CorpusError> {
    let path = dir.join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(CorpusError::MissingManifest(dir.to_path_buf()));
    }
    parse_manifest(&fs::read_to_string(path)?)
}

pub fn read_corpus(dir: &Path) -> Result<Vec<(Expected, Vec<RawSample>)>, CorpusError> {
    let entries = read_manifest(dir)?;
    if entries.is_empty() {
        return Err(CorpusError::Empty);
    }
    entries
        .into_iter()
        .map(|e| {
            let path = dir.join(&e.file);
            let file = fs::File::open(&path)?;
            let trace = read_trace(BufReader::new(file)).map_err(|source| CorpusError::Trace { path, source })?;
            Ok((e.expected, trace))
        })
        .collect()
}

/// Writes traces as `<label>_<n>.trace` and the manifest listing them.
pub fn write_corpus(dir: &Path, traces: &[(Expected, Vec<RawSample>)]) -> Result<(), CorpusError> {
    fs::create_dir_all(dir)?;
    let mut counters: BTreeMap<Expected, usize> = BTreeMap::new();
    let mut manifest = String::new();
    for (expected, trace) in traces {
        let n = counters.entry(*expected).or_default();
        let name = format!("{expected}_{n}.trace");
        *n += 1;
        write_trace(io::BufWriter::new(fs::File::create(dir.join(&name))?), trace)?;
        manifest.push_str(&format!("{name} {expected}\n"));
    }
    fs::write(dir.join(MANIFEST_FILE), manifest)?;
    Ok(())
}

/// `per_letter` holds of every static letter, each with its own noise seed.
pub fn alphabet_corpus(
    profile: &SensorProfile,
    per_letter: usize,
    hold_ms: u64,
    rate_hz: f64,
    seed: u64,
) -> Result<Vec<(Expected, Vec<RawSample>)>, CorpusError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for letter in static_letters() {
        let script = letter_script(letter, hold_ms)?;
        for _ in 0..per_letter {
            let p = profile.clone().with_seed(rng.random());
            out.push((
                Expected::Letter(letter),
                synthesize(&script, &p, rate_hz).map_err(TemplateError::from)?,
            ));
        }
    }
    Ok(out)
}

pub fn words_corpus(spec: &CorpusSpec) -> Result<Vec<(Expected, Vec<RawSample>)>, CorpusError> {
    Ok(word_corpus(spec)?
        .into_iter()
        .map(|(label, trace)| (Expected::Word(label), trace))
        .collect())
}

/// Replays one trace through a fresh running session.
pub fn replay(setup: &SessionSetup, cal: GloveCalibration, trace: &[RawSample]) -> Vec<Emission> {
    let mut session = Session::running(setup.clone(), cal);
    let mut out: Vec<Emission> = trace
        .iter()
        .filter_map(|s| session.push_sample(s).expect("session is running"))
        .collect();
    out.extend(session.finish());
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LabelStats {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

impl LabelStats {
    pub fn precision(&self) -> f64 {
        ratio(self.true_pos, self.true_pos + self.false_pos)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.true_pos, self.true_pos + self.false_neg)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub per_label: BTreeMap<String, LabelStats>,
    pub correct: usize,
    pub n: usize,
}

impl EvalReport {
    pub fn record(&mut self, expected: &str, predicted: &str) {
        self.n += 1;
        if expected == predicted {
            self.correct += 1;
            self.per_label.entry(expected.to_string()).or_default().true_pos += 1;
        } else {
            self.per_label.entry(expected.to_string()).or_default().false_neg += 1;
            self.per_label.entry(predicted.to_string()).or_default().false_pos += 1;
        }
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.correct, self.n)
    }

    pub fn recall_of(&self, label: &str) -> f64 {
        self.per_label.get(label).map_or(0.0, LabelStats::recall)
    }

    /// Machine-readable summary, `EVAL;acc=<x>;n=<n>`.
    pub fn summary_line(&self) -> String {
        format!("EVAL;acc={:.4};n={}", self.accuracy(), self.n)
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>9} {:>9}", "label", "precision", "recall")?;
        for (label, s) in &self.per_label {
            writeln!(f, "{label:<10} {:>9.3} {:>9.3}", s.precision(), s.recall())?;
        }
        write!(f, "{}", self.summary_line())
    }
}

/// Replays every trace and scores the judged label against the manifest.
pub fn evaluate(
    corpus: &[(Expected, Vec<RawSample>)],
    setup: &SessionSetup,
    cal: GloveCalibration,
) -> Result<EvalReport, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut report = EvalReport::default();
    for (expected, trace) in corpus {
        let predicted = expected.judge(&replay(setup, cal, trace));
        report.record(&expected.to_string(), &predicted);
    }
    Ok(report)
}
