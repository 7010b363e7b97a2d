//! Per-algorithm detection scores.
//!
//! Scores are kept in canonical orientation: a higher score means the
//! sample looks more bona fide. Files declaring `higher_is_attack` are
//! negated on load.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partition::{Partition, Subset};
use crate::IdSet;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed score file at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("duplicate score for sample `{0}`")]
    DuplicateSample(String),
    #[error("non-finite score for sample `{0}`")]
    NonFiniteScore(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    #[serde(rename = "higher_is_bonafide")]
    HigherIsBonaFide,
    #[serde(rename = "higher_is_attack")]
    HigherIsAttack,
}

impl Orientation {
    pub fn token(self) -> &'static str {
        match self {
            Orientation::HigherIsBonaFide => "higher_is_bonafide",
            Orientation::HigherIsAttack => "higher_is_attack",
        }
    }
}

impl FromStr for Orientation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "higher_is_bonafide" => Ok(Orientation::HigherIsBonaFide),
            "higher_is_attack" => Ok(Orientation::HigherIsAttack),
            other => Err(format!("unknown orientation `{other}`")),
        }
    }
}

/// One algorithm's score per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub algorithm_id: String,
    pub orientation: Orientation,
    pub scores: BTreeMap<String, f64>,
}

impl ScoreSet {
    /// Validates finiteness and returns the set in canonical orientation.
    pub fn new(
        algorithm_id: impl Into<String>,
        orientation: Orientation,
        scores: BTreeMap<String, f64>,
    ) -> Result<Self, ScoreError> {
        if let Some((id, _)) = scores.iter().find(|(_, s)| !s.is_finite()) {
            return Err(ScoreError::NonFiniteScore(id.clone()));
        }
        Ok(ScoreSet {
            algorithm_id: algorithm_id.into(),
            orientation,
            scores,
        }
        .canonicalize())
    }

    pub fn canonicalize(mut self) -> Self {
        if self.orientation == Orientation::HigherIsAttack {
            for s in self.scores.values_mut() {
                *s = -*s;
            }
            self.orientation = Orientation::HigherIsBonaFide;
        }
        self
    }

    pub fn get(&self, sample_id: &str) -> Option<f64> {
        self.scores.get(sample_id).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn ids(&self) -> IdSet {
        self.scores.keys().cloned().collect()
    }

    /// Ids of `ids` without a score, in ascending order.
    pub fn missing<'a>(&self, ids: impl IntoIterator<Item = &'a String>) -> Vec<String> {
        ids.into_iter()
            .filter(|id| !self.scores.contains_key(id.as_str()))
            .cloned()
            .collect()
    }

    /// Serializes in the score CSV format, rows sorted by sample id.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# algorithm={} orientation={}\nsample_id,score\n",
            self.algorithm_id,
            self.orientation.token()
        );
        for (id, s) in &self.scores {
            let _ = writeln!(out, "{id},{s}");
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScoreError> {
        crate::io::write_atomic(path.as_ref(), self.to_csv().as_bytes())?;
        Ok(())
    }
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<ScoreSet, ScoreError> {
    read_scores(std::fs::File::open(path)?)
}

fn malformed(line: usize, reason: impl Into<String>) -> ScoreError {
    ScoreError::MalformedRow {
        line,
        reason: reason.into(),
    }
}

pub fn read_scores<R: Read>(reader: R) -> Result<ScoreSet, ScoreError> {
    let mut lines = BufReader::new(reader).lines();

    let meta = lines.next().ok_or_else(|| malformed(1, "missing metadata line"))??;
    let meta = meta
        .strip_prefix('#')
        .ok_or_else(|| malformed(1, "first line must start with `#`"))?;
    let (mut algorithm, mut orientation) = (None, None);
    for token in meta.split_whitespace() {
        match token.split_once('=') {
            Some(("algorithm", v)) if !v.is_empty() => algorithm = Some(v.to_string()),
            Some(("orientation", v)) => orientation = Some(v.parse::<Orientation>().map_err(|e| malformed(1, e))?),
            _ => return Err(malformed(1, format!("unexpected metadata `{token}`"))),
        }
    }
    let algorithm = algorithm.ok_or_else(|| malformed(1, "missing algorithm"))?;
    let orientation = orientation.ok_or_else(|| malformed(1, "missing orientation"))?;

    let header = lines.next().ok_or_else(|| malformed(2, "missing header"))??;
    if header.trim_end() != "sample_id,score" {
        return Err(malformed(2, "header must be `sample_id,score`"));
    }

    let mut scores = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 3;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (id, value) = line
            .split_once(',')
            .ok_or_else(|| malformed(line_no, "expected `sample_id,score`"))?;
        let id = id.trim();
        if id.is_empty() || value.contains(',') {
            return Err(malformed(line_no, "expected `sample_id,score`"));
        }
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| malformed(line_no, format!("`{value}` is not a number")))?;
        if !value.is_finite() {
            return Err(ScoreError::NonFiniteScore(id.to_string()));
        }
        if scores.insert(id.to_string(), value).is_some() {
            return Err(ScoreError::DuplicateSample(id.to_string()));
        }
    }
    ScoreSet::new(algorithm, orientation, scores)
}

/// Ids of the partition subset that have no score.
pub fn check_coverage(scoreset: &ScoreSet, partition: &Partition, subset: Subset) -> Vec<String> {
    scoreset.missing(partition.subset(subset))
}
