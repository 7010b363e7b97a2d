//! ISO/IEC 30107-3 error rates.
//!
//! A sample is classified as an attack iff its canonical score is strictly
//! below the threshold. APCER is the share of attacks classified bona fide,
//! BPCER the share of bona fides classified as attacks. Rates always come
//! from integer counts, which travel with every [`OperatingPoint`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::{Label, Manifest};
use crate::scores::ScoreSet;
use crate::IdSet;

/// Default BPCER at which APCER is reported (0.2%).
pub const DEFAULT_TARGET_BPCER: f64 = 0.002;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{} evaluation samples have no score (first: `{}`)", .0.len(), .0[0])]
    MissingScores(Vec<String>),
    #[error("evaluation set contains no {0:?} samples")]
    EmptyClass(Label),
    #[error("sample `{0}` is not in the manifest")]
    UnknownSample(String),
    #[error("sample `{0}` is not an attack presentation")]
    NotAnAttack(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Attack,
    BonaFide,
}

pub fn decide(score: f64, threshold: f64) -> Decision {
    if score < threshold {
        Decision::Attack
    } else {
        Decision::BonaFide
    }
}

mod threshold_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(t: &f64, s: S) -> Result<S::Ok, S::Error> {
        if t.is_finite() {
            s.serialize_f64(*t)
        } else {
            s.collect_str(t)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(x) => Ok(x),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// A realizable classification of the evaluation set at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Infinite thresholds serialize as the strings `inf` / `-inf`.
    #[serde(with = "threshold_repr")]
    pub threshold: f64,
    pub apcer: f64,
    pub bpcer: f64,
    pub apce_count: usize,
    pub bf_error_count: usize,
    pub attack_count: usize,
    pub bona_fide_count: usize,
}

impl OperatingPoint {
    pub fn from_counts(
        threshold: f64,
        apce_count: usize,
        attack_count: usize,
        bf_error_count: usize,
        bona_fide_count: usize,
    ) -> Self {
        OperatingPoint {
            threshold,
            apcer: apce_count as f64 / attack_count as f64,
            bpcer: bf_error_count as f64 / bona_fide_count as f64,
            apce_count,
            bf_error_count,
            attack_count,
            bona_fide_count,
        }
    }

    pub fn apcer_percent(&self) -> String {
        format_percent(self.apce_count, self.attack_count)
    }

    pub fn bpcer_percent(&self) -> String {
        format_percent(self.bf_error_count, self.bona_fide_count)
    }
}

/// `count / total` as a percentage rounded half-up to two decimals, e.g. `1.81%`.
pub fn format_percent(count: usize, total: usize) -> String {
    assert!(total > 0, "percentage of an empty population");
    let (count, total) = (count as u128, total as u128);
    let hundredths = (count * 20_000 + total) / (2 * total);
    format!("{}.{:02}%", hundredths / 100, hundredths % 100)
}

/// DET sweep ordered by ascending threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetCurve {
    pub points: Vec<OperatingPoint>,
}

/// Scores of an evaluation set split by class.
#[derive(Debug, Clone)]
pub struct LabeledScores {
    pub attacks: Vec<(String, f64)>,
    pub bona_fides: Vec<(String, f64)>,
}

impl LabeledScores {
    pub fn collect(scoreset: &ScoreSet, manifest: &Manifest, ids: &IdSet) -> Result<Self, MetricsError> {
        let mut attacks = Vec::new();
        let mut bona_fides = Vec::new();
        let mut missing = Vec::new();
        for id in ids {
            let rec = manifest
                .get(id)
                .ok_or_else(|| MetricsError::UnknownSample(id.clone()))?;
            let Some(score) = scoreset.get(id) else {
                missing.push(id.clone());
                continue;
            };
            if rec.is_attack() {
                attacks.push((id.clone(), score));
            } else {
                bona_fides.push((id.clone(), score));
            }
        }
        if !missing.is_empty() {
            return Err(MetricsError::MissingScores(missing));
        }
        if attacks.is_empty() {
            return Err(MetricsError::EmptyClass(Label::Attack));
        }
        if bona_fides.is_empty() {
            return Err(MetricsError::EmptyClass(Label::BonaFide));
        }
        Ok(LabeledScores { attacks, bona_fides })
    }

    pub fn at(&self, threshold: f64) -> OperatingPoint {
        let apce = self
            .attacks
            .iter()
            .filter(|(_, s)| decide(*s, threshold) == Decision::BonaFide)
            .count();
        let bf_err = self
            .bona_fides
            .iter()
            .filter(|(_, s)| decide(*s, threshold) == Decision::Attack)
            .count();
        OperatingPoint::from_counts(threshold, apce, self.attacks.len(), bf_err, self.bona_fides.len())
    }

    /// Candidate thresholds: `-inf`, one point strictly between each pair of
    /// consecutive distinct scores, and `+inf`.
    pub fn candidate_thresholds(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .attacks
            .iter()
            .chain(&self.bona_fides)
            .map(|(_, s)| *s)
            .collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        let mut out = Vec::with_capacity(all.len() + 1);
        out.push(f64::NEG_INFINITY);
        out.extend(all.windows(2).map(|w| separating_midpoint(w[0], w[1])));
        out.push(f64::INFINITY);
        out
    }

    pub fn det(&self) -> DetCurve {
        let mut att: Vec<f64> = self.attacks.iter().map(|(_, s)| *s).collect();
        let mut bf: Vec<f64> = self.bona_fides.iter().map(|(_, s)| *s).collect();
        att.sort_by(f64::total_cmp);
        bf.sort_by(f64::total_cmp);
        let (n_att, n_bf) = (att.len(), bf.len());

        let mut points = Vec::with_capacity(n_att + n_bf + 1);
        points.push(OperatingPoint::from_counts(f64::NEG_INFINITY, n_att, n_att, 0, n_bf));
        // (i, j) = number of attack / bona fide scores at or below the current value.
        let (mut i, mut j) = (0usize, 0usize);
        while i < n_att || j < n_bf {
            let v = match (att.get(i), bf.get(j)) {
                (Some(a), Some(b)) => a.min(*b),
                (Some(a), None) => *a,
                (None, Some(b)) => *b,
                (None, None) => unreachable!(),
            };
            while i < n_att && att[i] == v {
                i += 1;
            }
            while j < n_bf && bf[j] == v {
                j += 1;
            }
            let next = match (att.get(i), bf.get(j)) {
                (Some(a), Some(b)) => Some(a.min(*b)),
                (Some(a), None) => Some(*a),
                (None, Some(b)) => Some(*b),
                (None, None) => None,
            };
            let threshold = match next {
                Some(n) => separating_midpoint(v, n),
                None => f64::INFINITY,
            };
            points.push(OperatingPoint::from_counts(threshold, n_att - i, n_att, j, n_bf));
        }
        DetCurve { points }
    }
}

/// A threshold `m` with `lo < m <= hi`, normally the midpoint.
fn separating_midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m > lo && m <= hi {
        m
    } else {
        hi
    }
}

/// Picks the point with the lowest APCER among those with BPCER at or below
/// `target_bpcer`; ties go to lower BPCER, then lower threshold.
pub fn select_operating_point(curve: &DetCurve, target_bpcer: f64) -> OperatingPoint {
    let mut best: Option<&OperatingPoint> = None;
    for p in curve.points.iter().filter(|p| p.bpcer <= target_bpcer) {
        let better = match best {
            None => true,
            Some(b) => (p.apce_count, p.bf_error_count) < (b.apce_count, b.bf_error_count),
        };
        if better {
            best = Some(p);
        }
    }
    *best.expect("the -inf point always has zero BPCER")
}

pub fn error_rates(
    scoreset: &ScoreSet,
    manifest: &Manifest,
    test_ids: &IdSet,
    threshold: f64,
) -> Result<OperatingPoint, MetricsError> {
    Ok(LabeledScores::collect(scoreset, manifest, test_ids)?.at(threshold))
}

pub fn det_curve(scoreset: &ScoreSet, manifest: &Manifest, test_ids: &IdSet) -> Result<DetCurve, MetricsError> {
    Ok(LabeledScores::collect(scoreset, manifest, test_ids)?.det())
}

/// APCER at a fixed BPCER (APCER at 0.2% BPCER by default).
pub fn apcer_at_bpcer(
    scoreset: &ScoreSet,
    manifest: &Manifest,
    test_ids: &IdSet,
    target_bpcer: f64,
) -> Result<OperatingPoint, MetricsError> {
    let curve = det_curve(scoreset, manifest, test_ids)?;
    Ok(select_operating_point(&curve, target_bpcer))
}

/// Attack samples classified bona fide at `threshold`.
pub fn apce_set(
    scoreset: &ScoreSet,
    manifest: &Manifest,
    test_ids: &IdSet,
    threshold: f64,
) -> Result<IdSet, MetricsError> {
    let labeled = LabeledScores::collect(scoreset, manifest, test_ids)?;
    Ok(labeled
        .attacks
        .into_iter()
        .filter(|(_, s)| decide(*s, threshold) == Decision::BonaFide)
        .map(|(id, _)| id)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakdownKey {
    Species,
    Material,
    VisualGroup,
}

impl BreakdownKey {
    pub const ALL: [BreakdownKey; 3] = [BreakdownKey::Species, BreakdownKey::Material, BreakdownKey::VisualGroup];

    pub fn token(self) -> &'static str {
        match self {
            BreakdownKey::Species => "species",
            BreakdownKey::Material => "material",
            BreakdownKey::VisualGroup => "visual_group",
        }
    }
}

/// APCE counts per key. Every key occurring among the manifest's attacks is
/// present, with zero when no error falls under it.
pub fn breakdown(apces: &IdSet, manifest: &Manifest, by: BreakdownKey) -> Result<BTreeMap<String, usize>, MetricsError> {
    let key_of = |id: &str| -> Option<String> {
        let pai = manifest.get(id)?.pai.as_ref()?;
        Some(match by {
            BreakdownKey::Species => pai.species.clone(),
            BreakdownKey::Material => pai.material.token().to_string(),
            BreakdownKey::VisualGroup => pai.visual_group.token().to_string(),
        })
    };
    let mut counts: BTreeMap<String, usize> = manifest
        .attacks()
        .filter_map(|r| key_of(&r.sample_id))
        .map(|k| (k, 0))
        .collect();
    for id in apces {
        if !manifest.contains(id) {
            return Err(MetricsError::UnknownSample(id.clone()));
        }
        let key = key_of(id).ok_or_else(|| MetricsError::NotAnAttack(id.clone()))?;
        *counts.entry(key).or_default() += 1;
    }
    Ok(counts)
}
