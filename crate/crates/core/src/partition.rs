//! Baseline and leave-one-group-out (LOO) partitions.
//!
//! The baseline keeps every PAI species in all three sets, balances the
//! classes in training and validation, and keeps bona fide subjects of the
//! test set unseen. A LOO partition moves one whole PAI group into the test
//! set; the bona fide assignment depends only on the seed so it is shared
//! verbatim by every LOO partition built with that seed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::{Manifest, MaterialGroup, PaiTag, VisualGroup};
use crate::rng;
use crate::IdSet;

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("invalid partition spec: {0}")]
    InvalidSpec(String),
    #[error("cannot balance classes: {0}")]
    InfeasibleBalance(String),
    #[error("bona fide samples cannot be split into disjoint subject sets")]
    InfeasibleSubjectSplit,
    #[error("held-out group `{0}` covers every attack; nothing left to train on")]
    EmptyTrainingAttacks(PartitionKind),
    #[error("held-out group `{0}` has no samples in the manifest")]
    EmptyHoldout(PartitionKind),
    #[error("unknown partition group `{0}`")]
    UnknownGroup(String),
    #[error("sample `{0}` is not in the manifest")]
    UnknownSample(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Which protocol a partition follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PartitionKind {
    Baseline,
    VisualLoo(VisualGroup),
    AllOverlaysLoo,
    MaterialLoo(MaterialGroup),
}

impl PartitionKind {
    /// The nine leave-one-group-out experiments.
    pub fn all_loo() -> Vec<PartitionKind> {
        vec![
            PartitionKind::VisualLoo(VisualGroup::Fakefinger),
            PartitionKind::AllOverlaysLoo,
            PartitionKind::VisualLoo(VisualGroup::OverlayOpaque),
            PartitionKind::VisualLoo(VisualGroup::OverlayTransparent),
            PartitionKind::VisualLoo(VisualGroup::OverlaySemi),
            PartitionKind::MaterialLoo(MaterialGroup::G1),
            PartitionKind::MaterialLoo(MaterialGroup::G2),
            PartitionKind::MaterialLoo(MaterialGroup::G3),
            PartitionKind::MaterialLoo(MaterialGroup::G4),
        ]
    }

    pub fn is_loo(self) -> bool {
        self != PartitionKind::Baseline
    }

    /// Whether an attack with this PAI is held out for testing.
    pub fn holds_out(self, pai: &PaiTag) -> bool {
        match self {
            PartitionKind::Baseline => false,
            PartitionKind::VisualLoo(g) => pai.visual_group == g,
            PartitionKind::AllOverlaysLoo => pai.visual_group.is_overlay(),
            PartitionKind::MaterialLoo(g) => pai.material_group() == Some(g),
        }
    }

    /// Lowercase group token (`transparent`, `mat2`, ...); `baseline` for the baseline.
    pub fn group_token(self) -> &'static str {
        match self {
            PartitionKind::Baseline => "baseline",
            PartitionKind::VisualLoo(VisualGroup::Fakefinger) => "fakefinger",
            PartitionKind::VisualLoo(VisualGroup::OverlayOpaque) => "opaque",
            PartitionKind::VisualLoo(VisualGroup::OverlayTransparent) => "transparent",
            PartitionKind::VisualLoo(VisualGroup::OverlaySemi) => "semi",
            PartitionKind::AllOverlaysLoo => "overlay",
            PartitionKind::MaterialLoo(g) => g.token(),
        }
    }
}

impl fmt::Display for PartitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionKind::Baseline => f.write_str("baseline"),
            other => write!(f, "loo:{}", other.group_token()),
        }
    }
}

impl FromStr for PartitionKind {
    type Err = PartitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "baseline" {
            return Ok(PartitionKind::Baseline);
        }
        let group = s
            .strip_prefix("loo:")
            .ok_or_else(|| PartitionError::UnknownGroup(s.to_string()))?;
        let kind = match group {
            "fakefinger" => PartitionKind::VisualLoo(VisualGroup::Fakefinger),
            "opaque" => PartitionKind::VisualLoo(VisualGroup::OverlayOpaque),
            "transparent" => PartitionKind::VisualLoo(VisualGroup::OverlayTransparent),
            "semi" => PartitionKind::VisualLoo(VisualGroup::OverlaySemi),
            "overlay" => PartitionKind::AllOverlaysLoo,
            other => PartitionKind::MaterialLoo(
                other
                    .parse::<MaterialGroup>()
                    .map_err(|_| PartitionError::UnknownGroup(s.to_string()))?,
            ),
        };
        Ok(kind)
    }
}

impl Serialize for PartitionKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PartitionKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn default_pa_train_fraction() -> f64 {
    0.85
}

fn default_bf_fractions() -> [f64; 3] {
    [0.50, 0.15, 0.35]
}

/// Attack train/validation/test shares of the reference baseline (807/542/2,990 of 4,339).
fn default_baseline_pa_fractions() -> [f64; 3] {
    [807.0 / 4339.0, 542.0 / 4339.0, 2990.0 / 4339.0]
}

/// Share of all bona fides kept in the reference baseline test set (16,381 of 19,711).
fn default_baseline_bf_test_fraction() -> f64 {
    16381.0 / 19711.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub name: String,
    pub kind: PartitionKind,
    pub seed: u64,
    /// LOO only: share of non-held-out attacks used for training; the rest validates.
    #[serde(default = "default_pa_train_fraction")]
    pub pa_train_fraction: f64,
    /// LOO only: bona fide train/validation/test shares.
    #[serde(default = "default_bf_fractions")]
    pub bf_fractions: [f64; 3],
    /// Baseline only: attack train/validation/test shares.
    #[serde(default = "default_baseline_pa_fractions")]
    pub baseline_pa_fractions: [f64; 3],
    /// Baseline only: cap on the bona fide test set as a share of all bona fides.
    #[serde(default = "default_baseline_bf_test_fraction")]
    pub baseline_bf_test_fraction: f64,
}

impl PartitionSpec {
    pub fn new(kind: PartitionKind, seed: u64) -> Self {
        let name = match kind {
            PartitionKind::Baseline => "baseline".to_string(),
            other => format!("loo-{}", other.group_token()),
        };
        PartitionSpec {
            name,
            kind,
            seed,
            pa_train_fraction: default_pa_train_fraction(),
            bf_fractions: default_bf_fractions(),
            baseline_pa_fractions: default_baseline_pa_fractions(),
            baseline_bf_test_fraction: default_baseline_bf_test_fraction(),
        }
    }

    pub fn validate(&self) -> Result<(), PartitionError> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        let triple = |name: &str, t: &[f64; 3]| {
            if !t.iter().all(|x| open_unit(*x)) {
                return Err(PartitionError::InvalidSpec(format!("{name} must lie in (0,1)")));
            }
            if (t.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(PartitionError::InvalidSpec(format!("{name} must sum to 1")));
            }
            Ok(())
        };
        if !open_unit(self.pa_train_fraction) {
            return Err(PartitionError::InvalidSpec("pa_train_fraction must lie in (0,1)".into()));
        }
        if !open_unit(self.baseline_bf_test_fraction) {
            return Err(PartitionError::InvalidSpec(
                "baseline_bf_test_fraction must lie in (0,1)".into(),
            ));
        }
        triple("bf_fractions", &self.bf_fractions)?;
        triple("baseline_pa_fractions", &self.baseline_pa_fractions)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Validation,
    Test,
}

impl FromStr for Subset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Subset::Train),
            "validation" => Ok(Subset::Validation),
            "test" => Ok(Subset::Test),
            other => Err(format!("unknown subset `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub spec: PartitionSpec,
    pub train: IdSet,
    pub validation: IdSet,
    pub test: IdSet,
}

impl Partition {
    pub fn subset(&self, which: Subset) -> &IdSet {
        match which {
            Subset::Train => &self.train,
            Subset::Validation => &self.validation,
            Subset::Test => &self.test,
        }
    }

    pub fn subset_mut(&mut self, which: Subset) -> &mut IdSet {
        match which {
            Subset::Train => &mut self.train,
            Subset::Validation => &mut self.validation,
            Subset::Test => &mut self.test,
        }
    }

    /// Training and validation ids together.
    pub fn train_validation(&self) -> IdSet {
        self.train.union(&self.validation).cloned().collect()
    }

    pub fn all_ids(&self) -> IdSet {
        self.train
            .iter()
            .chain(&self.validation)
            .chain(&self.test)
            .cloned()
            .collect()
    }

    /// The part of `which` that is bona fide according to `manifest`.
    pub fn bona_fides(&self, which: Subset, manifest: &Manifest) -> IdSet {
        self.subset(which)
            .iter()
            .filter(|id| manifest.get(id).is_some_and(|r| !r.is_attack()))
            .cloned()
            .collect()
    }

    pub fn to_json(&self) -> Result<String, PartitionError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PartitionError> {
        crate::io::write_atomic(path.as_ref(), self.to_json()?.as_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PartitionError> {
        let text = std::fs::read_to_string(path)?;
        let p: Partition = serde_json::from_str(&text)?;
        p.spec.validate()?;
        Ok(p)
    }
}

/// Dispatches on `spec.kind`.
pub fn build_partition(manifest: &Manifest, spec: &PartitionSpec) -> Result<Partition, PartitionError> {
    match spec.kind {
        PartitionKind::Baseline => build_baseline(manifest, spec),
        _ => build_loo(manifest, spec),
    }
}

fn sorted_shuffled(mut ids: Vec<String>, seed: u64, label: &str) -> Vec<String> {
    ids.sort();
    rng::shuffle(&mut rng::stream(seed, label), &mut ids);
    ids
}

/// Per-species train/validation quotas for the baseline attack split.
///
/// Every species starts from the floor of its proportional share; species
/// with at least three samples get at least one sample in each set. The
/// remaining quota is handed out by largest fractional remainder, ties by
/// species name.
fn species_quotas(counts: &BTreeMap<String, usize>, fractions: [f64; 3]) -> BTreeMap<String, (usize, usize)> {
    let total: usize = counts.values().sum();
    let target_train = ((total as f64 * fractions[0]).floor() as usize).max(usize::from(total >= 3));
    let target_val = ((total as f64 * fractions[1]).floor() as usize).max(usize::from(total >= 3));

    let reserve = |c: usize| usize::from(c >= 3);
    let mut quotas: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (species, &c) in counts {
        let mut t = (c as f64 * fractions[0]).floor() as usize;
        let mut v = (c as f64 * fractions[1]).floor() as usize;
        if c >= 3 {
            t = t.max(1);
            v = v.max(1);
            while t + v > c - 1 {
                if v > 1 {
                    v -= 1;
                } else {
                    t -= 1;
                }
            }
        }
        quotas.insert(species.clone(), (t, v));
    }

    for slot in 0..2 {
        let target = if slot == 0 { target_train } else { target_val };
        let frac = fractions[slot];
        loop {
            let assigned: usize = quotas.values().map(|q| if slot == 0 { q.0 } else { q.1 }).sum();
            if assigned >= target {
                break;
            }
            let mut eligible: Vec<(&String, f64)> = counts
                .iter()
                .filter(|(s, &c)| {
                    let (t, v) = quotas[*s];
                    t + v + reserve(c) < c
                })
                .map(|(s, &c)| {
                    let share = c as f64 * frac;
                    (s, share - share.floor())
                })
                .collect();
            if eligible.is_empty() {
                break;
            }
            eligible.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            let names: Vec<String> = eligible
                .into_iter()
                .take(target - assigned)
                .map(|(s, _)| s.clone())
                .collect();
            for s in names {
                let q = quotas.get_mut(&s).expect("species present");
                if slot == 0 {
                    q.0 += 1;
                } else {
                    q.1 += 1;
                }
            }
        }
    }
    quotas
}

/// Builds the class-balanced, species-stratified, subject-disjoint baseline.
pub fn build_baseline(manifest: &Manifest, spec: &PartitionSpec) -> Result<Partition, PartitionError> {
    spec.validate()?;
    if spec.kind != PartitionKind::Baseline {
        return Err(PartitionError::InvalidSpec(format!("expected baseline, got {}", spec.kind)));
    }

    let mut by_species: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for rec in manifest.attacks() {
        let species = rec.pai.as_ref().map(|p| p.species.clone()).unwrap_or_default();
        by_species.entry(species).or_default().push(rec.sample_id.clone());
    }
    let counts: BTreeMap<String, usize> = by_species.iter().map(|(s, ids)| (s.clone(), ids.len())).collect();
    let quotas = species_quotas(&counts, spec.baseline_pa_fractions);

    let (mut train, mut validation, mut test) = (IdSet::new(), IdSet::new(), IdSet::new());
    for (species, ids) in by_species {
        let (t, v) = quotas[&species];
        let ids = sorted_shuffled(ids, spec.seed, &format!("baseline/attack/{species}"));
        for (i, id) in ids.into_iter().enumerate() {
            if i < t {
                train.insert(id);
            } else if i < t + v {
                validation.insert(id);
            } else {
                test.insert(id);
            }
        }
    }
    if train.is_empty() || validation.is_empty() {
        return Err(PartitionError::InfeasibleBalance(format!(
            "{} attacks are too few for non-empty training and validation sets",
            manifest.attack_count()
        )));
    }
    let need = train.len() + validation.len();

    let mut by_subject: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for rec in manifest.bona_fides() {
        by_subject
            .entry(rec.subject_id.clone())
            .or_default()
            .push(rec.sample_id.clone());
    }
    let bf_total: usize = by_subject.values().map(Vec::len).sum();
    if bf_total < need {
        return Err(PartitionError::InfeasibleBalance(format!(
            "{bf_total} bona fides cannot match {need} training and validation attacks"
        )));
    }
    if by_subject.len() < 2 {
        return Err(PartitionError::InfeasibleSubjectSplit);
    }

    let subjects = sorted_shuffled(by_subject.keys().cloned().collect(), spec.seed, "baseline/subjects");
    let mut pool = Vec::new();
    let mut split_at = subjects.len();
    for (i, subject) in subjects.iter().enumerate() {
        if pool.len() >= need {
            split_at = i;
            break;
        }
        pool.extend(by_subject[subject].iter().cloned());
    }
    if split_at >= subjects.len() {
        return Err(PartitionError::InfeasibleSubjectSplit);
    }

    let pool = sorted_shuffled(pool, spec.seed, "baseline/bf-pool");
    let n_train = train.len();
    for (i, id) in pool.into_iter().take(need).enumerate() {
        if i < n_train {
            train.insert(id);
        } else {
            validation.insert(id);
        }
    }

    let test_bf: Vec<String> = subjects[split_at..]
        .iter()
        .flat_map(|s| by_subject[s].iter().cloned())
        .collect();
    let cap = (bf_total as f64 * spec.baseline_bf_test_fraction).floor() as usize;
    let keep = test_bf.len().min(cap.max(1));
    test.extend(sorted_shuffled(test_bf, spec.seed, "baseline/bf-test").into_iter().take(keep));

    Ok(Partition {
        spec: spec.clone(),
        train,
        validation,
        test,
    })
}

/// Bona fide train/validation/test assignment shared by all LOO partitions of a seed.
pub fn loo_bona_fide_split(manifest: &Manifest, seed: u64, fractions: [f64; 3]) -> (IdSet, IdSet, IdSet) {
    let ids = sorted_shuffled(
        manifest.bona_fides().map(|r| r.sample_id.clone()).collect(),
        seed,
        "loo/bonafide",
    );
    let n = ids.len();
    let n_train = (n as f64 * fractions[0]).floor() as usize;
    let n_val = ((n as f64 * fractions[1]).floor() as usize).min(n - n_train);
    let mut it = ids.into_iter();
    let train = it.by_ref().take(n_train).collect();
    let validation = it.by_ref().take(n_val).collect();
    let test = it.collect();
    (train, validation, test)
}

/// Builds a leave-one-group-out partition.
pub fn build_loo(manifest: &Manifest, spec: &PartitionSpec) -> Result<Partition, PartitionError> {
    spec.validate()?;
    if !spec.kind.is_loo() {
        return Err(PartitionError::InvalidSpec("build_loo needs a LOO kind".into()));
    }

    let mut held_out = IdSet::new();
    let mut remaining = Vec::new();
    for rec in manifest.attacks() {
        let pai = rec.pai.as_ref().expect("attacks carry a PAI tag");
        if spec.kind.holds_out(pai) {
            held_out.insert(rec.sample_id.clone());
        } else {
            remaining.push(rec.sample_id.clone());
        }
    }
    if held_out.is_empty() {
        return Err(PartitionError::EmptyHoldout(spec.kind));
    }
    if remaining.is_empty() {
        return Err(PartitionError::EmptyTrainingAttacks(spec.kind));
    }

    let remaining = sorted_shuffled(remaining, spec.seed, "loo/attack");
    let n_train = (remaining.len() as f64 * spec.pa_train_fraction).floor() as usize;
    let (bf_train, bf_val, bf_test) = loo_bona_fide_split(manifest, spec.seed, spec.bf_fractions);

    let mut train = bf_train;
    let mut validation = bf_val;
    let mut test = bf_test;
    for (i, id) in remaining.into_iter().enumerate() {
        if i < n_train {
            train.insert(id);
        } else {
            validation.insert(id);
        }
    }
    test.extend(held_out);

    Ok(Partition {
        spec: spec.clone(),
        train,
        validation,
        test,
    })
}

/// One violated partition invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    /// Ids assigned to more than one subset.
    Overlap { ids: Vec<String> },
    /// Held-out attacks found in training or validation.
    LeakedHoldout { ids: Vec<String> },
    /// Held-out attacks assigned to no subset at all.
    HoldoutNotInTest { ids: Vec<String> },
    /// Bona fide subjects seen both in training/validation and in test.
    SubjectOverlap { subjects: Vec<String> },
    ClassImbalance {
        subset: Subset,
        bona_fide: usize,
        attack: usize,
    },
    /// Two LOO partitions of one seed disagree on a bona fide subset.
    BonaFideMismatch {
        left: String,
        right: String,
        subset: Subset,
        ids: Vec<String>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConstraintReport {
    pub violations: Vec<Violation>,
}

impl ConstraintReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every single-partition invariant against `manifest`.
pub fn verify_partition(partition: &Partition, manifest: &Manifest) -> Result<ConstraintReport, PartitionError> {
    let subsets = [Subset::Train, Subset::Validation, Subset::Test];
    for s in subsets {
        if let Some(id) = partition.subset(s).iter().find(|id| !manifest.contains(id)) {
            return Err(PartitionError::UnknownSample(id.clone()));
        }
    }

    let mut violations = Vec::new();
    let overlap: BTreeSet<String> = partition
        .train
        .intersection(&partition.validation)
        .chain(partition.train.intersection(&partition.test))
        .chain(partition.validation.intersection(&partition.test))
        .cloned()
        .collect();
    if !overlap.is_empty() {
        violations.push(Violation::Overlap {
            ids: overlap.into_iter().collect(),
        });
    }

    let kind = partition.spec.kind;
    if kind.is_loo() {
        let mut leaked = Vec::new();
        let mut missing = Vec::new();
        for rec in manifest.attacks() {
            let Some(pai) = rec.pai.as_ref() else { continue };
            if !kind.holds_out(pai) {
                continue;
            }
            let id = &rec.sample_id;
            if partition.train.contains(id) || partition.validation.contains(id) {
                leaked.push(id.clone());
            } else if !partition.test.contains(id) {
                missing.push(id.clone());
            }
        }
        leaked.sort();
        missing.sort();
        if !leaked.is_empty() {
            violations.push(Violation::LeakedHoldout { ids: leaked });
        }
        if !missing.is_empty() {
            violations.push(Violation::HoldoutNotInTest { ids: missing });
        }
    } else {
        for s in [Subset::Train, Subset::Validation] {
            let ids = partition.subset(s);
            let attack = ids.iter().filter(|id| manifest.get(id).is_some_and(|r| r.is_attack())).count();
            let bona_fide = ids.len() - attack;
            if attack != bona_fide {
                violations.push(Violation::ClassImbalance {
                    subset: s,
                    bona_fide,
                    attack,
                });
            }
        }
        let subjects_of = |ids: &IdSet| -> BTreeSet<String> {
            ids.iter()
                .filter_map(|id| manifest.get(id))
                .filter(|r| !r.is_attack())
                .map(|r| r.subject_id.clone())
                .collect()
        };
        let seen = subjects_of(&partition.train_validation());
        let tested = subjects_of(&partition.test);
        let shared: Vec<String> = seen.intersection(&tested).cloned().collect();
        if !shared.is_empty() {
            violations.push(Violation::SubjectOverlap { subjects: shared });
        }
    }

    Ok(ConstraintReport { violations })
}

/// Checks that LOO partitions sharing a seed carry identical bona fide subsets.
pub fn verify_shared_bona_fides(partitions: &[Partition], manifest: &Manifest) -> ConstraintReport {
    let mut violations = Vec::new();
    let loo: Vec<&Partition> = partitions.iter().filter(|p| p.spec.kind.is_loo()).collect();
    for (i, left) in loo.iter().enumerate() {
        for right in loo.iter().skip(i + 1) {
            if left.spec.seed != right.spec.seed {
                continue;
            }
            for s in [Subset::Train, Subset::Validation, Subset::Test] {
                let a = left.bona_fides(s, manifest);
                let b = right.bona_fides(s, manifest);
                if a != b {
                    violations.push(Violation::BonaFideMismatch {
                        left: left.spec.name.clone(),
                        right: right.spec.name.clone(),
                        subset: s,
                        ids: a.symmetric_difference(&b).cloned().collect(),
                    });
                }
            }
        }
    }
    ConstraintReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{Label, Material, Modality, SampleRecord};

    fn bf(id: &str, subject: &str) -> SampleRecord {
        SampleRecord {
            sample_id: id.into(),
            subject_id: subject.into(),
            session_id: "s1".into(),
            label: Label::BonaFide,
            pai: None,
            modalities: [Modality::Swir].into(),
        }
    }

    fn pa(id: &str, subject: &str, material: Material, group: VisualGroup) -> SampleRecord {
        SampleRecord {
            sample_id: id.into(),
            subject_id: subject.into(),
            session_id: "s1".into(),
            label: Label::Attack,
            pai: Some(PaiTag {
                species: format!("{material}-{group}"),
                material,
                visual_group: group,
                variation: "v1".into(),
            }),
            modalities: [Modality::Swir].into(),
        }
    }

    #[test]
    fn kind_tokens_round_trip() {
        for kind in PartitionKind::all_loo().into_iter().chain([PartitionKind::Baseline]) {
            assert_eq!(kind.to_string().parse::<PartitionKind>().unwrap(), kind);
        }
        assert!(matches!("loo:mat5".parse::<PartitionKind>(), Err(PartitionError::UnknownGroup(_))));
        assert!(matches!("opaque".parse::<PartitionKind>(), Err(PartitionError::UnknownGroup(_))));
    }

    #[test]
    fn spec_validation() {
        let mut spec = PartitionSpec::new(PartitionKind::Baseline, 1);
        assert!(spec.validate().is_ok());
        spec.bf_fractions = [0.5, 0.2, 0.35];
        assert!(spec.validate().is_err());
        spec.bf_fractions = [0.5, 0.15, 0.35];
        spec.pa_train_fraction = 1.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn smallest_feasible_baseline() {
        let m = Manifest::from_records(vec![
            bf("b1", "alice"),
            bf("b2", "alice"),
            bf("b3", "bob"),
            bf("b4", "bob"),
            pa("a1", "alice", Material::Silicone, VisualGroup::OverlayOpaque),
            pa("a2", "alice", Material::Gelatin, VisualGroup::OverlayOpaque),
            pa("a3", "bob", Material::Latex, VisualGroup::Fakefinger),
            pa("a4", "bob", Material::Wax, VisualGroup::Fakefinger),
        ])
        .unwrap();
        let p = build_baseline(&m, &PartitionSpec::new(PartitionKind::Baseline, 3)).unwrap();
        for s in [Subset::Train, Subset::Validation] {
            let ids = p.subset(s);
            assert_eq!(ids.len(), 2);
            assert_eq!(ids.iter().filter(|id| id.starts_with('a')).count(), 1);
        }
        assert_eq!(p.test.len(), 4);
        assert_eq!(p.all_ids().len(), 8);
        assert!(verify_partition(&p, &m).unwrap().is_empty());
    }

    #[test]
    fn single_subject_bona_fides_are_infeasible() {
        let mut recs: Vec<SampleRecord> = (0..6).map(|i| bf(&format!("b{i}"), "solo")).collect();
        recs.extend((0..6).map(|i| pa(&format!("a{i}"), "x", Material::Latex, VisualGroup::Fakefinger)));
        let m = Manifest::from_records(recs).unwrap();
        assert!(matches!(
            build_baseline(&m, &PartitionSpec::new(PartitionKind::Baseline, 1)),
            Err(PartitionError::InfeasibleSubjectSplit)
        ));
    }

    #[test]
    fn too_few_bona_fides_are_infeasible() {
        let mut recs = vec![bf("b0", "s0")];
        recs.extend((0..30).map(|i| pa(&format!("a{i}"), "x", Material::Latex, VisualGroup::Fakefinger)));
        let m = Manifest::from_records(recs).unwrap();
        assert!(matches!(
            build_baseline(&m, &PartitionSpec::new(PartitionKind::Baseline, 1)),
            Err(PartitionError::InfeasibleBalance(_))
        ));
    }

    #[test]
    fn holding_out_every_attack_fails() {
        let mut recs: Vec<SampleRecord> = (0..4).map(|i| bf(&format!("b{i}"), "s")).collect();
        recs.extend((0..4).map(|i| pa(&format!("a{i}"), "s", Material::Latex, VisualGroup::Fakefinger)));
        let m = Manifest::from_records(recs).unwrap();
        let spec = PartitionSpec::new(PartitionKind::VisualLoo(VisualGroup::Fakefinger), 5);
        assert!(matches!(build_loo(&m, &spec), Err(PartitionError::EmptyTrainingAttacks(_))));
        let spec = PartitionSpec::new(PartitionKind::VisualLoo(VisualGroup::OverlaySemi), 5);
        assert!(matches!(build_loo(&m, &spec), Err(PartitionError::EmptyHoldout(_))));
    }

    #[test]
    fn quotas_hit_targets_and_cover_species() {
        let counts: BTreeMap<String, usize> = [("a", 3usize), ("b", 10), ("c", 100), ("d", 2)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let q = species_quotas(&counts, [0.2, 0.2, 0.6]);
        let train: usize = q.values().map(|x| x.0).sum();
        let val: usize = q.values().map(|x| x.1).sum();
        assert_eq!(train, 23);
        assert_eq!(val, 23);
        for s in ["a", "b", "c"] {
            let (t, v) = q[s];
            assert!(t >= 1 && v >= 1 && t + v < counts[s]);
        }
    }

    #[test]
    fn unknown_sample_is_an_error() {
        let m = Manifest::from_records(vec![bf("b1", "s")]).unwrap();
        let p = Partition {
            spec: PartitionSpec::new(PartitionKind::Baseline, 0),
            train: ["zzz".to_string()].into(),
            validation: IdSet::new(),
            test: IdSet::new(),
        };
        assert!(matches!(verify_partition(&p, &m), Err(PartitionError::UnknownSample(id)) if id == "zzz"));
    }
}
