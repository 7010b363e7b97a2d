//! Independent reference implementations and fixtures shared by the
//! integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use padbench::manifest::{Label, Manifest, Material, Modality, PaiTag, SampleRecord, VisualGroup};
use padbench::scores::{Orientation, ScoreSet};
use padbench::IdSet;

pub fn bona_fide(id: &str, subject: &str) -> SampleRecord {
    SampleRecord {
        sample_id: id.to_string(),
        subject_id: subject.to_string(),
        session_id: "s1".to_string(),
        label: Label::BonaFide,
        pai: None,
        modalities: [Modality::Swir].into(),
    }
}

pub fn attack(id: &str, subject: &str, material: Material, group: VisualGroup, species: &str) -> SampleRecord {
    SampleRecord {
        sample_id: id.to_string(),
        subject_id: subject.to_string(),
        session_id: "s1".to_string(),
        label: Label::Attack,
        pai: Some(PaiTag {
            species: species.to_string(),
            material,
            visual_group: group,
            variation: "v1".to_string(),
        }),
        modalities: [Modality::Swir].into(),
    }
}

/// Scores as a manifest plus score set; ids `a0000…` for attacks and
/// `b0000…` for bona fides.
pub struct Fixture {
    pub manifest: Manifest,
    pub scores: ScoreSet,
    pub ids: IdSet,
}

pub fn fixture(attacks: &[f64], bona_fides: &[f64]) -> Fixture {
    let groups = [
        (Material::Silicone, VisualGroup::OverlayTransparent),
        (Material::Playdoh, VisualGroup::Fakefinger),
        (Material::Silicone, VisualGroup::OverlayOpaque),
        (Material::Glue, VisualGroup::OverlaySemi),
    ];
    let mut records = Vec::new();
    let mut scores = BTreeMap::new();
    for (i, s) in attacks.iter().enumerate() {
        let id = format!("a{i:05}");
        let (m, g) = groups[i % groups.len()];
        records.push(attack(&id, &format!("s{}", i % 7), m, g, &format!("{}/{}", g.token(), m.token())));
        scores.insert(id, *s);
    }
    for (i, s) in bona_fides.iter().enumerate() {
        let id = format!("b{i:05}");
        records.push(bona_fide(&id, &format!("s{}", i % 7)));
        scores.insert(id, *s);
    }
    let ids = scores.keys().cloned().collect();
    Fixture {
        manifest: Manifest::from_records(records).unwrap(),
        scores: ScoreSet::new("fixture", Orientation::HigherIsBonaFide, scores).unwrap(),
        ids,
    }
}

/// Counts by direct comparison: (attacks scoring >= t, bona fides scoring < t).
pub fn count_errors(attacks: &[f64], bona_fides: &[f64], t: f64) -> (usize, usize) {
    let apce = attacks.iter().filter(|&&s| !(s < t)).count();
    let bfe = bona_fides.iter().filter(|&&s| s < t).count();
    (apce, bfe)
}

/// Distinct scores in ascending order, without relying on a sort-and-dedup
/// of the library.
pub fn distinct_sorted(values: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &v in values {
        if !out.iter().any(|&u| u == v) {
            out.push(v);
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// One representative threshold per gap: below everything, between each
/// pair of neighbouring distinct scores (at the upper score when the
/// midpoint collapses), above everything.
pub fn brute_thresholds(attacks: &[f64], bona_fides: &[f64]) -> Vec<f64> {
    let all: Vec<f64> = attacks.iter().chain(bona_fides).copied().collect();
    let d = distinct_sorted(&all);
    let mut out = vec![f64::NEG_INFINITY];
    for w in d.windows(2) {
        let m = w[0] / 2.0 + w[1] / 2.0;
        out.push(if m > w[0] && m <= w[1] { m } else { w[1] });
    }
    out.push(f64::INFINITY);
    out
}

/// Exhaustive APCER at fixed BPCER: (apce, bf errors) minimized
/// lexicographically over all feasible thresholds.
pub fn brute_apcer_at_bpcer(attacks: &[f64], bona_fides: &[f64], target: f64) -> (usize, usize, f64) {
    let mut best: Option<(usize, usize, f64)> = None;
    for t in brute_thresholds(attacks, bona_fides) {
        let (apce, bfe) = count_errors(attacks, bona_fides, t);
        if bfe as f64 / bona_fides.len() as f64 > target {
            continue;
        }
        if best.is_none_or(|(a, b, _)| (apce, bfe) < (a, b)) {
            best = Some((apce, bfe, t));
        }
    }
    best.unwrap()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev
}

/// Share of centered variance in the top `k` principal directions, from the
/// eigenvalues of the n x n Gram matrix of centered rows.
pub fn captured_variance_oracle(rows: &[Vec<f64>], k: usize) -> f64 {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let gram: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    let ev = jacobi_eigenvalues(gram);
    let total: f64 = ev.iter().map(|e| e.max(0.0)).sum();
    ev.iter().take(k).map(|e| e.max(0.0)).sum::<f64>() / total
}
