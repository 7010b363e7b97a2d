//! Stable report files: DET curves with normal-deviate coordinates, APCE
//! breakdown tables and a JSON experiment summary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::fusion::{self, FusionError, FusionSpec};
use crate::manifest::Manifest;
use crate::metrics::{self, BreakdownKey, DetCurve, MetricsError, OperatingPoint};
use crate::partition::Partition;
use crate::scores::ScoreSet;
use crate::IdSet;

pub const DET_HEADER: &str = "threshold,apcer,bpcer,apcer_probit,bpcer_probit";
pub const PROBIT_CLAMP: f64 = 1e-6;
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed DET file at line {0}")]
    MalformedDet(usize),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
}

/// Inverse standard-normal CDF of `rate`, clamped to `[1e-6, 1 - 1e-6]`.
pub fn probit(rate: f64) -> f64 {
    let p = rate.clamp(PROBIT_CLAMP, 1.0 - PROBIT_CLAMP);
    Normal::standard().inverse_cdf(p)
}

/// `x` rounded to 6 significant digits, printed in shortest form.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("valid float");
    format!("{rounded}")
}

/// DET rows. Thresholds and rates print in shortest round-trip form so the
/// file parses back to the exact curve; probits use 6 significant digits.
pub fn det_csv(curve: &DetCurve) -> String {
    let mut out = format!("{DET_HEADER}\n");
    for p in &curve.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.threshold,
            p.apcer,
            p.bpcer,
            format_sig6(probit(p.apcer)),
            format_sig6(probit(p.bpcer))
        );
    }
    out
}

pub fn emit_det(curve: &DetCurve, path: impl AsRef<Path>) -> Result<(), ReportError> {
    crate::io::write_atomic(path.as_ref(), det_csv(curve).as_bytes())?;
    Ok(())
}

/// `(threshold, apcer, bpcer)` per row of a DET file.
pub fn parse_det(text: &str) -> Result<Vec<(f64, f64, f64)>, ReportError> {
    let mut lines = text.lines();
    if lines.next() != Some(DET_HEADER) {
        return Err(ReportError::MalformedDet(1));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<f64> = line
                .split(',')
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| ReportError::MalformedDet(i + 2))?;
            match f[..] {
                [t, a, b, _, _] => Ok((t, a, b)),
                _ => Err(ReportError::MalformedDet(i + 2)),
            }
        })
        .collect()
}

/// APCE counts per key, one column per algorithm in the given order.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownTable {
    pub key: BreakdownKey,
    pub columns: Vec<(String, BTreeMap<String, usize>)>,
}

impl BreakdownTable {
    pub fn to_csv(&self) -> String {
        let rows: BTreeSet<&String> = self.columns.iter().flat_map(|(_, c)| c.keys()).collect();
        let mut out = self.key.token().to_string();
        for (name, _) in &self.columns {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for row in rows {
            out.push_str(row);
            for (_, c) in &self.columns {
                let _ = write!(out, ",{}", c.get(row).copied().unwrap_or(0));
            }
            out.push('\n');
        }
        out.push_str("total");
        for (_, c) in &self.columns {
            let _ = write!(out, ",{}", c.values().sum::<usize>());
        }
        out.push('\n');
        out
    }
}

pub fn emit_breakdown(table: &BreakdownTable, path: impl AsRef<Path>) -> Result<(), ReportError> {
    crate::io::write_atomic(path.as_ref(), table.to_csv().as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmResult {
    pub algorithm: String,
    pub operating_point: OperatingPoint,
    pub apcer_percent: String,
    pub bpcer_percent: String,
    pub det_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedApces {
    pub algorithms: [String; 2],
    pub count: usize,
    pub percent: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionResult {
    pub spec: FusionSpec,
    pub result: AlgorithmResult,
    /// Only for two-component fusions.
    pub identical_apces: Option<SharedApces>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub partition: String,
    pub target_bpcer: f64,
    pub attack_count: usize,
    pub bona_fide_count: usize,
    pub algorithms: Vec<AlgorithmResult>,
    pub fusion: Option<FusionResult>,
    /// Breakdown key token → file name.
    pub breakdowns: BTreeMap<String, String>,
}

pub fn emit_summary(report: &ExperimentReport, path: impl AsRef<Path>) -> Result<(), ReportError> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    crate::io::write_atomic(path.as_ref(), text.as_bytes())?;
    Ok(())
}

/// File-name-safe form of an algorithm id.
fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

struct Evaluated {
    result: AlgorithmResult,
    apces: IdSet,
}

fn evaluate_one(
    set: &ScoreSet,
    manifest: &Manifest,
    test: &IdSet,
    target: f64,
    det_name: String,
    out_dir: &Path,
) -> Result<Evaluated, ReportError> {
    let curve = metrics::det_curve(set, manifest, test)?;
    let point = metrics::select_operating_point(&curve, target);
    emit_det(&curve, out_dir.join(&det_name))?;
    let apces = metrics::apce_set(set, manifest, test, point.threshold)?;
    Ok(Evaluated {
        result: AlgorithmResult {
            algorithm: set.algorithm_id.clone(),
            apcer_percent: point.apcer_percent(),
            bpcer_percent: point.bpcer_percent(),
            operating_point: point,
            det_file: det_name,
        },
        apces,
    })
}

/// Evaluates every score set (and an optional fusion) on the partition's
/// test set and writes DET files, breakdown tables and `summary.json`.
pub fn run_evaluation(
    manifest: &Manifest,
    partition: &Partition,
    scoresets: &[ScoreSet],
    fusion_spec: Option<&FusionSpec>,
    target_bpcer: f64,
    out_dir: &Path,
) -> Result<ExperimentReport, ReportError> {
    let test = &partition.test;
    let mut evaluated = Vec::with_capacity(scoresets.len());
    for set in scoresets {
        let name = format!("det/{}.csv", file_stem(&set.algorithm_id));
        evaluated.push(evaluate_one(set, manifest, test, target_bpcer, name, out_dir)?);
    }

    let mut fusion_eval = None;
    if let Some(spec) = fusion_spec {
        let fused = fusion::fuse(spec, scoresets, test, &partition.train_validation())?;
        let eval = evaluate_one(&fused, manifest, test, target_bpcer, "det/fusion.csv".into(), out_dir)?;
        let identical_apces = match &spec.components[..] {
            [a, b] => {
                let find = |id: &str| scoresets.iter().find(|s| s.algorithm_id == id).expect("validated by fuse");
                let shared = fusion::identical_apces(find(&a.algorithm), find(&b.algorithm), manifest, test, target_bpcer)?;
                Some(SharedApces {
                    algorithms: [a.algorithm.clone(), b.algorithm.clone()],
                    count: shared.count,
                    percent: shared.percent(),
                })
            }
            _ => None,
        };
        fusion_eval = Some((spec.clone(), eval, identical_apces));
    }

    let mut breakdowns = BTreeMap::new();
    for key in BreakdownKey::ALL {
        let mut columns = Vec::new();
        for e in &evaluated {
            columns.push((e.result.algorithm.clone(), metrics::breakdown(&e.apces, manifest, key)?));
        }
        if let Some((_, e, _)) = &fusion_eval {
            columns.push(("fusion".to_string(), metrics::breakdown(&e.apces, manifest, key)?));
        }
        let file = format!("breakdown_{}.csv", key.token());
        emit_breakdown(&BreakdownTable { key, columns }, out_dir.join(&file))?;
        breakdowns.insert(key.token().to_string(), file);
    }

    let first = evaluated
        .first()
        .map(|e| e.result.operating_point)
        .or_else(|| fusion_eval.as_ref().map(|(_, e, _)| e.result.operating_point));
    let report = ExperimentReport {
        partition: partition.spec.name.clone(),
        target_bpcer,
        attack_count: first.map_or(0, |p| p.attack_count),
        bona_fide_count: first.map_or(0, |p| p.bona_fide_count),
        algorithms: evaluated.into_iter().map(|e| e.result).collect(),
        fusion: fusion_eval.map(|(spec, e, identical_apces)| FusionResult {
            spec,
            result: e.result,
            identical_apces,
        }),
        breakdowns,
    };
    emit_summary(&report, out_dir.join(SUMMARY_FILE))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::LabeledScores;

    /// Standard normal CDF: Taylor series near 0, Laplace's continued
    /// fraction for the tails.
    fn phi_oracle(x: f64) -> f64 {
        if x.abs() < 2.5 {
            let (mut term, mut sum, mut n) = (x, x, 0u32);
            while term.abs() > 1e-18 {
                n += 1;
                term *= -x * x / 2.0 / f64::from(n);
                sum += term / f64::from(2 * n + 1);
            }
            return 0.5 + sum / (2.0 * std::f64::consts::PI).sqrt();
        }
        let z = x.abs();
        let mut frac = z;
        for k in (1..300).rev() {
            frac = z + f64::from(k) / frac;
        }
        let tail = (-z * z / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt() / frac;
        if x < 0.0 {
            tail
        } else {
            1.0 - tail
        }
    }

    fn probit_oracle(p: f64) -> f64 {
        let (mut lo, mut hi) = (-6.0, 6.0);
        for _ in 0..200 {
            let mid = (lo + hi) / 2.0;
            if phi_oracle(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) / 2.0
    }

    #[test]
    fn probit_reference_values() {
        assert_eq!(probit(0.5), 0.0);
        assert!((probit(0.0228) + 2.0).abs() < 0.01);
        for p in [1e-6, 1e-4, 0.002, 0.0228, 0.1, 0.3, 0.5, 0.77, 0.99, 1.0 - 1e-6] {
            assert!((probit(p) - probit_oracle(p)).abs() < 1e-9, "p = {p}");
        }
        assert_eq!(probit(0.0), probit(1e-6));
        assert_eq!(probit(1.0), probit(1.0 - 1e-6));
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(-2.00042), "-2.00042");
        assert_eq!(format_sig6(1.0 / 3.0), "0.333333");
        assert_eq!(format_sig6(-4.753424308822899), "-4.75342");
        assert_eq!(format_sig6(1234567.0), "1234570");
    }

    #[test]
    fn det_round_trip_is_exact() {
        let ls = LabeledScores {
            attacks: vec![("a1".into(), 0.1), ("a2".into(), 1.0 / 3.0), ("a3".into(), 0.7)],
            bona_fides: vec![("b1".into(), 0.2), ("b2".into(), 0.9), ("b3".into(), 2.0 / 3.0)],
        };
        let curve = ls.det();
        let text = det_csv(&curve);
        assert!(text.starts_with("threshold,apcer,bpcer,apcer_probit,bpcer_probit\n-inf,1,0,4.75342,-4.75342\n"));
        assert!(text.ends_with("inf,0,1,-4.75342,4.75342\n"));
        let back = parse_det(&text).unwrap();
        assert_eq!(back.len(), curve.points.len());
        for ((t, a, b), p) in back.iter().zip(&curve.points) {
            assert_eq!((*t, *a, *b), (p.threshold, p.apcer, p.bpcer));
        }
        assert!(parse_det("nope\n").is_err());
    }

    #[test]
    fn breakdown_table_layout() {
        let table = BreakdownTable {
            key: BreakdownKey::VisualGroup,
            columns: vec![
                ("alg-a".into(), [("fakefinger".to_string(), 2), ("overlay_semi".to_string(), 0)].into()),
                ("fusion".into(), [("fakefinger".to_string(), 1), ("overlay_semi".to_string(), 3)].into()),
            ],
        };
        assert_eq!(
            table.to_csv(),
            "visual_group,alg-a,fusion\nfakefinger,2,1\noverlay_semi,0,3\ntotal,2,4\n"
        );
        let empty = BreakdownTable {
            key: BreakdownKey::Material,
            columns: vec![("x".into(), [("wax".to_string(), 0)].into())],
        };
        assert_eq!(empty.to_csv(), "material,x\nwax,0\ntotal,0\n");
    }
}
