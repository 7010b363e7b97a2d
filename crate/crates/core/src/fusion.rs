//! Weighted score-level fusion and complementarity analysis.
//!
//! The fused score of a sample is `sum_i w_i * S_i` over the component
//! algorithms, e.g. `0.16 * S_laser + 0.84 * S_swir`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::Manifest;
use crate::metrics::{self, LabeledScores, MetricsError, OperatingPoint};
use crate::scores::{Orientation, ScoreSet};
use crate::IdSet;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("fusion weights must be non-negative and sum to 1 (sum = {0})")]
    WeightSumInvalid(f64),
    #[error("fusion needs at least two components")]
    TooFewComponents,
    #[error("no score set for component `{0}`")]
    MissingComponent(String),
    #[error("component `{algorithm}` lacks scores for {} samples", ids.len())]
    MissingScores { algorithm: String, ids: Vec<String> },
    #[error("min-max normalization needs training/validation ids")]
    NoNormalizationIds,
    #[error("component `{0}` has a constant score on the normalization ids")]
    DegenerateRange(String),
    #[error("grid step {0} does not divide 1")]
    InvalidStep(f64),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Normalization {
    #[default]
    #[serde(rename = "none")]
    None,
    /// Min-max scaling fitted on the training and validation ids only.
    #[serde(rename = "minmax_train_val")]
    MinMaxOnTrainVal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionComponent {
    pub algorithm: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionSpec {
    pub components: Vec<FusionComponent>,
    #[serde(default)]
    pub normalize: Normalization,
}

impl FusionSpec {
    pub fn pair(a: &str, weight_a: f64, b: &str, weight_b: f64) -> Self {
        FusionSpec {
            components: vec![
                FusionComponent {
                    algorithm: a.to_string(),
                    weight: weight_a,
                },
                FusionComponent {
                    algorithm: b.to_string(),
                    weight: weight_b,
                },
            ],
            normalize: Normalization::None,
        }
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        if self.components.len() < 2 {
            return Err(FusionError::TooFewComponents);
        }
        let sum: f64 = self.components.iter().map(|c| c.weight).sum();
        let weights_ok = self.components.iter().all(|c| c.weight.is_finite() && c.weight >= 0.0);
        if !weights_ok || (sum - 1.0).abs() > 1e-9 {
            return Err(FusionError::WeightSumInvalid(sum));
        }
        Ok(())
    }

    /// Identifier of the fused score set, e.g. `laser-cnn*0.16+swir-cnn*0.84`.
    pub fn fused_id(&self) -> String {
        self.components
            .iter()
            .map(|c| format!("{}*{}", c.algorithm, c.weight))
            .collect::<Vec<_>>()
            .join("+")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FusionError> {
        let spec: FusionSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Fuses the component scores over `ids`. `fit_ids` (training and
/// validation) are only read when the spec asks for min-max normalization.
pub fn fuse(spec: &FusionSpec, scoresets: &[ScoreSet], ids: &IdSet, fit_ids: &IdSet) -> Result<ScoreSet, FusionError> {
    spec.validate()?;
    let mut parts = Vec::with_capacity(spec.components.len());
    for c in &spec.components {
        let set = scoresets
            .iter()
            .find(|s| s.algorithm_id == c.algorithm)
            .ok_or_else(|| FusionError::MissingComponent(c.algorithm.clone()))?;
        let missing = set.missing(ids);
        if !missing.is_empty() {
            return Err(FusionError::MissingScores {
                algorithm: c.algorithm.clone(),
                ids: missing,
            });
        }
        let (offset, scale) = match spec.normalize {
            Normalization::None => (0.0, 1.0),
            Normalization::MinMaxOnTrainVal => min_max(set, fit_ids)?,
        };
        parts.push((set, c.weight, offset, scale));
    }

    let scores = ids
        .iter()
        .map(|id| {
            let fused = parts
                .iter()
                .map(|(set, w, offset, scale)| w * ((set.scores[id] - offset) / scale))
                .sum::<f64>();
            (id.clone(), fused)
        })
        .collect();
    Ok(ScoreSet::new(spec.fused_id(), Orientation::HigherIsBonaFide, scores).expect("finite inputs give finite fusion"))
}

fn min_max(set: &ScoreSet, fit_ids: &IdSet) -> Result<(f64, f64), FusionError> {
    if fit_ids.is_empty() {
        return Err(FusionError::NoNormalizationIds);
    }
    let missing = set.missing(fit_ids);
    if !missing.is_empty() {
        return Err(FusionError::MissingScores {
            algorithm: set.algorithm_id.clone(),
            ids: missing,
        });
    }
    let (lo, hi) = fit_ids
        .iter()
        .map(|id| set.scores[id])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)));
    if hi <= lo {
        return Err(FusionError::DegenerateRange(set.algorithm_id.clone()));
    }
    Ok((lo, hi - lo))
}

/// Attacks misclassified by both algorithms, each at its own operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdenticalApces {
    pub count: usize,
    pub ratio: f64,
    pub attack_count: usize,
    pub shared: IdSet,
    pub point_a: OperatingPoint,
    pub point_b: OperatingPoint,
}

impl IdenticalApces {
    pub fn percent(&self) -> String {
        metrics::format_percent(self.count, self.attack_count)
    }
}

pub fn identical_apces(
    set_a: &ScoreSet,
    set_b: &ScoreSet,
    manifest: &Manifest,
    test_ids: &IdSet,
    target_bpcer: f64,
) -> Result<IdenticalApces, FusionError> {
    let point_a = metrics::apcer_at_bpcer(set_a, manifest, test_ids, target_bpcer)?;
    let point_b = metrics::apcer_at_bpcer(set_b, manifest, test_ids, target_bpcer)?;
    let apces_a = metrics::apce_set(set_a, manifest, test_ids, point_a.threshold)?;
    let apces_b = metrics::apce_set(set_b, manifest, test_ids, point_b.threshold)?;
    let shared: IdSet = apces_a.intersection(&apces_b).cloned().collect();
    let attack_count = point_a.attack_count;
    Ok(IdenticalApces {
        count: shared.len(),
        ratio: shared.len() as f64 / attack_count as f64,
        attack_count,
        shared,
        point_a,
        point_b,
    })
}

/// Number of grid intervals for `step`, or an error when `step` does not divide 1.
pub fn grid_intervals(step: f64) -> Result<u32, FusionError> {
    if !(step.is_finite() && step > 0.0 && step <= 1.0) {
        return Err(FusionError::InvalidStep(step));
    }
    let n = (1.0 / step).round();
    if n < 1.0 || n > 1e6 || (n * step - 1.0).abs() > 1e-9 {
        return Err(FusionError::InvalidStep(step));
    }
    Ok(n as u32)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightResult {
    pub weight_a: f64,
    pub weight_b: f64,
    pub point: OperatingPoint,
    #[serde(skip)]
    grid_index: u32,
}

/// Evaluates every pairwise weighting `(i/n, 1 - i/n)` on `tuning_ids` and
/// ranks the results by APCER, then closeness to equal weights, then weight of `a`.
pub fn weight_search(
    alg_a: &ScoreSet,
    alg_b: &ScoreSet,
    manifest: &Manifest,
    tuning_ids: &IdSet,
    step: f64,
    target_bpcer: f64,
) -> Result<Vec<WeightResult>, FusionError> {
    let n = grid_intervals(step)?;
    for set in [alg_a, alg_b] {
        let missing = set.missing(tuning_ids);
        if !missing.is_empty() {
            return Err(FusionError::MissingScores {
                algorithm: set.algorithm_id.clone(),
                ids: missing,
            });
        }
    }
    // Labels and class checks once; the grid only changes scores.
    let template = LabeledScores::collect(alg_a, manifest, tuning_ids)?;
    let combine = |(id, _): &(String, f64), wa: f64, wb: f64| (id.clone(), wa * alg_a.scores[id] + wb * alg_b.scores[id]);

    let mut results = Vec::with_capacity(n as usize + 1);
    for i in 0..=n {
        let wa = f64::from(i) / f64::from(n);
        let wb = f64::from(n - i) / f64::from(n);
        let fused = LabeledScores {
            attacks: template.attacks.iter().map(|e| combine(e, wa, wb)).collect(),
            bona_fides: template.bona_fides.iter().map(|e| combine(e, wa, wb)).collect(),
        };
        let point = metrics::select_operating_point(&fused.det(), target_bpcer);
        results.push(WeightResult {
            weight_a: wa,
            weight_b: wb,
            point,
            grid_index: i,
        });
    }
    results.sort_by_key(|r| (r.point.apce_count, (2 * r.grid_index).abs_diff(n), r.grid_index));
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(alg: &str, pairs: &[(&str, f64)]) -> ScoreSet {
        ScoreSet::new(
            alg,
            Orientation::HigherIsBonaFide,
            pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        )
        .unwrap()
    }

    fn ids(list: &[&str]) -> IdSet {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn weighted_sum_matches_direct_arithmetic() {
        let laser = set("laser", &[("x", 0.5)]);
        let swir = set("swir", &[("x", 1.0)]);
        let spec = FusionSpec::pair("laser", 0.16, "swir", 0.84);
        let fused = fuse(&spec, &[laser, swir], &ids(&["x"]), &IdSet::new()).unwrap();
        assert!((fused.scores["x"] - 0.92).abs() < 1e-12);
        assert_eq!(fused.algorithm_id, "laser*0.16+swir*0.84");
    }

    #[test]
    fn unit_weight_is_identity() {
        let a = set("a", &[("x", 0.3), ("y", -2.5)]);
        let b = set("b", &[("x", 9.0), ("y", 4.0)]);
        let fused = fuse(&FusionSpec::pair("a", 1.0, "b", 0.0), &[a.clone(), b], &ids(&["x", "y"]), &IdSet::new()).unwrap();
        assert_eq!(fused.scores, a.scores);
    }

    #[test]
    fn invalid_specs() {
        let a = set("a", &[("x", 0.3)]);
        let b = set("b", &[("x", 0.3)]);
        let one = ids(&["x"]);
        assert!(matches!(
            fuse(&FusionSpec::pair("a", 0.5, "b", 0.6), &[a.clone(), b.clone()], &one, &IdSet::new()),
            Err(FusionError::WeightSumInvalid(_))
        ));
        assert!(matches!(
            fuse(&FusionSpec::pair("a", 0.5, "c", 0.5), &[a.clone(), b.clone()], &one, &IdSet::new()),
            Err(FusionError::MissingComponent(c)) if c == "c"
        ));
        assert!(matches!(
            fuse(&FusionSpec::pair("a", 0.5, "b", 0.5), &[a.clone(), b.clone()], &ids(&["x", "z"]), &IdSet::new()),
            Err(FusionError::MissingScores { .. })
        ));
        let mut single = FusionSpec::pair("a", 1.0, "b", 0.0);
        single.components.pop();
        assert!(matches!(single.validate(), Err(FusionError::TooFewComponents)));
        assert!(FusionSpec::pair("a", 1.5, "b", -0.5).validate().is_err());
    }

    #[test]
    fn min_max_uses_fit_ids_only() {
        let a = set("a", &[("t1", 0.0), ("t2", 10.0), ("x", 5.0)]);
        let b = set("b", &[("t1", 1.0), ("t2", 3.0), ("x", 100.0)]);
        let mut spec = FusionSpec::pair("a", 0.5, "b", 0.5);
        spec.normalize = Normalization::MinMaxOnTrainVal;
        let fused = fuse(&spec, &[a.clone(), b.clone()], &ids(&["x"]), &ids(&["t1", "t2"])).unwrap();
        assert!((fused.scores["x"] - (0.5 * 0.5 + 0.5 * 49.5)).abs() < 1e-12);
        assert!(matches!(
            fuse(&spec, &[a, b], &ids(&["x"]), &IdSet::new()),
            Err(FusionError::NoNormalizationIds)
        ));
    }

    #[test]
    fn grid_steps() {
        assert_eq!(grid_intervals(0.5).unwrap(), 2);
        assert_eq!(grid_intervals(0.01).unwrap(), 100);
        assert_eq!(grid_intervals(1.0).unwrap(), 1);
        assert!(grid_intervals(0.3).is_err());
        assert!(grid_intervals(0.0).is_err());
        assert!(grid_intervals(-0.5).is_err());
    }

    #[test]
    fn spec_json_shape() {
        let spec = FusionSpec::pair("laser-cnn-vggface", 0.16, "swir-cnn-mobilenetv2", 0.84);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(
            json,
            r#"{"components":[{"algorithm":"laser-cnn-vggface","weight":0.16},{"algorithm":"swir-cnn-mobilenetv2","weight":0.84}],"normalize":"none"}"#
        );
        let back: FusionSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}
