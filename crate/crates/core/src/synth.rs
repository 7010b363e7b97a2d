//! Deterministic synthetic stand-in for the restricted dataset.
//!
//! Generates manifests with the reference PAI inventory (optionally
//! scaled), four-band SWIR cubes (1200/1300/1450/1550 nm, plus an optional
//! laser-contrast band) and per-algorithm score sets. Every random draw is
//! keyed by `(seed, sample_id)`, so output does not depend on generation
//! order.
//!
//! The shipped reflectance and score tables are synthetic. They only encode
//! qualitative orderings: skin darkens with wavelength, thin transparent
//! overlays let most of the skin signal through, orange play-doh reflects
//! almost like skin in SWIR, and laser-based detectors struggle with
//! dragon skin and play-doh fingers.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cube::{SampleCube, Shape};
use crate::manifest::{
    Label, Manifest, ManifestError, Material, Modality, PaiTag, SampleRecord, VisualGroup, BONA_FIDE_TOTAL,
    PAI_TABLE,
};
use crate::rng;
use crate::scores::{Orientation, ScoreSet};

pub const SWIR_WAVELENGTHS_NM: [u32; 4] = [1200, 1300, 1450, 1550];

/// Ridge period along the cube width, in pixels.
const RIDGE_PERIOD: f64 = 6.0;
const GAIN_STD: f64 = 0.04;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("no reflectance profile for material `{0}`")]
    MissingProfile(String),
    #[error("algorithm `{algorithm}` has no score distribution for `{class}`")]
    MissingDistribution { algorithm: String, class: String },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialProfile {
    /// Mean reflectance per SWIR band, ordered by wavelength.
    pub band_means: [f64; 4],
    pub noise_std: f64,
    /// Share of the skin signal passing through when worn as a transparent overlay.
    pub transparency: f64,
    pub laser_contrast: f64,
}

impl MaterialProfile {
    const fn new(band_means: [f64; 4], transparency: f64, laser_contrast: f64) -> Self {
        MaterialProfile {
            band_means,
            noise_std: 0.03,
            transparency,
            laser_contrast,
        }
    }

    fn validate(&self, key: &str) -> Result<(), SynthError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !self.band_means.iter().all(|m| unit(*m)) || !unit(self.transparency) || !unit(self.laser_contrast) {
            return Err(SynthError::InvalidConfig(format!("profile `{key}` has values outside [0,1]")));
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(SynthError::InvalidConfig(format!("profile `{key}` needs noise_std > 0")));
        }
        Ok(())
    }

    /// Euclidean distance between the band means of two profiles.
    pub fn band_distance(&self, other: &MaterialProfile) -> f64 {
        self.band_means
            .iter()
            .zip(&other.band_means)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn default_bona_fide_profile() -> MaterialProfile {
    MaterialProfile::new([0.62, 0.55, 0.34, 0.27], 1.0, 0.80)
}

/// Shipped reflectance table, keyed by material token or `material:variation`.
pub fn default_profiles() -> BTreeMap<String, MaterialProfile> {
    use Material::*;
    let table: [(Material, Option<&str>, MaterialProfile); 16] = [
        (Printed3D, None, MaterialProfile::new([0.80, 0.78, 0.75, 0.73], 0.0, 0.05)),
        (DentalMaterial, None, MaterialProfile::new([0.85, 0.83, 0.80, 0.78], 0.0, 0.05)),
        (DragonSkin, None, MaterialProfile::new([0.50, 0.46, 0.40, 0.37], 0.85, 0.15)),
        (Ecoflex, None, MaterialProfile::new([0.55, 0.50, 0.42, 0.38], 0.60, 0.15)),
        (Latex, None, MaterialProfile::new([0.70, 0.62, 0.50, 0.45], 0.60, 0.10)),
        (Playdoh, None, MaterialProfile::new([0.40, 0.30, 0.15, 0.12], 0.0, 0.10)),
        (Playdoh, Some("orange"), MaterialProfile::new([0.615, 0.545, 0.345, 0.275], 0.0, 0.10)),
        (SillyPutty, None, MaterialProfile::new([0.35, 0.33, 0.30, 0.28], 0.0, 0.10)),
        (Wax, None, MaterialProfile::new([0.75, 0.72, 0.66, 0.60], 0.50, 0.10)),
        (BandagePlaster, None, MaterialProfile::new([0.80, 0.76, 0.70, 0.66], 0.0, 0.05)),
        (Gelatin, None, MaterialProfile::new([0.58, 0.40, 0.10, 0.06], 0.70, 0.20)),
        (PrintoutPaper, None, MaterialProfile::new([0.85, 0.84, 0.80, 0.79], 0.0, 0.05)),
        (PrintoutFoil, None, MaterialProfile::new([0.20, 0.20, 0.20, 0.20], 0.80, 0.10)),
        (Silicone, None, MaterialProfile::new([0.45, 0.42, 0.38, 0.36], 0.90, 0.15)),
        (Urethane, None, MaterialProfile::new([0.48, 0.45, 0.41, 0.38], 0.0, 0.10)),
        (Glue, None, MaterialProfile::new([0.66, 0.62, 0.55, 0.52], 0.75, 0.20)),
    ];
    table
        .into_iter()
        .map(|(m, v, p)| {
            let key = match v {
                Some(v) => format!("{}:{v}", m.token()),
                None => m.token().to_string(),
            };
            (key, p)
        })
        .collect()
}

/// How much of a material's own transparency a visual group realizes.
pub fn default_visual_transparency() -> BTreeMap<VisualGroup, f64> {
    [
        (VisualGroup::Fakefinger, 0.0),
        (VisualGroup::OverlayOpaque, 0.0),
        (VisualGroup::OverlaySemi, 0.5),
        (VisualGroup::OverlayTransparent, 1.0),
    ]
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub mean: f64,
    pub std: f64,
}

const fn dist(mean: f64, std: f64) -> ScoreDistribution {
    ScoreDistribution { mean, std }
}

/// Score distributions of one synthetic algorithm, keyed by class:
/// `bonafide`, `attack` (fallback), `material`, `material:visual_group`, or
/// `material:visual_group:variation`. The most specific key wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmProfile {
    pub modality: Modality,
    pub classes: BTreeMap<String, ScoreDistribution>,
}

pub fn default_score_profiles() -> BTreeMap<String, AlgorithmProfile> {
    let swir = |shift: f64| AlgorithmProfile {
        modality: Modality::Swir,
        classes: [
            ("bonafide", dist(2.0, 0.5)),
            ("attack", dist(-2.0, 0.7)),
            ("silicone:overlay_transparent", dist(1.2 + shift, 0.8)),
            ("dragonskin:overlay_transparent", dist(0.2 + shift, 1.0)),
            ("gelatin:overlay_transparent", dist(-0.3 + shift, 1.0)),
            ("glue", dist(-0.8 + shift, 1.0)),
            ("playdoh:fakefinger:orange", dist(1.6 + shift, 0.6)),
        ]
        .into_iter()
        .map(|(k, d)| (k.to_string(), d))
        .collect(),
    };
    let laser = |shift: f64| AlgorithmProfile {
        modality: Modality::Laser,
        classes: [
            ("bonafide", dist(2.0, 0.5)),
            ("attack", dist(-1.8, 0.8)),
            ("dragonskin", dist(0.8 + shift, 1.0)),
            ("playdoh", dist(0.6 + shift, 1.0)),
            ("playdoh:fakefinger:orange", dist(-0.8 + shift, 0.8)),
            ("silly_putty", dist(0.0 + shift, 1.0)),
            ("silicone:overlay_transparent", dist(0.9 + shift, 0.9)),
            ("ecoflex:overlay_opaque", dist(-0.6 + shift, 1.0)),
        ]
        .into_iter()
        .map(|(k, d)| (k.to_string(), d))
        .collect(),
    };
    [
        ("laser-cnn-vggface", laser(0.0)),
        ("laser-lrcn-vgg16", laser(0.2)),
        ("swir-cnn-mobilenetv2", swir(0.0)),
        ("swir-cnn-vgg16", swir(-0.1)),
    ]
    .into_iter()
    .map(|(k, p)| (k.to_string(), p))
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeConfig {
    #[serde(default = "default_height")]
    pub height: usize,
    #[serde(default = "default_width")]
    pub width: usize,
    /// Append the laser-contrast channel as a fifth band.
    #[serde(default)]
    pub laser_band: bool,
}

fn default_height() -> usize {
    20
}

fn default_width() -> usize {
    60
}

impl Default for CubeConfig {
    fn default() -> Self {
        CubeConfig {
            height: default_height(),
            width: default_width(),
            laser_band: false,
        }
    }
}

impl CubeConfig {
    /// Full device region of interest, 100 x 300 pixels.
    pub fn full_size() -> Self {
        CubeConfig {
            height: 100,
            width: 300,
            laser_band: false,
        }
    }

    pub fn shape(&self) -> Shape {
        Shape {
            bands: 4 + usize::from(self.laser_band),
            h: self.height,
            w: self.width,
        }
    }
}

fn default_scale() -> f64 {
    1.0
}

fn default_subjects() -> usize {
    200
}

fn default_sessions() -> usize {
    4
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    /// Multiplier applied to the reference PAI and bona fide counts.
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Explicit per-species counts; overrides `scale` for attacks.
    #[serde(default)]
    pub species_counts: Option<BTreeMap<String, usize>>,
    #[serde(default)]
    pub bona_fide_count: Option<usize>,
    #[serde(default = "default_subjects")]
    pub subjects: usize,
    #[serde(default = "default_sessions")]
    pub sessions: usize,
    #[serde(default)]
    pub cube: CubeConfig,
    #[serde(default = "default_profiles")]
    pub profiles: BTreeMap<String, MaterialProfile>,
    #[serde(default = "default_bona_fide_profile")]
    pub bona_fide_profile: MaterialProfile,
    #[serde(default = "default_visual_transparency")]
    pub visual_transparency: BTreeMap<VisualGroup, f64>,
    #[serde(default = "default_score_profiles")]
    pub score_profiles: BTreeMap<String, AlgorithmProfile>,
    /// Whether `synth` writes cubes at all.
    #[serde(default = "default_true")]
    pub write_cubes: bool,
}

impl SynthConfig {
    pub fn new(seed: u64, scale: f64) -> Self {
        SynthConfig {
            seed,
            scale,
            species_counts: None,
            bona_fide_count: None,
            subjects: default_subjects(),
            sessions: default_sessions(),
            cube: CubeConfig::default(),
            profiles: default_profiles(),
            bona_fide_profile: default_bona_fide_profile(),
            visual_transparency: default_visual_transparency(),
            score_profiles: default_score_profiles(),
            write_cubes: true,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(SynthError::InvalidConfig("scale must be > 0".into()));
        }
        if self.subjects == 0 || self.sessions == 0 {
            return Err(SynthError::InvalidConfig("subjects and sessions must be >= 1".into()));
        }
        if self.cube.height == 0 || self.cube.width == 0 {
            return Err(SynthError::InvalidConfig("cube dimensions must be >= 1".into()));
        }
        self.bona_fide_profile.validate("bonafide")?;
        for (k, p) in &self.profiles {
            p.validate(k)?;
        }
        for (g, t) in &self.visual_transparency {
            if !(0.0..=1.0).contains(t) {
                return Err(SynthError::InvalidConfig(format!("transparency of `{g}` outside [0,1]")));
            }
        }
        for (alg, profile) in &self.score_profiles {
            if let Some((k, _)) = profile.classes.iter().find(|(_, d)| !(d.std >= 0.0 && d.mean.is_finite())) {
                return Err(SynthError::InvalidConfig(format!("bad distribution `{alg}`/`{k}`")));
            }
        }
        Ok(())
    }

    /// Profile of `pai`: `material:variation` first, then `material`.
    pub fn profile_for(&self, pai: &PaiTag) -> Result<&MaterialProfile, SynthError> {
        self.profiles
            .get(&format!("{}:{}", pai.material.token(), pai.variation))
            .or_else(|| self.profiles.get(pai.material.token()))
            .ok_or_else(|| SynthError::MissingProfile(pai.material.token().to_string()))
    }
}

/// One PAI species of the reference inventory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeciesDef {
    pub name: String,
    pub visual_group: VisualGroup,
    pub material: Material,
    pub variation: String,
    /// Sample count in the full reference database.
    pub count: usize,
}

const PLAYDOH_COLOURS: [&str; 4] = ["orange", "yellow", "green", "blue"];

/// The 45 species, with each table row's samples spread over its variations.
pub fn species_catalog() -> Vec<SpeciesDef> {
    let mut out = Vec::new();
    for row in PAI_TABLE {
        let (base, extra) = (row.samples / row.variations, row.samples % row.variations);
        for v in 0..row.variations {
            let variation = if row.material == Material::Playdoh {
                PLAYDOH_COLOURS[v].to_string()
            } else {
                format!("v{}", v + 1)
            };
            out.push(SpeciesDef {
                name: format!("{}/{}/{}", row.visual_group.token(), row.material.token(), variation),
                visual_group: row.visual_group,
                material: row.material,
                variation,
                count: base + usize::from(v < extra),
            });
        }
    }
    out
}

/// Largest-remainder apportionment of `target` over `weights`; ties go to
/// the earlier entry.
fn apportion(weights: &[usize], target: usize) -> Vec<usize> {
    let total: usize = weights.iter().sum();
    if total == 0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|&w| w as f64 * target as f64 / total as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = target.saturating_sub(out.iter().sum());
    for &i in order.iter().take(short) {
        out[i] += 1;
    }
    out
}

/// Per-species counts for `config`: explicit counts when given, otherwise
/// each visual group is scaled (rounded) and spread over its species.
pub fn species_counts(config: &SynthConfig) -> Result<Vec<(SpeciesDef, usize)>, SynthError> {
    let catalog = species_catalog();
    if let Some(explicit) = &config.species_counts {
        let known: BTreeSet<&str> = catalog.iter().map(|s| s.name.as_str()).collect();
        if let Some(bad) = explicit.keys().find(|k| !known.contains(k.as_str())) {
            return Err(SynthError::InvalidConfig(format!("unknown species `{bad}`")));
        }
        return Ok(catalog
            .into_iter()
            .map(|s| {
                let n = explicit.get(&s.name).copied().unwrap_or(0);
                (s, n)
            })
            .collect());
    }
    let mut out = Vec::with_capacity(catalog.len());
    for group in VisualGroup::ALL {
        let members: Vec<SpeciesDef> = catalog.iter().filter(|s| s.visual_group == *group).cloned().collect();
        let weights: Vec<usize> = members.iter().map(|s| s.count).collect();
        let target = (weights.iter().sum::<usize>() as f64 * config.scale).round() as usize;
        let counts = apportion(&weights, target);
        out.extend(members.into_iter().zip(counts));
    }
    Ok(out)
}

/// Deterministic manifest following the reference PAI inventory.
pub fn synth_manifest(config: &SynthConfig) -> Result<Manifest, SynthError> {
    config.validate()?;
    let n_bf = config
        .bona_fide_count
        .unwrap_or_else(|| (BONA_FIDE_TOTAL as f64 * config.scale).round() as usize);
    let species = species_counts(config)?;
    let n_pa: usize = species.iter().map(|(_, n)| n).sum();

    let subject = |i: usize| format!("subj{:04}", i % config.subjects);
    let session = |i: usize| format!("sess{}", (i / config.subjects) % config.sessions + 1);
    let modalities: BTreeSet<Modality> = [Modality::Swir, Modality::Laser].into();

    let mut records = Vec::with_capacity(n_bf + n_pa);
    for i in 0..n_bf {
        records.push(SampleRecord {
            sample_id: format!("bf-{i:06}"),
            subject_id: subject(i),
            session_id: session(i),
            label: Label::BonaFide,
            pai: None,
            modalities: modalities.clone(),
        });
    }
    let mut j = 0usize;
    for (def, n) in species {
        for _ in 0..n {
            records.push(SampleRecord {
                sample_id: format!("pa-{j:05}"),
                subject_id: subject(j),
                session_id: session(j),
                label: Label::Attack,
                pai: Some(PaiTag {
                    species: def.name.clone(),
                    material: def.material,
                    visual_group: def.visual_group,
                    variation: def.variation.clone(),
                }),
                modalities: modalities.clone(),
            });
            j += 1;
        }
    }
    Ok(Manifest::from_records(records)?)
}

/// Skin share and material profile that make up a sample's cube.
fn blend_of<'a>(record: &SampleRecord, config: &'a SynthConfig) -> Result<(f64, &'a MaterialProfile), SynthError> {
    match &record.pai {
        None => Ok((1.0, &config.bona_fide_profile)),
        Some(pai) => {
            let profile = config.profile_for(pai)?;
            let factor = config.visual_transparency.get(&pai.visual_group).copied().unwrap_or(0.0);
            Ok((profile.transparency * factor, profile))
        }
    }
}

/// Expected per-band mean of a sample's cube (before clamping).
pub fn expected_band_means(record: &SampleRecord, config: &SynthConfig) -> Result<[f64; 4], SynthError> {
    let (t, material) = blend_of(record, config)?;
    let skin = &config.bona_fide_profile;
    Ok(std::array::from_fn(|b| t * skin.band_means[b] + (1.0 - t) * material.band_means[b]))
}

/// Cube of one sample. Skin and material each get a random gain; both carry
/// the same ridge pattern; noise has a per-sample level.
pub fn synth_cube(record: &SampleRecord, config: &SynthConfig) -> Result<SampleCube, SynthError> {
    let (t, material) = blend_of(record, config)?;
    let skin = &config.bona_fide_profile;
    let shape = config.cube.shape();
    let mut rng = rng::stream(config.seed, &format!("cube/{}", record.sample_id));

    let gain = Normal::new(1.0, GAIN_STD).expect("valid std");
    let std_normal = Normal::new(0.0, 1.0).expect("valid std");
    let skin_gain = gain.sample(&mut rng);
    let material_gain = gain.sample(&mut rng);
    let ridge_amp = Uniform::new(0.02, 0.05).expect("valid range").sample(&mut rng);
    let phase = Uniform::new(0.0, 2.0 * PI).expect("valid range").sample(&mut rng);
    let noise_level = Uniform::new(0.7, 1.3).expect("valid range").sample(&mut rng);
    let noise = (t * skin.noise_std + (1.0 - t) * material.noise_std) * noise_level;

    let mut data = Vec::with_capacity(shape.len());
    for b in 0..4 {
        let s = skin_gain * skin.band_means[b];
        let m = material_gain * material.band_means[b];
        let base = t * s + (1.0 - t) * m;
        for _r in 0..shape.h {
            for c in 0..shape.w {
                let ridge = ridge_amp * (2.0 * PI * c as f64 / RIDGE_PERIOD + phase).sin();
                let v = base * (1.0 + ridge) + noise * std_normal.sample(&mut rng);
                data.push(v.clamp(0.0, 1.0) as f32);
            }
        }
    }
    if config.cube.laser_band {
        let base = t * skin.laser_contrast + (1.0 - t) * material.laser_contrast;
        for _ in 0..shape.h * shape.w {
            let v = base + noise * std_normal.sample(&mut rng);
            data.push(v.clamp(0.0, 1.0) as f32);
        }
    }
    Ok(SampleCube::new(shape, data))
}

pub fn synth_cubes(manifest: &Manifest, config: &SynthConfig) -> Result<BTreeMap<String, SampleCube>, SynthError> {
    manifest
        .records()
        .iter()
        .map(|r| Ok((r.sample_id.clone(), synth_cube(r, config)?)))
        .collect()
}

fn class_keys(record: &SampleRecord) -> Vec<String> {
    match &record.pai {
        None => vec!["bonafide".to_string()],
        Some(p) => {
            let (m, g) = (p.material.token(), p.visual_group.token());
            vec![
                format!("{m}:{g}:{}", p.variation),
                format!("{m}:{g}"),
                m.to_string(),
                "attack".to_string(),
            ]
        }
    }
}

/// One score set per algorithm, ordered by algorithm id.
pub fn synth_scores(
    manifest: &Manifest,
    profiles: &BTreeMap<String, AlgorithmProfile>,
    seed: u64,
) -> Result<Vec<ScoreSet>, SynthError> {
    let std_normal = Normal::new(0.0, 1.0).expect("valid std");
    let mut out = Vec::with_capacity(profiles.len());
    for (alg, profile) in profiles {
        let mut scores = BTreeMap::new();
        for rec in manifest.records() {
            let keys = class_keys(rec);
            let d = keys
                .iter()
                .find_map(|k| profile.classes.get(k))
                .ok_or_else(|| SynthError::MissingDistribution {
                    algorithm: alg.clone(),
                    class: keys[0].clone(),
                })?;
            let mut rng = rng::stream(seed, &format!("score/{alg}/{}", rec.sample_id));
            let z: f64 = std_normal.sample(&mut rng);
            scores.insert(rec.sample_id.clone(), d.mean + d.std * z);
        }
        out.push(ScoreSet::new(alg.clone(), Orientation::HigherIsBonaFide, scores).expect("finite draws"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::group_counts;

    #[test]
    fn catalog_has_45_species() {
        let cat = species_catalog();
        assert_eq!(cat.len(), 45);
        assert_eq!(cat.iter().map(|s| s.count).sum::<usize>(), 4339);
        let names: BTreeSet<_> = cat.iter().map(|s| &s.name).collect();
        assert_eq!(names.len(), 45);
        assert!(names.contains(&"fakefinger/playdoh/orange".to_string()));
    }

    #[test]
    fn apportion_is_exact() {
        assert_eq!(apportion(&[1, 1, 1], 2), vec![1, 1, 0]);
        assert_eq!(apportion(&[10, 30], 4), vec![1, 3]);
        assert_eq!(apportion(&[0, 0], 3), vec![0, 0]);
    }

    #[test]
    fn scaled_manifest_tracks_visual_groups() {
        let m = synth_manifest(&SynthConfig::new(1, 0.1)).unwrap();
        let c = group_counts(&m);
        let expected = [1265.0, 2184.0, 513.0, 377.0];
        for (g, e) in VisualGroup::ALL.iter().zip(expected) {
            let got = c.visual[g] as f64;
            assert!((got - e * 0.1).abs() <= 1.0, "{g}: {got}");
        }
        assert_eq!(m.attack_count(), 434);
        assert_eq!(m.bona_fide_count(), 1971);
    }

    #[test]
    fn zero_bona_fides() {
        let mut cfg = SynthConfig::new(1, 0.05);
        cfg.bona_fide_count = Some(0);
        let m = synth_manifest(&cfg).unwrap();
        assert_eq!(m.bona_fide_count(), 0);
        assert!(m.attack_count() > 0);
    }

    #[test]
    fn explicit_species_counts() {
        let mut cfg = SynthConfig::new(1, 1.0);
        cfg.species_counts = Some([("fakefinger/wax/v1".to_string(), 3)].into());
        cfg.bona_fide_count = Some(2);
        let m = synth_manifest(&cfg).unwrap();
        assert_eq!(m.attack_count(), 3);
        cfg.species_counts = Some([("made/up".to_string(), 3)].into());
        assert!(matches!(synth_manifest(&cfg), Err(SynthError::InvalidConfig(_))));
    }

    #[test]
    fn default_profiles_encode_the_orderings() {
        let skin = default_bona_fide_profile();
        let profiles = default_profiles();
        assert!(skin.band_means.windows(2).all(|w| w[0] > w[1]));
        assert!(profiles["playdoh:orange"].band_distance(&skin) < 0.02);
        assert!(profiles["silicone"].band_distance(&skin) > 0.2);
    }

    #[test]
    fn missing_profile_and_distribution() {
        let mut cfg = SynthConfig::new(2, 0.02);
        let m = synth_manifest(&cfg).unwrap();
        cfg.profiles.remove("wax");
        let wax = m
            .attacks()
            .find(|r| r.pai.as_ref().unwrap().material == Material::Wax)
            .unwrap();
        assert!(matches!(synth_cube(wax, &cfg), Err(SynthError::MissingProfile(m)) if m == "wax"));

        let mut profiles = default_score_profiles();
        profiles.get_mut("swir-cnn-vgg16").unwrap().classes.remove("attack");
        assert!(matches!(
            synth_scores(&m, &profiles, 1),
            Err(SynthError::MissingDistribution { .. })
        ));
    }

    #[test]
    fn config_json_defaults() {
        let cfg: SynthConfig = serde_json::from_str(r#"{"seed": 9, "scale": 0.1}"#).unwrap();
        assert_eq!(cfg, SynthConfig::new(9, 0.1));
        assert!(serde_json::from_str::<SynthConfig>(r#"{"scale": 0.1}"#).is_err());
    }
}
