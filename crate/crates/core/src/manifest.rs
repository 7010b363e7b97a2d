//! Dataset data model: presentations, PAI taxonomy and manifest CSV I/O.
//!
//! A manifest lists every presentation of the dataset, one row per sample.
//! Attack rows carry a [`PaiTag`] naming the PAI species, its material and
//! the visual group it belongs to. Material groups are derived from the
//! material alone (see [`MaterialGroup::of`]).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact header row of the manifest CSV.
pub const MANIFEST_HEADER: [&str; 9] = [
    "sample_id",
    "subject_id",
    "session_id",
    "label",
    "species",
    "material",
    "visual_group",
    "variation",
    "modalities",
];

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("unknown material `{name}` at line {line}")]
    UnknownMaterial { line: u64, name: String },
    #[error("sample `{0}` has a label inconsistent with its PAI columns")]
    InconsistentLabel(String),
    #[error("material `{material}` does not occur in visual group `{visual_group}` (line {line})")]
    InvalidPai {
        line: u64,
        material: Material,
        visual_group: VisualGroup,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    BonaFide,
    Attack,
}

impl Label {
    pub fn token(self) -> &'static str {
        match self {
            Label::BonaFide => "bonafide",
            Label::Attack => "attack",
        }
    }
}

macro_rules! token_enum {
    ($name:ident { $($variant:ident => $token:literal),+ $(,)? }) => {
        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn token(self) -> &'static str {
                match self {
                    $($name::$variant => $token),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.token())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($token => Ok($name::$variant),)+
                    other => Err(other.to_string()),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.token())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse()
                    .map_err(|bad| serde::de::Error::custom(format!("unknown {} `{}`", stringify!($name), bad)))
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Material {
    Printed3D,
    DentalMaterial,
    DragonSkin,
    Ecoflex,
    Latex,
    Playdoh,
    SillyPutty,
    Wax,
    BandagePlaster,
    Gelatin,
    PrintoutPaper,
    PrintoutFoil,
    Silicone,
    Urethane,
    Glue,
}

token_enum!(Material {
    Printed3D => "printed3d",
    DentalMaterial => "dental_material",
    DragonSkin => "dragonskin",
    Ecoflex => "ecoflex",
    Latex => "latex",
    Playdoh => "playdoh",
    SillyPutty => "silly_putty",
    Wax => "wax",
    BandagePlaster => "bandage_plaster",
    Gelatin => "gelatin",
    PrintoutPaper => "printout_paper",
    PrintoutFoil => "printout_foil",
    Silicone => "silicone",
    Urethane => "urethane",
    Glue => "glue",
});

/// Visual similarity cluster of a PAI on the capture device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VisualGroup {
    Fakefinger,
    OverlayOpaque,
    OverlayTransparent,
    OverlaySemi,
}

token_enum!(VisualGroup {
    Fakefinger => "fakefinger",
    OverlayOpaque => "overlay_opaque",
    OverlayTransparent => "overlay_transparent",
    OverlaySemi => "overlay_semi",
});

impl VisualGroup {
    pub fn is_overlay(self) -> bool {
        self != VisualGroup::Fakefinger
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MaterialGroup {
    G1,
    G2,
    G3,
    G4,
}

token_enum!(MaterialGroup {
    G1 => "mat1",
    G2 => "mat2",
    G3 => "mat3",
    G4 => "mat4",
});

impl MaterialGroup {
    /// Material group of `material`; bandage plaster belongs to none.
    pub fn of(material: Material) -> Option<MaterialGroup> {
        use Material::*;
        match material {
            Silicone | Urethane => Some(MaterialGroup::G1),
            DragonSkin | Ecoflex => Some(MaterialGroup::G2),
            Gelatin | Glue | Latex | PrintoutPaper | PrintoutFoil | Wax => Some(MaterialGroup::G3),
            Printed3D | DentalMaterial | Playdoh | SillyPutty => Some(MaterialGroup::G4),
            BandagePlaster => None,
        }
    }

    pub fn members(self) -> Vec<Material> {
        Material::ALL
            .iter()
            .copied()
            .filter(|m| MaterialGroup::of(*m) == Some(self))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modality {
    Swir,
    Laser,
}

token_enum!(Modality {
    Swir => "swir",
    Laser => "laser",
});

/// One row of the PAI summary table: a material worn in one visual group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PaiRow {
    pub visual_group: VisualGroup,
    pub material: Material,
    pub variations: usize,
    pub samples: usize,
}

const fn row(visual_group: VisualGroup, material: Material, variations: usize, samples: usize) -> PaiRow {
    PaiRow {
        visual_group,
        material,
        variations,
        samples,
    }
}

/// Full PAI inventory of the reference database. Variations sum to the 45
/// species; samples sum to 4,339 attack presentations.
pub const PAI_TABLE: &[PaiRow] = {
    use Material::*;
    use VisualGroup::*;
    &[
        row(Fakefinger, Printed3D, 2, 72),
        row(Fakefinger, DentalMaterial, 1, 33),
        row(Fakefinger, DragonSkin, 3, 477),
        row(Fakefinger, Ecoflex, 4, 291),
        row(Fakefinger, Latex, 2, 147),
        row(Fakefinger, Playdoh, 4, 116),
        row(Fakefinger, SillyPutty, 3, 55),
        row(Fakefinger, Wax, 1, 74),
        row(OverlayOpaque, BandagePlaster, 1, 14),
        row(OverlayOpaque, DentalMaterial, 1, 51),
        row(OverlayOpaque, DragonSkin, 1, 17),
        row(OverlayOpaque, Ecoflex, 2, 1035),
        row(OverlayOpaque, Gelatin, 1, 194),
        row(OverlayOpaque, PrintoutPaper, 1, 49),
        row(OverlayOpaque, Silicone, 4, 752),
        row(OverlayOpaque, Urethane, 1, 72),
        row(OverlayTransparent, DragonSkin, 1, 106),
        row(OverlayTransparent, Gelatin, 1, 107),
        row(OverlayTransparent, Glue, 2, 27),
        row(OverlayTransparent, Latex, 1, 34),
        row(OverlayTransparent, PrintoutFoil, 1, 64),
        row(OverlayTransparent, Silicone, 1, 157),
        row(OverlayTransparent, Wax, 1, 18),
        row(OverlaySemi, DragonSkin, 1, 47),
        row(OverlaySemi, Ecoflex, 1, 24),
        row(OverlaySemi, Glue, 2, 146),
        row(OverlaySemi, Silicone, 1, 160),
    ]
};

/// Bona fide presentations in the reference database.
pub const BONA_FIDE_TOTAL: usize = 19_711;

pub fn is_valid_combination(material: Material, visual_group: VisualGroup) -> bool {
    PAI_TABLE
        .iter()
        .any(|r| r.material == material && r.visual_group == visual_group)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaiTag {
    pub species: String,
    pub material: Material,
    pub visual_group: VisualGroup,
    pub variation: String,
}

impl PaiTag {
    pub fn material_group(&self) -> Option<MaterialGroup> {
        MaterialGroup::of(self.material)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub subject_id: String,
    pub session_id: String,
    pub label: Label,
    pub pai: Option<PaiTag>,
    pub modalities: BTreeSet<Modality>,
}

impl SampleRecord {
    pub fn is_attack(&self) -> bool {
        self.label == Label::Attack
    }

    fn check_label(&self) -> Result<(), ManifestError> {
        match (self.label, &self.pai) {
            (Label::Attack, Some(_)) | (Label::BonaFide, None) => Ok(()),
            _ => Err(ManifestError::InconsistentLabel(self.sample_id.clone())),
        }
    }
}

/// Immutable collection of sample records, indexed by sample id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    records: Vec<SampleRecord>,
    index: HashMap<String, usize>,
}

impl Manifest {
    /// Builds a manifest, validating id uniqueness, label consistency and
    /// the material/visual-group combination of every attack.
    pub fn from_records(records: Vec<SampleRecord>) -> Result<Self, ManifestError> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            rec.check_label()?;
            if let Some(pai) = &rec.pai {
                if !is_valid_combination(pai.material, pai.visual_group) {
                    return Err(ManifestError::InvalidPai {
                        line: i as u64 + 2,
                        material: pai.material,
                        visual_group: pai.visual_group,
                    });
                }
            }
            if index.insert(rec.sample_id.clone(), i).is_some() {
                return Err(ManifestError::DuplicateId(rec.sample_id.clone()));
            }
        }
        Ok(Manifest { records, index })
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, sample_id: &str) -> Option<&SampleRecord> {
        self.index.get(sample_id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, sample_id: &str) -> bool {
        self.index.contains_key(sample_id)
    }

    pub fn attacks(&self) -> impl Iterator<Item = &SampleRecord> {
        self.records.iter().filter(|r| r.is_attack())
    }

    pub fn bona_fides(&self) -> impl Iterator<Item = &SampleRecord> {
        self.records.iter().filter(|r| !r.is_attack())
    }

    pub fn attack_count(&self) -> usize {
        self.attacks().count()
    }

    pub fn bona_fide_count(&self) -> usize {
        self.bona_fides().count()
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest, ManifestError> {
    let file = std::fs::File::open(path)?;
    read_manifest(std::io::BufReader::new(file))
}

pub fn read_manifest<R: Read>(reader: R) -> Result<Manifest, ManifestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = rdr.records();

    match rows.next() {
        None => return Err(malformed(1, "missing header row")),
        Some(header) => {
            let header = header.map_err(|e| csv_error(1, e))?;
            if header.iter().ne(MANIFEST_HEADER.iter().copied()) {
                return Err(malformed(1, "header does not match the manifest schema"));
            }
        }
    }

    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for row in rows {
        let row = row.map_err(|e| csv_error(0, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let rec = parse_row(&row, line)?;
        if !seen.insert(rec.sample_id.clone()) {
            return Err(ManifestError::DuplicateId(rec.sample_id));
        }
        records.push(rec);
    }
    Manifest::from_records(records)
}

fn malformed(line: u64, reason: impl Into<String>) -> ManifestError {
    ManifestError::MalformedRow {
        line,
        reason: reason.into(),
    }
}

fn csv_error(fallback_line: u64, e: csv::Error) -> ManifestError {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => ManifestError::Io(io),
        other => malformed(line, format!("{other:?}")),
    }
}

fn parse_row(row: &csv::StringRecord, line: u64) -> Result<SampleRecord, ManifestError> {
    if row.len() != MANIFEST_HEADER.len() {
        return Err(malformed(
            line,
            format!("expected {} fields, found {}", MANIFEST_HEADER.len(), row.len()),
        ));
    }
    let field = |i: usize| row.get(i).unwrap_or("").trim();
    let sample_id = field(0);
    let subject_id = field(1);
    if sample_id.is_empty() {
        return Err(malformed(line, "empty sample_id"));
    }
    if subject_id.is_empty() {
        return Err(malformed(line, "empty subject_id"));
    }
    let label = match field(3) {
        "bonafide" => Label::BonaFide,
        "attack" => Label::Attack,
        other => return Err(malformed(line, format!("unknown label `{other}`"))),
    };
    let (species, material, visual_group, variation) = (field(4), field(5), field(6), field(7));
    let pai_empty = species.is_empty() && material.is_empty() && visual_group.is_empty() && variation.is_empty();

    let pai = match label {
        Label::BonaFide if pai_empty => None,
        Label::BonaFide => return Err(ManifestError::InconsistentLabel(sample_id.to_string())),
        Label::Attack if species.is_empty() || material.is_empty() || visual_group.is_empty() => {
            return Err(ManifestError::InconsistentLabel(sample_id.to_string()))
        }
        Label::Attack => {
            let material: Material = material.parse().map_err(|name| ManifestError::UnknownMaterial { line, name })?;
            let visual_group: VisualGroup = visual_group
                .parse()
                .map_err(|g| malformed(line, format!("unknown visual group `{g}`")))?;
            if !is_valid_combination(material, visual_group) {
                return Err(ManifestError::InvalidPai {
                    line,
                    material,
                    visual_group,
                });
            }
            Some(PaiTag {
                species: species.to_string(),
                material,
                visual_group,
                variation: variation.to_string(),
            })
        }
    };

    let modalities = parse_modalities(field(8)).map_err(|m| malformed(line, format!("unknown modality `{m}`")))?;

    Ok(SampleRecord {
        sample_id: sample_id.to_string(),
        subject_id: subject_id.to_string(),
        session_id: field(2).to_string(),
        label,
        pai,
        modalities,
    })
}

fn parse_modalities(s: &str) -> Result<BTreeSet<Modality>, String> {
    if s.is_empty() {
        return Ok(BTreeSet::new());
    }
    s.split('+').map(|t| t.trim().parse::<Modality>()).collect()
}

pub fn format_modalities(modalities: &BTreeSet<Modality>) -> String {
    modalities.iter().map(|m| m.token()).collect::<Vec<_>>().join("+")
}

pub fn save_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<(), ManifestError> {
    let mut buf = Vec::new();
    write_manifest(manifest, &mut buf)?;
    crate::io::write_atomic(path.as_ref(), &buf)?;
    Ok(())
}

pub fn write_manifest<W: Write>(manifest: &Manifest, writer: W) -> Result<(), ManifestError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let io = |e: csv::Error| ManifestError::Io(std::io::Error::other(e));
    w.write_record(MANIFEST_HEADER).map_err(io)?;
    for rec in manifest.records() {
        let modalities = format_modalities(&rec.modalities);
        let (species, material, group, variation) = match &rec.pai {
            Some(p) => (p.species.as_str(), p.material.token(), p.visual_group.token(), p.variation.as_str()),
            None => ("", "", "", ""),
        };
        w.write_record([
            rec.sample_id.as_str(),
            rec.subject_id.as_str(),
            rec.session_id.as_str(),
            rec.label.token(),
            species,
            material,
            group,
            variation,
            modalities.as_str(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Attack-sample counts per visual group and per material group.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct GroupCounts {
    pub visual: BTreeMap<VisualGroup, usize>,
    pub material: BTreeMap<MaterialGroup, usize>,
    /// Attacks whose material belongs to no material group.
    pub ungrouped: usize,
}

impl GroupCounts {
    pub fn visual_total(&self) -> usize {
        self.visual.values().sum()
    }

    pub fn material_total(&self) -> usize {
        self.material.values().sum()
    }
}

pub fn group_counts(manifest: &Manifest) -> GroupCounts {
    let mut counts = GroupCounts {
        visual: VisualGroup::ALL.iter().map(|g| (*g, 0)).collect(),
        material: MaterialGroup::ALL.iter().map(|g| (*g, 0)).collect(),
        ungrouped: 0,
    };
    for pai in manifest.attacks().filter_map(|r| r.pai.as_ref()) {
        *counts.visual.entry(pai.visual_group).or_default() += 1;
        match pai.material_group() {
            Some(g) => *counts.material.entry(g).or_default() += 1,
            None => counts.ungrouped += 1,
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "sample_id,subject_id,session_id,label,species,material,visual_group,variation,modalities\n";

    #[test]
    fn pai_table_totals() {
        let species: usize = PAI_TABLE.iter().map(|r| r.variations).sum();
        let samples: usize = PAI_TABLE.iter().map(|r| r.samples).sum();
        assert_eq!(species, 45);
        assert_eq!(samples, 4339);
    }

    #[test]
    fn material_groups_are_disjoint_and_skip_bandage() {
        let mut seen = BTreeSet::new();
        for g in MaterialGroup::ALL {
            for m in g.members() {
                assert!(seen.insert(m), "{m} in two groups");
            }
        }
        assert_eq!(seen.len(), Material::ALL.len() - 1);
        assert!(!seen.contains(&Material::BandagePlaster));
        assert_eq!(MaterialGroup::of(Material::Urethane), Some(MaterialGroup::G1));
    }

    #[test]
    fn header_only_is_empty_manifest() {
        let m = read_manifest(HEADER.as_bytes()).unwrap();
        assert!(m.is_empty());
        let c = group_counts(&m);
        assert_eq!(c.visual_total(), 0);
        assert_eq!(c.material_total(), 0);
        assert_eq!(c.ungrouped, 0);
    }

    #[test]
    fn attack_without_species_is_inconsistent() {
        let text = format!("{HEADER}a1,s1,x,attack,,silicone,overlay_opaque,v1,swir\n");
        match read_manifest(text.as_bytes()) {
            Err(ManifestError::InconsistentLabel(id)) => assert_eq!(id, "a1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bona_fide_with_pai_is_inconsistent() {
        let text = format!("{HEADER}b1,s1,x,bonafide,sil,silicone,overlay_opaque,v1,swir\n");
        assert!(matches!(
            read_manifest(text.as_bytes()),
            Err(ManifestError::InconsistentLabel(_))
        ));
    }

    #[test]
    fn duplicate_and_unknown_material() {
        let dup = format!("{HEADER}b1,s1,x,bonafide,,,,,swir\nb1,s2,x,bonafide,,,,,swir\n");
        assert!(matches!(read_manifest(dup.as_bytes()), Err(ManifestError::DuplicateId(id)) if id == "b1"));

        let unknown = format!("{HEADER}a1,s1,x,attack,foo,kevlar,fakefinger,v1,swir\n");
        match read_manifest(unknown.as_bytes()) {
            Err(ManifestError::UnknownMaterial { line, name }) => {
                assert_eq!(line, 2);
                assert_eq!(name, "kevlar");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_combination_and_malformed_rows() {
        let bad_combo = format!("{HEADER}a1,s1,x,attack,g,glue,fakefinger,v1,swir\n");
        assert!(matches!(
            read_manifest(bad_combo.as_bytes()),
            Err(ManifestError::InvalidPai { .. })
        ));
        let short = format!("{HEADER}a1,s1,x\n");
        assert!(matches!(
            read_manifest(short.as_bytes()),
            Err(ManifestError::MalformedRow { line: 2, .. })
        ));
        let no_subject = format!("{HEADER}a1,,x,bonafide,,,,,swir\n");
        assert!(matches!(
            read_manifest(no_subject.as_bytes()),
            Err(ManifestError::MalformedRow { .. })
        ));
        assert!(matches!(
            read_manifest("id,label\n".as_bytes()),
            Err(ManifestError::MalformedRow { line: 1, .. })
        ));
    }

    #[test]
    fn modalities_round_trip() {
        let text = format!("{HEADER}b1,s1,x,bonafide,,,,,swir+laser\nb2,s1,x,bonafide,,,,,\n");
        let m = read_manifest(text.as_bytes()).unwrap();
        assert_eq!(m.get("b1").unwrap().modalities.len(), 2);
        assert!(m.get("b2").unwrap().modalities.is_empty());
        let mut out = Vec::new();
        write_manifest(&m, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }
}
