//! `padbench` command-line front end.
//!
//! Failures print one JSON object on stderr, e.g.
//! `{"error":"usage","message":"..."}`. Usage errors exit with 2, data
//! errors with 1.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::cube::{CubeError, CubeStore, CubeWriter};
use crate::fusion::{self, FusionError, FusionSpec};
use crate::manifest::{self, ManifestError};
use crate::metrics::{MetricsError, DEFAULT_TARGET_BPCER};
use crate::oneclass::{self, OneClassError, SubspaceModel};
use crate::partition::{self, Partition, PartitionError, PartitionKind, PartitionSpec, Subset};
use crate::report::{self, ReportError};
use crate::rng;
use crate::scores::{self, Orientation, ScoreError, ScoreSet};
use crate::synth::{self, SynthConfig, SynthError};
use crate::IdSet;

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const CUBES_DIR: &str = "cubes";
pub const SCORES_DIR: &str = "scores";

#[derive(Debug, Parser)]
#[command(name = "padbench", version, about = "Fingerprint PAD benchmark toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic manifest, cubes and score files.
    Synth {
        /// JSON synth config; `seed` is required.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a baseline or leave-one-group-out partition.
    Partition {
        #[arg(long)]
        manifest: PathBuf,
        /// `baseline` or `loo:<fakefinger|overlay|opaque|transparent|semi|mat1|mat2|mat3|mat4>`.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate score files on a partition's test set.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        partition: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        scores: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Optional fusion spec evaluated alongside the algorithms.
        #[arg(long)]
        fusion: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TARGET_BPCER)]
        target_bpcer: f64,
    },
    /// Write a fused score file.
    Fuse {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        scores: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Restricts fusion to the partition's ids and supplies min-max fit ids.
        #[arg(long)]
        partition: Option<PathBuf>,
    },
    /// Grid-search pairwise fusion weights.
    SweepWeights {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        partition: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long, default_value = "validation")]
        tune: Subset,
        #[arg(long, default_value_t = DEFAULT_TARGET_BPCER)]
        target_bpcer: f64,
        /// Ranked results as JSON; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the one-class subspace model on training bona fides.
    OneclassTrain {
        #[arg(long)]
        cubes: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        partition: PathBuf,
        #[arg(long, default_value_t = oneclass::DEFAULT_K)]
        k: usize,
        /// Seeded subsample cap on training cubes.
        #[arg(long, default_value_t = 400)]
        max_train: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score every cube with a trained one-class model.
    OneclassScore {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        cubes: PathBuf,
        #[arg(long, default_value = "swir-oneclass")]
        algorithm: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    fn data(kind: &'static str, message: impl ToString) -> Self {
        CliError {
            kind,
            message: message.to_string(),
            exit_code: 1,
        }
    }

    fn usage(message: impl ToString) -> Self {
        CliError {
            kind: "usage",
            message: message.to_string(),
            exit_code: 2,
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            error: &'a str,
            message: &'a str,
        }
        serde_json::to_string(&Line {
            error: self.kind,
            message: &self.message,
        })
        .expect("plain strings serialize")
    }
}

macro_rules! data_error {
    ($($ty:ty => $kind:literal),* $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::data($kind, e)
            }
        })*
    };
}

data_error! {
    ManifestError => "manifest",
    PartitionError => "partition",
    ScoreError => "scores",
    MetricsError => "metrics",
    FusionError => "fusion",
    SynthError => "synth",
    CubeError => "cubes",
    OneClassError => "oneclass",
    ReportError => "report",
    std::io::Error => "io",
    serde_json::Error => "json",
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprintln!("{}", CliError::usage(e.to_string().trim_end()).to_json());
            return 2;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth { config, out } => {
            let text = std::fs::read_to_string(&config)?;
            let config: SynthConfig = serde_json::from_str(&text).map_err(|e| CliError::usage(format!("synth config: {e}")))?;
            synth_dataset(&config, &out)
        }
        Command::Partition {
            manifest,
            kind,
            seed,
            out,
        } => {
            let kind: PartitionKind = kind.parse().map_err(CliError::usage)?;
            let manifest = manifest::load_manifest(manifest)?;
            let p = partition::build_partition(&manifest, &PartitionSpec::new(kind, seed))?;
            p.save(&out)?;
            println!(
                "{}: train {} validation {} test {}",
                p.spec.name,
                p.train.len(),
                p.validation.len(),
                p.test.len()
            );
            Ok(())
        }
        Command::Evaluate {
            manifest,
            partition,
            scores,
            out,
            fusion,
            target_bpcer,
        } => {
            check_target(target_bpcer)?;
            let manifest = manifest::load_manifest(manifest)?;
            let partition = Partition::load(partition)?;
            let sets = load_all(&scores)?;
            let spec = fusion.map(FusionSpec::load).transpose()?;
            let report = report::run_evaluation(&manifest, &partition, &sets, spec.as_ref(), target_bpcer, &out)?;
            for r in report.algorithms.iter().chain(report.fusion.as_ref().map(|f| &f.result)) {
                println!(
                    "{} APCER {} at BPCER {} ({} APCEs)",
                    r.algorithm, r.apcer_percent, r.bpcer_percent, r.operating_point.apce_count
                );
            }
            Ok(())
        }
        Command::Fuse {
            spec,
            scores,
            out,
            partition,
        } => {
            let spec = FusionSpec::load(spec)?;
            let sets = load_all(&scores)?;
            let (ids, fit_ids) = match partition {
                Some(p) => {
                    let p = Partition::load(p)?;
                    (p.all_ids(), p.train_validation())
                }
                None => (common_ids(&spec, &sets), IdSet::new()),
            };
            let fused = fusion::fuse(&spec, &sets, &ids, &fit_ids)?;
            fused.save(out)?;
            Ok(())
        }
        Command::SweepWeights {
            a,
            b,
            manifest,
            partition,
            step,
            tune,
            target_bpcer,
            out,
        } => {
            check_target(target_bpcer)?;
            if tune == Subset::Train {
                return Err(CliError::usage("--tune must be `validation` or `test`"));
            }
            let (a, b) = (scores::load_scores(a)?, scores::load_scores(b)?);
            let manifest = manifest::load_manifest(manifest)?;
            let partition = Partition::load(partition)?;
            let results = fusion::weight_search(&a, &b, &manifest, partition.subset(tune), step, target_bpcer)?;
            let mut text = serde_json::to_string_pretty(&results)?;
            text.push('\n');
            match out {
                Some(path) => crate::io::write_atomic(&path, text.as_bytes())?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::OneclassTrain {
            cubes,
            manifest,
            partition,
            k,
            max_train,
            out,
        } => {
            if max_train == 0 {
                return Err(CliError::usage("--max-train must be at least 1"));
            }
            let manifest = manifest::load_manifest(manifest)?;
            let partition = Partition::load(partition)?;
            let ids = training_subsample(partition.bona_fides(Subset::Train, &manifest), max_train, partition.spec.seed);
            let mut store = CubeStore::open(cubes)?;
            let cubes = ids.iter().map(|id| store.get(id)).collect::<Result<Vec<_>, _>>()?;
            let model = oneclass::train(&cubes, k)?;
            model.save(&out)?;
            println!(
                "trained on {} cubes, k {}, captured variance {}",
                model.trained_on,
                model.k(),
                report::format_sig6(model.captured_variance)
            );
            Ok(())
        }
        Command::OneclassScore {
            model,
            cubes,
            algorithm,
            out,
        } => {
            let model = SubspaceModel::load(model)?;
            let mut store = CubeStore::open(cubes)?;
            let ids: Vec<String> = store.ids().cloned().collect();
            let mut scores = std::collections::BTreeMap::new();
            for id in ids {
                let cube = store.get(&id)?;
                scores.insert(id, model.score(&cube)?);
            }
            ScoreSet::new(algorithm, Orientation::HigherIsBonaFide, scores)?.save(out)?;
            Ok(())
        }
    }
}

fn check_target(target: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&target) {
        Ok(())
    } else {
        Err(CliError::usage("--target-bpcer must lie in [0,1]"))
    }
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<ScoreSet>, CliError> {
    Ok(paths.iter().map(scores::load_scores).collect::<Result<_, _>>()?)
}

/// Ids scored by every component of `spec`.
fn common_ids(spec: &FusionSpec, sets: &[ScoreSet]) -> IdSet {
    let mut out: Option<IdSet> = None;
    for c in &spec.components {
        if let Some(set) = sets.iter().find(|s| s.algorithm_id == c.algorithm) {
            let ids = set.ids();
            out = Some(match out {
                None => ids,
                Some(prev) => prev.intersection(&ids).cloned().collect(),
            });
        }
    }
    out.unwrap_or_default()
}

/// At most `max` ids, drawn by a seeded shuffle; returned sorted.
pub fn training_subsample(ids: IdSet, max: usize, seed: u64) -> IdSet {
    if ids.len() <= max {
        return ids;
    }
    let mut v: Vec<String> = ids.into_iter().collect();
    rng::shuffle(&mut rng::stream(seed, "oneclass/subsample"), &mut v);
    v.truncate(max);
    v.into_iter().collect()
}

/// Writes `manifest.csv`, `cubes/` (unless disabled) and `scores/<alg>.csv`.
pub fn synth_dataset(config: &SynthConfig, out: &Path) -> Result<(), CliError> {
    let manifest = synth::synth_manifest(config)?;
    manifest::save_manifest(&manifest, out.join(MANIFEST_FILE))?;
    if config.write_cubes {
        let mut writer = CubeWriter::create(out.join(CUBES_DIR))?;
        let mut records: Vec<_> = manifest.records().iter().collect();
        records.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        for rec in records {
            writer.push(&rec.sample_id, &synth::synth_cube(rec, config)?)?;
        }
        writer.finish()?;
    }
    for set in synth::synth_scores(&manifest, &config.score_profiles, config.seed)? {
        set.save(out.join(SCORES_DIR).join(format!("{}.csv", set.algorithm_id)))?;
    }
    println!(
        "{} bona fides, {} attacks written to {}",
        manifest.bona_fide_count(),
        manifest.attack_count(),
        out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_subcommand() {
        let ok = [
            vec!["padbench", "synth", "--config", "c.json", "--out", "d"],
            vec!["padbench", "partition", "--manifest", "m", "--kind", "loo:mat4", "--seed", "7", "--out", "p"],
            vec!["padbench", "evaluate", "--manifest", "m", "--partition", "p", "--scores", "a", "b", "--out", "o"],
            vec!["padbench", "fuse", "--spec", "s", "--scores", "a", "b", "--out", "f"],
            vec![
                "padbench", "sweep-weights", "--a", "a", "--b", "b", "--manifest", "m", "--partition", "p", "--step",
                "0.5", "--tune", "test",
            ],
            vec![
                "padbench", "oneclass-train", "--cubes", "c", "--manifest", "m", "--partition", "p", "--k", "4",
                "--out", "o",
            ],
            vec!["padbench", "oneclass-score", "--model", "m", "--cubes", "c", "--out", "o"],
        ];
        for args in ok {
            assert!(Cli::try_parse_from(&args).is_ok(), "{args:?}");
        }
        assert!(Cli::try_parse_from(["padbench", "partition", "--manifest", "m"]).is_err());
        assert!(Cli::try_parse_from(["padbench", "sweep-weights", "--tune", "sideways"]).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["padbench", "bogus"]), 2);
        assert_eq!(run(["padbench", "--help"]), 0);
        assert_eq!(
            run(["padbench", "partition", "--manifest", "/nonexistent/m.csv", "--kind", "baseline", "--seed", "1", "--out", "x"]),
            1
        );
        assert_eq!(
            run(["padbench", "partition", "--manifest", "m.csv", "--kind", "loo:nothing", "--seed", "1", "--out", "x"]),
            2
        );
    }

    #[test]
    fn error_line_is_json() {
        let e = CliError::data("scores", "bad \"row\"\nline 2");
        let v: serde_json::Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(v["error"], "scores");
        assert_eq!(v["message"], "bad \"row\"\nline 2");
    }

    #[test]
    fn subsample_is_seeded_and_bounded() {
        let ids: IdSet = (0..50).map(|i| format!("id{i:02}")).collect();
        let a = training_subsample(ids.clone(), 10, 3);
        assert_eq!(a.len(), 10);
        assert!(a.is_subset(&ids));
        assert_eq!(a, training_subsample(ids.clone(), 10, 3));
        assert_eq!(training_subsample(ids.clone(), 80, 3), ids);
    }
}
