use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::render::render_composite;
use super::room::procedural_room;
use super::scene::{place_objects, ScenePlacement};
use super::{mix_seed, SynthConfig};
use crate::error::{Error, Result};
use crate::image::{BinaryMask, EquirectPanorama};
use crate::io::{load_mask, load_panorama, save_mask, save_panorama};
use crate::maskops::{perturb, PerturbParams};

/// Fine-tuning sample: furnished input, object-only mask, empty target.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTriple {
    pub input: EquirectPanorama,
    /// Object silhouettes, perturbed when the config asks for it.
    pub mask: BinaryMask,
    pub target: EquirectPanorama,
    pub object_mask: BinaryMask,
    pub support: BinaryMask,
    pub placement: ScenePlacement,
}

/// Evaluation case with an exact silhouette mask.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCase {
    pub furnished: EquirectPanorama,
    pub mask: BinaryMask,
    pub ground_truth: EquirectPanorama,
    pub support: BinaryMask,
    pub placement: ScenePlacement,
}

pub fn make_training_triple(
    empty: &EquirectPanorama,
    config: &SynthConfig,
    seed: u64,
) -> Result<TrainingTriple> {
    let placement = place_objects(empty, config, seed)?;
    let composite = render_composite(empty, &placement);
    let mask = match &config.perturb {
        Some(p) => perturb(
            &composite.object_mask,
            &PerturbParams {
                seed: mix_seed(seed, 2),
                ..p.clone()
            },
        )?,
        None => composite.object_mask.clone(),
    };
    Ok(TrainingTriple {
        input: composite.furnished,
        mask,
        target: empty.clone(),
        object_mask: composite.object_mask,
        support: composite.support,
        placement,
    })
}

pub fn make_eval_case(empty: &EquirectPanorama, config: &SynthConfig, seed: u64) -> Result<EvalCase> {
    let placement = place_objects(empty, config, seed)?;
    let composite = render_composite(empty, &placement);
    Ok(EvalCase {
        furnished: composite.furnished,
        mask: composite.object_mask,
        ground_truth: empty.clone(),
        support: composite.support,
        placement,
    })
}

/// Hex SHA-256 of the config's JSON form.
pub fn config_hash(config: &SynthConfig) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        write!(out, "{b:02x}").unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    Train,
    Eval,
}

impl CaseKind {
    fn as_str(self) -> &'static str {
        match self {
            CaseKind::Train => "train",
            CaseKind::Eval => "eval",
        }
    }
}

impl std::str::FromStr for CaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(CaseKind::Train),
            "eval" => Ok(CaseKind::Eval),
            other => Err(Error::param(format!("unknown case kind `{other}`"))),
        }
    }
}

/// Where empty panoramas come from.
#[derive(Debug, Clone)]
pub enum EmptySource {
    /// Procedural box rooms of `SynthConfig::width`.
    Procedural,
    /// Existing panoramas, used round-robin.
    Files(Vec<PathBuf>),
}

/// One manifest line. Relative paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub case_id: String,
    pub kind: CaseKind,
    pub empty_path: String,
    pub seed: u64,
    pub config_hash: String,
    /// Furnished panorama.
    pub input_path: String,
    pub mask_path: String,
    /// Empty panorama (training target or evaluation ground truth).
    pub target_path: String,
    pub support_path: String,
}

impl ManifestRecord {
    pub fn resolve(base: &Path, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }
}

/// Images of one generated case, independent of its kind.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCase {
    pub input: EquirectPanorama,
    pub mask: BinaryMask,
    pub target: EquirectPanorama,
    pub support: BinaryMask,
}

fn generate_case(
    empty: &EquirectPanorama,
    kind: CaseKind,
    config: &SynthConfig,
    seed: u64,
) -> Result<GeneratedCase> {
    Ok(match kind {
        CaseKind::Train => {
            let t = make_training_triple(empty, config, seed)?;
            GeneratedCase {
                input: t.input,
                mask: t.mask,
                target: t.target,
                support: t.support,
            }
        }
        CaseKind::Eval => {
            let e = make_eval_case(empty, config, seed)?;
            GeneratedCase {
                input: e.furnished,
                mask: e.mask,
                target: e.ground_truth,
                support: e.support,
            }
        }
    })
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes `count` cases plus `manifest.ndjson` under `out_dir`.
///
/// Case `i` uses seed `base_seed + i`.
pub fn generate_dataset(
    out_dir: &Path,
    source: &EmptySource,
    kind: CaseKind,
    count: usize,
    base_seed: u64,
    config: &SynthConfig,
) -> Result<Vec<ManifestRecord>> {
    config.validate()?;
    if let EmptySource::Files(files) = source {
        if files.is_empty() {
            return Err(Error::param("no empty panoramas given"));
        }
    }
    for sub in ["empty", "input", "mask", "target", "support"] {
        create_dir(&out_dir.join(sub))?;
    }
    let hash = config_hash(config);
    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let seed = base_seed.wrapping_add(i as u64);
        let case_id = format!("{}_{i:05}", kind.as_str());
        let (empty, empty_path) = match source {
            EmptySource::Procedural => {
                let img = procedural_room(config.width, config.camera_height, mix_seed(seed, 1));
                let rel = format!("empty/{case_id}.png");
                save_panorama(&out_dir.join(&rel), &img)?;
                (img, rel)
            }
            EmptySource::Files(files) => {
                let path = &files[i % files.len()];
                let abs = std::path::absolute(path).map_err(|e| Error::io(path, e))?;
                (load_panorama(path)?, abs.to_string_lossy().into_owned())
            }
        };
        let case = generate_case(&empty, kind, config, seed)?;
        let rel = |dir: &str| format!("{dir}/{case_id}.png");
        let record = ManifestRecord {
            case_id: case_id.clone(),
            kind,
            empty_path,
            seed,
            config_hash: hash.clone(),
            input_path: rel("input"),
            mask_path: rel("mask"),
            target_path: rel("target"),
            support_path: rel("support"),
        };
        save_panorama(&out_dir.join(&record.input_path), &case.input)?;
        save_mask(&out_dir.join(&record.mask_path), &case.mask)?;
        save_panorama(&out_dir.join(&record.target_path), &case.target)?;
        save_mask(&out_dir.join(&record.support_path), &case.support)?;
        records.push(record);
    }
    write_manifest(&out_dir.join("manifest.ndjson"), &records)?;
    Ok(records)
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}

/// Re-runs generation for a record from its stored empty panorama and seed.
pub fn regenerate(
    record: &ManifestRecord,
    manifest_dir: &Path,
    config: &SynthConfig,
) -> Result<GeneratedCase> {
    let hash = config_hash(config);
    if hash != record.config_hash {
        return Err(Error::Config(format!(
            "case {} was generated with config {}, not {hash}",
            record.case_id, record.config_hash
        )));
    }
    let empty = load_panorama(&ManifestRecord::resolve(manifest_dir, &record.empty_path))?;
    generate_case(&empty, record.kind, config, record.seed)
}

impl GeneratedCase {
    /// Loads the stored images of a record.
    pub fn load(record: &ManifestRecord, manifest_dir: &Path) -> Result<Self> {
        let p = |s: &str| ManifestRecord::resolve(manifest_dir, s);
        Ok(Self {
            input: load_panorama(&p(&record.input_path))?,
            mask: load_mask(&p(&record.mask_path))?,
            target: load_panorama(&p(&record.target_path))?,
            support: load_mask(&p(&record.support_path))?,
        })
    }
}
