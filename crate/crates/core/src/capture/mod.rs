//! Headless capture: camera poses, box rasterization, annotations and the
//! on-disk dataset layout.
//!
//! ```text
//! <out>/images/<scene>_<var>_<frame>.ppm
//! <out>/annotations/<scene>_<var>_<frame>.json
//! <out>/manifest.json
//! <out>/provenance.json
//! ```

pub mod camera;
pub mod fov;
pub mod raster;
pub mod render;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::preproc::ops::{defaults, poses_from_spec};
use crate::rng::{uniform, StreamKey};
use crate::scene::{AugmentedScene, ProvenanceEntry, TrajectoryKind, TrajectoryPose, TrajectorySegment, TrajectorySpec, Vec3};

pub use camera::{project_point, CameraIntrinsics, Projection};
pub use fov::resolve_fov_obstacles;
pub use raster::RasterImage;
pub use render::{render_frame, snap_bbox, FrameAnnotation, ObjectAnnotation, BBOX_QUANTUM};

pub const TOOL_NAME: &str = "asda";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PROVENANCE_FILE: &str = "provenance.json";

#[derive(Debug, thiserror::Error)]
pub enum CaptureError {
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("scene {0} variation {1} has no trajectory anchors")]
    NoAnchors(String, usize),
    #[error("duplicate record {0}")]
    DuplicateRecord(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("{0}: {1}")]
    Json(String, #[source] serde_json::Error),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CaptureError + '_ {
    move |e| CaptureError::Io(path.display().to_string(), e)
}

/// One captured frame on disk. Paths are relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub image: String,
    pub annotation: String,
    pub scene_id: String,
    pub variation_index: usize,
    pub frame_index: usize,
    pub provenance_digest: String,
    pub objects: usize,
    #[serde(default)]
    pub fov_obstacles: usize,
}

impl DatasetRecord {
    pub fn key(&self) -> (String, usize, usize) {
        (self.scene_id.clone(), self.variation_index, self.frame_index)
    }
}

/// One augmentation applied to a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedAugment {
    pub op: String,
    pub params: serde_json::Value,
}

/// Source-to-augmented lineage written by post-processing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedRecord {
    pub source_image: String,
    pub image: String,
    pub annotation: String,
    pub ops: Vec<AppliedAugment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub master_seed: u64,
    pub intrinsics: CameraIntrinsics,
    pub records: Vec<DatasetRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub augmented: Vec<AugmentedRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn new(master_seed: u64, intrinsics: CameraIntrinsics) -> Self {
        Self {
            tool: TOOL_NAME.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            intrinsics,
            records: Vec::new(),
            augmented: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn load(dataset_dir: &Path) -> Result<Self, CaptureError> {
        let path = dataset_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| CaptureError::Json(path.display().to_string(), e))
    }
}

/// Per-variation provenance plus the FOV obstacles resolved at capture time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationProvenance {
    pub scene_id: String,
    pub scene_class: String,
    pub variation_index: usize,
    pub digest: String,
    pub provenance: Vec<ProvenanceEntry>,
    pub fov_spawns: Vec<FovSpawn>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FovSpawn {
    pub frame_index: usize,
    pub center: Vec3,
}

/// Cylindrical plan around every anchor for scenes without a trajectory op.
pub fn default_trajectory_spec(scene: &AugmentedScene) -> Option<TrajectorySpec> {
    let mut anchors = scene.anchors.clone();
    if anchors.is_empty() {
        anchors = scene.main_instances().map(|i| i.position).collect();
    }
    if anchors.is_empty() {
        return None;
    }
    let key = StreamKey::new(scene.master_seed).with_str(&scene.base).with_u64(scene.variation_index as u64).with_str("default-trajectory");
    let mut rng = key.stream();
    let segments = anchors
        .into_iter()
        .map(|anchor| TrajectorySegment {
            kind: TrajectoryKind::Cylindrical,
            anchor,
            target: None,
            standoff: uniform(&mut rng, defaults::STANDOFF[0], defaults::STANDOFF[1]),
            altitude: defaults::FIXED_ALTITUDE,
            n_poses: defaults::POSES_PER_RING,
            capture_distance: defaults::FIXED_CAPTURE_DISTANCE,
            phase: uniform(&mut rng, 0.0, std::f64::consts::TAU),
        })
        .collect();
    Some(TrajectorySpec { segments, pose_jitter: 0.0, jitter_seed: key.seed64() })
}

/// Camera poses for a scene: the resolved trajectory, else its plan, else a
/// default ring around every anchor.
pub fn generate_poses(scene: &AugmentedScene, intrinsics: &CameraIntrinsics) -> Result<Vec<TrajectoryPose>, CaptureError> {
    intrinsics.validate()?;
    if !scene.trajectory.is_empty() {
        return Ok(scene.trajectory.clone());
    }
    let spec = match &scene.trajectory_spec {
        Some(s) if !s.segments.is_empty() => s.clone(),
        _ => default_trajectory_spec(scene).ok_or_else(|| CaptureError::NoAnchors(scene.base.clone(), scene.variation_index))?,
    };
    Ok(poses_from_spec(&spec))
}

/// Replaces characters that are awkward in file names.
pub fn file_stem(scene_id: &str, variation: usize, frame: usize) -> String {
    let id: String = scene_id.trim().chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
    format!("{id}_{variation}_{frame}")
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CaptureError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CaptureError::Json(path.display().to_string(), e))?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

/// Writes through a temporary file so readers never see a partial file.
fn write_json_atomic(path: &Path, value: &impl Serialize) -> Result<(), CaptureError> {
    let tmp = path.with_extension("json.tmp");
    write_json(&tmp, value)?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

/// Sorts records by (scene, variation, frame), rejects duplicate keys and
/// writes `manifest.json` under `dataset_dir`.
pub fn write_dataset(dataset_dir: &Path, manifest: &mut Manifest) -> Result<PathBuf, CaptureError> {
    manifest.records.sort_by_key(DatasetRecord::key);
    let mut seen = HashSet::new();
    for r in &manifest.records {
        if !seen.insert(r.key()) {
            return Err(CaptureError::DuplicateRecord(format!("{}#{}/{}", r.scene_id, r.variation_index, r.frame_index)));
        }
    }
    let path = dataset_dir.join(MANIFEST_FILE);
    std::fs::create_dir_all(dataset_dir).map_err(io_err(dataset_dir))?;
    write_json_atomic(&path, manifest)?;
    Ok(path)
}

struct FrameJob<'a> {
    scene: &'a AugmentedScene,
    digest: &'a str,
    pose: TrajectoryPose,
}

fn capture_frame(job: &FrameJob<'_>, intrinsics: &CameraIntrinsics, out: &Path) -> Result<(DatasetRecord, Vec<FovSpawn>), CaptureError> {
    let (image, annotation) = render_frame(job.scene, &job.pose, intrinsics);
    let stem = file_stem(&job.scene.base, job.scene.variation_index, job.pose.frame_index);
    let image_rel = format!("images/{stem}.ppm");
    let ann_rel = format!("annotations/{stem}.json");
    let image_path = out.join(&image_rel);
    image.write_ppm(&image_path).map_err(io_err(&image_path))?;
    write_json(&out.join(&ann_rel), &annotation)?;
    let spawns = annotation.fov_obstacles.iter().map(|c| FovSpawn { frame_index: job.pose.frame_index, center: *c }).collect();
    let record = DatasetRecord {
        image: image_rel,
        annotation: ann_rel,
        scene_id: job.scene.base.clone(),
        variation_index: job.scene.variation_index,
        frame_index: job.pose.frame_index,
        provenance_digest: job.digest.to_string(),
        objects: annotation.objects.len(),
        fov_obstacles: annotation.fov_obstacles.len(),
    };
    Ok((record, spawns))
}

/// Renders every pose of every scene into `output_dir` and writes the
/// manifest and provenance files. Output bytes do not depend on `workers`.
pub fn collect_data(scenes: &[AugmentedScene], intrinsics: &CameraIntrinsics, output_dir: &Path, workers: usize) -> Result<Manifest, CaptureError> {
    intrinsics.validate()?;
    for sub in ["images", "annotations"] {
        let dir = output_dir.join(sub);
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }
    let master_seed = scenes.first().map_or(0, |s| s.master_seed);
    let mut manifest = Manifest::new(master_seed, *intrinsics);
    let digests: Vec<String> = scenes.iter().map(AugmentedScene::provenance_digest).collect();

    let mut jobs = Vec::new();
    for (scene, digest) in scenes.iter().zip(&digests) {
        match generate_poses(scene, intrinsics) {
            Ok(poses) => jobs.extend(poses.into_iter().map(|pose| FrameJob { scene, digest, pose })),
            Err(e @ CaptureError::NoAnchors(..)) => manifest.warnings.push(e.to_string()),
            Err(e) => return Err(e),
        }
    }
    let run = |j: &FrameJob<'_>| capture_frame(j, intrinsics, output_dir);
    let results: Vec<Result<(DatasetRecord, Vec<FovSpawn>), CaptureError>> = if workers <= 1 {
        jobs.iter().map(run).collect()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(|| jobs.par_iter().map(run).collect()),
            Err(_) => jobs.iter().map(run).collect(),
        }
    };

    let mut provenance: Vec<VariationProvenance> = scenes
        .iter()
        .zip(&digests)
        .map(|(s, d)| VariationProvenance {
            scene_id: s.base.clone(),
            scene_class: s.scene_class.clone(),
            variation_index: s.variation_index,
            digest: d.clone(),
            provenance: s.provenance.clone(),
            fov_spawns: Vec::new(),
            warnings: s.warnings.clone(),
        })
        .collect();
    for (job, result) in jobs.iter().zip(results) {
        let (record, spawns) = result?;
        let slot = scenes.iter().position(|s| std::ptr::eq(s, job.scene)).expect("job scene comes from input");
        provenance[slot].fov_spawns.extend(spawns);
        manifest.records.push(record);
    }
    write_json_atomic(&output_dir.join(PROVENANCE_FILE), &provenance)?;
    write_dataset(output_dir, &mut manifest)?;
    Ok(manifest)
}
