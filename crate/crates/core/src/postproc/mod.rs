//! Post-processing: probability-gated image augmentations applied to a
//! captured dataset.
//!
//! Augmented copies land beside the originals as `<stem>_aug<k>.ppm` and
//! `<stem>_aug<k>.json`; the manifest gains one lineage entry per copy.
//! Originals are never touched.

pub mod effects;
pub mod ops;
pub mod warp;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capture::{write_dataset, AppliedAugment, AugmentedRecord, CaptureError, DatasetRecord, FrameAnnotation, Manifest, ObjectAnnotation, RasterImage};
use crate::preproc::params::validate_params;
use crate::preproc::{ParamValue, Params};
use crate::rng::StreamKey;

pub use effects::{Effect, ValueNoise, Visibility};
pub use ops::{AugmentOp, EffectRegistry, FlipAxis, Lattice};

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("unknown augmentation `{0}`")]
    UnknownOperation(String),
    #[error("invalid parameter `{param}` for `{op}`: {reason}")]
    InvalidParams { op: String, param: String, reason: String },
    #[error("augmentation `{0}` is already registered")]
    DuplicateName(String),
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("unknown effect `{0}`")]
    UnknownEffect(String),
    #[error(transparent)]
    Capture(#[from] CaptureError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentOpSpec {
    pub name: String,
    pub probability: f64,
    #[serde(default)]
    pub params: Params,
}

impl AugmentOpSpec {
    pub fn new(name: &str, probability: f64) -> Self {
        Self { name: name.to_string(), probability, params: Params::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<ParamValue>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }
}

#[derive(Clone)]
pub struct PostPipeline {
    ops: Vec<AugmentOpSpec>,
    master_seed: u64,
    registry: BTreeMap<String, Arc<dyn AugmentOp>>,
    effects: EffectRegistry,
}

impl fmt::Debug for PostPipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PostPipeline")
            .field("ops", &self.ops)
            .field("master_seed", &self.master_seed)
            .field("registry", &self.registry.keys().collect::<Vec<_>>())
            .field("effects", &self.effects.keys().collect::<Vec<_>>())
            .finish()
    }
}

/// Result of augmenting one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub image: RasterImage,
    pub objects: Vec<ObjectAnnotation>,
    pub applied: Vec<AppliedAugment>,
}

impl PostPipeline {
    pub fn new(master_seed: u64) -> Self {
        let registry = ops::builtins().into_iter().map(|op| (op.name().to_string(), op)).collect();
        Self { ops: Vec::new(), master_seed, registry, effects: ops::builtin_effects() }
    }

    pub fn ops(&self) -> &[AugmentOpSpec] {
        &self.ops
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn set_master_seed(&mut self, seed: u64) {
        self.master_seed = seed;
    }

    pub fn operation_names(&self) -> Vec<String> {
        self.registry.keys().cloned().collect()
    }

    pub fn schema_of(&self, name: &str) -> Option<Vec<crate::preproc::ParamSchema>> {
        self.registry.get(name).map(|op| op.schema())
    }

    pub fn register(&mut self, op: Arc<dyn AugmentOp>) -> Result<&mut Self, AugmentError> {
        let name = op.name().to_string();
        if self.registry.contains_key(&name) {
            return Err(AugmentError::DuplicateName(name));
        }
        self.registry.insert(name, op);
        Ok(self)
    }

    pub fn register_effect(&mut self, effect: Arc<dyn Effect>) -> Result<&mut Self, AugmentError> {
        let name = effect.name().to_string();
        if self.effects.contains_key(&name) {
            return Err(AugmentError::DuplicateName(name));
        }
        self.effects.insert(name, effect);
        Ok(self)
    }

    pub fn validate(&self, spec: &AugmentOpSpec) -> Result<(), AugmentError> {
        let op = self.registry.get(&spec.name).ok_or_else(|| AugmentError::UnknownOperation(spec.name.clone()))?;
        let invalid = |param: String, reason: String| AugmentError::InvalidParams { op: spec.name.clone(), param, reason };
        if !(0.0..=1.0).contains(&spec.probability) {
            return Err(invalid("probability".into(), format!("{} outside [0, 1]", spec.probability)));
        }
        let schema = op.schema();
        if !schema.is_empty() {
            validate_params(&schema, &spec.params).map_err(|(p, r)| invalid(p, r))?;
        }
        op.check(&spec.params, &self.effects).map_err(|(p, r)| invalid(p, r))
    }

    pub fn add(&mut self, spec: AugmentOpSpec) -> Result<&mut Self, AugmentError> {
        self.validate(&spec)?;
        self.ops.push(spec);
        Ok(self)
    }

    fn op_key(&self, record: &str, copy: usize, ordinal: usize) -> StreamKey {
        StreamKey::new(self.master_seed).with_str("postproc").with_str(record).with_u64(copy as u64).with_u64(ordinal as u64)
    }

    /// Whether op `ordinal` fires for copy `copy` of the record keyed `record`.
    pub fn gate(&self, record: &str, copy: usize, ordinal: usize) -> bool {
        let p = self.ops.get(ordinal).map_or(0.0, |o| o.probability);
        self.op_key(record, copy, ordinal).with_str("gate").stream().gen::<f64>() < p
    }

    /// Runs every op, in script order, on one image. `record` keys the
    /// random streams, so the same record and copy always augment alike.
    pub fn augment(&self, record: &str, copy: usize, image: &RasterImage, objects: &[ObjectAnnotation]) -> Result<Augmented, AugmentError> {
        let mut out = Augmented { image: image.clone(), objects: objects.to_vec(), applied: Vec::new() };
        for (ordinal, spec) in self.ops.iter().enumerate() {
            if !self.gate(record, copy, ordinal) {
                continue;
            }
            let op = self.registry.get(&spec.name).ok_or_else(|| AugmentError::UnknownOperation(spec.name.clone()))?;
            let mut rng = self.op_key(record, copy, ordinal).with_str("params").stream();
            let params = op.apply(&mut out.image, &mut out.objects, &spec.params, &self.effects, &mut rng)?;
            out.applied.push(AppliedAugment { op: spec.name.clone(), params });
        }
        Ok(out)
    }
}

/// A record that could not be augmented; the rest of the run proceeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AugmentFailure {
    pub image: String,
    pub error: String,
}

#[derive(Debug, Default)]
pub struct PostprocReport {
    pub augmented: Vec<AugmentedRecord>,
    pub failures: Vec<AugmentFailure>,
}

impl PostprocReport {
    /// Number of (record, op) applications across the run.
    pub fn applications(&self) -> usize {
        self.augmented.iter().map(|a| a.ops.len()).sum()
    }
}

fn aug_path(rel: &str, copy: usize) -> String {
    match rel.rsplit_once('.') {
        Some((stem, ext)) => format!("{stem}_aug{copy}.{ext}"),
        None => format!("{rel}_aug{copy}"),
    }
}

fn augment_record(pipeline: &PostPipeline, dir: &Path, record: &DatasetRecord, copy: usize) -> Result<AugmentedRecord, AugmentError> {
    let image_path = dir.join(&record.image);
    let ann_path = dir.join(&record.annotation);
    let io = |p: &Path| {
        let p = p.display().to_string();
        move |e| AugmentError::Capture(CaptureError::Io(p, e))
    };
    let image = RasterImage::read_ppm(&image_path).map_err(io(&image_path))?;
    let ann_bytes = std::fs::read(&ann_path).map_err(io(&ann_path))?;
    let mut annotation: FrameAnnotation =
        serde_json::from_slice(&ann_bytes).map_err(|e| CaptureError::Json(ann_path.display().to_string(), e))?;

    let out = pipeline.augment(&record.image, copy, &image, &annotation.objects)?;
    let (img_rel, ann_rel) = (aug_path(&record.image, copy), aug_path(&record.annotation, copy));
    let img_out = dir.join(&img_rel);
    out.image.write_ppm(&img_out).map_err(io(&img_out))?;
    let ann_out = dir.join(&ann_rel);
    if out.objects == annotation.objects {
        // Copy verbatim so untouched annotations stay byte-identical.
        std::fs::write(&ann_out, &ann_bytes).map_err(io(&ann_out))?;
    } else {
        annotation.objects = out.objects;
        let text = serde_json::to_string_pretty(&annotation).map_err(|e| CaptureError::Json(ann_out.display().to_string(), e))?;
        std::fs::write(&ann_out, text + "\n").map_err(io(&ann_out))?;
    }
    Ok(AugmentedRecord { source_image: record.image.clone(), image: img_rel, annotation: ann_rel, ops: out.applied })
}

/// Augments every record of the dataset at `dataset_dir` `copies` times and
/// records the lineage in its manifest. Per-record failures are reported,
/// not fatal.
pub fn postproc_run(pipeline: &PostPipeline, dataset_dir: &Path, copies: usize, workers: usize) -> Result<PostprocReport, AugmentError> {
    let mut manifest = Manifest::load(dataset_dir)?;
    let jobs: Vec<(&DatasetRecord, usize)> = manifest.records.iter().flat_map(|r| (0..copies).map(move |k| (r, k))).collect();
    let run = |&(r, k): &(&DatasetRecord, usize)| augment_record(pipeline, dataset_dir, r, k);
    let results: Vec<Result<AugmentedRecord, AugmentError>> = if workers <= 1 {
        jobs.iter().map(run).collect()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(|| jobs.par_iter().map(run).collect()),
            Err(_) => jobs.iter().map(run).collect(),
        }
    };
    let mut report = PostprocReport::default();
    for ((record, _), result) in jobs.iter().zip(results) {
        match result {
            Ok(a) => report.augmented.push(a),
            Err(e) => {
                log::warn!("augmentation of {} failed: {e}", record.image);
                report.failures.push(AugmentFailure { image: record.image.clone(), error: e.to_string() });
            }
        }
    }
    let fresh: std::collections::HashSet<&str> = report.augmented.iter().map(|a| a.image.as_str()).collect();
    let mut lineage: Vec<AugmentedRecord> = manifest.augmented.iter().filter(|a| !fresh.contains(a.image.as_str())).cloned().collect();
    lineage.extend(report.augmented.iter().cloned());
    lineage.sort_by(|a, b| a.image.cmp(&b.image));
    manifest.augmented = lineage;
    manifest.warnings.extend(report.failures.iter().map(|f| format!("postproc {}: {}", f.image, f.error)));
    write_dataset(dataset_dir, &mut manifest)?;
    Ok(report)
}
