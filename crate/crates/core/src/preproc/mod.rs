//! Pre-processing pipeline: probability-gated scene randomization in five
//! ordered layers.
//!
//! Each (scene, variation, op) triple gets its own random stream derived from
//! the master seed, so results do not depend on worker count or scheduling.
//! Ops run stable-sorted by layer; insertion order breaks ties.

mod context;
pub mod ops;
pub mod params;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::DistributionError;
use crate::rng::{Stream, StreamKey};
use crate::scene::{AugmentedScene, ProvenanceEntry, SceneSpecification};

pub use context::SceneContext;
pub use params::{params, ParamKind, ParamSchema, ParamValue, Params, ParamsExt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    AssetVariation = 1,
    AssetDistribution = 2,
    ObstacleGeneration = 3,
    GlobalVariation = 4,
    Trajectory = 5,
}

impl Layer {
    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Option<Self> {
        Some(match i {
            1 => Layer::AssetVariation,
            2 => Layer::AssetDistribution,
            3 => Layer::ObstacleGeneration,
            4 => Layer::GlobalVariation,
            5 => Layer::Trajectory,
            _ => return None,
        })
    }
}

/// Restricts an op to some scenes. Empty lists match everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneFilter {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scene_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scene_classes: Vec<String>,
}

impl SceneFilter {
    pub fn matches(&self, scene_id: &str, scene_class: &str) -> bool {
        let id_ok = self.scene_ids.is_empty() || self.scene_ids.iter().any(|s| s.trim() == scene_id.trim());
        let class_ok = self.scene_classes.is_empty() || self.scene_classes.iter().any(|c| c.trim() == scene_class.trim());
        id_ok && class_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationSpec {
    pub name: String,
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_filter: Option<SceneFilter>,
    #[serde(default)]
    pub params: Params,
}

impl OperationSpec {
    pub fn new(name: &str, probability: f64) -> Self {
        Self { name: name.to_string(), probability, scene_filter: None, params: Params::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<ParamValue>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn for_scenes(mut self, ids: &[&str]) -> Self {
        self.scene_filter.get_or_insert_with(Default::default).scene_ids = ids.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn for_classes(mut self, classes: &[&str]) -> Self {
        self.scene_filter.get_or_insert_with(Default::default).scene_classes = classes.iter().map(|s| s.to_string()).collect();
        self
    }
}

/// Per-invocation facts handed to an operation.
#[derive(Debug, Clone, Copy)]
pub struct OpCall {
    pub probability: f64,
    pub ordinal: usize,
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum OpError {
    #[error("unknown asset `{0}`")]
    UnknownAsset(String),
    #[error("asset `{0}` requires textures but its texture set is empty")]
    EmptyTextureSet(String),
    #[error("no instances of `{0}` to target")]
    NoTargetInstances(String),
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("invalid probability vector: {0}")]
    InvalidProbabilityVector(String),
    #[error("point-to-point trajectories need at least two anchors")]
    NeedTwoAnchors,
    #[error("no trajectory anchors")]
    NoAnchors,
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error("{0}")]
    Other(String),
}

/// A randomization operation. Implement this to extend the pipeline.
pub trait Operation: Send + Sync {
    fn name(&self) -> &str;
    fn layer(&self) -> Layer;
    fn schema(&self) -> Vec<ParamSchema> {
        Vec::new()
    }
    /// Cross-parameter checks beyond the schema. Returns (param, reason).
    fn check(&self, _params: &Params) -> Result<(), (String, String)> {
        Ok(())
    }
    /// Mutates `scene`; returns the resolved parameters for provenance.
    fn perform(
        &self,
        scene: &mut AugmentedScene,
        ctx: &SceneContext,
        params: &Params,
        call: OpCall,
        rng: &mut Stream,
    ) -> Result<serde_json::Value, OpError>;
}

type CustomFn = dyn Fn(&mut AugmentedScene, &Params, &mut Stream) -> Result<(), OpError> + Send + Sync;

/// Closure-backed custom operation. Accepts any parameters.
pub struct FnOperation {
    name: String,
    layer: Layer,
    f: Box<CustomFn>,
}

impl FnOperation {
    pub fn new(
        name: &str,
        layer: Layer,
        f: impl Fn(&mut AugmentedScene, &Params, &mut Stream) -> Result<(), OpError> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.to_string(), layer, f: Box::new(f) }
    }
}

impl Operation for FnOperation {
    fn name(&self) -> &str {
        &self.name
    }

    fn layer(&self) -> Layer {
        self.layer
    }

    fn perform(&self, scene: &mut AugmentedScene, _: &SceneContext, params: &Params, _: OpCall, rng: &mut Stream) -> Result<serde_json::Value, OpError> {
        (self.f)(scene, params, rng)?;
        Ok(serde_json::to_value(params).unwrap_or_default())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("unknown operation `{0}`")]
    UnknownOperation(String),
    #[error("invalid parameter `{param}` for `{op}`: {reason}")]
    InvalidParams { op: String, param: String, reason: String },
    #[error("operation `{0}` is already registered")]
    DuplicateName(String),
    #[error("scene id `{0}` appears more than once")]
    DuplicateScene(String),
    #[error("variations_per_scene must be >= 1")]
    NoVariations,
}

/// A variation that failed; the rest of the run proceeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationFailure {
    pub scene_id: String,
    pub variation_index: usize,
    pub op: String,
    pub error: String,
}

impl fmt::Display for VariationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{} {}: {}", self.scene_id, self.variation_index, self.op, self.error)
    }
}

#[derive(Debug, Default)]
pub struct RunOutput {
    pub scenes: Vec<AugmentedScene>,
    pub failures: Vec<VariationFailure>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: String,
    pub layer: u8,
    pub params: Vec<ParamSchema>,
}

#[derive(Clone)]
pub struct Pipeline {
    ops: Vec<OperationSpec>,
    master_seed: u64,
    registry: BTreeMap<String, Arc<dyn Operation>>,
}

impl fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Pipeline")
            .field("ops", &self.ops)
            .field("master_seed", &self.master_seed)
            .field("registry", &self.registry.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Pipeline {
    /// Empty pipeline with every built-in operation registered.
    pub fn new(master_seed: u64) -> Self {
        let mut registry: BTreeMap<String, Arc<dyn Operation>> = BTreeMap::new();
        for op in ops::builtins() {
            registry.insert(op.name().to_string(), op);
        }
        Self { ops: Vec::new(), master_seed, registry }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn set_master_seed(&mut self, seed: u64) {
        self.master_seed = seed;
    }

    pub fn ops(&self) -> &[OperationSpec] {
        &self.ops
    }

    pub fn operation(&self, name: &str) -> Option<&Arc<dyn Operation>> {
        self.registry.get(name)
    }

    pub fn register(&mut self, op: Arc<dyn Operation>) -> Result<&mut Self, PipelineError> {
        let name = op.name().to_string();
        if self.registry.contains_key(&name) {
            return Err(PipelineError::DuplicateName(name));
        }
        self.registry.insert(name, op);
        Ok(self)
    }

    pub fn register_custom_operation(
        &mut self,
        name: &str,
        layer: Layer,
        f: impl Fn(&mut AugmentedScene, &Params, &mut Stream) -> Result<(), OpError> + Send + Sync + 'static,
    ) -> Result<&mut Self, PipelineError> {
        self.register(Arc::new(FnOperation::new(name, layer, f)))
    }

    /// Validates `spec` against the registry and appends it.
    pub fn add(&mut self, spec: OperationSpec) -> Result<&mut Self, PipelineError> {
        self.validate(&spec)?;
        self.ops.push(spec);
        Ok(self)
    }

    pub fn validate(&self, spec: &OperationSpec) -> Result<(), PipelineError> {
        let op = self.registry.get(&spec.name).ok_or_else(|| PipelineError::UnknownOperation(spec.name.clone()))?;
        let invalid = |param: &str, reason: String| PipelineError::InvalidParams { op: spec.name.clone(), param: param.to_string(), reason };
        if !(0.0..=1.0).contains(&spec.probability) {
            return Err(invalid("probability", format!("{} outside [0, 1]", spec.probability)));
        }
        let schema = op.schema();
        if !schema.is_empty() {
            params::validate_params(&schema, &spec.params).map_err(|(p, r)| invalid(&p, r))?;
        }
        op.check(&spec.params).map_err(|(p, r)| invalid(&p, r))
    }

    /// Insertion indices in execution order.
    pub fn execution_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.ops.len()).collect();
        order.sort_by_key(|&i| self.registry[&self.ops[i].name].layer());
        order
    }

    /// Machine-readable parameter catalog of every registered operation.
    pub fn catalog(&self) -> Vec<CatalogEntry> {
        self.registry
            .values()
            .map(|op| CatalogEntry { name: op.name().to_string(), layer: op.layer().index(), params: op.schema() })
            .collect()
    }

    pub fn catalog_json(&self) -> String {
        serde_json::to_string_pretty(&self.catalog()).expect("catalog serializes")
    }

    fn op_key(&self, scene_id: &str, variation: usize, ordinal: usize) -> StreamKey {
        StreamKey::new(self.master_seed).with_str(scene_id).with_u64(variation as u64).with_u64(ordinal as u64)
    }

    /// Produces one variation of the scene behind `ctx`.
    pub fn run_variation(&self, ctx: &SceneContext, variation_index: usize) -> Result<AugmentedScene, VariationFailure> {
        let spec = &ctx.spec;
        let scene_id = ctx.scene_id();
        let mut scene = AugmentedScene::new(scene_id, &spec.scene_class, variation_index, spec.default_global.clone());
        scene.base_geometry = Arc::clone(&ctx.geometry);
        scene.master_seed = self.master_seed;
        scene.warnings.extend(ctx.warnings.iter().cloned());

        for ordinal in self.execution_order() {
            let op_spec = &self.ops[ordinal];
            let op = &self.registry[&op_spec.name];
            let key = self.op_key(scene_id, variation_index, ordinal);
            let mut entry = ProvenanceEntry {
                op: op_spec.name.clone(),
                layer: op.layer().index(),
                ordinal,
                seed: key.seed64(),
                applied: false,
                reason: None,
                params: serde_json::to_value(&op_spec.params).unwrap_or_default(),
            };
            let filtered = op_spec.scene_filter.as_ref().is_some_and(|f| !f.matches(scene_id, &spec.scene_class));
            if filtered {
                entry.reason = Some("filtered".into());
            } else {
                let gate: f64 = key.with_str("gate").stream().gen();
                if gate < op_spec.probability {
                    let call = OpCall { probability: op_spec.probability, ordinal, seed: key.with_str("params").seed64() };
                    let mut rng = key.with_str("params").stream();
                    match op.perform(&mut scene, ctx, &op_spec.params, call, &mut rng) {
                        Ok(resolved) => {
                            entry.applied = true;
                            entry.params = resolved;
                        }
                        Err(e) => {
                            return Err(VariationFailure {
                                scene_id: scene_id.to_string(),
                                variation_index,
                                op: op_spec.name.clone(),
                                error: e.to_string(),
                            })
                        }
                    }
                } else {
                    entry.reason = Some("gate".into());
                }
            }
            scene.provenance.push(entry);
        }
        ops::finalize(&mut scene).map_err(|e| VariationFailure {
            scene_id: scene_id.to_string(),
            variation_index,
            op: "random_shadow".into(),
            error: e.to_string(),
        })?;
        Ok(scene)
    }

    /// Runs every spec through the pipeline `variations_per_scene` times.
    ///
    /// Output order is (spec order, variation index) for any `workers`.
    pub fn run(&self, specs: &[SceneSpecification], variations_per_scene: usize, workers: usize) -> Result<RunOutput, PipelineError> {
        if variations_per_scene == 0 {
            return Err(PipelineError::NoVariations);
        }
        let mut seen = std::collections::HashSet::new();
        for s in specs {
            if !seen.insert(s.scene_id.trim()) {
                return Err(PipelineError::DuplicateScene(s.scene_id.clone()));
            }
        }
        let contexts: Vec<SceneContext> = specs.iter().cloned().map(SceneContext::new).collect();
        let jobs: Vec<(usize, usize)> =
            (0..contexts.len()).flat_map(|s| (0..variations_per_scene).map(move |v| (s, v))).collect();
        let run_one = |&(s, v): &(usize, usize)| self.run_variation(&contexts[s], v);
        let results: Vec<Result<AugmentedScene, VariationFailure>> = if workers <= 1 {
            jobs.iter().map(run_one).collect()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map(|pool| pool.install(|| jobs.par_iter().map(run_one).collect()))
                .unwrap_or_else(|_| jobs.iter().map(run_one).collect())
        };
        let mut out = RunOutput::default();
        for r in results {
            match r {
                Ok(scene) => out.scenes.push(scene),
                Err(f) => {
                    log::warn!("variation failed: {f}");
                    out.failures.push(f)
                }
            }
        }
        Ok(out)
    }
}

/// Free-function form of [`Pipeline::run`] with one worker.
pub fn pipeline_run(pipeline: &Pipeline, specs: &[SceneSpecification], variations_per_scene: usize) -> Result<RunOutput, PipelineError> {
    pipeline.run(specs, variations_per_scene, 1)
}
