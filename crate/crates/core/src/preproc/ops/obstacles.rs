use rand::Rng;
use serde_json::json;

use super::{check_range, defaults, instance_from_variant, prototype};
use crate::preproc::{Layer, OpCall, OpError, Operation, ParamKind, ParamSchema, Params, ParamsExt, SceneContext};
use crate::rng::{uniform, unit_sphere, Stream};
use crate::scene::{AssetVariant, AugmentedScene, FovRule, InstanceRole, Vec3};

/// Layer 3: obstacles (or particle noise) scattered in a ball around every
/// instance of a target asset.
pub struct RandomObstacleOverAsset;

impl Operation for RandomObstacleOverAsset {
    fn name(&self) -> &str {
        "random_obstacle_over_asset"
    }

    fn layer(&self) -> Layer {
        Layer::ObstacleGeneration
    }

    fn schema(&self) -> Vec<ParamSchema> {
        vec![
            ParamSchema::required("asset", ParamKind::Text, "target asset"),
            ParamSchema::required("obstacle_asset", ParamKind::Text, "obstacle or particle asset"),
            ParamSchema::new("max_count", ParamKind::Integer { min: 1, max: None }, "obstacles per target, drawn from 1..=max (default 4)"),
            ParamSchema::new("radius_factor", ParamKind::Number { min: Some(0.0), max: None }, "ball radius in target bounding radii (default 3)"),
            ParamSchema::new("radius", ParamKind::Distance { default_unit: "m" }, "absolute ball radius, overrides radius_factor"),
        ]
    }

    fn perform(&self, scene: &mut AugmentedScene, ctx: &SceneContext, params: &Params, _: OpCall, rng: &mut Stream) -> Result<serde_json::Value, OpError> {
        let target = params.text("asset").unwrap_or_default();
        prototype(ctx, target)?;
        let obstacle = prototype(ctx, params.text("obstacle_asset").unwrap_or_default())?;
        let max_count = params.count_or("max_count", defaults::OBSTACLE_MAX_COUNT).max(1);
        let factor = params.num_or("radius_factor", defaults::OBSTACLE_RADIUS_FACTOR);
        let fixed_radius = params.num("radius");
        let role = if obstacle.particle { InstanceRole::Noise } else { InstanceRole::Obstacle };

        let prototype_variant = [AssetVariant::of_prototype(obstacle)];
        let registered = scene.variants.get(&obstacle.name).filter(|v| !v.is_empty()).cloned();
        let variants: &[AssetVariant] = registered.as_deref().unwrap_or(&prototype_variant);

        let targets: Vec<(Vec3, f64)> = scene
            .instances
            .iter()
            .filter(|i| i.prototype == target && i.role == InstanceRole::Main)
            .map(|i| (i.center(), i.bounding_radius()))
            .collect();
        if targets.is_empty() {
            scene.warnings.push(format!("random_obstacle_over_asset: no `{target}` instances to surround"));
        }
        let mut counts = Vec::with_capacity(targets.len());
        for (center, radius) in targets {
            let k = rng.gen_range(1..=max_count);
            let ball = fixed_radius.unwrap_or(factor * radius);
            for _ in 0..k {
                let r = uniform(rng, 0.0, ball);
                let u = unit_sphere(rng);
                let vi = rng.gen_range(0..variants.len());
                let position = center + Vec3::new(u[0], u[1], u[2]) * r;
                let inst = instance_from_variant(obstacle, &variants[vi], position, role, registered.as_ref().map(|_| vi));
                scene.instances.push(inst);
            }
            counts.push(k);
        }
        Ok(json!({
            "asset": target,
            "obstacle_asset": obstacle.name,
            "max_count": max_count,
            "radius_factor": factor,
            "radius": fixed_radius,
            "counts": counts,
        }))
    }
}

/// Layer 3: records a rule that spawns one obstacle inside the camera cone
/// for each captured frame.
pub struct RandomObstacleInFov;

impl Operation for RandomObstacleInFov {
    fn name(&self) -> &str {
        "random_obstacle_in_fov"
    }

    fn layer(&self) -> Layer {
        Layer::ObstacleGeneration
    }

    fn schema(&self) -> Vec<ParamSchema> {
        vec![
            ParamSchema::required("obstacle_asset", ParamKind::Text, "obstacle or particle asset"),
            ParamSchema::new("distance_range", ParamKind::Range { min: 0.0, max: 1e6 }, "distance from the camera, meters"),
            ParamSchema::new("cone_margin", ParamKind::Number { min: Some(0.0), max: Some(1.0) }, "fraction of the half field of view"),
            ParamSchema::new("frame_probability", ParamKind::Number { min: Some(0.0), max: Some(1.0) }, "per-frame spawn chance (default: op probability)"),
        ]
    }

    fn check(&self, params: &Params) -> Result<(), (String, String)> {
        check_range(params, "distance_range", true)
    }

    fn perform(&self, scene: &mut AugmentedScene, ctx: &SceneContext, params: &Params, call: OpCall, _: &mut Stream) -> Result<serde_json::Value, OpError> {
        let obstacle = prototype(ctx, params.text("obstacle_asset").unwrap_or_default())?;
        let range = params.range_or("distance_range", defaults::FOV_DISTANCE);
        if !(range[0] > 0.0 && range[0] < range[1]) {
            return Err(OpError::InvalidRange(format!("need 0 < {} < {}", range[0], range[1])));
        }
        let variant = scene
            .variants
            .get(&obstacle.name)
            .and_then(|v| v.first().cloned())
            .unwrap_or_else(|| AssetVariant::of_prototype(obstacle));
        let rule = FovRule {
            obstacle_asset: obstacle.name.clone(),
            local_aabb: obstacle.aabb,
            material: variant.material,
            probability: params.num_or("frame_probability", call.probability),
            distance_range: range,
            cone_margin: params.num_or("cone_margin", defaults::FOV_CONE_MARGIN),
            seed: call.seed,
            particle: obstacle.particle,
        };
        let out = serde_json::to_value(&rule).unwrap_or_default();
        scene.deferred_fov_rules.push(rule);
        Ok(out)
    }
}
