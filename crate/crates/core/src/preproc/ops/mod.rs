//! Built-in randomization operations, one module per layer family.

mod distribute;
mod global;
mod obstacles;
mod trajectory;
mod variation;

use std::sync::Arc;

use rand::Rng;

use super::{OpError, Operation, Params, ParamsExt};
use crate::rng::{uniform, StreamKey};
use crate::scene::{
    AssetInstance, AssetPrototype, AssetVariant, AttrFilter, AttrValue, AugmentedScene, CompareOp, InstanceRole, Spotlight, Vec3,
};

pub use distribute::DistributeAssets;
pub use global::RandomizeGlobal;
pub use obstacles::{RandomObstacleInFov, RandomObstacleOverAsset};
pub use trajectory::{look_at, poses_from_spec, RandomizeTrajectory, SampleTrajectoryLocations};
pub use variation::{sample_shadow_offset, GenerateRandVariation, RandomShadow};

/// Default randomization ranges. Every op exposes a parameter overriding each.
pub mod defaults {
    use std::f64::consts::TAU;

    pub const ROTATION: [f64; 2] = [0.0, TAU];
    pub const SCALE: [f64; 2] = [0.5, 2.0];
    pub const SHADOW_RADIUS_FACTORS: [f64; 2] = [1.5, 5.0];
    pub const SPOTLIGHT_INTENSITY: [f64; 2] = [0.5, 1.0];
    pub const FOV_DISTANCE: [f64; 2] = [2.0, 30.0];
    pub const FOV_CONE_MARGIN: f64 = 0.8;
    pub const OBSTACLE_MAX_COUNT: usize = 4;
    pub const OBSTACLE_RADIUS_FACTOR: f64 = 3.0;
    pub const WEATHER_INTENSITY: [f64; 2] = [0.3, 1.0];
    pub const TIME_OF_DAY: [f64; 2] = [0.0, 24.0];
    pub const AMBIENT: [f64; 2] = [0.1, 1.0];
    pub const STANDOFF: [f64; 2] = [5.0, 25.0];
    pub const ALTITUDE: [f64; 2] = [2.0, 15.0];
    pub const FIXED_ALTITUDE: f64 = 8.0;
    pub const CAPTURE_DISTANCE: [f64; 2] = [2.0, 10.0];
    pub const FIXED_CAPTURE_DISTANCE: f64 = 5.0;
    pub const POSE_JITTER: f64 = 0.15;
    pub const POSES_PER_RING: usize = 12;
    pub const ANCHOR_MERGE_DISTANCE: f64 = 0.5;
    /// Trajectory points sampled when a scene has no main instances.
    pub const TRAJECTORY_POINTS: usize = 10;
    pub const CONTAINER_CLASS: &str = "building";
}

pub fn builtins() -> Vec<Arc<dyn Operation>> {
    vec![
        Arc::new(GenerateRandVariation),
        Arc::new(RandomShadow),
        Arc::new(DistributeAssets),
        Arc::new(RandomObstacleOverAsset),
        Arc::new(RandomObstacleInFov),
        Arc::new(RandomizeGlobal),
        Arc::new(SampleTrajectoryLocations),
        Arc::new(RandomizeTrajectory),
    ]
}

pub(crate) fn prototype<'a>(ctx: &'a super::SceneContext, name: &str) -> Result<&'a AssetPrototype, OpError> {
    ctx.spec.asset(name).ok_or_else(|| OpError::UnknownAsset(name.to_string()))
}

pub(crate) fn instance_from_variant(
    proto: &AssetPrototype,
    variant: &AssetVariant,
    position: Vec3,
    role: InstanceRole,
    variant_index: Option<usize>,
) -> AssetInstance {
    AssetInstance {
        prototype: proto.name.clone(),
        position,
        rotation: variant.rotation,
        scale: variant.scale,
        material: variant.material.clone(),
        role,
        anchor_region: None,
        variant_index,
        local_aabb: proto.aabb,
    }
}

/// Work that needs every layer's output: spotlights for pending shadow rules.
pub(crate) fn finalize(scene: &mut AugmentedScene) -> Result<(), OpError> {
    let rules = std::mem::take(&mut scene.pending_shadows);
    for rule in &rules {
        let mut rng = StreamKey::new(rule.seed).with_str("shadow").stream();
        let targets: Vec<(Vec3, f64)> = scene
            .instances
            .iter()
            .filter(|i| i.prototype == rule.asset)
            .map(|i| (i.center(), i.bounding_radius()))
            .collect();
        if targets.is_empty() {
            if scene.variants.get(&rule.asset).map_or(true, Vec::is_empty) {
                return Err(OpError::NoTargetInstances(rule.asset.clone()));
            }
            scene.warnings.push(format!("random_shadow: no `{}` instances were spawned", rule.asset));
        }
        for (center, radius) in targets {
            let offset = sample_shadow_offset(radius, rule.radius_factors, &mut rng);
            let intensity = uniform(&mut rng, rule.intensity_range[0], rule.intensity_range[1]);
            scene.global.spotlights.push(Spotlight { position: center + offset, intensity });
        }
    }
    scene.pending_shadows = rules;
    Ok(())
}

/// Picks `k` distinct indices out of `n`, returned in ascending order.
pub(crate) fn choose_indices(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let k = k.min(n);
    for i in 0..k {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    let mut picked = idx[..k].to_vec();
    picked.sort_unstable();
    picked
}

/// Parses `key=value`, `key!=value`, `key>=n`, `key<=n`, `key>n` or `key<n`.
pub fn parse_filter(text: &str) -> Result<AttrFilter, String> {
    const OPS: [(&str, CompareOp); 6] = [
        ("!=", CompareOp::Ne),
        (">=", CompareOp::Ge),
        ("<=", CompareOp::Le),
        ("=", CompareOp::Eq),
        (">", CompareOp::Gt),
        ("<", CompareOp::Lt),
    ];
    for (sym, op) in OPS {
        if let Some((key, value)) = text.split_once(sym) {
            let (key, value) = (key.trim(), value.trim().trim_start_matches('='));
            if key.is_empty() || value.is_empty() {
                break;
            }
            let value = value.trim().trim_matches('"');
            let value = match value.parse::<f64>() {
                Ok(v) => AttrValue::Num(v),
                Err(_) if matches!(op, CompareOp::Eq | CompareOp::Ne) => AttrValue::Str(value.to_string()),
                Err(_) => return Err(format!("`{text}`: ordering filters need a number")),
            };
            return Ok(AttrFilter { key: key.to_string(), op, value });
        }
    }
    Err(format!("`{text}` is not a filter expression"))
}

pub(crate) fn parse_filters(params: &Params, name: &str) -> Result<Vec<AttrFilter>, (String, String)> {
    params
        .texts(name)
        .unwrap_or_default()
        .iter()
        .map(|f| parse_filter(f).map_err(|e| (name.to_string(), e)))
        .collect()
}

pub(crate) fn check_range(params: &Params, name: &str, strictly_positive: bool) -> Result<(), (String, String)> {
    match params.range_of(name) {
        Some([lo, hi]) if strictly_positive && !(lo > 0.0 && lo < hi) => Err((name.to_string(), format!("need 0 < {lo} < {hi}"))),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_expressions() {
        let f = parse_filter("height>20").unwrap();
        assert_eq!((f.key.as_str(), f.op, f.value), ("height", CompareOp::Gt, AttrValue::Num(20.0)));
        let f = parse_filter("type = restaurant").unwrap();
        assert_eq!(f.op, CompareOp::Eq);
        assert_eq!(f.value, AttrValue::Str("restaurant".into()));
        assert_eq!(parse_filter("levels>=3").unwrap().op, CompareOp::Ge);
        assert_eq!(parse_filter("type!=park").unwrap().op, CompareOp::Ne);
        assert!(parse_filter("height>tall").is_err());
        assert!(parse_filter("nothing").is_err());
    }

    #[test]
    fn chosen_indices_are_distinct() {
        let mut rng = StreamKey::new(3).stream();
        let picked = choose_indices(10, 4, &mut rng);
        assert_eq!(picked.len(), 4);
        assert!(picked.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(choose_indices(3, 9, &mut rng), vec![0, 1, 2]);
    }
}
