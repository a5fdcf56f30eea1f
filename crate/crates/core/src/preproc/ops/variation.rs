use rand::Rng;
use serde_json::json;

use super::{defaults, prototype};
use crate::preproc::{Layer, OpCall, OpError, Operation, ParamKind, ParamSchema, Params, ParamsExt, SceneContext};
use crate::rng::{uniform, unit_sphere, Stream};
use crate::scene::{AssetVariant, AugmentedScene, Material, ShadowRule, Vec3};

const AXES: &[&str] = &["x", "y", "z"];

fn axis_mask(params: &Params, name: &str, default: [bool; 3]) -> [bool; 3] {
    match params.texts(name) {
        Some(axes) => [0, 1, 2].map(|k| axes.iter().any(|a| a.eq_ignore_ascii_case(AXES[k]))),
        None => default,
    }
}

/// Layer 1: registers randomized rotation/scale/material variants of an asset.
pub struct GenerateRandVariation;

impl Operation for GenerateRandVariation {
    fn name(&self) -> &str {
        "generate_rand_variation"
    }

    fn layer(&self) -> Layer {
        Layer::AssetVariation
    }

    fn schema(&self) -> Vec<ParamSchema> {
        vec![
            ParamSchema::required("asset", ParamKind::Text, "asset prototype name"),
            ParamSchema::new("nvariations", ParamKind::Integer { min: 1, max: None }, "variants to register (default 1)"),
            ParamSchema::new("rotation_axis", ParamKind::ChoiceList { values: AXES }, "axes with random rotation (default y)"),
            ParamSchema::new("scale_axis", ParamKind::ChoiceList { values: AXES }, "axes with random scale (default x, y, z)"),
            ParamSchema::new("material", ParamKind::Flag, "randomize color and texture (default on)"),
            ParamSchema::new("rotation", ParamKind::Range { min: -100.0, max: 100.0 }, "rotation range, radians"),
            ParamSchema::new("scale", ParamKind::Range { min: 1e-6, max: 1e6 }, "scale range"),
        ]
    }

    fn perform(&self, scene: &mut AugmentedScene, ctx: &SceneContext, params: &Params, _: OpCall, rng: &mut Stream) -> Result<serde_json::Value, OpError> {
        let asset = params.text("asset").unwrap_or_default();
        let proto = prototype(ctx, asset)?;
        let n = params.count_or("nvariations", 1).max(1);
        let rot_mask = axis_mask(params, "rotation_axis", [false, true, false]);
        let scale_mask = axis_mask(params, "scale_axis", [true; 3]);
        let material = params.flag("material").unwrap_or(true);
        let rot_range = params.range_or("rotation", defaults::ROTATION);
        let scale_range = params.range_or("scale", defaults::SCALE);
        if material && proto.textures_required && proto.texture_set.is_empty() {
            return Err(OpError::EmptyTextureSet(proto.name.clone()));
        }

        let base = AssetVariant::of_prototype(proto);
        let variants = scene.variants.entry(proto.name.clone()).or_default();
        for _ in 0..n {
            let mut v = base.clone();
            for k in 0..3 {
                if rot_mask[k] {
                    // Half-open interval: a full turn would duplicate zero.
                    v.rotation[k] = rot_range[0] + (rot_range[1] - rot_range[0]) * rng.gen::<f64>();
                }
                if scale_mask[k] {
                    v.scale[k] = uniform(rng, scale_range[0], scale_range[1]);
                }
            }
            if material {
                let rgb = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
                let texture = if proto.texture_set.is_empty() {
                    None
                } else {
                    Some(proto.texture_set[rng.gen_range(0..proto.texture_set.len())].clone())
                };
                v.material = Material { rgb, texture };
            }
            variants.push(v);
        }
        Ok(json!({
            "asset": proto.name,
            "nvariations": n,
            "rotation_axis": AXES.iter().zip(rot_mask).filter(|(_, on)| *on).map(|(a, _)| *a).collect::<Vec<_>>(),
            "scale_axis": AXES.iter().zip(scale_mask).filter(|(_, on)| *on).map(|(a, _)| *a).collect::<Vec<_>>(),
            "material": material,
            "rotation": rot_range,
            "scale": scale_range,
        }))
    }
}

/// Offset from an object's center to a shadow-casting spotlight: radius in
/// `[f0·R, f1·R]`, direction uniform on the upper hemisphere.
pub fn sample_shadow_offset(bounding_radius: f64, factors: [f64; 2], rng: &mut impl Rng) -> Vec3 {
    let radius = uniform(rng, factors[0] * bounding_radius, factors[1] * bounding_radius);
    loop {
        let d = unit_sphere(rng);
        if d[1] > 0.0 {
            return Vec3::new(d[0], d[1], d[2]) * radius;
        }
    }
}

/// Layer 1: one shadow-casting spotlight per instance of an asset.
///
/// Instances are spawned at layer 2, so the rule is recorded here and
/// resolved once every layer has run. It fails with `NoTargetInstances`
/// only if the asset then has neither instances nor registered variants.
pub struct RandomShadow;

impl Operation for RandomShadow {
    fn name(&self) -> &str {
        "random_shadow"
    }

    fn layer(&self) -> Layer {
        Layer::AssetVariation
    }

    fn schema(&self) -> Vec<ParamSchema> {
        vec![
            ParamSchema::required("asset", ParamKind::Text, "asset whose instances cast shadows"),
            ParamSchema::new("radius_factors", ParamKind::Range { min: 0.0, max: 1e3 }, "light distance in bounding radii"),
            ParamSchema::new("intensity", ParamKind::Range { min: 0.0, max: 1.0 }, "spotlight intensity range"),
        ]
    }

    fn perform(&self, scene: &mut AugmentedScene, ctx: &SceneContext, params: &Params, call: OpCall, _: &mut Stream) -> Result<serde_json::Value, OpError> {
        let asset = params.text("asset").unwrap_or_default();
        let proto = prototype(ctx, asset)?;
        let rule = ShadowRule {
            asset: proto.name.clone(),
            radius_factors: params.range_or("radius_factors", defaults::SHADOW_RADIUS_FACTORS),
            intensity_range: params.range_or("intensity", defaults::SPOTLIGHT_INTENSITY),
            seed: call.seed,
        };
        let out = json!({ "asset": rule.asset, "radius_factors": rule.radius_factors, "intensity": rule.intensity_range });
        scene.pending_shadows.push(rule);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    #[test]
    fn shadow_offsets_stay_in_upper_shell() {
        let mut rng = StreamKey::new(11).stream();
        let n = 10_000;
        let mut mean = Vec3::zeros();
        for _ in 0..n {
            let o = sample_shadow_offset(1.0, defaults::SHADOW_RADIUS_FACTORS, &mut rng);
            assert!(o.y > 0.0);
            assert!((1.5..=5.0).contains(&o.norm()));
            mean += o.normalize() / n as f64;
        }
        assert!(mean.y > 0.0);
        assert!(mean.x.abs() < 0.05 && mean.z.abs() < 0.05, "{mean:?}");
    }
}
