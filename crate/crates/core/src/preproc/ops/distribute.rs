use rand::Rng;
use serde_json::json;

use super::{choose_indices, defaults, instance_from_variant, parse_filters, prototype};
use crate::distribution::{
    sample_locations_avoiding, DistributionError, DistributionLayer, RadiusCenter, SamplingPattern, SpawnPoint,
};
use crate::preproc::{Layer, OpCall, OpError, Operation, ParamKind, ParamSchema, Params, ParamsExt, SceneContext};
use crate::rng::Stream;
use crate::scene::{AssetVariant, AttrFilter, AugmentedScene, InstanceRole, Vec3};

const PATTERNS: &[&str] = &["uniform", "radius", "line", "polygon"];
const CENTER_MODES: &[&str] = &["scene", "region"];

/// Layer 2: spawns main instances of an asset over a distribution layer.
pub struct DistributeAssets;

fn pattern_from(params: &Params, layer: &DistributionLayer) -> Result<SamplingPattern, OpError> {
    let pattern = match params.text("pattern").unwrap_or("uniform") {
        "radius" => {
            let r = params.num("radius").unwrap_or(0.0);
            let center = match params.numbers("center") {
                Some(c) if c.len() == 2 => RadiusCenter::Point([c[0], c[1]]),
                _ if params.text("center_mode") == Some("region") => RadiusCenter::RegionCentroid,
                _ => RadiusCenter::Point(scene_center(layer)),
            };
            SamplingPattern::Radius { center, r }
        }
        "line" => {
            let l = params.numbers("line").unwrap_or_default();
            let l = if l.len() == 4 { l } else { vec![0.0; 4] };
            SamplingPattern::Line { p0: [l[0], l[1]], p1: [l[2], l[3]], jitter: params.num_or("jitter", 0.0) }
        }
        "polygon" => {
            let v = params.numbers("polygon").unwrap_or_default();
            SamplingPattern::Polygon { vertices: v.chunks_exact(2).map(|c| [c[0], c[1]]).collect() }
        }
        _ => SamplingPattern::Uniform,
    };
    pattern.validate()?;
    Ok(pattern)
}

/// Center of the bounding box of every region in the layer.
fn scene_center(layer: &DistributionLayer) -> [f64; 2] {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for r in &layer.regions {
        let (rlo, rhi) = r.bbox();
        for k in 0..2 {
            lo[k] = lo[k].min(rlo[k]);
            hi[k] = hi[k].max(rhi[k]);
        }
    }
    if lo[0].is_finite() {
        [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0]
    } else {
        [0.0, 0.0]
    }
}

fn variant_radius(local_extent: Vec3, v: &AssetVariant) -> f64 {
    local_extent.component_mul(&v.scale).norm() * 0.5
}

/// Samples `n` points, turning exhaustion into a partial result.
fn sample_partial(
    layer: &DistributionLayer,
    n: usize,
    pattern: &SamplingPattern,
    min_sep: f64,
    existing: &[Vec3],
    rng: &mut Stream,
) -> Result<(Vec<SpawnPoint>, bool), OpError> {
    match sample_locations_avoiding(layer, n, pattern, min_sep, existing, rng) {
        Ok(points) => Ok((points, false)),
        Err(DistributionError::SamplingExhausted { points, .. }) => Ok((points, true)),
        Err(e) => Err(e.into()),
    }
}

impl Operation for DistributeAssets {
    fn name(&self) -> &str {
        "distribute_assets"
    }

    fn layer(&self) -> Layer {
        Layer::AssetDistribution
    }

    fn schema(&self) -> Vec<ParamSchema> {
        vec![
            ParamSchema::required("asset", ParamKind::Text, "asset prototype name"),
            ParamSchema::new("container_class", ParamKind::Text, "semantic class of container nodes or features"),
            ParamSchema::new("amenity", ParamKind::Text, "only containers whose type is this amenity"),
            ParamSchema::new("filters", ParamKind::TextList, "attribute filters such as `height>20`"),
            ParamSchema::new("regions", ParamKind::Integer { min: 1, max: None }, "randomly chosen container count"),
            ParamSchema::new("pattern", ParamKind::Choice { values: PATTERNS }, "sampling pattern (default uniform)"),
            ParamSchema::new("radius", ParamKind::Distance { default_unit: "m" }, "radius pattern: max distance from center"),
            ParamSchema::new("center", ParamKind::NumberList, "radius pattern: fixed [x, z] center"),
            ParamSchema::new("center_mode", ParamKind::Choice { values: CENTER_MODES }, "radius pattern: scene or region center"),
            ParamSchema::new("line", ParamKind::NumberList, "line pattern: [x0, z0, x1, z1]"),
            ParamSchema::new("jitter", ParamKind::Distance { default_unit: "m" }, "line pattern: max distance from the line"),
            ParamSchema::new("polygon", ParamKind::NumberList, "polygon pattern: flat [x, z, ...] vertices"),
            ParamSchema::new("count_per_region", ParamKind::Integer { min: 1, max: None }, "instances per container"),
            ParamSchema::new("total_count", ParamKind::Integer { min: 0, max: None }, "instances over the whole layer"),
            ParamSchema::new("min_separation", ParamKind::Distance { default_unit: "m" }, "minimum 3D distance between instances"),
        ]
    }

    fn check(&self, params: &Params) -> Result<(), (String, String)> {
        parse_filters(params, "filters")?;
        if params.contains_key("count_per_region") && params.contains_key("total_count") {
            return Err(("total_count".into(), "give either count_per_region or total_count".into()));
        }
        match params.text("pattern") {
            Some("radius") if !params.num("radius").is_some_and(|r| r > 0.0) => {
                Err(("radius".into(), "radius pattern needs radius > 0".into()))
            }
            Some("line") if params.numbers("line").map_or(true, |l| l.len() != 4) => {
                Err(("line".into(), "line pattern needs [x0, z0, x1, z1]".into()))
            }
            Some("polygon") if params.numbers("polygon").map_or(true, |v| v.len() < 6 || v.len() % 2 != 0) => {
                Err(("polygon".into(), "polygon pattern needs at least three [x, z] vertices".into()))
            }
            _ => match params.numbers("center") {
                Some(c) if c.len() != 2 => Err(("center".into(), "expected [x, z]".into())),
                _ => Ok(()),
            },
        }
    }

    fn perform(&self, scene: &mut AugmentedScene, ctx: &SceneContext, params: &Params, _: OpCall, rng: &mut Stream) -> Result<serde_json::Value, OpError> {
        let asset = params.text("asset").unwrap_or_default();
        let proto = prototype(ctx, asset)?;
        let mut filters = parse_filters(params, "filters").map_err(|(_, e)| OpError::Other(e))?;
        let amenity = params.text("amenity");
        let container_class = match (params.text("container_class"), amenity) {
            (Some(c), _) => c.to_string(),
            // Geodata marks amenities with their own key; scene graphs tag buildings.
            (None, Some(_)) if ctx.spec.graph.is_none() => "amenity".to_string(),
            _ => proto.container_class.clone().unwrap_or_else(|| defaults::CONTAINER_CLASS.to_string()),
        };
        if let Some(a) = amenity {
            filters.push(AttrFilter::eq("type", a));
        }

        let full = ctx.layer(&container_class, &filters, &proto.name)?;
        scene.warnings.extend(full.warnings.iter().map(|w| format!("distribute_assets: {w}")));
        let pattern = pattern_from(params, &full)?;
        let mut layer = full.clone();
        if let Some(k) = params.num("regions") {
            let picked = choose_indices(full.regions.len(), k as usize, rng);
            layer.regions = picked.iter().map(|&i| full.regions[i].clone()).collect();
        }

        let prototype_variant = [AssetVariant::of_prototype(proto)];
        let registered = scene.variants.get(&proto.name).filter(|v| !v.is_empty()).cloned();
        let variants: &[AssetVariant] = registered.as_deref().unwrap_or(&prototype_variant);
        let extent = proto.aabb.extent();
        let min_sep = params
            .num("min_separation")
            .unwrap_or_else(|| 2.0 * variants.iter().map(|v| variant_radius(extent, v)).fold(0.0, f64::max));

        let mut existing: Vec<Vec3> = scene.instances.iter().map(|i| i.position).collect();
        let mut placed: Vec<SpawnPoint> = Vec::new();
        let mut exhausted = false;
        let requested;
        match params.num("total_count") {
            Some(total) => {
                requested = total as usize;
                let (points, ex) = sample_partial(&layer, requested, &pattern, min_sep, &existing, rng)?;
                exhausted = ex;
                placed = points;
            }
            None => {
                let per_region = params.count_or("count_per_region", 1);
                requested = per_region * layer.regions.len();
                for region in &layer.regions {
                    let single = DistributionLayer::new(&proto.name, vec![region.clone()], layer.source)?;
                    if !pattern.may_admit(region) {
                        exhausted = true;
                        continue;
                    }
                    let (points, ex) = sample_partial(&single, per_region, &pattern, min_sep, &existing, rng)?;
                    exhausted |= ex;
                    let index = layer.regions.iter().position(|r| r.region_id == region.region_id).unwrap_or(0);
                    for p in points {
                        existing.push(p.position);
                        placed.push(SpawnPoint { position: p.position, region: index });
                    }
                }
            }
        }
        if placed.is_empty() && requested > 0 {
            return Err(DistributionError::SamplingExhausted { placed: 0, requested, points: Vec::new() }.into());
        }
        if exhausted {
            scene.warnings.push(format!("distribute_assets: placed {} of {requested} `{}` instances", placed.len(), proto.name));
        }

        let mut regions_used = Vec::new();
        for p in &placed {
            let vi = rng.gen_range(0..variants.len());
            let mut inst = instance_from_variant(proto, &variants[vi], p.position, InstanceRole::Main, registered.as_ref().map(|_| vi));
            let region_id = layer.regions[p.region].region_id.clone();
            regions_used.push(region_id.clone());
            inst.anchor_region = Some(region_id);
            scene.instances.push(inst);
        }
        Ok(json!({
            "asset": proto.name,
            "container_class": container_class,
            "filters": filters,
            "pattern": pattern,
            "min_separation": min_sep,
            "requested": requested,
            "placed": placed.len(),
            "regions": regions_used,
        }))
    }
}
