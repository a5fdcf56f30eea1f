use std::sync::Arc;

use crate::distribution::{
    extract_distribution_space, geodata, layer_from_geodata, map_to_distribution_layer, DistributionError, DistributionLayer,
    GeoBBox, GeoSource,
};
use crate::scene::{
    Aabb, AttrFilter, BaseMapKind, GeodataRef, Material, SceneSpecification, StaticBox, Vec3,
};

/// Read-only per-scene state shared by every variation of that scene.
#[derive(Debug, Clone)]
pub struct SceneContext {
    pub spec: Arc<SceneSpecification>,
    pub geometry: Arc<Vec<StaticBox>>,
    geo: Option<(GeoSource, Option<GeoBBox>)>,
    pub warnings: Vec<String>,
}

const BUILDING_COLOR: [f64; 3] = [0.62, 0.6, 0.58];
const GROUND_COLOR: [f64; 3] = [0.35, 0.42, 0.3];
const GROUND_MARGIN: f64 = 150.0;

fn geo_source(spec: &SceneSpecification, warnings: &mut Vec<String>) -> Option<(GeoSource, Option<GeoBBox>)> {
    match spec.geodata_ref.as_ref()? {
        GeodataRef::Fixture(path) => Some((GeoSource::Fixture(spec.resolve_path(path)), None)),
        GeodataRef::Remote { overpass, fallback } => {
            let bbox = GeoBBox::from_array(overpass.bbox);
            if let Some(remote) = GeoSource::overpass_from_env() {
                match geodata::load_features(&remote, &overpass.feature_class, Some(&bbox)) {
                    Ok(_) => return Some((remote, Some(bbox))),
                    Err(e) => warnings.push(format!("overpass query failed, using fallback: {e}")),
                }
            }
            fallback.as_ref().map(|p| (GeoSource::Fixture(spec.resolve_path(p)), Some(bbox)))
        }
    }
}

impl SceneContext {
    pub fn new(spec: SceneSpecification) -> Self {
        let mut warnings = Vec::new();
        let geo = geo_source(&spec, &mut warnings);
        let geometry = match spec.base_map_kind {
            BaseMapKind::Map3d => geodata_geometry(&spec, geo.as_ref(), &mut warnings),
            _ => graph_geometry(&spec),
        };
        Self { spec: Arc::new(spec), geometry: Arc::new(geometry), geo, warnings }
    }

    pub fn scene_id(&self) -> &str {
        self.spec.scene_id.trim()
    }

    /// Distribution layer of `container_class` containers for `asset`.
    pub fn layer(&self, container_class: &str, filters: &[AttrFilter], asset: &str) -> Result<DistributionLayer, DistributionError> {
        match (&self.spec.graph, &self.geo) {
            (Some(graph), _) => {
                let space = extract_distribution_space(graph, container_class, filters)?;
                map_to_distribution_layer(&space, asset)
            }
            (None, Some((source, bbox))) => {
                match layer_from_geodata(source, bbox.as_ref(), container_class, filters, &self.spec.map_origin, asset) {
                    Err(DistributionError::NoFeatures) => Err(DistributionError::EmptyDistributionSpace(container_class.to_string())),
                    other => other,
                }
            }
            (None, None) => Err(DistributionError::FetchFailed(format!("scene {} has no usable geodata source", self.spec.scene_id))),
        }
    }
}

fn graph_geometry(spec: &SceneSpecification) -> Vec<StaticBox> {
    let Some(graph) = &spec.graph else {
        return Vec::new();
    };
    graph
        .nodes()
        .iter()
        .filter(|n| n.parent_id.is_some() && n.aabb.extent().iter().all(|e| *e > 0.0))
        .filter_map(|n| {
            let m = graph.world_matrix(&n.id).ok()?;
            let material = n.material.clone().unwrap_or(Material { rgb: BUILDING_COLOR, texture: None });
            Some(StaticBox::from_matrix(&n.semantic_class, &m, n.aabb, material))
        })
        .collect()
}

fn geodata_geometry(spec: &SceneSpecification, geo: Option<&(GeoSource, Option<GeoBBox>)>, warnings: &mut Vec<String>) -> Vec<StaticBox> {
    let Some((source, bbox)) = geo else {
        return Vec::new();
    };
    let layer = match layer_from_geodata(source, bbox.as_ref(), "building", &[], &spec.map_origin, "building") {
        Ok(l) => l,
        Err(e) => {
            warnings.push(format!("no renderable buildings: {e}"));
            return Vec::new();
        }
    };
    let mut boxes = Vec::with_capacity(layer.regions.len() + 1);
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for r in &layer.regions {
        let (rlo, rhi) = r.bbox();
        for k in 0..2 {
            lo[k] = lo[k].min(rlo[k]);
            hi[k] = hi[k].max(rhi[k]);
        }
        let aabb = Aabb::new(Vec3::new(rlo[0], 0.0, rlo[1]), Vec3::new(rhi[0], r.elevation, rhi[1]));
        boxes.push(StaticBox::axis_aligned("building", aabb, Material { rgb: BUILDING_COLOR, texture: None }));
    }
    let ground = Aabb::new(
        Vec3::new(lo[0] - GROUND_MARGIN, -1.0, lo[1] - GROUND_MARGIN),
        Vec3::new(hi[0] + GROUND_MARGIN, 0.0, hi[1] + GROUND_MARGIN),
    );
    boxes.insert(0, StaticBox::axis_aligned("ground", ground, Material { rgb: GROUND_COLOR, texture: None }));
    boxes
}
