//! Distribution spaces and layers: where assets may be spawned.
//!
//! A distribution space is the set of container nodes (buildings, terrain
//! patches) an asset can sit on. Mapping it to a layer reduces each container
//! to a spawn polygon in the (x, z) plane at the container's top elevation.

pub mod geodata;
pub mod polygon;
mod sampling;

use serde::{Deserialize, Serialize};

use crate::scene::{Aabb, AttrFilter, AttrValue, Attributes, SceneGraph};
use polygon::Point2;

pub use geodata::{layer_from_geodata, GeoBBox, GeoFeature, GeoSource};
pub use sampling::{sample_locations, sample_locations_avoiding, SpawnPoint};

#[derive(Debug, thiserror::Error)]
pub enum DistributionError {
    #[error("no `{0}` containers match; the asset cannot be placed in this scene")]
    EmptyDistributionSpace(String),
    #[error("every region is degenerate")]
    DegenerateRegion,
    #[error("invalid region `{0}`: {1}")]
    InvalidRegion(String, String),
    #[error("layer has no regions")]
    EmptyLayer,
    #[error("placed {placed} of {requested} points before running out of attempts")]
    SamplingExhausted { placed: usize, requested: usize, points: Vec<SpawnPoint> },
    #[error("invalid sampling pattern: {0}")]
    InvalidPattern(String),
    #[error("geodata fetch failed: {0}")]
    FetchFailed(String),
    #[error("no geodata features in the requested area")]
    NoFeatures,
    #[error("malformed geodata: {0}")]
    MalformedGeodata(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRef {
    pub node_id: String,
    pub attributes: Attributes,
    pub world_aabb: Aabb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpace {
    pub container_class: String,
    pub node_refs: Vec<NodeRef>,
}

/// Spawn polygon, counterclockwise in (x, z), at a fixed elevation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpawnRegion {
    pub region_id: String,
    pub polygon: Vec<Point2>,
    pub elevation: f64,
    pub attributes: Attributes,
}

impl SpawnRegion {
    /// Validates the polygon and normalizes its orientation to CCW.
    pub fn new(region_id: &str, mut polygon: Vec<Point2>, elevation: f64, attributes: Attributes) -> Result<Self, DistributionError> {
        if polygon.len() > 3 && polygon.first() == polygon.last() {
            polygon.pop();
        }
        let fail = |why: &str| DistributionError::InvalidRegion(region_id.to_string(), why.to_string());
        if polygon.len() < 3 {
            return Err(fail("fewer than 3 vertices"));
        }
        if !elevation.is_finite() || polygon.iter().flatten().any(|v| !v.is_finite()) {
            return Err(fail("non-finite coordinate"));
        }
        let area = polygon::signed_area(&polygon);
        if area.abs() <= 1e-12 {
            return Err(DistributionError::DegenerateRegion);
        }
        if !polygon::is_simple(&polygon) {
            return Err(fail("self-intersecting"));
        }
        if area < 0.0 {
            polygon.reverse();
        }
        Ok(Self { region_id: region_id.to_string(), polygon, elevation, attributes })
    }

    pub fn area(&self) -> f64 {
        polygon::signed_area(&self.polygon)
    }

    pub fn centroid(&self) -> Point2 {
        polygon::centroid(&self.polygon)
    }

    pub fn bbox(&self) -> (Point2, Point2) {
        polygon::bbox(&self.polygon)
    }
}

pub fn point_in_region(region: &SpawnRegion, p: Point2) -> bool {
    polygon::contains(&region.polygon, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSource {
    SceneGraph,
    Geodata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionLayer {
    pub asset_name: String,
    pub regions: Vec<SpawnRegion>,
    pub source: LayerSource,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl DistributionLayer {
    pub fn new(asset_name: &str, regions: Vec<SpawnRegion>, source: LayerSource) -> Result<Self, DistributionError> {
        let mut ids = std::collections::HashSet::new();
        for r in &regions {
            if !ids.insert(r.region_id.as_str()) {
                return Err(DistributionError::InvalidRegion(r.region_id.clone(), "duplicate region id".into()));
            }
        }
        Ok(Self { asset_name: asset_name.to_string(), regions, source, warnings: Vec::new() })
    }

    pub fn total_area(&self) -> f64 {
        self.regions.iter().map(SpawnRegion::area).sum()
    }

    pub fn region(&self, id: &str) -> Option<&SpawnRegion> {
        self.regions.iter().find(|r| r.region_id == id)
    }

    /// Regions whose attributes satisfy every filter.
    pub fn filtered(&self, filters: &[AttrFilter]) -> Self {
        Self {
            asset_name: self.asset_name.clone(),
            regions: self.regions.iter().filter(|r| filters.iter().all(|f| f.matches(&r.attributes))).cloned().collect(),
            source: self.source,
            warnings: self.warnings.clone(),
        }
    }
}

/// Container nodes of `container_class` passing `filters`, with world boxes.
pub fn extract_distribution_space(
    graph: &SceneGraph,
    container_class: &str,
    filters: &[AttrFilter],
) -> Result<DistributionSpace, DistributionError> {
    let ids = graph.query_nodes(container_class, filters);
    if ids.is_empty() {
        return Err(DistributionError::EmptyDistributionSpace(container_class.to_string()));
    }
    let node_refs = ids
        .into_iter()
        .map(|id| {
            let node = graph.node(&id).expect("queried node exists");
            let world_aabb = graph.world_aabb(&id).expect("valid graph");
            NodeRef { attributes: node.attributes.clone(), world_aabb, node_id: id }
        })
        .collect();
    Ok(DistributionSpace { container_class: container_class.to_string(), node_refs })
}

/// One rooftop region per container: the top face of its world box.
pub fn map_to_distribution_layer(space: &DistributionSpace, asset_name: &str) -> Result<DistributionLayer, DistributionError> {
    let mut regions = Vec::new();
    let mut warnings = Vec::new();
    for r in &space.node_refs {
        let (lo, hi) = (r.world_aabb.min, r.world_aabb.max);
        let polygon = vec![[lo.x, lo.z], [hi.x, lo.z], [hi.x, hi.z], [lo.x, hi.z]];
        let mut attributes = r.attributes.clone();
        attributes.entry("height".into()).or_insert(AttrValue::Num(hi.y - lo.y));
        match SpawnRegion::new(&r.node_id, polygon, hi.y, attributes) {
            Ok(region) => regions.push(region),
            Err(DistributionError::DegenerateRegion) => {
                warnings.push(format!("degenerate region `{}` dropped", r.node_id));
                log::warn!("degenerate region `{}` dropped", r.node_id);
            }
            Err(e) => return Err(e),
        }
    }
    if regions.is_empty() {
        return Err(DistributionError::DegenerateRegion);
    }
    let mut layer = DistributionLayer::new(asset_name, regions, LayerSource::SceneGraph)?;
    layer.warnings = warnings;
    Ok(layer)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusCenter {
    /// Fixed (x, z) point, usually the scene origin.
    Point(Point2),
    /// Centroid of each region the point is drawn from.
    RegionCentroid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingPattern {
    Uniform,
    Radius { center: RadiusCenter, r: f64 },
    Line { p0: Point2, p1: Point2, jitter: f64 },
    Polygon { vertices: Vec<Point2> },
}

impl SamplingPattern {
    pub fn validate(&self) -> Result<(), DistributionError> {
        match self {
            SamplingPattern::Uniform => Ok(()),
            SamplingPattern::Radius { r, .. } if *r > 0.0 && r.is_finite() => Ok(()),
            SamplingPattern::Radius { .. } => Err(DistributionError::InvalidPattern("radius must be > 0".into())),
            SamplingPattern::Line { p0, p1, jitter } => {
                if p0 == p1 {
                    Err(DistributionError::InvalidPattern("line endpoints coincide".into()))
                } else if !(*jitter >= 0.0) {
                    Err(DistributionError::InvalidPattern("jitter must be >= 0".into()))
                } else {
                    Ok(())
                }
            }
            SamplingPattern::Polygon { vertices } => {
                if polygon::is_simple(vertices) && polygon::signed_area(vertices).abs() > 0.0 {
                    Ok(())
                } else {
                    Err(DistributionError::InvalidPattern("pattern polygon must be simple".into()))
                }
            }
        }
    }

    /// Pattern constraint for a point drawn from `region`.
    pub fn admits(&self, region: &SpawnRegion, p: Point2) -> bool {
        match self {
            SamplingPattern::Uniform => true,
            SamplingPattern::Radius { center, r } => {
                let c = match center {
                    RadiusCenter::Point(c) => *c,
                    RadiusCenter::RegionCentroid => region.centroid(),
                };
                ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt() <= *r
            }
            SamplingPattern::Line { p0, p1, jitter } => polygon::point_segment_distance(p, *p0, *p1) <= *jitter,
            SamplingPattern::Polygon { vertices } => polygon::contains(vertices, p),
        }
    }

    /// Cheap bbox test: can any point of `region` satisfy the pattern?
    pub fn may_admit(&self, region: &SpawnRegion) -> bool {
        let (lo, hi) = region.bbox();
        match self {
            SamplingPattern::Uniform => true,
            SamplingPattern::Radius { center: RadiusCenter::Point(c), r } => polygon::box_distance(lo, hi, *c) <= *r,
            SamplingPattern::Radius { center: RadiusCenter::RegionCentroid, .. } => true,
            SamplingPattern::Line { p0, p1, jitter } => {
                let steps = 64;
                (0..=steps).any(|i| {
                    let t = i as f64 / steps as f64;
                    let q = [p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])];
                    polygon::box_distance(lo, hi, q) <= *jitter + (p1[0] - p0[0]).hypot(p1[1] - p0[1]) / steps as f64
                })
            }
            SamplingPattern::Polygon { vertices } => {
                let (plo, phi) = polygon::bbox(vertices);
                plo[0] <= hi[0] && phi[0] >= lo[0] && plo[1] <= hi[1] && phi[1] >= lo[1]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{SceneNode, Vec3};

    fn building(id: &str, min: [f64; 3], max: [f64; 3]) -> SceneNode {
        let mut n = SceneNode::new(id, Some("world"), "building", Aabb::new(Vec3::from(min), Vec3::from(max)));
        n.attributes.insert("height".into(), AttrValue::Num(max[1] - min[1]));
        n
    }

    fn graph(nodes: Vec<SceneNode>) -> SceneGraph {
        let mut all = vec![SceneNode::new("world", None, "world", Aabb::new(Vec3::zeros(), Vec3::zeros()))];
        all.extend(nodes);
        SceneGraph::from_nodes(all)
    }

    #[test]
    fn rooftop_region_is_aabb_top() {
        let g = graph(vec![building("b", [0.0, 0.0, 0.0], [10.0, 30.0, 20.0])]);
        let space = extract_distribution_space(&g, "building", &[]).unwrap();
        let layer = map_to_distribution_layer(&space, "pad").unwrap();
        let r = &layer.regions[0];
        assert_eq!(r.polygon, vec![[0.0, 0.0], [10.0, 0.0], [10.0, 20.0], [0.0, 20.0]]);
        assert_eq!(r.elevation, 30.0);
        assert_eq!(r.area(), 200.0);
    }

    #[test]
    fn empty_space_is_an_error() {
        let g = graph(vec![building("b", [0.0; 3], [1.0; 3])]);
        assert!(matches!(
            extract_distribution_space(&g, "lighthouse", &[]),
            Err(DistributionError::EmptyDistributionSpace(_))
        ));
    }

    #[test]
    fn degenerate_roofs_are_dropped() {
        let g = graph(vec![building("flat", [0.0; 3], [0.0, 0.0, 5.0]), building("ok", [0.0; 3], [4.0; 3])]);
        let space = extract_distribution_space(&g, "building", &[]).unwrap();
        let layer = map_to_distribution_layer(&space, "pad").unwrap();
        assert_eq!(layer.regions.len(), 1);
        assert_eq!(layer.warnings.len(), 1);

        let g = graph(vec![building("flat", [0.0; 3], [0.0, 0.0, 5.0])]);
        let space = extract_distribution_space(&g, "building", &[]).unwrap();
        assert!(matches!(map_to_distribution_layer(&space, "pad"), Err(DistributionError::DegenerateRegion)));
    }

    #[test]
    fn clockwise_input_is_normalized() {
        let r = SpawnRegion::new("r", vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]], 0.0, Attributes::new()).unwrap();
        assert!(r.area() > 0.0);
        assert!(SpawnRegion::new("r", vec![[0.0, 0.0], [1.0, 0.0]], 0.0, Attributes::new()).is_err());
    }

    #[test]
    fn pattern_validation() {
        assert!(SamplingPattern::Radius { center: RadiusCenter::RegionCentroid, r: 0.0 }.validate().is_err());
        assert!(SamplingPattern::Line { p0: [1.0, 1.0], p1: [1.0, 1.0], jitter: 1.0 }.validate().is_err());
        assert!(SamplingPattern::Uniform.validate().is_ok());
    }
}
