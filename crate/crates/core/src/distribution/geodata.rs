//! Building footprints from GeoJSON fixtures or a live Overpass endpoint.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use serde_json::Value;

use super::{DistributionError, DistributionLayer, LayerSource, SpawnRegion};
use crate::scene::{AttrFilter, AttrValue, Attributes, GeoPoint};

/// Env var naming the Overpass interpreter endpoint.
pub const OVERPASS_ENV: &str = "ASDA_OVERPASS_URL";
pub const DEFAULT_BUILDING_HEIGHT: f64 = 10.0;
const EARTH_RADIUS_M: f64 = 6_371_008.8;
const TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoBBox {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
}

impl GeoBBox {
    pub fn from_array([south, west, north, east]: [f64; 4]) -> Self {
        Self { south, west, north, east }
    }

    pub fn is_valid(&self) -> bool {
        self.south < self.north && self.west < self.east
    }

    fn overlaps(&self, lo: [f64; 2], hi: [f64; 2]) -> bool {
        lo[0] <= self.east && hi[0] >= self.west && lo[1] <= self.north && hi[1] >= self.south
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GeoSource {
    Fixture(PathBuf),
    Overpass { endpoint: String },
}

impl GeoSource {
    /// Remote source from the environment, if configured.
    pub fn overpass_from_env() -> Option<Self> {
        std::env::var(OVERPASS_ENV).ok().filter(|s| !s.is_empty()).map(|endpoint| GeoSource::Overpass { endpoint })
    }
}

/// Polygon feature; `ring` holds (lon, lat) pairs without the closing vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoFeature {
    pub id: String,
    pub ring: Vec<[f64; 2]>,
    pub properties: Attributes,
}

#[derive(Debug, Default)]
pub struct FeatureSet {
    pub features: Vec<GeoFeature>,
    pub warnings: Vec<String>,
}

fn attrs_from_json(props: Option<&serde_json::Map<String, Value>>) -> Attributes {
    let mut out = Attributes::new();
    for (k, v) in props.into_iter().flatten() {
        match v {
            Value::Number(n) => {
                out.insert(k.clone(), AttrValue::Num(n.as_f64().unwrap_or(f64::NAN)));
            }
            Value::String(s) => {
                out.insert(k.clone(), AttrValue::Str(s.clone()));
            }
            _ => {}
        }
    }
    out
}

fn ring_from(coords: &[Value]) -> Option<Vec<[f64; 2]>> {
    let mut ring: Vec<[f64; 2]> = coords
        .iter()
        .map(|c| {
            let a = c.as_array()?;
            Some([a.first()?.as_f64()?, a.get(1)?.as_f64()?])
        })
        .collect::<Option<_>>()?;
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    (ring.len() >= 3).then_some(ring)
}

/// Parses a GeoJSON FeatureCollection. Malformed features are skipped with a
/// warning.
pub fn parse_geojson(text: &str) -> Result<FeatureSet, DistributionError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| DistributionError::MalformedGeodata(e.to_string()))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(DistributionError::MalformedGeodata("expected a FeatureCollection".into()));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| DistributionError::MalformedGeodata("missing features array".into()))?;
    let mut set = FeatureSet::default();
    for (i, f) in features.iter().enumerate() {
        let properties = attrs_from_json(f.get("properties").and_then(Value::as_object));
        let id = match f.get("id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => format!("feature_{i}"),
        };
        let geom = f.get("geometry");
        let kind = geom.and_then(|g| g.get("type")).and_then(Value::as_str);
        let rings = geom.and_then(|g| g.get("coordinates")).and_then(Value::as_array);
        let ring = match (kind, rings) {
            (Some("Polygon"), Some(rings)) if rings.len() == 1 => rings[0].as_array().and_then(|r| ring_from(r)),
            (Some("Polygon"), Some(rings)) if rings.len() > 1 => {
                set.warnings.push(format!("feature {id}: polygons with holes are not supported"));
                continue;
            }
            _ => None,
        };
        match ring {
            Some(ring) => set.features.push(GeoFeature { id, ring, properties }),
            None => set.warnings.push(format!("feature {id}: malformed or non-polygon geometry skipped")),
        }
    }
    Ok(set)
}

/// Parses Overpass `out geom` JSON. Only closed ways become features.
pub fn parse_overpass_json(text: &str) -> Result<FeatureSet, DistributionError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| DistributionError::MalformedGeodata(e.to_string()))?;
    let elements = doc
        .get("elements")
        .and_then(Value::as_array)
        .ok_or_else(|| DistributionError::MalformedGeodata("missing elements array".into()))?;
    let mut set = FeatureSet::default();
    for el in elements {
        if el.get("type").and_then(Value::as_str) != Some("way") {
            continue;
        }
        let id = el.get("id").map(|v| format!("way/{v}")).unwrap_or_else(|| "way/?".into());
        let geometry = el.get("geometry").and_then(Value::as_array);
        let closed = geometry.is_some_and(|g| g.len() > 3 && g.first() == g.last());
        let ring = geometry.filter(|_| closed).and_then(|g| {
            let mut ring: Vec<[f64; 2]> = g
                .iter()
                .map(|p| Some([p.get("lon")?.as_f64()?, p.get("lat")?.as_f64()?]))
                .collect::<Option<_>>()?;
            ring.pop();
            Some(ring)
        });
        match ring {
            Some(ring) => {
                let properties = attrs_from_json(el.get("tags").and_then(Value::as_object));
                set.features.push(GeoFeature { id, ring, properties });
            }
            None => set.warnings.push(format!("{id}: open or malformed way skipped")),
        }
    }
    Ok(set)
}

pub fn overpass_query(feature_class: &str, bbox: &GeoBBox) -> String {
    format!(
        "[out:json][timeout:25];way[{}]({},{},{},{}); out geom;",
        feature_class, bbox.south, bbox.west, bbox.north, bbox.east
    )
}

/// POSTs `query` to `endpoint`, retrying once on failure.
pub fn fetch_overpass(endpoint: &str, query: &str) -> Result<String, DistributionError> {
    let agent = ureq::AgentBuilder::new().timeout(TIMEOUT).build();
    let mut last = String::new();
    for _ in 0..2 {
        match agent.post(endpoint).set("Content-Type", "text/plain").send_string(query) {
            Ok(resp) => match resp.into_string() {
                Ok(body) => return Ok(body),
                Err(e) => last = e.to_string(),
            },
            Err(e) => last = e.to_string(),
        }
    }
    Err(DistributionError::FetchFailed(last))
}

fn cache() -> &'static Mutex<HashMap<String, Arc<FeatureSet>>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<FeatureSet>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Loads (and caches) the features behind `source`.
pub fn load_features(source: &GeoSource, feature_class: &str, bbox: Option<&GeoBBox>) -> Result<Arc<FeatureSet>, DistributionError> {
    let key = match (source, bbox) {
        (GeoSource::Fixture(p), _) => format!("file:{}", p.display()),
        (GeoSource::Overpass { endpoint }, Some(b)) => format!("overpass:{endpoint}:{}", overpass_query(feature_class, b)),
        (GeoSource::Overpass { .. }, None) => {
            return Err(DistributionError::FetchFailed("remote queries need a bounding box".into()))
        }
    };
    if let Some(hit) = cache().lock().expect("geodata cache").get(&key) {
        return Ok(Arc::clone(hit));
    }
    let set = match source {
        GeoSource::Fixture(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| DistributionError::FetchFailed(format!("{}: {e}", path.display())))?;
            parse_geojson(&text)?
        }
        GeoSource::Overpass { endpoint } => {
            let body = fetch_overpass(endpoint, &overpass_query(feature_class, bbox.expect("checked above")))?;
            parse_overpass_json(&body)?
        }
    };
    let set = Arc::new(set);
    cache().lock().expect("geodata cache").insert(key, Arc::clone(&set));
    Ok(set)
}

/// Local equirectangular projection about `origin`: x east, z south, meters.
pub fn project(origin: &GeoPoint, lon: f64, lat: f64) -> [f64; 2] {
    let k = std::f64::consts::PI / 180.0 * EARTH_RADIUS_M;
    [k * (lon - origin.lon) * (origin.lat.to_radians()).cos(), -k * (lat - origin.lat)]
}

pub fn unproject(origin: &GeoPoint, p: [f64; 2]) -> (f64, f64) {
    let k = std::f64::consts::PI / 180.0 * EARTH_RADIUS_M;
    (origin.lon + p[0] / (k * origin.lat.to_radians().cos()), origin.lat - p[1] / k)
}

/// Region attributes: all properties plus `type` (amenity, else building
/// value), `address` and a numeric `height`.
fn region_attributes(props: &Attributes) -> Attributes {
    let mut attrs = props.clone();
    let kind = props.get("amenity").or_else(|| props.get("building")).cloned();
    if let Some(kind) = kind {
        attrs.entry("type".into()).or_insert(kind);
    }
    if let Some(street) = props.get("addr:street") {
        attrs.entry("address".into()).or_insert(street.clone());
    }
    attrs
}

pub fn feature_height(props: &Attributes) -> Option<f64> {
    props.get("height").and_then(|h| match h {
        AttrValue::Num(v) => Some(*v),
        AttrValue::Str(s) => s.trim().trim_end_matches('m').trim().parse().ok(),
    })
}

/// Builds a distribution layer from polygon features of `feature_class`.
pub fn layer_from_geodata(
    source: &GeoSource,
    bbox: Option<&GeoBBox>,
    feature_class: &str,
    filters: &[AttrFilter],
    origin: &GeoPoint,
    asset_name: &str,
) -> Result<DistributionLayer, DistributionError> {
    if let Some(b) = bbox {
        if !b.is_valid() {
            return Err(DistributionError::MalformedGeodata("bbox needs south<north and west<east".into()));
        }
    }
    let set = load_features(source, feature_class, bbox)?;
    let mut warnings = set.warnings.clone();
    let mut regions = Vec::new();
    for f in &set.features {
        if !f.properties.contains_key(feature_class) {
            continue;
        }
        if let Some(b) = bbox {
            let (lo, hi) = super::polygon::bbox(&f.ring);
            if !b.overlaps(lo, hi) {
                continue;
            }
        }
        let mut attrs = region_attributes(&f.properties);
        if !filters.iter().all(|flt| flt.matches(&attrs)) {
            continue;
        }
        let elevation = match feature_height(&f.properties) {
            Some(h) if h.is_finite() && h > 0.0 => h,
            _ => {
                warnings.push(format!("feature {}: no height, using {DEFAULT_BUILDING_HEIGHT} m", f.id));
                DEFAULT_BUILDING_HEIGHT
            }
        };
        attrs.insert("height".into(), AttrValue::Num(elevation));
        let polygon = f.ring.iter().map(|[lon, lat]| project(origin, *lon, *lat)).collect();
        match SpawnRegion::new(&f.id, polygon, elevation, attrs) {
            Ok(r) => regions.push(r),
            Err(e) => warnings.push(format!("feature {}: {e}", f.id)),
        }
    }
    if regions.is_empty() {
        return Err(DistributionError::NoFeatures);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let mut layer = DistributionLayer::new(asset_name, regions, LayerSource::Geodata)?;
    layer.warnings = warnings;
    Ok(layer)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ORIGIN: GeoPoint = GeoPoint { lat: 47.6, lon: -122.33 };

    #[test]
    fn projection_inverts() {
        let p = project(&ORIGIN, -122.331, 47.601);
        let (lon, lat) = unproject(&ORIGIN, p);
        assert!((lon + 122.331).abs() < 1e-12 && (lat - 47.601).abs() < 1e-12);
        assert!(p[0] < 0.0 && p[1] < 0.0, "west is -x, north is -z");
    }

    #[test]
    fn holes_and_multipolygons_are_skipped() {
        let text = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"building":"yes"},"geometry":{"type":"Polygon","coordinates":[
                [[0,0],[1,0],[1,1],[0,1],[0,0]], [[0.2,0.2],[0.3,0.2],[0.3,0.3],[0.2,0.2]]]}},
            {"type":"Feature","properties":{"building":"yes"},"geometry":{"type":"MultiPolygon","coordinates":[]}},
            {"type":"Feature","id":"ok","properties":{"building":"yes","height":12},"geometry":{"type":"Polygon","coordinates":[
                [[0,0],[0.001,0],[0.001,0.001],[0,0.001],[0,0]]]}}]}"#;
        let set = parse_geojson(text).unwrap();
        assert_eq!(set.features.len(), 1);
        assert_eq!(set.warnings.len(), 2);
        assert_eq!(set.features[0].ring.len(), 4);
    }

    #[test]
    fn overpass_ways_become_features() {
        let text = r#"{"elements":[
            {"type":"way","id":7,"tags":{"building":"yes","name":"A"},"geometry":[
                {"lat":0,"lon":0},{"lat":0,"lon":0.001},{"lat":0.001,"lon":0.001},{"lat":0,"lon":0}]},
            {"type":"node","id":8,"lat":0,"lon":0}]}"#;
        let set = parse_overpass_json(text).unwrap();
        assert_eq!(set.features.len(), 1);
        assert_eq!(set.features[0].id, "way/7");
    }

    #[test]
    fn query_template() {
        let q = overpass_query("building", &GeoBBox::from_array([47.0, -123.0, 48.0, -122.0]));
        assert!(q.contains("way[building](47,-123,48,-122); out geom;"));
    }
}
