use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::graph::SceneGraph;
use super::types::{AssetPrototype, GlobalState};
use super::SceneError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseMapKind {
    Designed3d,
    Map3d,
    NerfBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

/// Remote Overpass query. `bbox` is `[south, west, north, east]` in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverpassRef {
    pub bbox: [f64; 4],
    #[serde(default = "default_feature_class")]
    pub feature_class: String,
}

fn default_feature_class() -> String {
    "building".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeodataRef {
    Fixture(String),
    Remote {
        overpass: OverpassRef,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fallback: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpecification {
    pub scene_id: String,
    pub scene_class: String,
    pub base_map_kind: BaseMapKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<SceneGraph>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geodata_ref: Option<GeodataRef>,
    #[serde(default)]
    pub map_origin: GeoPoint,
    pub assets: Vec<AssetPrototype>,
    pub default_global: GlobalState,
    /// Directory relative fixture paths resolve against.
    #[serde(skip)]
    pub source_dir: Option<PathBuf>,
}

const REQUIRED: [&str; 5] = ["scene_id", "scene_class", "base_map_kind", "assets", "default_global"];

impl SceneSpecification {
    pub fn asset(&self, name: &str) -> Option<&AssetPrototype> {
        self.assets.iter().find(|a| a.name == name)
    }

    pub fn resolve_path(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        match &self.source_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn from_json(text: &str, source_dir: Option<&Path>) -> Result<Self, SceneError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| SceneError::SchemaMismatch(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| SceneError::SchemaMismatch("top level must be an object".into()))?;
        for key in REQUIRED {
            if !obj.contains_key(key) {
                return Err(SceneError::MissingField(key.to_string()));
            }
        }
        let mut spec: SceneSpecification = serde_json::from_value(value).map_err(|e| {
            let msg = e.to_string();
            match msg.strip_prefix("missing field `").and_then(|m| m.split('`').next()) {
                Some(field) => SceneError::MissingField(field.to_string()),
                None => SceneError::SchemaMismatch(msg),
            }
        })?;
        spec.source_dir = source_dir.map(Path::to_path_buf);
        spec.check()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene spec serializes")
    }

    fn check(&mut self) -> Result<(), SceneError> {
        if self.scene_id.trim().is_empty() {
            return Err(SceneError::MissingField("scene_id".into()));
        }
        let graph_based = matches!(self.base_map_kind, BaseMapKind::Designed3d | BaseMapKind::NerfBlock);
        match (graph_based, self.graph.is_some(), self.geodata_ref.is_some()) {
            (true, true, false) | (false, false, true) => {}
            _ => {
                return Err(SceneError::InconsistentBaseMap(format!(
                    "{:?} requires {}",
                    self.base_map_kind,
                    if graph_based { "graph and no geodata_ref" } else { "geodata_ref and no graph" }
                )))
            }
        }
        if let Some(graph) = &self.graph {
            let report = graph.validate();
            if !report.is_valid() {
                return Err(SceneError::InvalidGraph(report.to_string()));
            }
        }
        for asset in &mut self.assets {
            if !asset.aabb.is_ordered() || !asset.aabb.is_finite() {
                return Err(SceneError::SchemaMismatch(format!("asset {} has a degenerate aabb", asset.name)));
            }
            asset.refresh();
        }
        let g = &self.default_global;
        if !(0.0..24.0).contains(&g.time_of_day)
            || !(0.0..=1.0).contains(&g.ambient_level)
            || !(0.0..=1.0).contains(&g.weather.intensity)
        {
            return Err(SceneError::SchemaMismatch("default_global values out of range".into()));
        }
        Ok(())
    }
}

/// Reads and validates a scene-spec JSON file.
pub fn load_scene_spec(path: impl AsRef<Path>) -> Result<SceneSpecification, SceneError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| SceneError::Io(path.display().to_string(), e))?;
    SceneSpecification::from_json(&text, path.parent())
}

/// Loads one spec file, or every `*.json` in a directory sorted by file name.
pub fn load_scene_specs(path: impl AsRef<Path>) -> Result<Vec<SceneSpecification>, SceneError> {
    let path = path.as_ref();
    if path.is_file() {
        return Ok(vec![load_scene_spec(path)?]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| SceneError::Io(path.display().to_string(), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files.iter().map(load_scene_spec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "scene_id": "tiny", "scene_class": "test", "base_map_kind": "designed3d",
        "graph": [],
        "assets": [{"name": "box", "aabb": {"min": [0,0,0], "max": [1,1,1]}}],
        "default_global": {"weather": {"kind": "sun", "intensity": 0.5}, "time_of_day": 12, "ambient_level": 0.4}
    }"#;

    #[test]
    fn minimal_spec_loads() {
        let s = SceneSpecification::from_json(MINIMAL, None).unwrap();
        assert_eq!(s.graph.as_ref().unwrap().len(), 0);
        assert_eq!(s.assets.len(), 1);
        assert!((s.assets[0].bounding_radius - 3f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn map3d_without_geodata_is_inconsistent() {
        let text = MINIMAL.replace("designed3d", "map3d").replace("\"graph\": [],", "");
        assert!(matches!(SceneSpecification::from_json(&text, None), Err(SceneError::InconsistentBaseMap(_))));
    }

    #[test]
    fn missing_and_unknown_fields() {
        let text = MINIMAL.replace("\"scene_class\": \"test\",", "");
        match SceneSpecification::from_json(&text, None) {
            Err(SceneError::MissingField(f)) => assert_eq!(f, "scene_class"),
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("\"scene_id\"", "\"extra\": 1, \"scene_id\"");
        assert!(matches!(SceneSpecification::from_json(&text, None), Err(SceneError::SchemaMismatch(_))));
        let text = MINIMAL.replace("\"name\": \"box\",", "");
        assert!(matches!(SceneSpecification::from_json(&text, None), Err(SceneError::MissingField(f)) if f == "name"));
    }

    #[test]
    fn json_round_trip() {
        let s = SceneSpecification::from_json(MINIMAL, None).unwrap();
        let again = SceneSpecification::from_json(&s.to_json(), None).unwrap();
        assert_eq!(s, again);
    }
}
