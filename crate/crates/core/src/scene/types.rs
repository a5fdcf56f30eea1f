use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Matrix3, Matrix4, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

/// Attribute value attached to scene nodes, regions and features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Num(f64),
    Str(String),
}

impl AttrValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AttrValue::Num(v) => Some(*v),
            AttrValue::Str(s) => s.trim().parse().ok(),
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Num(v) => write!(f, "{v}"),
            AttrValue::Str(s) => f.write_str(s),
        }
    }
}

impl From<f64> for AttrValue {
    fn from(v: f64) -> Self {
        AttrValue::Num(v)
    }
}

impl From<&str> for AttrValue {
    fn from(v: &str) -> Self {
        AttrValue::Str(v.to_string())
    }
}

pub type Attributes = BTreeMap<String, AttrValue>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        Some(Self { min, max })
    }

    pub fn is_ordered(&self) -> bool {
        (0..3).all(|i| self.min[i] <= self.max[i])
    }

    pub fn is_finite(&self) -> bool {
        self.min.iter().chain(self.max.iter()).all(|v| v.is_finite())
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn half_diagonal(&self) -> f64 {
        self.extent().norm() * 0.5
    }

    /// Corners in a fixed order: bit 0 → x, bit 1 → y, bit 2 → z.
    pub fn corners(&self) -> [Vec3; 8] {
        std::array::from_fn(|i| {
            Vec3::new(
                if i & 1 == 0 { self.min.x } else { self.max.x },
                if i & 2 == 0 { self.min.y } else { self.max.y },
                if i & 4 == 0 { self.min.z } else { self.max.z },
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub rgb: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texture: Option<String>,
}

impl Default for Material {
    fn default() -> Self {
        Self { rgb: [0.6, 0.6, 0.6], texture: None }
    }
}

/// Intrinsic Z·Y·X Euler rotation, radians.
pub fn euler_matrix(rotation: &Vec3) -> Matrix3<f64> {
    let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), rotation.x);
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), rotation.y);
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), rotation.z);
    (rz * ry * rx).into_inner()
}

/// Translation · Rotation · Scale as an affine 4×4 matrix.
pub fn trs_matrix(translation: &Vec3, rotation: &Vec3, scale: &Vec3) -> Matrix4<f64> {
    let rs = euler_matrix(rotation) * Matrix3::from_diagonal(scale);
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rs);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(translation);
    m
}

pub fn transform_point(m: &Matrix4<f64>, p: &Vec3) -> Vec3 {
    (m * p.push(1.0)).xyz()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherKind {
    Rain,
    Sun,
    Snow,
}

impl WeatherKind {
    pub const DEFAULT_ORDER: [WeatherKind; 3] = [WeatherKind::Rain, WeatherKind::Sun, WeatherKind::Snow];

    pub fn name(self) -> &'static str {
        match self {
            WeatherKind::Rain => "rain",
            WeatherKind::Sun => "sun",
            WeatherKind::Snow => "snow",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "rain" | "rainy" => Some(WeatherKind::Rain),
            "sun" | "sunny" => Some(WeatherKind::Sun),
            "snow" | "snowy" => Some(WeatherKind::Snow),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weather {
    pub kind: WeatherKind,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spotlight {
    pub position: Vec3,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalState {
    pub weather: Weather,
    /// Hours in `[0, 24)`.
    pub time_of_day: f64,
    pub ambient_level: f64,
    #[serde(default)]
    pub spotlights: Vec<Spotlight>,
}

impl Default for GlobalState {
    fn default() -> Self {
        Self {
            weather: Weather { kind: WeatherKind::Sun, intensity: 0.0 },
            time_of_day: 12.0,
            ambient_level: 0.4,
            spotlights: Vec::new(),
        }
    }
}

impl GlobalState {
    /// Clamp levels into range and wrap the clock.
    pub fn normalized(mut self) -> Self {
        self.weather.intensity = self.weather.intensity.clamp(0.0, 1.0);
        self.ambient_level = self.ambient_level.clamp(0.0, 1.0);
        self.time_of_day = self.time_of_day.rem_euclid(24.0);
        for s in &mut self.spotlights {
            s.intensity = s.intensity.clamp(0.0, 1.0);
        }
        self
    }
}

/// Asset template from a scene's catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetPrototype {
    pub name: String,
    pub aabb: Aabb,
    #[serde(default)]
    pub default_material: Material,
    #[serde(default)]
    pub texture_set: Vec<String>,
    /// Particle-class assets spawn as noise rather than obstacles.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub particle: bool,
    /// Semantic class of the containers this asset is spawned over by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub container_class: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub textures_required: bool,
    #[serde(skip)]
    pub bounding_radius: f64,
}

impl AssetPrototype {
    pub fn new(name: &str, aabb: Aabb) -> Self {
        let mut p = Self {
            name: name.to_string(),
            aabb,
            default_material: Material::default(),
            texture_set: Vec::new(),
            particle: false,
            container_class: None,
            textures_required: false,
            bounding_radius: 0.0,
        };
        p.refresh();
        p
    }

    pub fn refresh(&mut self) {
        self.bounding_radius = self.aabb.half_diagonal();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceRole {
    Main,
    Obstacle,
    Noise,
}

/// A spawned asset variation placed in the world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetInstance {
    pub prototype: String,
    pub position: Vec3,
    pub rotation: Vec3,
    pub scale: Vec3,
    pub material: Material,
    pub role: InstanceRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_region: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant_index: Option<usize>,
    /// Local box of the prototype, carried so rendering needs no catalog.
    pub local_aabb: Aabb,
}

impl AssetInstance {
    pub fn world_matrix(&self) -> Matrix4<f64> {
        trs_matrix(&self.position, &self.rotation, &self.scale)
    }

    pub fn world_corners(&self) -> [Vec3; 8] {
        let m = self.world_matrix();
        self.local_aabb.corners().map(|c| transform_point(&m, &c))
    }

    pub fn center(&self) -> Vec3 {
        transform_point(&self.world_matrix(), &self.local_aabb.center())
    }

    pub fn bounding_radius(&self) -> f64 {
        self.local_aabb.extent().component_mul(&self.scale).norm() * 0.5
    }
}

/// One layer-1 variant registered for later spawning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetVariant {
    pub rotation: Vec3,
    pub scale: Vec3,
    pub material: Material,
}

impl AssetVariant {
    pub fn of_prototype(p: &AssetPrototype) -> Self {
        Self { rotation: Vec3::zeros(), scale: Vec3::repeat(1.0), material: p.default_material.clone() }
    }
}

/// Camera pose along a trajectory. Y-up, yaw about +Y, pitch positive looks up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPose {
    pub position: Vec3,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub frame_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Cylindrical,
    #[serde(rename = "point2point")]
    PointToPoint,
}

impl TrajectoryKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "cylindrical" => Some(Self::Cylindrical),
            "point2point" | "point_to_point" => Some(Self::PointToPoint),
            _ => None,
        }
    }
}

/// Resolved trajectory plan for one anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment {
    pub kind: TrajectoryKind,
    pub anchor: Vec3,
    /// Second endpoint for point-to-point segments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec3>,
    pub standoff: f64,
    pub altitude: f64,
    pub n_poses: usize,
    pub capture_distance: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub segments: Vec<TrajectorySegment>,
    /// Half-width of uniform pitch/yaw/roll jitter, radians. Zero disables it.
    pub pose_jitter: f64,
    pub jitter_seed: u64,
}

/// Deferred rule that spawns obstacles inside the camera cone at capture time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FovRule {
    pub obstacle_asset: String,
    pub local_aabb: Aabb,
    pub material: Material,
    pub probability: f64,
    pub distance_range: [f64; 2],
    pub cone_margin: f64,
    pub seed: u64,
    pub particle: bool,
}

/// Shadow request recorded at layer 1 and resolved once every layer has run,
/// so spotlights attach to the instances placed by later layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowRule {
    pub asset: String,
    pub radius_factors: [f64; 2],
    pub intensity_range: [f64; 2],
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub op: String,
    pub layer: u8,
    pub ordinal: usize,
    pub seed: u64,
    pub applied: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub params: serde_json::Value,
}

/// Static geometry rendered in every frame: scene-graph nodes or geodata
/// buildings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticBox {
    pub class: String,
    pub matrix: [[f64; 4]; 4],
    pub local_aabb: Aabb,
    pub material: Material,
}

impl StaticBox {
    pub fn from_matrix(class: &str, m: &Matrix4<f64>, local_aabb: Aabb, material: Material) -> Self {
        let mut rows = [[0.0; 4]; 4];
        for (r, row) in rows.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = m[(r, c)];
            }
        }
        Self { class: class.to_string(), matrix: rows, local_aabb, material }
    }

    pub fn axis_aligned(class: &str, aabb: Aabb, material: Material) -> Self {
        Self::from_matrix(class, &Matrix4::identity(), aabb, material)
    }

    pub fn matrix4(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|r, c| self.matrix[r][c])
    }

    pub fn world_corners(&self) -> [Vec3; 8] {
        let m = self.matrix4();
        self.local_aabb.corners().map(|c| transform_point(&m, &c))
    }
}

/// One fully resolved scene variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedScene {
    pub base: String,
    pub scene_class: String,
    pub variation_index: usize,
    pub instances: Vec<AssetInstance>,
    pub global: GlobalState,
    pub variants: BTreeMap<String, Vec<AssetVariant>>,
    pub deferred_fov_rules: Vec<FovRule>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pending_shadows: Vec<ShadowRule>,
    pub anchors: Vec<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_spec: Option<TrajectorySpec>,
    pub trajectory: Vec<TrajectoryPose>,
    pub provenance: Vec<ProvenanceEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub base_geometry: std::sync::Arc<Vec<StaticBox>>,
    pub master_seed: u64,
}

impl AugmentedScene {
    pub fn new(base: &str, scene_class: &str, variation_index: usize, global: GlobalState) -> Self {
        Self {
            base: base.to_string(),
            scene_class: scene_class.to_string(),
            variation_index,
            instances: Vec::new(),
            global,
            variants: BTreeMap::new(),
            deferred_fov_rules: Vec::new(),
            pending_shadows: Vec::new(),
            anchors: Vec::new(),
            trajectory_spec: None,
            trajectory: Vec::new(),
            provenance: Vec::new(),
            warnings: Vec::new(),
            base_geometry: Default::default(),
            master_seed: 0,
        }
    }

    pub fn main_instances(&self) -> impl Iterator<Item = &AssetInstance> {
        self.instances.iter().filter(|i| i.role == InstanceRole::Main)
    }

    /// Stable digest of the provenance list.
    pub fn provenance_digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(&self.provenance).expect("provenance serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_diagonal_is_bounding_radius() {
        let p = AssetPrototype::new("pad", Aabb::new(Vec3::new(-1.0, 0.0, -1.0), Vec3::new(1.0, 0.0, 1.0)));
        assert!((p.bounding_radius - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn euler_order_is_z_y_x() {
        let r = euler_matrix(&Vec3::new(std::f64::consts::FRAC_PI_2, 0.0, std::f64::consts::FRAC_PI_2));
        // X first maps +Y to +Z, then Z leaves +Z alone.
        let v = r * Vec3::new(0.0, 1.0, 0.0);
        assert!((v - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn global_state_clamps() {
        let mut g = GlobalState::default();
        g.ambient_level = 3.0;
        g.time_of_day = 25.0;
        let g = g.normalized();
        assert_eq!(g.ambient_level, 1.0);
        assert!((g.time_of_day - 1.0).abs() < 1e-12);
    }
}
