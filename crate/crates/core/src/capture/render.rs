//! Depth-buffered box rasterizer with flat Lambert shading.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::camera::{CameraIntrinsics, View};
use super::fov::resolve_fov_obstacles;
use super::raster::RasterImage;
use crate::scene::{AssetInstance, AugmentedScene, GlobalState, InstanceRole, TrajectoryPose, Vec3, WeatherKind};

const NEAR: f64 = 0.05;
pub const NIGHT_AMBIENT: f64 = 0.15;
const SUN_GAIN: f64 = 0.8;
/// Spotlight contribution at 1 m; falls off with the squared distance.
const SPOT_GAIN: f64 = 25.0;
pub const VISIBILITY_GRID: usize = 8;
/// Box coordinates are multiples of this, px. With integer image sizes the
/// mirror `w - x` is then exact, so flips invert bit for bit.
pub const BBOX_QUANTUM: f64 = 1.0 / 1024.0;
const ZENITH: [f64; 3] = [0.33, 0.52, 0.85];
const HORIZON: [f64; 3] = [0.78, 0.84, 0.9];
const RAIN_DIMMING: f64 = 0.7;
const RAIN_BLUE: f64 = 0.08;
const SNOW_LIGHTEN: f64 = 0.5;

/// Corner-index quads of a box, each listed in cyclic order.
const FACES: [[usize; 4]; 6] = [[0, 2, 6, 4], [1, 3, 7, 5], [0, 1, 5, 4], [2, 3, 7, 6], [0, 1, 3, 2], [4, 5, 7, 6]];

/// Rounds a box outward onto the [`BBOX_QUANTUM`] grid.
pub fn snap_bbox(b: [f64; 4]) -> [f64; 4] {
    let q = 1.0 / BBOX_QUANTUM;
    [(b[0] * q).floor() / q, (b[1] * q).floor() / q, (b[2] * q).ceil() / q, (b[3] * q).ceil() / q]
}

/// One annotated main instance in a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectAnnotation {
    pub class: String,
    /// `[x_min, y_min, x_max, y_max]` in pixels.
    pub bbox: [f64; 4],
    pub visibility: f64,
    pub position: Vec3,
    pub rotation: Vec3,
    pub scale: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_region: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameAnnotation {
    pub scene_id: String,
    pub variation_index: usize,
    pub frame_index: usize,
    pub width: u32,
    pub height: u32,
    pub pose: TrajectoryPose,
    pub weather: String,
    pub weather_intensity: f64,
    pub time_of_day: f64,
    pub ambient_level: f64,
    pub spotlight_count: usize,
    pub objects: Vec<ObjectAnnotation>,
    /// Centers of the obstacles spawned in the camera cone for this frame.
    #[serde(default)]
    pub fov_obstacles: Vec<Vec3>,
}

/// A box ready to draw.
#[derive(Debug, Clone)]
pub struct RenderBox {
    pub corners: [Vec3; 8],
    pub rgb: [f64; 3],
}

impl RenderBox {
    pub fn of_instance(inst: &AssetInstance) -> Self {
        Self { corners: inst.world_corners(), rgb: inst.material.rgb }
    }

    fn center(&self) -> Vec3 {
        self.corners.iter().sum::<Vec3>() / 8.0
    }

    /// Outward unit normal and centroid of each non-degenerate face.
    fn faces(&self) -> impl Iterator<Item = ([Vec3; 4], Vec3, Vec3)> + '_ {
        let center = self.center();
        FACES.iter().filter_map(move |f| {
            let q = f.map(|i| self.corners[i]);
            let mut n = (q[1] - q[0]).cross(&(q[3] - q[0]));
            if n.norm() < 1e-12 {
                return None;
            }
            n.normalize_mut();
            let fc = (q[0] + q[1] + q[2] + q[3]) / 4.0;
            if n.dot(&(fc - center)) < 0.0 {
                n = -n;
            }
            Some((q, n, fc))
        })
    }
}

/// Sun elevation factor in [0, 1] from the hour of day.
pub fn sun_elevation(time_of_day: f64) -> f64 {
    (PI * (time_of_day - 6.0) / 12.0).sin().max(0.0)
}

fn sun_direction(time_of_day: f64) -> Vec3 {
    let phase = PI * (time_of_day - 6.0) / 12.0;
    Vec3::new(phase.cos(), phase.sin(), 0.25).normalize()
}

/// Ambient term: the scene's level by day, a fixed floor at night.
pub fn effective_ambient(global: &GlobalState) -> f64 {
    if sun_elevation(global.time_of_day) > 0.0 {
        global.ambient_level
    } else {
        NIGHT_AMBIENT
    }
}

/// Light reaching a surface point with the given outward normal, before the
/// clamp to 1.
pub fn light_level(global: &GlobalState, normal: &Vec3, point: &Vec3) -> f64 {
    let mut level = effective_ambient(global);
    if sun_elevation(global.time_of_day) > 0.0 {
        level += SUN_GAIN * normal.dot(&sun_direction(global.time_of_day)).max(0.0);
    }
    for s in &global.spotlights {
        let d = s.position - point;
        let dist2 = d.norm_squared().max(1.0);
        level += SPOT_GAIN * s.intensity * normal.dot(&d.normalize()).max(0.0) / dist2;
    }
    level
}

/// Face color: material color times the clamped light level.
pub fn shade(rgb: [f64; 3], global: &GlobalState, normal: &Vec3, point: &Vec3) -> [f64; 3] {
    let k = light_level(global, normal, point).min(1.0);
    rgb.map(|c| c * k)
}

fn background(global: &GlobalState, height: u32) -> Vec<[f64; 3]> {
    let level = if sun_elevation(global.time_of_day) > 0.0 {
        global.ambient_level.max(sun_elevation(global.time_of_day))
    } else {
        NIGHT_AMBIENT
    };
    let k = 0.3 + 0.7 * level;
    (0..height)
        .map(|row| {
            let t = row as f64 / (height.max(2) - 1) as f64;
            std::array::from_fn(|c| (ZENITH[c] + (HORIZON[c] - ZENITH[c]) * t) * k)
        })
        .collect()
}

fn clip_near(poly: &[Vec3]) -> Vec<Vec3> {
    let inside = |p: &Vec3| p.z <= -NEAR;
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        match (inside(&a), inside(&b)) {
            (true, true) => out.push(b),
            (true, false) | (false, true) => {
                let t = (-NEAR - a.z) / (b.z - a.z);
                out.push(a + (b - a) * t);
                if inside(&b) {
                    out.push(b);
                }
            }
            (false, false) => {}
        }
    }
    out
}

/// Color, depth and owner buffers for one frame.
struct Frame {
    w: usize,
    h: usize,
    color: Vec<[f64; 3]>,
    depth: Vec<f64>,
    owner: Vec<usize>,
}

const NO_OWNER: usize = usize::MAX;

impl Frame {
    fn triangle(&mut self, a: [f64; 3], b: [f64; 3], c: [f64; 3], rgb: [f64; 3], owner: usize) {
        let edge = |p: [f64; 3], q: [f64; 3], x: f64, y: f64| (q[0] - p[0]) * (y - p[1]) - (q[1] - p[1]) * (x - p[0]);
        let area = edge(a, b, c[0], c[1]);
        if area.abs() < 1e-12 {
            return;
        }
        let x0 = a[0].min(b[0]).min(c[0]).floor().max(0.0) as usize;
        let y0 = a[1].min(b[1]).min(c[1]).floor().max(0.0) as usize;
        let x1 = (a[0].max(b[0]).max(c[0]).ceil().max(0.0) as usize).min(self.w);
        let y1 = (a[1].max(b[1]).max(c[1]).ceil().max(0.0) as usize).min(self.h);
        for y in y0..y1 {
            let py = y as f64 + 0.5;
            for x in x0..x1 {
                let px = x as f64 + 0.5;
                let w0 = edge(b, c, px, py) / area;
                let w1 = edge(c, a, px, py) / area;
                let w2 = 1.0 - w0 - w1;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let inv = w0 * a[2] + w1 * b[2] + w2 * c[2];
                let d = 1.0 / inv;
                let i = y * self.w + x;
                if d < self.depth[i] {
                    self.depth[i] = d;
                    self.color[i] = rgb;
                    self.owner[i] = owner;
                }
            }
        }
    }
}

/// Renders `boxes` plus background. `boxes[i]` owns buffer id `i`.
struct Renderer<'a> {
    view: View,
    intrinsics: &'a CameraIntrinsics,
    global: &'a GlobalState,
    camera: Vec3,
}

impl Renderer<'_> {
    fn draw(&self, frame: &mut Frame, b: &RenderBox, owner: usize) {
        for (q, n, fc) in b.faces() {
            if n.dot(&(self.camera - fc)) <= 0.0 {
                continue;
            }
            let cam: Vec<Vec3> = q.iter().map(|p| self.view.to_camera(p)).collect();
            let clipped = clip_near(&cam);
            if clipped.len() < 3 {
                continue;
            }
            let rgb = shade(b.rgb, self.global, &n, &fc);
            let pts: Vec<[f64; 3]> = clipped
                .iter()
                .map(|c| {
                    let (u, v) = self.view.pixel(c);
                    [u, v, 1.0 / -c.z]
                })
                .collect();
            for k in 1..pts.len() - 1 {
                frame.triangle(pts[0], pts[k], pts[k + 1], rgb, owner);
            }
        }
    }

    /// Pixel hull of the near-clipped box, clamped to the image.
    fn bbox(&self, b: &RenderBox) -> Option<[f64; 4]> {
        let (w, h) = (self.intrinsics.width as f64, self.intrinsics.height as f64);
        let mut hull = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for f in FACES {
            let cam: Vec<Vec3> = f.iter().map(|&i| self.view.to_camera(&b.corners[i])).collect();
            for c in clip_near(&cam) {
                let (u, v) = self.view.pixel(&c);
                hull = [hull[0].min(u), hull[1].min(v), hull[2].max(u), hull[3].max(v)];
            }
        }
        let clamped = snap_bbox([hull[0].max(0.0), hull[1].max(0.0), hull[2].min(w), hull[3].min(h)]);
        (clamped[0] < clamped[2] && clamped[1] < clamped[3]).then_some(clamped)
    }

    /// Fraction of grid samples over the box's front faces that win the
    /// depth test.
    fn visibility(&self, frame: &Frame, b: &RenderBox, owner: usize) -> f64 {
        let (mut total, mut seen) = (0usize, 0usize);
        for (q, n, fc) in b.faces() {
            if n.dot(&(self.camera - fc)) <= 0.0 {
                continue;
            }
            for i in 0..VISIBILITY_GRID {
                for j in 0..VISIBILITY_GRID {
                    total += 1;
                    let s = (i as f64 + 0.5) / VISIBILITY_GRID as f64;
                    let t = (j as f64 + 0.5) / VISIBILITY_GRID as f64;
                    let p = q[0] + (q[1] - q[0]) * s + (q[3] - q[0]) * t;
                    let c = self.view.to_camera(&p);
                    let depth = -c.z;
                    if depth <= NEAR {
                        continue;
                    }
                    let (u, v) = self.view.pixel(&c);
                    if !(u >= 0.0 && v >= 0.0 && u < frame.w as f64 && v < frame.h as f64) {
                        continue;
                    }
                    let k = v as usize * frame.w + u as usize;
                    let tolerance = 1e-6 + 1e-3 * depth;
                    if frame.owner[k] == owner || depth <= frame.depth[k] + tolerance {
                        seen += 1;
                    }
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            seen as f64 / total as f64
        }
    }
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Renders boxes and annotates those with `Some(instance)`.
fn render_boxes(
    boxes: &[(RenderBox, Option<&AssetInstance>)],
    global: &GlobalState,
    pose: &TrajectoryPose,
    intrinsics: &CameraIntrinsics,
) -> (RasterImage, Vec<ObjectAnnotation>) {
    let (w, h) = (intrinsics.width as usize, intrinsics.height as usize);
    let bg = background(global, intrinsics.height);
    let mut frame = Frame {
        w,
        h,
        color: (0..w * h).map(|i| bg[i / w]).collect(),
        depth: vec![f64::INFINITY; w * h],
        owner: vec![NO_OWNER; w * h],
    };
    let r = Renderer { view: View::new(intrinsics, pose), intrinsics, global, camera: pose.position };
    for (i, (b, _)) in boxes.iter().enumerate() {
        r.draw(&mut frame, b, i);
    }

    let mut objects = Vec::new();
    for (i, (b, inst)) in boxes.iter().enumerate() {
        let Some(inst) = inst else { continue };
        let Some(bbox) = r.bbox(b) else { continue };
        let visibility = r.visibility(&frame, b, i);
        if visibility > 0.0 {
            objects.push(ObjectAnnotation {
                class: inst.prototype.clone(),
                bbox,
                visibility,
                position: inst.position,
                rotation: inst.rotation,
                scale: inst.scale,
                variant_index: inst.variant_index,
                anchor_region: inst.anchor_region.clone(),
            });
        }
    }

    let intensity = global.weather.intensity;
    let mut img = RasterImage::new(intrinsics.width, intrinsics.height);
    for (k, px) in frame.color.iter().enumerate() {
        let mut c = *px;
        match global.weather.kind {
            WeatherKind::Rain => {
                c = c.map(|v| v * RAIN_DIMMING);
                c[2] += RAIN_BLUE * intensity;
            }
            WeatherKind::Snow if frame.owner[k] == NO_OWNER => {
                c = c.map(|v| v + (1.0 - v) * SNOW_LIGHTEN * intensity);
            }
            _ => {}
        }
        img.pixels[k * 3..k * 3 + 3].copy_from_slice(&c.map(to_byte));
    }
    (img, objects)
}

/// Renders every box of the scene plus this frame's FOV obstacles, and
/// annotates visible main instances.
pub fn render_frame(scene: &AugmentedScene, pose: &TrajectoryPose, intrinsics: &CameraIntrinsics) -> (RasterImage, FrameAnnotation) {
    let fov = resolve_fov_obstacles(scene, pose, intrinsics);
    let mut boxes: Vec<(RenderBox, Option<&AssetInstance>)> = scene
        .base_geometry
        .iter()
        .map(|s| (RenderBox { corners: s.world_corners(), rgb: s.material.rgb }, None))
        .collect();
    for inst in &scene.instances {
        boxes.push((RenderBox::of_instance(inst), (inst.role == InstanceRole::Main).then_some(inst)));
    }
    for inst in &fov {
        boxes.push((RenderBox::of_instance(inst), None));
    }
    let (image, objects) = render_boxes(&boxes, &scene.global, pose, intrinsics);
    let g = &scene.global;
    let annotation = FrameAnnotation {
        scene_id: scene.base.clone(),
        variation_index: scene.variation_index,
        frame_index: pose.frame_index,
        width: intrinsics.width,
        height: intrinsics.height,
        pose: *pose,
        weather: g.weather.kind.name().to_string(),
        weather_intensity: g.weather.intensity,
        time_of_day: g.time_of_day,
        ambient_level: g.ambient_level,
        spotlight_count: g.spotlights.len(),
        objects,
        fov_obstacles: fov.iter().map(AssetInstance::center).collect(),
    };
    (image, annotation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Aabb, Material, Spotlight, Weather};

    fn unit_box_at(z: f64, half: f64) -> AssetInstance {
        AssetInstance {
            prototype: "box".into(),
            position: Vec3::new(0.0, 0.0, z),
            rotation: Vec3::zeros(),
            scale: Vec3::repeat(1.0),
            material: Material { rgb: [0.8, 0.2, 0.1], texture: None },
            role: InstanceRole::Main,
            anchor_region: None,
            variant_index: None,
            local_aabb: Aabb::new(Vec3::repeat(-half), Vec3::repeat(half)),
        }
    }

    fn origin_pose() -> TrajectoryPose {
        TrajectoryPose { position: Vec3::zeros(), yaw: 0.0, pitch: 0.0, roll: 0.0, frame_index: 0 }
    }

    #[test]
    fn full_ambient_without_lights_keeps_material_color() {
        let g = GlobalState { ambient_level: 1.0, time_of_day: 12.0, ..GlobalState::default() };
        let rgb = [0.3, 0.6, 0.9];
        assert_eq!(shade(rgb, &g, &Vec3::y(), &Vec3::zeros()), rgb);
        assert_eq!(shade(rgb, &g, &-Vec3::y(), &Vec3::zeros()), rgb);
        let night = GlobalState { time_of_day: 0.0, ..g };
        assert_eq!(shade(rgb, &night, &Vec3::y(), &Vec3::zeros()), rgb.map(|c| c * NIGHT_AMBIENT));
    }

    #[test]
    fn midnight_has_no_sun() {
        assert_eq!(sun_elevation(0.0), 0.0);
        assert!((sun_elevation(12.0) - 1.0).abs() < 1e-12);
        let g = GlobalState { time_of_day: 0.0, ..GlobalState::default() };
        assert_eq!(light_level(&g, &Vec3::y(), &Vec3::zeros()), NIGHT_AMBIENT);
    }

    #[test]
    fn spotlights_fall_off_with_distance() {
        let mut g = GlobalState { time_of_day: 0.0, ..GlobalState::default() };
        g.spotlights.push(Spotlight { position: Vec3::new(0.0, 5.0, 0.0), intensity: 1.0 });
        let near = light_level(&g, &Vec3::y(), &Vec3::zeros());
        g.spotlights[0].position.y = 10.0;
        let far = light_level(&g, &Vec3::y(), &Vec3::zeros());
        assert!(((near - NIGHT_AMBIENT) / (far - NIGHT_AMBIENT) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn empty_scene_is_uniform_background_rows() {
        let k = CameraIntrinsics::new(32, 24, 1.2).unwrap();
        let scene = AugmentedScene::new("s", "c", 0, GlobalState::default());
        let (img, ann) = render_frame(&scene, &origin_pose(), &k);
        assert!(ann.objects.is_empty());
        for y in 0..24 {
            assert!((1..32).all(|x| img.get(x, y) == img.get(0, y)));
        }
    }

    #[test]
    fn centered_box_annotation() {
        let k = CameraIntrinsics::new(64, 64, 1.2).unwrap();
        let mut scene = AugmentedScene::new("s", "c", 0, GlobalState::default());
        scene.instances.push(unit_box_at(-10.0, 0.5));
        let (_, ann) = render_frame(&scene, &origin_pose(), &k);
        assert_eq!(ann.objects.len(), 1);
        let o = &ann.objects[0];
        assert_eq!(o.visibility, 1.0);
        assert!(((o.bbox[0] + o.bbox[2]) / 2.0 - 32.0).abs() < 1e-9);
        assert!(((o.bbox[1] + o.bbox[3]) / 2.0 - 32.0).abs() < 1e-9);
    }

    #[test]
    fn occluder_lowers_visibility() {
        let k = CameraIntrinsics::new(64, 64, 1.2).unwrap();
        let mut scene = AugmentedScene::new("s", "c", 0, GlobalState::default());
        scene.instances.push(unit_box_at(-10.0, 0.5));
        let mut blocker = unit_box_at(-5.0, 0.2);
        blocker.role = InstanceRole::Obstacle;
        blocker.position.x = 0.15;
        scene.instances.push(blocker);
        let (_, ann) = render_frame(&scene, &origin_pose(), &k);
        assert!(ann.objects[0].visibility < 1.0 && ann.objects[0].visibility > 0.0);
    }

    #[test]
    fn rain_darkens() {
        let k = CameraIntrinsics::new(32, 32, 1.2).unwrap();
        let mut scene = AugmentedScene::new("s", "c", 0, GlobalState::default());
        let (sunny, _) = render_frame(&scene, &origin_pose(), &k);
        scene.global.weather = Weather { kind: WeatherKind::Rain, intensity: 0.5 };
        let (rainy, _) = render_frame(&scene, &origin_pose(), &k);
        assert!(rainy.mean_luminance() < sunny.mean_luminance());
    }
}
