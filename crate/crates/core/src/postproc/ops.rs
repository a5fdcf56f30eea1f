//! The built-in image augmentations.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde_json::json;

use super::effects::{Effect, Visibility};
use super::warp::{resample, transform_boxes};
use super::AugmentError;
use crate::capture::{ObjectAnnotation, RasterImage};
use crate::preproc::{ParamKind, ParamSchema, Params, ParamsExt};
use crate::rng::{uniform, Stream};

pub type EffectRegistry = BTreeMap<String, Arc<dyn Effect>>;

pub fn builtin_effects() -> EffectRegistry {
    let mut m: EffectRegistry = BTreeMap::new();
    m.insert("visibility".into(), Arc::new(Visibility));
    m
}

/// An image augmentation. Implement this to extend the post-processing
/// pipeline.
pub trait AugmentOp: Send + Sync {
    fn name(&self) -> &str;
    fn schema(&self) -> Vec<ParamSchema> {
        Vec::new()
    }
    /// Cross-parameter checks beyond the schema. Returns (param, reason).
    fn check(&self, _params: &Params, _effects: &EffectRegistry) -> Result<(), (String, String)> {
        Ok(())
    }
    /// Transforms the image and its boxes; returns the resolved parameters.
    fn apply(
        &self,
        img: &mut RasterImage,
        objects: &mut Vec<ObjectAnnotation>,
        params: &Params,
        effects: &EffectRegistry,
        rng: &mut Stream,
    ) -> Result<serde_json::Value, AugmentError>;
}

pub fn builtins() -> Vec<Arc<dyn AugmentOp>> {
    vec![Arc::new(Rotate), Arc::new(Flip), Arc::new(RandomErasing), Arc::new(Zoom), Arc::new(GridDistortion), Arc::new(AddEffect)]
}

pub mod defaults {
    pub const MAX_ROTATION: f64 = 45.0;
    pub const ERASE_AREA: [f64; 2] = [0.02, 0.33];
    pub const MAX_ERASE_AREA: f64 = 0.4;
    pub const ERASE_ASPECT: [f64; 2] = [0.5, 2.0];
    pub const ZOOM: [f64; 2] = [1.0, 1.5];
    pub const GRID: usize = 4;
    pub const GRID_DISPLACEMENT: f64 = 4.0;
    /// Largest lattice displacement as a fraction of the shorter side.
    pub const MAX_DISPLACEMENT_FRACTION: f64 = 0.1;
    /// Points per box side mapped through non-affine warps.
    pub const OUTLINE_POINTS: usize = 8;
}

fn center(img: &RasterImage) -> (f64, f64) {
    (img.width as f64 / 2.0, img.height as f64 / 2.0)
}

/// Rotates about the image center by `degrees`, counter-clockwise as seen
/// on screen. Uncovered pixels take the nearest edge color.
pub fn rotate_image(img: &RasterImage, objects: &mut Vec<ObjectAnnotation>, degrees: f64) -> RasterImage {
    let (s, c) = degrees.to_radians().sin_cos();
    let (cx, cy) = center(img);
    let out = resample(img, |x, y| {
        let (dx, dy) = (x - cx, y - cy);
        (cx + dx * c - dy * s, cy + dx * s + dy * c)
    });
    transform_boxes(objects, img.width, img.height, 1, |x, y| {
        let (dx, dy) = (x - cx, y - cy);
        (cx + dx * c + dy * s, cy - dx * s + dy * c)
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlipAxis {
    Horizontal,
    Vertical,
}

impl FlipAxis {
    pub fn name(self) -> &'static str {
        match self {
            FlipAxis::Horizontal => "h",
            FlipAxis::Vertical => "v",
        }
    }
}

/// Mirrors pixels exactly; boxes reflect about the image midline.
pub fn flip_image(img: &RasterImage, objects: &mut [ObjectAnnotation], axis: FlipAxis) -> RasterImage {
    let mut out = RasterImage::new(img.width, img.height);
    let (w, h) = (img.width, img.height);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = match axis {
                FlipAxis::Horizontal => (w - 1 - x, y),
                FlipAxis::Vertical => (x, h - 1 - y),
            };
            out.set(x, y, img.get(sx, sy));
        }
    }
    for o in objects {
        let b = o.bbox;
        o.bbox = match axis {
            FlipAxis::Horizontal => [w as f64 - b[2], b[1], w as f64 - b[0], b[3]],
            FlipAxis::Vertical => [b[0], h as f64 - b[3], b[2], h as f64 - b[1]],
        };
    }
    out
}

/// Rectangle `[x, y, width, height]` for an erased area fraction and aspect
/// ratio (width / height), clamped to the image.
pub fn erase_rect_size(img_w: u32, img_h: u32, fraction: f64, aspect: f64) -> (u32, u32) {
    let area = fraction * img_w as f64 * img_h as f64;
    let rw = ((area * aspect).sqrt().round() as u32).clamp(1, img_w);
    let rh = ((area / aspect).sqrt().round() as u32).clamp(1, img_h);
    (rw, rh)
}

/// Center crop of `1 / factor` of each side, resized back with bilinear
/// sampling.
pub fn zoom_image(img: &RasterImage, objects: &mut Vec<ObjectAnnotation>, factor: f64) -> RasterImage {
    let (cx, cy) = center(img);
    let out = resample(img, |x, y| (cx + (x - cx) / factor, cy + (y - cy) / factor));
    transform_boxes(objects, img.width, img.height, 1, |x, y| (cx + (x - cx) * factor, cy + (y - cy) * factor));
    out
}

/// A displaced control lattice of `cells x cells` cells over the image.
///
/// The warp is backward: destination point `p` reads the source at
/// `p + D(p)`, with `D` the bilinear interpolation of node displacements.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub cells: usize,
    pub width: f64,
    pub height: f64,
    /// Row-major `(cells + 1)^2` node displacements, px.
    pub displacement: Vec<(f64, f64)>,
}

impl Lattice {
    pub fn random(img: &RasterImage, cells: usize, max_disp: f64, rng: &mut impl Rng) -> Self {
        let nodes = (cells + 1) * (cells + 1);
        let displacement = (0..nodes).map(|_| (uniform(rng, -max_disp, max_disp), uniform(rng, -max_disp, max_disp))).collect();
        Self { cells, width: img.width as f64, height: img.height as f64, displacement }
    }

    pub fn at(&self, x: f64, y: f64) -> (f64, f64) {
        let n = self.cells;
        let gx = (x / self.width * n as f64).clamp(0.0, n as f64);
        let gy = (y / self.height * n as f64).clamp(0.0, n as f64);
        let i = (gx.floor() as usize).min(n - 1);
        let j = (gy.floor() as usize).min(n - 1);
        let (tx, ty) = (gx - i as f64, gy - j as f64);
        let d = |a: usize, b: usize| self.displacement[b * (n + 1) + a];
        let (d00, d10, d01, d11) = (d(i, j), d(i + 1, j), d(i, j + 1), d(i + 1, j + 1));
        let lerp = |a: f64, b: f64, c: f64, e: f64| (a * (1.0 - tx) + b * tx) * (1.0 - ty) + (c * (1.0 - tx) + e * tx) * ty;
        (lerp(d00.0, d10.0, d01.0, d11.0), lerp(d00.1, d10.1, d01.1, d11.1))
    }

    fn max_disp(&self) -> f64 {
        self.displacement.iter().fold(0.0f64, |m, d| m.max(d.0.abs()).max(d.1.abs()))
    }

    /// Source position read by destination point `(x, y)`.
    pub fn backward(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = self.at(x, y);
        (x + dx, y + dy)
    }

    /// Destination of source point `(x, y)`: solves `q + D(q) = s` by
    /// fixed-point iteration. The result lies within the largest node
    /// displacement of `s` on each axis.
    pub fn forward(&self, x: f64, y: f64) -> (f64, f64) {
        let m = self.max_disp();
        let (mut qx, mut qy) = (x, y);
        let mut best = ((x, y), f64::INFINITY);
        for _ in 0..64 {
            let (dx, dy) = self.at(qx, qy);
            let residual = (qx + dx - x).abs() + (qy + dy - y).abs();
            if residual < best.1 {
                best = ((qx, qy), residual);
            }
            if residual < 1e-9 {
                break;
            }
            qx = x - dx;
            qy = y - dy;
        }
        let (qx, qy) = best.0;
        (qx.clamp(x - m, x + m), qy.clamp(y - m, y + m))
    }
}

pub fn warp_image(img: &RasterImage, objects: &mut Vec<ObjectAnnotation>, lattice: &Lattice) -> RasterImage {
    let out = resample(img, |x, y| lattice.backward(x, y));
    transform_boxes(objects, img.width, img.height, defaults::OUTLINE_POINTS, |x, y| lattice.forward(x, y));
    out
}

pub struct Rotate;

impl AugmentOp for Rotate {
    fn name(&self) -> &str {
        "rotate"
    }

    fn schema(&self) -> Vec<ParamSchema> {
        let max = Some(defaults::MAX_ROTATION);
        vec![
            ParamSchema::new("max_left_rotation", ParamKind::Number { min: Some(0.0), max }, "largest clockwise angle, degrees (default 10)"),
            ParamSchema::new("max_right_rotation", ParamKind::Number { min: Some(0.0), max }, "largest counter-clockwise angle, degrees (default 10)"),
        ]
    }

    fn apply(&self, img: &mut RasterImage, objects: &mut Vec<ObjectAnnotation>, params: &Params, _: &EffectRegistry, rng: &mut Stream) -> Result<serde_json::Value, AugmentError> {
        let left = params.num_or("max_left_rotation", 10.0);
        let right = params.num_or("max_right_rotation", 10.0);
        for v in [left, right] {
            if !(0.0..=defaults::MAX_ROTATION).contains(&v) {
                return Err(AugmentError::InvalidRange(format!("rotation limit {v} outside [0, 45]")));
            }
        }
        let angle = uniform(rng, -left, right);
        *img = rotate_image(img, objects, angle);
        Ok(json!({ "angle": angle }))
    }
}

pub struct Flip;

const FLIP_AXES: &[&str] = &["h", "v", "either"];

impl AugmentOp for Flip {
    fn name(&self) -> &str {
        "flip"
    }

    fn schema(&self) -> Vec<ParamSchema> {
        vec![ParamSchema::new("axis", ParamKind::Choice { values: FLIP_AXES }, "h, v or either (default h)")]
    }

    fn apply(&self, img: &mut RasterImage, objects: &mut Vec<ObjectAnnotation>, params: &Params, _: &EffectRegistry, rng: &mut Stream) -> Result<serde_json::Value, AugmentError> {
        let axis = match params.text("axis").unwrap_or("h") {
            "v" => FlipAxis::Vertical,
            "either" if rng.gen_bool(0.5) => FlipAxis::Vertical,
            _ => FlipAxis::Horizontal,
        };
        *img = flip_image(img, objects, axis);
        Ok(json!({ "axis": axis.name() }))
    }
}

pub struct RandomErasing;

impl AugmentOp for RandomErasing {
    fn name(&self) -> &str {
        "random_erasing"
    }

    fn schema(&self) -> Vec<ParamSchema> {
        vec![ParamSchema::new(
            "area_fraction",
            ParamKind::Range { min: 0.0, max: defaults::MAX_ERASE_AREA },
            "erased share of the image (default [0.02, 0.33])",
        )]
    }

    fn check(&self, params: &Params, _: &EffectRegistry) -> Result<(), (String, String)> {
        match params.range_of("area_fraction") {
            Some(r) if r[0] <= 0.0 => Err(("area_fraction".into(), "must be > 0".into())),
            _ => Ok(()),
        }
    }

    fn apply(&self, img: &mut RasterImage, _: &mut Vec<ObjectAnnotation>, params: &Params, _: &EffectRegistry, rng: &mut Stream) -> Result<serde_json::Value, AugmentError> {
        let range = params.range_or("area_fraction", defaults::ERASE_AREA);
        let fraction = uniform(rng, range[0], range[1]);
        let aspect = uniform(rng, defaults::ERASE_ASPECT[0], defaults::ERASE_ASPECT[1]);
        let (rw, rh) = erase_rect_size(img.width, img.height, fraction, aspect);
        let x0 = rng.gen_range(0..=img.width - rw);
        let y0 = rng.gen_range(0..=img.height - rh);
        for y in y0..y0 + rh {
            for x in x0..x0 + rw {
                img.set(x, y, rng.gen());
            }
        }
        Ok(json!({ "area_fraction": fraction, "aspect": aspect, "rect": [x0, y0, rw, rh] }))
    }
}

pub struct Zoom;

impl AugmentOp for Zoom {
    fn name(&self) -> &str {
        "zoom"
    }

    fn schema(&self) -> Vec<ParamSchema> {
        vec![ParamSchema::new("factor", ParamKind::Range { min: 1.0, max: 2.0 }, "zoom factor range (default [1, 1.5])")]
    }

    fn apply(&self, img: &mut RasterImage, objects: &mut Vec<ObjectAnnotation>, params: &Params, _: &EffectRegistry, rng: &mut Stream) -> Result<serde_json::Value, AugmentError> {
        let range = params.range_or("factor", defaults::ZOOM);
        if !(1.0 <= range[0] && range[0] <= range[1] && range[1] <= 2.0) {
            return Err(AugmentError::InvalidRange(format!("zoom factor [{}, {}] outside [1, 2]", range[0], range[1])));
        }
        let factor = uniform(rng, range[0], range[1]);
        *img = zoom_image(img, objects, factor);
        Ok(json!({ "factor": factor }))
    }
}

pub struct GridDistortion;

impl AugmentOp for GridDistortion {
    fn name(&self) -> &str {
        "grid_distortion"
    }

    fn schema(&self) -> Vec<ParamSchema> {
        vec![
            ParamSchema::new("grid", ParamKind::Integer { min: 2, max: Some(64) }, "lattice cells per side (default 4)"),
            ParamSchema::new("max_disp", ParamKind::Number { min: Some(0.0), max: None }, "largest node displacement, px (default 4)"),
        ]
    }

    fn apply(&self, img: &mut RasterImage, objects: &mut Vec<ObjectAnnotation>, params: &Params, _: &EffectRegistry, rng: &mut Stream) -> Result<serde_json::Value, AugmentError> {
        let cells = params.count_or("grid", defaults::GRID);
        let limit = defaults::MAX_DISPLACEMENT_FRACTION * img.width.min(img.height) as f64;
        let max_disp = params.num("max_disp").unwrap_or(defaults::GRID_DISPLACEMENT.min(limit));
        if cells < 2 {
            return Err(AugmentError::InvalidRange(format!("grid {cells} below 2")));
        }
        if !(0.0..=limit).contains(&max_disp) {
            return Err(AugmentError::InvalidRange(format!("max_disp {max_disp} outside [0, {limit}]")));
        }
        let lattice = Lattice::random(img, cells, max_disp, rng);
        *img = warp_image(img, objects, &lattice);
        Ok(json!({ "grid": cells, "max_disp": max_disp }))
    }
}

pub struct AddEffect;

impl AugmentOp for AddEffect {
    fn name(&self) -> &str {
        "add_effect"
    }

    fn schema(&self) -> Vec<ParamSchema> {
        vec![
            ParamSchema::new("effect_name", ParamKind::Text, "registered effect (default visibility)"),
            ParamSchema::new("intensity", ParamKind::Number { min: Some(0.0), max: Some(1.0) }, "blend strength (default 1)"),
        ]
    }

    fn check(&self, params: &Params, effects: &EffectRegistry) -> Result<(), (String, String)> {
        let name = params.text("effect_name").unwrap_or("visibility");
        if effects.contains_key(name) {
            Ok(())
        } else {
            Err(("effect_name".into(), format!("unknown effect `{name}`")))
        }
    }

    fn apply(&self, img: &mut RasterImage, _: &mut Vec<ObjectAnnotation>, params: &Params, effects: &EffectRegistry, rng: &mut Stream) -> Result<serde_json::Value, AugmentError> {
        let name = params.text("effect_name").unwrap_or("visibility");
        let effect = effects.get(name).ok_or_else(|| AugmentError::UnknownEffect(name.to_string()))?;
        let intensity = params.num_or("intensity", 1.0).clamp(0.0, 1.0);
        effect.apply(img, intensity, rng);
        Ok(json!({ "effect_name": name, "intensity": intensity }))
    }
}
