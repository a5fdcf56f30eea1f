//! Resampling and box bookkeeping shared by the geometric augmentations.
//!
//! Continuous image coordinates put pixel `i` at `[i, i + 1)`, so its center
//! sits at `i + 0.5`. Boxes use the same frame.

use crate::capture::{snap_bbox, ObjectAnnotation, RasterImage};

/// Boxes smaller than this after a geometric op are dropped, px².
pub const MIN_BOX_AREA: f64 = 4.0;

/// Bilinear sample at a continuous coordinate. Coordinates outside the
/// image take the nearest edge color.
pub fn sample_bilinear(img: &RasterImage, x: f64, y: f64) -> [f64; 3] {
    let (w, h) = (img.width as f64, img.height as f64);
    let sx = (x - 0.5).clamp(0.0, w - 1.0);
    let sy = (y - 0.5).clamp(0.0, h - 1.0);
    let (x0, y0) = (sx.floor(), sy.floor());
    let (fx, fy) = (sx - x0, sy - y0);
    let (x0, y0) = (x0 as u32, y0 as u32);
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let (a, b, c, d) = (img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1));
    std::array::from_fn(|k| {
        let top = a[k] as f64 * (1.0 - fx) + b[k] as f64 * fx;
        let bottom = c[k] as f64 * (1.0 - fx) + d[k] as f64 * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

pub fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Backward warp: destination pixel center `p` reads the source at `src(p)`.
pub fn resample(img: &RasterImage, src: impl Fn(f64, f64) -> (f64, f64)) -> RasterImage {
    let mut out = RasterImage::new(img.width, img.height);
    for y in 0..img.height {
        for x in 0..img.width {
            let (sx, sy) = src(x as f64 + 0.5, y as f64 + 0.5);
            out.set(x, y, sample_bilinear(img, sx, sy).map(to_u8));
        }
    }
    out
}

/// Points along the border of a box: its corners plus `per_edge - 1`
/// interior points on each side.
pub fn box_outline(b: &[f64; 4], per_edge: usize) -> Vec<(f64, f64)> {
    let n = per_edge.max(1);
    let mut pts = Vec::with_capacity(4 * n);
    for i in 0..n {
        let t = i as f64 / n as f64;
        let x = b[0] + (b[2] - b[0]) * t;
        let y = b[1] + (b[3] - b[1]) * t;
        pts.push((x, b[1]));
        pts.push((b[2], y));
        pts.push((b[2] - (b[2] - b[0]) * t, b[3]));
        pts.push((b[0], b[3] - (b[3] - b[1]) * t));
    }
    pts
}

/// Maps every box through `forward`, replaces it with the clipped hull of
/// its mapped outline and drops boxes that shrink below [`MIN_BOX_AREA`].
pub fn transform_boxes(objects: &mut Vec<ObjectAnnotation>, width: u32, height: u32, per_edge: usize, forward: impl Fn(f64, f64) -> (f64, f64)) {
    let (w, h) = (width as f64, height as f64);
    objects.retain_mut(|o| {
        let mut hull = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for (x, y) in box_outline(&o.bbox, per_edge) {
            let (u, v) = forward(x, y);
            hull = [hull[0].min(u), hull[1].min(v), hull[2].max(u), hull[3].max(v)];
        }
        let s = snap_bbox(hull);
        let clipped = [s[0].clamp(0.0, w), s[1].clamp(0.0, h), s[2].clamp(0.0, w), s[3].clamp(0.0, h)];
        o.bbox = clipped;
        (clipped[2] - clipped[0]) * (clipped[3] - clipped[1]) >= MIN_BOX_AREA
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_at_pixel_centers_are_exact() {
        let mut img = RasterImage::new(5, 4);
        for (i, v) in img.pixels.iter_mut().enumerate() {
            *v = (i * 37 % 251) as u8;
        }
        assert_eq!(resample(&img, |x, y| (x, y)), img);
    }

    #[test]
    fn midpoint_is_average() {
        let mut img = RasterImage::new(2, 1);
        img.set(0, 0, [0, 100, 200]);
        img.set(1, 0, [100, 200, 0]);
        assert_eq!(sample_bilinear(&img, 1.0, 0.5), [50.0, 150.0, 100.0]);
        // Outside the frame the edge pixel repeats.
        assert_eq!(sample_bilinear(&img, -10.0, 0.5), [0.0, 100.0, 200.0]);
    }
}
