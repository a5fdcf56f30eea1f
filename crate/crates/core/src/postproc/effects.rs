//! Procedural overlay effects.

use rand::Rng;

use crate::capture::RasterImage;
use crate::rng::Stream;

use super::warp::to_u8;

/// An overlay layer blended onto an image.
pub trait Effect: Send + Sync {
    fn name(&self) -> &str;
    /// Blends the layer at `intensity` in `[0, 1]`.
    fn apply(&self, img: &mut RasterImage, intensity: f64, rng: &mut Stream);
}

/// Multi-octave value noise over the unit square.
#[derive(Debug, Clone)]
pub struct ValueNoise {
    octaves: Vec<(usize, f64, Vec<f64>)>,
}

impl ValueNoise {
    pub const OCTAVES: usize = 4;
    pub const PERSISTENCE: f64 = 0.5;
    pub const BASE_FREQUENCY: usize = 4;

    /// Lattice values for every octave; octave `k` has `base * 2^k` cells
    /// per side.
    pub fn new(rng: &mut impl Rng, octaves: usize, base_frequency: usize, persistence: f64) -> Self {
        let mut amp = 1.0;
        let octaves = (0..octaves)
            .map(|k| {
                let cells = base_frequency.max(1) << k;
                let lattice = (0..(cells + 1) * (cells + 1)).map(|_| rng.gen::<f64>()).collect();
                let o = (cells, amp, lattice);
                amp *= persistence;
                o
            })
            .collect();
        Self { octaves }
    }

    /// Noise in `[0, 1]` at `(u, v)` in the unit square.
    pub fn at(&self, u: f64, v: f64) -> f64 {
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (mut sum, mut norm) = (0.0, 0.0);
        for (cells, amp, lattice) in &self.octaves {
            let n = *cells;
            let gx = (u.clamp(0.0, 1.0) * n as f64).min(n as f64 - 1e-9);
            let gy = (v.clamp(0.0, 1.0) * n as f64).min(n as f64 - 1e-9);
            let (i, j) = (gx.floor() as usize, gy.floor() as usize);
            let (tx, ty) = (smooth(gx - i as f64), smooth(gy - j as f64));
            let at = |a: usize, b: usize| lattice[b * (n + 1) + a];
            let top = at(i, j) * (1.0 - tx) + at(i + 1, j) * tx;
            let bottom = at(i, j + 1) * (1.0 - tx) + at(i + 1, j + 1) * tx;
            sum += amp * (top * (1.0 - ty) + bottom * ty);
            norm += amp;
        }
        if norm > 0.0 {
            sum / norm
        } else {
            0.0
        }
    }
}

/// Fog and cloud layer: `out = (1 - a) * pixel + a * white` with
/// `a = intensity * noise(x, y)`.
#[derive(Debug, Default)]
pub struct Visibility;

impl Effect for Visibility {
    fn name(&self) -> &str {
        "visibility"
    }

    fn apply(&self, img: &mut RasterImage, intensity: f64, rng: &mut Stream) {
        let intensity = intensity.clamp(0.0, 1.0);
        let noise = ValueNoise::new(rng, ValueNoise::OCTAVES, ValueNoise::BASE_FREQUENCY, ValueNoise::PERSISTENCE);
        if intensity == 0.0 {
            return;
        }
        let (w, h) = (img.width as f64, img.height as f64);
        for y in 0..img.height {
            for x in 0..img.width {
                let a = intensity * noise.at((x as f64 + 0.5) / w, (y as f64 + 0.5) / h);
                let px = img.get(x, y).map(|c| to_u8((1.0 - a) * c as f64 + a * 255.0));
                img.set(x, y, px);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    #[test]
    fn same_seed_same_field() {
        let a = ValueNoise::new(&mut StreamKey::new(4).stream(), 4, 4, 0.5);
        let b = ValueNoise::new(&mut StreamKey::new(4).stream(), 4, 4, 0.5);
        for i in 0..50 {
            let (u, v) = (i as f64 / 49.0, (i * 7 % 50) as f64 / 49.0);
            let n = a.at(u, v);
            assert_eq!(n, b.at(u, v));
            assert!((0.0..=1.0).contains(&n));
        }
    }

    #[test]
    fn noise_hits_lattice_values_at_nodes() {
        // One octave, one cell: the corners are the four lattice draws.
        let mut rng = StreamKey::new(9).stream();
        let noise = ValueNoise::new(&mut rng, 1, 1, 0.5);
        let mut again = StreamKey::new(9).stream();
        let first: f64 = again.gen();
        assert!((noise.at(0.0, 0.0) - first).abs() < 1e-12);
    }
}
