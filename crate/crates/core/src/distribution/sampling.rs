use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{point_in_region, DistributionError, DistributionLayer, SamplingPattern};
use crate::rng::uniform;
use crate::scene::Vec3;

/// Attempts per requested point before giving up.
pub const MAX_ATTEMPTS: usize = 1000;
/// Draws inside one region's bounding box before an attempt counts as failed.
const BOX_DRAWS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpawnPoint {
    pub position: Vec3,
    /// Index into the layer's regions.
    pub region: usize,
}

/// Draws `n` spawn points from `layer`, area-weighted across regions.
pub fn sample_locations(
    layer: &DistributionLayer,
    n: usize,
    pattern: &SamplingPattern,
    min_separation: f64,
    rng: &mut impl Rng,
) -> Result<Vec<SpawnPoint>, DistributionError> {
    sample_locations_avoiding(layer, n, pattern, min_separation, &[], rng)
}

/// Like [`sample_locations`], also keeping `min_separation` from `existing`.
pub fn sample_locations_avoiding(
    layer: &DistributionLayer,
    n: usize,
    pattern: &SamplingPattern,
    min_separation: f64,
    existing: &[Vec3],
    rng: &mut impl Rng,
) -> Result<Vec<SpawnPoint>, DistributionError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if layer.regions.is_empty() {
        return Err(DistributionError::EmptyLayer);
    }
    pattern.validate()?;
    if !(min_separation >= 0.0) {
        return Err(DistributionError::InvalidPattern("min_separation must be >= 0".into()));
    }

    let candidates: Vec<usize> = (0..layer.regions.len()).filter(|&i| pattern.may_admit(&layer.regions[i])).collect();
    let mut cumulative = Vec::with_capacity(candidates.len());
    let mut total = 0.0;
    for &i in &candidates {
        total += layer.regions[i].area();
        cumulative.push(total);
    }

    let mut placed: Vec<SpawnPoint> = Vec::with_capacity(n);
    let min_sep2 = min_separation * min_separation;
    'points: for _ in 0..n {
        if candidates.is_empty() {
            break;
        }
        for _ in 0..MAX_ATTEMPTS {
            let u = rng.gen::<f64>() * total;
            let k = cumulative.partition_point(|c| *c <= u).min(candidates.len() - 1);
            let region_index = candidates[k];
            let region = &layer.regions[region_index];
            let (lo, hi) = region.bbox();
            let Some(p) = (0..BOX_DRAWS)
                .map(|_| [uniform(rng, lo[0], hi[0]), uniform(rng, lo[1], hi[1])])
                .find(|p| point_in_region(region, *p))
            else {
                continue;
            };
            if !pattern.admits(region, p) {
                continue;
            }
            let position = Vec3::new(p[0], region.elevation, p[1]);
            let clear = placed
                .iter()
                .map(|s| &s.position)
                .chain(existing.iter())
                .all(|q| (q - position).norm_squared() >= min_sep2);
            if clear {
                placed.push(SpawnPoint { position, region: region_index });
                continue 'points;
            }
        }
        break;
    }

    if placed.len() < n {
        return Err(DistributionError::SamplingExhausted { placed: placed.len(), requested: n, points: placed });
    }
    Ok(placed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{LayerSource, RadiusCenter, SpawnRegion};
    use crate::rng::StreamKey;
    use crate::scene::Attributes;

    fn square_layer(side: f64) -> DistributionLayer {
        let r = SpawnRegion::new("sq", vec![[0.0, 0.0], [side, 0.0], [side, side], [0.0, side]], 5.0, Attributes::new()).unwrap();
        DistributionLayer::new("a", vec![r], LayerSource::SceneGraph).unwrap()
    }

    #[test]
    fn zero_points_is_empty() {
        let mut rng = StreamKey::new(1).stream();
        assert!(sample_locations(&square_layer(1.0), 0, &SamplingPattern::Uniform, 0.0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn empty_layer_errors() {
        let layer = DistributionLayer::new("a", vec![], LayerSource::SceneGraph).unwrap();
        let mut rng = StreamKey::new(1).stream();
        assert!(matches!(sample_locations(&layer, 1, &SamplingPattern::Uniform, 0.0, &mut rng), Err(DistributionError::EmptyLayer)));
    }

    #[test]
    fn exhaustion_reports_partial_count() {
        let mut rng = StreamKey::new(3).stream();
        match sample_locations(&square_layer(10.0), 5, &SamplingPattern::Uniform, 100.0, &mut rng) {
            Err(DistributionError::SamplingExhausted { placed, requested, points }) => {
                assert_eq!(placed, 1);
                assert_eq!(requested, 5);
                assert_eq!(points.len(), 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn radius_pattern_keeps_points_close() {
        let mut rng = StreamKey::new(4).stream();
        let pattern = SamplingPattern::Radius { center: RadiusCenter::Point([50.0, 50.0]), r: 10.0 };
        let pts = sample_locations(&square_layer(100.0), 200, &pattern, 0.0, &mut rng).unwrap();
        for p in pts {
            assert!(((p.position.x - 50.0).powi(2) + (p.position.z - 50.0).powi(2)).sqrt() <= 10.0);
            assert_eq!(p.position.y, 5.0);
        }
    }

    #[test]
    fn line_pattern_keeps_points_near_segment() {
        let mut rng = StreamKey::new(5).stream();
        let pattern = SamplingPattern::Line { p0: [0.0, 0.0], p1: [100.0, 100.0], jitter: 2.0 };
        let pts = sample_locations(&square_layer(100.0), 100, &pattern, 0.0, &mut rng).unwrap();
        for p in pts {
            let d = (p.position.x - p.position.z).abs() / 2f64.sqrt();
            assert!(d <= 2.0 + 1e-9);
        }
    }
}
