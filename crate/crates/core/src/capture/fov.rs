use std::f64::consts::TAU;

use rand::Rng;

use super::camera::{camera_rotation, CameraIntrinsics};
use crate::rng::{uniform, StreamKey};
use crate::scene::{AssetInstance, AugmentedScene, FovRule, InstanceRole, TrajectoryPose, Vec3};

/// Half-angle of the spawn cone for a rule: a fraction of the narrower half
/// field of view, so the cone stays inside the image frustum.
pub fn cone_half_angle(rule: &FovRule, intrinsics: &CameraIntrinsics) -> f64 {
    rule.cone_margin.clamp(0.0, 1.0) * intrinsics.hfov.min(intrinsics.vfov()) / 2.0
}

/// Samples the obstacle center for one rule and frame, or `None` when the
/// per-frame gate does not fire.
pub fn sample_fov_point(rule: &FovRule, pose: &TrajectoryPose, intrinsics: &CameraIntrinsics) -> Option<Vec3> {
    let mut rng = StreamKey::new(rule.seed).with_str("fov").with_u64(pose.frame_index as u64).stream();
    if rng.gen::<f64>() >= rule.probability {
        return None;
    }
    let d = uniform(&mut rng, rule.distance_range[0], rule.distance_range[1]);
    // cos(theta) uniform on [cos a, 1] is uniform over the spherical cap.
    let cos_a = cone_half_angle(rule, intrinsics).cos();
    let cos_t = uniform(&mut rng, cos_a, 1.0);
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = uniform(&mut rng, 0.0, TAU);
    let local = Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), -cos_t);
    Some(pose.position + camera_rotation(pose) * local * d)
}

/// Obstacles spawned for this frame only, one per firing rule.
pub fn resolve_fov_obstacles(scene: &AugmentedScene, pose: &TrajectoryPose, intrinsics: &CameraIntrinsics) -> Vec<AssetInstance> {
    scene
        .deferred_fov_rules
        .iter()
        .filter_map(|rule| {
            let center = sample_fov_point(rule, pose, intrinsics)?;
            Some(AssetInstance {
                prototype: rule.obstacle_asset.clone(),
                position: center - rule.local_aabb.center(),
                rotation: Vec3::zeros(),
                scale: Vec3::repeat(1.0),
                material: rule.material.clone(),
                role: if rule.particle { InstanceRole::Noise } else { InstanceRole::Obstacle },
                anchor_region: None,
                variant_index: None,
                local_aabb: rule.local_aabb,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::camera::{forward, project_point};
    use crate::scene::{Aabb, Material};

    fn rule(margin: f64, p: f64) -> FovRule {
        FovRule {
            obstacle_asset: "drone".into(),
            local_aabb: Aabb::new(Vec3::repeat(-0.3), Vec3::repeat(0.3)),
            material: Material::default(),
            probability: p,
            distance_range: [2.0, 30.0],
            cone_margin: margin,
            seed: 99,
            particle: false,
        }
    }

    #[test]
    fn zero_margin_lands_on_axis() {
        let k = CameraIntrinsics::default();
        let pose = TrajectoryPose { position: Vec3::new(0.0, 5.0, 0.0), yaw: 0.4, pitch: -0.2, roll: 0.1, frame_index: 3 };
        let p = sample_fov_point(&rule(0.0, 1.0), &pose, &k).unwrap();
        let d = p - pose.position;
        assert!((d.normalize() - forward(&pose)).norm() < 1e-9);
        assert!((2.0..=30.0).contains(&d.norm()));
    }

    #[test]
    fn spawns_project_inside_frame() {
        let k = CameraIntrinsics::new(320, 180, 1.4).unwrap();
        let r = rule(0.8, 1.0);
        for i in 0..2000 {
            let pose = TrajectoryPose { position: Vec3::zeros(), yaw: i as f64 * 0.01, pitch: -0.5, roll: 0.3, frame_index: i };
            let p = sample_fov_point(&r, &pose, &k).unwrap();
            let pr = project_point(&k, &pose, &p).unwrap();
            assert!(pr.u >= 0.0 && pr.u <= 320.0 && pr.v >= 0.0 && pr.v <= 180.0);
        }
    }

    #[test]
    fn gate_zero_never_spawns() {
        let k = CameraIntrinsics::default();
        let pose = TrajectoryPose { position: Vec3::zeros(), yaw: 0.0, pitch: 0.0, roll: 0.0, frame_index: 0 };
        assert!(sample_fov_point(&rule(0.8, 0.0), &pose, &k).is_none());
    }
}
