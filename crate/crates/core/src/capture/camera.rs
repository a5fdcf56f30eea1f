use nalgebra::{Matrix3, Rotation3};
use serde::{Deserialize, Serialize};

use super::CaptureError;
use crate::scene::{TrajectoryPose, Vec3};

/// Pinhole camera. Square pixels; vertical FOV follows from the aspect ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    /// Horizontal field of view, radians.
    pub hfov: f64,
}

impl CameraIntrinsics {
    pub fn new(width: u32, height: u32, hfov: f64) -> Result<Self, CaptureError> {
        let c = Self { width, height, hfov };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CaptureError> {
        if self.width < 16 || self.height < 16 {
            return Err(CaptureError::InvalidIntrinsics(format!("{}x{} is below 16x16", self.width, self.height)));
        }
        if !(self.hfov > 0.0 && self.hfov < std::f64::consts::PI) {
            return Err(CaptureError::InvalidIntrinsics(format!("hfov {} outside (0, pi)", self.hfov)));
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.hfov / 2.0).tan()
    }

    pub fn vfov(&self) -> f64 {
        2.0 * ((self.height as f64 / 2.0) / self.focal()).atan()
    }
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self { width: 256, height: 256, hfov: 90f64.to_radians() }
    }
}

/// Camera-to-world rotation: yaw about +Y, then pitch about X, then roll
/// about Z. The camera looks down its local −Z with +Y up.
pub fn camera_rotation(pose: &TrajectoryPose) -> Matrix3<f64> {
    let ry = Rotation3::from_axis_angle(&Vec3::y_axis(), pose.yaw);
    let rx = Rotation3::from_axis_angle(&Vec3::x_axis(), pose.pitch);
    let rz = Rotation3::from_axis_angle(&Vec3::z_axis(), pose.roll);
    (ry * rx * rz).into_inner()
}

/// Unit viewing direction of a pose.
pub fn forward(pose: &TrajectoryPose) -> Vec3 {
    camera_rotation(pose) * Vec3::new(0.0, 0.0, -1.0)
}

/// World point to camera frame.
#[derive(Debug, Clone, Copy)]
pub struct View {
    rot_t: Matrix3<f64>,
    position: Vec3,
    focal: f64,
    cx: f64,
    cy: f64,
}

impl View {
    pub fn new(intrinsics: &CameraIntrinsics, pose: &TrajectoryPose) -> Self {
        Self {
            rot_t: camera_rotation(pose).transpose(),
            position: pose.position,
            focal: intrinsics.focal(),
            cx: intrinsics.width as f64 / 2.0,
            cy: intrinsics.height as f64 / 2.0,
        }
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rot_t * (p - self.position)
    }

    /// Pixel coordinates of a camera-frame point with positive depth.
    pub fn pixel(&self, c: &Vec3) -> (f64, f64) {
        let depth = -c.z;
        (self.cx + self.focal * c.x / depth, self.cy - self.focal * c.y / depth)
    }
}

/// A projected point: pixel coordinates (origin top-left, +v down) and depth
/// along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// Projects `world_point`; `None` when it is not in front of the camera.
pub fn project_point(intrinsics: &CameraIntrinsics, pose: &TrajectoryPose, world_point: &Vec3) -> Option<Projection> {
    let view = View::new(intrinsics, pose);
    let c = view.to_camera(world_point);
    if !(-c.z > 0.0) {
        return None;
    }
    let (u, v) = view.pixel(&c);
    Some(Projection { u, v, depth: -c.z })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose(yaw: f64, pitch: f64, roll: f64) -> TrajectoryPose {
        TrajectoryPose { position: Vec3::new(1.0, 2.0, 3.0), yaw, pitch, roll, frame_index: 0 }
    }

    #[test]
    fn optical_axis_hits_image_center() {
        let k = CameraIntrinsics::new(256, 192, 1.2).unwrap();
        let p = pose(0.7, -0.3, 0.2);
        let target = p.position + forward(&p) * 10.0;
        let pr = project_point(&k, &p, &target).unwrap();
        assert!((pr.u - 128.0).abs() < 1e-9 && (pr.v - 96.0).abs() < 1e-9);
        assert!((pr.depth - 10.0).abs() < 1e-9);
    }

    #[test]
    fn behind_camera_is_none() {
        let k = CameraIntrinsics::default();
        let p = pose(0.0, 0.0, 0.0);
        assert!(project_point(&k, &p, &(p.position + Vec3::new(0.0, 0.0, 5.0))).is_none());
    }

    #[test]
    fn half_fov_edge_maps_to_border() {
        let k = CameraIntrinsics::new(200, 100, 1.0).unwrap();
        let p = pose(0.0, 0.0, 0.0);
        // Yaw-zero camera looks down -Z; a ray at +hfov/2 to the right.
        let dir = Vec3::new((0.5f64).sin(), 0.0, -(0.5f64).cos());
        let pr = project_point(&k, &p, &(p.position + dir * 7.0)).unwrap();
        assert!((pr.u - 200.0).abs() < 1.0);
    }

    #[test]
    fn forward_matches_closed_form() {
        let (y, t) = (0.9, -0.4);
        let f = forward(&pose(y, t, 0.5));
        let expect = Vec3::new(-y.sin() * t.cos(), t.sin(), -y.cos() * t.cos());
        assert!((f - expect).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_intrinsics() {
        assert!(CameraIntrinsics::new(8, 64, 1.0).is_err());
        assert!(CameraIntrinsics::new(64, 64, 3.2).is_err());
    }
}
