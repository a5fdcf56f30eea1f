use std::f64::consts::TAU;

use rand::Rng;
use serde_json::json;

use super::{defaults, parse_filters};
use crate::distribution::{sample_locations, SamplingPattern};
use crate::preproc::{Layer, OpCall, OpError, Operation, ParamKind, ParamSchema, Params, ParamsExt, SceneContext};
use crate::rng::{uniform, Stream, StreamKey};
use crate::scene::{AugmentedScene, TrajectoryKind, TrajectoryPose, TrajectorySegment, TrajectorySpec, Vec3};

const TYPES: &[&str] = &["cylindrical", "point2point"];
const FEATURES: &[&str] = &["camera_pose", "altitude", "motion"];
/// Downward tilt of cameras flying point-to-point segments, radians.
const SEGMENT_PITCH: f64 = -0.6;

/// Yaw and pitch that aim a camera at `from` toward `to`.
///
/// The camera looks down its local −Z; yaw turns about +Y, positive pitch
/// looks up.
pub fn look_at(from: &Vec3, to: &Vec3) -> (f64, f64) {
    let d = to - from;
    let yaw = (-d.x).atan2(-d.z);
    let pitch = d.y.atan2(d.x.hypot(d.z));
    (yaw, pitch)
}

/// Adds `p` unless an anchor already lies within the merge distance.
fn merge_anchor(anchors: &mut Vec<Vec3>, p: Vec3) {
    if anchors.iter().all(|a| (a - p).norm() >= defaults::ANCHOR_MERGE_DISTANCE) {
        anchors.push(p);
    }
}

/// Default anchor rule: every main instance is a trajectory point.
fn default_anchors(scene: &AugmentedScene) -> Vec<Vec3> {
    let mut anchors = Vec::new();
    for inst in scene.main_instances() {
        merge_anchor(&mut anchors, inst.position);
    }
    anchors
}

/// Layer 5: adds sampled locations to the trajectory anchor set.
pub struct SampleTrajectoryLocations;

impl Operation for SampleTrajectoryLocations {
    fn name(&self) -> &str {
        "sample_trajectory_locations"
    }

    fn layer(&self) -> Layer {
        Layer::Trajectory
    }

    fn schema(&self) -> Vec<ParamSchema> {
        vec![
            ParamSchema::new("container_class", ParamKind::Text, "containers to sample from (default building)"),
            ParamSchema::new("filters", ParamKind::TextList, "attribute filters such as `height>20`"),
            ParamSchema::new("npoints", ParamKind::Integer { min: 0, max: None }, "points to sample (default 0 with main instances, else 10)"),
            ParamSchema::new("min_separation", ParamKind::Distance { default_unit: "m" }, "minimum distance between sampled points"),
        ]
    }

    fn check(&self, params: &Params) -> Result<(), (String, String)> {
        parse_filters(params, "filters").map(|_| ())
    }

    fn perform(&self, scene: &mut AugmentedScene, ctx: &SceneContext, params: &Params, _: OpCall, rng: &mut Stream) -> Result<serde_json::Value, OpError> {
        let mut anchors = std::mem::take(&mut scene.anchors);
        for a in default_anchors(scene) {
            merge_anchor(&mut anchors, a);
        }
        let default_n = if scene.main_instances().next().is_some() { 0 } else { defaults::TRAJECTORY_POINTS };
        let n = params.count_or("npoints", default_n);
        let class = params.text("container_class").unwrap_or(defaults::CONTAINER_CLASS);
        let filters = parse_filters(params, "filters").map_err(|(_, e)| OpError::Other(e))?;
        let mut sampled = 0;
        if n > 0 {
            let layer = ctx.layer(class, &filters, "trajectory")?;
            let points = sample_locations(&layer, n, &SamplingPattern::Uniform, params.num_or("min_separation", 0.0), rng)?;
            sampled = points.len();
            for p in points {
                merge_anchor(&mut anchors, p.position);
            }
        }
        let count = anchors.len();
        scene.anchors = anchors;
        Ok(json!({ "container_class": class, "npoints": n, "sampled": sampled, "anchors": count }))
    }
}

/// Layer 5: resolves a trajectory plan per anchor and the poses it implies.
pub struct RandomizeTrajectory;

impl Operation for RandomizeTrajectory {
    fn name(&self) -> &str {
        "randomize_trajectory"
    }

    fn layer(&self) -> Layer {
        Layer::Trajectory
    }

    fn schema(&self) -> Vec<ParamSchema> {
        vec![
            ParamSchema::new("types", ParamKind::ChoiceList { values: TYPES }, "trajectory types (default cylindrical)"),
            ParamSchema::new("features", ParamKind::ChoiceList { values: FEATURES }, "randomized aspects"),
            ParamSchema::new("n_poses", ParamKind::Integer { min: 1, max: None }, "poses per cylindrical ring (default 12)"),
            ParamSchema::new("standoff", ParamKind::Range { min: 0.0, max: 1e5 }, "horizontal ring radius, meters"),
            ParamSchema::new("altitude", ParamKind::Range { min: -1e4, max: 1e4 }, "height above the anchor, meters"),
            ParamSchema::new("capture_distance", ParamKind::Range { min: 1e-3, max: 1e5 }, "spacing of point-to-point captures, meters"),
            ParamSchema::new("jitter", ParamKind::Number { min: Some(0.0), max: Some(1.0) }, "pose jitter half-width, radians"),
        ]
    }

    fn check(&self, params: &Params) -> Result<(), (String, String)> {
        match params.texts("types") {
            Some(t) if t.is_empty() => Err(("types".into(), "must not be empty".into())),
            _ => Ok(()),
        }
    }

    fn perform(&self, scene: &mut AugmentedScene, _: &SceneContext, params: &Params, call: OpCall, rng: &mut Stream) -> Result<serde_json::Value, OpError> {
        let mut types: Vec<TrajectoryKind> = params
            .texts("types")
            .map(|t| t.iter().filter_map(|n| TrajectoryKind::parse(n)).collect())
            .unwrap_or_else(|| vec![TrajectoryKind::Cylindrical]);
        let features = params.texts("features").unwrap_or_default();
        let has = |f: &str| features.iter().any(|x| x == f);

        let mut anchors = scene.anchors.clone();
        if anchors.is_empty() {
            anchors = default_anchors(scene);
        }
        if anchors.len() < 2 && types.contains(&TrajectoryKind::PointToPoint) {
            if types.iter().all(|t| *t == TrajectoryKind::PointToPoint) {
                return Err(OpError::NeedTwoAnchors);
            }
            types.retain(|t| *t != TrajectoryKind::PointToPoint);
        }
        if anchors.is_empty() {
            scene.warnings.push("randomize_trajectory: no anchors, trajectory left empty".into());
        }

        let n_poses = params.count_or("n_poses", defaults::POSES_PER_RING).max(1);
        let standoff = params.range_or("standoff", defaults::STANDOFF);
        let altitude = params.range_or("altitude", defaults::ALTITUDE);
        let capture = params.range_or("capture_distance", defaults::CAPTURE_DISTANCE);
        let mut segments = Vec::with_capacity(anchors.len());
        for (i, anchor) in anchors.iter().enumerate() {
            let kind = types[rng.gen_range(0..types.len())];
            segments.push(TrajectorySegment {
                kind,
                anchor: *anchor,
                target: (kind == TrajectoryKind::PointToPoint).then(|| anchors[(i + 1) % anchors.len()]),
                standoff: uniform(rng, standoff[0], standoff[1]),
                altitude: if has("altitude") { uniform(rng, altitude[0], altitude[1]) } else { defaults::FIXED_ALTITUDE },
                n_poses,
                capture_distance: if has("motion") { uniform(rng, capture[0], capture[1]) } else { defaults::FIXED_CAPTURE_DISTANCE },
                phase: uniform(rng, 0.0, TAU),
            });
        }
        let jitter = if has("camera_pose") { params.num_or("jitter", defaults::POSE_JITTER) } else { 0.0 };
        let spec = TrajectorySpec { segments, pose_jitter: jitter, jitter_seed: call.seed };
        scene.trajectory = poses_from_spec(&spec);
        scene.anchors = anchors;
        let out = json!({
            "types": types,
            "features": features,
            "n_poses": n_poses,
            "pose_jitter": jitter,
            "segments": spec.segments,
            "poses": scene.trajectory.len(),
        });
        scene.trajectory_spec = Some(spec);
        Ok(out)
    }
}

/// Expands a trajectory plan into camera poses, frame indices in order.
///
/// Jitter draws come from a stream keyed by the spec's seed, so the same plan
/// always yields the same poses.
pub fn poses_from_spec(spec: &TrajectorySpec) -> Vec<TrajectoryPose> {
    let mut poses = Vec::new();
    for seg in &spec.segments {
        match (seg.kind, seg.target) {
            (TrajectoryKind::PointToPoint, Some(target)) => {
                let lift = Vec3::new(0.0, seg.altitude, 0.0);
                let (a, b) = (seg.anchor + lift, target + lift);
                let length = (b - a).norm();
                let step = seg.capture_distance.max(1e-6);
                let (yaw, _) = look_at(&a, &b);
                let count = (length / step).floor() as usize;
                for k in 0..=count {
                    let t = if length > 0.0 { (k as f64 * step / length).min(1.0) } else { 0.0 };
                    poses.push(TrajectoryPose { position: a + (b - a) * t, yaw, pitch: SEGMENT_PITCH, roll: 0.0, frame_index: 0 });
                }
            }
            _ => {
                for k in 0..seg.n_poses {
                    let theta = seg.phase + TAU * k as f64 / seg.n_poses as f64;
                    let position = seg.anchor + Vec3::new(seg.standoff * theta.cos(), seg.altitude, seg.standoff * theta.sin());
                    let (yaw, pitch) = look_at(&position, &seg.anchor);
                    poses.push(TrajectoryPose { position, yaw, pitch, roll: 0.0, frame_index: 0 });
                }
            }
        }
    }
    let mut rng = StreamKey::new(spec.jitter_seed).with_str("jitter").stream();
    for (i, p) in poses.iter_mut().enumerate() {
        p.frame_index = i;
        if spec.pose_jitter > 0.0 {
            let j = spec.pose_jitter;
            p.pitch += uniform(&mut rng, -j, j);
            p.yaw += uniform(&mut rng, -j, j);
            p.roll += uniform(&mut rng, -j, j);
        }
    }
    poses
}
