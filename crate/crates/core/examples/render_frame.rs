//! Render one frame of a hand-built scene and write it as a PPM image with
//! its annotation.
//!
//! cargo run --example render_frame [out_dir]

use std::path::PathBuf;

use asda::capture::camera::project_point;
use asda::capture::{render_frame, CameraIntrinsics};
use asda::scene::{Aabb, AssetInstance, AugmentedScene, GlobalState, InstanceRole, Material, TrajectoryPose, Vec3};

fn cube(role: InstanceRole, center: Vec3, half: f64, rgb: [f64; 3]) -> AssetInstance {
    AssetInstance {
        prototype: "box".into(),
        position: center,
        rotation: Vec3::new(0.0, 0.4, 0.0),
        scale: Vec3::repeat(1.0),
        material: Material { rgb, texture: None },
        role,
        anchor_region: None,
        variant_index: Some(0),
        local_aabb: Aabb::new(Vec3::repeat(-half), Vec3::repeat(half)),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("asda-render"));
    std::fs::create_dir_all(&out)?;

    let k = CameraIntrinsics::new(160, 120, 70f64.to_radians())?;
    let pose = TrajectoryPose { position: Vec3::new(0.0, 2.0, 0.0), yaw: 0.0, pitch: -0.1, roll: 0.0, frame_index: 0 };

    let mut scene = AugmentedScene::new("demo", "test", 0, GlobalState { time_of_day: 15.0, ..GlobalState::default() });
    scene.instances.push(cube(InstanceRole::Main, Vec3::new(0.0, 1.0, -12.0), 1.5, [0.85, 0.3, 0.2]));
    let (_, clear) = render_frame(&scene, &pose, &k);

    // A drone-sized obstacle between camera and target.
    scene.instances.push(cube(InstanceRole::Obstacle, Vec3::new(0.6, 1.7, -6.0), 0.4, [0.2, 0.2, 0.25]));
    let (image, annotation) = render_frame(&scene, &pose, &k);

    let o = &annotation.objects[0];
    println!("bbox {:?}", o.bbox);
    println!("visibility {:.3} alone, {:.3} behind the obstacle", clear.objects[0].visibility, o.visibility);
    let c = project_point(&k, &pose, &Vec3::new(0.0, 1.0, -12.0)).expect("in front");
    println!("target center projects to ({:.1}, {:.1})", c.u, c.v);

    image.write_ppm(&out.join("frame.ppm"))?;
    std::fs::write(out.join("frame.json"), serde_json::to_string_pretty(&annotation)?)?;
    println!("wrote {}", out.join("frame.ppm").display());
    Ok(())
}
