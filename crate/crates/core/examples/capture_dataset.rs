//! Augment a scene, fly its trajectories and write a dataset: PPM images,
//! per-frame annotations, a manifest and the provenance of every variation.
//!
//! cargo run --example capture_dataset [out_dir]

use std::path::{Path, PathBuf};

use asda::capture::{collect_data, CameraIntrinsics, Manifest};
use asda::preproc::{OperationSpec, Pipeline};
use asda::scene::load_scene_spec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("asda-capture"));
    let spec = load_scene_spec(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenes/SEA.json"))?;

    let mut pipeline = Pipeline::new(11);
    pipeline
        .add(OperationSpec::new("generate_rand_variation", 1.0).with("asset", "landing_pad").with("nvariations", 2.0))?
        .add(OperationSpec::new("distribute_assets", 1.0).with("asset", "landing_pad").with("container_class", "building").with("regions", 3.0))?
        .add(OperationSpec::new("random_obstacle_in_fov", 1.0).with("obstacle_asset", "obstacle_drone").with("frame_probability", 0.5))?
        .add(OperationSpec::new("randomize_global", 1.0).with("parameter", "time"))?;
    let run = pipeline.run(&[spec], 2, 1)?;

    let manifest = collect_data(&run.scenes, &CameraIntrinsics::new(128, 96, 80f64.to_radians())?, &out, 2)?;
    println!("{} records in {}", manifest.records.len(), out.display());
    for r in manifest.records.iter().take(3) {
        println!("  {} -> {}", r.image, r.annotation);
    }

    // The manifest reloads as written.
    let reloaded = Manifest::load(&out)?;
    assert_eq!(reloaded.records.len(), manifest.records.len());
    Ok(())
}
