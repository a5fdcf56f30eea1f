//! Post-process a captured dataset: gated rotations, flips, zooms, grid
//! distortion and a visibility effect, with boxes carried through.
//!
//! cargo run --example augment_dataset [out_dir]

use std::path::{Path, PathBuf};

use asda::capture::{collect_data, CameraIntrinsics};
use asda::postproc::{postproc_run, AugmentOpSpec, PostPipeline};
use asda::preproc::{OperationSpec, Pipeline};
use asda::scene::load_scene_spec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("asda-augment"));
    let _ = std::fs::remove_dir_all(&out);
    let spec = load_scene_spec(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenes/SEA.json"))?;

    let mut pre = Pipeline::new(5);
    pre.add(OperationSpec::new("generate_rand_variation", 1.0).with("asset", "landing_pad"))?
        .add(OperationSpec::new("distribute_assets", 1.0).with("asset", "landing_pad").with("container_class", "building").with("regions", 2.0))?;
    let scenes = pre.run(&[spec], 1, 1)?.scenes;
    collect_data(&scenes, &CameraIntrinsics::new(96, 96, 1.4)?, &out, 1)?;

    let mut post = PostPipeline::new(5);
    post.add(AugmentOpSpec::new("rotate", 0.7).with("max_left_rotation", 10.0).with("max_right_rotation", 10.0))?
        .add(AugmentOpSpec::new("flip", 0.5).with("axis", "either"))?
        .add(AugmentOpSpec::new("zoom", 0.5))?
        .add(AugmentOpSpec::new("grid_distortion", 0.4))?
        .add(AugmentOpSpec::new("add_effect", 0.8).with("effect_name", "visibility").with("intensity", 1.0))?;

    let report = postproc_run(&post, &out, 2, 1)?;
    println!("{} augmented copies, {} op applications, {} failures", report.augmented.len(), report.applications(), report.failures.len());
    for a in report.augmented.iter().take(4) {
        let ops: Vec<String> = a.ops.iter().map(|o| format!("{} {}", o.op, o.params)).collect();
        println!("  {} <- {}: {}", a.image, a.source_image, if ops.is_empty() { "(no op fired)".into() } else { ops.join("; ") });
    }
    Ok(())
}
