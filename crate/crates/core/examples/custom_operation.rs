//! Extend the pre-processing pipeline with a closure-backed operation and
//! list the parameter catalog.
//!
//! cargo run --example custom_operation

use std::path::Path;

use asda::preproc::{Layer, OpError, OperationSpec, ParamsExt, Pipeline};
use asda::rng::uniform;
use asda::scene::load_scene_spec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = load_scene_spec(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenes/WINDFARM.json"))?;

    let mut pipeline = Pipeline::new(3);
    // Dusk: a late hour and a dimmed ambient level drawn from the stream.
    pipeline.register_custom_operation("dusk", Layer::GlobalVariation, |scene, params, rng| {
        let dim = params.num_or("dim", 0.5);
        if !(0.0..=1.0).contains(&dim) {
            return Err(OpError::InvalidRange(format!("dim {dim} outside [0, 1]")));
        }
        scene.global.time_of_day = uniform(rng, 18.0, 20.5);
        scene.global.ambient_level *= 1.0 - dim;
        Ok(())
    })?;
    pipeline.add(OperationSpec::new("dusk", 0.7).with("dim", 0.4))?;

    let out = pipeline.run(&[spec], 6, 1)?;
    for s in &out.scenes {
        let applied = s.provenance[0].applied;
        println!("variation {}: dusk {}  time {:.2} h  ambient {:.2}", s.variation_index, if applied { "on " } else { "off" }, s.global.time_of_day, s.global.ambient_level);
    }

    let names: Vec<String> = pipeline.catalog().into_iter().map(|c| format!("{}@{}", c.name, c.layer)).collect();
    println!("registered operations: {}", names.join(", "));
    Ok(())
}
