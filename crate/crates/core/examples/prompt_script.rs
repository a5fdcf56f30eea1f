//! Parse an action-prompt script, print it in canonical form and dry-run it
//! against the bundled scenes.
//!
//! cargo run --example prompt_script [script.asda]

use std::path::{Path, PathBuf};

use asda::dsl::{bind_script, dry_run, parse_strategy_script};
use asda::scene::load_scene_specs;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| root.join("scripts/scenario_landing_pads.asda"));
    let text = std::fs::read_to_string(&path)?;

    let script = parse_strategy_script(&text)?;
    println!("{} prompts; canonical form:\n{}", script.prompts.len(), script.pretty());

    let bound = bind_script(&script, 0)?;
    println!("pre ops: {}", bound.pre.ops().iter().map(|o| o.name.as_str()).collect::<Vec<_>>().join(" -> "));
    println!("post ops: {}", bound.post.ops().iter().map(|o| o.name.as_str()).collect::<Vec<_>>().join(" -> "));

    let report = dry_run(&text, &load_scene_specs(root.join("scenes"))?)?;
    for line in &report.pre_ops {
        println!("  {line}");
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }

    // Errors point at the offending line and column.
    let err = parse_strategy_script("pre_processing_pipeline.random_weather (1, scene=\"SEA\" p)").unwrap_err();
    println!("error example: {err} (line {}, column {:?})", err.line(), err.column());
    Ok(())
}
