//! The bundled landing-pad experiment end to end: script, scenes, capture,
//! augmentation and dataset statistics.
//!
//! cargo run --release --example landing_pad_replay [out_dir]

use std::path::{Path, PathBuf};

use asda::cli::{cmd_generate, cmd_stats, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("asda-replay"));
    let _ = std::fs::remove_dir_all(&out);

    let mut cfg = RunConfig::new(root.join("scripts/landing_pad_replay.asda"), root.join("scenes/SEA.json"), &out, 42);
    cfg.workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let summary = cmd_generate(&cfg)?;
    println!("{summary}\n");
    println!("{}", cmd_stats(&out)?);
    Ok(())
}
