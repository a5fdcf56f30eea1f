//! Turn building footprints into a distribution layer and sample spawn
//! points from it, uniformly and around the city center.
//!
//! cargo run --example spawn_sampling

use std::collections::BTreeMap;
use std::path::Path;

use asda::distribution::{point_in_region, sample_locations, RadiusCenter, SamplingPattern};
use asda::preproc::SceneContext;
use asda::rng::StreamKey;
use asda::scene::{load_scene_spec, AttrFilter};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = load_scene_spec(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenes/SEA.json"))?;
    let ctx = SceneContext::new(spec);

    let layer = ctx.layer("building", &[], "landing_pad")?;
    println!("{} rooftop regions, {:.0} m² in total", layer.regions.len(), layer.total_area());

    let mut rng = StreamKey::new(7).with_str("example").stream();
    let points = sample_locations(&layer, 2000, &SamplingPattern::Uniform, 0.0, &mut rng)?;
    let mut per_region: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &points {
        let region = &layer.regions[p.region];
        assert!(point_in_region(region, [p.position.x, p.position.z]));
        *per_region.entry(&region.region_id).or_default() += 1;
    }
    println!("uniform draws per region (area-weighted):");
    for r in layer.regions.iter().take(5) {
        println!("  {:<12} area {:>7.1}  hits {}", r.region_id, r.area(), per_region.get(r.region_id.as_str()).unwrap_or(&0));
    }

    let commercial = ctx.layer("building", &[AttrFilter::eq("building", "commercial")], "landing_pad")?;
    let near = SamplingPattern::Radius { center: RadiusCenter::Point([0.0, 0.0]), r: 60.0 };
    let close = sample_locations(&commercial, 10, &near, 3.0, &mut rng)?;
    println!("{} commercial regions; 10 points within 60 m of the origin:", commercial.regions.len());
    for p in close {
        println!("  {:>7.2} {:>6.2} {:>7.2}  on {}", p.position.x, p.position.y, p.position.z, commercial.regions[p.region].region_id);
    }
    Ok(())
}
