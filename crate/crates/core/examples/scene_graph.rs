//! Build a small scene graph, validate it and query it.
//!
//! cargo run --example scene_graph

use asda::scene::{query_nodes, validate_scene_graph, world_transform, Aabb, AttrFilter, AttrValue, SceneGraph, SceneNode, Vec3};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let block = Aabb::new(Vec3::new(-10.0, 0.0, -10.0), Vec3::new(10.0, 1.0, 10.0));
    let mut nodes = vec![SceneNode::new("city", None, "world", Aabb::new(Vec3::repeat(-500.0), Vec3::repeat(500.0)))];

    let mut district = SceneNode::new("district", Some("city"), "district", block);
    district.local_translation = Vec3::new(100.0, 0.0, -40.0);
    district.local_rotation = Vec3::new(0.0, std::f64::consts::FRAC_PI_2, 0.0);
    nodes.push(district);

    for (i, height) in [12.0, 45.0, 30.0].into_iter().enumerate() {
        let mut b = SceneNode::new(&format!("tower_{i}"), Some("district"), "building", Aabb::new(Vec3::new(-4.0, 0.0, -4.0), Vec3::new(4.0, height, 4.0)));
        b.local_translation = Vec3::new(i as f64 * 15.0, 0.0, 0.0);
        b.attributes.insert("height".into(), AttrValue::Num(height));
        nodes.push(b);
    }
    let graph = SceneGraph::from_nodes(nodes);

    let report = validate_scene_graph(&graph);
    println!("valid: {} ({} violations)", report.is_valid(), report.violations.len());

    for id in query_nodes(&graph, "building", &[]) {
        let t = world_transform(&graph, &id)?;
        let b = graph.world_aabb(&id)?;
        println!("{id}: world position {:.1?}, roof at y = {:.1}", t.position.as_slice(), b.max.y);
    }
    let tall = query_nodes(&graph, "building", &[AttrFilter::gt("height", 25.0)]);
    println!("buildings taller than 25 m: {tall:?}");

    // A node that names itself as parent is reported, not panicked on.
    let mut broken = graph.nodes().to_vec();
    broken[1].parent_id = Some("district".into());
    println!("self-parented graph valid: {}", validate_scene_graph(&SceneGraph::from_nodes(broken)).is_valid());
    Ok(())
}
