//! Scene graphs, scene specifications and the per-variation scene state that
//! the pipelines mutate.
//!
//! Conventions: right-handed, Y-up, meters. Euler rotations are intrinsic
//! Z·Y·X in radians. Asset and node boxes stay local; world boxes come from
//! transforming the eight corners.

mod graph;
mod spec;
mod types;

pub use graph::{
    AttrFilter, CompareOp, SceneGraph, SceneNode, ValidationReport, Violation, ViolationKind, WorldTransform,
};
pub use spec::{load_scene_spec, load_scene_specs, BaseMapKind, GeoPoint, GeodataRef, OverpassRef, SceneSpecification};
pub use types::*;

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("inconsistent base map: {0}")]
    InconsistentBaseMap(String),
    #[error("invalid scene graph: {0}")]
    InvalidGraph(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

/// Free-function form of [`SceneGraph::validate`].
pub fn validate_scene_graph(graph: &SceneGraph) -> ValidationReport {
    graph.validate()
}

pub fn world_transform(graph: &SceneGraph, node_id: &str) -> Result<WorldTransform, SceneError> {
    graph.world_transform(node_id)
}

pub fn query_nodes(graph: &SceneGraph, semantic_class: &str, filters: &[AttrFilter]) -> Vec<String> {
    graph.query_nodes(semantic_class, filters)
}
