use std::collections::{HashMap, HashSet};
use std::fmt;

use nalgebra::{Matrix3, Matrix4, Rotation3};
use serde::{Deserialize, Serialize};

use super::types::{transform_point, trs_matrix, Aabb, AttrValue, Attributes, Material, Vec3};
use super::SceneError;

fn unit_scale() -> Vec3 {
    Vec3::repeat(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneNode {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    pub semantic_class: String,
    #[serde(default = "Vec3::zeros")]
    pub local_translation: Vec3,
    #[serde(default = "Vec3::zeros")]
    pub local_rotation: Vec3,
    #[serde(default = "unit_scale")]
    pub local_scale: Vec3,
    pub aabb: Aabb,
    #[serde(default, skip_serializing_if = "Attributes::is_empty")]
    pub attributes: Attributes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<Material>,
}

impl SceneNode {
    pub fn new(id: &str, parent: Option<&str>, class: &str, aabb: Aabb) -> Self {
        Self {
            id: id.to_string(),
            parent_id: parent.map(str::to_string),
            semantic_class: class.to_string(),
            local_translation: Vec3::zeros(),
            local_rotation: Vec3::zeros(),
            local_scale: unit_scale(),
            aabb,
            attributes: Attributes::new(),
            material: None,
        }
    }

    pub fn local_matrix(&self) -> Matrix4<f64> {
        trs_matrix(&self.local_translation, &self.local_rotation, &self.local_scale)
    }
}

/// Scene graph stored flat; children are derived from `parent_id` in
/// declaration order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SceneGraph {
    nodes: Vec<SceneNode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ViolationKind {
    DuplicateId,
    MissingRoot,
    MultipleRoots,
    RootNotWorld,
    UnknownParent,
    Cycle,
    Unreachable,
    NonPositiveScale,
    DegenerateAabb,
    NonFinite,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::DuplicateId => "duplicate id",
            ViolationKind::MissingRoot => "missing root",
            ViolationKind::MultipleRoots => "multiple roots",
            ViolationKind::RootNotWorld => "root not world",
            ViolationKind::UnknownParent => "unknown parent",
            ViolationKind::Cycle => "cycle",
            ViolationKind::Unreachable => "unreachable",
            ViolationKind::NonPositiveScale => "non-positive scale",
            ViolationKind::DegenerateAabb => "degenerate aabb",
            ViolationKind::NonFinite => "non-finite",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub node_id: Option<String>,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            match &v.node_id {
                Some(id) => write!(f, "{}: {}", id, v.kind)?,
                None => write!(f, "{}", v.kind)?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompareOp {
    Eq,
    Ne,
    Gt,
    Ge,
    Lt,
    Le,
}

/// Predicate over one attribute. Missing attributes never match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttrFilter {
    pub key: String,
    pub op: CompareOp,
    pub value: AttrValue,
}

impl AttrFilter {
    pub fn eq(key: &str, value: impl Into<AttrValue>) -> Self {
        Self { key: key.to_string(), op: CompareOp::Eq, value: value.into() }
    }

    pub fn gt(key: &str, value: f64) -> Self {
        Self { key: key.to_string(), op: CompareOp::Gt, value: AttrValue::Num(value) }
    }

    pub fn matches(&self, attrs: &Attributes) -> bool {
        let Some(actual) = attrs.get(&self.key) else {
            return false;
        };
        match self.op {
            CompareOp::Eq | CompareOp::Ne => {
                let equal = match (actual.as_f64(), self.value.as_f64()) {
                    (Some(a), Some(b)) => a == b,
                    _ => actual.to_string().eq_ignore_ascii_case(&self.value.to_string()),
                };
                equal == (self.op == CompareOp::Eq)
            }
            op => match (actual.as_f64(), self.value.as_f64()) {
                (Some(a), Some(b)) => match op {
                    CompareOp::Gt => a > b,
                    CompareOp::Ge => a >= b,
                    CompareOp::Lt => a < b,
                    _ => a <= b,
                },
                _ => false,
            },
        }
    }
}

/// World-frame transform of a node.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldTransform {
    pub matrix: Matrix4<f64>,
    pub position: Vec3,
    pub rotation: Rotation3<f64>,
    pub scale: Vec3,
}

impl WorldTransform {
    fn from_matrix(matrix: Matrix4<f64>) -> Self {
        let linear: Matrix3<f64> = matrix.fixed_view::<3, 3>(0, 0).into();
        let scale = Vec3::new(linear.column(0).norm(), linear.column(1).norm(), linear.column(2).norm());
        let mut rot = linear;
        for c in 0..3 {
            if scale[c] > 0.0 {
                let col = rot.column(c) / scale[c];
                rot.set_column(c, &col);
            }
        }
        Self {
            position: matrix.fixed_view::<3, 1>(0, 3).into(),
            rotation: Rotation3::from_matrix_unchecked(rot),
            scale,
            matrix,
        }
    }
}

impl SceneGraph {
    pub fn from_nodes(nodes: Vec<SceneNode>) -> Self {
        Self { nodes }
    }

    pub fn nodes(&self) -> &[SceneNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &str) -> Option<&SceneNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    fn index(&self) -> HashMap<&str, usize> {
        let mut idx = HashMap::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            idx.entry(n.id.as_str()).or_insert(i);
        }
        idx
    }

    pub fn children(&self, id: &str) -> Vec<&SceneNode> {
        self.nodes.iter().filter(|n| n.parent_id.as_deref() == Some(id)).collect()
    }

    pub fn root(&self) -> Option<&SceneNode> {
        let mut roots = self.nodes.iter().filter(|n| n.parent_id.is_none());
        let root = roots.next()?;
        roots.next().is_none().then_some(root)
    }

    /// Checks every structural invariant. Never mutates the graph.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        if self.nodes.is_empty() {
            return report;
        }
        let mut push = |id: Option<&str>, kind| {
            report.violations.push(Violation { node_id: id.map(str::to_string), kind })
        };

        let mut seen = HashSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id.as_str()) {
                push(Some(&n.id), ViolationKind::DuplicateId);
            }
        }
        let idx = self.index();

        let roots: Vec<&SceneNode> = self.nodes.iter().filter(|n| n.parent_id.is_none()).collect();
        match roots.len() {
            0 => push(None, ViolationKind::MissingRoot),
            1 => {
                if roots[0].semantic_class != "world" {
                    push(Some(&roots[0].id), ViolationKind::RootNotWorld);
                }
            }
            _ => {
                for r in &roots[1..] {
                    push(Some(&r.id), ViolationKind::MultipleRoots);
                }
            }
        }

        for n in &self.nodes {
            if let Some(p) = &n.parent_id {
                if !idx.contains_key(p.as_str()) {
                    push(Some(&n.id), ViolationKind::UnknownParent);
                }
            }
            let finite = n
                .local_translation
                .iter()
                .chain(n.local_rotation.iter())
                .chain(n.local_scale.iter())
                .all(|v| v.is_finite())
                && n.aabb.is_finite();
            if !finite {
                push(Some(&n.id), ViolationKind::NonFinite);
            }
            if n.local_scale.iter().any(|s| !(*s > 0.0)) {
                push(Some(&n.id), ViolationKind::NonPositiveScale);
            }
            if n.aabb.is_finite() && !n.aabb.is_ordered() {
                push(Some(&n.id), ViolationKind::DegenerateAabb);
            }
        }

        // Walk each node's parent chain; a revisit means a cycle.
        let mut in_cycle = HashSet::new();
        for (start, n) in self.nodes.iter().enumerate() {
            let mut visited = HashSet::from([start]);
            let mut cur = n;
            while let Some(p) = cur.parent_id.as_deref().and_then(|p| idx.get(p)) {
                if !visited.insert(*p) {
                    if *p == start {
                        in_cycle.insert(start);
                    }
                    break;
                }
                cur = &self.nodes[*p];
            }
        }
        for i in 0..self.nodes.len() {
            if in_cycle.contains(&i) {
                push(Some(&self.nodes[i].id), ViolationKind::Cycle);
            }
        }

        if let [root] = roots.as_slice() {
            let reachable: HashSet<&str> = self.preorder_from(&root.id).into_iter().map(|n| n.id.as_str()).collect();
            for n in &self.nodes {
                if !reachable.contains(n.id.as_str())
                    && !in_cycle.contains(&idx[n.id.as_str()])
                    && n.parent_id.as_deref().is_some_and(|p| idx.contains_key(p))
                {
                    push(Some(&n.id), ViolationKind::Unreachable);
                }
            }
        }
        report
    }

    fn preorder_from(&self, id: &str) -> Vec<&SceneNode> {
        let mut children: HashMap<&str, Vec<&SceneNode>> = HashMap::new();
        for n in &self.nodes {
            if let Some(p) = &n.parent_id {
                children.entry(p.as_str()).or_default().push(n);
            }
        }
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        let Some(start) = self.node(id) else {
            return out;
        };
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            if !seen.insert(n.id.as_str()) {
                continue;
            }
            out.push(n);
            if let Some(cs) = children.get(n.id.as_str()) {
                stack.extend(cs.iter().rev());
            }
        }
        out
    }

    /// Composes local transforms root → node.
    pub fn world_transform(&self, node_id: &str) -> Result<WorldTransform, SceneError> {
        Ok(WorldTransform::from_matrix(self.world_matrix(node_id)?))
    }

    pub fn world_matrix(&self, node_id: &str) -> Result<Matrix4<f64>, SceneError> {
        let idx = self.index();
        let mut i = *idx.get(node_id).ok_or_else(|| SceneError::UnknownNode(node_id.to_string()))?;
        let mut m = self.nodes[i].local_matrix();
        let mut guard = 0;
        while let Some(p) = self.nodes[i].parent_id.as_deref() {
            i = *idx.get(p).ok_or_else(|| SceneError::UnknownNode(p.to_string()))?;
            m = self.nodes[i].local_matrix() * m;
            guard += 1;
            if guard > self.nodes.len() {
                return Err(SceneError::InvalidGraph(format!("cycle above {node_id}")));
            }
        }
        Ok(m)
    }

    /// Node AABB after transforming all eight local corners to world.
    pub fn world_aabb(&self, node_id: &str) -> Result<Aabb, SceneError> {
        let m = self.world_matrix(node_id)?;
        let node = self.node(node_id).ok_or_else(|| SceneError::UnknownNode(node_id.to_string()))?;
        let corners = node.aabb.corners().map(|c| transform_point(&m, &c));
        Ok(Aabb::from_points(corners.iter()).expect("eight corners"))
    }

    /// Nodes of `semantic_class` satisfying every filter, in preorder.
    pub fn query_nodes(&self, semantic_class: &str, filters: &[AttrFilter]) -> Vec<String> {
        let Some(root) = self.root() else {
            return Vec::new();
        };
        self.preorder_from(&root.id)
            .into_iter()
            .filter(|n| n.semantic_class == semantic_class && filters.iter().all(|f| f.matches(&n.attributes)))
            .map(|n| n.id.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> Aabb {
        Aabb::new(Vec3::zeros(), Vec3::repeat(1.0))
    }

    fn world() -> SceneNode {
        SceneNode::new("world", None, "world", unit_box())
    }

    #[test]
    fn single_root_is_valid() {
        let g = SceneGraph::from_nodes(vec![world()]);
        assert!(g.validate().is_valid());
    }

    #[test]
    fn cycle_is_reported() {
        let a = SceneNode::new("a", Some("b"), "group", unit_box());
        let b = SceneNode::new("b", Some("a"), "group", unit_box());
        let g = SceneGraph::from_nodes(vec![world(), a, b]);
        let r = g.validate();
        assert!(r.has(ViolationKind::Cycle));
        assert_eq!(r.violations.iter().filter(|v| v.kind == ViolationKind::Cycle).count(), 2);
        assert!(r.to_string().contains("cycle"));
    }

    #[test]
    fn self_parent_is_a_cycle() {
        let a = SceneNode::new("a", Some("a"), "group", unit_box());
        let g = SceneGraph::from_nodes(vec![world(), a]);
        assert!(g.validate().has(ViolationKind::Cycle));
    }

    #[test]
    fn inverted_box_is_degenerate() {
        let mut n = SceneNode::new("b", Some("world"), "building", unit_box());
        n.aabb.min.x = 2.0;
        let g = SceneGraph::from_nodes(vec![world(), n]);
        let r = g.validate();
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].kind.to_string(), "degenerate aabb");
    }

    #[test]
    fn structural_errors() {
        let mut bad_scale = SceneNode::new("s", Some("world"), "x", unit_box());
        bad_scale.local_scale.y = 0.0;
        let orphan = SceneNode::new("o", Some("nowhere"), "x", unit_box());
        let second_root = SceneNode::new("r2", None, "world", unit_box());
        let dup = world();
        let r = SceneGraph::from_nodes(vec![world(), bad_scale, orphan, second_root, dup]).validate();
        for k in [
            ViolationKind::NonPositiveScale,
            ViolationKind::UnknownParent,
            ViolationKind::MultipleRoots,
            ViolationKind::DuplicateId,
        ] {
            assert!(r.has(k), "missing {k}");
        }
        let mut root = world();
        root.semantic_class = "city".into();
        assert!(SceneGraph::from_nodes(vec![root]).validate().has(ViolationKind::RootNotWorld));
    }

    #[test]
    fn root_transform_is_identity() {
        let g = SceneGraph::from_nodes(vec![world()]);
        let t = g.world_transform("world").unwrap();
        assert_eq!(t.matrix, Matrix4::identity());
        assert!(matches!(g.world_transform("nope"), Err(SceneError::UnknownNode(_))));
    }

    #[test]
    fn translations_compose() {
        let mut p = SceneNode::new("p", Some("world"), "group", unit_box());
        p.local_translation = Vec3::new(0.0, 2.0, 0.0);
        let mut c = SceneNode::new("c", Some("p"), "thing", unit_box());
        c.local_translation = Vec3::new(1.0, 0.0, 0.0);
        let g = SceneGraph::from_nodes(vec![world(), p, c]);
        let t = g.world_transform("c").unwrap();
        assert!((t.position - Vec3::new(1.0, 2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn parent_scale_scales_child_offset() {
        let mut p = SceneNode::new("p", Some("world"), "group", unit_box());
        p.local_scale = Vec3::repeat(2.0);
        let mut c = SceneNode::new("c", Some("p"), "thing", unit_box());
        c.local_translation = Vec3::new(1.0, 0.0, 0.0);
        let g = SceneGraph::from_nodes(vec![world(), p, c]);
        // Hand-built parent and child matrices.
        #[rustfmt::skip]
        let parent = Matrix4::new(2.0, 0.0, 0.0, 0.0,
                                  0.0, 2.0, 0.0, 0.0,
                                  0.0, 0.0, 2.0, 0.0,
                                  0.0, 0.0, 0.0, 1.0);
        #[rustfmt::skip]
        let child = Matrix4::new(1.0, 0.0, 0.0, 1.0,
                                 0.0, 1.0, 0.0, 0.0,
                                 0.0, 0.0, 1.0, 0.0,
                                 0.0, 0.0, 0.0, 1.0);
        let expected = parent * child;
        let t = g.world_transform("c").unwrap();
        assert!((t.matrix - expected).norm() < 1e-12);
        assert!((t.position - Vec3::new(2.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((t.scale - Vec3::repeat(2.0)).norm() < 1e-12);
    }

    #[test]
    fn query_is_preorder_and_filtered() {
        let mut nodes = vec![world()];
        for (i, h) in [30.0, 80.0, 55.0].iter().enumerate() {
            let mut b = SceneNode::new(&format!("b{i}"), Some("world"), "building", unit_box());
            b.attributes.insert("height".into(), AttrValue::Num(*h));
            nodes.push(b);
        }
        nodes.push(SceneNode::new("t0", Some("b1"), "tree", unit_box()));
        let g = SceneGraph::from_nodes(nodes);
        assert_eq!(g.query_nodes("building", &[]), vec!["b0", "b1", "b2"]);
        assert_eq!(g.query_nodes("building", &[AttrFilter::gt("height", 50.0)]), vec!["b1", "b2"]);
        assert!(g.query_nodes("submarine", &[]).is_empty());
    }
}
