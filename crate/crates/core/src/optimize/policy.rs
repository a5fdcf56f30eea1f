//! Data-generation policies: which operations run, how often and how hard.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Decision, OptimizeError};
use crate::preproc::{OperationSpec, ParamValue, Params};

pub const MAX_SUB_POLICIES: usize = 5;
pub const MAX_OPS_PER_SUB_POLICY: usize = 3;
pub const BINS: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    /// Creates asset or obstacle variants; needs a later distribution op.
    Generation,
    Distribution,
    Other,
}

/// The parameter a magnitude bin controls. Bin 1 maps to `min`, bin 10 to `max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Magnitude {
    pub param: String,
    pub min: f64,
    pub max: f64,
    #[serde(default)]
    pub integer: bool,
    /// Emit `[min, value]` instead of a scalar, for range-typed parameters.
    #[serde(default)]
    pub as_range: bool,
}

impl Magnitude {
    pub fn value(&self, bin: u8) -> f64 {
        let t = f64::from(bin.clamp(1, BINS) - 1) / f64::from(BINS - 1);
        let v = self.min + t * (self.max - self.min);
        if self.integer {
            v.round()
        } else {
            v
        }
    }

    fn param_value(&self, bin: u8) -> ParamValue {
        let v = self.value(bin);
        if self.as_range {
            ParamValue::from(vec![self.min, v])
        } else {
            ParamValue::Num(v)
        }
    }
}

/// One catalog entry. `label` identifies the entry inside policies, so one
/// pipeline operation can appear under several configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOp {
    pub label: String,
    pub op: String,
    pub kind: OpKind,
    #[serde(default)]
    pub magnitude: Option<Magnitude>,
    #[serde(default)]
    pub fixed: Params,
}

impl PolicyOp {
    pub fn new(label: &str, op: &str, kind: OpKind) -> Self {
        Self { label: label.into(), op: op.into(), kind, magnitude: None, fixed: Params::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<ParamValue>) -> Self {
        self.fixed.insert(key.into(), value.into());
        self
    }

    pub fn magnitude(mut self, param: &str, min: f64, max: f64, integer: bool) -> Self {
        self.magnitude = Some(Magnitude { param: param.into(), min, max, integer, as_range: false });
        self
    }

    pub fn magnitude_range(mut self, param: &str, min: f64, max: f64) -> Self {
        self.magnitude = Some(Magnitude { param: param.into(), min, max, integer: false, as_range: true });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub ops: Vec<PolicyOp>,
    /// Specs added to every generated pipeline, before the policy's own.
    #[serde(default)]
    pub base: Vec<OperationSpec>,
}

impl SearchSpace {
    pub fn new(ops: Vec<PolicyOp>, base: Vec<OperationSpec>) -> Result<Self, OptimizeError> {
        let s = Self { ops, base };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), OptimizeError> {
        let err = |m: String| Err(OptimizeError::SearchSpace(m));
        if self.ops.is_empty() {
            return err("empty operation catalog".into());
        }
        let mut labels = std::collections::HashSet::new();
        for op in &self.ops {
            if !labels.insert(op.label.as_str()) {
                return err(format!("duplicate label `{}`", op.label));
            }
            if let Some(m) = &op.magnitude {
                if !(m.min.is_finite() && m.max.is_finite() && m.min <= m.max) {
                    return err(format!("`{}`: magnitude range [{}, {}] is not ordered", op.label, m.min, m.max));
                }
            }
        }
        let has = |k| self.ops.iter().any(|o| o.kind == k);
        if has(OpKind::Generation) && !has(OpKind::Distribution) {
            return err("generation operations need at least one distribution operation".into());
        }
        Ok(())
    }

    pub fn get(&self, label: &str) -> Option<&PolicyOp> {
        self.ops.iter().find(|o| o.label == label)
    }

    /// Catalog for landing-pad style collection: variants, placement over
    /// buildings, obstacles, shadows and global randomization.
    pub fn default_for(asset: &str, obstacle_asset: Option<&str>) -> Self {
        let mut ops = vec![
            PolicyOp::new("variants", "generate_rand_variation", OpKind::Generation)
                .with("asset", asset)
                .magnitude("nvariations", 1.0, 10.0, true),
            PolicyOp::new("distribute", "distribute_assets", OpKind::Distribution)
                .with("asset", asset)
                .with("container_class", "building")
                .magnitude("count_per_region", 1.0, 3.0, true),
            PolicyOp::new("shadow", "random_shadow", OpKind::Other).with("asset", asset).magnitude_range("intensity", 0.1, 1.0),
            PolicyOp::new("weather", "randomize_global", OpKind::Other)
                .with("parameter", "weather")
                .magnitude_range("intensity", 0.0, 1.0),
            PolicyOp::new("time", "randomize_global", OpKind::Other).with("parameter", "time").magnitude_range("range", 6.0, 20.0),
            PolicyOp::new("lighting", "randomize_global", OpKind::Other)
                .with("parameter", "lighting")
                .magnitude_range("range", 0.1, 1.0),
        ];
        if let Some(ob) = obstacle_asset {
            ops.push(
                PolicyOp::new("obstacles_over_asset", "random_obstacle_over_asset", OpKind::Generation)
                    .with("asset", asset)
                    .with("obstacle_asset", ob)
                    .magnitude("max_count", 1.0, 6.0, true),
            );
            ops.push(
                PolicyOp::new("obstacles_in_fov", "random_obstacle_in_fov", OpKind::Other)
                    .with("obstacle_asset", ob)
                    .magnitude("frame_probability", 0.1, 1.0, false),
            );
        }
        let base = vec![
            OperationSpec::new("sample_trajectory_locations", 1.0),
            OperationSpec::new("randomize_trajectory", 1.0),
        ];
        Self { ops, base }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyStep {
    pub label: String,
    /// Multiple of 0.1 in `[0, 1]`.
    pub probability: f64,
    /// Magnitude bin in `1..=10`.
    pub bin: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubPolicy {
    pub steps: Vec<PolicyStep>,
}

impl SubPolicy {
    pub fn labels(&self) -> Vec<String> {
        self.steps.iter().map(|s| s.label.clone()).collect()
    }

    /// Every generation step has a distribution step somewhere after it.
    pub fn is_sequenced(&self, space: &SearchSpace) -> bool {
        let kind = |s: &PolicyStep| space.get(&s.label).map(|o| o.kind);
        self.steps.iter().enumerate().all(|(i, s)| {
            kind(s) != Some(OpKind::Generation) || self.steps[i + 1..].iter().any(|t| kind(t) == Some(OpKind::Distribution))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub sub_policies: Vec<SubPolicy>,
    pub data_size_target: u64,
}

impl Policy {
    pub fn label_sequences(&self) -> Vec<Vec<String>> {
        self.sub_policies.iter().map(SubPolicy::labels).collect()
    }

    /// Pipeline specs: the space's base specs, then every step in order.
    pub fn to_specs(&self, space: &SearchSpace) -> Vec<OperationSpec> {
        let mut specs = space.base.clone();
        for step in self.sub_policies.iter().flat_map(|s| &s.steps) {
            let Some(op) = space.get(&step.label) else { continue };
            let mut spec = OperationSpec::new(&op.op, step.probability);
            spec.params = op.fixed.clone();
            if let Some(m) = &op.magnitude {
                spec.params.insert(m.param.clone(), m.param_value(step.bin));
            }
            specs.push(spec);
        }
        specs
    }
}

fn random_step(label: &str, rng: &mut impl Rng) -> PolicyStep {
    PolicyStep { label: label.to_string(), probability: f64::from(rng.gen_range(0..=10u8)) / 10.0, bin: rng.gen_range(1..=BINS) }
}

fn sample_sub_policy(space: &SearchSpace, rng: &mut impl Rng) -> SubPolicy {
    let k = rng.gen_range(1..=MAX_OPS_PER_SUB_POLICY).min(space.ops.len());
    let picks = sample_indices(rng, space.ops.len(), k).into_vec();
    let mut sub = SubPolicy { steps: picks.into_iter().map(|i| random_step(&space.ops[i].label, rng)).collect() };
    if !sub.is_sequenced(space) {
        let dist: Vec<&PolicyOp> = space.ops.iter().filter(|o| o.kind == OpKind::Distribution).collect();
        let pick = dist[rng.gen_range(0..dist.len())];
        sub.steps.push(random_step(&pick.label, rng));
    }
    sub
}

/// Draws 1 to 5 sub-policies of 1 to 3 distinct catalog entries each, with
/// probabilities and magnitude bins uniform over their grids. A distribution
/// step is appended wherever a generation step would lack one.
/// `data_size_target` starts at 1.
pub fn sample_policy(space: &SearchSpace, rng: &mut impl Rng) -> Policy {
    let n = rng.gen_range(1..=MAX_SUB_POLICIES);
    Policy { sub_policies: (0..n).map(|_| sample_sub_policy(space, rng)).collect(), data_size_target: 1 }
}

/// `IncreaseSize(n)` keeps every label and probability, moves each magnitude
/// bin one step up or down and targets `max(n, current + 1)`.
/// `ChangeSetting` re-samples the sub-policies and keeps the target.
pub fn update_policy(policy: &Policy, decision: Decision, space: &SearchSpace, rng: &mut impl Rng) -> Policy {
    match decision {
        Decision::IncreaseSize(n) => {
            let mut next = policy.clone();
            for step in next.sub_policies.iter_mut().flat_map(|s| s.steps.iter_mut()) {
                step.bin = if rng.gen_bool(0.5) { step.bin.saturating_add(1) } else { step.bin.saturating_sub(1) }.clamp(1, BINS);
            }
            next.data_size_target = n.max(policy.data_size_target + 1);
            next
        }
        Decision::ChangeSetting => Policy { data_size_target: policy.data_size_target, ..sample_policy(space, rng) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    #[test]
    fn magnitude_bins_are_linear() {
        let m = Magnitude { param: "x".into(), min: 2.0, max: 20.0, integer: false, as_range: false };
        assert_eq!(m.value(1), 2.0);
        assert_eq!(m.value(10), 20.0);
        assert_eq!(m.value(4), 8.0);
    }

    #[test]
    fn sampled_policies_are_sequenced() {
        let space = SearchSpace::default_for("landing_pad", Some("obstacle_drone"));
        let mut rng = StreamKey::new(5).stream();
        for _ in 0..500 {
            let p = sample_policy(&space, &mut rng);
            assert!((1..=MAX_SUB_POLICIES).contains(&p.sub_policies.len()));
            for s in &p.sub_policies {
                assert!(s.is_sequenced(&space));
                assert!(s.steps.iter().all(|t| (1..=BINS).contains(&t.bin) && (t.probability * 10.0).fract() == 0.0));
            }
        }
    }

    #[test]
    fn generation_without_distribution_is_rejected() {
        let r = SearchSpace::new(vec![PolicyOp::new("g", "generate_rand_variation", OpKind::Generation)], vec![]);
        assert!(matches!(r, Err(OptimizeError::SearchSpace(_))));
    }

    #[test]
    fn increase_keeps_labels_and_probabilities() {
        let space = SearchSpace::default_for("landing_pad", None);
        let mut rng = StreamKey::new(9).stream();
        let p = Policy { data_size_target: 40, ..sample_policy(&space, &mut rng) };
        let q = update_policy(&p, Decision::IncreaseSize(10), &space, &mut rng);
        assert_eq!(p.label_sequences(), q.label_sequences());
        assert_eq!(q.data_size_target, 41);
        for (a, b) in p.sub_policies.iter().flat_map(|s| &s.steps).zip(q.sub_policies.iter().flat_map(|s| &s.steps)) {
            assert_eq!(a.probability, b.probability);
            assert!(a.bin.abs_diff(b.bin) <= 1);
        }
        let r = update_policy(&p, Decision::ChangeSetting, &space, &mut rng);
        assert_eq!(r.data_size_target, 40);
    }

    #[test]
    fn specs_validate_against_the_pipeline() {
        let space = SearchSpace::default_for("landing_pad", Some("obstacle_drone"));
        let pipeline = crate::preproc::Pipeline::new(0);
        let mut rng = StreamKey::new(1).stream();
        for _ in 0..200 {
            for spec in sample_policy(&space, &mut rng).to_specs(&space) {
                pipeline.validate(&spec).unwrap_or_else(|e| panic!("{spec:?}: {e}"));
            }
        }
    }
}
