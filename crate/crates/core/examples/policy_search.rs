//! Sample data-generation policies, turn them into pipeline operations and
//! update them after a decision.
//!
//! cargo run --example policy_search

use asda::optimize::{sample_policy, update_policy, Decision, SearchSpace};
use asda::preproc::Pipeline;
use asda::rng::StreamKey;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = SearchSpace::default_for("landing_pad", Some("obstacle_drone"));
    let mut rng = StreamKey::new(9).with_str("policy").stream();

    let policy = sample_policy(&space, &mut rng);
    for (i, labels) in policy.label_sequences().iter().enumerate() {
        println!("sub-policy {i}: {}", labels.join(" -> "));
    }

    // Every policy becomes valid pipeline operations.
    let mut pipeline = Pipeline::new(1);
    for spec in policy.to_specs(&space) {
        println!("  {:<28} p = {:.2}  {}", spec.name, spec.probability, serde_json::to_string(&spec.params)?);
        pipeline.add(spec)?;
    }

    let grown = update_policy(&policy, Decision::IncreaseSize(120), &space, &mut rng);
    println!("after IncreaseSize(120): target {} records, same labels: {}", grown.data_size_target, grown.label_sequences() == policy.label_sequences());
    let changed = update_policy(&grown, Decision::ChangeSetting, &space, &mut rng);
    println!("after ChangeSetting: {} sub-policies, target kept at {}", changed.sub_policies.len(), changed.data_size_target);
    Ok(())
}
