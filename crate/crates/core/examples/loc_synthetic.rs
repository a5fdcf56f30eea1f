//! Run the learn / optimize / collect loop against an analytic oracle and
//! print the iteration table.
//!
//! cargo run --example loc_synthetic [seed]

use asda::optimize::{run_loc_loop, LocConfig, ScalingLawParams, SearchSpace, SyntheticOracle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(7);
    let space = SearchSpace::default_for("landing_pad", Some("obstacle_drone"));
    let config = LocConfig::new(0.9);

    for (name, c) in [("reachable", 0.02), ("floor above target", 0.3)] {
        let mut oracle = SyntheticOracle::new(ScalingLawParams::new(0.8, 0.5, c), 0.005, seed)?;
        let outcome = run_loc_loop(&mut oracle, &config, &space, seed, None)?;
        println!("{name} (C = {c}): {:?} after {} iterations", outcome.status, outcome.history.len());
        println!("  {:>2} {:>6} {:>7} {:>7} {:>7}  decision", "t", "q_t", "V", "alpha", "C");
        for r in &outcome.history {
            let (a, cc) = r.fitted.map_or(("-".to_string(), "-".to_string()), |f| (format!("{:.3}", f.alpha), format!("{:.3}", f.transfer_gap_c)));
            println!("  {:>2} {:>6} {:>7.4} {:>7} {:>7}  {}", r.iteration, r.size, r.score, a, cc, r.decision.label());
        }
    }
    Ok(())
}
