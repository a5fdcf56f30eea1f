//! Fit a learning curve to (size, error) points and ask whether to collect
//! more data or change the data itself.
//!
//! cargo run --example scaling_law

use asda::optimize::{decide_action, estimate_data_requirement, fit_scaling_law, LocConfig, ScalingLawParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = ScalingLawParams::new(0.8, 0.5, 0.05);
    let points: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0, 160.0, 320.0].iter().map(|&n| (n, truth.predict(n))).collect();
    let fit = fit_scaling_law(&points)?;
    println!("fitted D {:.3}  alpha {:.3}  C {:.4}  (sse {:.2e})", fit.coeff_d, fit.alpha, fit.transfer_gap_c, fit.fit_sse);

    for v_star in [0.85, 0.9, 0.94, 0.96] {
        let cfg = LocConfig::new(v_star);
        let need = estimate_data_requirement(&fit, v_star).map(|n| n.to_string()).unwrap_or_else(|e| e.to_string());
        println!("target accuracy {v_star}: need {need}; decision {}", decide_action(&fit, &cfg).label());
    }

    // A slow curve says more of the same data will not help.
    let flat = ScalingLawParams::new(0.8, 0.1, 0.02);
    println!("alpha 0.1: {}", decide_action(&flat, &LocConfig::new(0.9)).label());
    Ok(())
}
