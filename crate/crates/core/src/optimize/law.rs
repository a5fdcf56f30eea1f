//! Power-law learning curves: `error ≈ D · n^(-alpha) + C`.

use serde::{Deserialize, Serialize};

use super::OptimizeError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingLawParams {
    pub coeff_d: f64,
    /// Pre-training rate.
    pub alpha: f64,
    /// Transfer gap: the error floor no amount of data removes.
    pub transfer_gap_c: f64,
    /// Residual sum of squares of the fit.
    pub fit_sse: f64,
}

impl ScalingLawParams {
    pub fn new(coeff_d: f64, alpha: f64, transfer_gap_c: f64) -> Self {
        Self { coeff_d, alpha, transfer_gap_c, fit_sse: 0.0 }
    }

    pub fn predict(&self, n: f64) -> f64 {
        self.coeff_d * n.powf(-self.alpha) + self.transfer_gap_c
    }

    pub fn sse(&self, points: &[(f64, f64)]) -> f64 {
        points.iter().map(|&(n, e)| (e - self.predict(n)).powi(2)).sum()
    }
}

pub const ALPHA_RANGE: [f64; 2] = [0.05, 2.0];
pub const ALPHA_STEP: f64 = 0.01;
/// Grid points for C on `[0, min(e))`.
pub const C_STEPS: usize = 101;
/// Refinement resolution relative to the coarse grid.
pub const REFINE: usize = 10;

/// Least-squares `D >= 0` for fixed `alpha` and `C`, and the resulting SSE.
pub fn solve_d(points: &[(f64, f64)], alpha: f64, c: f64) -> (f64, f64) {
    let (mut num, mut den) = (0.0, 0.0);
    for &(n, e) in points {
        let b = n.powf(-alpha);
        num += b * (e - c);
        den += b * b;
    }
    let d = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
    let sse = points.iter().map(|&(n, e)| (e - d * n.powf(-alpha) - c).powi(2)).sum();
    (d, sse)
}

fn check_points(points: &[(f64, f64)]) -> Result<f64, OptimizeError> {
    if points.len() < 3 {
        return Err(OptimizeError::InsufficientPoints(points.len()));
    }
    for &(n, e) in points {
        if !(n >= 1.0 && n.is_finite()) || !(e > 0.0 && e < 1.0) {
            return Err(OptimizeError::InvalidPoint { n, e });
        }
    }
    let first = points[0].0;
    if points.iter().all(|&(n, _)| n == first) {
        return Err(OptimizeError::DegenerateFit);
    }
    Ok(points.iter().map(|&(_, e)| e).fold(f64::INFINITY, f64::min))
}

/// Fits the curve to `(n, error)` points: a grid over alpha and C with D in
/// closed form, then one pass at ten times the resolution around the best
/// grid cell.
pub fn fit_scaling_law(points: &[(f64, f64)]) -> Result<ScalingLawParams, OptimizeError> {
    let min_e = check_points(points)?;
    let c_step = min_e / C_STEPS as f64;
    let mut best = ScalingLawParams { coeff_d: 0.0, alpha: ALPHA_RANGE[0], transfer_gap_c: 0.0, fit_sse: f64::INFINITY };
    let consider = |alpha: f64, c: f64, best: &mut ScalingLawParams| {
        let (d, sse) = solve_d(points, alpha, c);
        if sse < best.fit_sse {
            *best = ScalingLawParams { coeff_d: d, alpha, transfer_gap_c: c, fit_sse: sse };
        }
    };
    let alpha_steps = ((ALPHA_RANGE[1] - ALPHA_RANGE[0]) / ALPHA_STEP).round() as usize;
    for i in 0..=alpha_steps {
        let alpha = ALPHA_RANGE[0] + i as f64 * ALPHA_STEP;
        for j in 0..C_STEPS {
            consider(alpha, j as f64 * c_step, &mut best);
        }
    }
    let (a0, c0) = (best.alpha, best.transfer_gap_c);
    let r = REFINE as i64;
    for i in -r..=r {
        let alpha = a0 + i as f64 * ALPHA_STEP / REFINE as f64;
        if !(ALPHA_RANGE[0]..=ALPHA_RANGE[1]).contains(&alpha) {
            continue;
        }
        for j in -r..=r {
            let c = c0 + j as f64 * c_step / REFINE as f64;
            if c < 0.0 || c >= min_e {
                continue;
            }
            consider(alpha, c, &mut best);
        }
    }
    Ok(best)
}

/// Smallest data size whose predicted error is at most `1 - v_star`.
pub fn estimate_data_requirement(params: &ScalingLawParams, v_star: f64) -> Result<u64, OptimizeError> {
    let e_star = 1.0 - v_star;
    let gap = e_star - params.transfer_gap_c;
    // e* within rounding of C counts as the asymptote.
    if gap <= 1e-12 {
        return Err(OptimizeError::Unreachable { e_star, transfer_gap_c: params.transfer_gap_c });
    }
    let x = (params.coeff_d / gap).powf(1.0 / params.alpha);
    if !x.is_finite() {
        return Err(OptimizeError::Unreachable { e_star, transfer_gap_c: params.transfer_gap_c });
    }
    // Values a rounding error above an integer (64.000000001) are that integer.
    let near = x.round();
    let n = if (x - near).abs() <= 1e-9 * near.max(1.0) { near } else { x.ceil() };
    Ok((n as u64).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law_points(d: f64, a: f64, c: f64) -> Vec<(f64, f64)> {
        [100.0, 316.0, 1000.0, 3162.0, 10000.0, 31623.0, 100000.0].iter().map(|&n| (n, d * f64::powf(n, -a) + c)).collect()
    }

    #[test]
    fn noiseless_recovery() {
        let p = fit_scaling_law(&law_points(0.8, 0.5, 0.05)).unwrap();
        assert!((p.alpha - 0.5).abs() <= 0.02, "{p:?}");
        assert!((p.transfer_gap_c - 0.05).abs() <= 0.005, "{p:?}");
        assert!((p.coeff_d - 0.8).abs() <= 0.04, "{p:?}");
    }

    #[test]
    fn too_few_or_flat_points() {
        assert!(matches!(fit_scaling_law(&[(10.0, 0.5), (20.0, 0.4)]), Err(OptimizeError::InsufficientPoints(2))));
        assert!(matches!(fit_scaling_law(&[(10.0, 0.5), (10.0, 0.4), (10.0, 0.3)]), Err(OptimizeError::DegenerateFit)));
        let flat = fit_scaling_law(&[(10.0, 0.3), (100.0, 0.3), (1000.0, 0.3), (10000.0, 0.3)]).unwrap();
        assert!(flat.alpha < 0.1 && flat.coeff_d < 0.01 && (flat.transfer_gap_c - 0.3).abs() < 0.005, "{flat:?}");
    }

    #[test]
    fn hand_inverted_requirement() {
        let p = ScalingLawParams::new(0.8, 0.5, 0.05);
        assert_eq!(estimate_data_requirement(&p, 0.85).unwrap(), 64);
        assert!(matches!(estimate_data_requirement(&p, 0.95), Err(OptimizeError::Unreachable { .. })));
        // n* falls toward 1 as alpha grows.
        let ns: Vec<u64> = [1.0, 10.0, 100.0, 1e6].iter().map(|&a| estimate_data_requirement(&ScalingLawParams::new(0.8, a, 0.05), 0.85).unwrap()).collect();
        assert!(ns.windows(2).all(|w| w[0] >= w[1]), "{ns:?}");
        assert!(ns[3] <= 2, "{ns:?}");
    }

    #[test]
    fn inversion_meets_target() {
        for (d, a, c, v) in [(0.8, 0.5, 0.05, 0.85), (1.3, 0.31, 0.01, 0.8), (0.2, 1.7, 0.1, 0.88)] {
            let p = ScalingLawParams::new(d, a, c);
            let n = estimate_data_requirement(&p, v).unwrap() as f64;
            assert!(p.predict(n) <= 1.0 - v + 1e-12);
            if n > 1.0 {
                assert!(p.predict(n - 1.0) > 1.0 - v - 1e-12);
            }
        }
    }
}
