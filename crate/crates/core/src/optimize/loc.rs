//! The learn / optimize / collect loop and its performance oracles.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{decide_action, fit_scaling_law, update_policy, sample_policy, Decision, LocConfig, OptimizeError, Policy, ScalingLawParams, SearchSpace};
use crate::capture::{collect_data, CameraIntrinsics, MANIFEST_FILE};
use crate::preproc::Pipeline;
use crate::rng::{Stream, StreamKey};
use crate::scene::SceneSpecification;

/// Maps a policy and a dataset size to a score in `[0, 1]`.
pub trait PerformanceOracle {
    fn score(&mut self, policy: &Policy, size: u64, iteration: usize) -> Result<f64, OptimizeError>;
}

/// Analytic oracle: `1 - (D n^-alpha + C)` plus Gaussian noise, clamped.
/// The policy has no influence on the score.
#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    pub law: ScalingLawParams,
    noise: Normal<f64>,
    rng: Stream,
}

impl SyntheticOracle {
    pub fn new(law: ScalingLawParams, noise_sd: f64, seed: u64) -> Result<Self, OptimizeError> {
        let noise = Normal::new(0.0, noise_sd).map_err(|e| OptimizeError::Config(format!("noise_sd {noise_sd}: {e}")))?;
        Ok(Self { law, noise, rng: StreamKey::new(seed).with_str("oracle").stream() })
    }
}

impl PerformanceOracle for SyntheticOracle {
    fn score(&mut self, _: &Policy, size: u64, _: usize) -> Result<f64, OptimizeError> {
        let v = 1.0 - self.law.predict(size as f64) + self.noise.sample(&mut self.rng);
        Ok(v.clamp(0.0, 1.0))
    }
}

/// Builds a dataset for a policy and returns the path of its manifest.
pub trait DatasetFactory {
    fn build(&mut self, policy: &Policy, size: u64, iteration: usize) -> Result<PathBuf, OptimizeError>;
}

/// Runs the policy's pre-processing pipeline over fixed scenes and captures
/// the result. `size` is the number of variations per scene.
#[derive(Debug, Clone)]
pub struct PipelineFactory {
    pub scenes: Vec<SceneSpecification>,
    pub space: SearchSpace,
    pub intrinsics: CameraIntrinsics,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub workers: usize,
}

impl DatasetFactory for PipelineFactory {
    fn build(&mut self, policy: &Policy, size: u64, iteration: usize) -> Result<PathBuf, OptimizeError> {
        let seed = StreamKey::new(self.seed).with_str("dataset").with_u64(iteration as u64).seed64();
        let mut pipeline = Pipeline::new(seed);
        for spec in policy.to_specs(&self.space) {
            pipeline.add(spec).map_err(|e| OptimizeError::SearchSpace(e.to_string()))?;
        }
        let run = pipeline.run(&self.scenes, size as usize, self.workers).map_err(|e| OptimizeError::Oracle(e.to_string()))?;
        let dir = self.out_dir.join(format!("iter_{iteration:03}"));
        collect_data(&run.scenes, &self.intrinsics, &dir, self.workers).map_err(|e| OptimizeError::Oracle(e.to_string()))?;
        Ok(dir.join(MANIFEST_FILE))
    }
}

/// Builds a dataset, runs `command... <manifest path>` and reads one float
/// from its standard output.
pub struct ExternalCommandOracle<F> {
    pub command: Vec<String>,
    pub factory: F,
}

impl<F: DatasetFactory> PerformanceOracle for ExternalCommandOracle<F> {
    fn score(&mut self, policy: &Policy, size: u64, iteration: usize) -> Result<f64, OptimizeError> {
        let manifest = self.factory.build(policy, size, iteration)?;
        let (program, args) = self.command.split_first().ok_or_else(|| OptimizeError::Config("empty oracle command".into()))?;
        let out = Command::new(program).args(args).arg(&manifest).output().map_err(|e| OptimizeError::Io(program.clone(), e))?;
        if !out.status.success() {
            return Err(OptimizeError::Oracle(format!("`{program}` exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr).trim())));
        }
        let text = String::from_utf8_lossy(&out.stdout);
        text.trim().parse::<f64>().map_err(|e| OptimizeError::Oracle(format!("expected one float on stdout, got {:?}: {e}", text.trim())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocIterationRecord {
    pub iteration: usize,
    pub size: u64,
    pub score: f64,
    /// Present once the current setting has three or more points.
    pub fitted: Option<ScalingLawParams>,
    pub decision: Decision,
    pub policy: Policy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LocStatus {
    Reached,
    BudgetExhausted,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocOutcome {
    pub status: LocStatus,
    pub history: Vec<LocIterationRecord>,
    /// Index into `history` of the best score seen.
    pub best: usize,
}

impl LocOutcome {
    pub fn best_record(&self) -> &LocIterationRecord {
        &self.history[self.best]
    }

    /// `Ok(self)` when the target was reached, else `BudgetExhausted`.
    pub fn into_result(self, v_star: f64) -> Result<Self, OptimizeError> {
        match self.status {
            LocStatus::Reached => Ok(self),
            LocStatus::BudgetExhausted => Err(OptimizeError::BudgetExhausted {
                iterations: self.history.len(),
                best_score: self.best_record().score,
                v_star,
            }),
        }
    }
}

// Keeps fitted errors strictly inside (0, 1).
const ERROR_FLOOR: f64 = 1e-6;

/// Runs the loop until the score reaches `v_star` or the iteration budget
/// runs out. Sizes double until three points share a setting; after that
/// each fit decides. A setting change re-samples the policy and starts a
/// fresh curve. Every record is written to `history` as one JSON line.
pub fn run_loc_loop(
    oracle: &mut dyn PerformanceOracle,
    config: &LocConfig,
    space: &SearchSpace,
    seed: u64,
    mut history: Option<&mut dyn Write>,
) -> Result<LocOutcome, OptimizeError> {
    config.validate()?;
    space.validate()?;
    let mut rng = StreamKey::new(seed).with_str("loc").stream();
    let mut policy = Policy { data_size_target: config.n_0, ..sample_policy(space, &mut rng) };
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut records: Vec<LocIterationRecord> = Vec::new();
    let mut best = 0;
    let mut size = config.n_0;

    for t in 1..=config.max_iterations {
        let score = oracle.score(&policy, size, t)?;
        if !(0.0..=1.0).contains(&score) {
            return Err(OptimizeError::Oracle(format!("score {score} outside [0, 1]")));
        }
        points.push((size as f64, (1.0 - score).clamp(ERROR_FLOOR, 1.0 - ERROR_FLOOR)));
        let fitted = if points.len() >= 3 { fit_scaling_law(&points).ok() } else { None };
        let decision = match &fitted {
            Some(p) => decide_action(p, config),
            None => Decision::IncreaseSize(size.saturating_mul(2)),
        };
        let record = LocIterationRecord { iteration: t, size, score, fitted, decision, policy: policy.clone() };
        if let Some(w) = history.as_deref_mut() {
            let line = serde_json::to_string(&record).expect("records serialize");
            writeln!(w, "{line}").map_err(|e| OptimizeError::Io("history".into(), e))?;
        }
        if records.is_empty() || score > records[best].score {
            best = records.len();
        }
        records.push(record);
        if score >= config.v_star {
            return Ok(LocOutcome { status: LocStatus::Reached, history: records, best });
        }

        let wanted = match decision {
            Decision::IncreaseSize(n) => n,
            Decision::ChangeSetting => {
                points.clear();
                size
            }
        };
        size = config.next_size(size, wanted);
        policy = update_policy(&policy, decision, space, &mut rng);
        policy.data_size_target = size;
    }
    Ok(LocOutcome { status: LocStatus::BudgetExhausted, history: records, best })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OracleConfig {
    Synthetic {
        coeff_d: f64,
        alpha: f64,
        transfer_gap_c: f64,
        #[serde(default)]
        noise_sd: f64,
    },
    ExternalCommand {
        command: Vec<String>,
        /// Scene file or directory.
        scenes: PathBuf,
        /// Where per-iteration datasets go.
        out: PathBuf,
        #[serde(default = "d_side")]
        width: u32,
        #[serde(default = "d_side")]
        height: u32,
        /// Degrees.
        #[serde(default = "d_hfov")]
        hfov: f64,
        #[serde(default = "d_workers")]
        workers: usize,
    },
}

fn d_side() -> u32 {
    128
}
fn d_hfov() -> f64 {
    90.0
}
fn d_workers() -> usize {
    1
}

/// The optimizer config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    #[serde(flatten)]
    pub loop_config: LocConfig,
    #[serde(default)]
    pub seed: u64,
    /// JSON-lines history path.
    #[serde(default)]
    pub history: Option<PathBuf>,
    /// Asset for the default search space.
    #[serde(default)]
    pub asset: Option<String>,
    #[serde(default)]
    pub obstacle_asset: Option<String>,
    #[serde(default)]
    pub search_space: Option<SearchSpace>,
    pub oracle: OracleConfig,
}

impl OptimizerConfig {
    pub fn space(&self) -> SearchSpace {
        self.search_space.clone().unwrap_or_else(|| {
            SearchSpace::default_for(self.asset.as_deref().unwrap_or("landing_pad"), self.obstacle_asset.as_deref())
        })
    }

    /// History path, defaulting to `loc_history.jsonl` beside the config.
    pub fn history_path(&self, config_dir: &Path) -> PathBuf {
        config_dir.join(self.history.clone().unwrap_or_else(|| PathBuf::from("loc_history.jsonl")))
    }

    pub fn oracle(&self, config_dir: &Path) -> Result<Box<dyn PerformanceOracle>, OptimizeError> {
        match &self.oracle {
            OracleConfig::Synthetic { coeff_d, alpha, transfer_gap_c, noise_sd } => {
                let law = ScalingLawParams::new(*coeff_d, *alpha, *transfer_gap_c);
                Ok(Box::new(SyntheticOracle::new(law, *noise_sd, self.seed)?))
            }
            OracleConfig::ExternalCommand { command, scenes, out, width, height, hfov, workers } => {
                if command.is_empty() {
                    return Err(OptimizeError::Config("oracle command is empty".into()));
                }
                let scenes = crate::scene::load_scene_specs(config_dir.join(scenes)).map_err(|e| OptimizeError::Config(e.to_string()))?;
                let intrinsics =
                    CameraIntrinsics::new(*width, *height, hfov.to_radians()).map_err(|e| OptimizeError::Config(e.to_string()))?;
                let factory = PipelineFactory {
                    scenes,
                    space: self.space(),
                    intrinsics,
                    out_dir: config_dir.join(out),
                    seed: self.seed,
                    workers: (*workers).max(1),
                };
                Ok(Box::new(ExternalCommandOracle { command: command.clone(), factory }))
            }
        }
    }
}

/// Reads and validates an optimizer config file.
pub fn load_config(path: &Path) -> Result<OptimizerConfig, OptimizeError> {
    let text = std::fs::read_to_string(path).map_err(|e| OptimizeError::Io(path.display().to_string(), e))?;
    let config: OptimizerConfig = serde_json::from_str(&text).map_err(|e| OptimizeError::Config(format!("{}: {e}", path.display())))?;
    config.loop_config.validate()?;
    config.space().validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(c: f64, seed: u64) -> SyntheticOracle {
        SyntheticOracle::new(ScalingLawParams::new(0.8, 0.5, c), 0.005, seed).unwrap()
    }

    #[test]
    fn reaches_target_with_analytic_oracle() {
        let space = SearchSpace::default_for("landing_pad", None);
        let cfg = LocConfig::new(0.9);
        let mut sink = Vec::new();
        let out = run_loc_loop(&mut synthetic(0.02, 3), &cfg, &space, 3, Some(&mut sink)).unwrap();
        assert_eq!(out.status, LocStatus::Reached);
        assert!(out.history.windows(2).all(|w| w[0].size < w[1].size));
        let lines: Vec<LocIterationRecord> =
            String::from_utf8(sink).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines, out.history);
    }

    #[test]
    fn high_floor_always_changes_setting() {
        let space = SearchSpace::default_for("landing_pad", None);
        let mut cfg = LocConfig::new(0.9);
        cfg.max_iterations = 9;
        let out = run_loc_loop(&mut synthetic(0.3, 1), &cfg, &space, 1, None).unwrap();
        assert_eq!(out.status, LocStatus::BudgetExhausted);
        let fitted: Vec<_> = out.history.iter().filter(|r| r.fitted.is_some()).collect();
        assert!(!fitted.is_empty());
        assert!(fitted.iter().all(|r| r.decision == Decision::ChangeSetting));
        assert!(matches!(out.into_result(0.9), Err(OptimizeError::BudgetExhausted { iterations: 9, .. })));
    }

    #[test]
    fn single_iteration_budget() {
        let space = SearchSpace::default_for("landing_pad", None);
        let mut cfg = LocConfig::new(0.99);
        cfg.max_iterations = 1;
        let out = run_loc_loop(&mut synthetic(0.02, 0), &cfg, &space, 0, None).unwrap();
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.status, LocStatus::BudgetExhausted);
    }

    #[test]
    fn config_parses_with_defaults() {
        let c: OptimizerConfig = serde_json::from_str(
            r#"{"v_star": 0.9, "oracle": {"kind": "synthetic", "coeff_d": 0.8, "alpha": 0.5, "transfer_gap_c": 0.02}}"#,
        )
        .unwrap();
        assert_eq!(c.loop_config.max_iterations, super::super::defaults::MAX_ITERATIONS);
        assert!(matches!(c.oracle, OracleConfig::Synthetic { noise_sd, .. } if noise_sd == 0.0));
    }
}
