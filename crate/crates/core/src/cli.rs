//! Batch commands behind the `asda` binary: generate, optimize and stats.
//!
//! Each command returns a typed result; [`ExitStatus`] maps outcomes to
//! process exit codes (0 success, 1 fatal, 2 partial, 3 budget exhausted).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::capture::{collect_data, write_dataset, CameraIntrinsics, CaptureError, FrameAnnotation, Manifest, MANIFEST_FILE, PROVENANCE_FILE};
use crate::capture::VariationProvenance;
use crate::dsl::{bind_script, dry_run, parse_strategy_script, DslError};
use crate::optimize::{load_config, run_loc_loop, LocOutcome, LocStatus, OptimizeError};
use crate::postproc::{postproc_run, AugmentError};
use crate::preproc::PipelineError;
use crate::scene::{load_scene_specs, SceneError};

pub const DEFAULT_SIDE: u32 = 256;
pub const DEFAULT_HFOV_DEG: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Fatal = 1,
    Partial = 2,
    BudgetExhausted = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// DSL errors carry the script path so messages read `file:line:column: ...`.
    #[error("{}", dsl_message(path, source))]
    Dsl { path: String, source: DslError },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Capture(#[from] CaptureError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error("no usable manifest in {path}: {detail}")]
    MissingManifest { path: String, detail: String },
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

fn dsl_message(path: &str, e: &DslError) -> String {
    let text = e.to_string();
    match e.column() {
        Some(_) => format!("{path}:{text}"),
        None => {
            let rest = text.strip_prefix(&format!("line {}: ", e.line())).unwrap_or(&text);
            format!("{path}:{}: {rest}", e.line())
        }
    }
}

/// Everything `generate` needs. Unset image options fall back to the
/// script's `collect_data(...)` keywords, then to 256x256 at 90 degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub script: PathBuf,
    pub scenes: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    /// Upper bound on variations per scene.
    pub max_variations: Option<usize>,
    pub width: Option<u32>,
    pub height: Option<u32>,
    /// Degrees.
    pub hfov: Option<f64>,
    pub workers: usize,
}

impl RunConfig {
    pub fn new(script: impl Into<PathBuf>, scenes: impl Into<PathBuf>, out: impl Into<PathBuf>, seed: u64) -> Self {
        Self {
            script: script.into(),
            scenes: scenes.into(),
            out: out.into(),
            seed,
            max_variations: None,
            width: None,
            height: None,
            hfov: None,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerateSummary {
    pub scenes: usize,
    pub variations: usize,
    pub failed_variations: usize,
    /// Pre-processing op applications across all variations.
    pub pre_ops_applied: usize,
    pub records: usize,
    pub augmented: usize,
    pub post_ops_applied: usize,
    pub failed_augmentations: usize,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl GenerateSummary {
    pub fn status(&self) -> ExitStatus {
        if self.failed_variations + self.failed_augmentations > 0 {
            ExitStatus::Partial
        } else {
            ExitStatus::Success
        }
    }
}

impl fmt::Display for GenerateSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenes:             {}", self.scenes)?;
        writeln!(f, "variations:         {} ({} failed)", self.variations, self.failed_variations)?;
        writeln!(f, "pre ops applied:    {}", self.pre_ops_applied)?;
        writeln!(f, "records written:    {}", self.records)?;
        writeln!(f, "augmented copies:   {} ({} failed)", self.augmented, self.failed_augmentations)?;
        writeln!(f, "post ops applied:   {}", self.post_ops_applied)?;
        writeln!(f, "warnings:           {}", self.warnings.len())?;
        write!(f, "wall time:          {:.2} s", self.wall_time.as_secs_f64())
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))
}

/// Runs pre-processing, capture and post-processing for one script.
pub fn cmd_generate(config: &RunConfig) -> Result<GenerateSummary, CliError> {
    let started = Instant::now();
    let dsl = |source| CliError::Dsl { path: config.script.display().to_string(), source };
    let text = read(&config.script)?;
    let specs = load_scene_specs(&config.scenes)?;
    // Dry run first: it parses, binds and checks assets against the scenes.
    let report = dry_run(&text, &specs).map_err(dsl)?;
    let script = parse_strategy_script(&text).map_err(dsl)?;
    let bound = bind_script(&script, config.seed).map_err(dsl)?;
    let mut warnings = report.warnings;
    let request = bound.capture.clone().unwrap_or_else(|| {
        warnings.push("script has no collect_data(); capturing with defaults".into());
        Default::default()
    });

    let mut variations = request.variations.unwrap_or(1);
    if let Some(cap) = config.max_variations {
        variations = variations.min(cap.max(1));
    }
    let width = config.width.or(request.width).unwrap_or(DEFAULT_SIDE);
    let height = config.height.or(request.height).unwrap_or(DEFAULT_SIDE);
    let hfov = config.hfov.or(request.hfov).unwrap_or(DEFAULT_HFOV_DEG);
    let intrinsics = CameraIntrinsics::new(width, height, hfov.to_radians())?;
    let workers = config.workers.max(1);

    let run = bound.pre.run(&specs, variations, workers)?;
    let pre_ops_applied = run.scenes.iter().flat_map(|s| &s.provenance).filter(|p| p.applied).count();
    let mut manifest = collect_data(&run.scenes, &intrinsics, &config.out, workers)?;
    if !run.failures.is_empty() {
        manifest.warnings.extend(run.failures.iter().map(|f| format!("variation failed: {f}")));
        write_dataset(&config.out, &mut manifest)?;
    }
    warnings.extend(manifest.warnings.iter().cloned());

    let (mut augmented, mut post_ops_applied, mut failed_augmentations) = (0, 0, 0);
    if !bound.post.is_empty() && request.copies > 0 {
        let report = postproc_run(&bound.post, &config.out, request.copies, workers)?;
        augmented = report.augmented.len();
        post_ops_applied = report.applications();
        failed_augmentations = report.failures.len();
        warnings.extend(report.failures.iter().map(|f| format!("augmentation failed for {}: {}", f.image, f.error)));
    }

    Ok(GenerateSummary {
        scenes: specs.len(),
        variations: run.scenes.len() + run.failures.len(),
        failed_variations: run.failures.len(),
        pre_ops_applied,
        records: manifest.records.len(),
        augmented,
        post_ops_applied,
        failed_augmentations,
        warnings,
        wall_time: started.elapsed(),
    })
}

#[derive(Debug, Clone)]
pub struct OptimizeSummary {
    pub outcome: LocOutcome,
    pub history_path: PathBuf,
    pub v_star: f64,
}

impl OptimizeSummary {
    pub fn status(&self) -> ExitStatus {
        match self.outcome.status {
            LocStatus::Reached => ExitStatus::Success,
            LocStatus::BudgetExhausted => ExitStatus::BudgetExhausted,
        }
    }

    /// One row per iteration: t, q_t, score, alpha, C, decision.
    pub fn table(&self) -> String {
        let mut s = format!("{:>3} {:>8} {:>8} {:>7} {:>7}  {}\n", "t", "q_t", "V", "alpha", "C", "decision");
        for r in &self.outcome.history {
            let (a, c) = match &r.fitted {
                Some(p) => (format!("{:.3}", p.alpha), format!("{:.4}", p.transfer_gap_c)),
                None => ("-".into(), "-".into()),
            };
            let _ = writeln!(s, "{:>3} {:>8} {:>8.4} {:>7} {:>7}  {}", r.iteration, r.size, r.score, a, c, r.decision.label());
        }
        s
    }
}

/// Runs the collection optimizer described by a config file and writes its
/// history as JSON lines. `history_override` replaces the configured path.
pub fn cmd_optimize(config_path: &Path, history_override: Option<&Path>) -> Result<OptimizeSummary, CliError> {
    let config = load_config(config_path)?;
    let dir = config_path.parent().unwrap_or(Path::new("."));
    let history_path = history_override.map(Path::to_path_buf).unwrap_or_else(|| config.history_path(dir));
    let mut oracle = config.oracle(dir)?;
    if let Some(parent) = history_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Io(parent.display().to_string(), e))?;
    }
    let file = std::fs::File::create(&history_path).map_err(|e| CliError::Io(history_path.display().to_string(), e))?;
    let mut writer = std::io::BufWriter::new(file);
    let outcome = run_loc_loop(oracle.as_mut(), &config.loop_config, &config.space(), config.seed, Some(&mut writer))?;
    std::io::Write::flush(&mut writer).map_err(|e| CliError::Io(history_path.display().to_string(), e))?;
    Ok(OptimizeSummary { outcome, history_path, v_star: config.loop_config.v_star })
}

/// Coarse time-of-day label used for diversity counts.
pub fn time_bucket(hour: f64) -> &'static str {
    match hour {
        h if h < 6.0 => "night",
        h if h < 12.0 => "morning",
        h if h < 18.0 => "afternoon",
        _ => "evening",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Combination {
    pub weather: String,
    pub time_bucket: String,
    pub variant: Option<usize>,
    pub region: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OpRate {
    pub applied: usize,
    pub total: usize,
}

impl OpRate {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.applied as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StatsReport {
    pub records: usize,
    pub augmented: usize,
    pub annotated_objects: usize,
    /// Distinct (weather, time bucket, variant, region) over main instances.
    pub combinations: BTreeSet<Combination>,
    pub pre_ops: BTreeMap<String, OpRate>,
    pub post_ops: BTreeMap<String, OpRate>,
    pub warnings: usize,
}

impl StatsReport {
    pub fn distinct_combinations(&self) -> usize {
        self.combinations.len()
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "records:              {}", self.records)?;
        writeln!(f, "augmented copies:     {}", self.augmented)?;
        writeln!(f, "annotated objects:    {}", self.annotated_objects)?;
        writeln!(f, "distinct combinations (weather, time, variant, region): {}", self.distinct_combinations())?;
        for (title, ops) in [("pre-processing", &self.pre_ops), ("post-processing", &self.post_ops)] {
            writeln!(f, "{title} op rates:")?;
            if ops.is_empty() {
                writeln!(f, "  (none)")?;
            }
            for (name, r) in ops {
                writeln!(f, "  {name:<28} {:>6}/{:<6} {:.3}", r.applied, r.total, r.rate())?;
            }
        }
        write!(f, "manifest warnings:    {}", self.warnings)
    }
}

/// Summarizes a generated dataset directory.
pub fn cmd_stats(dataset: &Path) -> Result<StatsReport, CliError> {
    let manifest_path = dataset.join(MANIFEST_FILE);
    let missing = |detail: String| CliError::MissingManifest { path: dataset.display().to_string(), detail };
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| missing(format!("{}: {e}", manifest_path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| missing(format!("{}: {e}", manifest_path.display())))?;

    let mut report = StatsReport {
        records: manifest.records.len(),
        augmented: manifest.augmented.len(),
        warnings: manifest.warnings.len(),
        ..Default::default()
    };
    for record in &manifest.records {
        let path = dataset.join(&record.annotation);
        let ann: FrameAnnotation = serde_json::from_str(&read(&path)?)
            .map_err(|e| CliError::Capture(CaptureError::Json(path.display().to_string(), e)))?;
        report.annotated_objects += ann.objects.len();
        for o in &ann.objects {
            report.combinations.insert(Combination {
                weather: ann.weather.clone(),
                time_bucket: time_bucket(ann.time_of_day).to_string(),
                variant: o.variant_index,
                region: o.anchor_region.clone(),
            });
        }
    }

    let prov_path = dataset.join(PROVENANCE_FILE);
    if prov_path.exists() {
        let prov: Vec<VariationProvenance> = serde_json::from_str(&read(&prov_path)?)
            .map_err(|e| CliError::Capture(CaptureError::Json(prov_path.display().to_string(), e)))?;
        for entry in prov.iter().flat_map(|v| &v.provenance) {
            let r = report.pre_ops.entry(entry.op.clone()).or_default();
            r.total += 1;
            r.applied += usize::from(entry.applied);
        }
    }
    // Post rates are per augmented copy: every copy was a chance for every op.
    let names: BTreeSet<&str> = manifest.augmented.iter().flat_map(|a| a.ops.iter().map(|o| o.op.as_str())).collect();
    for name in names {
        let applied = manifest.augmented.iter().filter(|a| a.ops.iter().any(|o| o.op == name)).count();
        report.post_ops.insert(name.to_string(), OpRate { applied, total: manifest.augmented.len() });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buckets() {
        assert_eq!(time_bucket(0.0), "night");
        assert_eq!(time_bucket(6.0), "morning");
        assert_eq!(time_bucket(17.99), "afternoon");
        assert_eq!(time_bucket(23.0), "evening");
    }

    #[test]
    fn stats_without_manifest() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(cmd_stats(dir.path()), Err(CliError::MissingManifest { .. })));
        std::fs::write(dir.path().join(MANIFEST_FILE), "{ not json").unwrap();
        let err = cmd_stats(dir.path()).unwrap_err();
        assert!(matches!(err, CliError::MissingManifest { .. }) && err.to_string().contains("manifest.json"));
    }

    #[test]
    fn stats_of_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new(0, CameraIntrinsics::new(16, 16, 1.0).unwrap());
        write_dataset(dir.path(), &mut m).unwrap();
        let r = cmd_stats(dir.path()).unwrap();
        assert_eq!((r.records, r.distinct_combinations(), r.augmented), (0, 0, 0));
    }
}
