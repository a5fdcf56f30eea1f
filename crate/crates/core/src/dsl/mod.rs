//! Action-prompt scripts: the one-place interface over both pipelines.
//!
//! A script is a sequence of prompts such as
//!
//! ```text
//! pre_processing_pipeline.random_weather (1, scene="SEA", p=[0.6, 0.3, 0.1])
//! collect_data()
//! post_processing_pipeline.random_erasing (0.5)
//! ```
//!
//! Pre-processing prompts come first, then at most one `collect_data()`,
//! then post-processing prompts. Blank lines and `#` comments are ignored.

mod bind;
mod parser;

use serde::Serialize;

pub use bind::{bind_script, bind_script_with, dry_run, parse_distance, BoundScript, CaptureRequest, DryRunReport, FACADES};
pub use parser::{parse_prompt, parse_prompt_with_warnings, ActionPrompt, Target, Value};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DslError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{line}:{column}: unknown target `{target}`")]
    UnknownTarget { line: usize, column: usize, target: String },
    #[error("{line}:{column}: unterminated string")]
    UnterminatedString { line: usize, column: usize },
    #[error("line {line}: {message}")]
    PhaseViolation { line: usize, message: String },
    #[error("line {line}: collect_data() appears more than once")]
    DuplicateCollect { line: usize },
    #[error("line {line}: unknown method `{method}`")]
    UnknownMethod { line: usize, method: String },
    #[error("line {line}: invalid parameters in `{source_text}`: {detail}")]
    InvalidParams { line: usize, source_text: String, detail: String },
    #[error("line {line}: asset `{asset}` is not in the catalog of any targeted scene")]
    UnknownAsset { line: usize, asset: String },
}

impl DslError {
    /// Script line the error points at.
    pub fn line(&self) -> usize {
        match self {
            DslError::Syntax { line, .. }
            | DslError::UnknownTarget { line, .. }
            | DslError::UnterminatedString { line, .. }
            | DslError::PhaseViolation { line, .. }
            | DslError::DuplicateCollect { line }
            | DslError::UnknownMethod { line, .. }
            | DslError::InvalidParams { line, .. }
            | DslError::UnknownAsset { line, .. } => *line,
        }
    }

    /// 1-based column for lexical and syntax errors.
    pub fn column(&self) -> Option<usize> {
        match self {
            DslError::Syntax { column, .. } | DslError::UnknownTarget { column, .. } | DslError::UnterminatedString { column, .. } => Some(*column),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScriptPrompt {
    pub prompt: ActionPrompt,
    /// Script line where the prompt starts.
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StrategyScript {
    pub prompts: Vec<ScriptPrompt>,
    /// Index of the `collect_data()` prompt.
    pub boundary: Option<usize>,
    pub warnings: Vec<String>,
}

impl StrategyScript {
    pub fn pre(&self) -> impl Iterator<Item = &ScriptPrompt> {
        self.prompts.iter().filter(|p| p.prompt.target == Target::PreProcessing)
    }

    pub fn post(&self) -> impl Iterator<Item = &ScriptPrompt> {
        self.prompts.iter().filter(|p| p.prompt.target == Target::PostProcessing)
    }

    /// One prompt per line in canonical form.
    pub fn pretty(&self) -> String {
        self.prompts.iter().map(|p| format!("{}\n", p.prompt)).collect()
    }
}

/// Parses a whole script and checks the phase order.
pub fn parse_strategy_script(text: &str) -> Result<StrategyScript, DslError> {
    let mut script = StrategyScript::default();
    for (line, logical) in parser::logical_lines(text) {
        let (prompts, warnings) = parser::parse_logical_line(&logical, line)?;
        script.warnings.extend(warnings);
        for (prompt, line) in prompts {
            let index = script.prompts.len();
            match prompt.target {
                Target::Bare => {
                    if script.boundary.is_some() {
                        return Err(DslError::DuplicateCollect { line });
                    }
                    script.boundary = Some(index);
                }
                Target::PreProcessing if script.boundary.is_some() => {
                    return Err(DslError::PhaseViolation { line, message: format!("pre-processing `{}` after collect_data()", prompt.method) });
                }
                Target::PostProcessing if script.boundary.is_none() => {
                    return Err(DslError::PhaseViolation { line, message: format!("post-processing `{}` before collect_data()", prompt.method) });
                }
                _ => {}
            }
            script.prompts.push(ScriptPrompt { prompt, line });
        }
    }
    Ok(script)
}
