//! Binding parsed prompts to pipeline operations.

use std::collections::BTreeMap;

use serde::Serialize;

use super::parser::{ActionPrompt, Target, Value};
use super::{parse_strategy_script, DslError, ScriptPrompt, StrategyScript};
use crate::postproc::{AugmentError, AugmentOpSpec, PostPipeline};
use crate::preproc::{OperationSpec, ParamKind, ParamSchema, ParamValue, Params, Pipeline, PipelineError, SceneFilter};
use crate::scene::SceneSpecification;

/// DSL method names and the core operation each binds to.
pub const FACADES: &[(&str, &str)] = &[
    ("generate_rand_variation", "generate_rand_variation"),
    ("distribute_asset", "distribute_assets"),
    ("distribute_asset_within_radius", "distribute_assets"),
    ("distribute_asset_over_area", "distribute_assets"),
    ("distribute_asset_over_amenity", "distribute_assets"),
    ("random_shadow", "random_shadow"),
    ("random_obstacle_over_asset", "random_obstacle_over_asset"),
    ("random_obstacle_in_FOV", "random_obstacle_in_fov"),
    ("random_weather", "randomize_global"),
    ("random_time", "randomize_global"),
    ("random_lighting", "randomize_global"),
    ("sample_location", "sample_trajectory_locations"),
    ("random_trajectory", "randomize_trajectory"),
];

const METERS_PER_MILE: f64 = 1609.344;

/// Converts `"200"`, `"12mi"`, `"2 km"` or `"30ft"` to meters. Text without
/// a suffix is in `default_unit`.
pub fn parse_distance(text: &str, default_unit: &str) -> Result<f64, String> {
    let t = text.trim();
    let split = t.find(|c: char| c.is_ascii_alphabetic()).unwrap_or(t.len());
    let (num, unit) = (t[..split].trim(), t[split..].trim());
    let value: f64 = num.parse().map_err(|_| format!("`{text}` is not a distance"))?;
    let unit = if unit.is_empty() { default_unit } else { unit };
    let factor = match unit.to_ascii_lowercase().as_str() {
        "m" | "meter" | "meters" => 1.0,
        "km" => 1000.0,
        "mi" | "mile" | "miles" => METERS_PER_MILE,
        "ft" | "feet" => 0.3048,
        other => return Err(format!("unknown distance unit `{other}`")),
    };
    if !value.is_finite() || value < 0.0 {
        return Err(format!("distance `{text}` must be >= 0"));
    }
    Ok(value * factor)
}

/// What `collect_data(...)` asked for. Unset fields fall back to the run
/// configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaptureRequest {
    pub variations: Option<usize>,
    pub width: Option<u32>,
    pub height: Option<u32>,
    /// Horizontal field of view, degrees.
    pub hfov: Option<f64>,
    /// Augmented copies written per record.
    pub copies: usize,
}

impl Default for CaptureRequest {
    fn default() -> Self {
        Self { variations: None, width: None, height: None, hfov: None, copies: 1 }
    }
}

#[derive(Debug)]
pub struct BoundScript {
    pub pre: Pipeline,
    /// Script line of each pre-processing op, parallel to `pre.ops()`.
    pub pre_lines: Vec<usize>,
    pub capture: Option<CaptureRequest>,
    pub post: PostPipeline,
    pub post_lines: Vec<usize>,
    pub warnings: Vec<String>,
}

fn to_param(v: &Value) -> ParamValue {
    match v {
        Value::Number(n) => ParamValue::Num(*n),
        Value::Str(s) | Value::Ident(s) => ParamValue::Str(s.clone()),
        Value::List(items) => ParamValue::List(items.iter().map(to_param).collect()),
    }
}

fn strings(v: &Value) -> Vec<String> {
    match v {
        Value::Str(s) | Value::Ident(s) => vec![s.trim().to_string()],
        Value::List(items) => items.iter().flat_map(strings).collect(),
        Value::Number(n) => vec![n.to_string()],
    }
}

struct Prompted<'a> {
    sp: &'a ScriptPrompt,
    probability: f64,
    filter: Option<SceneFilter>,
    params: Params,
}

impl Prompted<'_> {
    fn invalid(&self, detail: impl Into<String>) -> DslError {
        DslError::InvalidParams { line: self.sp.line, source_text: self.sp.prompt.to_string(), detail: detail.into() }
    }

    fn take(&mut self, key: &str) -> Option<ParamValue> {
        self.params.remove(key)
    }

    fn rename(&mut self, from: &str, to: &str) {
        if let Some(v) = self.params.remove(from) {
            self.params.insert(to.to_string(), v);
        }
    }
}

/// Splits probability, scene filter and keyword parameters off a prompt.
fn split_prompt<'a>(sp: &'a ScriptPrompt, with_filters: bool, warnings: &mut Vec<String>) -> Result<Prompted<'a>, DslError> {
    let p: &ActionPrompt = &sp.prompt;
    let mut out = Prompted { sp, probability: 1.0, filter: None, params: Params::new() };
    let mut positional = p.positional.iter();
    let positional_p = match positional.next() {
        Some(Value::Number(n)) => Some(*n),
        Some(other) => return Err(out.invalid(format!("positional argument {other} is not a probability"))),
        None => None,
    };
    if let Some(extra) = positional.next() {
        return Err(out.invalid(format!("unexpected positional argument {extra}")));
    }
    let keyword_p = match p.kwarg("probability") {
        Some(Value::Number(n)) => Some(*n),
        Some(other) => return Err(out.invalid(format!("probability {other} is not a number"))),
        None => None,
    };
    if let (Some(a), Some(b)) = (positional_p, keyword_p) {
        if a != b {
            warnings.push(format!("line {}: probability given as {a} and probability={b}; using {b}", sp.line));
        }
    }
    out.probability = keyword_p.or(positional_p).unwrap_or(1.0);
    if !(0.0..=1.0).contains(&out.probability) {
        return Err(out.invalid(format!("probability {} outside [0, 1]", out.probability)));
    }
    for (k, v) in &p.kwargs {
        match k.as_str() {
            "probability" => {}
            "scene" | "scenes" if with_filters => out.filter.get_or_insert_with(Default::default).scene_ids.extend(strings(v)),
            "scene_class" | "scene_classes" if with_filters => {
                out.filter.get_or_insert_with(Default::default).scene_classes.extend(strings(v))
            }
            _ => {
                out.params.insert(k.clone(), to_param(v));
            }
        }
    }
    Ok(out)
}

/// Coerces DSL-typed values to what the schema declares: quoted numbers to
/// numbers, unit strings to meters, scalars to degenerate ranges.
fn coerce(params: &mut Params, schema: &[ParamSchema], distance_units: &BTreeMap<&str, &str>) -> Result<(), String> {
    for s in schema {
        let Some(v) = params.get_mut(s.name) else { continue };
        match (&s.kind, &*v) {
            (ParamKind::Distance { default_unit }, ParamValue::Str(text)) => {
                let unit = distance_units.get(s.name).copied().unwrap_or(default_unit);
                *v = ParamValue::Num(parse_distance(text, unit).map_err(|e| format!("{}: {e}", s.name))?);
            }
            (ParamKind::Distance { .. }, ParamValue::Num(n)) => {
                if let Some(unit) = distance_units.get(s.name) {
                    *v = ParamValue::Num(parse_distance(&n.to_string(), unit).map_err(|e| format!("{}: {e}", s.name))?);
                }
            }
            (ParamKind::Number { .. } | ParamKind::Integer { .. }, ParamValue::Str(text)) => {
                if let Ok(n) = text.trim().parse::<f64>() {
                    *v = ParamValue::Num(n);
                }
            }
            (ParamKind::Range { .. }, ParamValue::Num(n)) => *v = ParamValue::List(vec![ParamValue::Num(*n), ParamValue::Num(*n)]),
            (ParamKind::Range { .. } | ParamKind::NumberList | ParamKind::ProbabilityVector, ParamValue::List(items)) => {
                let nums: Option<Vec<ParamValue>> = items
                    .iter()
                    .map(|i| match i {
                        ParamValue::Num(n) => Some(ParamValue::Num(*n)),
                        ParamValue::Str(s) => s.trim().parse().ok().map(ParamValue::Num),
                        ParamValue::List(_) => None,
                    })
                    .collect();
                if let Some(nums) = nums {
                    *v = ParamValue::List(nums);
                }
            }
            _ => {}
        }
    }
    Ok(())
}

#[derive(Default)]
struct Context {
    current_asset: Option<String>,
    nvariations: BTreeMap<String, f64>,
    /// Scene filter of the prompt that generated each asset's variants.
    asset_filters: BTreeMap<String, SceneFilter>,
}

impl Context {
    fn default_asset(&self, p: &mut Prompted<'_>) {
        if !p.params.contains_key("asset") {
            if let Some(a) = &self.current_asset {
                p.params.insert("asset".into(), ParamValue::Str(a.clone()));
            }
        }
    }

    /// `number` when given, else the variant count of the asset, else 1.
    fn total_count(&self, p: &mut Prompted<'_>) {
        let n = p.take("number").or_else(|| p.take("count"));
        if p.params.contains_key("total_count") || p.params.contains_key("count_per_region") {
            if let Some(n) = n {
                p.params.insert("total_count".into(), n);
            }
            return;
        }
        let asset = match p.params.get("asset") {
            Some(ParamValue::Str(a)) => a.trim().to_string(),
            _ => String::new(),
        };
        let v = n.unwrap_or_else(|| ParamValue::Num(self.nvariations.get(&asset).copied().unwrap_or(1.0)));
        p.params.insert("total_count".into(), v);
    }
}

fn pipeline_error(p: &Prompted<'_>, e: PipelineError) -> DslError {
    match e {
        PipelineError::UnknownOperation(op) => DslError::UnknownMethod { line: p.sp.line, method: op },
        other => p.invalid(other.to_string()),
    }
}

/// Turns one pre-processing prompt into core op specs.
fn bind_pre(prompted: Prompted<'_>, ctx: &mut Context, pipeline: &Pipeline) -> Result<Vec<OperationSpec>, DslError> {
    let mut p = prompted;
    let method = p.sp.prompt.method.clone();
    let mut units: BTreeMap<&str, &str> = BTreeMap::new();
    let mut extra = Vec::new();
    let mut halve_radius = false;
    let op = match method.as_str() {
        "generate_rand_variation" => {
            ctx.default_asset(&mut p);
            if let Some(ParamValue::Str(a)) = p.params.get("asset") {
                let a = a.trim().to_string();
                let n = match p.params.get("nvariations") {
                    Some(ParamValue::Num(n)) => *n,
                    _ => 1.0,
                };
                ctx.nvariations.insert(a.clone(), n);
                if let Some(f) = &p.filter {
                    ctx.asset_filters.insert(a.clone(), f.clone());
                }
                ctx.current_asset = Some(a);
            }
            "generate_rand_variation"
        }
        "distribute_asset_within_radius" => {
            ctx.default_asset(&mut p);
            let mode = match p.take("mode") {
                None => "scene".to_string(),
                Some(ParamValue::Str(m)) => match m.trim() {
                    "center" | "scene" => "scene".to_string(),
                    "region" => "region".to_string(),
                    other => return Err(p.invalid(format!("mode `{other}` is not center or region"))),
                },
                Some(other) => return Err(p.invalid(format!("mode {other} is not a string"))),
            };
            p.params.insert("center_mode".into(), ParamValue::Str(mode));
            p.params.insert("pattern".into(), ParamValue::Str("radius".into()));
            ctx.total_count(&mut p);
            "distribute_assets"
        }
        "distribute_asset_over_area" => {
            ctx.default_asset(&mut p);
            // "within 12 miles of each other": every pair stays within the
            // distance, so instances fall in a disk of half that radius. Bare
            // distances read as miles here.
            if p.params.contains_key("distance") {
                p.rename("distance", "radius");
                p.params.insert("pattern".into(), ParamValue::Str("radius".into()));
                p.params.insert("center_mode".into(), ParamValue::Str("scene".into()));
                units.insert("radius", "mi");
                halve_radius = true;
            }
            ctx.total_count(&mut p);
            "distribute_assets"
        }
        "distribute_asset_over_amenity" => {
            ctx.default_asset(&mut p);
            p.rename("type", "amenity");
            p.rename("number", "regions");
            if !p.params.contains_key("total_count") && !p.params.contains_key("count_per_region") {
                p.params.insert("count_per_region".into(), ParamValue::Num(1.0));
            }
            "distribute_assets"
        }
        "distribute_asset" | "distribute_assets" => {
            ctx.default_asset(&mut p);
            "distribute_assets"
        }
        "random_shadow" | "random_obstacle_over_asset" => {
            ctx.default_asset(&mut p);
            if method == "random_shadow" {
                "random_shadow"
            } else {
                "random_obstacle_over_asset"
            }
        }
        "random_obstacle_in_FOV" | "random_obstacle_in_fov" => "random_obstacle_in_fov",
        "random_weather" | "random_time" | "random_lighting" => {
            let parameter = &method["random_".len()..];
            p.rename("p", "probabilities");
            p.params.insert("parameter".into(), ParamValue::Str(parameter.to_string()));
            "randomize_global"
        }
        "sample_location" => {
            p.rename("asset", "container_class");
            if let Some(types) = p.take("types") {
                let mut t = OperationSpec::new("randomize_trajectory", p.probability).with("types", types);
                t.scene_filter = p.filter.clone();
                extra.push(t);
            }
            "sample_trajectory_locations"
        }
        "random_trajectory" => "randomize_trajectory",
        other if pipeline.operation(other).is_some() => {
            if matches!(other, "generate_rand_variation" | "random_shadow" | "random_obstacle_over_asset") {
                ctx.default_asset(&mut p);
            }
            other
        }
        _ => return Err(DslError::UnknownMethod { line: p.sp.line, method }),
    };
    // Unfiltered prompts about a generated asset target the scenes it was
    // generated for.
    // A bare sample_location follows the current asset the same way.
    if p.filter.is_none() {
        let asset = match (op, p.params.get("asset")) {
            ("sample_trajectory_locations", _) if !p.params.contains_key("container_class") => ctx.current_asset.clone(),
            ("sample_trajectory_locations", _) => None,
            (_, Some(ParamValue::Str(a))) => Some(a.trim().to_string()),
            _ => None,
        };
        p.filter = asset.and_then(|a| ctx.asset_filters.get(&a).cloned());
    }
    let schema = pipeline.operation(op).map(|o| o.schema()).unwrap_or_default();
    coerce(&mut p.params, &schema, &units).map_err(|e| p.invalid(e))?;
    if halve_radius {
        if let Some(ParamValue::Num(r)) = p.params.get_mut("radius") {
            *r /= 2.0;
        }
    }
    let mut spec = OperationSpec::new(op, p.probability);
    spec.scene_filter = p.filter.clone();
    spec.params = std::mem::take(&mut p.params);
    let mut specs = vec![spec];
    specs.extend(extra);
    for s in &specs {
        pipeline.validate(s).map_err(|e| pipeline_error(&p, e))?;
    }
    Ok(specs)
}

fn bind_capture(sp: &ScriptPrompt) -> Result<CaptureRequest, DslError> {
    let invalid = |detail: String| DslError::InvalidParams { line: sp.line, source_text: sp.prompt.to_string(), detail };
    if let Some(v) = sp.prompt.positional.first() {
        return Err(invalid(format!("collect_data takes keywords only, got {v}")));
    }
    let mut req = CaptureRequest::default();
    for (k, v) in &sp.prompt.kwargs {
        let n = match v {
            Value::Number(n) if *n >= 0.0 => *n,
            Value::Str(s) => s.trim().parse::<f64>().map_err(|_| invalid(format!("{k}: `{s}` is not a number")))?,
            other => return Err(invalid(format!("{k}: {other} is not a non-negative number"))),
        };
        match k.as_str() {
            "variations" | "nvariations" => req.variations = Some((n as usize).max(1)),
            "width" => req.width = Some(n as u32),
            "height" => req.height = Some(n as u32),
            "hfov" => req.hfov = Some(n),
            "copies" => req.copies = n as usize,
            other => return Err(invalid(format!("unknown collect_data keyword `{other}`"))),
        }
    }
    Ok(req)
}

/// Binds `script` onto the given pipelines, which carry the operation
/// registries and the master seed.
pub fn bind_script_with(script: &StrategyScript, mut pre: Pipeline, mut post: PostPipeline) -> Result<BoundScript, DslError> {
    let mut warnings = script.warnings.clone();
    let mut ctx = Context::default();
    let (mut pre_lines, mut post_lines, mut capture) = (Vec::new(), Vec::new(), None);
    for sp in &script.prompts {
        match sp.prompt.target {
            Target::Bare => capture = Some(bind_capture(sp)?),
            Target::PreProcessing => {
                let p = split_prompt(sp, true, &mut warnings)?;
                for spec in bind_pre(p, &mut ctx, &pre)? {
                    pre.add(spec).map_err(|e| DslError::InvalidParams { line: sp.line, source_text: sp.prompt.to_string(), detail: e.to_string() })?;
                    pre_lines.push(sp.line);
                }
            }
            Target::PostProcessing => {
                let mut p = split_prompt(sp, false, &mut warnings)?;
                let method = sp.prompt.method.clone();
                let Some(schema) = post.schema_of(&method) else {
                    return Err(DslError::UnknownMethod { line: sp.line, method });
                };
                coerce(&mut p.params, &schema, &BTreeMap::new()).map_err(|e| p.invalid(e))?;
                let mut spec = AugmentOpSpec::new(&method, p.probability);
                spec.params = std::mem::take(&mut p.params);
                post.add(spec).map_err(|e| match e {
                    AugmentError::UnknownOperation(m) => DslError::UnknownMethod { line: sp.line, method: m },
                    other => p.invalid(other.to_string()),
                })?;
                post_lines.push(sp.line);
            }
        }
    }
    Ok(BoundScript { pre, pre_lines, capture, post, post_lines, warnings })
}

/// Binds onto fresh pipelines with the built-in operations.
pub fn bind_script(script: &StrategyScript, master_seed: u64) -> Result<BoundScript, DslError> {
    bind_script_with(script, Pipeline::new(master_seed), PostPipeline::new(master_seed))
}

#[derive(Debug, Clone, Serialize)]
pub struct DryRunReport {
    pub prompts: usize,
    /// `line: op(probability) params` per bound op, in script order.
    pub pre_ops: Vec<String>,
    pub capture: Option<CaptureRequest>,
    pub post_ops: Vec<String>,
    pub warnings: Vec<String>,
}

/// Parses and binds `text`, then checks every referenced asset against the
/// catalogs of the scenes each op targets. Nothing is generated.
pub fn dry_run(text: &str, scenes: &[SceneSpecification]) -> Result<DryRunReport, DslError> {
    let script = parse_strategy_script(text)?;
    let bound = bind_script(&script, 0)?;
    let mut warnings = bound.warnings.clone();
    let mut pre_ops = Vec::new();
    for (spec, line) in bound.pre.ops().iter().zip(&bound.pre_lines) {
        let targets: Vec<&SceneSpecification> =
            scenes.iter().filter(|s| spec.scene_filter.as_ref().map_or(true, |f| f.matches(&s.scene_id, &s.scene_class))).collect();
        if !scenes.is_empty() {
            if targets.is_empty() {
                warnings.push(format!("line {line}: `{}` matches no loaded scene", spec.name));
            }
            for key in ["asset", "obstacle_asset"] {
                if let Some(ParamValue::Str(asset)) = spec.params.get(key) {
                    if !targets.is_empty() && !targets.iter().any(|s| s.asset(asset.trim()).is_some()) {
                        return Err(DslError::UnknownAsset { line: *line, asset: asset.clone() });
                    }
                }
            }
        }
        let params = serde_json::to_string(&spec.params).unwrap_or_default();
        pre_ops.push(format!("{line}: {}({}) {params}", spec.name, spec.probability));
    }
    let post_ops = bound
        .post
        .ops()
        .iter()
        .zip(&bound.post_lines)
        .map(|(s, line)| format!("{line}: {}({}) {}", s.name, s.probability, serde_json::to_string(&s.params).unwrap_or_default()))
        .collect();
    Ok(DryRunReport { prompts: script.prompts.len(), pre_ops, capture: bound.capture, post_ops, warnings })
}
