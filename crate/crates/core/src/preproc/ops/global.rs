use serde_json::json;

use super::defaults;
use crate::preproc::params::check_probability_vector;
use crate::preproc::{Layer, OpCall, OpError, Operation, ParamKind, ParamSchema, Params, ParamsExt, SceneContext};
use crate::rng::{categorical, uniform, Stream};
use crate::scene::{AugmentedScene, Weather, WeatherKind};

const PARAMETERS: &[&str] = &["weather", "time", "lighting"];
const WEATHER_NAMES: &[&str] = &["rain", "sun", "snow"];

/// Layer 4: randomizes one global parameter (weather, time of day or
/// ambient lighting).
pub struct RandomizeGlobal;

fn categories(params: &Params) -> Vec<WeatherKind> {
    match params.texts("categories") {
        Some(names) => names.iter().filter_map(|n| WeatherKind::parse(n)).collect(),
        None => WeatherKind::DEFAULT_ORDER.to_vec(),
    }
}

impl Operation for RandomizeGlobal {
    fn name(&self) -> &str {
        "randomize_global"
    }

    fn layer(&self) -> Layer {
        Layer::GlobalVariation
    }

    fn schema(&self) -> Vec<ParamSchema> {
        vec![
            ParamSchema::required("parameter", ParamKind::Choice { values: PARAMETERS }, "global parameter to randomize"),
            ParamSchema::new("probabilities", ParamKind::ProbabilityVector, "weather: per-category probabilities"),
            ParamSchema::new("categories", ParamKind::ChoiceList { values: WEATHER_NAMES }, "weather: category order (default rain, sun, snow)"),
            ParamSchema::new("intensity", ParamKind::Range { min: 0.0, max: 1.0 }, "weather: intensity range"),
            ParamSchema::new("range", ParamKind::Range { min: 0.0, max: 24.0 }, "time: hours; lighting: ambient level"),
        ]
    }

    fn check(&self, params: &Params) -> Result<(), (String, String)> {
        let parameter = params.text("parameter").unwrap_or_default();
        if parameter != "weather" {
            for key in ["probabilities", "categories", "intensity"] {
                if params.contains_key(key) {
                    return Err((key.into(), format!("only applies to weather, not {parameter}")));
                }
            }
        }
        if parameter == "lighting" && params.range_of("range").is_some_and(|r| r[1] > 1.0) {
            return Err(("range".into(), "ambient level lies in [0, 1]".into()));
        }
        if parameter == "weather" && params.contains_key("range") {
            return Err(("range".into(), "use intensity for weather".into()));
        }
        if let Some(p) = params.numbers("probabilities") {
            let n = categories(params).len();
            if p.len() != n {
                return Err(("probabilities".into(), format!("{} probabilities for {n} categories", p.len())));
            }
        }
        Ok(())
    }

    fn perform(&self, scene: &mut AugmentedScene, _: &SceneContext, params: &Params, _: OpCall, rng: &mut Stream) -> Result<serde_json::Value, OpError> {
        let g = &mut scene.global;
        let out = match params.text("parameter").unwrap_or_default() {
            "weather" => {
                let cats = categories(params);
                let probs = match params.numbers("probabilities") {
                    Some(p) => {
                        check_probability_vector(&p).map_err(OpError::InvalidProbabilityVector)?;
                        if p.len() != cats.len() {
                            return Err(OpError::InvalidProbabilityVector(format!("{} values for {} categories", p.len(), cats.len())));
                        }
                        p
                    }
                    None => vec![1.0 / cats.len() as f64; cats.len()],
                };
                let kind = cats[categorical(rng, &probs)];
                let range = params.range_or("intensity", defaults::WEATHER_INTENSITY);
                g.weather = Weather { kind, intensity: uniform(rng, range[0], range[1]) };
                json!({ "parameter": "weather", "probabilities": probs, "weather": kind.name(), "intensity": g.weather.intensity })
            }
            "time" => {
                let range = params.range_or("range", defaults::TIME_OF_DAY);
                g.time_of_day = uniform(rng, range[0], range[1]).rem_euclid(24.0);
                json!({ "parameter": "time", "range": range, "time_of_day": g.time_of_day })
            }
            _ => {
                let range = params.range_or("range", defaults::AMBIENT);
                g.ambient_level = uniform(rng, range[0], range[1]);
                json!({ "parameter": "lighting", "range": range, "ambient_level": g.ambient_level })
            }
        };
        scene.global = std::mem::take(&mut scene.global).normalized();
        Ok(out)
    }
}
