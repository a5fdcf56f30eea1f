//! Operation parameters and their declared schemas.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Num(f64),
    Str(String),
    List(Vec<ParamValue>),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Num(v) => write!(f, "{v}"),
            ParamValue::Str(s) => write!(f, "{s:?}"),
            ParamValue::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Num(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.to_string())
    }
}

impl<T: Into<ParamValue>> From<Vec<T>> for ParamValue {
    fn from(v: Vec<T>) -> Self {
        ParamValue::List(v.into_iter().map(Into::into).collect())
    }
}

pub type Params = BTreeMap<String, ParamValue>;

/// Builds a [`Params`] map from `(name, value)` pairs.
pub fn params<const N: usize>(pairs: [(&str, ParamValue); N]) -> Params {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamKind {
    Number { min: Option<f64>, max: Option<f64> },
    Integer { min: i64, max: Option<i64> },
    /// Length in meters; strings with unit suffixes are converted by the DSL.
    Distance { default_unit: &'static str },
    Text,
    Choice { values: &'static [&'static str] },
    /// List drawn from a fixed vocabulary; empty allowed.
    ChoiceList { values: &'static [&'static str] },
    TextList,
    NumberList,
    /// `[lo, hi]` with `lo <= hi`, bounded.
    Range { min: f64, max: f64 },
    ProbabilityVector,
    Flag,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSchema {
    pub name: &'static str,
    #[serde(flatten)]
    pub kind: ParamKind,
    pub required: bool,
    pub doc: &'static str,
}

impl ParamSchema {
    pub const fn new(name: &'static str, kind: ParamKind, doc: &'static str) -> Self {
        Self { name, kind, required: false, doc }
    }

    pub const fn required(name: &'static str, kind: ParamKind, doc: &'static str) -> Self {
        Self { name, kind, required: true, doc }
    }
}

pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

pub fn check_probability_vector(values: &[f64]) -> Result<(), String> {
    if values.is_empty() {
        return Err("empty probability vector".into());
    }
    if values.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err("probabilities must be non-negative".into());
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(format!("probabilities sum to {sum}, not 1"));
    }
    Ok(())
}

fn as_numbers(v: &ParamValue) -> Option<Vec<f64>> {
    match v {
        ParamValue::List(items) => items
            .iter()
            .map(|i| match i {
                ParamValue::Num(n) => Some(*n),
                _ => None,
            })
            .collect(),
        _ => None,
    }
}

fn as_strings(v: &ParamValue) -> Option<Vec<String>> {
    match v {
        ParamValue::List(items) => items
            .iter()
            .map(|i| match i {
                ParamValue::Str(s) => Some(s.trim().to_string()),
                _ => None,
            })
            .collect(),
        ParamValue::Str(s) => Some(vec![s.trim().to_string()]),
        _ => None,
    }
}

impl ParamKind {
    pub fn check(&self, v: &ParamValue) -> Result<(), String> {
        let num = |v: &ParamValue| match v {
            ParamValue::Num(n) if n.is_finite() => Ok(*n),
            other => Err(format!("expected a number, got {other}")),
        };
        match self {
            ParamKind::Number { min, max } => {
                let n = num(v)?;
                if min.is_some_and(|m| n < m) || max.is_some_and(|m| n > m) {
                    return Err(format!("{n} outside [{}, {}]", min.unwrap_or(f64::NEG_INFINITY), max.unwrap_or(f64::INFINITY)));
                }
                Ok(())
            }
            ParamKind::Integer { min, max } => {
                let n = num(v)?;
                if n.fract() != 0.0 {
                    return Err(format!("{n} is not an integer"));
                }
                if n < *min as f64 || max.is_some_and(|m| n > m as f64) {
                    return Err(format!("{n} out of range"));
                }
                Ok(())
            }
            ParamKind::Distance { .. } => {
                let n = num(v)?;
                if n < 0.0 {
                    return Err("distance must be >= 0".into());
                }
                Ok(())
            }
            ParamKind::Text => match v {
                ParamValue::Str(_) => Ok(()),
                other => Err(format!("expected a string, got {other}")),
            },
            ParamKind::Choice { values } => match v {
                ParamValue::Str(s) if values.contains(&s.trim()) => Ok(()),
                other => Err(format!("expected one of {values:?}, got {other}")),
            },
            ParamKind::ChoiceList { values } => {
                let items = as_strings(v).ok_or_else(|| format!("expected a list of strings, got {v}"))?;
                match items.iter().find(|s| !values.contains(&s.as_str())) {
                    Some(bad) => Err(format!("`{bad}` is not one of {values:?}")),
                    None => Ok(()),
                }
            }
            ParamKind::TextList => as_strings(v).map(|_| ()).ok_or_else(|| format!("expected a list of strings, got {v}")),
            ParamKind::NumberList => as_numbers(v).map(|_| ()).ok_or_else(|| format!("expected a list of numbers, got {v}")),
            ParamKind::Range { min, max } => {
                let xs = as_numbers(v).filter(|x| x.len() == 2).ok_or_else(|| format!("expected [lo, hi], got {v}"))?;
                if xs[0] > xs[1] || xs[0] < *min || xs[1] > *max {
                    return Err(format!("range [{}, {}] invalid within [{min}, {max}]", xs[0], xs[1]));
                }
                Ok(())
            }
            ParamKind::ProbabilityVector => {
                let xs = as_numbers(v).ok_or_else(|| format!("expected a list of probabilities, got {v}"))?;
                check_probability_vector(&xs)
            }
            ParamKind::Flag => match v {
                ParamValue::Num(n) if *n == 0.0 || *n == 1.0 => Ok(()),
                ParamValue::Str(s) if matches!(s.as_str(), "true" | "false") => Ok(()),
                other => Err(format!("expected a flag, got {other}")),
            },
        }
    }
}

/// Checks `params` against `schema`: unknown names, missing required names
/// and per-kind constraints. Returns the offending parameter name.
pub fn validate_params(schema: &[ParamSchema], params: &Params) -> Result<(), (String, String)> {
    for name in params.keys() {
        if !schema.iter().any(|s| s.name == name) {
            return Err((name.clone(), "unknown parameter".into()));
        }
    }
    for s in schema {
        match params.get(s.name) {
            Some(v) => s.kind.check(v).map_err(|e| (s.name.to_string(), e))?,
            None if s.required => return Err((s.name.to_string(), "required".into())),
            None => {}
        }
    }
    Ok(())
}

/// Typed accessors used by operation implementations.
pub trait ParamsExt {
    fn num(&self, name: &str) -> Option<f64>;
    fn text(&self, name: &str) -> Option<&str>;
    fn texts(&self, name: &str) -> Option<Vec<String>>;
    fn numbers(&self, name: &str) -> Option<Vec<f64>>;
    fn range_of(&self, name: &str) -> Option<[f64; 2]>;
    fn flag(&self, name: &str) -> Option<bool>;

    fn num_or(&self, name: &str, default: f64) -> f64 {
        self.num(name).unwrap_or(default)
    }

    fn count_or(&self, name: &str, default: usize) -> usize {
        self.num(name).map(|v| v.max(0.0) as usize).unwrap_or(default)
    }

    fn range_or(&self, name: &str, default: [f64; 2]) -> [f64; 2] {
        self.range_of(name).unwrap_or(default)
    }
}

impl ParamsExt for Params {
    fn num(&self, name: &str) -> Option<f64> {
        match self.get(name)? {
            ParamValue::Num(v) => Some(*v),
            ParamValue::Str(s) => s.trim().parse().ok(),
            ParamValue::List(_) => None,
        }
    }

    fn text(&self, name: &str) -> Option<&str> {
        match self.get(name)? {
            ParamValue::Str(s) => Some(s.trim()),
            _ => None,
        }
    }

    fn texts(&self, name: &str) -> Option<Vec<String>> {
        as_strings(self.get(name)?)
    }

    fn numbers(&self, name: &str) -> Option<Vec<f64>> {
        as_numbers(self.get(name)?)
    }

    fn range_of(&self, name: &str) -> Option<[f64; 2]> {
        self.numbers(name).filter(|v| v.len() == 2).map(|v| [v[0], v[1]])
    }

    fn flag(&self, name: &str) -> Option<bool> {
        match self.get(name)? {
            ParamValue::Num(n) => Some(*n != 0.0),
            ParamValue::Str(s) => Some(s == "true"),
            ParamValue::List(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_vectors() {
        assert!(check_probability_vector(&[0.6, 0.3, 0.1]).is_ok());
        assert!(check_probability_vector(&[0.5, 0.5, 0.0]).is_ok());
        assert!(check_probability_vector(&[0.5, 0.6, 0.1]).is_err());
        assert!(check_probability_vector(&[1.2, -0.2]).is_err());
    }

    #[test]
    fn schema_checks_name_the_parameter() {
        let schema = [
            ParamSchema::required("asset", ParamKind::Text, ""),
            ParamSchema::new("n", ParamKind::Integer { min: 1, max: None }, ""),
        ];
        assert!(validate_params(&schema, &params([("asset", "pad".into())])).is_ok());
        assert_eq!(validate_params(&schema, &Params::new()).unwrap_err().0, "asset");
        let bad = params([("asset", "pad".into()), ("n", 0.0.into())]);
        assert_eq!(validate_params(&schema, &bad).unwrap_err().0, "n");
        let unknown = params([("asset", "pad".into()), ("zzz", 1.0.into())]);
        assert_eq!(validate_params(&schema, &unknown).unwrap_err().0, "zzz");
    }

    #[test]
    fn choice_lists_accept_single_strings() {
        let k = ParamKind::ChoiceList { values: &["x", "y", "z"] };
        assert!(k.check(&"x".into()).is_ok());
        assert!(k.check(&vec!["x", "y"].into()).is_ok());
        assert!(k.check(&vec!["w"].into()).is_err());
        assert!(k.check(&ParamValue::List(vec![])).is_ok());
    }
}
