//! JSON configuration: bubble data and run parameters.

use std::collections::BTreeSet;
use std::path::Path;

use num_traits::{FromPrimitive, Zero};
use serde_json::{json, Map, Value};

use crate::bubble::Bubble;
use crate::error::{Error, Result};
use crate::rates::{Coeff, Rate, RateExpr, Scale, Term, Q};

#[derive(Clone, Debug, PartialEq)]
pub struct Parameters {
    /// `None` selects the largest admissible value automatically
    pub delta: Option<f64>,
    pub delta0: f64,
    pub delta_max: f64,
    pub epsilon1: f64,
    /// `None` measures the additive distance constant from the geometry
    pub kappa: Option<f64>,
    pub eta: f64,
    pub l: f64,
    pub t_values: Vec<f64>,
    pub grid_resolution: usize,
    /// reject families that break the separation assumptions
    pub check_assumptions: bool,
}

impl Default for Parameters {
    fn default() -> Self {
        Parameters {
            delta: None,
            delta0: 0.1,
            delta_max: 0.1,
            epsilon1: 1e-2,
            kappa: None,
            eta: (-3.0f64).exp(),
            l: 3.0,
            t_values: vec![10.0, 20.0, 40.0],
            grid_resolution: 512,
            check_assumptions: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub bubbles: Vec<Bubble>,
    pub parameters: Parameters,
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<Config> {
    parse_str(&std::fs::read_to_string(path)?)
}

pub fn parse_str(text: &str) -> Result<Config> {
    let v: Value = serde_json::from_str(text)
        .map_err(|e| Error::Syntax { line: e.line(), column: e.column(), msg: e.to_string() })?;
    from_value(&v)
}

fn schema(field: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Schema { field: field.into(), msg: msg.into() }
}

fn object<'a>(v: &'a Value, field: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| schema(field, "expected an object"))
}

fn known_keys(m: &Map<String, Value>, field: &str, keys: &[&str]) -> Result<()> {
    match m.keys().find(|k| !keys.contains(&k.as_str())) {
        Some(k) => Err(schema(format!("{field}.{k}"), "unknown field")),
        None => Ok(()),
    }
}

/// Exact rational from `"p/q"`, `"p"`, an integer, or a finite float.
pub fn parse_rational(v: &Value, field: &str) -> Result<Q> {
    match v {
        Value::String(s) => s.trim().parse::<Q>().map_err(|_| schema(field, format!("`{s}` is not a rational p/q"))),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(Q::from_integer(i))
            } else {
                n.as_f64().and_then(Q::from_f64).ok_or_else(|| schema(field, "number is not representable"))
            }
        }
        _ => Err(schema(field, "expected a rational string or number")),
    }
}

fn parse_rate(v: &Value, field: &str) -> Result<Rate> {
    let q = parse_rational(v, field)?;
    Rate::new(q).map_err(|_| schema(field, format!("rate {q} is negative")))
}

fn number(v: &Value, field: &str) -> Result<f64> {
    v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| schema(field, "expected a finite number"))
}

fn positive(v: &Value, field: &str) -> Result<f64> {
    let x = number(v, field)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(schema(field, format!("must be positive, got {x}")))
    }
}

fn parse_bubble(v: &Value, field: &str) -> Result<Bubble> {
    let m = object(v, field)?;
    known_keys(m, field, &["id", "center", "scale"])?;
    let id = m
        .get("id")
        .and_then(Value::as_str)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| schema(format!("{field}.id"), "expected a nonempty string"))?;
    let cf = format!("{field}.center");
    let terms = m.get("center").and_then(Value::as_array).ok_or_else(|| schema(&cf, "expected a list of terms"))?;
    let mut center = Vec::with_capacity(terms.len());
    for (k, term) in terms.iter().enumerate() {
        let tf = format!("{cf}[{k}]");
        let tm = object(term, &tf)?;
        known_keys(tm, &tf, &["re", "im", "rate"])?;
        let part = |key: &str| match tm.get(key) {
            Some(x) => parse_rational(x, &format!("{tf}.{key}")),
            None => Ok(Q::zero()),
        };
        let rate = tm.get("rate").ok_or_else(|| schema(format!("{tf}.rate"), "missing"))?;
        center.push(Term { coeff: Coeff::new(part("re")?, part("im")?), rate: parse_rate(rate, &format!("{tf}.rate"))? });
    }
    let sf = format!("{field}.scale");
    let sm = object(m.get("scale").ok_or_else(|| schema(&sf, "missing"))?, &sf)?;
    known_keys(sm, &sf, &["coef", "rate"])?;
    let coef = positive(sm.get("coef").unwrap_or(&json!(1.0)), &format!("{sf}.coef"))?;
    let rate = parse_rate(sm.get("rate").ok_or_else(|| schema(format!("{sf}.rate"), "missing"))?, &format!("{sf}.rate"))?;
    let scale = Scale::new(coef, rate).map_err(|e| schema(&sf, e.to_string()))?;
    Ok(Bubble::new(id, RateExpr::from_terms(center), scale))
}

fn parse_parameters(v: Option<&Value>) -> Result<Parameters> {
    let mut p = Parameters::default();
    let Some(v) = v else { return Ok(p) };
    let m = object(v, "parameters")?;
    known_keys(
        m,
        "parameters",
        &["delta", "delta0", "delta_max", "epsilon1", "kappa", "eta", "L", "t_values", "grid_resolution", "check_assumptions"],
    )?;
    let f = |k: &str| format!("parameters.{k}");
    let opt = |k: &str| m.get(k).filter(|x| !x.is_null());
    if let Some(x) = opt("delta") {
        p.delta = Some(positive(x, &f("delta"))?);
    }
    if let Some(x) = opt("delta0") {
        p.delta0 = positive(x, &f("delta0"))?;
    }
    if let Some(x) = opt("delta_max") {
        p.delta_max = positive(x, &f("delta_max"))?;
    }
    if let Some(x) = opt("epsilon1") {
        p.epsilon1 = positive(x, &f("epsilon1"))?;
    }
    if let Some(x) = opt("kappa") {
        p.kappa = Some(number(x, &f("kappa"))?);
    }
    if let Some(x) = opt("eta") {
        p.eta = positive(x, &f("eta"))?;
        if p.eta >= 1.0 {
            return Err(schema(f("eta"), "must lie in (0, 1)"));
        }
    }
    if let Some(x) = opt("L") {
        p.l = positive(x, &f("L"))?;
    }
    if let Some(x) = opt("t_values") {
        let a = x.as_array().ok_or_else(|| schema(f("t_values"), "expected a list"))?;
        p.t_values = a.iter().enumerate().map(|(k, t)| positive(t, &format!("parameters.t_values[{k}]"))).collect::<Result<_>>()?;
    }
    if let Some(x) = opt("grid_resolution") {
        p.grid_resolution = x
            .as_u64()
            .filter(|&n| n >= 2)
            .ok_or_else(|| schema(f("grid_resolution"), "expected an integer >= 2"))? as usize;
    }
    if let Some(x) = opt("check_assumptions") {
        p.check_assumptions = x.as_bool().ok_or_else(|| schema(f("check_assumptions"), "expected a boolean"))?;
    }
    if let Some(d) = p.delta {
        if d > p.delta_max {
            return Err(schema(f("delta"), format!("{d} exceeds delta_max = {}", p.delta_max)));
        }
    }
    Ok(p)
}

pub fn from_value(v: &Value) -> Result<Config> {
    let m = object(v, "")?;
    known_keys(m, "", &["bubbles", "parameters"])?;
    let list = m.get("bubbles").and_then(Value::as_array).ok_or_else(|| schema("bubbles", "expected a list"))?;
    let bubbles = list.iter().enumerate().map(|(k, b)| parse_bubble(b, &format!("bubbles[{k}]"))).collect::<Result<Vec<_>>>()?;
    let mut seen = BTreeSet::new();
    for (k, b) in bubbles.iter().enumerate() {
        if b.id == crate::bubble::ROOT_ID || !seen.insert(b.id.as_str()) {
            return Err(schema(format!("bubbles[{k}].id"), format!("duplicate or reserved id `{}`", b.id)));
        }
    }
    Ok(Config { bubbles, parameters: parse_parameters(m.get("parameters"))? })
}

fn rational_string(q: Q) -> String {
    if *q.denom() == 1 {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl Config {
    /// Canonical JSON: every parameter present, rationals as reduced strings.
    pub fn to_value(&self) -> Value {
        let bubbles: Vec<Value> = self
            .bubbles
            .iter()
            .map(|b| {
                let center: Vec<Value> = b
                    .center
                    .terms()
                    .iter()
                    .map(|t| {
                        json!({
                            "re": rational_string(t.coeff.re),
                            "im": rational_string(t.coeff.im),
                            "rate": rational_string(t.rate.value()),
                        })
                    })
                    .collect();
                json!({
                    "id": b.id,
                    "center": center,
                    "scale": { "coef": b.scale.coef, "rate": rational_string(b.scale.rate.value()) },
                })
            })
            .collect();
        let p = &self.parameters;
        json!({
            "bubbles": bubbles,
            "parameters": {
                "delta": p.delta,
                "delta0": p.delta0,
                "delta_max": p.delta_max,
                "epsilon1": p.epsilon1,
                "kappa": p.kappa,
                "eta": p.eta,
                "L": p.l,
                "t_values": p.t_values,
                "grid_resolution": p.grid_resolution,
                "check_assumptions": p.check_assumptions,
            },
        })
    }

    pub fn emit(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("json values serialize");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"{
  "bubbles": [
    {"id": "l", "center": [{"re": "-1", "rate": "1"}], "scale": {"coef": 1.0, "rate": "2"}},
    {"id": "r", "center": [{"re": 1, "im": 0, "rate": "1"}], "scale": {"coef": 1.0, "rate": "2"}}
  ],
  "parameters": {"L": 3, "t_values": [10, 20]}
}"#;

    #[test]
    fn parses_and_round_trips() {
        let c = parse_str(TWO).unwrap();
        assert_eq!(c.bubbles.len(), 2);
        assert_eq!(c.parameters.t_values, vec![10.0, 20.0]);
        let again = parse_str(&c.emit()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.emit(), c.emit());
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_rational(&json!("6/4"), "x").unwrap(), Q::new(3, 2));
        assert_eq!(parse_rational(&json!(0.5), "x").unwrap(), Q::new(1, 2));
        assert!(parse_rational(&json!("1/0"), "x").is_err());
        assert!(parse_rational(&json!("abc"), "x").is_err());
    }

    #[test]
    fn negative_rate_names_the_field() {
        let bad = TWO.replace(r#""rate": "2"}},"#, r#""rate": "-2"}},"#);
        match parse_str(&bad) {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "bubbles[0].scale.rate"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_ids() {
        let bad = TWO.replace(r#""id": "r""#, r#""id": "l""#);
        assert!(matches!(parse_str(&bad), Err(Error::Schema { .. })));
    }

    #[test]
    fn syntax_error_has_position() {
        match parse_str("{\n  \"bubbles\": [,]\n}") {
            Err(Error::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 15)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_field_and_bad_values() {
        assert!(matches!(parse_str(r#"{"bubbles": [], "extra": 1}"#), Err(Error::Schema { .. })));
        assert!(matches!(parse_str(r#"{"bubbles": [], "parameters": {"eta": 2}}"#), Err(Error::Schema { .. })));
        assert!(matches!(parse_str(r#"{"bubbles": [], "parameters": {"delta": 0.5}}"#), Err(Error::Schema { .. })));
    }
}
