//! Experiment specifications: JSON ingestion with key-path errors, named presets
//! and command-line overrides.

use std::f64::consts::PI;
use std::path::Path;

use serde_json::{Map, Value};

use kstree::tree_model::IntervalVariant;
use kstree::{Model, StarTreeConfig};

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    /// Flat coefficients over the bases of the retained eigenspaces.
    Basis(Vec<f64>),
    /// Coefficient one on the first `count` basis functions, all of them when `None`.
    UnitMix(Option<usize>),
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub config: StarTreeConfig,
    pub y0: InitialData,
    pub modes: usize,
    pub inactive: Vec<String>,
    pub channels: Option<String>,
    pub route_b: bool,
    pub sim_modes: Option<usize>,
    pub steps: usize,
    pub samples: usize,
    pub zero_control: bool,
}

pub const DEFAULT_MODES: usize = 8;
pub const DEFAULT_STEPS: usize = 200;
pub const DEFAULT_SAMPLES: usize = 1000;

impl ExperimentSpec {
    pub fn from_config(config: StarTreeConfig) -> Self {
        ExperimentSpec {
            config,
            y0: InitialData::UnitMix(None),
            modes: DEFAULT_MODES,
            inactive: Vec::new(),
            channels: None,
            route_b: false,
            sim_modes: None,
            steps: DEFAULT_STEPS,
            samples: DEFAULT_SAMPLES,
            zero_control: false,
        }
    }

    pub fn default_tree() -> Self {
        Self::from_config(tree(Model::ModelI, 1.0))
    }

    /// Modes used by the simulator; a few beyond the controlled ones by default.
    pub fn simulation_modes(&self) -> usize {
        self.sim_modes.unwrap_or(self.modes + 4)
    }

    /// Reads either a bare configuration or `{"config": …, …}`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::from_value(&value).map_err(|e| match e {
            CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_value(value: &Value) -> Result<Self, CliError> {
        let obj = value.as_object().ok_or_else(|| input("$", "expected an object"))?;
        if !obj.contains_key("config") {
            return Ok(Self::from_config(parse_config(value, "$")?));
        }
        const KEYS: [&str; 10] = [
            "config",
            "y0",
            "modes",
            "inactive_channels",
            "channels",
            "route_b",
            "sim_modes",
            "steps",
            "samples",
            "control",
        ];
        if let Some(k) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(input(&format!("$.{k}"), "unknown key"));
        }
        let mut spec = Self::from_config(parse_config(&obj["config"], "$.config")?);
        if let Some(v) = obj.get("y0") {
            spec.y0 = parse_initial_data(v, "$.y0")?;
        }
        if let Some(v) = obj.get("modes") {
            spec.modes = positive(v, "$.modes")?;
        }
        if let Some(v) = obj.get("inactive_channels") {
            spec.inactive = strings(v, "$.inactive_channels")?;
        }
        if let Some(v) = obj.get("channels") {
            spec.channels = Some(v.as_str().ok_or_else(|| input("$.channels", "expected a bit string"))?.to_string());
        }
        if let Some(v) = obj.get("route_b") {
            spec.route_b = v.as_bool().ok_or_else(|| input("$.route_b", "expected a boolean"))?;
        }
        if let Some(v) = obj.get("sim_modes") {
            spec.sim_modes = Some(positive(v, "$.sim_modes")?);
        }
        if let Some(v) = obj.get("steps") {
            spec.steps = positive(v, "$.steps")?;
        }
        if let Some(v) = obj.get("samples") {
            spec.samples = positive(v, "$.samples")?;
        }
        if let Some(v) = obj.get("control") {
            spec.zero_control = match v.as_str() {
                Some("synthesized") => false,
                Some("zero") => true,
                _ => return Err(input("$.control", "expected \"synthesized\" or \"zero\"")),
            };
        }
        Ok(spec)
    }
}

fn input(path: &str, msg: &str) -> CliError {
    CliError::Input(format!("{path}: {msg}"))
}

fn positive(v: &Value, path: &str) -> Result<usize, CliError> {
    match v.as_u64() {
        Some(n) if n > 0 => Ok(n as usize),
        _ => Err(input(path, "expected a positive integer")),
    }
}

fn strings(v: &Value, path: &str) -> Result<Vec<String>, CliError> {
    let arr = v.as_array().ok_or_else(|| input(path, "expected an array of strings"))?;
    arr.iter()
        .enumerate()
        .map(|(i, s)| s.as_str().map(str::to_string).ok_or_else(|| input(&format!("{path}[{i}]"), "expected a string")))
        .collect()
}

fn parse_config(v: &Value, path: &str) -> Result<StarTreeConfig, CliError> {
    let obj: &Map<String, Value> = v.as_object().ok_or_else(|| input(path, "expected an object"))?;
    for key in ["edges", "length", "lambda", "model", "horizon"] {
        if !obj.contains_key(key) {
            return Err(input(&format!("{path}.{key}"), "missing"));
        }
    }
    if let Some(k) = obj.keys().find(|k| !["edges", "length", "lambda", "model", "horizon"].contains(&k.as_str())) {
        return Err(input(&format!("{path}.{k}"), "unknown key"));
    }
    let mut normalized = obj.clone();
    if let Some(s) = obj["lambda"].as_str() {
        let value = eval_expression(s).map_err(|e| input(&format!("{path}.lambda"), &e))?;
        normalized.insert("lambda".into(), Value::from(value));
    }
    StarTreeConfig::from_value(&Value::Object(normalized)).map_err(|e| input(path, &e.to_string()))
}

fn parse_initial_data(v: &Value, path: &str) -> Result<InitialData, CliError> {
    let obj = v.as_object().ok_or_else(|| input(path, "expected an object"))?;
    if let Some(coeffs) = obj.get("basis_coefficients") {
        if obj.len() != 1 {
            return Err(input(path, "basis_coefficients excludes other keys"));
        }
        let arr = coeffs.as_array().ok_or_else(|| input(&format!("{path}.basis_coefficients"), "expected an array"))?;
        let values = arr
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.as_f64()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| input(&format!("{path}.basis_coefficients[{i}]"), "expected a finite number"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(InitialData::Basis(values));
    }
    let preset = obj
        .get("preset")
        .ok_or_else(|| input(path, "expected basis_coefficients or preset"))?
        .as_str()
        .ok_or_else(|| input(&format!("{path}.preset"), "expected a string"))?;
    if let Some(k) = obj.keys().find(|k| !["preset", "count"].contains(&k.as_str())) {
        return Err(input(&format!("{path}.{k}"), "unknown key"));
    }
    match preset {
        "unit-mix" => {
            let count = obj.get("count").map(|c| positive(c, &format!("{path}.count"))).transpose()?;
            Ok(InitialData::UnitMix(count))
        }
        "zero" => Ok(InitialData::Zero),
        other => Err(input(&format!("{path}.preset"), &format!("unknown preset {other:?}; expected unit-mix or zero"))),
    }
}

fn tree(model: Model, lambda: f64) -> StarTreeConfig {
    StarTreeConfig::new(3, 1.0, lambda, model, 1.0).expect("preset configuration")
}

fn interval(variant: IntervalVariant, lambda: f64) -> StarTreeConfig {
    StarTreeConfig::interval(variant, 1.0, lambda, 1.0).expect("preset configuration")
}

pub const PRESETS: [&str; 15] = [
    "model1-null",
    "model2-null",
    "model2-2n3-a",
    "model2-2n3-b",
    "model1-obstruct",
    "model2-obstruct-a",
    "model2-obstruct-b",
    "critical-n0",
    "critical-n1",
    "critical-nodd",
    "interval-neumann",
    "interval-neumann-shifted",
    "interval-dirichlet",
    "interval-dirichlet-shifted",
    "interval-dirichlet-n3",
];

/// Named worked examples; `zero` is the all-zero simulation.
pub fn preset(name: &str) -> Result<ExperimentSpec, CliError> {
    let with = |config: StarTreeConfig, modes: usize, inactive: &[&str]| ExperimentSpec {
        modes,
        inactive: inactive.iter().map(|s| s.to_string()).collect(),
        ..ExperimentSpec::from_config(config)
    };
    let odd = 5.0 * PI * PI / 2.0;
    let shifted = PI * PI / 4.0 + 0.1;
    Ok(match name {
        "model1-null" => with(tree(Model::ModelI, 1.0), 8, &["u3"]),
        "model2-null" => with(tree(Model::ModelII, 1.0), 8, &["a3", "b3"]),
        "model2-2n3-a" => with(tree(Model::ModelII, 1.0), 8, &["a3", "a2", "b3"]),
        "model2-2n3-b" => with(tree(Model::ModelII, 1.0), 8, &["a3", "b2", "b3"]),
        "model1-obstruct" => with(tree(Model::ModelI, 1.0), 3, &["u1", "u2"]),
        "model2-obstruct-a" => with(tree(Model::ModelII, odd), 3, &["a3", "a2", "b3"]),
        "model2-obstruct-b" => with(tree(Model::ModelII, odd), 3, &["a3", "b3", "b2"]),
        "critical-n0" => with(tree(Model::ModelI, 10.0 * PI * PI), 8, &[]),
        "critical-n1" => with(tree(Model::ModelI, 5.0 * PI * PI), 8, &[]),
        "critical-nodd" => with(tree(Model::ModelII, odd), 8, &[]),
        "interval-neumann" => with(interval(IntervalVariant::NeumannPair, 1.0), 8, &[]),
        "interval-neumann-shifted" => with(interval(IntervalVariant::NeumannPair, shifted), 8, &[]),
        "interval-dirichlet" => with(interval(IntervalVariant::DirichletPair, 1.0), 8, &[]),
        "interval-dirichlet-shifted" => with(interval(IntervalVariant::DirichletPair, shifted), 8, &[]),
        "interval-dirichlet-n3" => with(interval(IntervalVariant::DirichletPair, PI * PI / 4.0), 8, &[]),
        "zero" => ExperimentSpec { y0: InitialData::Zero, zero_control: true, ..with(tree(Model::ModelI, 1.0), 8, &[]) },
        other => {
            return Err(CliError::Input(format!(
                "unknown preset {other:?}; available: {}, zero",
                PRESETS.join(", ")
            )))
        }
    })
}

/// Evaluates `+ − * / ^`, parentheses, decimal numbers and `pi`.
pub fn eval_expression(text: &str) -> Result<f64, String> {
    let mut p = ExprParser { chars: text.chars().filter(|c| !c.is_whitespace()).collect(), pos: 0 };
    let v = p.sum()?;
    if p.pos != p.chars.len() {
        return Err(format!("unexpected {:?} in {text:?}", p.chars[p.pos]));
    }
    if !v.is_finite() {
        return Err(format!("{text:?} is not finite"));
    }
    Ok(v)
}

struct ExprParser {
    chars: Vec<char>,
    pos: usize,
}

impl ExprParser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<f64, String> {
        let mut v = self.product()?;
        while let Some(op @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let rhs = self.product()?;
            v = if op == '+' { v + rhs } else { v - rhs };
        }
        Ok(v)
    }

    fn product(&mut self) -> Result<f64, String> {
        let mut v = self.power()?;
        while let Some(op @ ('*' | '/')) = self.peek() {
            self.pos += 1;
            let rhs = self.power()?;
            v = if op == '*' { v * rhs } else { v / rhs };
        }
        Ok(v)
    }

    fn power(&mut self) -> Result<f64, String> {
        let base = self.unary()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            let exp = self.power()?;
            if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
                return Ok(base.powi(exp as i32));
            }
            return Ok(base.powf(exp));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<f64, String> {
        if self.peek() == Some('-') {
            self.pos += 1;
            return Ok(-self.unary()?);
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<f64, String> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let v = self.sum()?;
                if self.peek() != Some(')') {
                    return Err("missing ')'".into());
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    let exponent_sign = (c == '-' || c == '+') && matches!(self.chars[self.pos - 1], 'e' | 'E');
                    if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exponent_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let s: String = self.chars[start..self.pos].iter().collect();
                s.parse().map_err(|_| format!("bad number {s:?}"))
            }
            Some('p') if self.chars[self.pos..].starts_with(&['p', 'i']) => {
                self.pos += 2;
                Ok(PI)
            }
            Some(c) => Err(format!("unexpected {c:?}")),
            None => Err("unexpected end of expression".into()),
        }
    }
}
