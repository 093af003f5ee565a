//! Experiment configuration in TOML. Parsing is strict: unknown keys, bad
//! types and invariant violations are all collected before failing.

use std::path::PathBuf;

use toml::{Table, Value};

use crate::closed_forms::{Alpha, LocalData};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Constants,
    Modes,
    Gcheck,
    Family,
    Residual,
    All,
}

impl Suite {
    pub const SINGLE: [Suite; 5] = [Suite::Constants, Suite::Modes, Suite::Gcheck, Suite::Family, Suite::Residual];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Constants => "constants",
            Suite::Modes => "modes",
            Suite::Gcheck => "gcheck",
            Suite::Family => "family",
            Suite::Residual => "residual",
            Suite::All => "all",
        }
    }

    fn parse(s: &str) -> Option<Suite> {
        Suite::SINGLE.into_iter().chain([Suite::All]).find(|x| x.name() == s)
    }
}

/// Weight `V(x) = v0 + ...`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HSpec {
    Const,
    /// `v0 + c |x|^2`
    Quadratic { c: f64 },
    /// `v0 + b x_1`
    Linear { b: f64 },
}

impl HSpec {
    pub fn local_data(self, v0: f64) -> Result<LocalData> {
        match self {
            HSpec::Const => LocalData::new(v0, [0.0, 0.0], [[0.0; 2]; 2]),
            HSpec::Quadratic { c } => LocalData::new(v0, [0.0, 0.0], [[2.0 * c, 0.0], [0.0, 2.0 * c]]),
            HSpec::Linear { b } => LocalData::new(v0, [b, 0.0], [[0.0; 2]; 2]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GridConfig {
    /// Innermost radius of the residual grid.
    pub r_min: f64,
    /// Outer radius of the domain.
    pub r_max: f64,
    /// Spacing in `log r`.
    pub log_step: f64,
    pub n_angles: usize,
    /// Highest angular mode in the kernel suite.
    pub k_max: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            r_min: 1e-6,
            r_max: 1.0,
            log_step: 0.01,
            n_angles: 256,
            k_max: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ExperimentConfig {
    pub suite: Suite,
    pub alpha: f64,
    pub v0: f64,
    pub h_spec: HSpec,
    pub u0_list: Vec<f64>,
    pub grid: GridConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn alpha(&self) -> Alpha {
        Alpha::new(self.alpha).expect("validated")
    }
}

const TOP_KEYS: [&str; 8] = ["suite", "alpha", "v0", "h_spec", "u0_list", "grid", "output_dir", "seed"];
const GRID_KEYS: [&str; 5] = ["r_min", "r_max", "log_step", "n_angles", "k_max"];

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

struct Collector(Vec<String>);

impl Collector {
    fn num(&mut self, t: &Table, key: &str, ctx: &str) -> Option<f64> {
        let v = t.get(key)?;
        match number(v) {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.0.push(format!("{ctx}{key}: expected a finite number"));
                None
            }
        }
    }

    fn unknown(&mut self, t: &Table, allowed: &[&str], ctx: &str) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                self.0.push(format!("{ctx}{k}: unknown key"));
            }
        }
    }
}

/// Parse and validate a config, reporting every violation at once.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.message().to_string()]))?;
    let mut c = Collector(Vec::new());
    c.unknown(&table, &TOP_KEYS, "");

    let suite = match table.get("suite") {
        None => {
            c.0.push("suite: required".into());
            None
        }
        Some(Value::String(s)) => Suite::parse(s).or_else(|| {
            c.0.push(format!(
                "suite: unknown suite {s:?} (constants, modes, gcheck, family, residual, all)"
            ));
            None
        }),
        Some(_) => {
            c.0.push("suite: expected a string".into());
            None
        }
    };

    let alpha = c.num(&table, "alpha", "");
    match alpha {
        None if !table.contains_key("alpha") => c.0.push("alpha: required".into()),
        Some(a) => {
            if let Err(e) = Alpha::new(a) {
                c.0.push(format!("alpha: {e}"));
            }
        }
        None => {}
    }
    let v0 = c.num(&table, "v0", "");
    match v0 {
        None if !table.contains_key("v0") => c.0.push("v0: required".into()),
        Some(v) if !(v > 0.0) => c.0.push(format!("v0: must be positive, got {v}")),
        _ => {}
    }

    let h_spec = match table.get("h_spec") {
        None => HSpec::Const,
        Some(Value::Table(t)) => {
            c.unknown(t, &["kind", "coefficient"], "h_spec.");
            let coef = c.num(t, "coefficient", "h_spec.");
            match t.get("kind").and_then(Value::as_str) {
                Some("const") => {
                    if coef.is_some() {
                        c.0.push("h_spec.coefficient: not used with kind = \"const\"".into());
                    }
                    HSpec::Const
                }
                Some("quadratic") => HSpec::Quadratic { c: coef.unwrap_or(1.0) },
                Some("linear") => HSpec::Linear { b: coef.unwrap_or(1.0) },
                _ => {
                    c.0.push("h_spec.kind: expected \"const\", \"quadratic\" or \"linear\"".into());
                    HSpec::Const
                }
            }
        }
        Some(_) => {
            c.0.push("h_spec: expected a table".into());
            HSpec::Const
        }
    };

    let u0_list = match table.get("u0_list") {
        None => crate::blowup_family::DEFAULT_HEIGHTS.to_vec(),
        Some(Value::Array(items)) => {
            let vals: Vec<Option<f64>> = items.iter().map(number).collect();
            if vals.iter().any(Option::is_none) {
                c.0.push("u0_list: expected an array of numbers".into());
                Vec::new()
            } else {
                let vals: Vec<f64> = vals.into_iter().flatten().collect();
                if vals.is_empty() {
                    c.0.push("u0_list: must not be empty".into());
                }
                if vals.windows(2).any(|w| !(w[1] > w[0])) {
                    c.0.push("u0_list: must be strictly increasing".into());
                }
                if let Some(&bad) = vals.iter().find(|&&u| !(u > 0.0)) {
                    c.0.push(format!("u0_list: heights must be positive, got {bad}"));
                }
                vals
            }
        }
        Some(_) => {
            c.0.push("u0_list: expected an array of numbers".into());
            Vec::new()
        }
    };

    let mut grid = GridConfig::default();
    match table.get("grid") {
        None => {}
        Some(Value::Table(t)) => {
            c.unknown(t, &GRID_KEYS, "grid.");
            if let Some(x) = c.num(t, "r_min", "grid.") {
                grid.r_min = x;
            }
            if let Some(x) = c.num(t, "r_max", "grid.") {
                grid.r_max = x;
            }
            if let Some(x) = c.num(t, "log_step", "grid.") {
                grid.log_step = x;
            }
            for (key, slot) in [("n_angles", 0usize), ("k_max", 1)] {
                match t.get(key) {
                    None => {}
                    Some(Value::Integer(i)) if *i > 0 => {
                        if slot == 0 {
                            grid.n_angles = *i as usize;
                        } else {
                            grid.k_max = *i as u32;
                        }
                    }
                    Some(_) => c.0.push(format!("grid.{key}: expected a positive integer")),
                }
            }
        }
        Some(_) => c.0.push("grid: expected a table".into()),
    }
    if !(grid.r_min >= 1e-6 && grid.r_min < grid.r_max) {
        c.0.push(format!("grid: need 1e-6 <= r_min < r_max, got [{}, {}]", grid.r_min, grid.r_max));
    }
    if !(grid.log_step > 0.0 && grid.log_step <= 0.1) {
        c.0.push(format!("grid.log_step: must lie in (0, 0.1], got {}", grid.log_step));
    }
    if !(64..=4096).contains(&grid.n_angles) {
        c.0.push(format!("grid.n_angles: must lie in [64, 4096], got {}", grid.n_angles));
    }
    if !(1..=10).contains(&grid.k_max) {
        c.0.push(format!("grid.k_max: must lie in [1, 10], got {}", grid.k_max));
    }

    let output_dir = match table.get("output_dir") {
        None => PathBuf::from("out"),
        Some(Value::String(s)) => PathBuf::from(s),
        Some(_) => {
            c.0.push("output_dir: expected a string".into());
            PathBuf::new()
        }
    };
    let seed = match table.get("seed") {
        None => 0,
        Some(Value::Integer(i)) if *i >= 0 => *i as u64,
        Some(_) => {
            c.0.push("seed: expected a non-negative integer".into());
            0
        }
    };

    if matches!(h_spec, HSpec::Linear { .. }) && matches!(suite, Some(Suite::Family | Suite::All)) {
        c.0.push("h_spec: the family suite shoots radial solutions and cannot use a linear weight".into());
    }
    if let (Some(HSpec::Quadratic { c: q }), Some(v)) = (Some(h_spec), v0) {
        if v + q * grid.r_max * grid.r_max <= 0.0 {
            c.0.push("h_spec: weight must stay positive on the domain".into());
        }
    }

    if !c.0.is_empty() {
        return Err(Error::Config(c.0));
    }
    Ok(ExperimentConfig {
        suite: suite.expect("checked"),
        alpha: alpha.expect("checked"),
        v0: v0.expect("checked"),
        h_spec,
        u0_list,
        grid,
        output_dir,
        seed,
    })
}
