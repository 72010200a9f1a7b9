//! Run configuration: defaults, then a key=value file, then command-line flags.

use std::path::PathBuf;

use fbn_core::greens_potential::Profile;
use fbn_core::Params;
use serde::Serialize;

use crate::error::CliError;

/// Shift applied to the potential `a` before use.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shift {
    None,
    /// The smallest constant making a critical.
    Critical,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub n: usize,
    pub s: f64,
    /// Mesh size of the analysis grid on the unit interval.
    pub h: f64,
    /// Mesh size at x for energy scans and single minimizations.
    pub h_focus: f64,
    pub growth: f64,
    pub x: f64,
    pub lambda: f64,
    pub lambdas: Vec<f64>,
    pub eps: f64,
    pub eps_ladder: Vec<f64>,
    pub a: String,
    pub v: String,
    pub a_file: Option<PathBuf>,
    pub v_file: Option<PathBuf>,
    pub shift: Shift,
    pub tol: f64,
    pub check_quadrature: bool,
    pub zero_tol: f64,
    pub tail_order: Option<usize>,
    pub mixed_order: usize,
    pub phi_tol: f64,
    pub max_iter: usize,
    pub u_file: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 1,
            s: 0.35,
            h: 0.02,
            h_focus: 1e-6,
            growth: 0.1,
            x: 0.0,
            lambda: 100.0,
            lambdas: Vec::new(),
            eps: 0.0,
            eps_ladder: Vec::new(),
            a: "zero".into(),
            v: "zero".into(),
            a_file: None,
            v_file: None,
            shift: Shift::None,
            tol: 1e-10,
            check_quadrature: false,
            zero_tol: 1e-4,
            tail_order: None,
            mixed_order: 0,
            phi_tol: 1e-6,
            max_iter: 2000,
            u_file: None,
            out: None,
        }
    }
}

/// Every configurable key with its meaning, for `--schema`.
pub const KEYS: &[(&str, &str)] = &[
    ("n", "dimension N (flag --N)"),
    ("s", "fractional order s"),
    ("h", "analysis grid mesh size on the unit interval"),
    ("h_focus", "mesh size at x for energy-scan and single minimizations"),
    ("growth", "geometric mesh growth away from the focus"),
    ("x", "bubble / evaluation point"),
    ("lambda", "bubble concentration parameter"),
    ("lambdas", "comma-separated λ sweep for energy-scan"),
    ("eps", "perturbation size ε"),
    ("eps_ladder", "comma-separated ε ladder; turns minimize into a scaling study"),
    ("a", "potential a: zero | const:<v> | bump:<centre>:<width>:<depth>, joined by '+'"),
    ("v", "perturbation V, same syntax as a"),
    ("a_file", "CSV for a with header x,value (interpolated) or node_index,value; overrides a"),
    ("v_file", "CSV for V, same format as a_file; overrides v"),
    ("shift", "none | critical | <number>: constant added to a"),
    ("tol", "solver / quadrature tolerance"),
    ("check_quadrature", "true | false: constants also reports quadrature oracles"),
    ("zero_tol", "tolerance on |φ_a| defining the zero set N_a"),
    ("tail_order", "highest tail power in the energy fit (default: minimal)"),
    ("mixed_order", "number of mixed columns in the energy fit"),
    ("phi_tol", "|φ_a(x)| below which the energy-fit tail is dropped"),
    ("max_iter", "iteration cap for the minimizer"),
    ("u_file", "CSV with columns x,u for druet-check"),
    ("out", "output directory for JSON and CSV files"),
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| CliError::Config(format!("{key}: cannot parse '{value}'")))
}

fn list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value.split(',').filter(|t| !t.trim().is_empty()).map(|t| num(key, t)).collect()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "n" | "N" => self.n = num(key, v)?,
            "s" => self.s = num(key, v)?,
            "h" => self.h = num(key, v)?,
            "h_focus" => self.h_focus = num(key, v)?,
            "growth" => self.growth = num(key, v)?,
            "x" => self.x = num(key, v)?,
            "lambda" => self.lambda = num(key, v)?,
            "lambdas" => self.lambdas = list(key, v)?,
            "eps" => self.eps = num(key, v)?,
            "eps_ladder" => self.eps_ladder = list(key, v)?,
            "a" => {
                parse_profile(v)?;
                self.a = v.into()
            }
            "v" => {
                parse_profile(v)?;
                self.v = v.into()
            }
            "shift" => {
                self.shift = match v {
                    "none" => Shift::None,
                    "critical" => Shift::Critical,
                    _ => Shift::Value(num(key, v)?),
                }
            }
            "tol" => self.tol = num(key, v)?,
            "check_quadrature" => self.check_quadrature = num(key, v)?,
            "a_file" => self.a_file = Some(v.into()),
            "v_file" => self.v_file = Some(v.into()),
            "zero_tol" => self.zero_tol = num(key, v)?,
            "tail_order" => self.tail_order = Some(num(key, v)?),
            "mixed_order" => self.mixed_order = num(key, v)?,
            "phi_tol" => self.phi_tol = num(key, v)?,
            "max_iter" => self.max_iter = num(key, v)?,
            "u_file" => self.u_file = Some(v.into()),
            "out" => self.out = Some(v.into()),
            _ => return Err(CliError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", no + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn params(&self) -> Result<Params, CliError> {
        Params::new(self.n, self.s).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn profile_a(&self) -> Result<Profile, CliError> {
        parse_profile(&self.a)
    }

    pub fn profile_v(&self) -> Result<Profile, CliError> {
        parse_profile(&self.v)
    }

    /// Checks that do not need any numerics.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params()?;
        for (name, val) in [("h", self.h), ("h_focus", self.h_focus), ("growth", self.growth), ("tol", self.tol), ("lambda", self.lambda)] {
            if !(val > 0.0 && val.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive")));
            }
        }
        if self.h >= 1.0 {
            return Err(CliError::Config("h must be below 1".into()));
        }
        if self.eps < 0.0 || self.eps_ladder.iter().any(|&e| e <= 0.0) {
            return Err(CliError::Config("ε must be nonnegative and ladder entries positive".into()));
        }
        if self.lambdas.iter().any(|&l| l <= 0.0) {
            return Err(CliError::Config("λ values must be positive".into()));
        }
        Ok(())
    }
}

pub fn parse_profile(text: &str) -> Result<Profile, CliError> {
    let bad = || CliError::Config(format!("cannot parse potential '{text}'"));
    let term = |t: &str| -> Result<Profile, CliError> {
        let parts: Vec<&str> = t.trim().split(':').collect();
        let f = |i: usize| -> Result<f64, CliError> { parts.get(i).ok_or_else(bad)?.trim().parse().map_err(|_| bad()) };
        match (parts[0].trim(), parts.len()) {
            ("zero", 1) => Ok(Profile::Constant { value: 0.0 }),
            ("const", 2) => Ok(Profile::Constant { value: f(1)? }),
            ("bump", 4) => Ok(Profile::GaussianBump { center: f(1)?, width: f(2)?, depth: f(3)? }),
            _ => Err(bad()),
        }
    };
    let mut terms: Vec<Profile> = text.split('+').map(term).collect::<Result<_, _>>()?;
    Ok(if terms.len() == 1 { terms.remove(0) } else { Profile::Sum { terms } })
}
