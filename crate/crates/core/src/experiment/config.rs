use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    PitBench,
    Simulate,
    Shift,
    Real,
}

impl Experiment {
    pub fn label(self) -> &'static str {
        match self {
            Experiment::PitBench => "pit-bench",
            Experiment::Simulate => "simulate",
            Experiment::Shift => "shift",
            Experiment::Real => "real",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cpi,
    Dcp,
    Residual,
    Rescaled,
    Cqr,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Cpi, Method::Dcp, Method::Residual, Method::Rescaled, Method::Cqr];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cpi => "CPI",
            Method::Dcp => "DCP",
            Method::Residual => "Residual",
            Method::Rescaled => "Rescaled",
            Method::Cqr => "CQR",
        }
    }

    pub fn uses_cdf(self) -> bool {
        matches!(self, Method::Cpi | Method::Dcp)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cpi" => Ok(Method::Cpi),
            "dcp" => Ok(Method::Dcp),
            "residual" => Ok(Method::Residual),
            "rescaled" => Ok(Method::Rescaled),
            "cqr" => Ok(Method::Cqr),
            other => Err(Error::config("methods", format!("unknown method '{other}'"))),
        }
    }
}

/// How z is chosen for the CDF-based methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ZChoice {
    Fixed(f64),
    Grid,
    Amortized,
}

impl fmt::Display for ZChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZChoice::Fixed(z) => write!(f, "fixed:{z}"),
            ZChoice::Grid => f.write_str("grid"),
            ZChoice::Amortized => f.write_str("amortized"),
        }
    }
}

impl From<ZChoice> for String {
    fn from(z: ZChoice) -> String {
        z.to_string()
    }
}

impl TryFrom<String> for ZChoice {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for ZChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "grid" => Ok(ZChoice::Grid),
            "amortized" => Ok(ZChoice::Amortized),
            _ => s
                .strip_prefix("fixed:")
                .and_then(|v| v.parse().ok())
                .map(ZChoice::Fixed)
                .ok_or_else(|| Error::config("z_strategy", format!("expected grid, amortized or fixed:<z>, got '{s}'"))),
        }
    }
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub alpha: f64,
    pub n_train: usize,
    pub n_cal: usize,
    pub n_test: usize,
    pub replications: usize,
    pub methods: Vec<Method>,
    pub z_strategy: ZChoice,
    /// Starting points evaluated by `pit-bench`.
    pub z_values: Vec<f64>,
    /// Shape of the `pit-bench` PIT distribution.
    pub beta_a: f64,
    pub beta_b: f64,
    /// Location shifts applied to calibration and test draws.
    pub deltas: Vec<f64>,
    pub csv: Option<PathBuf>,
    pub response: String,
    pub out: PathBuf,
    pub run_id: Option<String>,
    pub seed: u64,
    pub workers: usize,
    /// Caps every training run's epoch budget.
    pub max_epochs: Option<usize>,
    pub bins: usize,
    pub grid_points: usize,
    /// Points on the `[0, 1]` grid of smoothed curves.
    pub curve_points: usize,
}

impl RunConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let mut c = Self {
            experiment,
            alpha: 0.1,
            n_train: 2000,
            n_cal: 300,
            n_test: 200,
            replications: 50,
            methods: Method::ALL.to_vec(),
            z_strategy: ZChoice::Grid,
            z_values: vec![0.05, 0.06, 0.07, 0.08, 0.09, 0.10],
            beta_a: 3.0,
            beta_b: 1.0,
            deltas: vec![0.0],
            csv: None,
            response: "y".into(),
            out: PathBuf::from("runs"),
            run_id: None,
            seed: 2024,
            workers: 1,
            max_epochs: None,
            bins: crate::cdf::DEFAULT_BINS,
            grid_points: crate::conformal::DEFAULT_GRID_POINTS,
            curve_points: 101,
        };
        match experiment {
            Experiment::PitBench => {
                c.n_cal = 200;
                c.replications = 5000;
                c.methods = vec![Method::Cpi, Method::Dcp];
            }
            Experiment::Simulate => {}
            Experiment::Shift => {
                c.methods = vec![Method::Cpi, Method::Dcp];
                c.deltas = vec![0.0, 0.05, 0.1];
            }
            Experiment::Real => c.replications = 10,
        }
        c
    }

    /// Full-size replication counts: 5000 PIT draws, 1000 simulation runs, 10 partitions.
    pub fn full_scale(&mut self) {
        self.replications = match self.experiment {
            Experiment::PitBench => 5000,
            Experiment::Simulate | Experiment::Shift => 1000,
            Experiment::Real => 10,
        };
    }

    pub fn run_id(&self) -> String {
        self.run_id
            .clone()
            .unwrap_or_else(|| format!("{}-seed{}", self.experiment.label(), self.seed))
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        fn num<T: FromStr>(field: &'static str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::config(field, format!("cannot parse '{v}'")))
        }
        fn list(field: &'static str, v: &str) -> Result<Vec<f64>> {
            v.split(',').filter(|s| !s.trim().is_empty()).map(|s| num(field, s.trim())).collect()
        }
        match key.as_str() {
            "alpha" => self.alpha = num("alpha", value)?,
            "n_train" => self.n_train = num("n_train", value)?,
            "n_cal" => self.n_cal = num("n_cal", value)?,
            "n_test" => self.n_test = num("n_test", value)?,
            "replications" => self.replications = num("replications", value)?,
            "methods" => {
                self.methods = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?;
            }
            "z_strategy" => self.z_strategy = value.parse()?,
            "z_values" => self.z_values = list("z_values", value)?,
            "beta_a" => self.beta_a = num("beta_a", value)?,
            "beta_b" => self.beta_b = num("beta_b", value)?,
            "deltas" => self.deltas = list("deltas", value)?,
            "csv" => self.csv = Some(PathBuf::from(value)),
            "response" => self.response = value.to_string(),
            "out" => self.out = PathBuf::from(value),
            "run_id" => self.run_id = Some(value.to_string()),
            "seed" => self.seed = num("seed", value)?,
            "workers" => self.workers = num("workers", value)?,
            "max_epochs" => self.max_epochs = Some(num("max_epochs", value)?),
            "bins" => self.bins = num("bins", value)?,
            "grid_points" => self.grid_points = num("grid_points", value)?,
            "curve_points" => self.curve_points = num("curve_points", value)?,
            "experiment" => {}
            _ => return Err(Error::InvalidConfig {
                field: "config",
                reason: format!("unknown key '{key}'"),
            }),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::config("config", format!("line {}: expected key = value, got '{line}'", i + 1))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if self.replications == 0 {
            return Err(Error::config("replications", "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "at least one method is required"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if self.n_cal == 0 {
            return Err(Error::config("n_cal", "must be at least 1"));
        }
        if let ZChoice::Fixed(z) = self.z_strategy {
            if !(0.0..=self.alpha).contains(&z) {
                return Err(Error::config("z_strategy", format!("fixed z {z} outside [0, alpha]")));
            }
        }
        if self.max_epochs == Some(0) {
            return Err(Error::config("max_epochs", "must be at least 1"));
        }
        match self.experiment {
            Experiment::PitBench => {
                if self.methods.iter().any(|m| !m.uses_cdf()) {
                    return Err(Error::config("methods", "pit-bench compares cpi and dcp only"));
                }
                if self.z_values.is_empty() || self.z_values.iter().any(|z| !(0.0..=self.alpha).contains(z)) {
                    return Err(Error::config("z_values", "need a non-empty list inside [0, alpha]"));
                }
                if !(self.beta_a > 0.0 && self.beta_b > 0.0) {
                    return Err(Error::config("beta_a", "Beta shapes must be positive"));
                }
            }
            Experiment::Simulate | Experiment::Shift => {
                if self.n_train < 2 || self.n_test == 0 {
                    return Err(Error::config("n_train", "need n_train >= 2 and n_test >= 1"));
                }
                if self.deltas.is_empty() || self.deltas.iter().any(|d| !d.is_finite()) {
                    return Err(Error::config("deltas", "need a non-empty list of finite shifts"));
                }
                if self.bins < 2 {
                    return Err(Error::config("bins", "need at least 2"));
                }
                if self.curve_points < 2 {
                    return Err(Error::config("curve_points", "need at least 2"));
                }
            }
            Experiment::Real => {
                if self.csv.is_none() {
                    return Err(Error::config("csv", "the real experiment needs a CSV path"));
                }
                if self.bins < 2 {
                    return Err(Error::config("bins", "need at least 2"));
                }
            }
        }
        Ok(())
    }
}
