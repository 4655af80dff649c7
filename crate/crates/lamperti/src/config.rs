//! Experiment configuration: a sectioned TOML file.
//!
//! ```toml
//! [model]
//! id = "cir"
//! initial = 0.125
//! kappa = 2.0
//! theta = 0.125
//! sigma = 0.5
//!
//! [grid]
//! horizon = 1.0
//! dt = "2^-8"
//! dt_reference = "2^-15"
//! ladder = ["2^-11", "2^-10", "2^-9", "2^-8"]
//! ```
//!
//! Step sizes are numbers or strings of the form `2^-k`.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use lamperti_core::brownian::dyadic_ratio;
use lamperti_core::error_lab::{Metric, StrongErrorStudy};
use lamperti_core::schemes::{Record, SolverChoice};
use lamperti_core::{
    AitSahaliaParams, CevParams, CirParams, Heston32Params, Model, ModelId, ModelSpec,
    SchemeConfig, SchemeId, StepSolverConfig, WrightFisherParams,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "LAMPERTI_OUT_DIR";

#[derive(Debug)]
pub enum ConfigError {
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Parse(toml::de::Error),
    Override(String),
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, source } => {
                write!(f, "cannot read {}: {source}", path.display())
            }
            ConfigError::Parse(e) => write!(f, "config parse error: {e}"),
            ConfigError::Override(s) => write!(f, "bad --set override: {s}"),
            ConfigError::Invalid(s) => write!(f, "invalid config: {s}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Parses `0.125`, `"0.125"` or `"2^-8"`.
pub fn parse_step(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some(exp) = s.strip_prefix("2^") {
        let k: i32 = exp
            .trim_start_matches('(')
            .trim_end_matches(')')
            .parse()
            .ok()?;
        return Some(2f64.powi(k));
    }
    s.parse().ok()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StepRepr {
    Number(f64),
    Text(String),
}

impl StepRepr {
    fn value<E: serde::de::Error>(self) -> Result<f64, E> {
        match self {
            StepRepr::Number(v) => Ok(v),
            StepRepr::Text(s) => {
                parse_step(&s).ok_or_else(|| E::custom(format!("cannot read step size {s:?}")))
            }
        }
    }
}

fn de_step<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    StepRepr::deserialize(d)?.value()
}

fn de_opt_step<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    Option::<StepRepr>::deserialize(d)?
        .map(StepRepr::value)
        .transpose()
}

fn de_steps<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    Vec::<StepRepr>::deserialize(d)?
        .into_iter()
        .map(StepRepr::value)
        .collect()
}

/// Model id, initial value and the parameters of that model; unused keys stay empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub id: String,
    pub initial: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_m1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

impl ModelSection {
    pub fn from_spec(spec: &ModelSpec) -> Self {
        let mut s = ModelSection {
            id: spec.id().name().to_string(),
            initial: spec.initial,
            kappa: None,
            theta: None,
            sigma: None,
            alpha: None,
            c1: None,
            c2: None,
            c3: None,
            a: None,
            b: None,
            gamma: None,
            alpha_m1: None,
            alpha_0: None,
            alpha_1: None,
            alpha_2: None,
            r: None,
            rho: None,
        };
        match spec.model {
            Model::Cir(p) => {
                (s.kappa, s.theta, s.sigma) = (Some(p.kappa), Some(p.theta), Some(p.sigma));
            }
            Model::Cev(p) => {
                (s.kappa, s.theta, s.sigma, s.alpha) =
                    (Some(p.kappa), Some(p.theta), Some(p.sigma), Some(p.alpha));
            }
            Model::Heston32(p) => (s.c1, s.c2, s.c3) = (Some(p.c1), Some(p.c2), Some(p.c3)),
            Model::WrightFisher(p) => (s.a, s.b, s.gamma) = (Some(p.a), Some(p.b), Some(p.gamma)),
            Model::AitSahalia(p) => {
                (s.alpha_m1, s.alpha_0, s.alpha_1, s.alpha_2) = (
                    Some(p.alpha_m1),
                    Some(p.alpha_0),
                    Some(p.alpha_1),
                    Some(p.alpha_2),
                );
                (s.sigma, s.r, s.rho) = (Some(p.sigma), Some(p.r), Some(p.rho));
            }
        }
        s
    }

    fn fields(&self) -> [(&'static str, Option<f64>); 16] {
        [
            ("kappa", self.kappa),
            ("theta", self.theta),
            ("sigma", self.sigma),
            ("alpha", self.alpha),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("a", self.a),
            ("b", self.b),
            ("gamma", self.gamma),
            ("alpha_m1", self.alpha_m1),
            ("alpha_0", self.alpha_0),
            ("alpha_1", self.alpha_1),
            ("alpha_2", self.alpha_2),
            ("r", self.r),
            ("rho", self.rho),
        ]
    }

    /// Builds the model; a missing parameter or a key that does not belong to the model
    /// is an error naming the field.
    pub fn to_spec(&self) -> Result<ModelSpec, ConfigError> {
        let id = ModelId::from_name(&self.id).ok_or_else(|| {
            let known: Vec<_> = ModelId::ALL.iter().map(|m| m.name()).collect();
            invalid(format!(
                "model.id: unknown model {:?} (known: {})",
                self.id,
                known.join(", ")
            ))
        })?;
        let wanted: &[&str] = match id {
            ModelId::Cir => &["kappa", "theta", "sigma"],
            ModelId::Cev => &["kappa", "theta", "sigma", "alpha"],
            ModelId::Heston32 => &["c1", "c2", "c3"],
            ModelId::WrightFisher => &["a", "b", "gamma"],
            ModelId::AitSahalia => &[
                "alpha_m1", "alpha_0", "alpha_1", "alpha_2", "sigma", "r", "rho",
            ],
        };
        for (name, value) in self.fields() {
            if value.is_some() && !wanted.contains(&name) {
                return Err(invalid(format!(
                    "model.{name}: not a parameter of {}",
                    id.name()
                )));
            }
        }
        let get = |name: &str| -> Result<f64, ConfigError> {
            self.fields()
                .iter()
                .find(|(n, _)| *n == name)
                .and_then(|(_, v)| *v)
                .ok_or_else(|| invalid(format!("model.{name}: missing (needed by {})", id.name())))
        };
        let model = match id {
            ModelId::Cir => Model::Cir(CirParams::new(get("kappa")?, get("theta")?, get("sigma")?)),
            ModelId::Cev => Model::Cev(CevParams {
                kappa: get("kappa")?,
                theta: get("theta")?,
                sigma: get("sigma")?,
                alpha: get("alpha")?,
            }),
            ModelId::Heston32 => Model::Heston32(Heston32Params {
                c1: get("c1")?,
                c2: get("c2")?,
                c3: get("c3")?,
            }),
            ModelId::WrightFisher => Model::WrightFisher(WrightFisherParams {
                a: get("a")?,
                b: get("b")?,
                gamma: get("gamma")?,
            }),
            ModelId::AitSahalia => Model::AitSahalia(AitSahaliaParams {
                alpha_m1: get("alpha_m1")?,
                alpha_0: get("alpha_0")?,
                alpha_1: get("alpha_1")?,
                alpha_2: get("alpha_2")?,
                sigma: get("sigma")?,
                r: get("r")?,
                rho: get("rho")?,
            }),
        };
        Ok(ModelSpec::new(model, self.initial))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub horizon: f64,
    /// Step of `simulate`.
    #[serde(deserialize_with = "de_step")]
    pub dt: f64,
    #[serde(
        default,
        deserialize_with = "de_opt_step",
        skip_serializing_if = "Option::is_none"
    )]
    pub dt_reference: Option<f64>,
    #[serde(
        default,
        deserialize_with = "de_steps",
        skip_serializing_if = "Vec::is_empty"
    )]
    pub ladder: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    #[serde(default = "default_scheme")]
    pub id: String,
    /// `auto` or `iterative`.
    #[serde(default = "default_solver")]
    pub solver: String,
    #[serde(default = "default_tol")]
    pub residual_tol: f64,
    #[serde(default = "default_iterations")]
    pub max_iterations: u32,
    #[serde(default = "default_eta")]
    pub eta: f64,
}

fn default_scheme() -> String {
    SchemeId::BemTransformed.name().to_string()
}

fn default_solver() -> String {
    "auto".to_string()
}

fn default_tol() -> f64 {
    StepSolverConfig::default().residual_tol
}

fn default_iterations() -> u32 {
    StepSolverConfig::default().max_iterations
}

fn default_eta() -> f64 {
    StepSolverConfig::default().eta
}

impl Default for SchemeSection {
    fn default() -> Self {
        SchemeSection {
            id: default_scheme(),
            solver: default_solver(),
            residual_tol: default_tol(),
            max_iterations: default_iterations(),
            eta: default_eta(),
        }
    }
}

impl SchemeSection {
    pub fn scheme(&self) -> Result<SchemeId, ConfigError> {
        SchemeId::from_name(&self.id).ok_or_else(|| {
            let known: Vec<_> = SchemeId::ALL.iter().map(|s| s.name()).collect();
            invalid(format!(
                "scheme.id: unknown scheme {:?} (known: {})",
                self.id,
                known.join(", ")
            ))
        })
    }

    pub fn config(&self, record: Record) -> Result<SchemeConfig, ConfigError> {
        let choice = match self.solver.as_str() {
            "auto" => SolverChoice::Auto,
            "iterative" => SolverChoice::Iterative,
            other => {
                return Err(invalid(format!(
                    "scheme.solver: expected \"auto\" or \"iterative\", got {other:?}"
                )))
            }
        };
        let solver = StepSolverConfig {
            residual_tol: self.residual_tol,
            max_iterations: self.max_iterations,
            eta: self.eta,
        };
        solver
            .validate()
            .map_err(|e| invalid(format!("scheme: {e}")))?;
        Ok(SchemeConfig {
            solver,
            choice,
            record,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub stream: u64,
    #[serde(default = "default_metric")]
    pub metric: String,
    #[serde(default = "default_p")]
    pub p: f64,
}

fn default_paths() -> usize {
    1000
}

fn default_metric() -> String {
    Metric::EndpointLp.name().to_string()
}

fn default_p() -> f64 {
    2.0
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        MonteCarloSection {
            n_paths: default_paths(),
            stream: 0,
            metric: default_metric(),
            p: default_p(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Falls back to `$LAMPERTI_OUT_DIR`, then `lamperti-out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Any of `csv`, `json`.
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_formats() -> Vec<String> {
    vec!["csv".to_string(), "json".to_string()]
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: None,
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    #[serde(default)]
    pub scheme: SchemeSection,
    #[serde(default)]
    pub monte_carlo: MonteCarloSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(ConfigError::Parse)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// Applies `section.key=value` overrides; values are read as TOML, falling back to
    /// a plain string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, ConfigError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut table: toml::Table =
            toml::Table::try_from(self).map_err(|e| ConfigError::Override(e.to_string()))?;
        for raw in overrides {
            let raw = raw.as_ref();
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| ConfigError::Override(format!("{raw:?} is not key=value")))?;
            let (section, field) = key
                .trim()
                .split_once('.')
                .ok_or_else(|| ConfigError::Override(format!("{key:?} is not section.key")))?;
            let value = parse_value(value.trim());
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(t) = entry else {
                return Err(ConfigError::Override(format!("{section} is not a section")));
            };
            t.insert(field.to_string(), value);
        }
        let text = toml::to_string(&table).map_err(|e| ConfigError::Override(e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn spec(&self) -> Result<ModelSpec, ConfigError> {
        self.model.to_spec()
    }

    pub fn metric(&self) -> Result<Metric, ConfigError> {
        Metric::from_name(&self.monte_carlo.metric)
            .filter(|m| matches!(m, Metric::EndpointLp | Metric::MaxGridLp))
            .ok_or_else(|| {
                invalid(format!(
                    "monte_carlo.metric: expected endpoint-lp or max-grid-lp, got {:?}",
                    self.monte_carlo.metric
                ))
            })
    }

    pub fn dt_reference(&self) -> Result<f64, ConfigError> {
        self.grid
            .dt_reference
            .ok_or_else(|| invalid("grid.dt_reference: missing (needed for error studies)"))
    }

    /// The ladder, each entry checked to be a power-of-two multiple of the reference step.
    pub fn ladder(&self) -> Result<Vec<f64>, ConfigError> {
        let reference = self.dt_reference()?;
        if self.grid.ladder.is_empty() {
            return Err(invalid("grid.ladder: empty"));
        }
        for (i, &dt) in self.grid.ladder.iter().enumerate() {
            dyadic_ratio(dt, reference).map_err(|_| {
                invalid(format!(
                    "grid.ladder[{i}] = {dt}: {}",
                    lamperti_core::Error::NonDyadic {
                        coarse: dt,
                        fine: reference
                    }
                ))
            })?;
        }
        Ok(self.grid.ladder.clone())
    }

    pub fn study(&self) -> Result<StrongErrorStudy, ConfigError> {
        Ok(StrongErrorStudy {
            spec: self.spec()?,
            scheme: self.scheme.scheme()?,
            horizon: self.grid.horizon,
            dt_reference: self.dt_reference()?,
            metric: self.metric()?,
            p: self.monte_carlo.p,
            n_paths: self.monte_carlo.n_paths,
            stream: self.monte_carlo.stream,
            config: self.scheme.config(Record::Full)?,
        })
    }

    /// Output directory: config, then the environment, then `lamperti-out`.
    pub fn out_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("lamperti-out"))
    }

    pub fn wants(&self, format: &str) -> bool {
        self.output.formats.iter().any(|f| f == format)
    }
}

fn parse_value(s: &str) -> toml::Value {
    match format!("v = {s}").parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(s.to_string())),
        Err(_) => toml::Value::String(s.to_string()),
    }
}
