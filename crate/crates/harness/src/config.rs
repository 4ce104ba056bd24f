//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment, lists are comma-separated.
//! Unknown keys are rejected so typos do not silently fall back to defaults.
//!
//! ```text
//! objective = planted_quadratic
//! dim = 1000
//! eff_dim = 10
//! curvature = -1          # one value for all directions, or eff_dim values
//! method = full
//! seeds = 0, 1, 2, 3, 4
//! budget = 600
//! warmup = 100
//! period = 50
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use subspace_search::surrogate::{IdwConfig, RemoteClient, RemoteSurrogate, Transport};
use subspace_search::{
    LqrConfig, LqrRollout, Method, Objective, PlantedQuadratic, SearchConfig, SurrogateKind,
};

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveSpec {
    PlantedQuadratic {
        dim: usize,
        eff_dim: usize,
        curvature: Vec<f64>,
        seed: u64,
        noise_std: f64,
    },
    Lqr {
        config: LqrConfig,
        noise_std: f64,
    },
}

impl ObjectiveSpec {
    pub fn dim(&self) -> usize {
        match self {
            ObjectiveSpec::PlantedQuadratic { dim, .. } => *dim,
            ObjectiveSpec::Lqr { config, .. } => config.state_dim * config.action_dim,
        }
    }

    pub fn build(&self) -> Result<Box<dyn Objective>> {
        Ok(match self {
            ObjectiveSpec::PlantedQuadratic {
                dim,
                eff_dim,
                curvature,
                seed,
                noise_std,
            } => {
                let spectrum = if curvature.len() == 1 {
                    vec![curvature[0]; *eff_dim]
                } else {
                    curvature.clone()
                };
                Box::new(PlantedQuadratic::new(*dim, *eff_dim, &spectrum, *seed)?.with_noise(*noise_std))
            }
            ObjectiveSpec::Lqr { config, noise_std } => {
                Box::new(LqrRollout::new(config.clone())?.with_noise(*noise_std))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrogateChoice {
    Idw,
    Ridge,
    Remote,
    Oracle,
}

impl FromStr for SurrogateChoice {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "idw" => SurrogateChoice::Idw,
            "ridge" => SurrogateChoice::Ridge,
            "remote" => SurrogateChoice::Remote,
            "oracle" => SurrogateChoice::Oracle,
            _ => bail!("unknown surrogate {s:?} (expected idw, ridge, remote or oracle)"),
        })
    }
}

impl fmt::Display for SurrogateChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SurrogateChoice::Idw => "idw",
            SurrogateChoice::Ridge => "ridge",
            SurrogateChoice::Remote => "remote",
            SurrogateChoice::Oracle => "oracle",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerChoice {
    Sgd,
    Adam,
}

impl FromStr for OptimizerChoice {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sgd" => OptimizerChoice::Sgd,
            "adam" => OptimizerChoice::Adam,
            _ => bail!("unknown optimizer {s:?} (expected sgd or adam)"),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub objective: ObjectiveSpec,
    pub search: SearchConfig,
    pub method: Method,
    pub seeds: Vec<u64>,
    /// Total true evaluations per run.
    pub budget: u64,
    pub optimizer: OptimizerChoice,
    pub learning_rate: f64,
    pub surrogate: SurrogateChoice,
    pub idw_power: f64,
    pub ridge_lambda: f64,
    pub remote: Option<String>,
    pub out: PathBuf,
    /// Candidates per pool scored by brute force in the ranking analysis.
    pub rank_pool: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            objective: ObjectiveSpec::PlantedQuadratic {
                dim: 1000,
                eff_dim: 10,
                curvature: vec![-1.0],
                seed: 0,
                noise_std: 0.0,
            },
            search: SearchConfig::default(),
            method: Method::Full,
            seeds: vec![0, 1, 2, 3, 4],
            budget: 200_000,
            optimizer: OptimizerChoice::Adam,
            learning_rate: 1e-3,
            surrogate: SurrogateChoice::Idw,
            idw_power: 2.0,
            ridge_lambda: 1e-6,
            remote: None,
            out: PathBuf::from("results"),
            rank_pool: 256,
        }
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow!("{key}: cannot parse {s:?}: {e}")))
        .collect()
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| anyhow!("{key}: cannot parse {value:?}: {e}"))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
            let key = k.trim().to_string();
            if pairs.insert(key.clone(), v.trim().to_string()).is_some() {
                bail!("line {}: duplicate key {key:?}", lineno + 1);
            }
        }
        Self::from_pairs(pairs)
    }

    fn from_pairs(mut pairs: BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut take = |key: &str| pairs.remove(key);

        let kind = take("objective").unwrap_or_else(|| "planted_quadratic".into());
        let noise_std: f64 = take("noise_std").map(|v| parse_one("noise_std", &v)).transpose()?.unwrap_or(0.0);
        cfg.objective = match kind.as_str() {
            "planted_quadratic" => ObjectiveSpec::PlantedQuadratic {
                dim: take("dim").map(|v| parse_one("dim", &v)).transpose()?.unwrap_or(1000),
                eff_dim: take("eff_dim").map(|v| parse_one("eff_dim", &v)).transpose()?.unwrap_or(10),
                curvature: take("curvature")
                    .map(|v| parse_list("curvature", &v))
                    .transpose()?
                    .unwrap_or_else(|| vec![-1.0]),
                seed: take("objective_seed")
                    .map(|v| parse_one("objective_seed", &v))
                    .transpose()?
                    .unwrap_or(0),
                noise_std,
            },
            "lqr" => {
                let d = LqrConfig::default();
                ObjectiveSpec::Lqr {
                    config: LqrConfig {
                        state_dim: take("lqr_state_dim").map(|v| parse_one("lqr_state_dim", &v)).transpose()?.unwrap_or(d.state_dim),
                        action_dim: take("lqr_action_dim").map(|v| parse_one("lqr_action_dim", &v)).transpose()?.unwrap_or(d.action_dim),
                        horizon: take("lqr_horizon").map(|v| parse_one("lqr_horizon", &v)).transpose()?.unwrap_or(d.horizon),
                        initial_states: take("lqr_initial_states")
                            .map(|v| parse_one("lqr_initial_states", &v))
                            .transpose()?
                            .unwrap_or(d.initial_states),
                        initial_scale: take("lqr_initial_scale")
                            .map(|v| parse_one("lqr_initial_scale", &v))
                            .transpose()?
                            .unwrap_or(d.initial_scale),
                        control_weight: take("lqr_control_weight")
                            .map(|v| parse_one("lqr_control_weight", &v))
                            .transpose()?
                            .unwrap_or(d.control_weight),
                        spectral_radius: take("lqr_spectral_radius")
                            .map(|v| parse_one("lqr_spectral_radius", &v))
                            .transpose()?
                            .unwrap_or(d.spectral_radius),
                        seed: take("objective_seed")
                            .map(|v| parse_one("objective_seed", &v))
                            .transpose()?
                            .unwrap_or(d.seed),
                    },
                    noise_std,
                }
            }
            other => bail!("unknown objective {other:?} (expected planted_quadratic or lqr)"),
        };

        let s = &mut cfg.search;
        macro_rules! field {
            ($key:literal, $slot:expr) => {
                if let Some(v) = take($key) {
                    $slot = parse_one($key, &v)?;
                }
            };
        }
        field!("rank", s.rank);
        field!("inner_iterations", s.inner_iterations);
        field!("context_size", s.context_size);
        field!("pool_size", s.pool_size);
        field!("radius", s.radius);
        field!("sigma", s.sigma);
        field!("warmup", s.warmup);
        field!("period", s.period);
        field!("window", s.window);
        field!("rank_threshold", s.rank_threshold);
        field!("budget", cfg.budget);
        field!("learning_rate", cfg.learning_rate);
        field!("idw_power", cfg.idw_power);
        field!("ridge_lambda", cfg.ridge_lambda);
        field!("rank_pool", cfg.rank_pool);
        if let Some(v) = take("method") {
            cfg.method = v.parse().map_err(|e: String| anyhow!(e))?;
        }
        if let Some(v) = take("optimizer") {
            cfg.optimizer = v.parse()?;
        }
        if let Some(v) = take("surrogate") {
            cfg.surrogate = v.parse()?;
        }
        if let Some(v) = take("seeds") {
            cfg.seeds = parse_list("seeds", &v)?;
        }
        if let Some(v) = take("remote") {
            cfg.remote = Some(v);
        }
        if let Some(v) = take("out") {
            cfg.out = PathBuf::from(v);
        }

        if let Some(k) = pairs.keys().next() {
            bail!("unknown key {k:?}");
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        if self.seeds.is_empty() {
            bail!("seeds must not be empty");
        }
        if self.method != Method::LocalOnly && self.budget < self.search.warmup {
            bail!(
                "budget {} is below warmup {}: no search round could ever run",
                self.budget,
                self.search.warmup
            );
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            bail!("learning_rate must be positive");
        }
        if let ObjectiveSpec::PlantedQuadratic { eff_dim, curvature, .. } = &self.objective {
            if curvature.len() != 1 && curvature.len() != *eff_dim {
                bail!("curvature needs 1 or {eff_dim} values, got {}", curvature.len());
            }
        }
        if self.surrogate == SurrogateChoice::Remote && self.remote.is_none() {
            bail!("surrogate = remote needs `remote = tcp:HOST:PORT` or `remote = stdio:COMMAND`");
        }
        if self.rank_pool < 2 {
            bail!("rank_pool must be at least 2");
        }
        Ok(())
    }

    /// Instantiates the surrogate; remote kinds open their connection here.
    pub fn surrogate_kind(&self) -> Result<SurrogateKind> {
        Ok(match self.surrogate {
            SurrogateChoice::Idw => SurrogateKind::Idw(IdwConfig {
                power: self.idw_power,
                ..IdwConfig::default()
            }),
            SurrogateChoice::Ridge => SurrogateKind::Ridge {
                lambda: self.ridge_lambda,
            },
            SurrogateChoice::Oracle => SurrogateKind::Oracle,
            SurrogateChoice::Remote => {
                let spec = self.remote.as_deref().expect("validated");
                let transport: Transport = spec.parse()?;
                let client = RemoteClient::connect(&transport, None)
                    .with_context(|| format!("connecting to surrogate server at {transport}"))?;
                SurrogateKind::Remote(RemoteSurrogate::new(client))
            }
        })
    }
}
