//! Run configuration: one JSON file, command-line flags win.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dfsvm::data_io::{Quarter, TransformCode};
use dfsvm::mcmc::ChainConfig;
use dfsvm::model::{Leverage, ModelConfig, PriorHyper};
use dfsvm::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub priors: PriorHyper,
    pub chain: ChainConfig,
    pub data: Option<DataSection>,
    pub simulate: Option<SimulateSection>,
    pub forecast: ForecastSection,
    pub backtest: Option<BacktestSection>,
    pub evaluate: Option<EvaluateSection>,
    pub checkpoint: Option<CheckpointSection>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub variant: String,
    pub q: usize,
    pub lags: usize,
    /// Overrides the variant's leverage pattern.
    pub leverage: Option<Leverage>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { variant: "DFSVML".into(), q: 1, lags: 1, leverage: None }
    }
}

impl ModelSection {
    pub fn build(&self, p: usize) -> Result<ModelConfig> {
        let mut cfg = ModelConfig::variant(&self.variant, p, self.q, self.lags)?;
        if let Some(l) = self.leverage {
            if !cfg.benchmark_lsvvar {
                cfg = cfg.with_leverage(l);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSpec {
    pub id: String,
    pub transform: TransformCode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Quarterly CSV with a date column followed by one column per series.
    pub path: PathBuf,
    /// Series to load and their transforms; empty takes every column as is.
    #[serde(default)]
    pub series: Vec<SeriesSpec>,
    #[serde(default)]
    pub start: Option<Quarter>,
    #[serde(default)]
    pub end: Option<Quarter>,
    #[serde(default = "yes")]
    pub standardize: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub p: usize,
    pub n: usize,
    /// Parameter JSON; defaults to a fixed illustrative parameter set.
    #[serde(default)]
    pub params: Option<PathBuf>,
    #[serde(default = "first_quarter")]
    pub start: Quarter,
}

fn first_quarter() -> Quarter {
    Quarter::new(1960, 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForecastSection {
    pub horizon: usize,
    pub paths_per_draw: usize,
    pub seed: u64,
    /// Draws written by `fit`; when absent `forecast` fits first.
    pub draws: Option<PathBuf>,
}

impl Default for ForecastSection {
    fn default() -> Self {
        ForecastSection { horizon: 8, paths_per_draw: 1, seed: 1, draws: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestSection {
    pub first_origin: Quarter,
    pub max_horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    /// Model name to forecast CSV.
    pub results: BTreeMap<String, PathBuf>,
    pub benchmark: String,
    /// Horizons to tabulate; empty means all.
    #[serde(default)]
    pub horizons: Vec<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_n_boot")]
    pub n_boot: usize,
    #[serde(default)]
    pub block_len: Option<usize>,
    #[serde(default)]
    pub harvey: bool,
    #[serde(default = "one")]
    pub seed: u64,
}

fn default_alpha() -> f64 {
    0.1
}

fn default_n_boot() -> usize {
    5000
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointSection {
    pub dir: PathBuf,
    pub every: usize,
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, flags: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                serde_json::from_str::<RunConfig>(&text)
                    .map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if flags.seed.is_some() {
            cfg.seed = flags.seed;
        }
        if flags.threads.is_some() {
            cfg.threads = flags.threads;
        }
        if flags.out_dir.is_some() {
            cfg.out_dir = flags.out_dir.clone();
        }
        // A top-level seed drives every random stream of the run.
        if let Some(s) = cfg.seed {
            cfg.chain.seed = s;
            cfg.forecast.seed = s;
            if let Some(e) = cfg.evaluate.as_mut() {
                e.seed = s;
            }
        }
        cfg.chain.validate()?;
        if cfg.threads == Some(0) {
            return Err(Error::InvalidConfig("threads must be at least 1".into()));
        }
        if cfg.forecast.horizon == 0 || cfg.forecast.paths_per_draw == 0 {
            return Err(Error::InvalidConfig("forecast horizon and paths_per_draw must be positive".into()));
        }
        if let Some(e) = &cfg.evaluate {
            if !(e.alpha > 0.0 && e.alpha < 1.0) || e.n_boot == 0 {
                return Err(Error::InvalidConfig("evaluate needs 0 < alpha < 1 and n_boot >= 1".into()));
            }
        }
        Ok(cfg)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn data(&self) -> Result<&DataSection> {
        self.data.as_ref().ok_or_else(|| Error::InvalidConfig("missing `data` section".into()))
    }
}
