//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use dro_opf::methods::{Method, MethodConfig};
use dro_opf::evaluate::EvalOptions;
use serde::{Deserialize, Serialize};

/// Wind scenario presets: farm capacity and the per-unit context.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 200 MW farms forecast at 180 MW.
    Medium,
    /// 250 MW farms forecast at 225 MW.
    High,
}

impl Preset {
    pub fn capacity(self) -> f64 {
        match self {
            Preset::Medium => 200.0,
            Preset::High => 250.0,
        }
    }

    pub fn forecast(self) -> f64 {
        match self {
            Preset::Medium => 180.0,
            Preset::High => 225.0,
        }
    }
}

/// `points` values: 0, then geometric from `first` up to `ceiling`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoGrid {
    pub ceiling: f64,
    pub points: usize,
    #[serde(default)]
    pub first: Option<f64>,
}

impl RhoGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points == 0 || !(self.ceiling >= 0.0) {
            bail!("rho_grid needs points >= 1 and ceiling >= 0");
        }
        if self.points == 1 {
            return Ok(vec![0.0]);
        }
        let steps = self.points - 1;
        let first = self.first.unwrap_or(self.ceiling / 2f64.powi(steps as i32 - 1));
        if !(first > 0.0 && first <= self.ceiling) {
            bail!("rho_grid.first must lie in (0, ceiling]");
        }
        let ratio = if steps > 1 { (self.ceiling / first).powf(1.0 / (steps - 1) as f64) } else { 1.0 };
        let mut out = vec![0.0];
        out.extend((0..steps).map(|k| first * ratio.powi(k as i32)));
        *out.last_mut().unwrap() = self.ceiling;
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: PathBuf,
    pub pool: PathBuf,
    #[serde(default)]
    pub preset: Option<Preset>,
    /// Farm capacity in MW applied to every farm; overrides the preset.
    #[serde(default)]
    pub capacity: Option<f64>,
    /// Forecast per farm in MW; overrides the preset.
    #[serde(default)]
    pub context: Option<Vec<f64>>,
    pub methods: Vec<MethodConfig>,
    pub sample_sizes: Vec<usize>,
    /// Explicit budget excesses; alternative to `rho_grid`.
    #[serde(default)]
    pub rho_excess: Option<Vec<f64>>,
    #[serde(default)]
    pub rho_grid: Option<RhoGrid>,
    pub runs: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub evaluation: EvalOptions,
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_test_size() -> usize {
    1000
}

fn default_seed() -> u64 {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.grid, &mut cfg.pool] {
            if p.is_relative() && !p.exists() {
                let candidate = base.join(&*p);
                if candidate.exists() {
                    *p = candidate;
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.sample_sizes.is_empty() {
            bail!("methods and sample_sizes must be non-empty");
        }
        if self.runs == 0 || self.test_size == 0 {
            bail!("runs and test_size must be at least 1");
        }
        if self.sample_sizes.contains(&0) {
            bail!("sample sizes must be positive");
        }
        if self.rho_excess.is_some() == self.rho_grid.is_some() {
            bail!("give exactly one of rho_excess and rho_grid");
        }
        if self.rho_values()?.iter().any(|r| !(*r >= 0.0)) {
            bail!("rho_excess values must be >= 0");
        }
        for m in &self.methods {
            MethodConfig { epsilon: self.epsilon, ..m.clone() }.validate()?;
        }
        Ok(())
    }

    pub fn rho_values(&self) -> Result<Vec<f64>> {
        match (&self.rho_excess, &self.rho_grid) {
            (Some(v), None) if !v.is_empty() => Ok(v.clone()),
            (None, Some(g)) => g.values(),
            _ => bail!("rho_excess must be a non-empty list"),
        }
    }

    /// Per-method settings with the shared ε applied.
    pub fn method_configs(&self) -> Vec<MethodConfig> {
        self.methods.iter().map(|m| MethodConfig { epsilon: self.epsilon, ..m.clone() }).collect()
    }

    /// Farm capacity and context resolved from preset and overrides.
    pub fn wind_setup(&self, grid_capacities: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n_w = grid_capacities.len();
        let capacity = match (self.capacity, self.preset) {
            (Some(c), _) => vec![c; n_w],
            (None, Some(p)) => vec![p.capacity(); n_w],
            (None, None) => grid_capacities.to_vec(),
        };
        let context = match (&self.context, self.preset) {
            (Some(c), _) => c.clone(),
            (None, Some(p)) => capacity.iter().map(|c| c * p.forecast() / p.capacity()).collect(),
            (None, None) => bail!("set either a preset or an explicit context"),
        };
        if context.len() != n_w {
            bail!("context has {} entries for {n_w} wind farms", context.len());
        }
        Ok((capacity, context))
    }

    pub fn has_method(&self, m: Method) -> bool {
        self.methods.iter().any(|c| c.method == m)
    }
}
