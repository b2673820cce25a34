//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 1
//! trace_every = 1
//!
//! [grid]
//! dims = [32, 32]
//!
//! [phantom]
//! kind = "multi-sphere"      # or "nested"
//! eta_m = 1.333
//! eta_max = 1.363
//!
//! [forward]
//! model = "linear"           # or "nonlinear"
//! views = 12
//! mask_fraction = 0.8
//! noise_snr_db = 30.0
//!
//! [problem]
//! lambda = 3e-5
//! tv = "isotropic"
//! lower = 0.0
//!
//! [[solver]]
//! kind = "aspm"
//! step_scale = 0.1
//!
//! [[solver]]
//! kind = "bqnpm"
//! subsets = 4
//! gamma = 0.8
//! ```
//!
//! Sub-seeds (`phantom.seed`, `forward.seed`, `solver.seed`) default to the
//! top-level `seed`, so `--seed` reseeds the whole experiment.

use std::path::{Path, PathBuf};

use bqnpm::dual_tv::DualTvSettings;
use bqnpm::forward::{PhantomKind, ViewSpec};
use bqnpm::solvers::{HessianMode, SolverKind, SubsetOrder};
use bqnpm::{BoxSet, Grid, SolverConfig64, TvMode};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Overridden by `--outdir`.
    #[serde(default)]
    pub outdir: Option<PathBuf>,
    /// Keep every n-th trace row (the last row is always kept).
    #[serde(default = "one")]
    pub trace_every: usize,
    #[serde(default = "yes")]
    pub plots: bool,
    pub grid: GridSpec,
    #[serde(default)]
    pub phantom: PhantomSpec,
    #[serde(default)]
    pub forward: ForwardSpec,
    #[serde(default)]
    pub problem: ProblemSpec,
    #[serde(rename = "solver", default)]
    pub solvers: Vec<SolverSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dims: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomShape {
    #[default]
    MultiSphere,
    Nested,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomSpec {
    pub kind: PhantomShape,
    pub eta_m: f64,
    pub eta_max: f64,
    pub seed: Option<u64>,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            kind: PhantomShape::MultiSphere,
            eta_m: 1.333,
            eta_max: 1.363,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[default]
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForwardSpec {
    pub model: ModelKind,
    pub views: usize,
    pub mask_fraction: f64,
    pub strength: f64,
    pub noise_snr_db: Option<f64>,
    pub seed: Option<u64>,
}

impl Default for ForwardSpec {
    fn default() -> Self {
        let v = ViewSpec::default();
        Self {
            model: ModelKind::Linear,
            views: v.views,
            mask_fraction: v.mask_fraction,
            strength: v.strength,
            noise_snr_db: v.noise_snr_db,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TvSpec {
    #[default]
    Isotropic,
    Anisotropic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSpec {
    pub lambda: f64,
    pub tv: TvSpec,
    pub lower: f64,
    pub upper: f64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            tv: TvSpec::Isotropic,
            lower: 0.0,
            upper: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverName {
    Aspm,
    Sqnpm,
    Bqnpm,
}

impl From<SolverName> for SolverKind {
    fn from(s: SolverName) -> Self {
        match s {
            SolverName::Aspm => SolverKind::Aspm,
            SolverName::Sqnpm => SolverKind::Sqnpm,
            SolverName::Bqnpm => SolverKind::Bqnpm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderSpec {
    #[default]
    Cyclic,
    Shuffled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HessianSpec {
    #[default]
    Sr1,
    FixedDiagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualSpec {
    pub eps: f64,
    pub max_iter: usize,
    pub accelerated: bool,
}

impl Default for DualSpec {
    fn default() -> Self {
        let d = DualTvSettings::<f64>::default();
        Self {
            eps: d.eps,
            max_iter: d.max_iter,
            accelerated: d.accelerated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub kind: SolverName,
    /// Output file stem; defaults to the solver name.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default = "four")]
    pub subsets: usize,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default = "unit")]
    pub step_scale: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "hundred")]
    pub max_outer: usize,
    #[serde(default)]
    pub order: OrderSpec,
    #[serde(default = "yes")]
    pub momentum: bool,
    #[serde(default)]
    pub hessian: HessianSpec,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "fifty")]
    pub lipschitz_iters: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub dual: DualSpec,
}

fn one() -> usize {
    1
}
fn four() -> usize {
    4
}
fn fifty() -> usize {
    50
}
fn hundred() -> usize {
    100
}
fn unit() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_gamma() -> f64 {
    bqnpm::sr1::DEFAULT_GAMMA
}

impl SolverSpec {
    pub fn new(kind: SolverName) -> Self {
        Self {
            kind,
            label: None,
            subsets: four(),
            step: None,
            step_scale: unit(),
            gamma: default_gamma(),
            max_outer: hundred(),
            order: OrderSpec::default(),
            momentum: true,
            hessian: HessianSpec::default(),
            alpha: None,
            lipschitz_iters: fifty(),
            seed: None,
            dual: DualSpec::default(),
        }
    }

    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| SolverKind::from(self.kind).name().to_string())
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.grid()?;
        if self.solvers.is_empty() {
            return bad("at least one [[solver]] is required".into());
        }
        if self.trace_every == 0 {
            return bad("trace_every must be at least 1".into());
        }
        if self.forward.views == 0 {
            return bad("forward.views must be at least 1".into());
        }
        if !(self.phantom.eta_max >= self.phantom.eta_m) {
            return bad("phantom.eta_max must not be below phantom.eta_m".into());
        }
        self.bounds()?;
        let mut labels = std::collections::BTreeSet::new();
        for s in &self.solvers {
            if !labels.insert(s.label()) {
                return bad(format!("duplicate solver label `{}`", s.label()));
            }
            self.solver_config(s)?
                .validate(self.forward.views)
                .map_err(|e| CliError::Config(format!("solver `{}`: {e}", s.label())))?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Grid::new(&self.grid.dims).map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    pub fn tv_mode(&self) -> TvMode {
        match self.problem.tv {
            TvSpec::Isotropic => TvMode::Isotropic,
            TvSpec::Anisotropic => TvMode::Anisotropic,
        }
    }

    pub fn bounds(&self) -> Result<BoxSet<f64>, CliError> {
        BoxSet::uniform(self.problem.lower, self.problem.upper)
            .map_err(|e| CliError::Config(format!("problem bounds: {e}")))
    }

    pub fn phantom_kind(&self) -> PhantomKind {
        match self.phantom.kind {
            PhantomShape::MultiSphere => PhantomKind::MultiSphere,
            PhantomShape::Nested => PhantomKind::Nested,
        }
    }

    pub fn phantom_seed(&self) -> u64 {
        self.phantom.seed.unwrap_or(self.seed)
    }

    pub fn view_spec(&self) -> ViewSpec {
        ViewSpec {
            views: self.forward.views,
            mask_fraction: self.forward.mask_fraction,
            strength: match self.forward.model {
                ModelKind::Linear => 0.0,
                ModelKind::Nonlinear => self.forward.strength,
            },
            seed: self.forward.seed.unwrap_or(self.seed),
            noise_snr_db: self.forward.noise_snr_db,
        }
    }

    pub fn solver_config(&self, s: &SolverSpec) -> Result<SolverConfig64, CliError> {
        Ok(SolverConfig64 {
            subsets: s.subsets,
            step: s.step,
            step_scale: s.step_scale,
            lambda: self.problem.lambda,
            gamma: s.gamma,
            max_outer: s.max_outer,
            dual: DualTvSettings {
                eps: s.dual.eps,
                max_iter: s.dual.max_iter,
                accelerated: s.dual.accelerated,
                ..DualTvSettings::default()
            },
            mode: self.tv_mode(),
            bounds: self.bounds()?,
            hessian: match s.hessian {
                HessianSpec::Sr1 => HessianMode::Sr1,
                HessianSpec::FixedDiagonal => HessianMode::FixedDiagonal,
            },
            momentum: s.momentum,
            order: match s.order {
                OrderSpec::Cyclic => SubsetOrder::Cyclic,
                OrderSpec::Shuffled => SubsetOrder::Shuffled,
            },
            seed: s.seed.unwrap_or(self.seed),
            lipschitz_iters: s.lipschitz_iters,
            alpha: s.alpha,
            ..SolverConfig64::default()
        })
    }

    /// Apply one `--param name=value` override to every solver (or to the
    /// problem/phantom for `lambda` and `eta_max`).
    pub fn apply_param(&mut self, name: &str, value: &str) -> Result<(), CliError> {
        let num = || -> Result<f64, CliError> {
            value
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("`{value}` is not a number for `{name}`")))
        };
        let count = || -> Result<usize, CliError> {
            value
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("`{value}` is not a count for `{name}`")))
        };
        match name.to_ascii_lowercase().as_str() {
            "k_s" | "ks" | "subsets" => {
                let k = count()?;
                self.solvers.iter_mut().for_each(|s| s.subsets = k);
            }
            "gamma" => {
                let g = num()?;
                self.solvers.iter_mut().for_each(|s| s.gamma = g);
            }
            "step" => {
                let a = num()?;
                self.solvers.iter_mut().for_each(|s| s.step = Some(a));
            }
            "max_outer" => {
                let n = count()?;
                self.solvers.iter_mut().for_each(|s| s.max_outer = n);
            }
            "lambda" => self.problem.lambda = num()?,
            "eta_max" => self.phantom.eta_max = num()?,
            other => return Err(CliError::Config(format!("unknown sweep parameter `{other}`"))),
        }
        Ok(())
    }
}

/// Parse `name=v1,v2,...`.
pub fn parse_sweep(arg: &str) -> Result<(String, Vec<String>), CliError> {
    let (name, values) = arg
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("expected name=v1,v2,... but got `{arg}`")))?;
    let values: Vec<String> = values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(String::from)
        .collect();
    if name.trim().is_empty() || values.is_empty() {
        return Err(CliError::Config(format!("empty sweep `{arg}`")));
    }
    Ok((name.trim().to_string(), values))
}
