use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use freeknot::mc::McConfig;
use freeknot::sim::SdePreset;
use freeknot::{ApproxParams, Norm};
use serde::{Deserialize, Serialize};

use crate::RunError;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "FREEKNOT_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Tau,
    Rate,
    AvgKnots,
    XiCheck,
    Smalldev,
    Negmom,
    EtaKappa,
    Diffusion,
    ApproximateFile,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Tau,
        Experiment::Rate,
        Experiment::AvgKnots,
        Experiment::XiCheck,
        Experiment::Smalldev,
        Experiment::Negmom,
        Experiment::EtaKappa,
        Experiment::Diffusion,
        Experiment::ApproximateFile,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Tau => "tau",
            Experiment::Rate => "rate",
            Experiment::AvgKnots => "avg-knots",
            Experiment::XiCheck => "xi-check",
            Experiment::Smalldev => "smalldev",
            Experiment::Negmom => "negmom",
            Experiment::EtaKappa => "eta-kappa",
            Experiment::Diffusion => "diffusion",
            Experiment::ApproximateFile => "approximate-file",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self, RunError> {
        Self::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|e| e.name()).collect();
            RunError::Config(format!("unknown experiment {s:?}, expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Every knob of a run. The same flat shape is used for the JSON config
/// file, for command-line overrides and for the config echo in reports.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Grid steps per unit time.
    #[arg(long)]
    pub grid_n: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub horizon_t: Option<f64>,
    #[arg(long)]
    pub horizon_cap: Option<f64>,
    #[arg(long)]
    pub tol_rel: Option<f64>,
    /// Spline degree.
    #[arg(long)]
    pub r: Option<usize>,
    /// Integration order of the Wiener process.
    #[arg(long)]
    pub s: Option<usize>,
    /// Norm index, a number >= 1 or `inf`.
    #[arg(long)]
    pub p: Option<Norm>,
    /// Averaging exponent.
    #[arg(long)]
    pub q: Option<f64>,
    /// Piece budget.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub k_list: Option<Vec<usize>>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub epsilon_list: Option<Vec<f64>>,
    #[arg(long)]
    pub j_max: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub p1: Option<f64>,
    #[arg(long)]
    pub p2: Option<f64>,
    /// `wiener`, `ou-sine` or `mean-reverting-tanh`.
    #[arg(long)]
    pub sde_preset: Option<String>,
    /// `exp1` or `constant:<c>`.
    #[arg(long)]
    pub sampler: Option<String>,
    /// Two-column CSV (time, value) for `approximate-file`.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| RunError::Config(format!("invalid config {}: {e}", path.display())))
    }

    /// Fields set in `top` win over fields set in `self`.
    pub fn overlay(&self, top: &Settings) -> Settings {
        let mut out = self.clone();
        overlay!(
            out, top, experiment, out, format, seed, replicates, grid_n, workers, horizon_t, horizon_cap, tol_rel,
            r, s, p, q, k, k_list, epsilon, epsilon_list, j_max, alpha, p1, p2, sde_preset, sampler, input
        );
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SamplerSpec {
    Exp1,
    Constant(f64),
}

impl FromStr for SamplerSpec {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self, RunError> {
        if s == "exp1" {
            return Ok(SamplerSpec::Exp1);
        }
        if let Some(c) = s.strip_prefix("constant:") {
            let v: f64 = c.parse().map_err(|_| RunError::Config(format!("bad constant in sampler {s:?}")))?;
            return Ok(SamplerSpec::Constant(v));
        }
        Err(RunError::Config(format!("unknown sampler {s:?}, expected exp1 or constant:<c>")))
    }
}

impl fmt::Display for SamplerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerSpec::Exp1 => f.write_str("exp1"),
            SamplerSpec::Constant(c) => write!(f, "constant:{c}"),
        }
    }
}

/// A fully resolved and validated run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub params: ApproxParams,
    pub mc: McConfig,
    pub k_list: Vec<usize>,
    pub epsilon: f64,
    pub epsilon_list: Vec<f64>,
    pub j_max: usize,
    pub alpha: f64,
    pub p1: f64,
    pub p2: f64,
    pub sde_preset: SdePreset,
    pub sampler: SamplerSpec,
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub format: Format,
}

fn auto_seed() -> u64 {
    use std::time::{SystemTime, UNIX_EPOCH};
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_nanos() as u64).unwrap_or(1)
}

fn default_workers() -> Result<usize, RunError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| RunError::Config(format!("{WORKERS_ENV} must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

impl RunConfig {
    /// Resolves `flags > file > defaults` and validates the result.
    pub fn resolve(experiment: Option<&str>, file: Option<&Settings>, flags: &Settings) -> Result<Self, RunError> {
        let base = file.cloned().unwrap_or_default();
        let s = base.overlay(flags);
        let name = experiment
            .map(str::to_owned)
            .or(s.experiment.clone())
            .ok_or_else(|| RunError::Config("no experiment given".into()))?;
        let experiment: Experiment = name.parse()?;
        let d = McConfig::default();
        let mc = McConfig {
            replicates: s.replicates.unwrap_or(d.replicates),
            seed: s.seed.unwrap_or_else(auto_seed),
            grid_n: s.grid_n.unwrap_or(d.grid_n),
            horizon_t: s.horizon_t.unwrap_or(d.horizon_t),
            horizon_cap: s.horizon_cap.unwrap_or(d.horizon_cap),
            workers: match s.workers {
                Some(w) => w,
                None => default_workers()?,
            },
            tol_rel: s.tol_rel.unwrap_or(d.tol_rel),
        };
        mc.validate().map_err(config_err)?;
        let p_default = match experiment {
            Experiment::EtaKappa => Norm::L2,
            _ => Norm::INF,
        };
        let p = s.p.unwrap_or(p_default);
        let r = s.r.unwrap_or(0);
        let sv = s.s.unwrap_or(0);
        let q = s.q.unwrap_or(1.0);
        let k = s.k.unwrap_or(16);
        if !(q >= 1.0) {
            return Err(RunError::Config(format!("averaging exponent must satisfy q >= 1, got {q}")));
        }
        if k == 0 {
            return Err(RunError::Config("need k >= 1".into()));
        }
        let wiener_study = matches!(
            experiment,
            Experiment::Tau | Experiment::Rate | Experiment::AvgKnots | Experiment::XiCheck
        );
        if wiener_study && r < sv {
            return Err(RunError::Config(format!("degree r = {r} must be at least the integration order s = {sv}")));
        }
        if r > freeknot::fit::MAX_DEGREE {
            return Err(RunError::Config(format!("degree r = {r} exceeds {}", freeknot::fit::MAX_DEGREE)));
        }
        let params = ApproxParams { r, s: sv, p, q, k };
        let k_list = s.k_list.clone().unwrap_or_else(|| vec![4, 8, 16, 32, 64]);
        if k_list.is_empty() || k_list.contains(&0) {
            return Err(RunError::Config("k_list must hold positive piece counts".into()));
        }
        let epsilon_list = s.epsilon_list.clone().unwrap_or_else(|| match experiment {
            Experiment::Smalldev => vec![0.32, 0.34, 0.36, 0.38, 0.40],
            _ => vec![0.4, 0.2, 0.1, 0.05],
        });
        let epsilon = s.epsilon.unwrap_or(1.0);
        if !(epsilon > 0.0) || epsilon_list.iter().any(|e| !(*e > 0.0)) {
            return Err(RunError::Config("thresholds must be positive".into()));
        }
        let pv = if p.is_inf() { 2.0 } else { p.value() };
        let p1 = s.p1.unwrap_or(2.0 * pv / (pv + 2.0));
        let p2 = s.p2.unwrap_or(pv);
        if experiment == Experiment::EtaKappa && p.is_inf() {
            return Err(RunError::Config("eta-kappa needs a finite p >= 1".into()));
        }
        if !(p1 >= 1.0 && p2 >= 1.0) {
            return Err(RunError::Config(format!("need p1 >= 1 and p2 >= 1, got {p1} and {p2}")));
        }
        let preset_name = s.sde_preset.clone().unwrap_or_else(|| "ou-sine".into());
        let sde_preset = SdePreset::from_name(&preset_name).ok_or_else(|| {
            let names: Vec<&str> = SdePreset::ALL.iter().map(|p| p.name()).collect();
            RunError::Config(format!("unknown SDE preset {preset_name:?}, expected one of {}", names.join(", ")))
        })?;
        let sampler: SamplerSpec = s.sampler.as_deref().unwrap_or("exp1").parse()?;
        let alpha = s.alpha.unwrap_or(1.0);
        if !(alpha > 0.0) {
            return Err(RunError::Config(format!("need alpha > 0, got {alpha}")));
        }
        let j_max = s.j_max.unwrap_or(5);
        if j_max == 0 {
            return Err(RunError::Config("need j_max >= 1".into()));
        }
        if experiment == Experiment::ApproximateFile && s.input.is_none() {
            return Err(RunError::Config("approximate-file needs --input".into()));
        }
        Ok(Self {
            experiment,
            params,
            mc,
            k_list,
            epsilon,
            epsilon_list,
            j_max,
            alpha,
            p1,
            p2,
            sde_preset,
            sampler,
            input: s.input.clone(),
            out: s.out.clone().unwrap_or_else(|| PathBuf::from(".")),
            format: s.format.unwrap_or_default(),
        })
    }

    /// Flat echo that reproduces the run when fed back as a config file.
    pub fn echo(&self) -> Settings {
        Settings {
            experiment: Some(self.experiment.name().into()),
            out: Some(self.out.clone()),
            format: Some(self.format),
            seed: Some(self.mc.seed),
            replicates: Some(self.mc.replicates),
            grid_n: Some(self.mc.grid_n),
            workers: Some(self.mc.workers),
            horizon_t: Some(self.mc.horizon_t),
            horizon_cap: Some(self.mc.horizon_cap),
            tol_rel: Some(self.mc.tol_rel),
            r: Some(self.params.r),
            s: Some(self.params.s),
            p: Some(self.params.p),
            q: Some(self.params.q),
            k: Some(self.params.k),
            k_list: Some(self.k_list.clone()),
            epsilon: Some(self.epsilon),
            epsilon_list: Some(self.epsilon_list.clone()),
            j_max: Some(self.j_max),
            alpha: Some(self.alpha),
            p1: Some(self.p1),
            p2: Some(self.p2),
            sde_preset: Some(self.sde_preset.name().into()),
            sampler: Some(self.sampler.to_string()),
            input: self.input.clone(),
        }
    }
}

fn config_err(e: freeknot::Error) -> RunError {
    RunError::Config(e.to_string())
}
