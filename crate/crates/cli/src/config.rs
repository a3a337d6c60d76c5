//! Command-line surface and the validated run configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};
use tvvar_core::modelselect::PenaltyBandwidth;
use tvvar_core::simlab::InnovationLaw;

use crate::error::{CliError, CliResult};

/// `auto` or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Choice<T> {
    Auto,
    Fixed(T),
}

impl<T: FromStr> FromStr for Choice<T> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Choice::Auto);
        }
        s.parse().map(Choice::Fixed).map_err(|_| format!("expected 'auto' or a number, got {s:?}"))
    }
}

impl<T: fmt::Display> fmt::Display for Choice<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choice::Auto => f.write_str("auto"),
            Choice::Fixed(v) => v.fmt(f),
        }
    }
}

impl<T: Serialize> Serialize for Choice<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Choice::Auto => s.serialize_str("auto"),
            Choice::Fixed(v) => v.serialize(s),
        }
    }
}

/// Evaluation points in `(0, 1]`: every sample point `t / T`, `n` equally
/// spaced points `i / n`, or an explicit list.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Sample,
    Count(usize),
    Points(Vec<f64>),
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("sample") {
            return Ok(GridSpec::Sample);
        }
        if !s.contains(['.', ',', 'e', 'E']) {
            if let Ok(n) = s.parse::<usize>() {
                return Ok(GridSpec::Count(n));
            }
        }
        s.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad grid point {v:?}")))
            .collect::<Result<Vec<_>, _>>()
            .map(GridSpec::Points)
    }
}

impl Serialize for GridSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            GridSpec::Sample => s.serialize_str("sample"),
            GridSpec::Count(n) => s.serialize_u64(*n as u64),
            GridSpec::Points(p) => p.serialize(s),
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> CliResult<()> {
        match self {
            GridSpec::Sample => Ok(()),
            GridSpec::Count(0) => Err(CliError::config("grid count must be positive")),
            GridSpec::Count(_) => Ok(()),
            GridSpec::Points(p) if p.is_empty() => Err(CliError::config("empty grid")),
            GridSpec::Points(p) => match p.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
                Some(v) => Err(CliError::config(format!("grid point {v} outside (0, 1]"))),
                None => Ok(()),
            },
        }
    }

    pub fn resolve(&self, t_len: usize) -> Vec<f64> {
        match self {
            GridSpec::Sample => tvvar_core::tvvar::sample_grid(t_len),
            GridSpec::Count(n) => (1..=*n).map(|i| i as f64 / *n as f64).collect(),
            GridSpec::Points(p) => p.clone(),
        }
    }
}

/// Innovation law: `gaussian` or `t:<df>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Law(pub InnovationLaw);

impl FromStr for Law {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("gaussian") || s.eq_ignore_ascii_case("normal") {
            return Ok(Law(InnovationLaw::Gaussian));
        }
        match s.split_once(':') {
            Some(("t", df)) => df
                .parse()
                .map(|df| Law(InnovationLaw::StudentT { df }))
                .map_err(|_| format!("bad degrees of freedom {df:?}")),
            _ => Err(format!("expected 'gaussian' or 't:<df>', got {s:?}")),
        }
    }
}

impl Serialize for Law {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Penalty {
    LargestLag,
    PerCandidate,
}

impl From<Penalty> for PenaltyBandwidth {
    fn from(p: Penalty) -> Self {
        match p {
            Penalty::LargestLag => PenaltyBandwidth::LargestLag,
            Penalty::PerCandidate => PenaltyBandwidth::PerCandidate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Bivariate VAR(2) with smoothly varying coefficients.
    Benchmark,
}

#[derive(Debug, Parser)]
#[command(name = "tvvar", version, about = "Kernel estimation of time-varying VARs")]
pub struct Cli {
    /// Worker threads (defaults to TVVAR_THREADS, then all cores).
    #[arg(long, global = true, env = "TVVAR_THREADS")]
    pub threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "tvvar-out")]
    pub out: PathBuf,

    /// Output formats.
    #[arg(long, global = true, value_delimiter = ',', default_value = "json,csv")]
    pub format: Vec<Format>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Lag order and bandwidth selection traces.
    Select(SelectArgs),
    /// Coefficient and innovation covariance paths with pointwise intervals.
    Fit(FitArgs),
    /// Structural impulse responses with delta-method intervals.
    Irf(IrfArgs),
    /// Kernel trend with bootstrap bands and the implied long-run mean path.
    Trend(TrendArgs),
    /// Expanding-window forecast comparison against a constant VAR.
    Forecast(ForecastArgs),
    /// Simulate from a coefficient path.
    Simulate(SimulateArgs),
    /// Monte Carlo study of lag selection, RMSE and coverage.
    Montecarlo(MonteCarloArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Select(_) => "select",
            Command::Fit(_) => "fit",
            Command::Irf(_) => "irf",
            Command::Trend(_) => "trend",
            Command::Forecast(_) => "forecast",
            Command::Simulate(_) => "simulate",
            Command::Montecarlo(_) => "montecarlo",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SelectionArgs {
    /// Largest lag order considered (default floor(sqrt(0.3 T))).
    #[arg(long)]
    pub max_lag: Option<usize>,

    /// Bandwidth: 'auto' for cross-validation or a fixed value.
    #[arg(long, default_value = "auto")]
    pub bandwidth: Choice<f64>,

    /// Cross-validation candidates.
    #[arg(long, value_delimiter = ',')]
    pub bandwidth_grid: Option<Vec<f64>>,

    /// Bandwidth entering the information-criterion penalty.
    #[arg(long, value_enum, default_value = "largest-lag")]
    pub penalty: Penalty,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Lag order: 'auto' for the information criterion or a fixed value.
    #[arg(long, default_value = "auto")]
    pub lag: Choice<usize>,

    #[command(flatten)]
    #[serde(flatten)]
    pub selection: SelectionArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SelectArgs {
    #[arg(long, short)]
    pub input: PathBuf,

    #[command(flatten)]
    #[serde(flatten)]
    pub selection: SelectionArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[arg(long, short)]
    pub input: PathBuf,

    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,

    /// Nominal non-coverage of the pointwise intervals.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// 'sample', a point count, or a comma list of points in (0, 1].
    #[arg(long, default_value = "sample")]
    pub grid: GridSpec,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IrfArgs {
    #[arg(long, short)]
    pub input: PathBuf,

    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Evaluation points, as for --grid.
    #[arg(long, default_value = "sample")]
    pub tau: GridSpec,

    /// Number of horizons, j = 0..horizons-1.
    #[arg(long, default_value_t = 21)]
    pub horizons: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrendArgs {
    #[arg(long, short)]
    pub input: PathBuf,

    /// Trend bandwidth: 'auto' for modified cross-validation or a fixed value.
    #[arg(long, default_value = "auto")]
    pub bandwidth: Choice<f64>,

    /// Modified cross-validation candidates.
    #[arg(long, value_delimiter = ',')]
    pub bandwidth_grid: Option<Vec<f64>>,

    /// Half-width of the left-out block (default ceil(0.1 T)).
    #[arg(long)]
    pub mcv_k: Option<usize>,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    #[arg(long, default_value = "sample")]
    pub grid: GridSpec,

    /// Bootstrap replications.
    #[arg(long, default_value_t = 499)]
    pub reps: usize,

    /// Multiplier dependence length (default floor(T^(1/3))).
    #[arg(long)]
    pub block_length: Option<usize>,

    /// Pilot oversmoothing constant.
    #[arg(long, default_value_t = 2.0)]
    pub c0: f64,

    /// Explicit pilot bandwidth.
    #[arg(long)]
    pub pilot_bandwidth: Option<f64>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Report raw bootstrap endpoints even if they exclude the estimate.
    #[arg(long)]
    pub no_containment: bool,

    /// Skip the long-run mean path.
    #[arg(long)]
    pub no_longrun: bool,

    /// Lag order of the VAR behind the long-run mean path.
    #[arg(long, default_value = "auto")]
    pub var_lag: Choice<usize>,

    /// Bandwidth of the VAR behind the long-run mean path.
    #[arg(long, default_value = "auto")]
    pub var_bandwidth: Choice<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ForecastArgs {
    #[arg(long, short)]
    pub input: PathBuf,

    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    pub horizons: Vec<usize>,

    /// First origin as an observation count; overrides --first-origin-frac.
    #[arg(long)]
    pub first_origin: Option<usize>,

    #[arg(long, default_value_t = 0.6)]
    pub first_origin_frac: f64,

    #[arg(long, default_value_t = 3)]
    pub lag_constant: usize,

    #[arg(long, default_value_t = 3)]
    pub lag_tv: usize,

    #[arg(long, default_value = "auto")]
    pub bandwidth: Choice<f64>,

    #[arg(long, value_delimiter = ',')]
    pub bandwidth_grid: Option<Vec<f64>>,

    #[arg(long, default_value_t = 8)]
    pub reselect_every: usize,

    /// Iterate one-step forecasts instead of the single projection.
    #[arg(long)]
    pub iterated: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PathArgs {
    #[arg(long, value_enum, conflicts_with = "path")]
    pub preset: Option<Preset>,

    /// JSON coefficient path specification.
    #[arg(long)]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: PathArgs,

    /// Sample size.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t_len: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = 0)]
    pub stream: u64,

    #[arg(long, default_value_t = 200)]
    pub burn_in: usize,

    #[arg(long, default_value = "gaussian")]
    pub law: Law,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MonteCarloArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: PathArgs,

    #[arg(long, default_value_t = 200)]
    pub reps: usize,

    #[arg(long = "T", value_delimiter = ',', default_value = "200,400,800")]
    #[serde(rename = "T")]
    pub t_list: Vec<usize>,

    #[arg(long, default_value_t = 20240601)]
    pub seed: u64,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    #[arg(long)]
    pub max_lag: Option<usize>,

    /// Drop points within one bandwidth of either end from RMSE and coverage.
    #[arg(long)]
    pub exclude_boundary: bool,

    #[arg(long, default_value_t = 200)]
    pub burn_in: usize,

    #[arg(long, default_value = "gaussian")]
    pub law: Law,
}

fn check_alpha(alpha: f64) -> CliResult<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::config(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_bandwidth(h: &Choice<f64>, grid: Option<&Vec<f64>>) -> CliResult<()> {
    if let Choice::Fixed(h) = h {
        if !(*h > 0.0 && h.is_finite()) {
            return Err(CliError::config(format!("bandwidth must be positive, got {h}")));
        }
        if grid.is_some() {
            return Err(CliError::config("--bandwidth-grid needs --bandwidth auto"));
        }
    }
    if let Some(g) = grid {
        if g.is_empty() || g.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(CliError::config("bandwidth grid needs positive values"));
        }
    }
    Ok(())
}

fn check_law(law: &Law) -> CliResult<()> {
    match law.0 {
        InnovationLaw::StudentT { df } if !(df > 2.0) => {
            Err(CliError::config(format!("t innovations need df > 2, got {df}")))
        }
        _ => Ok(()),
    }
}

fn check_source(src: &PathArgs) -> CliResult<()> {
    if src.preset.is_none() && src.path.is_none() {
        return Err(CliError::config("give --preset or --path"));
    }
    Ok(())
}

impl Cli {
    /// Checks everything that does not need the data.
    pub fn validate(&self) -> CliResult<()> {
        if self.threads == Some(0) {
            return Err(CliError::config("--threads must be positive"));
        }
        if self.format.is_empty() {
            return Err(CliError::config("no output format"));
        }
        match &self.command {
            Command::Select(a) => check_bandwidth(&a.selection.bandwidth, a.selection.bandwidth_grid.as_ref()),
            Command::Fit(a) => {
                check_bandwidth(&a.model.selection.bandwidth, a.model.selection.bandwidth_grid.as_ref())?;
                check_alpha(a.alpha)?;
                a.grid.validate()
            }
            Command::Irf(a) => {
                check_bandwidth(&a.model.selection.bandwidth, a.model.selection.bandwidth_grid.as_ref())?;
                check_alpha(a.alpha)?;
                if a.horizons == 0 {
                    return Err(CliError::config("--horizons must be positive"));
                }
                a.tau.validate()
            }
            Command::Trend(a) => {
                check_bandwidth(&a.bandwidth, a.bandwidth_grid.as_ref())?;
                check_bandwidth(&a.var_bandwidth, None)?;
                check_alpha(a.alpha)?;
                a.grid.validate()?;
                if a.reps < 99 {
                    return Err(CliError::config(format!("--reps must be at least 99, got {}", a.reps)));
                }
                if a.block_length == Some(0) {
                    return Err(CliError::config("--block-length must be positive"));
                }
                if !(a.c0 > 0.0) {
                    return Err(CliError::config("--c0 must be positive"));
                }
                if a.pilot_bandwidth.is_some_and(|h| !(h > 0.0)) {
                    return Err(CliError::config("--pilot-bandwidth must be positive"));
                }
                if a.no_longrun && (a.var_lag != Choice::Auto || a.var_bandwidth != Choice::Auto) {
                    return Err(CliError::config("--var-lag/--var-bandwidth conflict with --no-longrun"));
                }
                Ok(())
            }
            Command::Forecast(a) => {
                check_bandwidth(&a.bandwidth, a.bandwidth_grid.as_ref())?;
                if a.horizons.is_empty() || a.horizons.contains(&0) {
                    return Err(CliError::config("horizons must be positive"));
                }
                if !(a.first_origin_frac > 0.0 && a.first_origin_frac < 1.0) {
                    return Err(CliError::config("--first-origin-frac must lie in (0, 1)"));
                }
                if a.reselect_every == 0 {
                    return Err(CliError::config("--reselect-every must be positive"));
                }
                Ok(())
            }
            Command::Simulate(a) => {
                check_source(&a.source)?;
                check_law(&a.law)?;
                if a.t_len == 0 {
                    return Err(CliError::config("--T must be positive"));
                }
                Ok(())
            }
            Command::Montecarlo(a) => {
                check_source(&a.source)?;
                check_law(&a.law)?;
                check_alpha(a.alpha)?;
                if a.reps == 0 {
                    return Err(CliError::config("--reps must be positive"));
                }
                if a.t_list.is_empty() || a.t_list.iter().any(|&t| t < 30) {
                    return Err(CliError::config("every --T must be at least 30"));
                }
                Ok(())
            }
        }
    }
}
