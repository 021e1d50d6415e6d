//! The JSON experiment document.
//!
//! One document drives one experiment. Shared pieces (`kernel`, `market`)
//! live at the top level; each experiment reads its own section, whose
//! fields all have defaults unless noted.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use hawkes_impact::manipulation::ImpactModelSpec;
use hawkes_impact::{KernelSpec, MarketConfig, MetaorderSpec, SimulationMethod};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Simulate,
    Propagator,
    Impact,
    Longmem,
    Roundtrip,
    Exponents,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Experiment::Simulate => "simulate",
            Experiment::Propagator => "propagator",
            Experiment::Impact => "impact",
            Experiment::Longmem => "longmem",
            Experiment::Roundtrip => "roundtrip",
            Experiment::Exponents => "exponents",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the experiment named on the command line when present.
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
    #[serde(default)]
    pub market: Option<MarketParams>,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
    #[serde(default)]
    pub propagator: Option<PropagatorSection>,
    #[serde(default)]
    pub impact: Option<ImpactSection>,
    #[serde(default)]
    pub longmem: Option<LongmemSection>,
    #[serde(default)]
    pub roundtrip: Option<RoundtripSection>,
    #[serde(default)]
    pub exponents: Option<ExponentsSection>,
}

fn one() -> f64 {
    1.0
}

fn default_cutoff() -> f64 {
    1e-12
}

/// Market parameters shared by the stochastic experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    pub mu: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "one")]
    pub volume: f64,
    pub horizon: f64,
    #[serde(default)]
    pub burn_in: Option<f64>,
    #[serde(default)]
    pub method: SimulationMethod,
    #[serde(default)]
    pub metaorder: Option<MetaorderSpec>,
    #[serde(default = "default_cutoff")]
    pub history_cutoff: f64,
}

impl MarketParams {
    pub fn to_market(&self, kernel: &KernelSpec, seed: u64) -> MarketConfig {
        MarketConfig {
            kernel: kernel.clone(),
            mu: self.mu,
            kappa: self.kappa,
            volume: self.volume,
            horizon: self.horizon,
            burn_in: self.burn_in,
            metaorder: self.metaorder,
            seed,
            method: self.method,
            history_cutoff: self.history_cutoff,
        }
    }
}

fn level() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Clusters whose migrant arrives later than `horizon − margin` are not
    /// counted; defaults to the burn-in length.
    #[serde(default)]
    pub cluster_margin: Option<f64>,
    /// Also simulate with the other method and compare inter-event times.
    #[serde(default)]
    pub compare_methods: bool,
    #[serde(default = "level")]
    pub ks_level: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { cluster_margin: None, compare_methods: false, ks_level: level() }
    }
}

fn step() -> f64 {
    1e-3
}

fn zeta_horizon() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorSection {
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "one")]
    pub volume: f64,
    #[serde(default = "step")]
    pub step: f64,
    #[serde(default = "zeta_horizon")]
    pub horizon: f64,
    /// Monte Carlo drift test of the price built with ζ; needs `market`.
    #[serde(default)]
    pub drift: Option<DriftSection>,
}

impl Default for PropagatorSection {
    fn default() -> Self {
        Self { kappa: 1.0, volume: 1.0, step: step(), horizon: zeta_horizon(), drift: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSection {
    pub t: f64,
    pub h: f64,
    pub n_paths: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImpactSection {
    /// Impact of a Poisson metaorder on top of the configured market.
    Metaorder {
        /// Sample times; the metaorder itself comes from `market.metaorder`.
        times: Vec<f64>,
        #[serde(default = "step")]
        step: f64,
        /// Monte Carlo replicas; zero skips the simulation.
        #[serde(default)]
        n_paths: u64,
        #[serde(default = "yes")]
        antithetic: bool,
    },
    /// Renormalized impact of the near-critical family `a_T Φ` with
    /// `Φ(t) = αc^α/(t+c)^{1+α}` and `τ^T = (1−a_T)^{−1/(2α)}`.
    NearCritical {
        alpha: f64,
        #[serde(default = "one")]
        scale: f64,
        branching: Vec<f64>,
        #[serde(default = "one")]
        kappa: f64,
        #[serde(default = "one")]
        volume: f64,
        #[serde(default = "one")]
        rate: f64,
        #[serde(default = "fit_window")]
        fit_window: (f64, f64),
        #[serde(default = "fit_points")]
        points: usize,
    },
}

fn yes() -> bool {
    true
}

fn fit_window() -> (f64, f64) {
    (0.01, 1.0)
}

fn fit_points() -> usize {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct LongmemSection {
    #[serde(default)]
    pub convergence: Option<ConvergenceSection>,
    /// Empirical vs theoretical covariance for `kernel` and `market`.
    #[serde(default)]
    pub covariance: Option<CovarianceSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub alpha: f64,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "one")]
    pub c_mu: f64,
    #[serde(default = "one")]
    pub h: f64,
    pub lags: Vec<f64>,
    /// Pairs `(T, T(1−a_T)^{1/α})`.
    pub sequence: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceSection {
    pub h: f64,
    pub lags: Vec<f64>,
    #[serde(default = "replicas")]
    pub replicas: u64,
    /// Window for the fitted decay exponent; omitted means no fit.
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
}

fn replicas() -> u64 {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundtripSection {
    pub model: ImpactModelSpec,
    /// Trading speeds; the scan covers every ordered pair.
    pub volumes: Vec<f64>,
    /// Geometric sequence of horizons `T`.
    pub horizons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentsSection {
    pub alpha: f64,
    #[serde(default = "one")]
    pub scale: f64,
    pub branching: f64,
    #[serde(default = "one")]
    pub h: f64,
    /// Stationary event rate of each side.
    #[serde(default = "one")]
    pub rate: f64,
    pub horizon: f64,
    pub burn_in: f64,
    #[serde(default = "replicas")]
    pub replicas: u64,
    #[serde(default = "lag_points")]
    pub lag_points: usize,
    /// Lag window in units of `h`.
    #[serde(default = "lag_window")]
    pub lag_window: (f64, f64),
    #[serde(default = "fit_window")]
    pub impact_window: (f64, f64),
    #[serde(default = "link_tolerance")]
    pub tolerance: f64,
}

fn lag_points() -> usize {
    12
}

fn lag_window() -> (f64, f64) {
    (2.0, 20.0)
}

fn link_tolerance() -> f64 {
    0.1
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies command-line overrides and checks that the named experiment
    /// has what it needs.
    pub fn resolve(mut self, experiment: Experiment, seed: Option<u64>) -> CliResult<Self> {
        if let Some(named) = self.experiment {
            if named != experiment {
                return Err(CliError::Config(format!(
                    "config is for the {named} experiment, not {experiment}"
                )));
            }
        }
        self.experiment = Some(experiment);
        if seed.is_some() {
            self.seed = seed;
        }
        if self.is_stochastic(experiment) && self.seed.is_none() {
            return Err(CliError::Config(format!("the {experiment} experiment needs a seed")));
        }
        Ok(self)
    }

    fn is_stochastic(&self, experiment: Experiment) -> bool {
        match experiment {
            Experiment::Simulate | Experiment::Exponents => true,
            Experiment::Propagator => self.propagator.as_ref().is_some_and(|p| p.drift.is_some()),
            Experiment::Impact => matches!(self.impact, Some(ImpactSection::Metaorder { n_paths, .. }) if n_paths > 0),
            Experiment::Longmem => self.longmem.as_ref().is_some_and(|l| l.covariance.is_some()),
            Experiment::Roundtrip => false,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn kernel(&self) -> CliResult<&KernelSpec> {
        self.kernel.as_ref().ok_or_else(|| CliError::Config("missing `kernel`".into()))
    }

    pub fn market(&self) -> CliResult<MarketConfig> {
        let m = self.market.as_ref().ok_or_else(|| CliError::Config("missing `market`".into()))?;
        let cfg = m.to_market(self.kernel()?, self.seed());
        cfg.validate()?;
        Ok(cfg)
    }
}
