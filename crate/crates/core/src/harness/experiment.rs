use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{empirical_cdf, mean_variance, node_errors, step_error, ErrorMetric};
use crate::baselines::{run_kalman, run_static, KalmanConfig, StaticConfig};
use crate::error::{Error, Result};
use crate::geometry::Positions;
use crate::measurement::{sample_trial, OutlierModel, OutlierTarget};
use crate::rng::trial_seed;
use crate::solver::{run_locdyn, SolverConfig};
use crate::trajectory::{Scenario, ScenarioKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Locdyn,
    Static,
    Kalman,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Locdyn, Algorithm::Static, Algorithm::Kalman];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Locdyn => "locdyn",
            Algorithm::Static => "static",
            Algorithm::Kalman => "kalman",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "locdyn" => Ok(Algorithm::Locdyn),
            "static" => Ok(Algorithm::Static),
            "kalman" => Ok(Algorithm::Kalman),
            other => Err(Error::Parse(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Range-doubling contamination as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutlierSettings {
    pub prob: f64,
    /// Contaminated anchor; defaults to the scenario's designated one.
    pub anchor: Option<usize>,
    pub multiplier: f64,
}

impl Default for OutlierSettings {
    fn default() -> Self {
        OutlierSettings {
            prob: 0.0,
            anchor: None,
            multiplier: 2.0,
        }
    }
}

impl OutlierSettings {
    pub fn model(&self, scenario: &Scenario) -> Result<Option<OutlierModel>> {
        if self.prob == 0.0 {
            return Ok(None);
        }
        let anchor = self
            .anchor
            .or(scenario.outlier_anchor)
            .ok_or_else(|| Error::InvalidParams("outliers requested but no target anchor is set".into()))?;
        Ok(Some(OutlierModel {
            prob: self.prob,
            target: OutlierTarget::Anchor(anchor),
            multiplier: self.multiplier,
            vehicles: None,
        }))
    }
}

/// One Monte-Carlo experiment.
///
/// `scenario` is either a built-in kind (`lap`, `spiral`, `lawnmower`) or a
/// path to a saved scenario directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub metric: ErrorMetric,
    /// Shorthand for `solver.lambda`; takes precedence when set.
    pub lambda: Option<f64>,
    /// Penalty weights for `sweep`; empty means the configured λ alone.
    pub lambdas: Vec<f64>,
    pub outliers: OutlierSettings,
    pub solver: SolverConfig,
    #[serde(rename = "static")]
    pub static_solver: StaticConfig,
    pub kalman: KalmanConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: "lap".into(),
            sigma: 1.0,
            trials: 100,
            seed: 1,
            algorithms: Algorithm::ALL.to_vec(),
            metric: ErrorMetric::Stacked,
            lambda: None,
            lambdas: Vec::new(),
            outliers: OutlierSettings::default(),
            solver: SolverConfig::default(),
            static_solver: StaticConfig::default(),
            kalman: KalmanConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Reference defaults for a built-in scenario: 1% outliers on the
    /// lawn mower, and no Kalman filter on the 3D spiral.
    pub fn for_kind(kind: ScenarioKind) -> Self {
        let mut cfg = ExperimentConfig {
            scenario: kind.name().into(),
            ..Default::default()
        };
        match kind {
            ScenarioKind::Lap => {}
            ScenarioKind::Spiral => cfg.algorithms = vec![Algorithm::Locdyn, Algorithm::Static],
            ScenarioKind::Lawnmower => cfg.outliers.prob = 0.01,
        }
        cfg
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParams("trials must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidParams("algorithm list is empty".into()));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParams(format!(
                "sigma must be nonnegative, got {}",
                self.sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.outliers.prob) {
            return Err(Error::BadProbability(self.outliers.prob));
        }
        for &l in &self.lambdas {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::NonpositiveLambda(l));
            }
        }
        self.solver_config().validate()
    }

    /// Solver settings with the top-level `lambda` applied.
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            lambda: self.lambda.unwrap_or(self.solver.lambda),
            ..self.solver.clone()
        }
    }

    pub fn load_scenario(&self) -> Result<Scenario> {
        match self.scenario.parse::<ScenarioKind>() {
            Ok(kind) => kind.generate_default(),
            Err(_) => Scenario::load(&self.scenario),
        }
    }
}

/// Estimates of one algorithm in one trial, with per-step node errors.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRun {
    pub trial: usize,
    pub algorithm: Algorithm,
    pub estimates: Vec<Positions>,
    /// `node_errors[k-1][i] = ‖x̂_i(k) - x*_i(k)‖`.
    pub node_errors: Vec<Vec<f64>>,
    pub error: f64,
}

/// Per-algorithm aggregate over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    /// One error per trial, in trial order.
    pub errors: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub cdf: Vec<(f64, f64)>,
}

impl AlgorithmSummary {
    pub fn from_errors(algorithm: Algorithm, errors: Vec<f64>) -> Result<Self> {
        let (mean, variance) = mean_variance(&errors)?;
        let cdf = empirical_cdf(&errors)?;
        Ok(AlgorithmSummary {
            algorithm,
            errors,
            mean,
            variance,
            cdf,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultSummary {
    pub scenario: String,
    pub metric: ErrorMetric,
    pub seed: u64,
    pub trial_seeds: Vec<u64>,
    pub algorithms: Vec<AlgorithmSummary>,
}

impl ResultSummary {
    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|a| a.algorithm == algorithm)
    }
}

/// Everything a Monte-Carlo run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloRun {
    pub summary: ResultSummary,
    /// Per-trial runs, present when estimates were kept.
    pub runs: Vec<TrialRun>,
    pub runtime_secs: f64,
}

fn check_algorithms(scenario: &Scenario, algorithms: &[Algorithm]) -> Result<()> {
    if scenario.dim() != 2 && algorithms.contains(&Algorithm::Kalman) {
        return Err(Error::InvalidParams(
            "the kalman baseline is only compared on planar scenarios".into(),
        ));
    }
    Ok(())
}

/// Runs one trial of every configured algorithm on one shared measurement draw.
pub fn run_trial(config: &ExperimentConfig, scenario: &Scenario, trial: usize) -> Result<Vec<TrialRun>> {
    let seed = trial_seed(config.seed, trial);
    let outliers = config.outliers.model(scenario)?;
    let meas = sample_trial(scenario, config.sigma, outliers.as_ref(), seed)?;
    let solver = config.solver_config();
    config
        .algorithms
        .iter()
        .map(|&algorithm| {
            let estimates = match algorithm {
                Algorithm::Locdyn => run_locdyn(scenario, &meas, &solver, seed)?.estimates,
                Algorithm::Static => run_static(scenario, &meas, &config.static_solver)?,
                Algorithm::Kalman => {
                    let kc = KalmanConfig {
                        sigma: config.sigma.max(1e-6),
                        ..config.kalman.clone()
                    };
                    run_kalman(scenario, &meas, &kc)?
                }
            };
            let node_errs = estimates
                .iter()
                .zip(&scenario.truth)
                .map(|(e, t)| node_errors(e, t))
                .collect::<Result<Vec<_>>>()?;
            let steps: Vec<f64> = node_errs.iter().map(|ne| step_error(ne, config.metric)).collect();
            let error = super::metrics::mean_step_error(&steps)?;
            Ok(TrialRun {
                trial,
                algorithm,
                estimates,
                node_errors: node_errs,
                error,
            })
        })
        .collect()
}

/// Monte-Carlo run over `config.trials` trials in parallel. Trial `t` uses
/// the seed `trial_seed(config.seed, t)`, so results do not depend on
/// scheduling. Set `keep_runs` to retain estimates for logging.
pub fn run_monte_carlo(config: &ExperimentConfig, scenario: &Scenario, keep_runs: bool) -> Result<MonteCarloRun> {
    config.validate()?;
    check_algorithms(scenario, &config.algorithms)?;
    let started = std::time::Instant::now();
    let per_trial: Vec<Vec<TrialRun>> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut runs = run_trial(config, scenario, t)?;
            if !keep_runs {
                for r in &mut runs {
                    r.estimates = Vec::new();
                    r.node_errors = Vec::new();
                }
            }
            Ok(runs)
        })
        .collect::<Result<_>>()?;

    let algorithms = config
        .algorithms
        .iter()
        .enumerate()
        .map(|(a, &alg)| AlgorithmSummary::from_errors(alg, per_trial.iter().map(|runs| runs[a].error).collect()))
        .collect::<Result<Vec<_>>>()?;
    let summary = ResultSummary {
        scenario: scenario.name.clone(),
        metric: config.metric,
        seed: config.seed,
        trial_seeds: (0..config.trials).map(|t| trial_seed(config.seed, t)).collect(),
        algorithms,
    };
    let runs = if keep_runs {
        per_trial.into_iter().flatten().collect()
    } else {
        Vec::new()
    };
    Ok(MonteCarloRun {
        summary,
        runs,
        runtime_secs: started.elapsed().as_secs_f64(),
    })
}

/// One row of a λ sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub lambda: f64,
    pub summary: ResultSummary,
}

/// Repeats the experiment for each λ in `lambdas` (just the configured λ
/// when the list is empty).
pub fn run_sweep(config: &ExperimentConfig, scenario: &Scenario) -> Result<Vec<SweepPoint>> {
    let lambdas = if config.lambdas.is_empty() {
        vec![config.solver_config().lambda]
    } else {
        config.lambdas.clone()
    };
    lambdas
        .into_iter()
        .map(|lambda| {
            let mut cfg = config.clone();
            cfg.lambda = Some(lambda);
            run_monte_carlo(&cfg, scenario, false).map(|r| SweepPoint {
                lambda,
                summary: r.summary,
            })
        })
        .collect()
}
