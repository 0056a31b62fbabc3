use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use locdyn::harness::{
    cdf_csv, cdf_file_name, cdf_from_values, locdyn_log_csv, quantile, run_monte_carlo, run_sweep, summarize_log,
    sweep_csv, write_results, write_summary_files, Algorithm, AlgorithmSummary, ErrorMetric, ExperimentConfig,
    ResultSummary, SWEEP_FILE,
};
use locdyn::measurement::measurements_csv;
use locdyn::rng::trial_seed;
use locdyn::{run_locdyn, sample_trial, trajectory_error, Scenario, ScenarioKind};

#[derive(Parser)]
#[command(name = "locdyn", version, about = "Range-only localization of moving robot teams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scenario generation.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// One trial of every algorithm, with measurement and estimate logs.
    Simulate(SimulateArgs),
    /// LocDyn on one trial of a scenario.
    Solve(SolveArgs),
    /// Monte-Carlo comparison; writes summary, CDF and stats files.
    Benchmark(BenchmarkArgs),
    /// Empirical CDFs from an existing `estimates.csv` or `summary.csv`.
    Cdf(CdfArgs),
    /// Monte-Carlo runs over a list of penalty weights.
    Sweep(SweepArgs),
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Writes `trajectory.csv` and `scenario.toml` for a built-in scenario.
    Gen(GenArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Scenario family: lap, spiral or lawnmower.
    #[arg(long)]
    kind: ScenarioKind,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// TOML file of generator parameters; missing keys keep their defaults.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Number of vehicles.
    #[arg(long)]
    vehicles: Option<usize>,
    /// Number of anchors.
    #[arg(long)]
    anchors: Option<usize>,
}

/// Settings shared by every experiment command. Flags override the config file.
#[derive(Args, Clone)]
struct ExperimentArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario kind or path to a saved scenario.
    #[arg(long)]
    scenario: Option<String>,
    /// Range noise standard deviation in meters.
    #[arg(long)]
    sigma: Option<f64>,
    /// Base random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Probability of doubling a range to the outlier anchor.
    #[arg(long)]
    outlier_prob: Option<f64>,
    /// Algorithms to run, comma separated (locdyn, static, kalman).
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<Algorithm>>,
    /// Trial error metric: stacked or per-node.
    #[arg(long)]
    metric: Option<ErrorMetric>,
}

impl ExperimentArgs {
    fn resolve(&self) -> locdyn::Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.scenario) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(s)) => match s.parse::<ScenarioKind>() {
                Ok(kind) => ExperimentConfig::for_kind(kind),
                Err(_) => ExperimentConfig::default(),
            },
            (None, None) => ExperimentConfig::default(),
        };
        if let Some(s) = &self.scenario {
            cfg.scenario = s.clone();
        }
        if let Some(v) = self.sigma {
            cfg.sigma = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.outlier_prob {
            cfg.outliers.prob = v;
        }
        if let Some(v) = &self.algorithms {
            cfg.algorithms = v.clone();
        }
        if let Some(v) = self.metric {
            cfg.metric = v;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Penalty weight λ.
    #[arg(long)]
    lambda: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Saved scenario (directory or its `scenario.toml`) or a built-in kind.
    #[arg(long)]
    scenario: String,
    /// Penalty weight λ.
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Range noise standard deviation in meters.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Random seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Probability of doubling a range to the outlier anchor.
    #[arg(long, default_value_t = 0.0)]
    outlier_prob: f64,
    /// Write the per-step estimate log here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Number of Monte-Carlo trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Penalty weight λ.
    #[arg(long)]
    lambda: Option<f64>,
    /// Also write `estimates.csv` with every per-step estimate.
    #[arg(long)]
    keep_estimates: bool,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct CdfArgs {
    /// `estimates.csv`, `summary.csv`, or one error value per line.
    file: PathBuf,
    /// Metric used when rebuilding errors from `estimates.csv`.
    #[arg(long, default_value = "stacked")]
    metric: ErrorMetric,
    /// Write `summary.csv`, `stats.csv` and `cdf_<algo>.csv` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Penalty weights, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    lambda: Vec<f64>,
    /// Number of Monte-Carlo trials per weight.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

fn load_scenario(name: &str) -> locdyn::Result<Scenario> {
    match name.parse::<ScenarioKind>() {
        Ok(kind) => kind.generate_default(),
        Err(_) => Scenario::load(name),
    }
}

fn print_stats(summaries: &[AlgorithmSummary]) {
    println!("algorithm,trials,mean,variance,median");
    for a in summaries {
        let median = quantile(&a.cdf, 0.5).unwrap_or(f64::NAN);
        println!(
            "{},{},{:.6},{:.6},{:.6}",
            a.algorithm.name(),
            a.errors.len(),
            a.mean,
            a.variance,
            median
        );
    }
}

fn scenario_gen(args: GenArgs) -> locdyn::Result<()> {
    let params = match &args.params {
        Some(p) => fs::read_to_string(p)?,
        None => String::new(),
    };
    let sc = args.kind.generate_with(&params, args.vehicles, args.anchors)?;
    sc.save(&args.out)?;
    println!(
        "{}: {} vehicles, {} anchors, {} steps -> {}",
        sc.name,
        sc.n_nodes(),
        sc.graph.n_anchors(),
        sc.steps(),
        args.out.display()
    );
    Ok(())
}

fn simulate(args: SimulateArgs) -> locdyn::Result<()> {
    let mut cfg = args.experiment.resolve()?;
    cfg.trials = 1;
    if args.lambda.is_some() {
        cfg.lambda = args.lambda;
    }
    let scenario = cfg.load_scenario()?;
    if scenario.dim() != 2 {
        cfg.algorithms.retain(|a| *a != Algorithm::Kalman);
    }
    let run = run_monte_carlo(&cfg, &scenario, true)?;
    write_results(&args.out, &cfg, &run, scenario.dim())?;
    let outliers = cfg.outliers.model(&scenario)?;
    let meas = sample_trial(&scenario, cfg.sigma, outliers.as_ref(), trial_seed(cfg.seed, 0))?;
    fs::write(args.out.join("measurements.csv"), measurements_csv(&scenario, &meas))?;
    fs::write(args.out.join("trajectory.csv"), scenario.trajectory_csv())?;
    print_stats(&run.summary.algorithms);
    Ok(())
}

fn solve(args: SolveArgs) -> locdyn::Result<()> {
    let scenario = load_scenario(&args.scenario)?;
    let mut cfg = ExperimentConfig {
        scenario: args.scenario.clone(),
        sigma: args.sigma,
        seed: args.seed,
        lambda: Some(args.lambda),
        algorithms: vec![Algorithm::Locdyn],
        ..Default::default()
    };
    cfg.outliers.prob = args.outlier_prob;
    cfg.validate()?;
    let seed = trial_seed(cfg.seed, 0);
    let outliers = cfg.outliers.model(&scenario)?;
    let meas = sample_trial(&scenario, cfg.sigma, outliers.as_ref(), seed)?;
    let history = run_locdyn(&scenario, &meas, &cfg.solver_config(), seed)?;
    let log = locdyn_log_csv(0, &history);
    match &args.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, log)?;
        }
        None => print!("{log}"),
    }
    let err = trajectory_error(&history.estimates, &scenario.truth, cfg.metric)?;
    eprintln!("error {err:.6} m over {} steps", history.steps());
    Ok(())
}

fn benchmark(args: BenchmarkArgs) -> locdyn::Result<()> {
    let mut cfg = args.experiment.resolve()?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if args.lambda.is_some() {
        cfg.lambda = args.lambda;
    }
    let scenario = cfg.load_scenario()?;
    let run = run_monte_carlo(&cfg, &scenario, args.keep_estimates)?;
    write_results(&args.out, &cfg, &run, scenario.dim())?;
    print_stats(&run.summary.algorithms);
    Ok(())
}

fn cdf(args: CdfArgs) -> locdyn::Result<()> {
    let text = fs::read_to_string(&args.file)?;
    let summaries = match summarize_log(&text, args.metric) {
        Ok(s) => s,
        Err(_) => {
            print!("{}", cdf_csv(&cdf_from_values(&text)?));
            return Ok(());
        }
    };
    for a in &summaries {
        println!("# {}", a.algorithm.name());
        print!("{}", cdf_csv(&a.cdf));
    }
    if let Some(dir) = &args.out {
        let summary = ResultSummary {
            scenario: String::new(),
            metric: args.metric,
            seed: 0,
            trial_seeds: Vec::new(),
            algorithms: summaries,
        };
        write_summary_files(dir, &summary)?;
        for a in &summary.algorithms {
            eprintln!("wrote {}", Path::new(dir).join(cdf_file_name(a.algorithm)).display());
        }
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> locdyn::Result<()> {
    let mut cfg = args.experiment.resolve()?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    cfg.lambdas = args.lambda;
    cfg.validate()?;
    let scenario = cfg.load_scenario()?;
    let points = run_sweep(&cfg, &scenario)?;
    fs::create_dir_all(&args.out)?;
    let csv = sweep_csv(&points);
    fs::write(args.out.join(SWEEP_FILE), &csv)?;
    print!("{csv}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Scenario(ScenarioCommand::Gen(a)) => scenario_gen(a),
        Command::Simulate(a) => simulate(a),
        Command::Solve(a) => solve(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Cdf(a) => cdf(a),
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
