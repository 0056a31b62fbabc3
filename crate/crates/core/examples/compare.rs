//! Monte-Carlo comparison on a built-in scenario.
//!
//! ```text
//! cargo run --release --example compare -- lawnmower 0.5 100
//! ```

use std::time::Instant;

use locdyn::harness::{quantile, run_monte_carlo, ExperimentConfig};
use locdyn::ScenarioKind;

fn main() -> locdyn::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind: ScenarioKind = args.next().as_deref().unwrap_or("lap").parse()?;
    let parse = |s: Option<String>, what: &str| -> locdyn::Result<Option<f64>> {
        s.map(|v| v.parse().map_err(|_| locdyn::Error::Parse(format!("bad {what} '{v}'"))))
            .transpose()
    };
    let lambda = parse(args.next(), "lambda")?.unwrap_or(0.5);
    let trials = parse(args.next(), "trial count")?.unwrap_or(100.0) as usize;

    let sc = kind.generate_default()?;
    let mut cfg = ExperimentConfig::for_kind(kind);
    cfg.lambda = Some(lambda);
    cfg.trials = trials;

    let t = Instant::now();
    let run = run_monte_carlo(&cfg, &sc, false)?;
    println!(
        "{}: {} steps, {} vehicles, lambda {lambda}, {:.1}s",
        sc.name,
        sc.steps(),
        sc.n_nodes(),
        t.elapsed().as_secs_f64()
    );
    for a in &run.summary.algorithms {
        let deciles: Vec<String> = (1..10)
            .filter_map(|d| quantile(&a.cdf, d as f64 / 10.0))
            .map(|q| format!("{q:.3}"))
            .collect();
        println!(
            "  {:7} mean {:.4}  variance {:.2e}  deciles {}",
            a.algorithm.name(),
            a.mean,
            a.variance,
            deciles.join(" ")
        );
    }
    Ok(())
}
