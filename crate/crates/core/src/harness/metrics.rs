use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, Positions};

/// How per-step position errors are reduced to one number per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorMetric {
    /// `(1/K) Σ_k ‖x̂(k) - x*(k)‖` with nodes stacked into one vector.
    #[default]
    Stacked,
    /// `(1/K) Σ_k (1/n) Σ_i ‖x̂_i(k) - x*_i(k)‖`.
    PerNode,
}

impl std::str::FromStr for ErrorMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stacked" => Ok(ErrorMetric::Stacked),
            "per-node" => Ok(ErrorMetric::PerNode),
            other => Err(Error::Parse(format!("unknown error metric '{other}'"))),
        }
    }
}

/// Per-node error norms `‖x̂_i - x*_i‖`.
pub fn node_errors(est: &Positions, truth: &Positions) -> Result<Vec<f64>> {
    if est.dim() != truth.dim() || est.len() != truth.len() {
        return Err(Error::LengthMismatch(format!(
            "estimate has {} values, truth has {}",
            est.len(),
            truth.len()
        )));
    }
    Ok(est.nodes().zip(truth.nodes()).map(|(a, b)| distance(a, b)).collect())
}

/// Reduces one step's node errors. The stacked norm is formed from the
/// node norms so logs that store node errors reproduce it exactly.
pub fn step_error(node_errors: &[f64], metric: ErrorMetric) -> f64 {
    match metric {
        ErrorMetric::Stacked => node_errors.iter().map(|e| e * e).sum::<f64>().sqrt(),
        ErrorMetric::PerNode => node_errors.iter().sum::<f64>() / node_errors.len().max(1) as f64,
    }
}

/// Mean of the per-step errors.
pub fn mean_step_error(step_errors: &[f64]) -> Result<f64> {
    if step_errors.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(step_errors.iter().sum::<f64>() / step_errors.len() as f64)
}

/// Trajectory error of `est` against `truth`, both indexed by step.
pub fn trajectory_error(est: &[Positions], truth: &[Positions], metric: ErrorMetric) -> Result<f64> {
    if est.len() != truth.len() {
        return Err(Error::LengthMismatch(format!(
            "{} estimated steps, {} true steps",
            est.len(),
            truth.len()
        )));
    }
    let steps = est
        .iter()
        .zip(truth)
        .map(|(e, t)| node_errors(e, t).map(|ne| step_error(&ne, metric)))
        .collect::<Result<Vec<_>>>()?;
    mean_step_error(&steps)
}

/// Empirical CDF as `(value, fraction)` pairs; tied values keep only their
/// last (largest) fraction.
pub fn empirical_cdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParams("NaN in CDF input".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for (i, v) in sorted.into_iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = frac,
            _ => out.push((v, frac)),
        }
    }
    Ok(out)
}

/// Lower empirical quantile: smallest sample whose CDF reaches `q`.
pub fn quantile(cdf: &[(f64, f64)], q: f64) -> Option<f64> {
    cdf.iter().find(|(_, f)| *f >= q - 1e-12).map(|(v, _)| *v)
}

/// Mean and unbiased sample variance (zero for a single sample).
pub fn mean_variance(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    Ok((mean, ss / (n - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_examples() {
        assert_eq!(empirical_cdf(&[5.0]).unwrap(), vec![(5.0, 1.0)]);
        let c = empirical_cdf(&[3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!(c, vec![(1.0, 0.25), (2.0, 0.5), (3.0, 0.75), (4.0, 1.0)]);
        assert_eq!(empirical_cdf(&[2.0, 2.0]).unwrap(), vec![(2.0, 1.0)]);
        assert!(matches!(empirical_cdf(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn error_examples() {
        let t = vec![Positions::from_flat(vec![0.0, 0.0, 1.0, 1.0], 2).unwrap(); 3];
        assert_eq!(trajectory_error(&t, &t, ErrorMetric::Stacked).unwrap(), 0.0);

        let mut e = t.clone();
        for p in &mut e {
            p.node_mut(1)[0] += 3.0;
            p.node_mut(1)[1] += 4.0;
        }
        assert_eq!(trajectory_error(&e, &t, ErrorMetric::Stacked).unwrap(), 5.0);
        assert_eq!(trajectory_error(&e, &t, ErrorMetric::PerNode).unwrap(), 2.5);

        let truth = vec![Positions::zeros(1, 2); 2];
        let est = vec![
            Positions::from_flat(vec![1.0, 0.0], 2).unwrap(),
            Positions::from_flat(vec![0.0, 3.0], 2).unwrap(),
        ];
        assert_eq!(trajectory_error(&est, &truth, ErrorMetric::Stacked).unwrap(), 2.0);
        assert!(trajectory_error(&est[..1], &truth, ErrorMetric::Stacked).is_err());
    }

    #[test]
    fn variance_and_quantiles() {
        let (m, v) = mean_variance(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((v - 5.0 / 3.0).abs() < 1e-15);
        let c = empirical_cdf(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]).unwrap();
        assert_eq!(quantile(&c, 0.1), Some(1.0));
        assert_eq!(quantile(&c, 0.9), Some(9.0));
    }
}
