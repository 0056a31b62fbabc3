//! Velocity-times-sampling-period estimates from past position estimates.
//!
//! All three differentiators are antisymmetric FIR filters on the position
//! sequence and return the displacement `v̂ ΔT` (meters per step):
//!
//! | filter       | taps (oldest → newest)                          | centered at |
//! |--------------|-------------------------------------------------|-------------|
//! | `central`    | `(x(k+1) - x(k-1)) / 2`                         | `k`         |
//! | `taylor6`    | `[45 Δ₁ - 9 Δ₂ + Δ₃] / 60`                      | `k - 4`     |
//! | `smooth_fir` | `[5 Δ₁ + 4 Δ₂ + Δ₃] / 32`                       | `k - 4`     |
//!
//! with `Δ₁ = x(k-3) - x(k-5)`, `Δ₂ = x(k-2) - x(k-6)`, `Δ₃ = x(k-1) - x(k-7)`.
//! The two causal filters see the same seven samples; the smooth filter trades
//! accuracy order for a much lower white-noise gain. Neither compensates the
//! four-step lag.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Positions;

/// Minimum number of samples the causal filters need.
pub const FILTER_SPAN: usize = 7;

/// Last few position estimates, indexed by time step.
#[derive(Debug, Clone)]
pub struct PositionHistory {
    capacity: usize,
    entries: VecDeque<(usize, Positions)>,
}

impl PositionHistory {
    pub const DEFAULT_CAPACITY: usize = 8;

    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(Self::DEFAULT_CAPACITY);
        PositionHistory {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    /// Appends the estimate of `step`; steps must be contiguous.
    pub fn push(&mut self, step: usize, positions: Positions) -> Result<()> {
        if let Some((last, _)) = self.entries.back() {
            if step != last + 1 {
                return Err(Error::NonContiguousHistory {
                    expected: last + 1,
                    got: step,
                });
            }
        }
        if !positions.is_finite() {
            return Err(Error::InvalidParams("non-finite position in history".into()));
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((step, positions));
        Ok(())
    }

    pub fn get(&self, step: usize) -> Option<&Positions> {
        let (first, _) = self.entries.front()?;
        if step < *first {
            return None;
        }
        self.entries.get(step - first).map(|(_, p)| p)
    }

    pub fn latest(&self) -> Option<(usize, &Positions)> {
        self.entries.back().map(|(k, p)| (*k, p))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn sample(&self, k: usize, back: usize) -> Result<&Positions> {
        k.checked_sub(back)
            .and_then(|s| self.get(s))
            .ok_or(Error::InsufficientHistory(k))
    }
}

/// Σ_c weight_c · (x(k - newer_c) - x(k - older_c)) / denom
fn antisymmetric(history: &PositionHistory, k: usize, taps: &[(f64, usize, usize)], denom: f64) -> Result<Positions> {
    let mut out: Option<Positions> = None;
    for &(w, newer, older) in taps {
        let a = history.sample(k, newer)?;
        let b = history.sample(k, older)?;
        let acc = out.get_or_insert_with(|| Positions::zeros(a.n_nodes(), a.dim()));
        for ((o, x), y) in acc.as_mut_slice().iter_mut().zip(a.as_slice()).zip(b.as_slice()) {
            *o += w * (x - y);
        }
    }
    let mut out = out.ok_or(Error::InsufficientHistory(k))?;
    out.as_mut_slice().iter_mut().for_each(|v| *v /= denom);
    Ok(out)
}

/// `(x(k+1) - x(k-1)) / 2`; noncausal.
pub fn central_diff(history: &PositionHistory, k: usize) -> Result<Positions> {
    let next = history.get(k + 1).ok_or(Error::InsufficientHistory(k))?;
    let prev = history.sample(k, 1)?;
    let mut out = next.clone();
    for (o, p) in out.as_mut_slice().iter_mut().zip(prev.as_slice()) {
        *o = (*o - p) / 2.0;
    }
    Ok(out)
}

/// Causal sixth-order difference over samples `k-1 ..= k-7`.
pub fn taylor6(history: &PositionHistory, k: usize) -> Result<Positions> {
    antisymmetric(history, k, &[(45.0, 3, 5), (-9.0, 2, 6), (1.0, 1, 7)], 60.0)
}

/// Smooth low-noise differentiator (second-degree fit, seven samples).
pub fn smooth_fir(history: &PositionHistory, k: usize) -> Result<Positions> {
    antisymmetric(history, k, &[(5.0, 3, 5), (4.0, 2, 6), (1.0, 1, 7)], 32.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityMethod {
    /// Centered difference at the newest centerable sample `k - 2`.
    Central,
    Taylor6,
    #[default]
    SmoothFir,
    /// Velocity supplied from outside (e.g. a vehicle's own log).
    External,
}

impl std::str::FromStr for VelocityMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "central" => Ok(VelocityMethod::Central),
            "taylor6" => Ok(VelocityMethod::Taylor6),
            "smooth-fir" | "smooth_fir" => Ok(VelocityMethod::SmoothFir),
            "external" => Ok(VelocityMethod::External),
            other => Err(Error::Parse(format!("unknown velocity method '{other}'"))),
        }
    }
}

/// What to predict with when the chosen filter cannot run yet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fallback {
    /// No motion: the prior is the previous estimate.
    #[default]
    Zero,
    /// `x(k-1) - x(k-2)` when two samples exist, zero otherwise.
    BackwardDifference,
}

/// Displacement `v̂(k-1) ΔT` used to predict step `k` from estimates up to `k - 1`.
///
/// `external` is a velocity (m/s) and is only read for
/// [`VelocityMethod::External`]. Short histories and missing external data fall
/// back to `fallback`; the result is zero-sized only if the history is empty
/// and no external velocity was given.
pub fn estimate_velocity(
    history: &PositionHistory,
    k: usize,
    method: VelocityMethod,
    fallback: Fallback,
    external: Option<&Positions>,
    dt: f64,
) -> Positions {
    let attempt = match method {
        VelocityMethod::Central => k
            .checked_sub(2)
            .ok_or(Error::InsufficientHistory(k))
            .and_then(|c| central_diff(history, c)),
        VelocityMethod::Taylor6 => taylor6(history, k),
        VelocityMethod::SmoothFir => smooth_fir(history, k),
        VelocityMethod::External => match external {
            Some(v) => {
                let mut out = v.clone();
                out.as_mut_slice().iter_mut().for_each(|c| *c *= dt);
                Ok(out)
            }
            None => Err(Error::InsufficientHistory(k)),
        },
    };
    attempt.unwrap_or_else(|_| fallback_displacement(history, k, fallback, external))
}

fn fallback_displacement(
    history: &PositionHistory,
    k: usize,
    fallback: Fallback,
    external: Option<&Positions>,
) -> Positions {
    let shape = history
        .latest()
        .map(|(_, p)| (p.n_nodes(), p.dim()))
        .or_else(|| external.map(|p| (p.n_nodes(), p.dim())))
        .unwrap_or((0, 1));
    let zero = Positions::zeros(shape.0, shape.1);
    match fallback {
        Fallback::Zero => zero,
        Fallback::BackwardDifference => match (history.sample(k, 1), history.sample(k, 2)) {
            (Ok(a), Ok(b)) => {
                let mut out = a.clone();
                for (o, p) in out.as_mut_slice().iter_mut().zip(b.as_slice()) {
                    *o -= p;
                }
                out
            }
            _ => zero,
        },
    }
}
