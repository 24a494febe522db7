use serde::{Deserialize, Serialize};

use super::{run, RunOptions, Scenario};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRung {
    pub dims: Vec<usize>,
    pub initial_cold_energy: f64,
    pub min_cold_energy: f64,
    /// `max_t |E_cold(t; this rung) - E_cold(t; next rung)|`; absent on the last rung.
    pub delta_to_next: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub cold: String,
    pub rungs: Vec<ConvergenceRung>,
    /// Fraction of the top-rung `E_cold(0)` a delta must stay under.
    pub relative_tolerance: f64,
    /// First rung whose delta to the next is within tolerance.
    pub converged_at: Option<usize>,
}

impl ConvergenceTable {
    pub fn threshold(&self) -> f64 {
        self.relative_tolerance * self.rungs.last().map_or(0.0, |r| r.initial_cold_energy.abs())
    }

    /// True when the last delta (the two finest rungs) is within tolerance.
    pub fn top_converged(&self) -> bool {
        let n = self.rungs.len();
        n >= 2 && self.rungs[n - 2].delta_to_next.is_some_and(|d| d <= self.threshold())
    }
}

/// Every mode truncated to the same dimension, once per ladder value.
pub fn uniform_ladder(n_modes: usize, dims: &[usize]) -> Vec<Vec<usize>> {
    dims.iter().map(|&d| vec![d; n_modes]).collect()
}

/// Reruns the scenario along a truncation ladder and compares consecutive cold-mode energies.
pub fn convergence_check(
    scenario: &Scenario,
    ladder: &[Vec<usize>],
    relative_tolerance: f64,
    options: &RunOptions,
) -> Result<ConvergenceTable> {
    if ladder.len() < 2 {
        return Err(Error::InvalidArgument("a convergence ladder needs at least two rungs".into()));
    }
    let cold = scenario
        .roles()
        .map(|r| r.cold)
        .ok_or_else(|| Error::InvalidArgument("convergence checks need refrigerator roles".into()))?;
    let mut series = Vec::with_capacity(ladder.len());
    for dims in ladder {
        let out = run(&scenario.with_dims(dims)?, options)?;
        let e = out
            .trajectory
            .energy_of(&cold)
            .expect("roles were validated")
            .to_vec();
        series.push((dims.clone(), e));
    }
    let mut rungs: Vec<ConvergenceRung> = series
        .iter()
        .map(|(dims, e)| ConvergenceRung {
            dims: dims.clone(),
            initial_cold_energy: e[0],
            min_cold_energy: e.iter().copied().fold(f64::INFINITY, f64::min),
            delta_to_next: None,
        })
        .collect();
    for k in 0..series.len() - 1 {
        let d = series[k]
            .1
            .iter()
            .zip(&series[k + 1].1)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        rungs[k].delta_to_next = Some(d);
    }
    let mut table = ConvergenceTable {
        cold,
        rungs,
        relative_tolerance,
        converged_at: None,
    };
    let threshold = table.threshold();
    table.converged_at = table
        .rungs
        .iter()
        .position(|r| r.delta_to_next.is_some_and(|d| d <= threshold));
    Ok(table)
}
