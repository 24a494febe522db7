use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};
use crate::model::ModeSpec;

/// Which modes play the hot and cold roles; the SQUID is always mode 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefrigeratorRoles {
    pub hot: String,
    pub cold: String,
    /// Dwell is the time spent below `dwell_fraction * E_cold(0)`.
    #[serde(default = "default_dwell_fraction")]
    pub dwell_fraction: f64,
}

fn default_dwell_fraction() -> f64 {
    0.99
}

impl Default for RefrigeratorRoles {
    fn default() -> Self {
        Self {
            hot: "c1".into(),
            cold: "c2".into(),
            dwell_fraction: default_dwell_fraction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefrigeratorReport {
    pub squid: String,
    pub hot: String,
    pub cold: String,
    pub initial_cold_energy: f64,
    pub min_cold_energy: f64,
    pub t_min: f64,
    pub dwell_threshold: f64,
    pub dwell: f64,
    pub initial_squid_energy: f64,
    pub max_squid_energy: f64,
    pub t_max_squid: f64,
    pub cooling_achieved: bool,
    /// `T_cold <= T_f < T_hot`.
    pub regime_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime_note: Option<String>,
}

/// Total time with `values < threshold`, crossings located by linear interpolation.
pub fn dwell_below(times: &[f64], values: &[f64], threshold: f64) -> f64 {
    let mut total = 0.0;
    for k in 1..times.len().min(values.len()) {
        let (t0, t1) = (times[k - 1], times[k]);
        let (a, b) = (values[k - 1] - threshold, values[k] - threshold);
        let dt = t1 - t0;
        total += match (a < 0.0, b < 0.0) {
            (true, true) => dt,
            (false, false) => 0.0,
            (true, false) => dt * (-a) / (b - a),
            (false, true) => dt * (-b) / (a - b),
        };
    }
    total
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn refrigerator_report(
    trajectory: &Trajectory,
    modes: &[ModeSpec],
    roles: &RefrigeratorRoles,
) -> Result<RefrigeratorReport> {
    let find = |label: &str| {
        modes
            .iter()
            .position(|m| m.label == label)
            .ok_or_else(|| Error::InvalidArgument(format!("no mode labelled `{label}`")))
    };
    let (hot, cold) = (find(&roles.hot)?, find(&roles.cold)?);
    if hot == 0 || cold == 0 || hot == cold {
        return Err(Error::InvalidArgument(
            "hot and cold roles must name two distinct cavity modes".into(),
        ));
    }
    if trajectory.times.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let e_cold = &trajectory.energies[cold];
    let e_f = &trajectory.energies[0];
    let i_min = argmin(e_cold);
    let i_max = argmax(e_f);
    let initial = e_cold[0];
    let threshold = roles.dwell_fraction * initial;
    let tolerance = 1e-9 * initial.abs() + 1e-12;

    let (tf, th, tc) = (modes[0].temperature, modes[hot].temperature, modes[cold].temperature);
    let regime_ok = tc <= tf && tf < th;
    let regime_note = (!regime_ok).then(|| {
        format!("outside the refrigerator regime T_cold <= T_f < T_hot (T_cold = {tc}, T_f = {tf}, T_hot = {th})")
    });
    Ok(RefrigeratorReport {
        squid: modes[0].label.clone(),
        hot: modes[hot].label.clone(),
        cold: modes[cold].label.clone(),
        initial_cold_energy: initial,
        min_cold_energy: e_cold[i_min],
        t_min: trajectory.times[i_min],
        dwell_threshold: threshold,
        dwell: dwell_below(&trajectory.times, e_cold, threshold),
        initial_squid_energy: e_f[0],
        max_squid_energy: e_f[i_max],
        t_max_squid: trajectory.times[i_max],
        cooling_achieved: e_cold[i_min] < initial - tolerance,
        regime_ok,
        regime_note,
    })
}
