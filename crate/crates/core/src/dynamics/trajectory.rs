use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Observable, Tolerances};
use crate::error::{Error, Result};
use crate::model::HamiltonianModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub dims: Vec<usize>,
    pub method: String,
    pub members: usize,
    pub discarded_mass: f64,
    pub epsilon_tail: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario_hash: Option<String>,
}

/// Largest deviations from the initial value along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub norm_drift: f64,
    pub energy_drift_rel: f64,
    pub charge_drift_rel: Vec<(String, f64)>,
}

impl Diagnostics {
    pub fn max_charge_drift(&self) -> f64 {
        self.charge_drift_rel.iter().map(|c| c.1).fold(0.0, f64::max)
    }
}

/// Per-mode occupations and energies `E_i = omega_i N_i` on a time grid, plus
/// conserved-quantity diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    pub frequencies: Vec<f64>,
    /// `occupations[mode][time]`.
    pub occupations: Vec<Vec<f64>>,
    /// `energies[mode][time]`.
    pub energies: Vec<Vec<f64>>,
    pub charges: Vec<Series>,
    pub total_energy: Vec<f64>,
    /// Retained probability (1 for pure states, `1 - discarded_mass` for truncated ensembles).
    pub norm: Vec<f64>,
    pub meta: TrajectoryMeta,
}

fn max_rel_drift(values: &[f64], floor: f64) -> f64 {
    let Some(&v0) = values.first() else { return 0.0 };
    let scale = v0.abs().max(floor);
    values.iter().map(|v| (v - v0).abs() / scale).fold(0.0, f64::max)
}

impl Trajectory {
    /// Mode occupations, then `H`, then the identity.
    pub(crate) fn standard_observables(model: &HamiltonianModel) -> Vec<Observable> {
        let layout = model.layout();
        let dim = layout.total_dim();
        let mut obs: Vec<Observable> = (0..layout.n_modes())
            .map(|mode| Observable::Diagonal((0..dim).map(|i| layout.occupation(i, mode) as f64).collect()))
            .collect();
        obs.push(Observable::Operator(model.hamiltonian().clone()));
        obs.push(Observable::Diagonal(vec![1.0; dim]));
        obs
    }

    pub(crate) fn from_series(
        model: &HamiltonianModel,
        times: &[f64],
        mut series: Vec<Vec<f64>>,
        meta: TrajectoryMeta,
    ) -> Self {
        let norm = series.pop().expect("identity series");
        let total_energy = series.pop().expect("energy series");
        let occupations = series;
        let modes = model.modes();
        let energies = occupations
            .iter()
            .zip(modes)
            .map(|(n, m)| n.iter().map(|v| m.frequency * v).collect())
            .collect();
        let charges = model
            .conserved_charges()
            .into_iter()
            .map(|c| Series {
                values: (0..times.len())
                    .map(|t| {
                        let occ: Vec<f64> = occupations.iter().map(|n| n[t]).collect();
                        c.evaluate(&occ)
                    })
                    .collect(),
                name: c.name,
            })
            .collect();
        Self {
            times: times.to_vec(),
            labels: modes.iter().map(|m| m.label.clone()).collect(),
            frequencies: modes.iter().map(|m| m.frequency).collect(),
            occupations,
            energies,
            charges,
            total_energy,
            norm,
            meta,
        }
    }

    pub fn mode_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn energy_of(&self, label: &str) -> Option<&[f64]> {
        self.mode_index(label).map(|i| self.energies[i].as_slice())
    }

    pub fn occupation_of(&self, label: &str) -> Option<&[f64]> {
        self.mode_index(label).map(|i| self.occupations[i].as_slice())
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let norm0 = self.norm.first().copied().unwrap_or(1.0);
        Diagnostics {
            norm_drift: self.norm.iter().map(|n| (n - norm0).abs()).fold(0.0, f64::max),
            energy_drift_rel: max_rel_drift(&self.total_energy, 1.0),
            charge_drift_rel: self
                .charges
                .iter()
                .map(|c| (c.name.clone(), max_rel_drift(&c.values, 1.0)))
                .collect(),
        }
    }

    /// Fails with the first time at which a drift tolerance is exceeded.
    pub fn check(&self, tol: &Tolerances) -> Result<()> {
        let norm0 = self.norm.first().copied().unwrap_or(1.0);
        let e0 = self.total_energy.first().copied().unwrap_or(0.0);
        for (k, &t) in self.times.iter().enumerate() {
            let dn = (self.norm[k] - norm0).abs();
            if dn > tol.norm_drift {
                return Err(Error::PropagationDiverged {
                    time: t,
                    detail: format!("ensemble norm drift {dn:.3e}"),
                });
            }
            let de = (self.total_energy[k] - e0).abs() / e0.abs().max(1.0);
            if de > tol.energy_drift_rel {
                return Err(Error::PropagationDiverged {
                    time: t,
                    detail: format!("relative energy drift {de:.3e}"),
                });
            }
            for c in &self.charges {
                let dq = (c.values[k] - c.values[0]).abs() / c.values[0].abs().max(1.0);
                if dq > tol.charge_drift_rel {
                    return Err(Error::PropagationDiverged {
                        time: t,
                        detail: format!("{} drift {dq:.3e}", c.name),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        for l in &self.labels {
            h.push(format!("N_{l}"));
            h.push(format!("E_{l}"));
        }
        for c in &self.charges {
            h.push(c.name.clone());
        }
        h
    }

    /// Header row then one row per time; 12 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.csv_header().join(","))?;
        let mut row = Vec::with_capacity(1 + 2 * self.labels.len() + self.charges.len());
        for (k, t) in self.times.iter().enumerate() {
            row.clear();
            row.push(format!("{t:.11e}"));
            for (n, e) in self.occupations.iter().zip(&self.energies) {
                row.push(format!("{:.11e}", n[k]));
                row.push(format!("{:.11e}", e[k]));
            }
            for c in &self.charges {
                row.push(format!("{:.11e}", c.values[k]));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}
