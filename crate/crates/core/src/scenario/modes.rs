use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Coupling, Scenario};
use crate::cavity::{self, CavityGeometry, CavityMode, CouplingMatrix, Parity};
use crate::error::{Error, Result};

/// Input of the `modes` command: a geometry and how many modes to solve for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesConfig {
    pub geometry: CavityGeometry,
    pub n_modes: usize,
    #[serde(default = "default_df_step")]
    pub df_step: f64,
}

fn default_df_step() -> f64 {
    cavity::DEFAULT_DF_STEP
}

impl ModesConfig {
    /// Accepts either a bare mode-table document or a scenario with derived coupling.
    pub fn parse(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if value.get("modes").is_some() {
            let scenario = super::parse_scenario(text)?;
            return Self::from_scenario(&scenario);
        }
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::config(e.path().to_string(), e.into_inner().to_string()))?;
        if cfg.n_modes == 0 {
            return Err(Error::config("n_modes", "must be >= 1"));
        }
        if !(cfg.df_step > 0.0) {
            return Err(Error::config("df_step", "must be positive"));
        }
        cfg.geometry.validate().map_err(|e| Error::config("geometry", e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        match &scenario.coupling {
            Coupling::Derived(d) => Ok(Self {
                geometry: d.geometry,
                n_modes: d.cavity_modes.values().copied().max().unwrap_or(1),
                df_step: d.df_step,
            }),
            Coupling::Direct { .. } => Err(Error::config(
                "coupling",
                "the mode table needs a scenario with derived coupling (or a bare geometry document)",
            )),
        }
    }

    pub fn solve(&self) -> Result<(Vec<CavityMode>, CouplingMatrix)> {
        let modes = cavity::solve_modes_with(&self.geometry, self.n_modes, self.df_step)?;
        let m = cavity::coupling_matrix(&modes, &self.geometry, self.df_step)?;
        Ok((modes, m))
    }
}

/// One row per mode: index, parity, branch, k, omega, amplitude, dk/df, root residual.
pub fn write_mode_table<W: Write>(modes: &[CavityMode], geometry: &CavityGeometry, mut w: W) -> std::io::Result<()> {
    writeln!(w, "index,parity,branch,k,omega,amplitude,dk_df,residual")?;
    for m in modes {
        let parity = match m.parity {
            Parity::Symmetric => "symmetric",
            Parity::Antisymmetric => "antisymmetric",
        };
        writeln!(
            w,
            "{},{parity},{},{:.11e},{:.11e},{:.11e},{:.11e},{:.3e}",
            m.index,
            m.branch,
            m.k,
            m.omega,
            m.amplitude,
            m.dk_df,
            m.residual(geometry)
        )?;
    }
    Ok(())
}

/// Square CSV of `M[n][m]` with 1-based mode indices as header and first column.
pub fn write_coupling_matrix<W: Write>(m: &CouplingMatrix, mut w: W) -> std::io::Result<()> {
    let header: Vec<String> = m.indices.iter().map(|i| format!("m{i}")).collect();
    writeln!(w, "n,{}", header.join(","))?;
    for (row, n) in m.indices.iter().enumerate() {
        let cells: Vec<String> = (0..m.indices.len()).map(|c| format!("{:.11e}", m.entries[(row, c)])).collect();
        writeln!(w, "{n},{}", cells.join(","))?;
    }
    Ok(())
}
