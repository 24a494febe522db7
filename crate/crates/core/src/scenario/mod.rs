//! Experiment documents: parsing, validation, model assembly, runs, sweeps and
//! truncation-convergence ladders.
//!
//! A scenario is a JSON document; unknown keys are rejected and every error
//! names the offending path (for example `modes[1].temperature`).

mod bundled;
mod convergence;
mod modes;
mod run;
mod sweep;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cavity::{self, CavityGeometry};
use crate::dynamics::{Method, RefrigeratorRoles, Tolerances};
use crate::error::{Error, Result};
use crate::model::{self, build_hamiltonian, HamiltonianModel, InteractionTerm, ModeSpec};
use crate::thermal::DEFAULT_MEMBER_CAP;

pub use bundled::{bundled, bundled_names, BUNDLED};
pub use modes::{write_coupling_matrix, write_mode_table, ModesConfig};
pub use convergence::{convergence_check, uniform_ladder, ConvergenceRung, ConvergenceTable};
pub use run::{run, run_to_dir, CouplingRecord, RunMetadata, RunOptions, RunOutput, WrittenFiles};
pub use sweep::{set_parameter, sweep, write_sweep_csv, SweepRow, SweepSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// SQUID first, then cavity modes in declaration order.
    pub modes: Vec<ModeSpec>,
    pub coupling: Coupling,
    #[serde(default)]
    pub pairs: Pairs,
    #[serde(default, skip_serializing_if = "is_false")]
    pub free_theory: bool,
    pub times: TimeGrid,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refrigerator: Option<RefrigeratorRoles>,
    #[serde(default)]
    pub outputs: Outputs,
    /// Suggested sweep for the `sweep` command when none is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum Coupling {
    /// One strength `g` for every pair, with optional per-pair overrides.
    Direct {
        g: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        overrides: Vec<PairStrength>,
    },
    /// Strengths from the cavity mode solver.
    Derived(DerivedCoupling),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairStrength {
    pub pair: (String, String),
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivedCoupling {
    pub geometry: CavityGeometry,
    /// E_CJ / E_J.
    pub ecj_over_ej: f64,
    /// sqrt(E_J E_CJ) / hbar in units of omega_0.
    pub squid_scale: f64,
    /// Cavity label -> 1-based index in the solver's merged spectrum.
    pub cavity_modes: BTreeMap<String, usize>,
    #[serde(default = "default_df_step")]
    pub df_step: f64,
}

fn default_df_step() -> f64 {
    cavity::DEFAULT_DF_STEP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Pairs {
    /// The keyword `"auto"`: every resonant cavity pair.
    Keyword(String),
    Explicit(Vec<(String, String)>),
}

impl Default for Pairs {
    fn default() -> Self {
        Pairs::Keyword("auto".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_max: f64,
    #[serde(default = "default_points")]
    pub n_points: usize,
}

fn default_points() -> usize {
    400
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        crate::dynamics::uniform_times(self.t_max, self.n_points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Engine {
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_epsilon")]
    pub epsilon_tail: f64,
    #[serde(default = "default_member_cap")]
    pub member_cap: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_epsilon() -> f64 {
    1e-6
}

fn default_member_cap() -> usize {
    DEFAULT_MEMBER_CAP
}

impl Default for Engine {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            epsilon_tail: default_epsilon(),
            member_cap: default_member_cap(),
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_csv")]
    pub trajectory_csv: String,
    #[serde(default = "default_meta")]
    pub metadata_json: String,
    #[serde(default = "default_report")]
    pub report_json: String,
}

fn default_csv() -> String {
    "trajectory.csv".into()
}
fn default_meta() -> String {
    "trajectory.json".into()
}
fn default_report() -> String {
    "report.json".into()
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            trajectory_csv: default_csv(),
            metadata_json: default_meta(),
            report_json: default_report(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Comma-separated parameter paths, all set to each value.
    pub parameter: String,
    pub values: Vec<f64>,
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { "<root>".into() } else { path }, e.into_inner().to_string())
    })?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: impl AsRef<std::path::Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

impl Scenario {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// SHA-256 of the compact JSON serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn squid(&self) -> &ModeSpec {
        &self.modes[0]
    }

    fn label_index(&self, label: &str) -> Option<usize> {
        self.modes.iter().position(|m| m.label == label)
    }

    pub fn roles(&self) -> Option<RefrigeratorRoles> {
        self.refrigerator.clone().or_else(|| {
            let d = RefrigeratorRoles::default();
            (self.label_index(&d.hot).is_some() && self.label_index(&d.cold).is_some()).then_some(d)
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::config("name", "must be non-empty"));
        }
        if self.modes.len() < 2 {
            return Err(Error::config("modes", "need the SQUID mode and at least one cavity mode"));
        }
        let mut labels = HashSet::new();
        for (i, m) in self.modes.iter().enumerate() {
            m.validate(&format!("modes[{i}]"))?;
            if !labels.insert(m.label.as_str()) {
                return Err(Error::config(format!("modes[{i}].label"), format!("duplicate label `{}`", m.label)));
            }
        }
        if !(self.times.t_max >= 0.0 && self.times.t_max.is_finite()) {
            return Err(Error::config("times.t_max", "must be a finite number >= 0"));
        }
        if self.times.n_points == 0 {
            return Err(Error::config("times.n_points", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.engine.epsilon_tail) {
            return Err(Error::config("engine.epsilon_tail", "must be in [0, 1)"));
        }
        if self.engine.member_cap == 0 {
            return Err(Error::config("engine.member_cap", "must be >= 1"));
        }
        self.engine.tolerances.validate()?;
        if let Some(r) = &self.refrigerator {
            for (field, label) in [("hot", &r.hot), ("cold", &r.cold)] {
                match self.label_index(label) {
                    Some(i) if i > 0 => {}
                    _ => {
                        return Err(Error::config(
                            format!("refrigerator.{field}"),
                            format!("`{label}` is not a cavity mode label"),
                        ))
                    }
                }
            }
            if r.hot == r.cold {
                return Err(Error::config("refrigerator", "hot and cold must differ"));
            }
            if !(r.dwell_fraction > 0.0 && r.dwell_fraction.is_finite()) {
                return Err(Error::config("refrigerator.dwell_fraction", "must be positive"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::config("sweep.values", "must be non-empty"));
            }
        }
        check_terms(&self.modes, &self.terms()?)
    }

    /// Resolved cavity pairs as layout indices.
    pub fn pair_indices(&self) -> Result<Vec<(usize, usize)>> {
        let omega_f = self.squid().frequency;
        let pairs = match &self.pairs {
            Pairs::Keyword(k) if k == "auto" => {
                let freqs: Vec<f64> = self.modes[1..].iter().map(|m| m.frequency).collect();
                model::resonant_pairs(&freqs, omega_f, model::default_tolerance(omega_f))
            }
            Pairs::Keyword(other) => {
                return Err(Error::config("pairs", format!("expected \"auto\" or a list of label pairs, got \"{other}\"")))
            }
            Pairs::Explicit(list) => {
                let mut out = Vec::with_capacity(list.len());
                for (i, (a, b)) in list.iter().enumerate() {
                    let lookup = |label: &String, slot: usize| match self.label_index(label) {
                        Some(idx) if idx > 0 => Ok(idx),
                        Some(_) => Err(Error::config(format!("pairs[{i}][{slot}]"), "the SQUID cannot be paired")),
                        None => Err(Error::config(format!("pairs[{i}][{slot}]"), format!("unknown label `{label}`"))),
                    };
                    out.push((lookup(a, 0)?, lookup(b, 1)?));
                }
                out
            }
        };
        if pairs.is_empty() && !self.free_theory {
            return Err(Error::config(
                "pairs",
                "no resonant pair; set free_theory = true to run without interaction",
            ));
        }
        Ok(pairs)
    }

    /// Interaction terms with their strengths from the coupling source.
    pub fn terms(&self) -> Result<Vec<InteractionTerm>> {
        let pairs = self.pair_indices()?;
        match &self.coupling {
            Coupling::Direct { g, overrides } => {
                if !g.is_finite() {
                    return Err(Error::config("coupling.g", "must be finite"));
                }
                let mut terms: Vec<_> = pairs.iter().map(|&(n, m)| InteractionTerm::new(n, m, *g)).collect();
                for (i, o) in overrides.iter().enumerate() {
                    let path = format!("coupling.overrides[{i}]");
                    let (a, b) = (self.label_index(&o.pair.0), self.label_index(&o.pair.1));
                    let (Some(a), Some(b)) = (a, b) else {
                        return Err(Error::config(format!("{path}.pair"), "unknown label"));
                    };
                    let t = terms
                        .iter_mut()
                        .find(|t| (t.n, t.m) == (a, b) || (t.n, t.m) == (b, a))
                        .ok_or_else(|| Error::config(format!("{path}.pair"), "not one of the interacting pairs"))?;
                    if !o.g.is_finite() {
                        return Err(Error::config(format!("{path}.g"), "must be finite"));
                    }
                    t.strength = o.g;
                }
                Ok(terms)
            }
            Coupling::Derived(d) => self.derived_terms(d, &pairs),
        }
    }

    fn derived_terms(&self, d: &DerivedCoupling, pairs: &[(usize, usize)]) -> Result<Vec<InteractionTerm>> {
        if !(d.squid_scale > 0.0 && d.squid_scale.is_finite()) {
            return Err(Error::config("coupling.squid_scale", "must be positive"));
        }
        if !(d.df_step > 0.0) {
            return Err(Error::config("coupling.df_step", "must be positive"));
        }
        let squid = cavity::squid_frequency(&d.geometry, d.ecj_over_ej)
            .map_err(|e| Error::config("coupling.geometry", e.to_string()))?;
        let omega_f = d.squid_scale * squid.factor;
        let declared = self.squid().frequency;
        if (omega_f - declared).abs() > 1e-6 * declared {
            return Err(Error::config(
                "coupling",
                format!("derived omega_f = {omega_f} does not match modes[0].frequency = {declared} within 1e-6 relative"),
            ));
        }
        let e_cj = d.squid_scale * d.ecj_over_ej.sqrt();
        let index_of = |label: &str| -> Result<usize> {
            d.cavity_modes
                .get(label)
                .copied()
                .filter(|&n| n >= 1)
                .ok_or_else(|| Error::config("coupling.cavity_modes", format!("no solver index >= 1 for `{label}`")))
        };
        let needed = pairs
            .iter()
            .flat_map(|&(n, m)| [n, m])
            .map(|i| index_of(&self.modes[i].label))
            .collect::<Result<Vec<_>>>()?;
        let n_solve = needed.iter().copied().max().unwrap_or(1);
        let solved = cavity::solve_modes_with(&d.geometry, n_solve, d.df_step)
            .map_err(|e| Error::config("coupling.geometry", e.to_string()))?;
        let cm = cavity::coupling_matrix(&solved, &d.geometry, d.df_step)
            .map_err(|e| Error::config("coupling.geometry", e.to_string()))?;
        pairs
            .iter()
            .map(|&(n, m)| {
                let (kn, km) = (index_of(&self.modes[n].label)?, index_of(&self.modes[m].label)?);
                let (wn, wm) = (self.modes[n].frequency, self.modes[m].frequency);
                let m_nm = cm.get(kn, km).expect("solved index");
                let m_mn = cm.get(km, kn).expect("solved index");
                let g = cavity::coupling_strength(m_nm, wn, wm, declared, e_cj)?
                    + cavity::coupling_strength(m_mn, wm, wn, declared, e_cj)?;
                Ok(InteractionTerm::new(n, m, g))
            })
            .collect()
    }

    pub fn build_model(&self) -> Result<HamiltonianModel> {
        build_hamiltonian(&self.modes, &self.terms()?)
    }

    /// The same scenario with every mode truncated to `dims`.
    pub fn with_dims(&self, dims: &[usize]) -> Result<Self> {
        if dims.len() != self.modes.len() {
            return Err(Error::InvalidArgument(format!(
                "{} dims for {} modes",
                dims.len(),
                self.modes.len()
            )));
        }
        let mut s = self.clone();
        for (m, &d) in s.modes.iter_mut().zip(dims) {
            m.dim = d;
        }
        s.validate()?;
        Ok(s)
    }
}

fn check_terms(modes: &[ModeSpec], terms: &[InteractionTerm]) -> Result<()> {
    let omega_f = modes[0].frequency;
    let tol = model::default_tolerance(omega_f);
    let mut seen = HashSet::new();
    for (i, t) in terms.iter().enumerate() {
        if t.n == t.m {
            return Err(Error::config(format!("pairs[{i}]"), "a mode cannot pair with itself"));
        }
        let mismatch = (modes[t.n].frequency + modes[t.m].frequency - omega_f).abs();
        if mismatch > tol {
            return Err(Error::config(
                format!("pairs[{i}]"),
                format!(
                    "({}, {}) is not resonant: |omega_n + omega_m - omega_f| = {mismatch:.3e}",
                    modes[t.n].label, modes[t.m].label
                ),
            ));
        }
        if !seen.insert((t.n.min(t.m), t.n.max(t.m))) {
            return Err(Error::config(
                format!("pairs[{i}]"),
                format!("duplicate pair ({}, {})", modes[t.n].label, modes[t.m].label),
            ));
        }
    }
    Ok(())
}
