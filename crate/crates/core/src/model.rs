//! The rotating-wave Hamiltonian of a SQUID mode coupled to cavity-mode pairs:
//!
//! ```text
//! H = sum_i omega_i a_i^dag a_i - sum_(n,m) g_nm (a_f^dag a_m a_n + a_f a_m^dag a_n^dag)
//! ```
//!
//! Mode 0 is always the SQUID. Units are hbar = 1 with frequencies in omega_0.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{QOperator, SpaceLayout, StorageKind, C64};

/// Relative resonance tolerance used when none is given.
pub const RESONANCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub label: String,
    pub frequency: f64,
    pub dim: usize,
    pub temperature: f64,
}

impl ModeSpec {
    pub fn new(label: impl Into<String>, frequency: f64, dim: usize, temperature: f64) -> Self {
        Self {
            label: label.into(),
            frequency,
            dim,
            temperature,
        }
    }

    /// Checks the physical invariants; `path` prefixes error messages.
    pub fn validate(&self, path: &str) -> Result<()> {
        if self.label.is_empty() {
            return Err(Error::config(format!("{path}.label"), "label must be non-empty"));
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(Error::config(
                format!("{path}.frequency"),
                format!("must be a positive finite number, got {}", self.frequency),
            ));
        }
        if self.dim < 2 {
            return Err(Error::config(
                format!("{path}.dim"),
                format!("must be >= 2, got {}", self.dim),
            ));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::config(
                format!("{path}.temperature"),
                format!("must be a finite number >= 0, got {}", self.temperature),
            ));
        }
        Ok(())
    }
}

/// One resonant term `g (a_f^dag a_m a_n + h.c.)`; `n`, `m` index the full layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionTerm {
    pub n: usize,
    pub m: usize,
    pub strength: f64,
}

impl InteractionTerm {
    pub fn new(n: usize, m: usize, strength: f64) -> Self {
        Self { n, m, strength }
    }

    fn key(&self) -> (usize, usize) {
        (self.n.min(self.m), self.n.max(self.m))
    }
}

pub fn default_tolerance(omega_f: f64) -> f64 {
    RESONANCE_TOLERANCE * omega_f
}

/// Unordered cavity pairs with `|omega_n + omega_m - omega_f| <= tolerance`.
///
/// `cavity_frequencies[k]` is cavity mode `k + 1` of the full layout, and the
/// returned pairs `(n, m)` with `n < m` use those layout indices.
pub fn resonant_pairs(cavity_frequencies: &[f64], omega_f: f64, tolerance: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (i, &wi) in cavity_frequencies.iter().enumerate() {
        for (j, &wj) in cavity_frequencies.iter().enumerate().skip(i + 1) {
            if (wi + wj - omega_f).abs() <= tolerance {
                pairs.push((i + 1, j + 1));
            }
        }
    }
    if pairs.is_empty() {
        log::warn!("no resonant pair for omega_f = {omega_f}; the model is a free theory");
    }
    pairs
}

#[derive(Debug, Clone)]
pub struct HamiltonianModel {
    layout: SpaceLayout,
    modes: Vec<ModeSpec>,
    terms: Vec<InteractionTerm>,
    h0: QOperator,
    hint: QOperator,
    h: QOperator,
}

/// A diagonal conserved quantity, stored by its Fock-basis diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Charge {
    pub name: String,
    /// Coefficient per mode: the charge is `sum_i coefficients[i] N_i`.
    pub coefficients: Vec<f64>,
}

impl Charge {
    pub fn diagonal(&self, layout: &SpaceLayout) -> Vec<f64> {
        (0..layout.total_dim())
            .map(|idx| {
                self.coefficients
                    .iter()
                    .enumerate()
                    .map(|(mode, c)| c * layout.occupation(idx, mode) as f64)
                    .sum()
            })
            .collect()
    }

    pub fn operator(&self, layout: &SpaceLayout, kind: StorageKind) -> QOperator {
        QOperator::diagonal(layout.clone(), &self.diagonal(layout), kind)
            .expect("diagonal matches layout")
    }

    /// Value from per-mode occupations.
    pub fn evaluate(&self, occupations: &[f64]) -> f64 {
        self.coefficients.iter().zip(occupations).map(|(c, n)| c * n).sum()
    }
}

pub fn build_hamiltonian(modes: &[ModeSpec], terms: &[InteractionTerm]) -> Result<HamiltonianModel> {
    build_hamiltonian_with(modes, terms, StorageKind::Auto)
}

pub fn build_hamiltonian_with(
    modes: &[ModeSpec],
    terms: &[InteractionTerm],
    kind: StorageKind,
) -> Result<HamiltonianModel> {
    if modes.is_empty() {
        return Err(Error::InvalidArgument("at least the SQUID mode is required".into()));
    }
    for (i, m) in modes.iter().enumerate() {
        m.validate(&format!("modes[{i}]"))?;
    }
    let omega_f = modes[0].frequency;
    let tolerance = default_tolerance(omega_f);
    let mut seen = HashSet::new();
    for t in terms {
        if t.n == t.m {
            return Err(Error::InvalidPair(format!(
                "({}, {}) pairs a mode with itself",
                t.n, t.m
            )));
        }
        if t.n == 0 || t.m == 0 || t.n >= modes.len() || t.m >= modes.len() {
            return Err(Error::InvalidPair(format!(
                "({}, {}) must name two cavity modes in 1..{}",
                t.n,
                t.m,
                modes.len()
            )));
        }
        if !t.strength.is_finite() {
            return Err(Error::InvalidPair(format!("({}, {}) has non-finite strength", t.n, t.m)));
        }
        let mismatch = (modes[t.n].frequency + modes[t.m].frequency - omega_f).abs();
        if mismatch > tolerance {
            return Err(Error::ResonanceViolation {
                n: modes[t.n].label.clone(),
                m: modes[t.m].label.clone(),
                mismatch,
                tolerance,
            });
        }
        if !seen.insert(t.key()) {
            return Err(Error::DuplicatePair(
                modes[t.n].label.clone(),
                modes[t.m].label.clone(),
            ));
        }
    }

    let layout = SpaceLayout::new(modes.iter().map(|m| m.dim).collect::<Vec<_>>())?;
    let dim = layout.total_dim();
    let diag: Vec<f64> = (0..dim)
        .map(|idx| {
            modes
                .iter()
                .enumerate()
                .map(|(i, m)| m.frequency * layout.occupation(idx, i) as f64)
                .sum()
        })
        .collect();
    let h0 = QOperator::diagonal(layout.clone(), &diag, kind)?;

    let mut triplets = Vec::new();
    let dims = layout.dims();
    let mut occ = vec![0usize; modes.len()];
    for idx in 0..dim {
        for (i, o) in occ.iter_mut().enumerate() {
            *o = layout.occupation(idx, i);
        }
        for t in terms {
            // a_f^dag a_m a_n |.., n_f, n_n, n_m, ..>
            let (nf, nn, nm) = (occ[0], occ[t.n], occ[t.m]);
            if nn == 0 || nm == 0 || nf + 1 >= dims[0] {
                continue;
            }
            let amp = ((nf + 1) as f64 * nn as f64 * nm as f64).sqrt();
            let target = idx + layout.stride(0) - layout.stride(t.n) - layout.stride(t.m);
            let v = C64::new(-t.strength * amp, 0.0);
            triplets.push((target, idx, v));
            triplets.push((idx, target, v.conj()));
        }
    }
    let hint = QOperator::from_triplets(layout.clone(), triplets, kind)?;
    let h = h0.checked_add(&hint)?;
    let model = HamiltonianModel {
        layout,
        modes: modes.to_vec(),
        terms: terms.to_vec(),
        h0,
        hint,
        h,
    };
    let dev = model.h.hermiticity_deviation();
    if dev > 1e-12 {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(model)
}

impl HamiltonianModel {
    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn modes(&self) -> &[ModeSpec] {
        &self.modes
    }

    pub fn terms(&self) -> &[InteractionTerm] {
        &self.terms
    }

    pub fn h0(&self) -> &QOperator {
        &self.h0
    }

    pub fn hint(&self) -> &QOperator {
        &self.hint
    }

    pub fn hamiltonian(&self) -> &QOperator {
        &self.h
    }

    pub fn is_free(&self) -> bool {
        self.terms.iter().all(|t| t.strength == 0.0)
    }

    /// Same modes with every coupling multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let terms: Vec<_> = self
            .terms
            .iter()
            .map(|t| InteractionTerm::new(t.n, t.m, t.strength * factor))
            .collect();
        build_hamiltonian_with(
            &self.modes,
            &terms,
            if self.h.is_sparse() {
                StorageKind::Sparse
            } else {
                StorageKind::Dense
            },
        )
    }

    /// `Q = 2 N_f + sum_c N_c` followed by `D = N_n - N_m` for every term whose
    /// two modes touch no other term.
    pub fn conserved_charges(&self) -> Vec<Charge> {
        let n_modes = self.modes.len();
        let mut q = vec![1.0; n_modes];
        q[0] = 2.0;
        let mut charges = vec![Charge {
            name: "Q".into(),
            coefficients: q,
        }];
        let mut degree = vec![0usize; n_modes];
        for t in &self.terms {
            degree[t.n] += 1;
            degree[t.m] += 1;
        }
        let mut isolated: Vec<_> = self
            .terms
            .iter()
            .filter(|t| degree[t.n] == 1 && degree[t.m] == 1)
            .map(|t| t.key())
            .collect();
        isolated.sort_unstable();
        for (n, m) in isolated {
            let mut c = vec![0.0; n_modes];
            c[n] = 1.0;
            c[m] = -1.0;
            charges.push(Charge {
                name: format!("D_{}_{}", self.modes[n].label, self.modes[m].label),
                coefficients: c,
            });
        }
        charges
    }
}

/// `conserved_charges` as operators on the model layout.
pub fn conserved_charges(model: &HamiltonianModel) -> Vec<QOperator> {
    let kind = if model.hamiltonian().is_sparse() {
        StorageKind::Sparse
    } else {
        StorageKind::Dense
    };
    model
        .conserved_charges()
        .iter()
        .map(|c| c.operator(model.layout(), kind))
        .collect()
}
