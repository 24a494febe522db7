//! Closed-system unitary propagation under a time-independent Hamiltonian.
//!
//! Every Hamiltonian built by [`crate::model`] is block diagonal in the
//! connected components of its Fock-basis sparsity graph, so propagation works
//! one [`Sectors`] block at a time. Blocks are exponentiated exactly through a
//! cached eigendecomposition or, when too large, by Lanczos exponential action.

mod density;
mod ensemble;
pub mod krylov;
mod report;
pub mod sectors;
mod trajectory;

use std::sync::{Arc, OnceLock};

use nalgebra_sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{csr_apply, QOperator, StateVector, C64};
use crate::model::HamiltonianModel;

pub use density::{density_trajectory, evolve_density_matrix, DEFAULT_DENSE_CAP};
pub use report::{dwell_below, refrigerator_report, RefrigeratorReport, RefrigeratorRoles};
pub use sectors::{SectorEigen, Sectors};
pub use trajectory::{Diagnostics, Series, Trajectory, TrajectoryMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Auto,
    Eig,
    Krylov,
    Rk4,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Auto => "auto",
            Method::Eig => "eig",
            Method::Krylov => "krylov",
            Method::Rk4 => "rk4",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Method::Auto),
            "eig" => Ok(Method::Eig),
            "krylov" => Ok(Method::Krylov),
            "rk4" => Ok(Method::Rk4),
            other => Err(Error::InvalidArgument(format!(
                "unknown method `{other}` (expected auto, eig, krylov or rk4)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub norm_drift: f64,
    /// Relative to `max(|<H>(0)|, 1)`.
    pub energy_drift_rel: f64,
    /// Relative to `max(|Q(0)|, 1)`.
    pub charge_drift_rel: f64,
    pub krylov_dim: usize,
    pub krylov_tol: f64,
    pub rk4_dt: f64,
    /// Largest sector handed to the dense eigensolver.
    pub eig_sector_cap: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            norm_drift: 1e-9,
            energy_drift_rel: 1e-8,
            charge_drift_rel: 1e-8,
            krylov_dim: 30,
            krylov_tol: 1e-12,
            rk4_dt: 1e-3,
            eig_sector_cap: 4096,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("norm_drift", self.norm_drift),
            ("energy_drift_rel", self.energy_drift_rel),
            ("charge_drift_rel", self.charge_drift_rel),
            ("krylov_tol", self.krylov_tol),
            ("rk4_dt", self.rk4_dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(
                    format!("engine.tolerances.{name}"),
                    format!("must be positive, got {v}"),
                ));
            }
        }
        if self.krylov_dim < 2 {
            return Err(Error::config("engine.tolerances.krylov_dim", "must be >= 2"));
        }
        if self.eig_sector_cap < 1 {
            return Err(Error::config("engine.tolerances.eig_sector_cap", "must be >= 1"));
        }
        Ok(())
    }
}

/// Validates an output time grid: finite, non-negative start, non-decreasing.
pub fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("time grid is empty".into()));
    }
    if !times.iter().all(|t| t.is_finite()) {
        return Err(Error::InvalidArgument("time grid has non-finite entries".into()));
    }
    if times[0] < 0.0 {
        return Err(Error::InvalidArgument(format!("times must start at >= 0, got {}", times[0])));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("times must be sorted".into()));
    }
    Ok(())
}

/// `n_points` uniform times on `[0, t_max]`.
pub fn uniform_times(t_max: f64, n_points: usize) -> Vec<f64> {
    match n_points {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Propagator bound to one model; sector eigendecompositions are computed on
/// first use and shared across threads.
pub struct Propagator<'m> {
    model: &'m HamiltonianModel,
    method: Method,
    tol: Tolerances,
    sectors: Sectors,
    csr: CsrMatrix<C64>,
    eig_cache: Vec<OnceLock<Arc<SectorEigen>>>,
}

impl<'m> Propagator<'m> {
    pub fn new(model: &'m HamiltonianModel, method: Method, tol: Tolerances) -> Result<Self> {
        tol.validate()?;
        let sectors = Sectors::from_operator(model.hamiltonian());
        let largest = sectors.largest();
        let method = match method {
            Method::Auto if largest <= tol.eig_sector_cap => Method::Eig,
            Method::Auto => Method::Krylov,
            Method::Eig if largest > tol.eig_sector_cap => {
                return Err(Error::SectorTooLarge {
                    dim: largest,
                    cap: tol.eig_sector_cap,
                })
            }
            m => m,
        };
        let eig_cache = (0..sectors.len()).map(|_| OnceLock::new()).collect();
        Ok(Self {
            model,
            method,
            tol,
            csr: model.hamiltonian().to_csr(),
            sectors,
            eig_cache,
        })
    }

    pub fn model(&self) -> &HamiltonianModel {
        self.model
    }

    /// The resolved method (never `Auto`).
    pub fn method(&self) -> Method {
        self.method
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn sectors(&self) -> &Sectors {
        &self.sectors
    }

    pub(crate) fn sector_eigen(&self, sector: usize) -> Arc<SectorEigen> {
        self.eig_cache[sector]
            .get_or_init(|| {
                let block = self.model.hamiltonian().submatrix(self.sectors.indices(sector));
                Arc::new(SectorEigen::new(block))
            })
            .clone()
    }

    fn energy(&self, psi: &[C64]) -> f64 {
        let mut hpsi = vec![C64::new(0.0, 0.0); psi.len()];
        csr_apply(&self.csr, psi, &mut hpsi);
        psi.iter().zip(&hpsi).map(|(a, b)| (a.conj() * b).re).sum()
    }

    fn check_drift(&self, t: f64, norm: f64, energy: f64, energy0: f64) -> Result<()> {
        if (norm - 1.0).abs() > self.tol.norm_drift {
            return Err(Error::PropagationDiverged {
                time: t,
                detail: format!("norm drift {:.3e}", (norm - 1.0).abs()),
            });
        }
        let rel = (energy - energy0).abs() / energy0.abs().max(1.0);
        if rel > self.tol.energy_drift_rel {
            return Err(Error::PropagationDiverged {
                time: t,
                detail: format!("relative energy drift {rel:.3e}"),
            });
        }
        Ok(())
    }

    /// `psi(t) = exp(-i H t) psi0` at each requested time.
    pub fn evolve_state(&self, psi0: &StateVector, times: &[f64]) -> Result<Vec<StateVector>> {
        if psi0.layout() != self.model.layout() {
            return Err(Error::LayoutMismatch(format!(
                "state layout {} vs model layout {}",
                psi0.layout(),
                self.model.layout()
            )));
        }
        check_times(times)?;
        let amplitudes = match self.method {
            Method::Rk4 => self.rk4(psi0.amplitudes(), times)?,
            _ => self.evolve_by_sector(psi0.amplitudes(), times)?,
        };
        let energy0 = self.energy(psi0.amplitudes());
        let layout = self.model.layout();
        amplitudes
            .into_iter()
            .zip(times)
            .map(|(amp, &t)| {
                let norm = amp.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                self.check_drift(t, norm, self.energy(&amp), energy0)?;
                Ok(StateVector::from_raw(layout.clone(), amp))
            })
            .collect()
    }

    fn evolve_by_sector(&self, psi0: &[C64], times: &[f64]) -> Result<Vec<Vec<C64>>> {
        let dim = psi0.len();
        let mut out = vec![vec![C64::new(0.0, 0.0); dim]; times.len()];
        for s in 0..self.sectors.len() {
            let idx = self.sectors.indices(s);
            let local: Vec<C64> = idx.iter().map(|&i| psi0[i]).collect();
            if local.iter().all(|x| *x == C64::new(0.0, 0.0)) {
                continue;
            }
            let series = self.evolve_local(s, &local, times)?;
            for (slot, values) in out.iter_mut().zip(series) {
                for (&i, v) in idx.iter().zip(values) {
                    slot[i] = v;
                }
            }
        }
        Ok(out)
    }

    /// Evolves a vector supported on one sector, in local coordinates.
    pub(crate) fn evolve_local(&self, sector: usize, local: &[C64], times: &[f64]) -> Result<Vec<Vec<C64>>> {
        match self.method {
            Method::Krylov => {
                let h = self.sectors.local_csr(&self.csr, sector);
                let mut state = local.to_vec();
                let mut now = 0.0;
                let mut out = Vec::with_capacity(times.len());
                for &t in times {
                    if t > now {
                        state = krylov::expv(&h, &state, t - now, self.tol.krylov_dim, self.tol.krylov_tol)
                            .map_err(|e| match e {
                                Error::PropagationDiverged { detail, .. } => {
                                    Error::PropagationDiverged { time: t, detail }
                                }
                                other => other,
                            })?;
                        now = t;
                    }
                    out.push(state.clone());
                }
                Ok(out)
            }
            _ => {
                let eig = self.sector_eigen(sector);
                let c = eig.to_eigenbasis(local);
                Ok(times
                    .iter()
                    .map(|&t| {
                        let mut v = vec![C64::new(0.0, 0.0); local.len()];
                        eig.evolve(&c, t, &mut v);
                        v
                    })
                    .collect())
            }
        }
    }

    fn rk4(&self, psi0: &[C64], times: &[f64]) -> Result<Vec<Vec<C64>>> {
        let n = psi0.len();
        let minus_i = C64::new(0.0, -1.0);
        let deriv = |x: &[C64], out: &mut [C64]| {
            csr_apply(&self.csr, x, out);
            out.iter_mut().for_each(|v| *v *= minus_i);
        };
        let mut state = psi0.to_vec();
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
            (vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]);
        let mut now = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            let span = t - now;
            if span > 0.0 {
                let steps = (span / self.tol.rk4_dt).ceil().max(1.0) as usize;
                let h = span / steps as f64;
                for _ in 0..steps {
                    deriv(&state, &mut k1);
                    tmp.iter_mut().zip(&state).zip(&k1).for_each(|((o, s), k)| *o = s + k * (0.5 * h));
                    deriv(&tmp, &mut k2);
                    tmp.iter_mut().zip(&state).zip(&k2).for_each(|((o, s), k)| *o = s + k * (0.5 * h));
                    deriv(&tmp, &mut k3);
                    tmp.iter_mut().zip(&state).zip(&k3).for_each(|((o, s), k)| *o = s + k * h);
                    deriv(&tmp, &mut k4);
                    for i in 0..n {
                        state[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
                    }
                }
                now = t;
            }
            out.push(state.clone());
        }
        Ok(out)
    }
}

/// [`Propagator::evolve_state`] with automatic method selection and default tolerances.
pub fn evolve_state(model: &HamiltonianModel, psi0: &StateVector, times: &[f64]) -> Result<Vec<StateVector>> {
    Propagator::new(model, Method::Auto, Tolerances::default())?.evolve_state(psi0, times)
}

/// An observable measured along a trajectory.
#[derive(Debug, Clone)]
pub enum Observable {
    Operator(QOperator),
    /// Fock-diagonal observable given by its diagonal.
    Diagonal(Vec<f64>),
}

impl Observable {
    pub(crate) fn block(&self, indices: &[usize]) -> nalgebra::DMatrix<C64> {
        match self {
            Observable::Operator(op) => op.submatrix(indices),
            Observable::Diagonal(d) => nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                indices.len(),
                indices.iter().map(|&i| C64::new(d[i], 0.0)),
            )),
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        match self {
            Observable::Operator(op) => {
                if op.dim() != dim {
                    return Err(Error::LayoutMismatch(format!(
                        "observable dimension {} vs model dimension {dim}",
                        op.dim()
                    )));
                }
                let dev = op.hermiticity_deviation();
                if dev > 1e-12 * op.max_abs().max(1.0) {
                    return Err(Error::NotHermitian { deviation: dev });
                }
            }
            Observable::Diagonal(d) => {
                if d.len() != dim {
                    return Err(Error::LayoutMismatch(format!(
                        "diagonal observable has {} entries vs model dimension {dim}",
                        d.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, InteractionTerm, ModeSpec};

    fn model(dims: [usize; 3], g: f64) -> HamiltonianModel {
        let modes = vec![
            ModeSpec::new("f", 3.0, dims[0], 1.3),
            ModeSpec::new("c1", 1.0, dims[1], 2.0),
            ModeSpec::new("c2", 2.0, dims[2], 1.3),
        ];
        build_hamiltonian(&modes, &[InteractionTerm::new(1, 2, g)]).unwrap()
    }

    #[test]
    fn free_theory_only_picks_up_phase() {
        let m = model([3, 3, 3], 0.0);
        let psi0 = StateVector::basis(m.layout().clone(), &[1, 2, 0]).unwrap();
        let out = evolve_state(&m, &psi0, &[0.0, 1.0, 7.5]).unwrap();
        for s in out {
            assert!((s.fidelity(&psi0).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn two_level_rabi_transfer() {
        let g = 0.05;
        let m = model([2, 2, 2], g);
        let psi0 = StateVector::basis(m.layout().clone(), &[0, 1, 1]).unwrap();
        // Sector {|0,1,1>, |1,0,0>} with equal diagonals 3 and coupling -g:
        // populations cos^2(g t), sin^2(g t); full transfer at pi / (2 g).
        let t_half = std::f64::consts::PI / (2.0 * g);
        let out = evolve_state(&m, &psi0, &[t_half]).unwrap();
        assert!(out[0].probability(&[1, 0, 0]).unwrap() >= 1.0 - 1e-12);
    }

    #[test]
    fn eig_krylov_and_rk4_agree() {
        let m = model([4, 4, 4], 0.2);
        let amps: Vec<C64> = (0..64).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let psi0 = StateVector::normalized(m.layout().clone(), amps).unwrap();
        let times = [0.0, 2.5, 10.0];
        let eig = Propagator::new(&m, Method::Eig, Tolerances::default()).unwrap();
        let kry = Propagator::new(&m, Method::Krylov, Tolerances::default()).unwrap();
        let rk = Propagator::new(&m, Method::Rk4, Tolerances { rk4_dt: 5e-4, ..Tolerances::default() }).unwrap();
        let a = eig.evolve_state(&psi0, &times).unwrap();
        let b = kry.evolve_state(&psi0, &times).unwrap();
        let c = rk.evolve_state(&psi0, &times).unwrap();
        for i in 0..times.len() {
            assert!(a[i].fidelity(&b[i]).unwrap() >= 1.0 - 1e-9);
            assert!(a[i].fidelity(&c[i]).unwrap() >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn forced_eig_respects_sector_cap() {
        let m = model([4, 4, 4], 0.2);
        let tol = Tolerances { eig_sector_cap: 1, ..Tolerances::default() };
        assert!(matches!(Propagator::new(&m, Method::Eig, tol), Err(Error::SectorTooLarge { .. })));
        assert_eq!(Propagator::new(&m, Method::Auto, tol).unwrap().method(), Method::Krylov);
    }

    #[test]
    fn time_grid_validation() {
        assert!(check_times(&[]).is_err());
        assert!(check_times(&[-1.0, 0.0]).is_err());
        assert!(check_times(&[0.0, 2.0, 1.0]).is_err());
        assert!(check_times(&[0.0, 0.0, 1.0]).is_ok());
        assert_eq!(uniform_times(2.0, 3), vec![0.0, 1.0, 2.0]);
    }
}
