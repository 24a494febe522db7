//! Ensemble averages over Fock-product members of a thermal state.
//!
//! With the eigendecomposition method, members that share a sector are
//! combined into that sector's initial density matrix in the eigenbasis,
//! `rho_ab = sum_j w_j conj(V_ja) V_jb`, and each observable is evaluated as
//! `sum_ab rho_ab O'_ba exp(-i (E_a - E_b) t)` with `O' = V^dag O V`. The Krylov
//! method propagates each member as a pure state. In both cases sector (or
//! member) contributions are added in the fixed order of the heaviest member.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{Method, Observable, Propagator, Trajectory, TrajectoryMeta};
use crate::error::{Error, Result};
use crate::fock::{csr_apply, C64};
use crate::thermal::ThermalEnsemble;

const CHUNK: usize = 64;

struct Group {
    sector: usize,
    /// (position in sector, weight, member index)
    entries: Vec<(usize, f64, usize)>,
}

impl<'m> Propagator<'m> {
    /// `[observable][time]` ensemble averages `sum_j w_j <psi_j(t)|O|psi_j(t)>`.
    pub fn evolve_ensemble(
        &self,
        ensemble: &ThermalEnsemble,
        times: &[f64],
        observables: &[Observable],
    ) -> Result<Vec<Vec<f64>>> {
        if ensemble.layout() != self.model.layout() {
            return Err(Error::LayoutMismatch(format!(
                "ensemble layout {} vs model layout {}",
                ensemble.layout(),
                self.model.layout()
            )));
        }
        super::check_times(times)?;
        for o in observables {
            o.check(self.model.layout().total_dim())?;
        }
        match self.method {
            Method::Krylov | Method::Rk4 => self.ensemble_by_member(ensemble, times, observables),
            _ => self.ensemble_by_sector(ensemble, times, observables),
        }
    }

    /// Ensemble trajectory of every mode occupation, the charges, `<H>` and the retained weight.
    pub fn ensemble_trajectory(&self, ensemble: &ThermalEnsemble, times: &[f64]) -> Result<Trajectory> {
        let observables = Trajectory::standard_observables(self.model);
        let series = self.evolve_ensemble(ensemble, times, &observables)?;
        let meta = TrajectoryMeta {
            dims: self.model.layout().dims().to_vec(),
            method: self.method.to_string(),
            members: ensemble.len(),
            discarded_mass: ensemble.discarded_mass(),
            epsilon_tail: ensemble.epsilon_tail(),
            scenario_hash: None,
        };
        let traj = Trajectory::from_series(self.model, times, series, meta);
        traj.check(&self.tol)?;
        Ok(traj)
    }

    fn groups(&self, ensemble: &ThermalEnsemble) -> Vec<Group> {
        let mut slot = vec![usize::MAX; self.sectors.len()];
        let mut groups: Vec<Group> = Vec::new();
        for (k, m) in ensemble.members().iter().enumerate() {
            let s = self.sectors.sector_of(m.index);
            if slot[s] == usize::MAX {
                slot[s] = groups.len();
                groups.push(Group {
                    sector: s,
                    entries: Vec::new(),
                });
            }
            groups[slot[s]].entries.push((self.sectors.position(m.index), m.weight, k));
        }
        groups
    }

    fn ensemble_by_sector(
        &self,
        ensemble: &ThermalEnsemble,
        times: &[f64],
        observables: &[Observable],
    ) -> Result<Vec<Vec<f64>>> {
        let groups = self.groups(ensemble);
        let mut total = vec![vec![0.0; times.len()]; observables.len()];
        for chunk in groups.chunks(CHUNK) {
            let parts: Vec<Vec<Vec<f64>>> = chunk
                .par_iter()
                .map(|g| self.sector_contribution(g, times, observables))
                .collect();
            for part in parts {
                for (acc, values) in total.iter_mut().zip(part) {
                    acc.iter_mut().zip(values).for_each(|(a, v)| *a += v);
                }
            }
        }
        Ok(total)
    }

    fn sector_contribution(&self, group: &Group, times: &[f64], observables: &[Observable]) -> Vec<Vec<f64>> {
        let eig = self.sector_eigen(group.sector);
        let d = eig.dim();
        let v = &eig.vectors;
        let mut rho = DMatrix::<C64>::zeros(d, d);
        for &(pos, w, _) in &group.entries {
            for b in 0..d {
                let vb = v[(pos, b)] * w;
                for a in 0..d {
                    rho[(a, b)] += v[(pos, a)].conj() * vb;
                }
            }
        }
        let idx = self.sectors.indices(group.sector);
        let phases: Vec<Vec<C64>> = times
            .iter()
            .map(|&t| eig.energies.iter().map(|&e| C64::from_polar(1.0, -e * t)).collect())
            .collect();
        observables
            .iter()
            .map(|obs| {
                let o = v.adjoint() * obs.block(idx) * v;
                // K_ab = rho_ab O'_ba
                let k = DMatrix::from_fn(d, d, |a, b| rho[(a, b)] * o[(b, a)]);
                phases
                    .iter()
                    .map(|p| {
                        let mut acc = C64::new(0.0, 0.0);
                        for a in 0..d {
                            let mut row = C64::new(0.0, 0.0);
                            for b in 0..d {
                                row += k[(a, b)] * p[b].conj();
                            }
                            acc += p[a] * row;
                        }
                        acc.re
                    })
                    .collect()
            })
            .collect()
    }

    fn ensemble_by_member(
        &self,
        ensemble: &ThermalEnsemble,
        times: &[f64],
        observables: &[Observable],
    ) -> Result<Vec<Vec<f64>>> {
        let csrs: Vec<Option<_>> = observables
            .iter()
            .map(|o| match o {
                Observable::Operator(op) => Some(op.to_csr()),
                Observable::Diagonal(_) => None,
            })
            .collect();
        let mut total = vec![vec![0.0; times.len()]; observables.len()];
        let members = ensemble.members();
        for chunk in members.chunks(CHUNK) {
            let parts: Vec<Result<Vec<Vec<f64>>>> = chunk
                .par_iter()
                .map(|m| {
                    self.member_contribution(m.index, m.weight, times, observables, &csrs)
                        .map_err(|e| Error::Member {
                            member: m.occupations.clone(),
                            source: Box::new(e),
                        })
                })
                .collect();
            for part in parts {
                for (acc, values) in total.iter_mut().zip(part?) {
                    acc.iter_mut().zip(values).for_each(|(a, v)| *a += v);
                }
            }
        }
        Ok(total)
    }

    fn member_contribution(
        &self,
        index: usize,
        weight: f64,
        times: &[f64],
        observables: &[Observable],
        csrs: &[Option<nalgebra_sparse::CsrMatrix<C64>>],
    ) -> Result<Vec<Vec<f64>>> {
        let s = self.sectors.sector_of(index);
        let idx = self.sectors.indices(s);
        let mut local = vec![C64::new(0.0, 0.0); idx.len()];
        local[self.sectors.position(index)] = C64::new(1.0, 0.0);
        let states = match self.method {
            Method::Rk4 => {
                let mut full = vec![C64::new(0.0, 0.0); self.model.layout().total_dim()];
                full[index] = C64::new(1.0, 0.0);
                self.rk4(&full, times)?
                    .into_iter()
                    .map(|v| idx.iter().map(|&i| v[i]).collect())
                    .collect()
            }
            _ => self.evolve_local(s, &local, times)?,
        };
        let h_local = self.sectors.local_csr(&self.csr, s);
        let energy = |psi: &[C64]| {
            let mut out = vec![C64::new(0.0, 0.0); psi.len()];
            csr_apply(&h_local, psi, &mut out);
            psi.iter().zip(&out).map(|(a, b)| (a.conj() * b).re).sum::<f64>()
        };
        let e0 = energy(&local);
        for (psi, &t) in states.iter().zip(times) {
            let norm = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            let e = if std::ptr::eq(psi, states.last().unwrap()) { energy(psi) } else { e0 };
            self.check_drift(t, norm, e, e0)?;
        }
        let locals: Vec<Option<_>> = csrs
            .iter()
            .map(|c| c.as_ref().map(|m| self.sectors.local_csr(m, s)))
            .collect();
        Ok(observables
            .iter()
            .zip(&locals)
            .map(|(obs, local_op)| {
                states
                    .iter()
                    .map(|psi| {
                        let value = match (obs, local_op) {
                            (Observable::Diagonal(d), _) => idx
                                .iter()
                                .zip(psi)
                                .map(|(&i, a)| d[i] * a.norm_sqr())
                                .sum::<f64>(),
                            (_, Some(op)) => {
                                let mut out = vec![C64::new(0.0, 0.0); psi.len()];
                                csr_apply(op, psi, &mut out);
                                psi.iter().zip(&out).map(|(a, b)| (a.conj() * b).re).sum()
                            }
                            _ => unreachable!("operators always carry a CSR form"),
                        };
                        weight * value
                    })
                    .collect()
            })
            .collect())
    }
}
