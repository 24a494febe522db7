//! Reference path: `rho(t) = U rho0 U^dag` from one dense eigendecomposition
//! of the full Hamiltonian, with no sector bookkeeping.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{check_times, Observable, Trajectory, TrajectoryMeta};
use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, C64};
use crate::model::HamiltonianModel;

pub const DEFAULT_DENSE_CAP: usize = 2048;

/// `[observable][time]` values of `Tr[O rho(t)]`.
pub fn evolve_density_matrix(
    model: &HamiltonianModel,
    rho0: &DensityMatrix,
    times: &[f64],
    observables: &[Observable],
    dense_cap: usize,
) -> Result<Vec<Vec<f64>>> {
    let dim = model.layout().total_dim();
    if dim > dense_cap {
        return Err(Error::DenseCapExceeded { dim, cap: dense_cap });
    }
    if rho0.layout() != model.layout() {
        return Err(Error::LayoutMismatch(format!(
            "density layout {} vs model layout {}",
            rho0.layout(),
            model.layout()
        )));
    }
    check_times(times)?;
    for o in observables {
        o.check(dim)?;
    }
    let eig = SymmetricEigen::new(model.hamiltonian().to_dense());
    let v = eig.eigenvectors;
    let energies: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let rho = v.adjoint() * rho0.matrix() * &v;
    let all: Vec<usize> = (0..dim).collect();
    let mut out = Vec::with_capacity(observables.len());
    for obs in observables {
        let o = v.adjoint() * obs.block(&all) * &v;
        let mut series = Vec::with_capacity(times.len());
        for &t in times {
            // rho(t)_ab = rho_ab exp(-i (E_a - E_b) t) in the eigenbasis.
            let rt = DMatrix::from_fn(dim, dim, |a, b| {
                rho[(a, b)] * C64::from_polar(1.0, -(energies[a] - energies[b]) * t)
            });
            let value: C64 = (&o * rt).trace();
            series.push(value.re);
        }
        out.push(series);
    }
    Ok(out)
}

/// Standard trajectory (occupations, charges, energy, trace) from the density-matrix path.
pub fn density_trajectory(
    model: &HamiltonianModel,
    rho0: &DensityMatrix,
    times: &[f64],
    dense_cap: usize,
) -> Result<Trajectory> {
    let observables = Trajectory::standard_observables(model);
    let series = evolve_density_matrix(model, rho0, times, &observables, dense_cap)?;
    let meta = TrajectoryMeta {
        dims: model.layout().dims().to_vec(),
        method: "density".into(),
        members: 0,
        discarded_mass: 0.0,
        epsilon_tail: 0.0,
        scenario_hash: None,
    };
    Ok(Trajectory::from_series(model, times, series, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::StateVector;
    use crate::model::{build_hamiltonian, InteractionTerm, ModeSpec};

    #[test]
    fn maximally_mixed_is_stationary() {
        let modes = vec![
            ModeSpec::new("f", 3.0, 3, 1.0),
            ModeSpec::new("c1", 1.0, 3, 1.0),
            ModeSpec::new("c2", 2.0, 3, 1.0),
        ];
        let m = build_hamiltonian(&modes, &[InteractionTerm::new(1, 2, 0.4)]).unwrap();
        let rho = DensityMatrix::maximally_mixed(m.layout().clone());
        let traj = density_trajectory(&m, &rho, &[0.0, 3.0, 11.0], DEFAULT_DENSE_CAP).unwrap();
        for occ in &traj.occupations {
            for v in occ {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        let modes = vec![ModeSpec::new("f", 3.0, 3, 1.0), ModeSpec::new("c1", 1.0, 3, 1.0)];
        let m = build_hamiltonian(&modes, &[]).unwrap();
        let psi = StateVector::basis(m.layout().clone(), &[0, 0]).unwrap();
        let rho = DensityMatrix::from_pure(&psi);
        assert!(matches!(
            evolve_density_matrix(&m, &rho, &[0.0], &[], 4),
            Err(Error::DenseCapExceeded { dim: 9, cap: 4 })
        ));
    }
}
