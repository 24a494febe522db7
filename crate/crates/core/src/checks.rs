//! Built-in invariant suite behind `casimir check`.

use std::time::Instant;

use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::cavity::{self, CavityGeometry};
use crate::dynamics::{density_trajectory, Method, Propagator, Tolerances, DEFAULT_DENSE_CAP};
use crate::error::Result;
use crate::fock::{annihilation, creation, embed, DensityMatrix, QOperator, SpaceLayout, StateVector, StorageKind};
use crate::model::{build_hamiltonian, InteractionTerm, ModeSpec};
use crate::scenario::{bundled, bundled_names, run, RunOptions};
use crate::thermal::{gibbs_state, product_ensemble, product_gibbs, recommend_dim, bose_occupation, tail_mass};

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type CheckFn = fn() -> Result<(bool, String)>;

const CHECKS: &[(&str, CheckFn)] = &[
    ("operator-algebra", operator_algebra),
    ("hermitian-hamiltonians", hermitian_hamiltonians),
    ("two-level-transfer", two_level_transfer),
    ("oracle-equivalence", oracle_equivalence),
    ("conservation", conservation),
    ("cavity-spectrum", cavity_spectrum),
    ("thermal-occupation", thermal_occupation),
];

pub fn check_names() -> impl Iterator<Item = &'static str> {
    CHECKS.iter().map(|(n, _)| *n)
}

/// Runs every check; an `Err` from a check counts as a failure.
pub fn run_checks() -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|(name, f)| {
            let start = Instant::now();
            let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
            CheckOutcome {
                name,
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn three_modes(dims: [usize; 3], temps: [f64; 3]) -> Vec<ModeSpec> {
    vec![
        ModeSpec::new("f", 3.0, dims[0], temps[0]),
        ModeSpec::new("c1", 1.0, dims[1], temps[1]),
        ModeSpec::new("c2", 2.0, dims[2], temps[2]),
    ]
}

fn operator_algebra() -> Result<(bool, String)> {
    let mut worst_comm = 0.0f64;
    for d in 2..=10 {
        let a = annihilation(d)?;
        let comm = a.commutator(&creation(d)?)?;
        let mut expect = vec![1.0; d];
        expect[d - 1] = 1.0 - d as f64;
        let target = QOperator::diagonal(SpaceLayout::single(d)?, &expect, StorageKind::Sparse)?;
        worst_comm = worst_comm.max(comm.max_abs_diff(&target)?);
    }
    let layout = SpaceLayout::new(vec![3, 4, 2])?;
    let mut worst_embed = 0.0f64;
    for mode in 0..3 {
        let d = layout.dims()[mode];
        let (a, ad) = (annihilation(d)?, creation(d)?);
        let lhs = embed(&a.checked_mul(&ad)?, mode, &layout)?;
        let rhs = embed(&a, mode, &layout)?.checked_mul(&embed(&ad, mode, &layout)?)?;
        worst_embed = worst_embed.max(lhs.max_abs_diff(&rhs)?);
    }
    let passed = worst_comm <= 1e-12 && worst_embed <= 1e-12;
    Ok((passed, format!("commutator {worst_comm:.1e}, embed {worst_embed:.1e}")))
}

fn hermitian_hamiltonians() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for name in bundled_names().filter(|n| n.ends_with("-scaled")) {
        let model = bundled(name)?.build_model()?;
        worst = worst.max(model.hamiltonian().hermiticity_deviation());
    }
    Ok((worst <= 1e-12, format!("max |H - H^dagger| = {worst:.1e}")))
}

fn two_level_transfer() -> Result<(bool, String)> {
    let g = 0.05;
    let model = build_hamiltonian(&three_modes([2, 2, 2], [0.0; 3]), &[InteractionTerm::new(1, 2, g)])?;
    let layout = model.layout().clone();
    let start = layout.index_of(&[0, 1, 1])?;
    let target = layout.index_of(&[1, 0, 0])?;
    let block = model.hamiltonian().submatrix(&[start, target]);
    let eig = SymmetricEigen::new(block).eigenvalues;
    let t_half = std::f64::consts::PI / (eig.max() - eig.min()).abs();
    let psi0 = StateVector::basis(layout.clone(), &[0, 1, 1])?;
    let out = Propagator::new(&model, Method::Eig, Tolerances::default())?.evolve_state(&psi0, &[0.0, t_half])?;
    let fidelity = out[1].fidelity(&StateVector::basis(layout, &[1, 0, 0])?)?;
    Ok((fidelity >= 1.0 - 1e-8, format!("fidelity {fidelity:.12} at t = {t_half:.6}")))
}

fn oracle_equivalence() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let times = crate::dynamics::uniform_times(50.0, 26);
    let cases: Vec<(Vec<ModeSpec>, Vec<InteractionTerm>)> = vec![
        (three_modes([3, 3, 3], [1.3, 2.0, 1.3]), vec![InteractionTerm::new(1, 2, 0.05)]),
        (
            vec![
                ModeSpec::new("f", 3.0, 2, 1.3),
                ModeSpec::new("c1", 1.0, 2, 2.0),
                ModeSpec::new("c2", 2.0, 2, 1.3),
                ModeSpec::new("c3", 1.8, 2, 1.3),
                ModeSpec::new("c4", 1.2, 2, 1.3),
            ],
            vec![InteractionTerm::new(1, 2, 0.05), InteractionTerm::new(3, 4, 0.05)],
        ),
    ];
    for (modes, terms) in cases {
        let model = build_hamiltonian(&modes, &terms)?;
        let ens = product_ensemble(&modes, 0.0)?;
        let a = Propagator::new(&model, Method::Auto, Tolerances::default())?.ensemble_trajectory(&ens, &times)?;
        let b = density_trajectory(&model, &product_gibbs(&modes)?, &times, DEFAULT_DENSE_CAP)?;
        for (x, y) in a.occupations.iter().flatten().zip(b.occupations.iter().flatten()) {
            worst = worst.max((x - y).abs());
        }
        for (x, y) in a.total_energy.iter().zip(&b.total_energy) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok((worst <= 1e-9, format!("max deviation {worst:.1e}")))
}

fn conservation() -> Result<(bool, String)> {
    let out = run(&bundled("fig2-scaled")?, &RunOptions::default())?;
    let d = out.metadata.diagnostics;
    let passed = d.norm_drift <= 1e-9 && d.energy_drift_rel <= 1e-8 && d.max_charge_drift() <= 1e-8;
    Ok((
        passed,
        format!(
            "norm {:.1e}, energy {:.1e}, charges {:.1e}",
            d.norm_drift,
            d.energy_drift_rel,
            d.max_charge_drift()
        ),
    ))
}

fn cavity_spectrum() -> Result<(bool, String)> {
    let free = CavityGeometry::new(0.0, 1.0, 0.5, std::f64::consts::FRAC_PI_2);
    let modes = cavity::solve_modes(&free, 8)?;
    let spectrum = modes
        .iter()
        .enumerate()
        .map(|(i, m)| (m.k - (i + 1) as f64 * std::f64::consts::PI).abs())
        .fold(0.0, f64::max);
    let geometry = CavityGeometry::new(0.05, 3.0, 0.2, 0.4);
    let gram = cavity::gram_residual(&cavity::solve_modes(&geometry, 6)?, &geometry);
    Ok((
        spectrum <= 1e-10 && gram <= 1e-8,
        format!("k_n - n pi {spectrum:.1e}, Gram residual {gram:.1e}"),
    ))
}

fn thermal_occupation() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for (omega, t) in [(1.0, 2.0), (2.0, 1.3), (3.0, 1.3), (1.0, 100.0)] {
        let dim = recommend_dim(omega, t, 1e-6)?;
        let tail = tail_mass(omega, t, dim);
        let bound = dim as f64 * tail / (1.0 - tail);
        let gap = (gibbs_state(omega, t, dim)?.mean_occupation() - bose_occupation(omega, t)).abs();
        worst = worst.max(gap - bound);
    }
    let zero = gibbs_state(1.0, 0.0, 4)?;
    let vacuum = DensityMatrix::from_diagonal(SpaceLayout::single(4)?, &[1.0, 0.0, 0.0, 0.0])?;
    let exact_zero = zero.density().matrix() == vacuum.matrix() && zero.mean_occupation() == 0.0;
    Ok((
        worst <= 1e-12 && exact_zero,
        format!("gap beyond the truncation shift {worst:.1e}, T = 0 vacuum exact: {exact_zero}"),
    ))
}
