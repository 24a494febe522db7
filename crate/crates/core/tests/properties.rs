use casimir_core::cavity::{self, CavityGeometry, Parity};
use casimir_core::dynamics::{
    density_trajectory, refrigerator_report, uniform_times, Method, Propagator, RefrigeratorRoles, Tolerances,
};
use casimir_core::fock::{annihilation_with, creation_with, mode_number, number_with};
use casimir_core::scenario::{bundled, parse_scenario, run, RunOptions};
use casimir_core::thermal::{gibbs_state, product_ensemble_with, product_gibbs, tail_mass};
use casimir_core::{
    annihilation, bose_occupation, build_hamiltonian, creation, embed, expectation, product_ensemble, recommend_dim,
    HamiltonianModel, InteractionTerm, ModeSpec, QOperator, SpaceLayout, StateVector, StorageKind, C64,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn complex_matrix(d: usize) -> impl Strategy<Value = DMatrix<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d * d)
        .prop_map(move |v| DMatrix::from_iterator(d, d, v.into_iter().map(|(re, im)| C64::new(re, im))))
}

fn state(dim: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim)
        .prop_map(|v| v.into_iter().map(|(re, im)| C64::new(re, im)).collect::<Vec<_>>())
        .prop_filter("nonzero", |v| v.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-3)
}

/// SQUID plus one or two resonant cavity pairs with random frequencies, dims and couplings.
fn resonant_model() -> impl Strategy<Value = HamiltonianModel> {
    (
        2.0f64..4.0,
        0.1f64..0.45,
        0.1f64..0.45,
        prop::collection::vec(2usize..4, 5),
        -0.2f64..0.2,
        -0.2f64..0.2,
        any::<bool>(),
    )
        .prop_map(|(wf, x1, x3, dims, g1, g2, four)| {
            let mut modes = vec![
                ModeSpec::new("f", wf, dims[0], 1.0),
                ModeSpec::new("c1", x1 * wf, dims[1], 1.0),
                ModeSpec::new("c2", wf - x1 * wf, dims[2], 1.0),
            ];
            let mut terms = vec![InteractionTerm::new(1, 2, g1)];
            if four {
                modes.push(ModeSpec::new("c3", x3 * wf, dims[3], 1.0));
                modes.push(ModeSpec::new("c4", wf - x3 * wf, dims[4], 1.0));
                terms.push(InteractionTerm::new(3, 4, g2));
            }
            build_hamiltonian(&modes, &terms).unwrap()
        })
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn commutator_is_identity_except_top_level(d in 2usize..24) {
        let c = annihilation(d).unwrap().commutator(&creation(d).unwrap()).unwrap().to_dense();
        for i in 0..d {
            for j in 0..d {
                let expect = if i != j { 0.0 } else if i + 1 == d { 1.0 - d as f64 } else { 1.0 };
                prop_assert!((c[(i, j)] - C64::new(expect, 0.0)).norm() <= 1e-14);
            }
        }
    }

    #[test]
    fn embed_preserves_products_and_adjoints(
        dims in prop::collection::vec(2usize..4, 1..4),
        mode_seed in 0usize..8,
        seed_a in complex_matrix(3),
        seed_b in complex_matrix(3),
    ) {
        let layout = SpaceLayout::new(dims.clone()).unwrap();
        let mode = mode_seed % dims.len();
        let d = dims[mode];
        let single = SpaceLayout::single(d).unwrap();
        let a = QOperator::from_dense(single.clone(), seed_a.view((0, 0), (d, d)).into_owned()).unwrap();
        let b = QOperator::from_dense(single, seed_b.view((0, 0), (d, d)).into_owned()).unwrap();
        let lhs = embed(&a.checked_mul(&b).unwrap(), mode, &layout).unwrap();
        let rhs = embed(&a, mode, &layout).unwrap().checked_mul(&embed(&b, mode, &layout).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-15);
        let adj = embed(&a.adjoint(), mode, &layout).unwrap();
        prop_assert!(adj.max_abs_diff(&embed(&a, mode, &layout).unwrap().adjoint()).unwrap() == 0.0);
    }

    #[test]
    fn hermitian_expectations_are_real(m in complex_matrix(6), amps in state(6)) {
        let layout = SpaceLayout::new(vec![2, 3]).unwrap();
        let h = (&m + m.adjoint()).scale(0.5);
        let op = QOperator::from_dense(layout.clone(), h).unwrap();
        let psi = StateVector::normalized(layout, amps).unwrap();
        prop_assert!(expectation(&op, &psi).is_ok());
    }

    #[test]
    fn sparse_and_dense_constructors_agree(d in 2usize..12, dims in prop::collection::vec(2usize..4, 1..4)) {
        for (s, t) in [
            (annihilation_with(d, StorageKind::Sparse), annihilation_with(d, StorageKind::Dense)),
            (creation_with(d, StorageKind::Sparse), creation_with(d, StorageKind::Dense)),
            (number_with(d, StorageKind::Sparse), number_with(d, StorageKind::Dense)),
        ] {
            prop_assert!(max_abs(&(s.unwrap().to_dense() - t.unwrap().to_dense())) <= 1e-14);
        }
        let layout = SpaceLayout::new(dims.clone()).unwrap();
        for mode in 0..dims.len() {
            let s = mode_number(&layout, mode, StorageKind::Sparse).unwrap();
            let t = mode_number(&layout, mode, StorageKind::Dense).unwrap();
            prop_assert!(max_abs(&(s.to_dense() - t.to_dense())) <= 1e-14);
        }
    }

    #[test]
    fn hamiltonian_symmetries(model in resonant_model(), lambda in -3.0f64..3.0) {
        let h = model.hamiltonian();
        prop_assert!(h.hermiticity_deviation() <= 1e-12);
        let resonance = model.h0().commutator(model.hint()).unwrap();
        prop_assert!(resonance.max_abs() <= 1e-10);
        for charge in model.conserved_charges() {
            let q = charge.operator(model.layout(), StorageKind::Sparse);
            prop_assert!(q.commutator(h).unwrap().max_abs() <= 1e-12, "{}", charge.name);
        }
        let scaled = model.scaled(lambda).unwrap();
        prop_assert!(scaled.h0().max_abs_diff(model.h0()).unwrap() == 0.0);
        prop_assert!(scaled.hint().max_abs_diff(&model.hint().scale_real(lambda)).unwrap() <= 1e-14);
    }

    #[test]
    fn gibbs_state_is_a_valid_diagonal_state(omega in 0.2f64..5.0, t in 0.0f64..5.0, d in 2usize..40) {
        let g = gibbs_state(omega, t, d).unwrap();
        let rho = g.density().matrix();
        let mut off = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    off = off.max(rho[(i, j)].norm());
                }
            }
        }
        prop_assert!(off == 0.0);
        prop_assert!(g.populations.iter().all(|p| *p >= 0.0));
        prop_assert!((rho.trace().re - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn truncated_occupation_within_tail_bound(omega in 0.2f64..5.0, t in 0.05f64..50.0, log_eps in -4.0f64..-1.0) {
        let eps = 10f64.powf(log_eps);
        let d = recommend_dim(omega, t, eps).unwrap();
        let nbar = bose_occupation(omega, t);
        let got = gibbs_state(omega, t, d).unwrap().mean_occupation();
        prop_assert!((got - nbar).abs() <= 10.0 * eps * (1.0 + nbar), "d {d}: {got} vs {nbar}");
        let tail = tail_mass(omega, t, d);
        prop_assert!(tail <= eps);
        prop_assert!((nbar - got - d as f64 * tail / (1.0 - tail)).abs() <= 1e-9 * (1.0 + nbar));
    }

    #[test]
    fn ensemble_enumeration_invariants(
        temps in prop::collection::vec(0.0f64..2.5, 3),
        dims in prop::collection::vec(2usize..7, 3),
        eps in 0.0f64..0.2,
    ) {
        let modes = vec![
            ModeSpec::new("f", 3.0, dims[0], temps[0]),
            ModeSpec::new("c1", 1.0, dims[1], temps[1]),
            ModeSpec::new("c2", 2.0, dims[2], temps[2]),
        ];
        let ens = product_ensemble_with(&modes, eps, 1_000_000).unwrap();
        let w: Vec<f64> = ens.members().iter().map(|m| m.weight).collect();
        prop_assert!(w.iter().all(|x| *x > 0.0));
        prop_assert!(w.windows(2).all(|p| p[0] >= p[1]));
        prop_assert!((ens.total_weight() + ens.discarded_mass() - 1.0).abs() <= 1e-12);
        prop_assert!(ens.discarded_mass() <= eps + 1e-15);
        let again = product_ensemble_with(&modes, eps, 1_000_000).unwrap();
        prop_assert_eq!(ens.members(), again.members());
        if eps == 0.0 || ens.discarded_mass() == 0.0 {
            let exact = product_gibbs(&modes).unwrap();
            let pops = ens.to_density_populations();
            for (i, p) in pops.iter().enumerate() {
                prop_assert!((p - exact.matrix()[(i, i)].re).abs() <= 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cavity_modes_satisfy_their_invariants(
        cap in 0.0f64..0.1,
        ej in 0.5f64..50.0,
        eps_l in 0.0f64..1.0,
        f0 in -1.0f64..1.0,
    ) {
        let g = CavityGeometry::new(cap, ej, eps_l, f0);
        let modes = cavity::solve_modes(&g, 6).unwrap();
        for m in &modes {
            prop_assert!(m.residual(&g).abs() <= 1e-10, "{m:?}");
            if m.parity == Parity::Antisymmetric {
                prop_assert!(m.value(0.0) == 0.0 && m.dk_df == 0.0);
            } else {
                prop_assert!(m.value(0.0) >= 0.0);
            }
        }
        prop_assert!(cavity::gram_residual(&modes, &g) <= 1e-8);
        let nudged = cavity::solve_modes(&CavityGeometry::new(cap, ej, eps_l, f0 + 1e-6), 6).unwrap();
        for (a, b) in modes.iter().zip(&nudged) {
            prop_assert!((a.k - b.k).abs() <= 1e-4);
        }
    }

    #[test]
    fn propagation_conserves_and_reverses(model in resonant_model(), raw in state(243), t in 0.5f64..40.0) {
        let dim = model.layout().total_dim();
        let amps = raw[..dim].to_vec();
        prop_assume!(amps.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-6);
        let psi0 = StateVector::normalized(model.layout().clone(), amps).unwrap();
        let times = [0.0, 0.5 * t, t];
        let e0 = expectation(model.hamiltonian(), &psi0).unwrap();
        for method in [Method::Eig, Method::Krylov] {
            let prop = Propagator::new(&model, method, Tolerances::default()).unwrap();
            let out = prop.evolve_state(&psi0, &times).unwrap();
            for psi in &out {
                prop_assert!((psi.norm() - 1.0).abs() <= 1e-9);
                let e = expectation(model.hamiltonian(), psi).unwrap();
                prop_assert!((e - e0).abs() <= 1e-8 * e0.abs().max(1.0));
            }
            // H is real, so exp(iHt) psi = conj(exp(-iHt) conj(psi)).
            let conj = |s: &StateVector| {
                StateVector::normalized(s.layout().clone(), s.amplitudes().iter().map(|z| z.conj()).collect::<Vec<_>>()).unwrap()
            };
            let back = prop.evolve_state(&conj(&out[2]), &[t]).unwrap();
            let fid = conj(&back[0]).fidelity(&psi0).unwrap();
            prop_assert!(fid >= 1.0 - 1e-8, "{method}: {fid}");
        }
    }

    #[test]
    fn ensemble_matches_density_oracle(model in resonant_model(), temps in prop::collection::vec(0.0f64..2.5, 5)) {
        let modes: Vec<ModeSpec> = model
            .modes()
            .iter()
            .zip(&temps)
            .map(|(m, t)| ModeSpec::new(m.label.clone(), m.frequency, m.dim, *t))
            .collect();
        let model = build_hamiltonian(&modes, model.terms()).unwrap();
        prop_assume!(model.layout().total_dim() <= 256);
        let times = uniform_times(30.0, 7);
        let ens = product_ensemble(&modes, 0.0).unwrap();
        let a = Propagator::new(&model, Method::Auto, Tolerances::default()).unwrap().ensemble_trajectory(&ens, &times).unwrap();
        let b = density_trajectory(&model, &product_gibbs(&modes).unwrap(), &times, 256).unwrap();
        for (x, y) in a.occupations.iter().flatten().zip(b.occupations.iter().flatten()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
        for (x, y) in a.charges.iter().zip(&b.charges) {
            for (u, v) in x.values.iter().zip(&y.values) {
                prop_assert!((u - v).abs() <= 1e-9);
            }
        }
        let roles = RefrigeratorRoles::default();
        let report = refrigerator_report(&a, &modes, &roles).unwrap();
        let (tf, th, tc) = (temps[0], temps[1], temps[2]);
        prop_assert_eq!(report.regime_ok, tc <= tf && tf < th);
        prop_assert_eq!(report.regime_note.is_some(), !report.regime_ok);
    }

    #[test]
    fn scenario_round_trips(
        t in prop::collection::vec(0.0f64..3.0, 3),
        g in -0.2f64..0.2,
        dims in prop::collection::vec(2usize..6, 3),
        t_max in 0.0f64..500.0,
        n in 1usize..1000,
    ) {
        let mut s = bundled("fig2-scaled").unwrap();
        for (i, m) in s.modes.iter_mut().enumerate() {
            m.temperature = t[i];
            m.dim = dims[i];
        }
        s.coupling = casimir_core::scenario::Coupling::Direct { g, overrides: vec![] };
        s.times.t_max = t_max;
        s.times.n_points = n;
        let again = parse_scenario(&s.to_json()).unwrap();
        prop_assert_eq!(&again, &s);
        prop_assert_eq!(again.hash(), s.hash());
    }
}

#[test]
fn reruns_are_bit_identical() {
    let mut s = bundled("fig5-scaled").unwrap();
    s.times.n_points = 40;
    let a = run(&s, &RunOptions::default()).unwrap().trajectory.to_csv_string();
    let b = run(&s, &RunOptions { threads: Some(1), method: None }).unwrap().trajectory.to_csv_string();
    assert_eq!(a, b);
}
