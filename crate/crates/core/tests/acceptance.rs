//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p casimir-core --test acceptance`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use casimir_core::cavity::{self, CavityGeometry, CavityMode, Parity};
use casimir_core::dynamics::{density_trajectory, dwell_below, Method, Propagator, Tolerances, Trajectory};
use casimir_core::scenario::{bundled, convergence_check, run, uniform_ladder, RunOptions, Scenario};
use casimir_core::thermal::{gibbs_state, product_gibbs, tail_mass};
use casimir_core::{
    annihilation, bose_occupation, build_hamiltonian, creation, embed, product_ensemble, recommend_dim,
    InteractionTerm, ModeSpec, QOperator, StateVector, C64,
};
use nalgebra::DMatrix;

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    body: fn() -> Outcome,
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn run_scenario(s: &Scenario) -> Result<Trajectory, String> {
    run(s, &RunOptions::default()).map(|o| o.trajectory).map_err(err)
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn dense_ladder(d: usize) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

fn kron_embed(op: &DMatrix<C64>, mode: usize, dims: &[usize]) -> DMatrix<C64> {
    let mut out = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    for (i, &d) in dims.iter().enumerate() {
        let factor = if i == mode { op.clone() } else { DMatrix::identity(d, d) };
        out = out.kronecker(&factor);
    }
    out
}

fn operator_algebra() -> Outcome {
    let mut comm = 0.0f64;
    for d in 2..=12 {
        let a = annihilation(d).map_err(err)?;
        let c = a.commutator(&creation(d).map_err(err)?).map_err(err)?.to_dense();
        for i in 0..d {
            for j in 0..d {
                let expect = match (i == j, i == d - 1) {
                    (true, false) => 1.0,
                    (true, true) => 1.0 - d as f64,
                    _ => 0.0,
                };
                comm = comm.max((c[(i, j)] - C64::new(expect, 0.0)).norm());
            }
        }
    }
    let dims = [3usize, 2, 4];
    let layout = casimir_core::SpaceLayout::new(dims.to_vec()).map_err(err)?;
    let mut hom = 0.0f64;
    for mode in 0..dims.len() {
        let d = dims[mode];
        let a = QOperator::from_dense(casimir_core::SpaceLayout::single(d).map_err(err)?, dense_ladder(d)).map_err(err)?;
        let ad = a.adjoint();
        let product = embed(&a.checked_mul(&ad).map_err(err)?, mode, &layout).map_err(err)?;
        let composed = embed(&a, mode, &layout)
            .map_err(err)?
            .checked_mul(&embed(&ad, mode, &layout).map_err(err)?)
            .map_err(err)?;
        let reference = kron_embed(&dense_ladder(d), mode, &dims);
        hom = hom.max((product.to_dense() - composed.to_dense()).camax());
        hom = hom.max((embed(&a, mode, &layout).map_err(err)?.to_dense() - reference).camax());
    }
    let mut herm = 0.0f64;
    let mut built = 0;
    for name in ["fig2-scaled", "fig3-scaled", "fig4-scaled", "fig5-scaled", "fig6-scaled"] {
        let model = bundled(name).map_err(err)?.build_model().map_err(err)?;
        let h = model.hamiltonian().to_csr();
        let mut dev = 0.0f64;
        for (r, c, v) in h.triplet_iter() {
            dev = dev.max((v - model.hamiltonian().get(c, r).conj()).norm());
        }
        herm = herm.max(dev);
        built += 1;
    }
    ensure(
        comm <= 1e-12 && hom <= 1e-12 && herm <= 1e-12,
        format!("commutator {comm:.1e}, embed {hom:.1e}, |H - H^dagger| {herm:.1e} over {built} models"),
    )
}

fn conservation() -> Outcome {
    let s = bundled("fig2-scaled").map_err(err)?;
    let dims: Vec<usize> = s.modes.iter().map(|m| m.dim).collect();
    if dims != [12, 12, 12] || s.times.t_max != 200.0 {
        return Err(format!("unexpected scenario setup {dims:?}, t_max {}", s.times.t_max));
    }
    let traj = run_scenario(&s)?;
    let n0 = traj.norm[0];
    let norm = traj.norm.iter().map(|n| (n - n0).abs()).fold(0.0, f64::max);
    let rel = |v: &[f64]| {
        let scale = v[0].abs().max(1.0);
        v.iter().map(|x| (x - v[0]).abs() / scale).fold(0.0, f64::max)
    };
    let energy = rel(&traj.total_energy);
    // Charges rebuilt from occupations independently of the library's charge list.
    let n = &traj.occupations;
    let q: Vec<f64> = (0..traj.times.len()).map(|t| 2.0 * n[0][t] + n[1][t] + n[2][t]).collect();
    let d: Vec<f64> = (0..traj.times.len()).map(|t| n[1][t] - n[2][t]).collect();
    let charges = rel(&q).max(rel(&d));
    ensure(
        norm <= 1e-9 && energy <= 1e-8 && charges <= 1e-8,
        format!("total_dim 1728, norm {norm:.1e}, energy {energy:.1e}, Q/D {charges:.1e}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let times = casimir_core::dynamics::uniform_times(60.0, 61);
    let three = vec![
        ModeSpec::new("f", 3.0, 3, 1.3),
        ModeSpec::new("c1", 1.0, 3, 2.0),
        ModeSpec::new("c2", 2.0, 3, 1.3),
    ];
    let five = vec![
        ModeSpec::new("f", 3.0, 2, 1.3),
        ModeSpec::new("c1", 1.0, 2, 2.0),
        ModeSpec::new("c2", 2.0, 2, 1.3),
        ModeSpec::new("c3", 1.8, 2, 0.8),
        ModeSpec::new("c4", 1.2, 2, 0.8),
    ];
    let cases = [
        (three, vec![InteractionTerm::new(1, 2, 0.05)]),
        (five, vec![InteractionTerm::new(1, 2, 0.05), InteractionTerm::new(3, 4, 0.07)]),
    ];
    let mut worst = 0.0f64;
    for (modes, terms) in &cases {
        let model = build_hamiltonian(modes, terms).map_err(err)?;
        let ens = product_ensemble(modes, 0.0).map_err(err)?;
        let a = Propagator::new(&model, Method::Auto, Tolerances::default())
            .map_err(err)?
            .ensemble_trajectory(&ens, &times)
            .map_err(err)?;
        let b = density_trajectory(&model, &product_gibbs(modes).map_err(err)?, &times, 4096).map_err(err)?;
        let pairs = a
            .occupations
            .iter()
            .chain(&a.energies)
            .chain(a.charges.iter().map(|c| &c.values))
            .chain([&a.total_energy, &a.norm])
            .zip(
                b.occupations
                    .iter()
                    .chain(&b.energies)
                    .chain(b.charges.iter().map(|c| &c.values))
                    .chain([&b.total_energy, &b.norm]),
            );
        for (x, y) in pairs {
            for (u, v) in x.iter().zip(y) {
                worst = worst.max((u - v).abs());
            }
        }
    }
    ensure(worst <= 1e-9, format!("dims (3,3,3) and (2,2,2,2,2), max |ensemble - density| {worst:.1e}"))
}

fn two_level_sector() -> Outcome {
    let g = 0.05;
    let modes = vec![
        ModeSpec::new("f", 3.0, 2, 0.0),
        ModeSpec::new("c1", 1.0, 2, 0.0),
        ModeSpec::new("c2", 2.0, 2, 0.0),
    ];
    let model = build_hamiltonian(&modes, &[InteractionTerm::new(1, 2, g)]).map_err(err)?;
    // Sector {|0,1,1>, |1,0,0>}: [[3, -g], [-g, 3]] has eigenvalues 3 -+ g, so
    // full transfer happens at t = pi / (2 g).
    let t_half = PI / (2.0 * g);
    let layout = model.layout().clone();
    let psi0 = StateVector::basis(layout.clone(), &[0, 1, 1]).map_err(err)?;
    let out = Propagator::new(&model, Method::Eig, Tolerances::default())
        .map_err(err)?
        .evolve_state(&psi0, &[0.0, t_half / 2.0, t_half])
        .map_err(err)?;
    let target = StateVector::basis(layout, &[1, 0, 0]).map_err(err)?;
    let fid = out[2].fidelity(&target).map_err(err)?;
    let mid = out[1].fidelity(&target).map_err(err)?;
    ensure(
        fid >= 1.0 - 1e-8 && (mid - 0.5).abs() < 1e-8,
        format!("fidelity {fid:.12} at t = {t_half:.6}, {mid:.9} at half time"),
    )
}

fn refrigeration() -> Outcome {
    let s = bundled("fig2-scaled").map_err(err)?;
    let t: Vec<f64> = s.modes.iter().map(|m| m.temperature).collect();
    if !(t[2] <= t[0] && t[0] < t[1]) {
        return Err(format!("temperatures {t:?} outside the refrigerator regime"));
    }
    let traj = run_scenario(&s)?;
    let e2 = traj.energy_of("c2").ok_or("no c2")?;
    let ef = traj.energy_of("f").ok_or("no f")?;
    let drop = (e2[0] - min_of(e2)) / e2[0];
    let rise = (max_of(ef) - ef[0]) / ef[0];
    ensure(
        drop >= 0.01 && rise >= 0.01,
        format!("E_2 drops {:.2}% (min {:.6} vs {:.6}), E_f rises {:.2}%", drop * 100.0, min_of(e2), e2[0], rise * 100.0),
    )
}

/// Two-mode baseline truncated like the first three modes of `four`, with the same ensemble cut.
fn baseline_for(four: &Scenario) -> Result<Scenario, String> {
    let mut base = bundled("fig2-scaled").map_err(err)?;
    for (b, f) in base.modes.iter_mut().zip(&four.modes) {
        if b.label != f.label || b.frequency != f.frequency || b.temperature != f.temperature {
            return Err(format!("baseline mode {} differs from {}", b.label, f.label));
        }
        b.dim = f.dim;
    }
    base.engine = four.engine;
    base.times = four.times;
    base.validate().map_err(err)?;
    Ok(base)
}

fn cold_minimum(s: &Scenario) -> Result<(f64, Vec<f64>, Vec<f64>), String> {
    let traj = run_scenario(s)?;
    let e2 = traj.energy_of("c2").ok_or("no c2")?.to_vec();
    Ok((min_of(&e2), traj.times.clone(), e2))
}

fn degraded_cooling() -> Outcome {
    let four = bundled("fig3-scaled").map_err(err)?;
    let (t3, tf) = (four.modes[3].temperature, four.modes[0].temperature);
    if !(t3 > tf && four.modes[4].temperature == t3) {
        return Err(format!("expected T_3 = T_4 > T_f, got {t3} vs {tf}"));
    }
    let (base_min, _, _) = cold_minimum(&baseline_for(&four)?)?;
    let (four_min, _, _) = cold_minimum(&four)?;
    ensure(
        four_min > base_min,
        format!("T_3 = T_4 = {t3}: min E_2 {four_min:.6} vs two-mode {base_min:.6}"),
    )
}

fn enhanced_cooling() -> Outcome {
    let four = bundled("fig5-scaled").map_err(err)?;
    let m = &four.modes;
    if !(m[3].temperature == m[0].temperature && m[4].temperature == m[0].temperature && m[2].temperature == m[0].temperature) {
        return Err("expected T_3 = T_4 = T_f = T_2".into());
    }
    let (base_min, bt, be) = cold_minimum(&baseline_for(&four)?)?;
    let (four_min, ft, fe) = cold_minimum(&four)?;
    let base_dwell = dwell_below(&bt, &be, base_min);
    let four_dwell = dwell_below(&ft, &fe, base_min);
    ensure(
        four_min < base_min && four_dwell > base_dwell,
        format!(
            "min E_2 {four_min:.6} vs two-mode {base_min:.6}; time below the two-mode minimum {four_dwell:.3} vs {base_dwell:.3}"
        ),
    )
}

fn monotone_sweep() -> Outcome {
    let template = bundled("fig6-scaled").map_err(err)?;
    let spec = template.sweep.clone().ok_or("fig6-scaled has no sweep block")?;
    let mut minima = Vec::new();
    for &temp in &spec.values {
        let mut s = template.clone();
        s.modes[3].temperature = temp;
        s.modes[4].temperature = temp;
        minima.push(cold_minimum(&s)?.0);
    }
    let descending = spec.values.windows(2).all(|w| w[1] < w[0]);
    let slack = 1e-9 * minima[0].abs();
    let monotone = minima.windows(2).all(|w| w[1] <= w[0] + slack);
    let listing: Vec<String> = spec.values.iter().zip(&minima).map(|(t, m)| format!("T={t}: {m:.6}")).collect();
    ensure(descending && monotone, format!("min E_2 along ladder: {}", listing.join(", ")))
}

/// Closed-form `int psi_a psi_b dx + 2 c_J psi_a(0) psi_b(0)` on `[-1/2, 1/2]`.
fn exact_inner(a: &CavityMode, b: &CavityMode, cap_ratio: f64) -> f64 {
    let sinc_half = |q: f64| if q.abs() < 1e-12 { 0.5 } else { (0.5 * q).sin() / q };
    let (ka, kb) = (a.k, b.k);
    match (a.parity, b.parity) {
        (Parity::Symmetric, Parity::Symmetric) => {
            let smooth = sinc_half(ka - kb) + sinc_half(ka + kb);
            let at0 = (0.5 * ka).cos() * (0.5 * kb).cos();
            a.amplitude * b.amplitude * (smooth + 2.0 * cap_ratio * at0)
        }
        (Parity::Antisymmetric, Parity::Antisymmetric) => a.amplitude * b.amplitude * (sinc_half(ka - kb) - sinc_half(ka + kb)),
        _ => 0.0,
    }
}

fn cavity_solver() -> Outcome {
    let free = CavityGeometry::new(0.0, 1.0, 0.5, PI / 2.0);
    let modes = cavity::solve_modes(&free, 10).map_err(err)?;
    let spectrum = modes.iter().map(|m| (m.k - m.index as f64 * PI).abs()).fold(0.0, f64::max);

    let mut mirror_errors = Vec::new();
    for e_j in [1e3, 1e5, 1e7] {
        let g = CavityGeometry::new(0.0, e_j, 0.0, 0.0);
        let modes = cavity::solve_modes(&g, 6).map_err(err)?;
        let worst = modes
            .iter()
            .filter(|m| m.parity == Parity::Symmetric)
            .map(|m| {
                let odd = 2.0 * ((m.k / PI - 1.0) / 2.0).round() + 1.0;
                (m.k - odd * PI).abs()
            })
            .fold(0.0, f64::max);
        mirror_errors.push(worst);
    }
    let mirror_ok = mirror_errors.windows(2).all(|w| w[1] < w[0]) && mirror_errors[2] < 1e-5;

    let geometry = CavityGeometry::new(0.05, 3.0, 0.2, 0.4);
    let modes = cavity::solve_modes(&geometry, 8).map_err(err)?;
    let mut gram = 0.0f64;
    for a in &modes {
        for b in &modes {
            let expect = if a.index == b.index { 1.0 } else { 0.0 };
            gram = gram.max((exact_inner(a, b, geometry.cap_ratio) - expect).abs());
        }
    }

    let reference = CavityGeometry::new(0.01, 50.0, 0.0, 0.4);
    let modes = cavity::solve_modes(&reference, 6).map_err(err)?;
    let coarse = cavity::coupling_matrix(&modes, &reference, 1e-6).map_err(err)?;
    let fine = cavity::coupling_matrix(&modes, &reference, 5e-7).map_err(err)?;
    let mut richardson = 0.0f64;
    let mut compared = 0;
    for (a, b) in coarse.entries.iter().zip(fine.entries.iter()) {
        let scale = a.abs().max(b.abs());
        if scale > 1e-9 {
            richardson = richardson.max((a - b).abs() / scale);
            compared += 1;
        }
    }
    ensure(
        spectrum <= 1e-10 && mirror_ok && gram <= 1e-8 && richardson <= 1e-6 && compared > 0,
        format!(
            "k_n - n pi {spectrum:.1e}; mirror limit errors {:.1e} -> {:.1e} -> {:.1e}; Gram {gram:.1e}; step halving {richardson:.1e} over {compared} entries",
            mirror_errors[0], mirror_errors[1], mirror_errors[2]
        ),
    )
}

fn thermal_suite() -> Outcome {
    let mut worst = 0.0f64;
    for (omega, t, eps) in [(1.0, 2.0, 1e-3), (2.0, 1.3, 1e-6), (3.0, 65.0, 1e-4), (1.0, 100.0, 1e-2), (1.8, 0.02, 1e-9)] {
        let dim = recommend_dim(omega, t, eps).map_err(err)?;
        let tail = tail_mass(omega, t, dim);
        if tail > eps {
            return Err(format!("recommend_dim({omega}, {t}, {eps}) = {dim} leaves tail {tail:.2e}"));
        }
        // Truncating a geometric distribution at d levels lowers its mean by d q^d / (1 - q^d).
        let q = (-omega / t).exp();
        let exact_mean = q / (1.0 - q);
        let bound = dim as f64 * tail / (1.0 - tail);
        let mean = gibbs_state(omega, t, dim).map_err(err)?.mean_occupation();
        if (bose_occupation(omega, t) - exact_mean).abs() > 1e-9 * exact_mean.max(1.0) {
            return Err(format!("bose_occupation({omega}, {t}) disagrees with q/(1-q)"));
        }
        worst = worst.max((mean - exact_mean).abs() - bound);
    }
    let mut zero_exact = true;
    for d in 2..6 {
        let g = gibbs_state(2.0, 0.0, d).map_err(err)?;
        zero_exact &= g.populations[0] == 1.0 && g.populations[1..].iter().all(|p| *p == 0.0);
        zero_exact &= g.mean_occupation() == 0.0 && bose_occupation(2.0, 0.0) == 0.0;
    }
    ensure(
        worst <= 1e-12 && zero_exact,
        format!("|n_trunc - n_bose| within d q^d/(1-q^d) (excess {worst:.1e}); T = 0 vacuum exact: {zero_exact}"),
    )
}

fn truncation_convergence() -> Outcome {
    let s = bundled("fig2-scaled").map_err(err)?;
    let ladder = uniform_ladder(3, &[8, 12, 16]);
    let table = convergence_check(&s, &ladder, 0.01, &RunOptions::default()).map_err(err)?;
    let deltas: Vec<f64> = table.rungs.iter().filter_map(|r| r.delta_to_next).collect();
    let top = table.rungs.last().ok_or("empty ladder")?.initial_cold_energy;
    let last = *deltas.last().ok_or("no deltas")?;
    ensure(
        last <= 0.01 * top,
        format!(
            "max_t |dE_2|: 8->12 {:.2e}, 12->16 {:.2e}; 1% of E_2(0) = {:.2e}",
            deltas[0],
            last,
            0.01 * top
        ),
    )
}

const CRITERIA: &[Criterion] = &[
    Criterion { name: "operator algebra", limit: Some(Duration::from_secs(1)), body: operator_algebra },
    Criterion { name: "conservation", limit: Some(Duration::from_secs(30)), body: conservation },
    Criterion { name: "oracle equivalence", limit: Some(Duration::from_secs(10)), body: oracle_equivalence },
    Criterion { name: "two-level sector", limit: None, body: two_level_sector },
    Criterion { name: "refrigeration", limit: Some(Duration::from_secs(60)), body: refrigeration },
    Criterion { name: "degraded cooling", limit: None, body: degraded_cooling },
    Criterion { name: "enhanced cooling", limit: None, body: enhanced_cooling },
    Criterion { name: "monotone sweep", limit: None, body: monotone_sweep },
    Criterion { name: "cavity solver", limit: Some(Duration::from_secs(5)), body: cavity_solver },
    Criterion { name: "thermal suite", limit: None, body: thermal_suite },
    Criterion { name: "truncation convergence", limit: None, body: truncation_convergence },
];

fn main() -> ExitCode {
    let mut failures = 0;
    for c in CRITERIA {
        let start = Instant::now();
        let outcome = (c.body)();
        let elapsed = start.elapsed();
        let over = c.limit.filter(|l| elapsed > *l);
        let (passed, detail) = match (outcome, over) {
            (Ok(d), None) => (true, d),
            (Ok(d), Some(l)) => (false, format!("{d}; took longer than {l:?}")),
            (Err(d), _) => (false, d),
        };
        failures += usize::from(!passed);
        println!(
            "{} {:<24} [{:>7.2}s] {}",
            if passed { "PASS" } else { "FAIL" },
            c.name,
            elapsed.as_secs_f64(),
            detail
        );
    }
    println!("acceptance: {} of {} criteria passed", CRITERIA.len() - failures, CRITERIA.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
