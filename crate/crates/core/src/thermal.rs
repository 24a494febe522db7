//! Thermal occupations, truncated Gibbs states and the Fock-product ensemble.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, SpaceLayout};
use crate::model::ModeSpec;

pub const DEFAULT_MEMBER_CAP: usize = 1_000_000;

/// Mean occupation `1 / (exp(omega/T) - 1)`; zero at `T = 0`.
pub fn bose_occupation(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (omega / temperature).exp_m1()
}

/// Truncated, renormalized level populations `p_n ~ exp(-omega n / T)`.
pub fn thermal_populations(omega: f64, temperature: f64, dim: usize) -> Result<Vec<f64>> {
    check_inputs(omega, temperature, dim)?;
    let mut p = vec![0.0; dim];
    if temperature == 0.0 {
        p[0] = 1.0;
        return Ok(p);
    }
    let beta = omega / temperature;
    for (n, v) in p.iter_mut().enumerate() {
        *v = (-beta * n as f64).exp();
    }
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= z);
    Ok(p)
}

fn check_inputs(omega: f64, temperature: f64, dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim });
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!("frequency must be > 0, got {omega}")));
    }
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be finite and >= 0, got {temperature}"
        )));
    }
    Ok(())
}

/// Untruncated Boltzmann weight beyond the cutoff, `exp(-omega dim / T)`.
pub fn tail_mass(omega: f64, temperature: f64, dim: usize) -> f64 {
    if temperature <= 0.0 {
        0.0
    } else {
        (-omega * dim as f64 / temperature).exp()
    }
}

#[derive(Debug, Clone)]
pub struct GibbsState {
    pub populations: Vec<f64>,
    pub tail_mass: f64,
    density: DensityMatrix,
}

impl GibbsState {
    pub fn density(&self) -> &DensityMatrix {
        &self.density
    }

    pub fn into_density(self) -> DensityMatrix {
        self.density
    }

    pub fn mean_occupation(&self) -> f64 {
        self.populations.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }
}

pub fn gibbs_state(omega: f64, temperature: f64, dim: usize) -> Result<GibbsState> {
    let populations = thermal_populations(omega, temperature, dim)?;
    let density = DensityMatrix::from_diagonal(SpaceLayout::single(dim)?, &populations)?;
    Ok(GibbsState {
        tail_mass: tail_mass(omega, temperature, dim),
        populations,
        density,
    })
}

/// Product of single-mode Gibbs states in layout order.
pub fn product_gibbs(modes: &[ModeSpec]) -> Result<DensityMatrix> {
    let factors = modes
        .iter()
        .map(|m| gibbs_state(m.frequency, m.temperature, m.dim).map(GibbsState::into_density))
        .collect::<Result<Vec<_>>>()?;
    DensityMatrix::product(&factors)
}

/// Smallest `dim >= 2` with `exp(-omega dim / T) <= epsilon`.
pub fn recommend_dim(omega: f64, temperature: f64, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be in (0, 1), got {epsilon}")));
    }
    check_inputs(omega, temperature, 2)?;
    if temperature == 0.0 {
        return Ok(2);
    }
    let mut dim = ((temperature * (1.0 / epsilon).ln() / omega).ceil() as usize).max(2);
    // Guard the closed form against rounding at exact boundaries.
    while dim > 2 && tail_mass(omega, temperature, dim - 1) <= epsilon {
        dim -= 1;
    }
    while tail_mass(omega, temperature, dim) > epsilon {
        dim += 1;
    }
    Ok(dim)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMember {
    pub occupations: Vec<usize>,
    pub index: usize,
    pub weight: f64,
}

/// Fock product states with Gibbs weights, heaviest first.
#[derive(Debug, Clone)]
pub struct ThermalEnsemble {
    layout: SpaceLayout,
    members: Vec<EnsembleMember>,
    discarded_mass: f64,
    epsilon_tail: f64,
}

impl ThermalEnsemble {
    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn discarded_mass(&self) -> f64 {
        self.discarded_mass
    }

    pub fn epsilon_tail(&self) -> f64 {
        self.epsilon_tail
    }

    pub fn total_weight(&self) -> f64 {
        self.members.iter().map(|m| m.weight).sum()
    }

    /// `sum_k p_k O[k, k]` for a Fock-diagonal observable.
    pub fn diagonal_expectation(&self, diagonal: &[f64]) -> f64 {
        self.members.iter().map(|m| m.weight * diagonal[m.index]).sum()
    }

    /// Dense diagonal density matrix of the retained members (unnormalized by the tail).
    pub fn to_density_populations(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.layout.total_dim()];
        for m in &self.members {
            p[m.index] = m.weight;
        }
        p
    }
}

#[derive(Debug, PartialEq)]
struct Candidate {
    weight: f64,
    occupations: Vec<usize>,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap on weight; equal weights pop lexicographically smallest first.
        self.weight
            .total_cmp(&other.weight)
            .then_with(|| other.occupations.cmp(&self.occupations))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn product_ensemble(modes: &[ModeSpec], epsilon_tail: f64) -> Result<ThermalEnsemble> {
    product_ensemble_with(modes, epsilon_tail, DEFAULT_MEMBER_CAP)
}

/// Best-first enumeration of product Fock states until the retained weight
/// reaches `1 - epsilon_tail`.
pub fn product_ensemble_with(
    modes: &[ModeSpec],
    epsilon_tail: f64,
    member_cap: usize,
) -> Result<ThermalEnsemble> {
    if !(0.0..1.0).contains(&epsilon_tail) {
        return Err(Error::InvalidArgument(format!(
            "epsilon_tail must be in [0, 1), got {epsilon_tail}"
        )));
    }
    if modes.is_empty() {
        return Err(Error::InvalidArgument("ensemble needs at least one mode".into()));
    }
    let layout = SpaceLayout::new(modes.iter().map(|m| m.dim).collect::<Vec<_>>())?;
    let pops = modes
        .iter()
        .map(|m| thermal_populations(m.frequency, m.temperature, m.dim))
        .collect::<Result<Vec<_>>>()?;
    let weight_of = |occ: &[usize]| occ.iter().zip(&pops).map(|(&n, p)| p[n]).product::<f64>();

    // Each tuple has the unique parent obtained by decrementing its last
    // nonzero entry, so children only increment at or after that position.
    // Populations decrease with n, so children never outweigh parents.
    let mut heap = BinaryHeap::new();
    let start = vec![0usize; modes.len()];
    heap.push(Candidate {
        weight: weight_of(&start),
        occupations: start,
    });
    let mut members = Vec::new();
    let mut retained = 0.0;
    let target = 1.0 - epsilon_tail;
    loop {
        if epsilon_tail > 0.0 && retained >= target {
            break;
        }
        let Some(c) = heap.pop() else { break };
        if c.weight <= 0.0 {
            continue;
        }
        if members.len() == member_cap {
            return Err(Error::EnsembleTooLarge { cap: member_cap });
        }
        let first = c.occupations.iter().rposition(|&n| n > 0).unwrap_or(0);
        for j in first..modes.len() {
            if c.occupations[j] + 1 < modes[j].dim {
                let mut occ = c.occupations.clone();
                occ[j] += 1;
                let w = weight_of(&occ);
                if w > 0.0 {
                    heap.push(Candidate { weight: w, occupations: occ });
                }
            }
        }
        retained += c.weight;
        members.push(EnsembleMember {
            index: layout.index_of(&c.occupations)?,
            occupations: c.occupations,
            weight: c.weight,
        });
    }
    let discarded_mass = if heap.is_empty() {
        0.0
    } else {
        (1.0 - retained).max(0.0)
    };
    Ok(ThermalEnsemble {
        layout,
        members,
        discarded_mass,
        epsilon_tail,
    })
}
