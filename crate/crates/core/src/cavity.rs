//! Electrodynamics of a transmission-line cavity interrupted by a SQUID.
//!
//! Everything here is dimensionless with cavity half-length d = 1 and
//! propagation velocity v = 1, so `k` doubles as `k d` and `omega = k`.
//! The cavity spans `x in [-1/2, 1/2]` with the SQUID at `x = 0`.
//!
//! Antisymmetric modes `psi = A sin(k x)` never see the SQUID and sit at
//! `k = (2m + 1) pi`. Symmetric modes use `psi = A cos(k (|x| - 1/2))`, which
//! satisfies the Neumann ends by construction; the current jump at the SQUID
//! gives
//!
//! ```text
//! 2 k sin(k/2) - chi(k) cos(k/2) = 0,   chi(k) = 2 (-c_J k^2 + e_J cos f0)
//! ```
//!
//! Modes are orthonormal under `<a, b> = int a b dx + 2 c_J a(0) b(0)`, where the
//! point term comes from the SQUID capacitance and is always added analytically.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::{bisect, scan_brackets};

/// Uniform quadrature points per half-interval (split at the SQUID).
pub const QUADRATURE_POINTS: usize = 2001;
pub const DEFAULT_DF_STEP: f64 = 1e-6;
/// Scan resolution for the symmetric root equation.
pub const SAMPLES_PER_PI: usize = 40;
/// Roots at or below this wavenumber belong to the uniform (zero-frequency)
/// flux mode that exists only as `chi(0) -> 0` and are not cavity modes.
pub const ZERO_MODE_CUTOFF: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalFlux {
    /// M / L_ext.
    pub mutual_ratio: f64,
    /// F_ext in radians.
    pub flux: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityGeometry {
    /// c_J = C_J / (C_0 d).
    pub cap_ratio: f64,
    /// e_J = E_J d / ((hbar/2e)^2 C_0 v^2).
    pub josephson_strength: f64,
    /// eps_L = (hbar/2e)^2 2 / (L E_J).
    pub inductive_ratio: f64,
    /// f_0 in radians.
    pub flux_bias: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external: Option<ExternalFlux>,
}

impl CavityGeometry {
    pub fn new(cap_ratio: f64, josephson_strength: f64, inductive_ratio: f64, flux_bias: f64) -> Self {
        Self {
            cap_ratio,
            josephson_strength,
            inductive_ratio,
            flux_bias,
            external: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.cap_ratio,
            self.josephson_strength,
            self.inductive_ratio,
            self.flux_bias,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("geometry parameters must be finite".into()));
        }
        if self.cap_ratio < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "cap_ratio must be >= 0, got {}",
                self.cap_ratio
            )));
        }
        if self.josephson_strength <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "josephson_strength must be > 0, got {}",
                self.josephson_strength
            )));
        }
        if self.inductive_ratio < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "inductive_ratio must be >= 0, got {}",
                self.inductive_ratio
            )));
        }
        let stiffness = self.flux_bias.cos() + self.inductive_ratio;
        if stiffness <= 0.0 {
            return Err(Error::UnstableFluxPoint { value: stiffness });
        }
        Ok(())
    }

    fn chi(&self, k: f64, flux: f64) -> f64 {
        2.0 * (-self.cap_ratio * k * k + self.josephson_strength * flux.cos())
    }

    /// Left-hand side of the symmetric root equation at flux `flux`.
    pub fn root_function(&self, k: f64, flux: f64) -> f64 {
        let half = 0.5 * k;
        2.0 * k * half.sin() - self.chi(k, flux) * half.cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Symmetric,
    Antisymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityMode {
    /// 1-based position in the merged spectrum.
    pub index: usize,
    /// Position within its parity branch (0-based).
    pub branch: usize,
    pub k: f64,
    pub omega: f64,
    pub parity: Parity,
    pub amplitude: f64,
    pub dk_df: f64,
    #[serde(skip)]
    cap_ratio: f64,
}

impl CavityMode {
    pub fn value(&self, x: f64) -> f64 {
        match self.parity {
            Parity::Symmetric => self.amplitude * (self.k * (x.abs() - 0.5)).cos(),
            Parity::Antisymmetric => self.amplitude * (self.k * x).sin(),
        }
    }

    /// `dpsi/dx`; at `x = 0` the right-sided derivative.
    pub fn slope(&self, x: f64) -> f64 {
        match self.parity {
            Parity::Symmetric => {
                let s = if x < 0.0 { -1.0 } else { 1.0 };
                -s * self.amplitude * self.k * (self.k * (x.abs() - 0.5)).sin()
            }
            Parity::Antisymmetric => self.amplitude * self.k * (self.k * x).cos(),
        }
    }

    /// `dpsi/dk` at fixed `x`, including the k-dependence of the normalization.
    pub fn dk_value(&self, x: f64) -> f64 {
        match self.parity {
            Parity::Antisymmetric => {
                // Normalization is k-independent on the antisymmetric branch.
                self.amplitude * x * (self.k * x).cos()
            }
            Parity::Symmetric => {
                let k = self.k;
                let u = x.abs() - 0.5;
                let norm = symmetric_norm_sq(k, self.cap_ratio);
                let dnorm = (k * k.cos() - k.sin()) / (2.0 * k * k) - self.cap_ratio * k.sin();
                let damp = -0.5 * self.amplitude * dnorm / norm;
                damp * (k * u).cos() - self.amplitude * u * (k * u).sin()
            }
        }
    }

    /// Residual of the defining root equation (zero by construction when antisymmetric).
    pub fn residual(&self, geometry: &CavityGeometry) -> f64 {
        match self.parity {
            Parity::Symmetric => geometry.root_function(self.k, geometry.flux_bias),
            Parity::Antisymmetric => (0.5 * self.k).cos(),
        }
    }
}

/// `int cos^2(k(|x| - 1/2)) dx + 2 c_J cos^2(k/2)`.
fn symmetric_norm_sq(k: f64, cap_ratio: f64) -> f64 {
    0.5 + k.sin() / (2.0 * k) + 2.0 * cap_ratio * (0.5 * k).cos().powi(2)
}

fn scan_window(n_modes: usize) -> (f64, usize) {
    let window = (n_modes as f64 + 4.0) * PI;
    (window, SAMPLES_PER_PI * (n_modes + 4))
}

/// Symmetric-branch wavenumbers in `(0, window]` at flux `flux`.
fn symmetric_roots(geometry: &CavityGeometry, flux: f64, n_modes: usize) -> Result<Vec<f64>> {
    let (window, samples) = scan_window(n_modes);
    let f = |k: f64| geometry.root_function(k, flux);
    let roots = scan_brackets(f, 0.0, window, samples)
        .into_iter()
        .map(|(a, b)| if a == b { Ok(a) } else { bisect(f, a, b) })
        .collect::<Result<Vec<_>>>()?;
    Ok(roots.into_iter().filter(|&k| k > ZERO_MODE_CUTOFF).collect())
}

/// The `n_modes` lowest modes, merged over both parities and sorted by `k`.
pub fn solve_modes(geometry: &CavityGeometry, n_modes: usize) -> Result<Vec<CavityMode>> {
    solve_modes_with(geometry, n_modes, DEFAULT_DF_STEP)
}

pub fn solve_modes_with(
    geometry: &CavityGeometry,
    n_modes: usize,
    df_step: f64,
) -> Result<Vec<CavityMode>> {
    geometry.validate()?;
    if n_modes == 0 {
        return Err(Error::InvalidArgument("n_modes must be >= 1".into()));
    }
    let (window, samples) = scan_window(n_modes);
    let symmetric = symmetric_roots(geometry, geometry.flux_bias, n_modes)?;

    let mut candidates: Vec<(f64, Parity, usize)> = symmetric
        .iter()
        .enumerate()
        .map(|(b, &k)| (k, Parity::Symmetric, b))
        .collect();
    let mut m = 0;
    loop {
        let k = (2 * m + 1) as f64 * PI;
        if k > window {
            break;
        }
        candidates.push((k, Parity::Antisymmetric, m));
        m += 1;
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1 as u8).cmp(&(b.1 as u8))));
    if candidates.len() < n_modes {
        return Err(Error::InsufficientScan {
            requested: n_modes,
            found: candidates.len(),
            window,
            samples,
        });
    }
    candidates.truncate(n_modes);

    candidates
        .into_iter()
        .enumerate()
        .map(|(i, (k, parity, branch))| {
            let (amplitude, dk_df) = match parity {
                Parity::Antisymmetric => (2f64.sqrt(), 0.0),
                Parity::Symmetric => {
                    let sign = if (0.5 * k).cos() >= 0.0 { 1.0 } else { -1.0 };
                    let amp = sign / symmetric_norm_sq(k, geometry.cap_ratio).sqrt();
                    let dk = symmetric_dk_df(geometry, &symmetric, branch, df_step, n_modes)?;
                    (amp, dk)
                }
            };
            Ok(CavityMode {
                index: i + 1,
                branch,
                k,
                omega: k,
                parity,
                amplitude,
                dk_df,
                cap_ratio: geometry.cap_ratio,
            })
        })
        .collect()
}

/// Centered difference of the symmetric root `branch` with respect to the flux.
fn symmetric_dk_df(
    geometry: &CavityGeometry,
    roots_at_f0: &[f64],
    branch: usize,
    step: f64,
    n_modes: usize,
) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("df_step must be > 0, got {step}")));
    }
    let k0 = roots_at_f0[branch];
    let mut gap = f64::INFINITY;
    if branch > 0 {
        gap = gap.min(k0 - roots_at_f0[branch - 1]);
    }
    if branch + 1 < roots_at_f0.len() {
        gap = gap.min(roots_at_f0[branch + 1] - k0);
    }
    if branch == 0 {
        gap = gap.min(k0);
    }
    // Match by proximity so a root entering near k = 0 does not relabel the branch.
    let track = |flux: f64| -> Result<f64> {
        let roots = symmetric_roots(geometry, flux, n_modes)?;
        let k = roots
            .iter()
            .copied()
            .min_by(|a, b| (a - k0).abs().total_cmp(&(b - k0).abs()))
            .ok_or_else(|| Error::BranchCrossing {
                index: branch,
                step,
                detail: format!("no symmetric roots at f = {flux}"),
            })?;
        if (k - k0).abs() > 0.25 * gap {
            return Err(Error::BranchCrossing {
                index: branch,
                step,
                detail: format!("root moved from {k0} to {k} (neighbour gap {gap})"),
            });
        }
        Ok(k)
    };
    let f0 = geometry.flux_bias;
    let plus = track(f0 + step)?;
    let minus = track(f0 - step)?;
    Ok((plus - minus) / (2.0 * step))
}

/// Composite Simpson rule for `int g dx` over `[-1/2, 0]` and `[0, 1/2]`.
pub fn split_simpson(g: impl Fn(f64) -> f64, points: usize) -> f64 {
    let intervals = if (points - 1) % 2 == 0 { points - 1 } else { points };
    let h = 0.5 / intervals as f64;
    let half = |sign: f64| -> f64 {
        // Evaluate at 0^+ / 0^- so one-sided branches are respected.
        let at = |i: usize| {
            if i == 0 {
                g(sign * 0.0)
            } else {
                g(sign * h * i as f64)
            }
        };
        let mut acc = at(0) + at(intervals);
        for i in 1..intervals {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * at(i);
        }
        acc * h / 3.0
    };
    half(-1.0) + half(1.0)
}

/// `int a b dx + 2 c_J a(0) b(0)` with the smooth part by quadrature.
pub fn weighted_inner_product(a: &CavityMode, b: &CavityMode, geometry: &CavityGeometry) -> f64 {
    weighted_inner_product_with(|x| a.value(x), |x| b.value(x), geometry.cap_ratio, QUADRATURE_POINTS)
}

pub fn weighted_inner_product_with(
    a: impl Fn(f64) -> f64,
    b: impl Fn(f64) -> f64,
    cap_ratio: f64,
    points: usize,
) -> f64 {
    split_simpson(|x| a(x) * b(x), points) + 2.0 * cap_ratio * a(0.0) * b(0.0)
}

pub fn gram_matrix(modes: &[CavityMode], geometry: &CavityGeometry) -> DMatrix<f64> {
    let n = modes.len();
    DMatrix::from_fn(n, n, |i, j| weighted_inner_product(&modes[i], &modes[j], geometry))
}

/// `max |G - I|`.
pub fn gram_residual(modes: &[CavityMode], geometry: &CavityGeometry) -> f64 {
    let g = gram_matrix(modes, geometry);
    let n = modes.len();
    (g - DMatrix::<f64>::identity(n, n)).amax()
}

/// `M[n][m] = dk_n/df * <psi_m, dpsi_n/dk>` over the given modes.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    pub indices: Vec<usize>,
    pub entries: DMatrix<f64>,
}

impl CouplingMatrix {
    /// Entry for the 1-based mode indices `(n, m)`, `n` differentiated.
    pub fn get(&self, n: usize, m: usize) -> Option<f64> {
        let i = self.indices.iter().position(|&x| x == n)?;
        let j = self.indices.iter().position(|&x| x == m)?;
        Some(self.entries[(i, j)])
    }
}

pub fn coupling_matrix(
    modes: &[CavityMode],
    geometry: &CavityGeometry,
    df_step: f64,
) -> Result<CouplingMatrix> {
    geometry.validate()?;
    let n_scan = modes.iter().map(|m| m.index).max().unwrap_or(1);
    let symmetric = symmetric_roots(geometry, geometry.flux_bias, n_scan)?;
    let mut dk = Vec::with_capacity(modes.len());
    for mode in modes {
        dk.push(match mode.parity {
            Parity::Antisymmetric => 0.0,
            Parity::Symmetric => symmetric_dk_df(geometry, &symmetric, mode.branch, df_step, n_scan)?,
        });
    }
    let n = modes.len();
    let entries = DMatrix::from_fn(n, n, |i, j| {
        let (dn, mn, mm) = (dk[i], &modes[i], &modes[j]);
        if dn == 0.0 {
            return 0.0;
        }
        let overlap = weighted_inner_product_with(
            |x| mm.value(x),
            |x| mn.dk_value(x),
            geometry.cap_ratio,
            QUADRATURE_POINTS,
        );
        dn * overlap
    });
    Ok(CouplingMatrix {
        indices: modes.iter().map(|m| m.index).collect(),
        entries,
    })
}

/// Solves `sin f0 + eps_L (f0 + (M/L_ext) F_ext) = 0` on `[-pi, pi]`.
///
/// When several roots exist the stable one (`cos f0 + eps_L > 0`) closest to
/// zero is returned.
pub fn stationary_flux(inductive_ratio: f64, external: ExternalFlux) -> Result<f64> {
    let drive = external.mutual_ratio * external.flux;
    if inductive_ratio <= 0.0 && drive != 0.0 {
        return Err(Error::InvalidArgument(
            "a nonzero external flux needs inductive_ratio > 0".into(),
        ));
    }
    let g = |f: f64| f.sin() + inductive_ratio * (f + drive);
    let (lo, hi) = (-PI, PI);
    let brackets = scan_brackets(g, lo, hi, 4096);
    let mut roots = Vec::new();
    // The left end is excluded by the scan; check it explicitly.
    if g(lo) == 0.0 {
        roots.push(lo);
    }
    for (a, b) in brackets {
        roots.push(if a == b { a } else { bisect(g, a, b)? });
    }
    roots
        .into_iter()
        .filter(|f| f.cos() + inductive_ratio > 0.0)
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .ok_or(Error::NoRoot { lo, hi })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquidFrequency {
    /// `sqrt(cos f0 + eps_L)`: omega_f in units of sqrt(E_J E_CJ)/hbar.
    pub factor: f64,
    /// omega_f in units of E_J/hbar: `sqrt(E_CJ/E_J) * factor`.
    pub in_josephson_units: f64,
}

pub fn squid_frequency(geometry: &CavityGeometry, ecj_over_ej: f64) -> Result<SquidFrequency> {
    let stiffness = geometry.flux_bias.cos() + geometry.inductive_ratio;
    if stiffness <= 0.0 {
        return Err(Error::UnstableFluxPoint { value: stiffness });
    }
    if !(ecj_over_ej > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "E_CJ/E_J must be > 0, got {ecj_over_ej}"
        )));
    }
    let factor = stiffness.sqrt();
    Ok(SquidFrequency {
        factor,
        in_josephson_units: ecj_over_ej.sqrt() * factor,
    })
}

/// `g_nm = (1/2) sqrt(omega_f E_CJ) M_nm0 sqrt(omega_m / omega_n)` (hbar = 1).
pub fn coupling_strength(
    m_nm0: f64,
    omega_n: f64,
    omega_m: f64,
    omega_f: f64,
    e_cj: f64,
) -> Result<f64> {
    if !(omega_n > 0.0 && omega_m > 0.0 && omega_f > 0.0) {
        return Err(Error::InvalidArgument("frequencies must be positive".into()));
    }
    if !(e_cj > 0.0) {
        return Err(Error::InvalidArgument("E_CJ must be positive".into()));
    }
    Ok(0.5 * (omega_f * e_cj).sqrt() * m_nm0 * (omega_m / omega_n).sqrt())
}

/// Same prefactor written with `(omega_n + omega_m)` in place of `omega_f`:
/// `(1/2) sqrt(E_CJ / omega_f) M sqrt(omega_m/omega_n) (omega_n + omega_m)`.
/// Identical to [`coupling_strength`] on resonance.
pub fn coupling_strength_pair_form(
    m_nm0: f64,
    omega_n: f64,
    omega_m: f64,
    omega_f: f64,
    e_cj: f64,
) -> Result<f64> {
    if !(omega_n > 0.0 && omega_m > 0.0 && omega_f > 0.0) {
        return Err(Error::InvalidArgument("frequencies must be positive".into()));
    }
    Ok(0.5 * (e_cj / omega_f).sqrt() * m_nm0 * (omega_m / omega_n).sqrt() * (omega_n + omega_m))
}
