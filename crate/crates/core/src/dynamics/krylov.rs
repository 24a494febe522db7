//! Lanczos approximation of `exp(-i H tau) v` for sparse Hermitian `H`.

use nalgebra::{DMatrix, SymmetricEigen};
use nalgebra_sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::fock::{csr_apply, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormal Krylov basis `Q` with tridiagonal projection `T = Q^dag H Q`.
struct Lanczos {
    basis: Vec<Vec<C64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Residual coupling out of the subspace (zero on breakdown).
    beta_out: f64,
}

fn lanczos(h: &CsrMatrix<C64>, v: &[C64], m: usize) -> Lanczos {
    let n = v.len();
    let m = m.min(n).max(1);
    let scale = h.values().iter().map(|x| x.norm()).fold(0.0, f64::max).max(1.0);
    let beta0 = norm(v);
    let mut basis = vec![v.iter().map(|x| x / beta0).collect::<Vec<_>>()];
    let mut alpha = Vec::with_capacity(m);
    let mut beta = Vec::with_capacity(m);
    let mut w = vec![ZERO; n];
    let mut beta_out = 0.0;
    for j in 0..m {
        csr_apply(h, &basis[j], &mut w);
        // Two passes of classical Gram-Schmidt against the whole basis.
        let mut a = 0.0;
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let c = dot(q, &w);
                if i == j {
                    a += c.re;
                }
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        alpha.push(a);
        let b = norm(&w);
        if j + 1 == m {
            beta_out = b;
            break;
        }
        if b <= 1e-13 * scale {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    Lanczos {
        basis,
        alpha,
        beta,
        beta_out,
    }
}

impl Lanczos {
    fn eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        let k = self.alpha.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = self.alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = self.beta[i];
                t[(i + 1, i)] = self.beta[i];
            }
        }
        SymmetricEigen::new(t)
    }
}

/// `exp(-i T tau) e_1` in the Lanczos basis and its a-posteriori error estimate.
fn small_exp(eig: &SymmetricEigen<f64, nalgebra::Dyn>, beta_out: f64, tau: f64) -> (Vec<C64>, f64) {
    let z = &eig.eigenvectors;
    let k = z.nrows();
    let mut u = vec![ZERO; k];
    for (a, &lambda) in eig.eigenvalues.iter().enumerate() {
        let c = C64::from_polar(z[(0, a)], -lambda * tau);
        for (i, ui) in u.iter_mut().enumerate() {
            *ui += c * z[(i, a)];
        }
    }
    let err = beta_out * u[k - 1].norm();
    (u, err)
}

/// Propagates `v` by `exp(-i H dt)` with adaptive substeps so that each
/// substep's error estimate stays below `tol`.
pub fn expv(h: &CsrMatrix<C64>, v: &[C64], dt: f64, m: usize, tol: f64) -> Result<Vec<C64>> {
    let mut state = v.to_vec();
    let mut remaining = dt;
    let mut step = dt;
    while remaining > 0.0 {
        let beta0 = norm(&state);
        if beta0 == 0.0 {
            return Ok(state);
        }
        let lz = lanczos(h, &state, m);
        let eig = lz.eigen();
        let mut tau = step.min(remaining);
        let (u, err) = loop {
            let (u, err) = small_exp(&eig, lz.beta_out, tau);
            if err <= tol {
                break (u, err);
            }
            tau *= 0.5;
            if tau < 1e-14 * dt.abs().max(1.0) {
                return Err(Error::PropagationDiverged {
                    time: dt - remaining,
                    detail: format!("krylov step underflow (error estimate {err:.3e})"),
                });
            }
        };
        state.iter_mut().for_each(|x| *x = ZERO);
        for (q, c) in lz.basis.iter().zip(&u) {
            let c = c * beta0;
            state.iter_mut().zip(q).for_each(|(s, qi)| *s += c * qi);
        }
        remaining = if tau >= remaining { 0.0 } else { remaining - tau };
        step = if err < 0.01 * tol { tau * 2.0 } else { tau };
    }
    Ok(state)
}
