//! Bracketing root finders shared by the cavity solver.

use crate::error::{Error, Result};

const MAX_BISECTIONS: usize = 200;

/// Bisection on `[lo, hi]`; requires a sign change (or an exact zero at an end).
///
/// Runs until the bracket cannot shrink further in floating point and returns
/// whichever end point has the smaller `|f|`.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo.signum() != fhi.signum()) || flo.is_nan() || fhi.is_nan() {
        return Err(Error::NoRoot { lo, hi });
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
            fhi = fmid;
        }
    }
    Ok(if flo.abs() <= fhi.abs() { lo } else { hi })
}

/// Samples `f` on a uniform grid of `samples` intervals over `(lo, hi]` and
/// returns every bracket `[a, b]` with a sign change, in increasing order.
///
/// A sample where `f` is exactly zero yields the degenerate bracket `[x, x]`.
pub fn scan_brackets<F>(f: F, lo: f64, hi: f64, samples: usize) -> Vec<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let step = (hi - lo) / samples as f64;
    let mut out = Vec::new();
    let mut a = lo;
    let mut fa = f(a);
    for i in 1..=samples {
        let b = if i == samples { hi } else { lo + step * i as f64 };
        let fb = f(b);
        if fb == 0.0 {
            out.push((b, b));
        } else if fa != 0.0 && fa.signum() != fb.signum() {
            out.push((a, b));
        }
        a = b;
        fa = fb;
    }
    out
}
