//! Adaptive Simpson quadrature with an absolute error target.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Uses the Richardson-corrected adaptive Simpson rule. Fails with an
/// integrability error if the recursion bottoms out or a non-finite value is
/// encountered.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Integrability(format!("infinite interval [{a}, {b}]")));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    // Seed with four panels so that integrands symmetric about the midpoint
    // cannot fool the first error estimate.
    let panels = 4;
    let h = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let x0 = lo + k as f64 * h;
        let x1 = if k + 1 == panels { hi } else { x0 + h };
        let fa = f(x0);
        let fb = f(x1);
        let m = 0.5 * (x0 + x1);
        let fm = f(m);
        let whole = (x1 - x0) / 6.0 * (fa + 4.0 * fm + fb);
        total += recurse(&f, x0, x1, fa, fm, fb, whole, tol / panels as f64, MAX_DEPTH)?;
    }
    Ok(sign * total)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    if !(flm.is_finite() && frm.is_finite() && fa.is_finite() && fb.is_finite()) {
        return Err(Error::Integrability(format!("non-finite integrand near {m}")));
    }
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || (b - a) <= f64::EPSILON * m.abs().max(1.0) * 4.0 {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Integrability(format!(
            "no convergence on [{a}, {b}] (error estimate {:e})",
            delta.abs() / 15.0
        )));
    }
    Ok(recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
        + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
}

/// Integrates a function with known breakpoints (jumps or kinks) by splitting
/// at each breakpoint inside `[a, b]`.
pub fn piecewise_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<f64> {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);
    let pieces = (edges.len() - 1) as f64;
    let mut total = 0.0;
    for w in edges.windows(2) {
        total += adaptive_simpson(&f, w[0], w[1], tol / pieces)?;
    }
    Ok(total)
}
