//! Adaptive Simpson quadrature.
//!
//! All kernel moment functionals in this crate are one-dimensional integrals
//! of smooth, rapidly decaying integrands, so a classic recursive Simpson
//! scheme with Richardson correction is accurate well past the 1e-10
//! tolerances the moment tables require.

use crate::error::{Error, Result};

const MAX_DEPTH: usize = 60;

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Fails if the integrand produces non-finite values or the recursion
/// cannot reach the requested tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::invalid(format!(
            "bad integration interval [{a}, {b}]"
        )));
    }
    if tol <= 0.0 {
        return Err(Error::invalid("quadrature tolerance must be positive"));
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let val = adaptive(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)?;
    if !val.is_finite() {
        return Err(Error::Domain(format!(
            "quadrature over [{a}, {b}] produced a non-finite value"
        )));
    }
    Ok(val)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    if !(flm.is_finite() && frm.is_finite()) {
        return Err(Error::Domain(format!(
            "integrand is non-finite near [{a}, {b}]"
        )));
    }
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::NonConvergence {
            what: "adaptive quadrature".into(),
            iterations: MAX_DEPTH,
            detail: format!("subinterval [{a}, {b}] did not reach tolerance {tol}"),
        });
    }
    let lv = adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let rv = adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok(lv + rv)
}
