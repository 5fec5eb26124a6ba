//! Kernel functions and their moment and convolution functionals.
//!
//! A [`Kernel`] is a symmetric probability density `K` used to weight
//! observations near an evaluation point through `K_h(u) = K(u/h)/h`.
//! The asymptotic tables consume the moment functionals
//! `mu_k = ∫ w^k K(w) dw`, `v_k = ∫ w^k K(w)^2 dw`, `R(K) = v_0`, and the
//! double-smoothing variance constant
//! `V = ∫ {(K*K)(v) - (K1*K1)(v)/mu_2}^2 dv` with `K1(u) = u K(u)`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad;

/// Absolute tolerance for moment quadrature.
const MOMENT_TOL: f64 = 1e-10;
/// Convergence threshold for the convolution-grid refinement.
const DS_TOL: f64 = 1e-6;
/// Initial number of convolution grid cells.
const DS_GRID_START: usize = 4096;
/// Refinement cap: 4096 << 5 = 131072 cells.
const DS_MAX_REFINES: usize = 5;

/// A symmetric kernel density with (possibly effective) compact support.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    support: (f64, f64),
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("support", &self.support)
            .finish()
    }
}

impl Kernel {
    /// Standard gaussian kernel.
    ///
    /// The support is unbounded; `[-8, 8]` is used as effective support for
    /// quadrature (the omitted tail mass of every moment up to order six is
    /// below 1e-9).
    pub fn gaussian() -> Self {
        Kernel {
            name: "gaussian".into(),
            density: Arc::new(|w| (-0.5 * w * w).exp() / (2.0 * PI).sqrt()),
            support: (-8.0, 8.0),
        }
    }

    /// Epanechnikov kernel `0.75 (1 - w^2)` on `[-1, 1]`.
    pub fn epanechnikov() -> Self {
        Kernel {
            name: "epanechnikov".into(),
            density: Arc::new(|w| {
                if w.abs() >= 1.0 {
                    0.0
                } else {
                    0.75 * (1.0 - w * w)
                }
            }),
            support: (-1.0, 1.0),
        }
    }

    /// A custom kernel. The caller is responsible for symmetry and
    /// normalization; both are enforced by [`kernel_moments`] when the
    /// moments are requested.
    pub fn from_fn<F>(name: impl Into<String>, support: (f64, f64), density: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Kernel {
            name: name.into(),
            density: Arc::new(density),
            support,
        }
    }

    /// Parse a kernel name as accepted by the CLI.
    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Kernel::gaussian()),
            "epanechnikov" | "epan" => Ok(Kernel::epanechnikov()),
            other => Err(Error::invalid(format!("unknown kernel '{other}'"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// Density value `K(w)`.
    pub fn evaluate(&self, w: f64) -> f64 {
        (self.density)(w)
    }
}

/// Scaled kernel weight `K_h(u) = K(u/h) / h`.
pub fn kh_weight(kernel: &Kernel, h: f64, u: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::invalid(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    Ok(kernel.evaluate(u / h) / h)
}

/// Moment functionals of a kernel, all computed by adaptive quadrature.
#[derive(Clone, Debug)]
pub struct KernelMoments {
    /// `mu[k] = ∫ w^k K(w) dw` for `k = 0..=max_order`.
    pub mu: Vec<f64>,
    /// `v[k] = ∫ w^k K(w)^2 dw` for `k = 0..=max_order`.
    pub v: Vec<f64>,
    /// `R(K) = ∫ K(w)^2 dw`, identical to `v[0]`.
    pub rk: f64,
}

impl KernelMoments {
    pub fn mu(&self, k: usize) -> f64 {
        self.mu[k]
    }

    pub fn v(&self, k: usize) -> f64 {
        self.v[k]
    }
}

/// Compute `mu_0..mu_max_order`, `v_0..v_max_order`, and `R(K)`.
///
/// Fails if `max_order > 6`, if the kernel is not normalized to 1 within
/// 1e-8, or if any moment quadrature does not converge.
pub fn kernel_moments(kernel: &Kernel, max_order: usize) -> Result<KernelMoments> {
    if max_order > 6 {
        return Err(Error::invalid(format!(
            "moments only available up to order 6, requested {max_order}"
        )));
    }
    let (lo, hi) = kernel.support();

    let mut mu = Vec::with_capacity(max_order + 1);
    let mut v = Vec::with_capacity(max_order + 1);
    for k in 0..=max_order {
        let m = quad::integrate(
            |w| w.powi(k as i32) * kernel.evaluate(w),
            lo,
            hi,
            MOMENT_TOL,
        )
        .map_err(|e| moment_error("mu", k, e))?;
        mu.push(m);
        let vk = quad::integrate(
            |w| {
                let kw = kernel.evaluate(w);
                w.powi(k as i32) * kw * kw
            },
            lo,
            hi,
            MOMENT_TOL,
        )
        .map_err(|e| moment_error("v", k, e))?;
        v.push(vk);
    }

    if (mu[0] - 1.0).abs() > 1e-8 {
        return Err(Error::Domain(format!(
            "kernel '{}' is not normalized: integral = {}",
            kernel.name(),
            mu[0]
        )));
    }

    Ok(KernelMoments { rk: v[0], mu, v })
}

fn moment_error(which: &str, k: usize, e: Error) -> Error {
    Error::NonConvergence {
        what: format!("quadrature of moment {which}_{k}"),
        iterations: 0,
        detail: e.to_string(),
    }
}

/// The double-smoothing variance constant
/// `V = ∫ {(K*K)(v) - (K1*K1)(v)/mu_2}^2 dv`.
///
/// Both convolutions are evaluated on a uniform grid spanning the doubled
/// support; the grid is refined (cell count doubled) until two successive
/// estimates agree to 1e-6.
pub fn ds_variance_constant(kernel: &Kernel) -> Result<f64> {
    let mu2 = kernel_moments(kernel, 2)?.mu(2);
    if mu2 <= 0.0 {
        return Err(Error::Domain(format!(
            "kernel '{}' has non-positive second moment {mu2}",
            kernel.name()
        )));
    }

    let mut cells = DS_GRID_START;
    let mut prev = ds_constant_on_grid(kernel, mu2, cells);
    for _ in 0..DS_MAX_REFINES {
        cells *= 2;
        let next = ds_constant_on_grid(kernel, mu2, cells);
        if (next - prev).abs() < DS_TOL {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NonConvergence {
        what: "ds_variance_constant grid refinement".into(),
        iterations: DS_MAX_REFINES,
        detail: format!("last grid {cells} cells, estimate {prev}"),
    })
}

/// Discrete evaluation of V on a grid with `cells` intervals.
///
/// With samples `K[i]` on a uniform grid of spacing `d`, the convolution
/// `(K*K)(v_m)` at the aligned output point `v_m` is `d * Σ_i K[i] K[m-i]`,
/// and the outer integral is a plain Riemann sum (both integrands vanish at
/// the grid ends, so rectangle sums converge fast).
fn ds_constant_on_grid(kernel: &Kernel, mu2: f64, cells: usize) -> f64 {
    let (lo, hi) = kernel.support();
    let n = cells + 1;
    let d = (hi - lo) / cells as f64;

    let mut k0 = Vec::with_capacity(n);
    let mut k1 = Vec::with_capacity(n);
    for i in 0..n {
        let u = lo + d * i as f64;
        let ku = kernel.evaluate(u);
        k0.push(ku);
        k1.push(u * ku);
    }

    // Output index m corresponds to v = 2*lo + d*m, m = 0..2n-2.
    let mut sum = 0.0;
    for m in 0..(2 * n - 1) {
        let i_min = m.saturating_sub(n - 1);
        let i_max = m.min(n - 1);
        let mut c0 = 0.0;
        let mut c1 = 0.0;
        for i in i_min..=i_max {
            c0 += k0[i] * k0[m - i];
            c1 += k1[i] * k1[m - i];
        }
        let g = d * c0 - d * c1 / mu2;
        sum += g * g;
    }
    sum * d
}

/// Moments to order six plus the double-smoothing constant, bundled for the
/// asymptotic tables.
#[derive(Clone, Debug)]
pub struct KernelConstants {
    pub moments: KernelMoments,
    pub ds_v: f64,
}

pub fn kernel_constants(kernel: &Kernel) -> Result<KernelConstants> {
    Ok(KernelConstants {
        moments: kernel_moments(kernel, 6)?,
        ds_v: ds_variance_constant(kernel)?,
    })
}
