//! Asymptotic bias/variance of the estimators and the finite-sample
//! variance-ratio study.
//!
//! The interior bias of the DE1-k estimator under `g' = λ g` is
//!
//! * odd k:  `λ^{k+1} g(x) h^{k+1} μ_{k+1} / (k+1)!`
//! * even k: `λ^{k+1} g(x) h^{k+2} μ_{k+2} (λ + f'(x)/f(x)) / (k+1)!`
//!
//! and its conditional variance is `σ² R(K) / (n h f(x))` for every k. The
//! summary-table rows for NW/LL/LQ/LC and the double-smoothing (DS)
//! estimator are evaluated verbatim, including the DS constants
//! `B(x) = (μ₂²-μ₄)/4 [λ²g f''/f + 2λ³g f'/f + λ⁴g]` and `V` from
//! [`crate::kernel::ds_variance_constant`].

use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::bandwidth;
use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelConstants, KernelMoments};
use crate::localfit::{Dataset, TaylorWeight, DENOM_FLOOR};

/// A design density with two derivatives, as the bias formulas require.
#[derive(Clone)]
pub struct DesignDensity {
    name: String,
    pdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    dpdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    d2pdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    support: (f64, f64),
}

impl std::fmt::Debug for DesignDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DesignDensity")
            .field("name", &self.name)
            .field("support", &self.support)
            .finish()
    }
}

impl DesignDensity {
    pub fn new<F, D, D2>(
        name: impl Into<String>,
        support: (f64, f64),
        pdf: F,
        dpdf: D,
        d2pdf: D2,
    ) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        DesignDensity {
            name: name.into(),
            pdf: Arc::new(pdf),
            dpdf: Arc::new(dpdf),
            d2pdf: Arc::new(d2pdf),
            support,
        }
    }

    /// Uniform design on [0, 1].
    pub fn uniform01() -> Self {
        DesignDensity::new(
            "uniform",
            (0.0, 1.0),
            |x| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 },
            |_| 0.0,
            |_| 0.0,
        )
    }

    /// Beta(1, 0.5) design on [0, 1): density `0.5 (1-x)^{-1/2}`, sparse
    /// near the origin.
    pub fn beta_1_half() -> Self {
        DesignDensity::new(
            "beta(1,0.5)",
            (0.0, 1.0),
            |x| {
                if (0.0..1.0).contains(&x) {
                    0.5 * (1.0 - x).powf(-0.5)
                } else {
                    0.0
                }
            },
            |x| 0.25 * (1.0 - x).powf(-1.5),
            |x| 0.375 * (1.0 - x).powf(-2.5),
        )
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "uniform" => Ok(DesignDensity::uniform01()),
            "beta" | "beta(1,0.5)" => Ok(DesignDensity::beta_1_half()),
            other => Err(Error::invalid(format!("unknown design density '{other}'"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn pdf(&self, x: f64) -> f64 {
        (self.pdf)(x)
    }

    pub fn dpdf(&self, x: f64) -> f64 {
        (self.dpdf)(x)
    }

    pub fn d2pdf(&self, x: f64) -> f64 {
        (self.d2pdf)(x)
    }

    fn positive_pdf(&self, x: f64) -> Result<f64> {
        let f = self.pdf(x);
        if !(f > 0.0) {
            return Err(Error::Domain(format!(
                "design density '{}' is not positive at x = {x}",
                self.name
            )));
        }
        Ok(f)
    }
}

/// The misspecified truth `g(x) = e^{λ₁ x - λ₂ x²}` fitted with the
/// exponential-law estimator.
#[derive(Clone, Copy, Debug)]
pub struct MisspecifiedTruth {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl MisspecifiedTruth {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda1 > 0.0 && lambda2 >= 0.0) {
            return Err(Error::invalid(
                "misspecified truth requires lambda1 > 0 and lambda2 >= 0",
            ));
        }
        Ok(MisspecifiedTruth { lambda1, lambda2 })
    }

    pub fn g(&self, x: f64) -> f64 {
        (self.lambda1 * x - self.lambda2 * x * x).exp()
    }

    pub fn dg(&self, x: f64) -> f64 {
        (self.lambda1 - 2.0 * x * self.lambda2) * self.g(x)
    }

    /// Second derivative of the truth. The displayed form carries a
    /// `2x λ₂` correction term where the calculus derivative of
    /// `(λ₁ - 2xλ₂) g(x)` gives `2 λ₂`; both modes are available.
    pub fn d2g(&self, x: f64, mode: SecondDerivMode) -> f64 {
        let a = self.lambda1 - 2.0 * x * self.lambda2;
        let correction = match mode {
            SecondDerivMode::AsPrinted => 2.0 * x * self.lambda2,
            SecondDerivMode::Corrected => 2.0 * self.lambda2,
        };
        (a * a - correction) * self.g(x)
    }
}

/// Which form of `g''` the misspecified-bias rows use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SecondDerivMode {
    /// `g'' = ((λ₁ - 2xλ₂)² - 2xλ₂) g`, exactly as displayed.
    AsPrinted,
    /// `g'' = ((λ₁ - 2xλ₂)² - 2λ₂) g`, the calculus derivative.
    Corrected,
}

/// Rows of the asymptotic summary table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableMethod {
    Nw,
    Ll,
    Lq,
    Lc,
    Ds,
    De1(usize),
}

impl TableMethod {
    pub fn parse(s: &str) -> Result<Self> {
        let up = s.to_ascii_uppercase();
        match up.as_str() {
            "NW" => Ok(TableMethod::Nw),
            "LL" => Ok(TableMethod::Ll),
            "LQ" => Ok(TableMethod::Lq),
            "LC" => Ok(TableMethod::Lc),
            "DS" => Ok(TableMethod::Ds),
            _ => {
                if let Some(k) = up.strip_prefix("DE1-") {
                    let k: usize = k
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad method '{s}'")))?;
                    if (1..=5).contains(&k) {
                        return Ok(TableMethod::De1(k));
                    }
                }
                Err(Error::invalid(format!("unknown method '{s}'")))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            TableMethod::Nw => "NW".into(),
            TableMethod::Ll => "LL".into(),
            TableMethod::Lq => "LQ".into(),
            TableMethod::Lc => "LC".into(),
            TableMethod::Ds => "DS".into(),
            TableMethod::De1(k) => format!("DE1-{k}"),
        }
    }

    /// Row order of the correct-model summary table.
    pub fn summary_rows() -> Vec<TableMethod> {
        vec![
            TableMethod::Nw,
            TableMethod::Ll,
            TableMethod::De1(1),
            TableMethod::De1(2),
            TableMethod::Lq,
            TableMethod::Lc,
            TableMethod::Ds,
            TableMethod::De1(3),
        ]
    }
}

/// Inputs of one summary-table row evaluation.
#[derive(Clone, Copy, Debug)]
pub struct AsymptoticSpec {
    pub method: TableMethod,
    /// Growth rate of the (correct) exponential law.
    pub lambda: f64,
    pub sigma: f64,
    pub n: usize,
    pub h: f64,
}

impl AsymptoticSpec {
    pub fn new(method: TableMethod, lambda: f64, sigma: f64, n: usize, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::invalid("h must be positive"));
        }
        if n < 1 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if sigma < 0.0 {
            return Err(Error::invalid("sigma must be nonnegative"));
        }
        Ok(AsymptoticSpec {
            method,
            lambda,
            sigma,
            n,
            h,
        })
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product::<f64>().max(1.0)
}

/// Leading-order interior bias of the DE1-k estimator.
pub fn de1k_bias(
    k: usize,
    lambda: f64,
    g_at_x: f64,
    h: f64,
    moments: &KernelMoments,
    density: &DesignDensity,
    x: f64,
) -> Result<f64> {
    if !(1..=5).contains(&k) {
        return Err(Error::invalid(format!("k must be 1..=5, got {k}")));
    }
    let f = density.positive_pdf(x)?;
    let lead = lambda.powi(k as i32 + 1) * g_at_x / factorial(k + 1);
    if k % 2 == 1 {
        Ok(lead * h.powi(k as i32 + 1) * moments.mu(k + 1))
    } else {
        let ratio = density.dpdf(x) / f;
        Ok(lead * h.powi(k as i32 + 2) * moments.mu(k + 2) * (lambda + ratio))
    }
}

/// Leading-order interior conditional variance, `σ² R(K) / (n h f(x))`;
/// the same for every Taylor degree k.
pub fn de1k_variance(
    sigma: f64,
    n: usize,
    h: f64,
    moments: &KernelMoments,
    density: &DesignDensity,
    x: f64,
) -> Result<f64> {
    if !(h > 0.0) || n == 0 {
        return Err(Error::invalid("n and h must be positive"));
    }
    let f = density.positive_pdf(x)?;
    Ok(sigma * sigma * moments.rk / (n as f64 * h * f))
}

/// Evaluate one correct-model summary-table row at `x`.
pub fn asymptotic_bias_variance(
    spec: &AsymptoticSpec,
    g_at_x: f64,
    density: &DesignDensity,
    constants: &KernelConstants,
    x: f64,
) -> Result<(f64, f64)> {
    let m = &constants.moments;
    let f = density.positive_pdf(x)?;
    let fp_over_f = density.dpdf(x) / f;
    let (lambda, sigma, n, h) = (spec.lambda, spec.sigma, spec.n, spec.h);
    let nh = n as f64 * h;
    let var_v0 = sigma * sigma * m.v(0) / (nh * f);

    // LQ/LC/DS rows divide by mu_2^2 - mu_4
    let quartic_gap = || -> Result<f64> {
        let gap = m.mu(2) * m.mu(2) - m.mu(4);
        if gap.abs() <= 1e-12 * m.mu(4).abs().max(1.0) {
            return Err(Error::Domain(
                "kernel has mu_2^2 = mu_4; quartic-order rows are degenerate".into(),
            ));
        }
        Ok(gap)
    };

    match spec.method {
        TableMethod::Nw => {
            let bias = 0.5
                * (lambda * lambda * g_at_x + 2.0 * lambda * g_at_x * fp_over_f)
                * h
                * h
                * m.mu(2);
            Ok((bias, var_v0))
        }
        TableMethod::Ll => {
            let bias = 0.5 * lambda * lambda * g_at_x * h * h * m.mu(2);
            Ok((bias, var_v0))
        }
        TableMethod::De1(k) => {
            let bias = de1k_bias(k, lambda, g_at_x, h, m, density, x)?;
            let var = de1k_variance(sigma, n, h, m, density, x)?;
            Ok((bias, var))
        }
        TableMethod::Lq | TableMethod::Lc => {
            let gap = quartic_gap()?;
            let shared = (m.mu(2) * m.mu(6) - m.mu(4) * m.mu(4)) / gap / 24.0;
            let l3 = lambda.powi(3);
            let l4 = lambda.powi(4);
            let bias = match spec.method {
                TableMethod::Lq => {
                    shared * (l4 * g_at_x + 4.0 * l3 * g_at_x * fp_over_f) * h.powi(4)
                }
                _ => shared * l4 * g_at_x * h.powi(4),
            };
            let var_num = m.mu(4) * m.mu(4) * m.v(0) - 2.0 * m.mu(2) * m.mu(4) * m.v(2)
                + m.mu(2) * m.mu(2) * m.v(4);
            let var = sigma * sigma * var_num / (gap * gap) / (nh * f);
            Ok((bias, var))
        }
        TableMethod::Ds => {
            let gap = quartic_gap()?;
            let l2 = lambda * lambda;
            let l3 = lambda.powi(3);
            let l4 = lambda.powi(4);
            let b = gap / 4.0
                * (l2 * g_at_x * density.d2pdf(x) / f
                    + 2.0 * l3 * g_at_x * fp_over_f
                    + l4 * g_at_x);
            let bias = h.powi(4) * b;
            let var = sigma * sigma * constants.ds_v / (nh * f);
            Ok((bias, var))
        }
    }
}

/// Methods with a misspecified-model bias row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MisspecMethod {
    Nw,
    Ll,
    De1_1,
}

impl MisspecMethod {
    pub fn label(&self) -> &'static str {
        match self {
            MisspecMethod::Nw => "NW",
            MisspecMethod::Ll => "LL",
            MisspecMethod::De1_1 => "DE1-1",
        }
    }

    pub fn rows() -> [MisspecMethod; 3] {
        [MisspecMethod::Nw, MisspecMethod::Ll, MisspecMethod::De1_1]
    }
}

/// Interior bias under the misspecified truth `g(x) = e^{λ₁x - λ₂x²}`, row
/// by row as displayed. The conditional variances are unchanged from the
/// correct-model table.
pub fn misspecified_bias(
    method: MisspecMethod,
    truth: &MisspecifiedTruth,
    density: &DesignDensity,
    moments: &KernelMoments,
    h: f64,
    x: f64,
    mode: SecondDerivMode,
) -> Result<f64> {
    let f = density.positive_pdf(x)?;
    let fp_over_f = density.dpdf(x) / f;
    let g = truth.g(x);
    let gpp = truth.d2g(x, mode);
    let h2mu2 = h * h * moments.mu(2);
    let half_gpp = 0.5 * gpp * h2mu2;

    Ok(match method {
        MisspecMethod::Nw => half_gpp + truth.dg(x) * fp_over_f * h2mu2,
        MisspecMethod::Ll => half_gpp,
        MisspecMethod::De1_1 => {
            half_gpp - 2.0 * x * truth.lambda2 * g * (truth.lambda1 + fp_over_f) * h2mu2
        }
    })
}

/// Result of a finite-sample variance-ratio study.
#[derive(Clone, Debug)]
pub struct VarianceRatioStudy {
    /// One ratio per usable design point, in draw order.
    pub ratios: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Design points excluded because a denominator fell below the floor.
    pub excluded: usize,
    /// Bandwidth actually used.
    pub h: f64,
}

/// Draw a uniform design of size `n` on [0, 1] and compute, at every design
/// point, the exact finite-sample conditional-variance ratio
/// `Var(DE1-k) / Var(NW)`, where
/// `Var(DE1-k) = σ² Σ S_k² K_h² / (Σ S_k² K_h)²` and σ² cancels.
///
/// When `h` is `None`, the half-median-spacing rule of the drawn design is
/// used.
pub fn variance_ratio_study(
    n: usize,
    lambda: f64,
    k: usize,
    h: Option<f64>,
    kernel: &Kernel,
    seed: u64,
) -> Result<VarianceRatioStudy> {
    if n < 2 {
        return Err(Error::invalid("variance-ratio study needs n >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();

    let h = match h {
        Some(v) if v > 0.0 => v,
        Some(v) => return Err(Error::invalid(format!("h must be positive, got {v}"))),
        None => bandwidth::rot_bandwidth(&Dataset::new(design.clone(), vec![0.0; n])?)?,
    };
    let tw = TaylorWeight::new(k, lambda)?;

    let mut ratios = Vec::with_capacity(n);
    let mut excluded = 0;
    for &x0 in &design {
        let mut sk2_k2 = 0.0;
        let mut sk2_k = 0.0;
        let mut k2 = 0.0;
        let mut k1 = 0.0;
        for &xi in &design {
            let w = kernel.evaluate((xi - x0) / h) / h;
            let s = tw.eval(xi - x0);
            sk2_k2 += s * s * w * w;
            sk2_k += s * s * w;
            k2 += w * w;
            k1 += w;
        }
        if sk2_k < DENOM_FLOOR || k1 < DENOM_FLOOR {
            excluded += 1;
            continue;
        }
        let var_de = sk2_k2 / (sk2_k * sk2_k);
        let var_nw = k2 / (k1 * k1);
        ratios.push(var_de / var_nw);
    }

    if ratios.is_empty() {
        return Err(Error::Estimation(
            "every design point had an undefined variance ratio".into(),
        ));
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(VarianceRatioStudy {
        ratios,
        mean,
        min,
        max,
        excluded,
        h,
    })
}
