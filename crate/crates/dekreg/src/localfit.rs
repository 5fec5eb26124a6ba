//! Local polynomial estimators and the DE-assisted DE1-k family.
//!
//! All pointwise estimators minimize the kernel-weighted least-squares
//! objective `Σ (y_i - g*(x_i))^2 K_h(x_i - x0)`. For local polynomials the
//! approximating class is a degree-p polynomial and the intercept estimates
//! `g(x0)`; for DE1-k the class is the one-parameter family
//! `g(x0) · S_k(x_i - x0)` with Taylor weight
//! `S_k(u) = Σ_{p=0}^k u^p λ^p / p!`, which substitutes the derivatives
//! implied by `g' = λ g`. The DE1-k minimizer has the closed form
//! `Σ y_i S_k K_h / Σ S_k^2 K_h`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::growth::{self, ExpansionOrder, GrowthLaw};
use crate::kernel::Kernel;

/// A kernel weight is treated as zero below this fraction of the largest
/// weight in the neighborhood.
pub(crate) const WEIGHT_FLOOR_REL: f64 = 1e-12;
/// Denominators below this are treated as undefined.
pub(crate) const DENOM_FLOOR: f64 = 1e-300;

/// Paired design points and responses.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    /// Build a dataset, checking the shape and finiteness invariants.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid(format!(
                "x and y must have equal length, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::invalid("dataset must contain at least one point"));
        }
        if let Some(i) = x.iter().chain(y.iter()).position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "dataset contains a non-finite value (flat index {i})"
            )));
        }
        Ok(Dataset { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn point(&self, i: usize) -> (f64, f64) {
        (self.x[i], self.y[i])
    }

    /// Dataset with observation `i` removed (for leave-one-out loops).
    pub fn without(&self, i: usize) -> Dataset {
        let mut x = Vec::with_capacity(self.x.len() - 1);
        let mut y = Vec::with_capacity(self.y.len() - 1);
        for j in 0..self.x.len() {
            if j != i {
                x.push(self.x[j]);
                y.push(self.y[j]);
            }
        }
        Dataset { x, y }
    }

    /// Dataset with the responses transformed.
    pub fn map_y<F: Fn(f64) -> f64>(&self, f: F) -> Result<Dataset> {
        Dataset::new(self.x.clone(), self.y.iter().map(|&v| f(v)).collect())
    }
}

/// Taylor weight `S_k(u) = Σ_{p=0}^k u^p λ^p / p!` for the exponential law.
#[derive(Clone, Copy, Debug)]
pub struct TaylorWeight {
    k: usize,
    lambda: f64,
}

impl TaylorWeight {
    /// `k` is capped at 5, the highest degree used anywhere in the study.
    pub fn new(k: usize, lambda: f64) -> Result<Self> {
        if !(1..=5).contains(&k) {
            return Err(Error::invalid(format!(
                "Taylor degree k must be 1..=5, got {k}"
            )));
        }
        if !lambda.is_finite() {
            return Err(Error::invalid("lambda must be finite"));
        }
        Ok(TaylorWeight { k, lambda })
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Evaluate `S_k(u)` by running product, so `S_k(0) = 1` exactly and
    /// `λ = 0` collapses to 1.0 without rounding.
    pub fn eval(&self, u: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for p in 1..=self.k {
            term *= u * self.lambda / p as f64;
            sum += term;
        }
        sum
    }
}

/// Estimator output over an evaluation grid.
///
/// `values[i] = None` marks a grid point where the estimator is undefined
/// (empty neighborhood or singular local system); it is never a silent
/// number. `h` is `None` for global fits that use no bandwidth.
#[derive(Clone, Debug)]
pub struct FitCurve {
    pub grid: Vec<f64>,
    pub values: Vec<Option<f64>>,
    pub h: Option<f64>,
    pub method: String,
}

impl FitCurve {
    pub fn defined_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

/// Estimation method plus its parameters.
#[derive(Clone, Debug)]
pub enum FitMethod {
    /// Local polynomial of the given degree: 0 = NW, 1 = LL, 2 = LQ, 3 = LC.
    LocalPoly { degree: usize },
    /// DE-assisted estimator of Taylor degree `k` for `g' = λ g`.
    De1 { k: usize, lambda: f64 },
    /// Local sub-exponential growth fit on log-scale data.
    SubExp {
        order: ExpansionOrder,
        law: GrowthLaw,
    },
    /// Global nonlinear least-squares fit of `c e^{λ x}`.
    NlsExponential,
    /// Global fit of the sub-exponential solution with `g(0)` dropped.
    NlsSubExp,
}

impl FitMethod {
    pub fn nw() -> Self {
        FitMethod::LocalPoly { degree: 0 }
    }

    pub fn ll() -> Self {
        FitMethod::LocalPoly { degree: 1 }
    }

    pub fn tag(&self) -> String {
        match self {
            FitMethod::LocalPoly { degree: 0 } => "NW".into(),
            FitMethod::LocalPoly { degree: 1 } => "LL".into(),
            FitMethod::LocalPoly { degree: 2 } => "LQ".into(),
            FitMethod::LocalPoly { degree } => format!("LP{degree}"),
            FitMethod::De1 { k, .. } => format!("DE1-{k}"),
            FitMethod::SubExp { order, .. } => format!("SUBEXP-{}", order.as_usize()),
            FitMethod::NlsExponential => "NLS".into(),
            FitMethod::NlsSubExp => "NLS-SUBEXP".into(),
        }
    }

    /// Whether the method is evaluated pointwise with a kernel neighborhood.
    pub fn is_pointwise(&self) -> bool {
        !matches!(self, FitMethod::NlsExponential | FitMethod::NlsSubExp)
    }

    /// Pointwise evaluation at `x0`. Errors on the global NLS methods.
    pub fn fit_at(&self, data: &Dataset, h: f64, kernel: &Kernel, x0: f64) -> Result<f64> {
        match self {
            FitMethod::LocalPoly { degree } => local_poly_fit(data, *degree, h, kernel, x0),
            FitMethod::De1 { k, lambda } => de1k_fit(data, *k, *lambda, h, kernel, x0),
            FitMethod::SubExp { order, law } => {
                growth::local_subexp_fit(data, *order, law, h, kernel, x0)
            }
            FitMethod::NlsExponential | FitMethod::NlsSubExp => Err(Error::invalid(
                "global least-squares methods have no pointwise form",
            )),
        }
    }
}

impl std::fmt::Display for FitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // LC does not fit the LP{d} fall-through in tag()
        if let FitMethod::LocalPoly { degree: 3 } = self {
            return write!(f, "LC");
        }
        write!(f, "{}", self.tag())
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    Ok(())
}

/// Kernel weights `K_h(x_i - x0)` for every observation.
fn kernel_weights(data: &Dataset, h: f64, kernel: &Kernel, x0: f64) -> Vec<f64> {
    data.x()
        .iter()
        .map(|&xi| kernel.evaluate((xi - x0) / h) / h)
        .collect()
}

/// Intercept of the kernel-weighted polynomial least-squares fit at `x0`.
///
/// Degree 0 is the Nadaraya-Watson estimator, 1 local linear, 2 local
/// quadratic, 3 local cubic. The weighted system is solved by QR of the
/// `sqrt(w)`-scaled design matrix; a rank-deficient local system yields
/// [`Error::UndefinedAtPoint`].
pub fn local_poly_fit(
    data: &Dataset,
    degree: usize,
    h: f64,
    kernel: &Kernel,
    x0: f64,
) -> Result<f64> {
    check_bandwidth(h)?;
    if degree > 3 {
        return Err(Error::invalid(format!(
            "local polynomial degree must be 0..=3, got {degree}"
        )));
    }

    let w = kernel_weights(data, h, kernel, x0);
    let wmax = w.iter().cloned().fold(0.0_f64, f64::max);
    if wmax <= 0.0 {
        return Err(Error::undefined_at(
            x0,
            "no observation carries kernel weight",
        ));
    }

    if degree == 0 {
        // Same accumulation structure as de1k_fit with S ≡ 1, so the λ = 0
        // reduction is bit-exact.
        let mut num = 0.0;
        let mut den = 0.0;
        for (&yi, &wi) in data.y().iter().zip(&w) {
            num += yi * wi;
            den += wi;
        }
        if den < DENOM_FLOOR {
            return Err(Error::undefined_at(
                x0,
                "weight sum below the numeric floor",
            ));
        }
        return Ok(num / den);
    }

    let floor = WEIGHT_FLOOR_REL * wmax;
    let active: Vec<usize> = (0..data.len()).filter(|&i| w[i] > floor).collect();
    if active.len() < degree + 1 {
        return Err(Error::undefined_at(
            x0,
            format!(
                "only {} observation(s) carry kernel weight, degree {} needs {}",
                active.len(),
                degree,
                degree + 1
            ),
        ));
    }

    let m = active.len();
    let p = degree + 1;
    let mut a = DMatrix::<f64>::zeros(m, p);
    let mut b = DVector::<f64>::zeros(m);
    for (row, &i) in active.iter().enumerate() {
        let (xi, yi) = data.point(i);
        let sw = w[i].sqrt();
        let u = xi - x0;
        let mut pow = 1.0;
        for col in 0..p {
            a[(row, col)] = sw * pow;
            pow *= u;
        }
        b[row] = sw * yi;
    }

    let qr = a.qr();
    let r = qr.r();
    let diag_max = (0..p).map(|j| r[(j, j)].abs()).fold(0.0_f64, f64::max);
    let diag_min = (0..p)
        .map(|j| r[(j, j)].abs())
        .fold(f64::INFINITY, f64::min);
    if diag_max <= 0.0 || diag_min <= 1e-12 * diag_max {
        return Err(Error::undefined_at(
            x0,
            "singular weighted normal equations",
        ));
    }
    let qtb = qr.q().transpose() * b;
    let beta = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::undefined_at(x0, "singular weighted normal equations"))?;
    Ok(beta[0])
}

/// The closed-form DE1-k estimator
/// `ĝ_k(x0) = Σ y_i S_k(x_i - x0) K_h / Σ S_k(x_i - x0)^2 K_h`.
pub fn de1k_fit(
    data: &Dataset,
    k: usize,
    lambda: f64,
    h: f64,
    kernel: &Kernel,
    x0: f64,
) -> Result<f64> {
    check_bandwidth(h)?;
    let tw = TaylorWeight::new(k, lambda)?;

    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..data.len() {
        let (xi, yi) = data.point(i);
        let w = kernel.evaluate((xi - x0) / h) / h;
        let s = tw.eval(xi - x0);
        num += yi * s * w;
        den += s * s * w;
    }
    if den < DENOM_FLOOR {
        return Err(Error::undefined_at(
            x0,
            "DE1-k denominator below the numeric floor",
        ));
    }
    Ok(num / den)
}

/// Apply a pointwise estimator over a grid, or evaluate a global fit there.
///
/// Undefined grid points are flagged, not silently filled; if every point is
/// undefined the call fails.
pub fn fit_curve(
    data: &Dataset,
    method: &FitMethod,
    h: f64,
    kernel: &Kernel,
    grid: &[f64],
) -> Result<FitCurve> {
    if grid.is_empty() {
        return Err(Error::invalid("evaluation grid is empty"));
    }

    let values: Vec<Option<f64>> = match method {
        FitMethod::NlsExponential => {
            let (c, lambda) = growth::fit_nls_exponential(data)?;
            grid.iter().map(|&x| Some(c * (lambda * x).exp())).collect()
        }
        FitMethod::NlsSubExp => {
            let alpha = growth::estimate_alpha(data)?;
            let lambda = growth::estimate_lambda_subexp(data, alpha)?;
            let law = GrowthLaw::sub_exponential(lambda, alpha)?;
            grid.iter()
                .map(|&x| growth::subexp_solution(&law, x, 0.0).ok())
                .collect()
        }
        _ => {
            check_bandwidth(h)?;
            let mut vals = Vec::with_capacity(grid.len());
            for &x0 in grid {
                match method.fit_at(data, h, kernel, x0) {
                    Ok(v) => vals.push(Some(v)),
                    Err(e) if e.is_numeric() => vals.push(None),
                    Err(e) => return Err(e),
                }
            }
            vals
        }
    };

    if values.iter().all(|v| v.is_none()) {
        return Err(Error::Estimation(format!(
            "method {} is undefined at every grid point",
            method.tag()
        )));
    }

    let h = if method.is_pointwise() { Some(h) } else { None };
    Ok(FitCurve {
        grid: grid.to_vec(),
        values,
        h,
        method: method.tag(),
    })
}
