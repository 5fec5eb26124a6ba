//! Growth laws and their estimators.
//!
//! Two first-order laws are supported: exponential growth `g' = λ g` and
//! sub-exponential growth `g' = λ g^α` with `α ∈ (0, 1)`. The
//! sub-exponential law has the closed-form solution
//! `g(x) = {(1-α)(λx + g(0))}^{1/(1-α)}`, and on the log scale
//! (`G = log g`) it becomes `G' = λ e^{(α-1)G}`, whose first- and
//! second-order Taylor expansions around an evaluation point define the
//! local growth models fitted here by safeguarded Newton iteration.

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::localfit::{self, Dataset};

/// Clip applied to responses before taking logs in the loglinear initializer.
const LOG_CLIP: f64 = 1e-8;

/// A first-order differential-equation growth law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GrowthLaw {
    Exponential { lambda: f64 },
    SubExponential { lambda: f64, alpha: f64 },
}

impl GrowthLaw {
    pub fn exponential(lambda: f64) -> Self {
        GrowthLaw::Exponential { lambda }
    }

    pub fn sub_exponential(lambda: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!(
                "sub-exponential law requires alpha in (0, 1), got {alpha}"
            )));
        }
        Ok(GrowthLaw::SubExponential { lambda, alpha })
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            GrowthLaw::Exponential { lambda } => lambda,
            GrowthLaw::SubExponential { lambda, .. } => lambda,
        }
    }

    /// `g'` implied by the law at the state value `g`.
    pub fn deriv1(&self, g: f64) -> f64 {
        match *self {
            GrowthLaw::Exponential { lambda } => lambda * g,
            GrowthLaw::SubExponential { lambda, alpha } => lambda * g.powf(alpha),
        }
    }

    /// `g''` implied by the law at the state value `g`.
    pub fn deriv2(&self, g: f64) -> f64 {
        match *self {
            GrowthLaw::Exponential { lambda } => lambda * lambda * g,
            GrowthLaw::SubExponential { lambda, alpha } => {
                alpha * lambda * lambda * g.powf(2.0 * alpha - 1.0)
            }
        }
    }
}

/// Taylor expansion order of the log-scale growth predictor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpansionOrder {
    First,
    Second,
}

impl ExpansionOrder {
    pub fn as_usize(self) -> usize {
        match self {
            ExpansionOrder::First => 1,
            ExpansionOrder::Second => 2,
        }
    }

    pub fn from_usize(order: usize) -> Result<Self> {
        match order {
            1 => Ok(ExpansionOrder::First),
            2 => Ok(ExpansionOrder::Second),
            other => Err(Error::invalid(format!(
                "expansion order must be 1 or 2, got {other}"
            ))),
        }
    }
}

/// Log-scale predictor of the sub-exponential law around an evaluation
/// point: `G + λ e^{(α-1)G} u` at first order, plus
/// `(1/2) λ^2 (α-1) e^{2(α-1)G} u^2` at second order, where `u = x_i - x0`
/// and `G` is the single local parameter `G(x0)`.
#[derive(Clone, Copy, Debug)]
pub struct LogGrowthExpansion {
    order: ExpansionOrder,
    lambda: f64,
    alpha: f64,
}

impl LogGrowthExpansion {
    pub fn new(order: ExpansionOrder, law: &GrowthLaw) -> Result<Self> {
        match *law {
            GrowthLaw::SubExponential { lambda, alpha } => Ok(LogGrowthExpansion {
                order,
                lambda,
                alpha,
            }),
            GrowthLaw::Exponential { .. } => Err(Error::invalid(
                "log-growth expansion requires the sub-exponential law",
            )),
        }
    }

    pub fn order(&self) -> ExpansionOrder {
        self.order
    }

    /// Predictor value at offset `u` for local parameter `g` = G(x0).
    pub fn predict(&self, g: f64, u: f64) -> f64 {
        let e = ((self.alpha - 1.0) * g).exp();
        let mut v = g + self.lambda * e * u;
        if self.order == ExpansionOrder::Second {
            v += 0.5 * self.lambda * self.lambda * (self.alpha - 1.0) * e * e * u * u;
        }
        v
    }

    /// First derivative of the predictor with respect to `g`.
    fn d1(&self, g: f64, u: f64) -> f64 {
        let am1 = self.alpha - 1.0;
        let e = (am1 * g).exp();
        let mut v = 1.0 + self.lambda * am1 * e * u;
        if self.order == ExpansionOrder::Second {
            v += self.lambda * self.lambda * am1 * am1 * e * e * u * u;
        }
        v
    }

    /// Second derivative of the predictor with respect to `g`.
    fn d2(&self, g: f64, u: f64) -> f64 {
        let am1 = self.alpha - 1.0;
        let e = (am1 * g).exp();
        let mut v = self.lambda * am1 * am1 * e * u;
        if self.order == ExpansionOrder::Second {
            v += 2.0 * self.lambda * self.lambda * am1 * am1 * am1 * e * e * u * u;
        }
        v
    }
}

/// Closed-form solution of `g' = λ g^α`:
/// `g(x) = {(1-α)(λx + g0)}^{1/(1-α)}`.
pub fn subexp_solution(law: &GrowthLaw, x: f64, g0: f64) -> Result<f64> {
    let (lambda, alpha) = match *law {
        GrowthLaw::SubExponential { lambda, alpha } => (lambda, alpha),
        GrowthLaw::Exponential { .. } => {
            return Err(Error::invalid(
                "subexp_solution requires the sub-exponential law",
            ))
        }
    };
    if g0 < 0.0 {
        return Err(Error::invalid(format!(
            "g(0) must be nonnegative, got {g0}"
        )));
    }
    let base = (1.0 - alpha) * (lambda * x + g0);
    if base <= 0.0 {
        return Err(Error::Domain(format!(
            "(1-alpha)(lambda*x + g0) = {base} is not positive at x = {x}"
        )));
    }
    Ok(base.powf(1.0 / (1.0 - alpha)))
}

/// Fit the local sub-exponential growth model at `x0` on log-scale data.
///
/// Minimizes `Σ (log y_i - predictor(G, x_i - x0))^2 K_h(x_i - x0)` over the
/// single parameter `G = G(x0)` by safeguarded Newton iteration started at
/// the local constant estimate of `log y`; if step halving fails 30 times
/// the minimization falls back to golden-section on a width-10 bracket
/// around the start.
pub fn local_subexp_fit(
    logdata: &Dataset,
    order: ExpansionOrder,
    law: &GrowthLaw,
    h: f64,
    kernel: &Kernel,
    x0: f64,
) -> Result<f64> {
    let expansion = LogGrowthExpansion::new(order, law)?;

    // local constant start; this also enforces the weighted-neighborhood
    // precondition
    let start = localfit::local_poly_fit(logdata, 0, h, kernel, x0)?;

    let n = logdata.len();
    let mut weights = Vec::with_capacity(n);
    let mut offsets = Vec::with_capacity(n);
    for i in 0..n {
        let (xi, _) = logdata.point(i);
        weights.push(kernel.evaluate((xi - x0) / h) / h);
        offsets.push(xi - x0);
    }

    let objective = |g: f64| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            let r = logdata.y()[i] - expansion.predict(g, offsets[i]);
            s += r * r * weights[i];
        }
        s
    };

    let mut g = start;
    let mut fg = objective(g);
    for iteration in 0..200 {
        // gradient and curvature of the weighted objective
        let mut grad = 0.0;
        let mut hess = 0.0;
        for i in 0..n {
            let u = offsets[i];
            let r = logdata.y()[i] - expansion.predict(g, u);
            let d1 = expansion.d1(g, u);
            let d2 = expansion.d2(g, u);
            grad += -2.0 * weights[i] * r * d1;
            hess += 2.0 * weights[i] * (d1 * d1 - r * d2);
        }

        let mut step = if hess.is_finite() && hess > 0.0 {
            -grad / hess
        } else {
            // fall back to a gradient step when curvature is unusable
            -grad
        };
        if !step.is_finite() {
            return Err(Error::NonConvergence {
                what: format!(
                    "local sub-exponential fit (order {})",
                    expansion.order.as_usize()
                ),
                iterations: iteration,
                detail: format!("non-finite Newton step at G = {g}"),
            });
        }
        if step.abs() < 1e-10 {
            return Ok(g);
        }

        let mut halvings = 0;
        loop {
            let trial = g + step;
            let ft = objective(trial);
            if ft.is_finite() && ft <= fg {
                g = trial;
                fg = ft;
                break;
            }
            halvings += 1;
            if halvings > 30 {
                // bracket of width 10 around the start
                let g_best = crate::golden::minimize(objective, start - 5.0, start + 5.0, 1e-12);
                return Ok(g_best);
            }
            step *= 0.5;
        }
        if step.abs() < 1e-10 {
            return Ok(g);
        }
    }

    Err(Error::NonConvergence {
        what: format!(
            "local sub-exponential fit (order {})",
            expansion.order.as_usize()
        ),
        iterations: 200,
        detail: format!("last G = {g}, objective = {fg}"),
    })
}

/// Ordinary least squares of `b` on `a`: returns (intercept, slope).
fn ols(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let n = a.len() as f64;
    let am = a.iter().sum::<f64>() / n;
    let bm = b.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..a.len() {
        sxx += (a[i] - am) * (a[i] - am);
        sxy += (a[i] - am) * (b[i] - bm);
    }
    if sxx <= 0.0 {
        return Err(Error::Estimation("regressor has zero variance".into()));
    }
    let slope = sxy / sxx;
    Ok((bm - slope * am, slope))
}

/// Loglinear initializer for the exponential model: OLS of
/// `log(max(y, clip))` on `x`, returning (intercept, slope) = (log c, λ).
pub fn loglinear_init(data: &Dataset) -> Result<(f64, f64)> {
    if data.y().iter().all(|&v| v < LOG_CLIP) {
        return Err(Error::Estimation(
            "every response lies below the positivity clip".into(),
        ));
    }
    let logs: Vec<f64> = data.y().iter().map(|&v| v.max(LOG_CLIP).ln()).collect();
    ols(data.x(), &logs)
}

/// Nonlinear least-squares fit of `y = c e^{λ x}` by Gauss-Newton with
/// Levenberg damping, initialized from the loglinear regression.
pub fn fit_nls_exponential(data: &Dataset) -> Result<(f64, f64)> {
    if data.len() < 2 {
        return Err(Error::invalid("exponential fit needs at least 2 points"));
    }
    let distinct = {
        let mut xs = data.x().to_vec();
        xs.sort_by(|a, b| a.total_cmp(b));
        xs.windows(2).any(|w| w[0] != w[1])
    };
    if !distinct {
        return Err(Error::invalid(
            "exponential fit needs at least 2 distinct x",
        ));
    }

    let (log_c, mut lambda) = loglinear_init(data)?;
    let mut c = log_c.exp();

    let sse_of = |c: f64, lambda: f64| -> f64 {
        data.x()
            .iter()
            .zip(data.y())
            .map(|(&x, &y)| {
                let r = y - c * (lambda * x).exp();
                r * r
            })
            .sum()
    };

    let mut sse = sse_of(c, lambda);
    let mut damping = 1e-3;
    for _ in 0..500 {
        // normal equations of the damped Gauss-Newton step
        let mut jtj = [[0.0_f64; 2]; 2];
        let mut jtr = [0.0_f64; 2];
        for (&x, &y) in data.x().iter().zip(data.y()) {
            let e = (lambda * x).exp();
            let r = y - c * e;
            let j0 = e;
            let j1 = c * x * e;
            jtj[0][0] += j0 * j0;
            jtj[0][1] += j0 * j1;
            jtj[1][1] += j1 * j1;
            jtr[0] += j0 * r;
            jtr[1] += j1 * r;
        }
        jtj[1][0] = jtj[0][1];

        let mut improved = false;
        for _ in 0..40 {
            let a00 = jtj[0][0] * (1.0 + damping);
            let a11 = jtj[1][1] * (1.0 + damping);
            let a01 = jtj[0][1];
            let det = a00 * a11 - a01 * a01;
            if det.abs() < 1e-300 || !det.is_finite() {
                damping *= 10.0;
                continue;
            }
            let dc = (jtr[0] * a11 - a01 * jtr[1]) / det;
            let dl = (a00 * jtr[1] - a01 * jtr[0]) / det;
            let trial_sse = sse_of(c + dc, lambda + dl);
            if trial_sse.is_finite() && trial_sse <= sse {
                c += dc;
                lambda += dl;
                let rel = (sse - trial_sse) / sse.max(1e-300);
                sse = trial_sse;
                damping = (damping * 0.3).max(1e-14);
                improved = true;
                if rel < 1e-12 {
                    return Ok((c, lambda));
                }
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            // damping saturated without a downhill step: stationary point
            return Ok((c, lambda));
        }
    }

    Err(Error::NonConvergence {
        what: "exponential nonlinear least squares".into(),
        iterations: 500,
        detail: format!("last (c, lambda) = ({c}, {lambda}), SSE = {sse}"),
    })
}

/// Estimate `α` from the slope of `log y` on `log x`: the slope estimates
/// `1/(1-α)`, so `α̂ = 1 - 1/slope`, clamped into (0, 1).
pub fn estimate_alpha(data: &Dataset) -> Result<f64> {
    if data.len() < 2 {
        return Err(Error::invalid("alpha estimation needs at least 2 points"));
    }
    if data.x().iter().any(|&v| v <= 0.0) || data.y().iter().any(|&v| v <= 0.0) {
        return Err(Error::invalid(
            "alpha estimation requires strictly positive x and y",
        ));
    }
    let lx: Vec<f64> = data.x().iter().map(|&v| v.ln()).collect();
    let ly: Vec<f64> = data.y().iter().map(|&v| v.ln()).collect();
    let (_, slope) = ols(&lx, &ly)?;
    if slope <= 0.0 {
        return Err(Error::Estimation(format!(
            "log-log slope {slope} is not positive; power-law growth model inapplicable"
        )));
    }
    Ok((1.0 - 1.0 / slope).clamp(1e-6, 1.0 - 1e-6))
}

/// Estimate `λ` by nonlinear least squares on the `g(0)`-free solution
/// `y = {(1-α̂) λ x}^{1/(1-α̂)}`: golden-section on a bracketing interval,
/// refined by safeguarded Newton steps.
pub fn estimate_lambda_subexp(data: &Dataset, alpha_hat: f64) -> Result<f64> {
    if !(alpha_hat > 0.0 && alpha_hat < 1.0) {
        return Err(Error::invalid(format!(
            "alpha_hat must lie in (0, 1), got {alpha_hat}"
        )));
    }
    if data.x().iter().any(|&v| v <= 0.0) {
        return Err(Error::invalid(
            "lambda estimation requires strictly positive x",
        ));
    }
    let beta = 1.0 / (1.0 - alpha_hat);
    let model = |x: f64, lambda: f64| ((1.0 - alpha_hat) * lambda * x).powf(beta);
    let sse = |lambda: f64| -> f64 {
        data.x()
            .iter()
            .zip(data.y())
            .map(|(&x, &y)| {
                let r = y - model(x, lambda);
                r * r
            })
            .sum()
    };

    // locate a bracket on a log-spaced grid of positive lambdas
    let grid: Vec<f64> = (0..=160)
        .map(|i| 10f64.powf(-8.0 + i as f64 * 0.1))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, &l) in grid.iter().enumerate() {
        let s = sse(l);
        if s.is_finite() && best.is_none_or(|(_, bs)| s < bs) {
            best = Some((i, s));
        }
    }
    let (imin, _) = best
        .ok_or_else(|| Error::Estimation("no positive lambda gives a finite objective".into()))?;
    if imin == 0 || imin == grid.len() - 1 || !sse(grid[imin - 1]).is_finite() {
        return Err(Error::Estimation(
            "objective has no interior bracket on the lambda grid".into(),
        ));
    }
    let (lo, hi) = (grid[imin - 1], grid[imin + 1]);

    let mut lambda = crate::golden::minimize(sse, lo, hi, 1e-13);

    // Newton polish on the SSE derivative; model derivative w.r.t. lambda is
    // m * beta / lambda.
    let mut current = sse(lambda);
    for _ in 0..30 {
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for (&x, &y) in data.x().iter().zip(data.y()) {
            let m = model(x, lambda);
            let mp = m * beta / lambda;
            let mpp = m * beta * (beta - 1.0) / (lambda * lambda);
            let r = y - m;
            d1 += -2.0 * r * mp;
            d2 += 2.0 * (mp * mp - r * mpp);
        }
        if !(d2.is_finite() && d2 > 0.0) {
            break;
        }
        let step = -d1 / d2;
        let trial = lambda + step;
        if !(trial > 0.0) {
            break;
        }
        let strial = sse(trial);
        if !(strial.is_finite() && strial <= current) {
            break;
        }
        let rel = (step / lambda).abs();
        lambda = trial;
        current = strial;
        if rel < 1e-10 {
            break;
        }
    }
    Ok(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localfit::test_util::golden_min;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn subexp_solution_substitutions() {
        let law = GrowthLaw::sub_exponential(2.0, 0.5).unwrap();
        assert_abs_diff_eq!(
            subexp_solution(&law, 1.0, 0.0).unwrap(),
            1.0,
            epsilon = 1e-12
        );

        let law = GrowthLaw::sub_exponential(0.3, 0.25).unwrap();
        let g0 = 0.8_f64;
        let expect = ((1.0 - 0.25) * g0).powf(1.0 / 0.75);
        assert_abs_diff_eq!(
            subexp_solution(&law, 0.0, g0).unwrap(),
            expect,
            epsilon = 1e-12
        );
    }

    #[test]
    fn subexp_solution_rejects_nonpositive_base() {
        let law = GrowthLaw::sub_exponential(1.0, 0.5).unwrap();
        assert!(matches!(
            subexp_solution(&law, -1.0, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn subexp_law_requires_alpha_in_unit_interval() {
        assert!(GrowthLaw::sub_exponential(1.0, 0.0).is_err());
        assert!(GrowthLaw::sub_exponential(1.0, 1.0).is_err());
        assert!(GrowthLaw::sub_exponential(1.0, 1.5).is_err());
    }

    #[test]
    fn subexp_solution_satisfies_its_differential_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 50 {
            let lambda = 0.05 + 2.0 * rng.random::<f64>();
            let alpha = 0.05 + 0.9 * rng.random::<f64>();
            let x = 0.2 + 3.0 * rng.random::<f64>();
            let law = GrowthLaw::sub_exponential(lambda, alpha).unwrap();
            let g0 = 0.1 + rng.random::<f64>();
            let dx = 1e-5 * x.max(1.0);
            let (gp, gm) = (
                subexp_solution(&law, x + dx, g0),
                subexp_solution(&law, x - dx, g0),
            );
            let (gp, gm) = match (gp, gm) {
                (Ok(a), Ok(b)) => (a, b),
                _ => continue,
            };
            let fd = (gp - gm) / (2.0 * dx);
            let g = subexp_solution(&law, x, g0).unwrap();
            let de = law.deriv1(g);
            assert_relative_eq!(fd, de, max_relative = 1e-6);
            checked += 1;
        }
    }

    #[test]
    fn log_expansion_predictor_at_zero_offset_is_g() {
        let law = GrowthLaw::sub_exponential(0.7, 0.4).unwrap();
        for order in [ExpansionOrder::First, ExpansionOrder::Second] {
            let exp = LogGrowthExpansion::new(order, &law).unwrap();
            for g in [-1.0, 0.0, 2.5] {
                assert_eq!(exp.predict(g, 0.0), g);
            }
        }
    }

    #[test]
    fn local_subexp_fit_recovers_exact_predictor_data() {
        let law = GrowthLaw::sub_exponential(0.4, 0.6).unwrap();
        let g0 = 1.3;
        for order in [ExpansionOrder::First, ExpansionOrder::Second] {
            let expansion = LogGrowthExpansion::new(order, &law).unwrap();
            let x0 = 0.5;
            let x = vec![0.2, 0.35, 0.5, 0.65, 0.8];
            let ly: Vec<f64> = x.iter().map(|&xi| expansion.predict(g0, xi - x0)).collect();
            let logdata = Dataset::new(x, ly).unwrap();
            let fit =
                local_subexp_fit(&logdata, order, &law, 0.25, &Kernel::gaussian(), x0).unwrap();
            assert_abs_diff_eq!(fit, g0, epsilon = 1e-9);
        }
    }

    #[test]
    fn local_subexp_fit_alpha_near_one_continuity_limit() {
        // As (alpha - 1) -> 0 the predictor collapses to G + lambda * u, whose
        // weighted minimizer has the closed form below. With tiny lambda * u
        // and G near zero it also agrees with the DE1-1 fit on the log data.
        let lambda = 1e-4;
        let alpha = 1.0 - 1e-12;
        let law = GrowthLaw::SubExponential { lambda, alpha };
        let x0 = 0.5;
        let x = vec![0.42, 0.47, 0.5, 0.55, 0.58];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ly: Vec<f64> = x
            .iter()
            .map(|_| 2e-4 * (rng.random::<f64>() - 0.5))
            .collect();
        let logdata = Dataset::new(x.clone(), ly.clone()).unwrap();
        let kernel = Kernel::gaussian();
        let h = 0.1;

        let fit = local_subexp_fit(&logdata, ExpansionOrder::First, &law, h, &kernel, x0).unwrap();

        // closed-form minimizer of sum w (l - G - lambda u)^2
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..x.len() {
            let w = kernel.evaluate((x[i] - x0) / h) / h;
            num += w * (ly[i] - lambda * (x[i] - x0));
            den += w;
        }
        assert_abs_diff_eq!(fit, num / den, epsilon = 1e-9);

        let de11 = localfit::de1k_fit(&logdata, 1, lambda, h, &kernel, x0).unwrap();
        assert_abs_diff_eq!(fit, de11, epsilon = 1e-6);
    }

    #[test]
    fn local_subexp_fit_order2_matches_golden_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let law = GrowthLaw::sub_exponential(0.8, 0.3).unwrap();
        let x: Vec<f64> = (0..6)
            .map(|i| 0.1 + 0.15 * i as f64 + 0.02 * rng.random::<f64>())
            .collect();
        let ly: Vec<f64> = (0..6).map(|_| rng.random::<f64>() * 2.0 - 0.5).collect();
        let logdata = Dataset::new(x.clone(), ly).unwrap();
        let (h, x0) = (0.3, 0.55);
        let kernel = Kernel::gaussian();
        let expansion = LogGrowthExpansion::new(ExpansionOrder::Second, &law).unwrap();

        let obj = |g: f64| -> f64 {
            (0..logdata.len())
                .map(|i| {
                    let (xi, li) = logdata.point(i);
                    let r = li - expansion.predict(g, xi - x0);
                    r * r * kernel.evaluate((xi - x0) / h) / h
                })
                .sum()
        };
        let oracle = golden_min(obj, -20.0, 20.0, 200);
        let fit = local_subexp_fit(&logdata, ExpansionOrder::Second, &law, h, &kernel, x0).unwrap();
        assert_abs_diff_eq!(fit, oracle, epsilon = 1e-7);
    }

    #[test]
    fn local_subexp_orders_agree_on_dense_noiseless_data_as_h_shrinks() {
        let law = GrowthLaw::sub_exponential(0.05, 0.5).unwrap();
        let x: Vec<f64> = (0..2001).map(|i| 1.0 + i as f64 * 0.0005).collect();
        let ly: Vec<f64> = x
            .iter()
            .map(|&xi| subexp_solution(&law, xi, 0.2).unwrap().ln())
            .collect();
        let logdata = Dataset::new(x, ly).unwrap();
        let kernel = Kernel::gaussian();
        let x0 = 1.5;
        // the order-1/order-2 gap shrinks like h^2; two bandwidths confirm it
        let gap = |h: f64| {
            let o1 =
                local_subexp_fit(&logdata, ExpansionOrder::First, &law, h, &kernel, x0).unwrap();
            let o2 =
                local_subexp_fit(&logdata, ExpansionOrder::Second, &law, h, &kernel, x0).unwrap();
            (o1 - o2).abs()
        };
        assert!(gap(0.012) < 2e-5);
        assert!(gap(0.003) < 1e-6);
    }

    #[test]
    fn nls_exponential_recovers_exact_models() {
        let x: Vec<f64> = (0..12).map(|i| i as f64 * 0.2).collect();

        let y: Vec<f64> = x.iter().map(|&v| v.exp()).collect();
        let (c, l) = fit_nls_exponential(&Dataset::new(x.clone(), y).unwrap()).unwrap();
        assert_abs_diff_eq!(c, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(l, 1.0, epsilon = 1e-8);

        let y: Vec<f64> = x.iter().map(|&v| 3.0 * (-2.0 * v).exp()).collect();
        let (c, l) = fit_nls_exponential(&Dataset::new(x.clone(), y).unwrap()).unwrap();
        assert_abs_diff_eq!(c, 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(l, -2.0, epsilon = 1e-8);
    }

    #[test]
    fn nls_exponential_is_scale_equivariant_in_y() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x: Vec<f64> = (0..15).map(|i| i as f64 / 14.0).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| v.exp() + 0.05 * (rng.random::<f64>() - 0.5))
            .collect();
        let data = Dataset::new(x.clone(), y.clone()).unwrap();
        let scaled = Dataset::new(x, y.iter().map(|&v| 7.0 * v).collect()).unwrap();
        let (c1, l1) = fit_nls_exponential(&data).unwrap();
        let (c2, l2) = fit_nls_exponential(&scaled).unwrap();
        assert_abs_diff_eq!(c2, 7.0 * c1, epsilon = 1e-7);
        assert_abs_diff_eq!(l2, l1, epsilon = 1e-8);
    }

    #[test]
    fn nls_exponential_beats_parameter_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let x: Vec<f64> = (0..25).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| v.exp() + 0.1 * (rng.random::<f64>() * 2.0 - 1.0))
            .collect();
        let data = Dataset::new(x, y).unwrap();
        let (c, l) = fit_nls_exponential(&data).unwrap();
        let sse = |c: f64, l: f64| -> f64 {
            data.x()
                .iter()
                .zip(data.y())
                .map(|(&xi, &yi)| {
                    let r = yi - c * (l * xi).exp();
                    r * r
                })
                .sum()
        };
        let fitted = sse(c, l);
        for i in 0..=100 {
            for j in 0..=100 {
                let cg = 0.5 + i as f64 * 0.01;
                let lg = 0.5 + j as f64 * 0.01;
                assert!(fitted <= sse(cg, lg) + 1e-12);
            }
        }
    }

    #[test]
    fn nls_exponential_rejects_all_subclip_responses() {
        let data = Dataset::new(vec![0.0, 1.0, 2.0], vec![1e-9, 1e-10, 0.0]).unwrap();
        assert!(matches!(
            fit_nls_exponential(&data),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn alpha_estimates_for_exact_power_laws() {
        let x: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let y2: Vec<f64> = x.iter().map(|&v| v * v).collect();
        let a = estimate_alpha(&Dataset::new(x.clone(), y2).unwrap()).unwrap();
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-12);

        let y4: Vec<f64> = x.iter().map(|&v| v.powi(4)).collect();
        let a = estimate_alpha(&Dataset::new(x.clone(), y4).unwrap()).unwrap();
        assert_abs_diff_eq!(a, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn alpha_invariant_to_scaling_y() {
        let x: Vec<f64> = (1..=8).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| v.powf(3.2) * 0.01).collect();
        let a = estimate_alpha(&Dataset::new(x.clone(), y.clone()).unwrap()).unwrap();
        let b = estimate_alpha(&Dataset::new(x, y.iter().map(|&v| 123.0 * v).collect()).unwrap())
            .unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn alpha_rejects_nonpositive_slope() {
        let x: Vec<f64> = (1..=6).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| 1.0 / v).collect();
        assert!(matches!(
            estimate_alpha(&Dataset::new(x, y).unwrap()),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn lambda_subexp_recovers_noiseless_model() {
        let (lambda, alpha) = (0.05, 0.5);
        let law = GrowthLaw::sub_exponential(lambda, alpha).unwrap();
        let x: Vec<f64> = (1..=12).map(|i| 2.0 * i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| subexp_solution(&law, v, 0.0).unwrap())
            .collect();
        let l = estimate_lambda_subexp(&Dataset::new(x, y).unwrap(), alpha).unwrap();
        assert_abs_diff_eq!(l, lambda, epsilon = 1e-6);
    }

    #[test]
    fn lambda_subexp_scales_inversely_with_x() {
        let alpha = 0.4;
        let law = GrowthLaw::sub_exponential(0.2, alpha).unwrap();
        let x: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| subexp_solution(&law, v, 0.0).unwrap())
            .collect();
        let l1 =
            estimate_lambda_subexp(&Dataset::new(x.clone(), y.clone()).unwrap(), alpha).unwrap();
        let s = 4.0;
        let xs: Vec<f64> = x.iter().map(|&v| s * v).collect();
        let l2 = estimate_lambda_subexp(&Dataset::new(xs, y).unwrap(), alpha).unwrap();
        assert_relative_eq!(l2, l1 / s, max_relative = 1e-6);
    }
}
