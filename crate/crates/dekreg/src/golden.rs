//! Golden-section minimization of a scalar function on a bracket.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimize `f` on `[a, b]`, shrinking the bracket until its width falls
/// below `tol` relative to the bracket scale. Returns the bracket midpoint.
pub fn minimize<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..400 {
        if (b - a).abs() <= tol * (a.abs() + b.abs()).max(1.0) {
            break;
        }
        // NaN objectives are pushed out of the bracket like high values
        if f1 < f2 || f2.is_nan() {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}
