//! Scalar quadrature helpers for the nonlocal coefficient integrals.

/// Composite Simpson rule with `panels` subintervals (rounded up to even).
pub fn composite_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = if panels % 2 == 0 { panels.max(2) } else { panels + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    /// accumulated Richardson error estimate
    pub error_bound: f64,
}

/// Adaptive Simpson with a Richardson acceptance test. The error bound is the
/// sum of the accepted per-interval estimates; depth exhaustion inflates it
/// rather than failing, so callers can compare against their tolerance.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: u32) -> QuadResult {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let s = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, m, b, fa, fm, fb, s, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    m: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    s_whole: f64,
    tol: f64,
    depth: u32,
) -> QuadResult {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let s_left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let s_right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = s_left + s_right - s_whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        let penalty = if depth == 0 && diff.abs() > 15.0 * tol { diff.abs() } else { 0.0 };
        return QuadResult {
            value: s_left + s_right + diff / 15.0,
            error_bound: diff.abs() / 15.0 + penalty,
        };
    }
    let l = rec(f, a, lm, m, fa, flm, fm, s_left, 0.5 * tol, depth - 1);
    let r = rec(f, m, rm, b, fm, frm, fb, s_right, 0.5 * tol, depth - 1);
    QuadResult { value: l.value + r.value, error_bound: l.error_bound + r.error_bound }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_exact_on_cubics() {
        let v = composite_simpson(&|x| x * x * x - 2.0 * x, 0.0, 2.0, 2);
        assert!((v - (4.0 - 4.0)).abs() < 1e-14);
    }

    #[test]
    fn adaptive_matches_analytic_integrals() {
        let r = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12, 40);
        assert!((r.value - 2.0).abs() < 1e-11, "{}", r.value);
        assert!(r.error_bound < 1e-10);
        let r = adaptive_simpson(&|x: f64| (-x * x).exp(), -6.0, 6.0, 1e-12, 45);
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn adaptive_handles_kinks() {
        let r = adaptive_simpson(&|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-12, 45);
        let exact = 0.3 * 0.3 / 2.0 + 0.7 * 0.7 / 2.0;
        assert!((r.value - exact).abs() < 1e-10);
    }
}
