//! Derivative-free 1-D minimization: a coarse grid to find the basin, then
//! golden-section refinement inside the bracketing cells.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the minimum of a unimodal `f` on `[a, b]`.
/// Returns `(argmin, min)`; the endpoints are compared too, so monotone
/// pieces resolve to the correct end.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> Result<(f64, f64)> {
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let (fa0, fb0) = (f(a), f(b));
    let (a0, b0) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iter = 0;
    while (b - a) > tol * (1.0 + a.abs().max(b.abs())) {
        if iter == max_iter {
            let (x, v) = if fc < fd { (c, fc) } else { (d, fd) };
            return Err(Error::NonConvergence { best_arg: x, best_value: v });
        }
        iter += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let mut best = (mid, f(mid));
    for cand in [(a0, fa0), (b0, fb0)] {
        if cand.1 < best.1 {
            best = cand;
        }
    }
    if !best.1.is_finite() {
        return Err(Error::NonConvergence { best_arg: best.0, best_value: best.1 });
    }
    Ok(best)
}

/// Evaluate `f` on `n` points spaced geometrically over `[lo, hi]` (both
/// positive), then refine by golden section between the neighbours of the
/// best grid point.
pub fn grid_then_golden<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize, tol: f64) -> Result<(f64, f64)> {
    if hi <= lo {
        let v = f(lo);
        return Ok((lo, v));
    }
    let n = n.max(3);
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    let at = |i: usize| if i + 1 == n { hi } else { lo * (ratio * i as f64).exp() };
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..n {
        let v = f(at(i));
        if v < best_v {
            best_v = v;
            best = i;
        }
    }
    let a = at(best.saturating_sub(1));
    let b = at((best + 1).min(n - 1));
    golden_section(&f, a, b, tol, 500)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_minimum() {
        let (x, v) = golden_section(|x| (x - 1.3).powi(2) + 2.0, -5.0, 5.0, 1e-12, 500).unwrap();
        assert!((x - 1.3).abs() < 1e-6 && (v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_piece_resolves_to_endpoint() {
        let (x, _) = golden_section(|x| -x, 0.0, 2.0, 1e-12, 500).unwrap();
        assert_eq!(x, 2.0);
        let (x, _) = grid_then_golden(|x| 1.0 / x, 0.1, 10.0, 50, 1e-12).unwrap();
        assert_eq!(x, 10.0);
    }

    #[test]
    fn iteration_cap_reports_best() {
        let err = golden_section(|x| x * x, -1.0, 1.0, 1e-300, 3).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }
}
