//! Bracketed scalar root finding.

use crate::error::{Error, Result};

/// Brent's method on a bracket `[a, b]` with `f(a)` and `f(b)` of opposite sign.
pub fn brent<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, x_tol: f64, max_iter: usize) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::Convergence(format!(
            "root not bracketed on [{a}, {b}] (f = {fa}, {fb})"
        )));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * x_tol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(Error::Convergence(format!("brent exceeded {max_iter} iterations")))
}

/// Solve `g(x) = target` for a nondecreasing `g` on the open interval `(lo, hi)`,
/// either end possibly infinite. A bracket is grown outward from `start`.
pub fn solve_monotone<F: Fn(f64) -> f64>(
    g: F,
    target: f64,
    lo: f64,
    hi: f64,
    start: f64,
    x_tol: f64,
) -> Result<f64> {
    let h = |x: f64| g(x) - target;
    let h0 = h(start);
    if h0 == 0.0 {
        return Ok(start);
    }
    let mut step = if start.abs() > 1.0 { 0.1 * start.abs() } else { 0.1 };
    let mut inner = start;
    let mut outer;
    let going_up = h0 < 0.0;
    let mut iter = 0;
    loop {
        iter += 1;
        if iter > 400 {
            return Err(Error::Convergence(format!(
                "could not bracket level {target} starting from {start}"
            )));
        }
        let candidate = if going_up { inner + step } else { inner - step };
        outer = if going_up && candidate >= hi {
            // approach a finite upper bound geometrically
            inner + 0.5 * (hi - inner)
        } else if !going_up && candidate <= lo {
            inner - 0.5 * (inner - lo)
        } else {
            candidate
        };
        let ho = h(outer);
        if ho.is_nan() {
            return Err(Error::Convergence(format!("NaN while bracketing at {outer}")));
        }
        if (going_up && ho >= 0.0) || (!going_up && ho <= 0.0) {
            break;
        }
        if outer == inner {
            return Err(Error::Convergence(format!(
                "bracket collapsed at {outer} for level {target}"
            )));
        }
        inner = outer;
        step *= 2.0;
    }
    let (a, b) = if going_up { (inner, outer) } else { (outer, inner) };
    brent(h, a, b, x_tol, 200)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14, 100).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn unbracketed_is_an_error() {
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 50).is_err());
    }

    #[test]
    fn monotone_solver_half_line() {
        let r = solve_monotone(|x| x.ln(), 5.0, 0.0, f64::INFINITY, 1.0, 1e-13).unwrap();
        assert!((r - 5f64.exp()).abs() < 1e-9);
        let r = solve_monotone(|x| x.ln(), -30.0, 0.0, f64::INFINITY, 1.0, 1e-20).unwrap();
        assert!((r / (-30f64).exp() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn monotone_solver_bounded() {
        let r = solve_monotone(|x| x * x, 0.81, 0.0, 1.0, 0.5, 1e-14).unwrap();
        assert!((r - 0.9).abs() < 1e-12);
    }
}
