//! Derivative-free and quasi-Newton minimisers.
//!
//! Objectives return `f64`; any non-finite value is treated as a rejected point
//! (`+∞`), which lets likelihoods signal invalid parameters without panicking.

use rand::Rng;

use super::linalg::{identity, matvec, Matrix};
use super::rng::stream;

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// ... and the simplex diameter below this.
    pub x_tol: f64,
    /// Initial simplex edge, per coordinate.
    pub step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_iter: 2000, f_tol: 1e-10, x_tol: 1e-8, step: 0.25 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
}

#[inline]
fn sanitize(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Nelder–Mead with dimension-adaptive coefficients (Gao & Han).
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, gamma, rho, shrink) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);
    let mut evals = 0usize;
    let mut eval = |x: &[f64]| {
        evals += 1;
        sanitize(f(x))
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(x0);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += if x[i].abs() > 1.0 { opts.step * x[i].abs() } else { opts.step };
        let fx = eval(&x);
        simplex.push((x, fx));
    }
    let mut converged = false;
    let mut iter = 0;
    while iter < opts.max_iter {
        iter += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if best.is_finite() && (worst - best).abs() <= opts.f_tol * (1.0 + best.abs()) && diameter <= opts.x_tol * (1.0 + simplex[0].0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))) {
            converged = true;
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect()
        };
        let xr = along(alpha);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(alpha * gamma);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let x = along(alpha * rho);
            let v = eval(&x);
            (x, v)
        } else {
            let x = along(-rho);
            let v = eval(&x);
            (x, v)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for item in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = x_best.iter().zip(&item.0).map(|(b, v)| b + shrink * (v - b)).collect();
            let v = eval(&x);
            *item = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    Minimum { x, f: fx, evaluations: evals, iterations: iter, converged }
}

/// Central-difference gradient; `None` when an evaluation is non-finite.
pub fn numeric_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], rel_step: f64) -> Option<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = rel_step * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        if !(fp.is_finite() && fm.is_finite()) {
            return None;
        }
        g[i] = (fp - fm) / (2.0 * h);
    }
    Some(g)
}

/// Central-difference Hessian.
pub fn numeric_hessian<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], rel_step: f64) -> Option<Matrix> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| rel_step * v.abs().max(1.0)).collect();
    let f0 = f(x);
    let mut hess = vec![vec![0.0; n]; n];
    let mut xp = x.to_vec();
    for i in 0..n {
        xp[i] = x[i] + h[i];
        let fp = f(&xp);
        xp[i] = x[i] - h[i];
        let fm = f(&xp);
        xp[i] = x[i];
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                xp[i] = x[i] + si * h[i];
                xp[j] = x[j] + sj * h[j];
                let v = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * h[i] * h[j]);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    if hess.iter().flatten().all(|v| v.is_finite()) {
        Some(hess)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    pub g_tol: f64,
    pub rel_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iter: 100, g_tol: 1e-7, rel_step: 1e-6 }
    }
}

/// BFGS with numeric gradients and a backtracking Armijo line search. Never
/// returns a point worse than `x0`.
pub fn bfgs<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], opts: &BfgsOptions) -> Minimum {
    let n = x0.len();
    let mut evals = 0usize;
    let mut x = x0.to_vec();
    let mut fx = sanitize(f(&x));
    evals += 1;
    let mut converged = false;
    let mut h_inv = identity(n);
    let grad = |x: &[f64], evals: &mut usize| {
        *evals += 2 * x.len();
        numeric_gradient(f, x, opts.rel_step)
    };
    let Some(mut g) = grad(&x, &mut evals) else {
        return Minimum { x, f: fx, evaluations: evals, iterations: 0, converged: false };
    };
    let mut iter = 0;
    while iter < opts.max_iter {
        iter += 1;
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm <= opts.g_tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        let mut dir: Vec<f64> = matvec(&h_inv, &g).iter().map(|v| -v).collect();
        let mut slope: f64 = dir.iter().zip(&g).map(|(d, g)| d * g).sum();
        if slope >= 0.0 {
            h_inv = identity(n);
            dir = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xt: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let ft = sanitize(f(&xt));
            evals += 1;
            if ft <= fx + 1e-4 * t * slope {
                accepted = Some((xt, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = accepted else { break };
        let Some(gn) = grad(&xn, &mut evals) else { break };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let improvement = fx - fnew;
        x = xn;
        fx = fnew;
        g = gn;
        if sy > 1e-12 {
            let hy = matvec(&h_inv, &y);
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h_inv[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        if improvement.abs() <= 1e-14 * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
    }
    Minimum { x, f: fx, evaluations: evals, iterations: iter, converged }
}

#[derive(Debug, Clone, Copy)]
pub struct MultiStartOptions {
    pub restarts: usize,
    /// Standard deviation of the Gaussian jitter applied to restart points.
    pub jitter: f64,
    pub seed: u64,
    pub nelder_mead: NelderMeadOptions,
    pub polish: bool,
    pub bfgs: BfgsOptions,
}

impl Default for MultiStartOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            jitter: 0.3,
            seed: 0x5eed,
            nelder_mead: NelderMeadOptions::default(),
            polish: true,
            bfgs: BfgsOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultiStartResult {
    pub best: Minimum,
    /// Best-so-far objective after each restart (non-increasing).
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

/// Nelder–Mead from `x0` and from `restarts - 1` jittered copies, followed by a
/// BFGS polish of the best point.
pub fn multistart<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], opts: &MultiStartOptions) -> MultiStartResult {
    let mut rng = stream(opts.seed, 0);
    let mut best: Option<Minimum> = None;
    let mut trace = Vec::with_capacity(opts.restarts.max(1));
    let mut evals = 0;
    for r in 0..opts.restarts.max(1) {
        let start: Vec<f64> = if r == 0 {
            x0.to_vec()
        } else {
            // restart around the incumbent so later runs refine rather than wander
            let centre = best.as_ref().map(|b| b.x.clone()).unwrap_or_else(|| x0.to_vec());
            centre
                .iter()
                .map(|v| {
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    v + opts.jitter * z
                })
                .collect()
        };
        let m = nelder_mead(f, &start, &opts.nelder_mead);
        evals += m.evaluations;
        if best.as_ref().is_none_or(|b| m.f < b.f) {
            best = Some(m);
        }
        trace.push(best.as_ref().map(|b| b.f).unwrap_or(f64::INFINITY));
    }
    let mut best = best.expect("at least one start");
    if opts.polish && best.f.is_finite() {
        let p = bfgs(f, &best.x, &opts.bfgs);
        evals += p.evaluations;
        if p.f <= best.f {
            best = Minimum { converged: best.converged || p.converged, iterations: best.iterations + p.iterations, ..p };
        }
        if let Some(last) = trace.last_mut() {
            *last = best.f;
        }
    }
    best.evaluations = evals;
    MultiStartResult { best, trace, evaluations: evals }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let m = nelder_mead(&rosenbrock, &[-1.2, 1.0], &NelderMeadOptions { f_tol: 1e-14, x_tol: 1e-10, ..Default::default() });
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn bfgs_quadratic() {
        let f = |x: &[f64]| 3.0 * (x[0] - 2.0).powi(2) + (x[1] + 1.0).powi(2) + x[0] * x[1];
        let m = bfgs(&f, &[0.0, 0.0], &BfgsOptions::default());
        // gradient zero: 6(x-2) + y = 0, 2(y+1) + x = 0
        let g = numeric_gradient(&f, &m.x, 1e-6).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-6), "{g:?}");
    }

    #[test]
    fn rejected_points_are_avoided() {
        let f = |x: &[f64]| if x[0] < 0.5 { f64::NAN } else { (x[0] - 1.0).powi(2) };
        let m = nelder_mead(&f, &[2.0], &NelderMeadOptions::default());
        assert!((m.x[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn multistart_trace_is_monotone() {
        let r = multistart(&rosenbrock, &[-1.2, 1.0], &MultiStartOptions::default());
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.best.f < 1e-10);
    }

    #[test]
    fn hessian_of_quadratic() {
        let f = |x: &[f64]| x[0] * x[0] + 3.0 * x[0] * x[1] + 2.0 * x[1] * x[1];
        let h = numeric_hessian(&f, &[0.3, -0.2], 1e-4).unwrap();
        assert!((h[0][0] - 2.0).abs() < 1e-6 && (h[0][1] - 3.0).abs() < 1e-6 && (h[1][1] - 4.0).abs() < 1e-6);
    }
}
