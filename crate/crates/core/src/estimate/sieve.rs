//! Log-spline sieve densities for the marginal of Y.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::MarginalSource;
use crate::numerics::optimize::{bfgs, nelder_mead, BfgsOptions, NelderMeadOptions};
use crate::numerics::quadrature::gauss_legendre;
use crate::numerics::roots::solve_monotone;
use crate::upd::Domain;

/// Sieve space: `knots` uniform cubic B-splines on the data range padded by
/// `padding` of its width on each side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SieveSpec {
    pub knots: usize,
    pub padding: f64,
    /// Gauss–Legendre nodes per knot interval.
    pub quadrature_nodes: usize,
}

impl Default for SieveSpec {
    fn default() -> Self {
        Self { knots: 8, padding: 0.05, quadrature_nodes: 16 }
    }
}

impl SieveSpec {
    pub fn validate(&self) -> Result<()> {
        if self.knots < 4 {
            return Err(Error::Param(format!("a cubic log-spline needs at least 4 basis functions, got {}", self.knots)));
        }
        if !(self.padding > 0.0) {
            return Err(Error::Param("sieve padding must be positive".into()));
        }
        if self.quadrature_nodes < 4 {
            return Err(Error::Param("too few quadrature nodes".into()));
        }
        Ok(())
    }

    /// Support (lo, hi) covering `data` plus padding.
    pub fn support(&self, data: &[f64]) -> Result<(f64, f64)> {
        let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(Error::DegenerateSample("sieve support needs a non-constant sample".into()));
        }
        let pad = self.padding * (hi - lo);
        Ok((lo - pad, hi + pad))
    }
}

/// Uniform cubic B-spline pieces on a local coordinate t ∈ [0, 1], with
/// derivatives in t up to order three.
fn pieces(t: f64) -> [[f64; 4]; 4] {
    let s = 1.0 - t;
    [
        [s * s * s / 6.0, (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0, (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0, t * t * t / 6.0],
        [-s * s / 2.0, (3.0 * t * t - 4.0 * t) / 2.0, (-3.0 * t * t + 2.0 * t + 1.0) / 2.0, t * t / 2.0],
        [s, 3.0 * t - 2.0, -3.0 * t + 1.0, t],
        [-1.0, 3.0, -3.0, 1.0],
    ]
}

/// f(y) ∝ exp(Σ c_k B_k(y)) on a bounded support.
#[derive(Debug, Clone)]
pub struct LogSplineDensity {
    lo: f64,
    hi: f64,
    coefficients: Vec<f64>,
    ln_norm: f64,
    /// Probability mass below each knot.
    cumulative: Vec<f64>,
    gl: (Vec<f64>, Vec<f64>),
}

impl LogSplineDensity {
    /// Normalises the spline with coefficients `c` on (lo, hi).
    pub fn new(lo: f64, hi: f64, coefficients: Vec<f64>, nodes: usize) -> Result<Self> {
        if coefficients.len() < 4 || !(hi > lo) {
            return Err(Error::Param("invalid log-spline specification".into()));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Param("non-finite log-spline coefficient".into()));
        }
        let (x, w) = gauss_legendre(nodes);
        let mut d = Self { lo, hi, coefficients, ln_norm: 0.0, cumulative: Vec::new(), gl: (x.clone(), w.clone()) };
        let h = d.width();
        let intervals = d.intervals();
        let mut masses = Vec::with_capacity(intervals);
        let mut peak = f64::NEG_INFINITY;
        let mut logs = Vec::with_capacity(intervals * nodes);
        for j in 0..intervals {
            for &xi in &x {
                let v = d.log_unnormalised(lo + h * (j as f64 + 0.5 * (xi + 1.0)));
                peak = peak.max(v);
                logs.push(v);
            }
        }
        for j in 0..intervals {
            let m: f64 = (0..nodes).map(|k| w[k] * (logs[j * nodes + k] - peak).exp()).sum::<f64>() * 0.5 * h;
            masses.push(m);
        }
        let total: f64 = masses.iter().sum();
        d.ln_norm = peak + total.ln();
        let mut cum = Vec::with_capacity(intervals + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for m in masses {
            acc += m / total;
            cum.push(acc);
        }
        d.cumulative = cum;
        Ok(d)
    }

    fn intervals(&self) -> usize {
        self.coefficients.len() - 3
    }

    fn width(&self) -> f64 {
        (self.hi - self.lo) / self.intervals() as f64
    }

    fn locate(&self, y: f64) -> (usize, f64) {
        let s = (y - self.lo) / self.width();
        let j = (s.floor().max(0.0) as usize).min(self.intervals() - 1);
        (j, s - j as f64)
    }

    /// Spline value and y-derivatives `[s, s′, s″, s‴]`.
    fn spline_derivs(&self, y: f64) -> [f64; 4] {
        let (j, t) = self.locate(y);
        let p = pieces(t);
        let h = self.width();
        let mut out = [0.0; 4];
        let mut scale = 1.0;
        for (order, row) in p.iter().enumerate() {
            out[order] = (0..4).map(|k| self.coefficients[j + k] * row[k]).sum::<f64>() * scale;
            scale /= h;
        }
        out
    }

    fn log_unnormalised(&self, y: f64) -> f64 {
        self.spline_derivs(y)[0]
    }

    pub fn support_bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn ln_pdf(&self, y: f64) -> f64 {
        if y < self.lo || y > self.hi {
            return f64::NEG_INFINITY;
        }
        self.log_unnormalised(y) - self.ln_norm
    }

    /// Total mass by the same quadrature used for the cdf.
    pub fn total_mass(&self) -> f64 {
        *self.cumulative.last().expect("cumulative")
    }
}

impl MarginalSource for LogSplineDensity {
    fn cdf(&self, y: f64) -> f64 {
        if y <= self.lo {
            return 0.0;
        }
        if y >= self.hi {
            return 1.0;
        }
        let (j, _) = self.locate(y);
        let a = self.lo + j as f64 * self.width();
        let (x, w) = (&self.gl.0, &self.gl.1);
        let half = 0.5 * (y - a);
        let part: f64 = x.iter().zip(w).map(|(xi, wi)| wi * self.ln_pdf(a + half * (xi + 1.0)).exp()).sum::<f64>() * half;
        (self.cumulative[j] + part).clamp(0.0, 1.0)
    }

    fn pdf_derivs(&self, y: f64) -> [f64; 4] {
        if y < self.lo || y > self.hi {
            return [0.0; 4];
        }
        let [s, s1, s2, s3] = self.spline_derivs(y);
        let f = (s - self.ln_norm).exp();
        [f, f * s1, f * (s2 + s1 * s1), f * (s3 + 3.0 * s1 * s2 + s1 * s1 * s1)]
    }

    fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain { x: u, lo: 0.0, hi: 1.0 });
        }
        let mid = 0.5 * (self.lo + self.hi);
        solve_monotone(|y| self.cdf(y), u, self.lo, self.hi, mid, 1e-13 * (self.hi - self.lo))
    }

    fn support(&self) -> Domain {
        Domain { lo: self.lo, hi: self.hi }
    }
}

/// Maps K − 1 free values to coefficients with the first fixed at zero
/// (the normalising constant absorbs a common shift).
pub(crate) fn coefficients_from_free(z: &[f64]) -> Vec<f64> {
    std::iter::once(0.0).chain(z.iter().copied()).collect()
}

/// Starting coefficients matching a normal density with the sample moments.
fn normal_start(data: &[f64], lo: f64, hi: f64, k: usize) -> Vec<f64> {
    let n = data.len() as f64;
    let m = data.iter().sum::<f64>() / n;
    let sd = (data.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt().max(1e-12);
    let h = (hi - lo) / (k - 3) as f64;
    let c: Vec<f64> = (0..k).map(|i| -0.5 * ((lo + (i as f64 - 1.0) * h - m) / sd).powi(2)).collect();
    c.iter().skip(1).map(|v| v - c[0]).collect()
}

/// I.i.d. maximum-likelihood log-spline fit of `data`.
pub fn fit_log_spline(data: &[f64], spec: &SieveSpec) -> Result<LogSplineDensity> {
    spec.validate()?;
    let (lo, hi) = spec.support(data)?;
    let objective = |z: &[f64]| match LogSplineDensity::new(lo, hi, coefficients_from_free(z), spec.quadrature_nodes) {
        Ok(d) => -data.iter().map(|&y| d.ln_pdf(y)).sum::<f64>() / data.len() as f64,
        Err(_) => f64::INFINITY,
    };
    let z0 = normal_start(data, lo, hi, spec.knots);
    let nm = nelder_mead(&objective, &z0, &NelderMeadOptions { max_iter: 4000, ..Default::default() });
    let polished = bfgs(&objective, &nm.x, &BfgsOptions { max_iter: 200, ..Default::default() });
    let best = if polished.f <= nm.f { polished.x } else { nm.x };
    LogSplineDensity::new(lo, hi, coefficients_from_free(&best), spec.quadrature_nodes)
}
