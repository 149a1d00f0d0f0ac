//! Marginal distributions of the observed process: Hansen's skewed Student-t,
//! the empirical cdf, and Gaussian-kernel cdf/density estimators.

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::roots::solve_monotone;
use crate::numerics::special::{ln_gamma_half_ratio, normal_cdf, normal_pdf, student_t_cdf, student_t_quantile};
use crate::upd::Domain;

/// A continuous marginal law with a smooth density, as needed to build
/// `U = F_X⁻¹ ∘ F_Y`.
pub trait MarginalSource: Send + Sync + Debug {
    fn cdf(&self, y: f64) -> f64;
    /// `[f, f′, f″, f‴]` at `y`.
    fn pdf_derivs(&self, y: f64) -> [f64; 4];
    fn pdf(&self, y: f64) -> f64 {
        self.pdf_derivs(y)[0]
    }
    fn quantile(&self, u: f64) -> Result<f64>;
    fn support(&self) -> Domain {
        Domain::REAL
    }
}

// ------------------------------------------------------------------- SKST

/// Parameters φ = (m, v, λ, τ) of the skewed Student-t: mean, standard
/// deviation, skewness and degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkstParams {
    pub m: f64,
    pub v: f64,
    pub lambda: f64,
    pub tau: f64,
}

impl SkstParams {
    pub const fn new(m: f64, v: f64, lambda: f64, tau: f64) -> Self {
        Self { m, v, lambda, tau }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.m, self.v, self.lambda, self.tau]
    }
}

/// Validated SKST law with its derived constants `a`, `b`, `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Skst {
    pub params: SkstParams,
    pub a: f64,
    pub b: f64,
    pub q: f64,
}

impl Skst {
    pub fn new(params: SkstParams) -> Result<Self> {
        let SkstParams { m, v, lambda, tau } = params;
        if !(tau > 2.0 && tau.is_finite()) {
            return Err(Error::Param(format!("SKST needs tau > 2, got {tau}")));
        }
        if !(lambda.abs() < 1.0) {
            return Err(Error::Param(format!("SKST needs |lambda| < 1, got {lambda}")));
        }
        if !(v > 0.0 && v.is_finite()) || !m.is_finite() {
            return Err(Error::Param(format!("SKST needs finite m and v > 0, got m={m}, v={v}")));
        }
        let q = ln_gamma_half_ratio(0.5 * tau).exp() / (std::f64::consts::PI * (tau - 2.0)).sqrt();
        let a = 4.0 * lambda * q * (tau - 2.0) / (tau - 1.0);
        let b2 = 1.0 + 3.0 * lambda * lambda - a * a;
        if !(b2 > 0.0) {
            return Err(Error::Param(format!("SKST constant b² = {b2} is not positive")));
        }
        Ok(Self { params, a, b: b2.sqrt(), q })
    }

    /// Breakpoint y = m − a·v/b between the two branches.
    pub fn breakpoint(&self) -> f64 {
        self.params.m - self.a * self.params.v / self.b
    }

    /// Standardised argument w and the chain factor dw/dy on the branch of `y`.
    #[inline]
    fn branch(&self, y: f64) -> (f64, f64, f64) {
        let SkstParams { m, v, lambda, .. } = self.params;
        let z = (y - m) / v;
        let side = if z < -self.a / self.b { 1.0 - lambda } else { 1.0 + lambda };
        ((self.b * z + self.a) / side, self.b / (v * side), side)
    }

    pub fn ln_pdf(&self, y: f64) -> f64 {
        let tau = self.params.tau;
        let (w, _, _) = self.branch(y);
        (self.b * self.q / self.params.v).ln() - 0.5 * (tau + 1.0) * (w * w / (tau - 2.0)).ln_1p()
    }

    /// Student-t cdf standardised to unit variance.
    #[inline]
    fn std_t_cdf(&self, w: f64) -> f64 {
        let tau = self.params.tau;
        student_t_cdf(w * (tau / (tau - 2.0)).sqrt(), tau)
    }

    fn std_t_quantile(&self, p: f64) -> Result<f64> {
        let tau = self.params.tau;
        Ok(student_t_quantile(p, tau)? * ((tau - 2.0) / tau).sqrt())
    }

    /// Random draw by inversion.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                if let Ok(y) = self.quantile(u) {
                    return y;
                }
            }
        }
    }
}

impl MarginalSource for Skst {
    fn cdf(&self, y: f64) -> f64 {
        let lambda = self.params.lambda;
        let (w, _, _) = self.branch(y);
        if y < self.breakpoint() {
            (1.0 - lambda) * self.std_t_cdf(w)
        } else {
            0.5 * (1.0 - lambda) + (1.0 + lambda) * (self.std_t_cdf(w) - 0.5)
        }
    }

    fn pdf_derivs(&self, y: f64) -> [f64; 4] {
        let tau = self.params.tau;
        let r = tau - 2.0;
        let p = 0.5 * (tau + 1.0);
        let (w, c, _) = self.branch(y);
        let f = self.ln_pdf(y).exp();
        let d = r + w * w;
        let l1 = -2.0 * p * w / d;
        let l2 = -2.0 * p * (r - w * w) / (d * d);
        let l3 = 4.0 * p * w * (3.0 * r - w * w) / (d * d * d);
        [f, f * l1 * c, f * (l1 * l1 + l2) * c * c, f * (l1 * l1 * l1 + 3.0 * l1 * l2 + l3) * c * c * c]
    }

    fn pdf(&self, y: f64) -> f64 {
        self.ln_pdf(y).exp()
    }

    fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain { x: u, lo: 0.0, hi: 1.0 });
        }
        let SkstParams { m, v, lambda, .. } = self.params;
        let split = 0.5 * (1.0 - lambda);
        let (w, side) = if u < split {
            (self.std_t_quantile(u / (1.0 - lambda))?, 1.0 - lambda)
        } else {
            (self.std_t_quantile(0.5 + (u - split) / (1.0 + lambda))?, 1.0 + lambda)
        };
        Ok(m + v * (side * w - self.a) / self.b)
    }
}

// ------------------------------------------------------------------- empirical cdf

/// Empirical cdf `#{Y_i ≤ y} / N`, clamped to `[1/(2N), 1 − 1/(2N)]` so that
/// quantile transforms stay finite.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl EmpiricalCdf {
    pub fn new(data: &[f64]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::DegenerateSample("empty sample".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("sample contains non-finite values".into()));
        }
        let mut sorted = data.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        Ok(Self { sorted, lo: 0.5 / n, hi: 1.0 - 0.5 / n })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn clamp_bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Unclamped step function.
    pub fn raw(&self, y: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= y) as f64 / self.sorted.len() as f64
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.raw(y).clamp(self.lo, self.hi)
    }

    /// Clamped values at each observation, in data order. These depend on the
    /// data only through their ranks.
    pub fn pseudo_observations(data: &[f64]) -> Result<Vec<f64>> {
        let ecdf = Self::new(data)?;
        Ok(data.iter().map(|&y| ecdf.eval(y)).collect())
    }
}

// ------------------------------------------------------------------- kernel estimators

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Gaussian,
}

impl Kernel {
    /// ∫ z² K(z) dz.
    pub fn second_moment(&self) -> f64 {
        1.0
    }

    /// ∫ K(z)² dz.
    pub fn roughness(&self) -> f64 {
        0.5 / std::f64::consts::PI.sqrt()
    }

    /// ∫ K′(z)² dz.
    pub fn derivative_roughness(&self) -> f64 {
        0.25 / std::f64::consts::PI.sqrt()
    }

    /// Standardised half-width beyond which the kernel is negligible.
    fn reach(&self) -> f64 {
        9.0
    }

    /// `[K, K′, K″, K‴]` at z.
    #[inline]
    pub fn derivs(&self, z: f64) -> [f64; 4] {
        let phi = normal_pdf(z);
        [phi, -z * phi, (z * z - 1.0) * phi, -(z * z * z - 3.0 * z) * phi]
    }

    #[inline]
    pub fn integrated(&self, z: f64) -> f64 {
        normal_cdf(z)
    }
}

/// Kernel-smoothed cdf F̂ and density f̂ (with three derivatives).
#[derive(Debug, Clone)]
pub struct KernelEstimate {
    sorted: Vec<f64>,
    h: f64,
    kernel: Kernel,
}

impl KernelEstimate {
    pub fn new(data: &[f64], h: f64) -> Result<Self> {
        Self::with_kernel(data, h, Kernel::Gaussian)
    }

    pub fn with_kernel(data: &[f64], h: f64, kernel: Kernel) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Bandwidth(h));
        }
        if data.is_empty() {
            return Err(Error::DegenerateSample("empty sample".into()));
        }
        let mut sorted = data.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted, h, kernel })
    }

    /// Estimator with Silverman's bandwidth times `factor`.
    pub fn silverman(data: &[f64], factor: f64) -> Result<Self> {
        Self::new(data, silverman_bandwidth(data, factor)?)
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn data(&self) -> &[f64] {
        &self.sorted
    }

    /// Index range of observations within the kernel's reach of `y`.
    #[inline]
    fn window(&self, y: f64) -> (usize, usize) {
        let r = self.kernel.reach() * self.h;
        let a = self.sorted.partition_point(|v| *v < y - r);
        let b = self.sorted.partition_point(|v| *v <= y + r);
        (a, b)
    }

    /// `[f̂, f̂′, f̂″, f̂‴]` at `y`.
    pub fn density_derivs(&self, y: f64) -> [f64; 4] {
        let (a, b) = self.window(y);
        let mut acc = [0.0; 4];
        for &yi in &self.sorted[a..b] {
            let k = self.kernel.derivs((y - yi) / self.h);
            for (s, v) in acc.iter_mut().zip(k) {
                *s += v;
            }
        }
        let n = self.sorted.len() as f64;
        let mut scale = 1.0 / (n * self.h);
        for s in acc.iter_mut() {
            *s *= scale;
            scale /= self.h;
        }
        acc
    }

    /// Derivative of order `order` (0 = density).
    pub fn density_derivative(&self, y: f64, order: usize) -> Result<f64> {
        if order > 3 {
            return Err(Error::Derivative(format!("kernel derivative of order {order}")));
        }
        Ok(self.density_derivs(y)[order])
    }

    /// F̂(y) = mean of 𝒦((y − Y_i)/h).
    pub fn cdf_value(&self, y: f64) -> f64 {
        let (a, b) = self.window(y);
        let mut s = a as f64;
        for &yi in &self.sorted[a..b] {
            s += self.kernel.integrated((y - yi) / self.h);
        }
        s / self.sorted.len() as f64
    }
}

impl MarginalSource for KernelEstimate {
    fn cdf(&self, y: f64) -> f64 {
        self.cdf_value(y)
    }

    fn pdf_derivs(&self, y: f64) -> [f64; 4] {
        self.density_derivs(y)
    }

    fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain { x: u, lo: 0.0, hi: 1.0 });
        }
        let mid = self.sorted[self.sorted.len() / 2];
        solve_monotone(|y| self.cdf_value(y), u, f64::NEG_INFINITY, f64::INFINITY, mid, 1e-12 * self.h)
    }
}

/// Silverman's rule of thumb `factor · 1.06 · σ̂ · n^(−1/5)`, with σ̂ the sample
/// standard deviation.
pub fn silverman_bandwidth(data: &[f64], factor: f64) -> Result<f64> {
    if data.len() < 2 {
        return Err(Error::DegenerateSample("need at least two observations".into()));
    }
    if !(factor > 0.0) {
        return Err(Error::Bandwidth(factor));
    }
    let sd = sample_sd(data);
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::DegenerateSample("sample standard deviation is zero".into()));
    }
    Ok(factor * 1.06 * sd * (data.len() as f64).powf(-0.2))
}

pub(crate) fn sample_sd(data: &[f64]) -> f64 {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    (data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::{integrate_value, QuadSpec};

    const CALIBRATED: SkstParams = SkstParams::new(0.0835, 0.0358, 0.5193, 25.3708);

    #[test]
    fn skst_symmetric_value() {
        let s = Skst::new(SkstParams::new(0.0, 1.0, 0.0, 5.0)).unwrap();
        assert!((s.pdf(0.0) - 0.490_07).abs() < 5e-6);
        assert!((s.pdf(0.7) - s.pdf(-0.7)).abs() < 1e-15);
        assert_eq!(s.cdf(0.0), 0.5);
    }

    #[test]
    fn skst_rejects_bad_params() {
        assert!(Skst::new(SkstParams::new(0.0, 1.0, 0.0, 2.0)).is_err());
        assert!(Skst::new(SkstParams::new(0.0, 1.0, 1.0, 5.0)).is_err());
        assert!(Skst::new(SkstParams::new(0.0, -1.0, 0.0, 5.0)).is_err());
    }

    #[test]
    fn skst_calibrated_moments_and_cdf() {
        let s = Skst::new(CALIBRATED).unwrap();
        let spec = QuadSpec::tight();
        let total = integrate_value(|y| s.pdf(y), f64::NEG_INFINITY, f64::INFINITY, &spec).unwrap();
        assert!((total - 1.0).abs() < 1e-8);
        let mean = integrate_value(|y| y * s.pdf(y), f64::NEG_INFINITY, f64::INFINITY, &spec).unwrap();
        let var = integrate_value(|y| (y - mean).powi(2) * s.pdf(y), f64::NEG_INFINITY, f64::INFINITY, &spec)
            .unwrap();
        assert!((mean - CALIBRATED.m).abs() < 1e-6);
        assert!((var - CALIBRATED.v * CALIBRATED.v).abs() < 1e-6);
        for y in [0.0, 0.05, s.breakpoint(), 0.1, 0.2] {
            let by_quad = integrate_value(|t| s.pdf(t), f64::NEG_INFINITY, y, &spec).unwrap();
            assert!((by_quad - s.cdf(y)).abs() < 1e-7, "y={y}");
        }
    }

    #[test]
    fn skst_derivatives_match_finite_differences() {
        let s = Skst::new(CALIBRATED).unwrap();
        for y in [-0.02, 0.06, 0.15] {
            let d = s.pdf_derivs(y);
            let h = 1e-6;
            for k in 1..4 {
                let fd = (s.pdf_derivs(y + h)[k - 1] - s.pdf_derivs(y - h)[k - 1]) / (2.0 * h);
                assert!((fd - d[k]).abs() < 1e-5 * d[k].abs().max(1.0), "y={y} k={k}: {fd} vs {}", d[k]);
            }
        }
    }

    #[test]
    fn empirical_cdf_examples() {
        let e = EmpiricalCdf::new(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(e.eval(2.5), 0.5);
        assert_eq!(e.eval(0.0), 0.125);
        assert_eq!(e.eval(4.0), 0.875);
    }

    #[test]
    fn kernel_single_point() {
        let k = KernelEstimate::new(&[0.0], 1.0).unwrap();
        assert!((k.density_derivs(0.0)[0] - 0.398_942_3).abs() < 1e-7);
        assert!(KernelEstimate::new(&[0.0], 0.0).is_err());
    }

    #[test]
    fn kernel_derivatives_consistent() {
        let data: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64 / 101.0).powi(2)).collect();
        let k = KernelEstimate::new(&data, 0.08).unwrap();
        let h = 1e-5;
        for y in [0.1, 0.35, 0.8] {
            let d = k.density_derivs(y);
            assert!(((k.cdf_value(y + h) - k.cdf_value(y - h)) / (2.0 * h) - d[0]).abs() < 1e-6 / 0.08);
            for o in 1..4 {
                let fd = (k.density_derivs(y + h)[o - 1] - k.density_derivs(y - h)[o - 1]) / (2.0 * h);
                assert!((fd - d[o]).abs() < 1e-4 * d[o].abs().max(1.0), "order {o}");
            }
        }
        let total = integrate_value(|y| k.density_derivs(y)[0], f64::NEG_INFINITY, f64::INFINITY, &QuadSpec::tight())
            .unwrap();
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn silverman_rules() {
        let data: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let h1 = silverman_bandwidth(&data, 1.0).unwrap();
        assert!((silverman_bandwidth(&data, 1.5).unwrap() / h1 - 1.5).abs() < 1e-14);
        assert!(silverman_bandwidth(&[2.0; 10], 1.0).is_err());
    }
}
