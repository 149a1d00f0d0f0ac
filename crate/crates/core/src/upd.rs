//! Underlying parametric diffusions (UPDs): drift and diffusion coefficients,
//! scale and stationary densities, and transition densities.
//!
//! Closed forms are used for the OU and CIR families; every other model falls
//! back to adaptive quadrature, root finding and sub-stepped Euler kernels.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_inside, Error, Result};
use crate::numerics::central_diff;
use crate::numerics::quadrature::{integrate, integrate_value, QuadSpec};
use crate::numerics::roots::solve_monotone;
use crate::numerics::special::{
    gamma_p, gamma_q, gamma_quantile_from, ln_bessel_i, ln_gamma, normal_cdf, normal_quantile, LN_SQRT_2PI,
};

/// Open interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    #[serde(with = "bound")]
    pub lo: f64,
    #[serde(with = "bound")]
    pub hi: f64,
}

impl Domain {
    pub const REAL: Domain = Domain { lo: f64::NEG_INFINITY, hi: f64::INFINITY };
    pub const POSITIVE: Domain = Domain { lo: 0.0, hi: f64::INFINITY };
    pub const UNIT: Domain = Domain { lo: 0.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo < hi && !lo.is_nan() && !hi.is_nan() {
            Ok(Self { lo, hi })
        } else {
            Err(Error::Param(format!("empty domain ({lo}, {hi})")))
        }
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn check(&self, x: f64) -> Result<()> {
        ensure_inside(x, self.lo, self.hi)
    }

    pub fn reflect(&self) -> Domain {
        Domain { lo: -self.hi, hi: -self.lo }
    }

    /// Default interior reference point.
    pub fn default_anchor(&self) -> f64 {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => 0.5 * (self.lo + self.hi),
            (true, false) => self.lo + 1.0,
            (false, true) => self.hi - 1.0,
            (false, false) => 0.0,
        }
    }
}

/// Serialises infinite bounds as the strings `"inf"` / `"-inf"`.
mod bound {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => other.parse().map_err(serde::de::Error::custom),
            },
        }
    }
}

/// Serialisable description of a model.
///
/// * `ou`: dX = κ(α − X)dt + σ dW on ℝ.
/// * `cir`: dX = κ(α − X)dt + σ√X dW on (0, ∞).
/// * `nldcev`: dX = Σᵢ αᵢ Xⁱ dt + σX^β dW on (0, ∞), powers from `lowest_power` upward.
/// * `nldcev_lamperti`: the unit-diffusion Lamperti form of `nldcev`,
///   drift Σᵢ α*ᵢ x^((i−β)/(1−β)) − β/(2(1−β)x).
/// * `zero_drift_flexible`: dX = exp(Σ_{i<l} βᵢXⁱ + β_l|X|^l) dW on ℝ.
/// * `unit_diffusion_polynomial`: dX = Σᵢ αᵢ Xⁱ dt + dW on ℝ (α₀ is the constant).
/// * `reflected`: X̄ = −X for the inner model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Ou { kappa: f64, alpha: f64, sigma: f64 },
    Cir { kappa: f64, alpha: f64, sigma: f64 },
    Nldcev { alphas: Vec<f64>, lowest_power: i32, beta: f64, sigma: f64 },
    NldcevLamperti { alphas: Vec<f64>, lowest_power: i32, beta: f64 },
    ZeroDriftFlexible { betas: Vec<f64> },
    UnitDiffusionPolynomial { alphas: Vec<f64> },
    Reflected { inner: Box<ModelSpec> },
}

impl ModelSpec {
    /// OU with unit stationary variance: dX = −κX dt + √(2κ) dW.
    pub fn normalized_ou(kappa: f64) -> Self {
        ModelSpec::Ou { kappa, alpha: 0.0, sigma: (2.0 * kappa).sqrt() }
    }

    /// CIR with Gamma(α, 1) stationary law: dX = κ(α − X)dt + √(2κX) dW.
    pub fn normalized_cir(kappa: f64, alpha: f64) -> Self {
        ModelSpec::Cir { kappa, alpha, sigma: (2.0 * kappa).sqrt() }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Ou { .. } => ModelKind::Ou,
            ModelSpec::Cir { .. } => ModelKind::Cir,
            ModelSpec::Nldcev { .. } => ModelKind::Nldcev,
            ModelSpec::NldcevLamperti { .. } => ModelKind::NldcevLamperti,
            ModelSpec::ZeroDriftFlexible { .. } => ModelKind::ZeroDriftFlexible,
            ModelSpec::UnitDiffusionPolynomial { .. } => ModelKind::UnitDiffusionPolynomial,
            ModelSpec::Reflected { .. } => ModelKind::Reflected,
        }
    }

    /// Flat parameter vector.
    pub fn params(&self) -> Vec<f64> {
        match self {
            ModelSpec::Ou { kappa, alpha, sigma } | ModelSpec::Cir { kappa, alpha, sigma } => {
                vec![*kappa, *alpha, *sigma]
            }
            ModelSpec::Nldcev { alphas, beta, sigma, .. } => {
                let mut v = alphas.clone();
                v.extend([*beta, *sigma]);
                v
            }
            ModelSpec::NldcevLamperti { alphas, beta, .. } => {
                let mut v = alphas.clone();
                v.push(*beta);
                v
            }
            ModelSpec::ZeroDriftFlexible { betas } => betas.clone(),
            ModelSpec::UnitDiffusionPolynomial { alphas } => alphas.clone(),
            ModelSpec::Reflected { inner } => inner.params(),
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            ModelSpec::Ou { .. } | ModelSpec::ZeroDriftFlexible { .. } | ModelSpec::UnitDiffusionPolynomial { .. } => {
                Domain::REAL
            }
            ModelSpec::Cir { .. } | ModelSpec::Nldcev { .. } | ModelSpec::NldcevLamperti { .. } => Domain::POSITIVE,
            ModelSpec::Reflected { inner } => inner.domain().reflect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Param(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let finite = |name: &str, vs: &[f64]| {
            if vs.iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(Error::Param(format!("{name} must be finite")))
            }
        };
        match self {
            ModelSpec::Ou { kappa, alpha, sigma } => {
                positive("kappa", *kappa)?;
                positive("sigma", *sigma)?;
                finite("alpha", &[*alpha])
            }
            ModelSpec::Cir { kappa, alpha, sigma } => {
                positive("kappa", *kappa)?;
                positive("alpha", *alpha)?;
                positive("sigma", *sigma)?;
                if 2.0 * kappa * alpha < sigma * sigma {
                    log::warn!(
                        "CIR Feller condition violated (2κα/σ² = {:.4} < 1)",
                        2.0 * kappa * alpha / (sigma * sigma)
                    );
                }
                Ok(())
            }
            ModelSpec::Nldcev { alphas, beta, sigma, .. } => {
                positive("sigma", *sigma)?;
                finite("alphas", alphas)?;
                finite("beta", &[*beta])?;
                if alphas.is_empty() {
                    return Err(Error::Param("NLDCEV needs at least one drift coefficient".into()));
                }
                Ok(())
            }
            ModelSpec::NldcevLamperti { alphas, beta, .. } => {
                finite("alphas", alphas)?;
                if !(*beta < 1.0) || !beta.is_finite() {
                    return Err(Error::Param(format!("Lamperti NLDCEV needs beta < 1, got {beta}")));
                }
                Ok(())
            }
            ModelSpec::ZeroDriftFlexible { betas } => {
                finite("betas", betas)?;
                if betas.is_empty() {
                    return Err(Error::Param("zero-drift model needs at least one coefficient".into()));
                }
                Ok(())
            }
            ModelSpec::UnitDiffusionPolynomial { alphas } => finite("alphas", alphas),
            ModelSpec::Reflected { inner } => inner.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ou,
    Cir,
    Nldcev,
    NldcevLamperti,
    ZeroDriftFlexible,
    UnitDiffusionPolynomial,
    Reflected,
    Custom,
}

/// Drift and squared diffusion at a point.
pub type CoeffFn = dyn Fn(f64) -> (f64, f64) + Send + Sync;

/// A model given by closures; not serialisable.
#[derive(Clone)]
pub struct CustomModel {
    pub name: String,
    pub coeffs: Arc<CoeffFn>,
}

impl fmt::Debug for CustomModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomModel({})", self.name)
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Spec(ModelSpec),
    Custom(CustomModel),
}

/// A parametric diffusion with its cached stationary normaliser.
#[derive(Debug, Clone)]
pub struct UpdModel {
    repr: Repr,
    inner: Option<Arc<UpdModel>>,
    domain: Domain,
    x_star: f64,
    numeric: bool,
    quad: QuadSpec,
    xi: Arc<OnceLock<std::result::Result<f64, String>>>,
}

/// Coefficient values with their first two derivatives: `[v, v′, v″]`.
pub type Derivs = [f64; 3];

impl UpdModel {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let domain = spec.domain();
        let inner = match &spec {
            ModelSpec::Reflected { inner } => Some(Arc::new(UpdModel::new((**inner).clone())?)),
            _ => None,
        };
        let mut model = UpdModel {
            repr: Repr::Spec(spec),
            inner,
            domain,
            x_star: domain.default_anchor(),
            numeric: false,
            quad: QuadSpec::default(),
            xi: Arc::new(OnceLock::new()),
        };
        model.x_star = model.default_x_star();
        model.sync_inner()?;
        Ok(model)
    }

    pub fn normalized_ou(kappa: f64) -> Result<Self> {
        Self::new(ModelSpec::normalized_ou(kappa))
    }

    pub fn normalized_cir(kappa: f64, alpha: f64) -> Result<Self> {
        Self::new(ModelSpec::normalized_cir(kappa, alpha))
    }

    /// A model from a closure returning `(μ, σ²)`. Derivatives are taken numerically
    /// and all densities use the generic quadrature path.
    pub fn custom<F>(name: impl Into<String>, domain: Domain, coeffs: F) -> Self
    where
        F: Fn(f64) -> (f64, f64) + Send + Sync + 'static,
    {
        UpdModel {
            repr: Repr::Custom(CustomModel { name: name.into(), coeffs: Arc::new(coeffs) }),
            inner: None,
            domain,
            x_star: domain.default_anchor(),
            numeric: true,
            quad: QuadSpec::default(),
            xi: Arc::new(OnceLock::new()),
        }
    }

    /// Reference point for the scale integrals.
    pub fn with_x_star(mut self, x_star: f64) -> Result<Self> {
        self.domain.check(x_star)?;
        self.x_star = x_star;
        self.xi = Arc::new(OnceLock::new());
        self.sync_inner()?;
        Ok(self)
    }

    /// Disable closed forms so that scale, stationary and cdf evaluations go
    /// through quadrature and root finding.
    pub fn force_numeric(mut self, numeric: bool) -> Self {
        self.numeric = numeric || matches!(self.repr, Repr::Custom(_));
        self.xi = Arc::new(OnceLock::new());
        if let Some(inner) = self.inner.take() {
            self.inner = Some(Arc::new((*inner).clone().force_numeric(numeric)));
        }
        self
    }

    pub fn with_quadrature(mut self, quad: QuadSpec) -> Self {
        self.quad = quad;
        self.xi = Arc::new(OnceLock::new());
        self
    }

    fn sync_inner(&mut self) -> Result<()> {
        if let Some(inner) = &self.inner {
            if inner.x_star != -self.x_star {
                let updated = (**inner).clone().with_x_star(-self.x_star)?;
                self.inner = Some(Arc::new(updated));
            }
        }
        Ok(())
    }

    fn default_x_star(&self) -> f64 {
        match &self.repr {
            Repr::Spec(ModelSpec::Ou { alpha, .. }) => *alpha,
            Repr::Spec(ModelSpec::Cir { kappa, alpha, sigma }) => {
                let (nu, omega) = cir_shape_rate(*kappa, *alpha, *sigma);
                gamma_quantile_from(nu, 0.5, None).map(|m| m / omega).unwrap_or(alpha.max(1e-3))
            }
            Repr::Spec(ModelSpec::Reflected { .. }) => -self.inner.as_ref().expect("reflected inner").x_star,
            _ => self.domain.default_anchor(),
        }
    }

    pub fn spec(&self) -> Result<&ModelSpec> {
        match &self.repr {
            Repr::Spec(s) => Ok(s),
            Repr::Custom(c) => Err(Error::NotSerializable(c.name.clone())),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match &self.repr {
            Repr::Spec(s) => s.kind(),
            Repr::Custom(_) => ModelKind::Custom,
        }
    }

    pub fn name(&self) -> String {
        match &self.repr {
            Repr::Spec(s) => format!("{:?}", s.kind()),
            Repr::Custom(c) => c.name.clone(),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Spec(s) => s.params(),
            Repr::Custom(_) => Vec::new(),
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn x_star(&self) -> f64 {
        self.x_star
    }

    pub fn quad_spec(&self) -> QuadSpec {
        self.quad
    }

    pub fn is_numeric(&self) -> bool {
        self.numeric
    }

    fn closed(&self) -> Option<&ModelSpec> {
        match &self.repr {
            Repr::Spec(s) if !self.numeric => Some(s),
            _ => None,
        }
    }

    // ---------------------------------------------------------------- coefficients

    /// `(μ(x), σ²(x))` without domain checks.
    #[inline]
    pub fn coeffs(&self, x: f64) -> (f64, f64) {
        match &self.repr {
            Repr::Custom(c) => (c.coeffs)(x),
            Repr::Spec(spec) => match spec {
                ModelSpec::Ou { kappa, alpha, sigma } => (kappa * (alpha - x), sigma * sigma),
                ModelSpec::Cir { kappa, alpha, sigma } => (kappa * (alpha - x), sigma * sigma * x),
                ModelSpec::Nldcev { alphas, lowest_power, beta, sigma } => {
                    (power_sum(alphas, *lowest_power, x), sigma * sigma * x.powf(2.0 * beta))
                }
                ModelSpec::NldcevLamperti { alphas, lowest_power, beta } => {
                    (nldcev_lt_drift(alphas, *lowest_power, *beta, x)[0], 1.0)
                }
                ModelSpec::ZeroDriftFlexible { betas } => (0.0, (2.0 * flexible_exponent(betas, x)[0]).exp()),
                ModelSpec::UnitDiffusionPolynomial { alphas } => (power_sum(alphas, 0, x), 1.0),
                ModelSpec::Reflected { .. } => {
                    let (m, s2) = self.inner.as_ref().expect("reflected inner").coeffs(-x);
                    (-m, s2)
                }
            },
        }
    }

    /// Drift and squared diffusion with domain and positivity checks.
    pub fn drift_diffusion(&self, x: f64) -> Result<(f64, f64)> {
        self.domain.check(x)?;
        let (mu, s2) = self.coeffs(x);
        if !(s2 > 0.0) || !s2.is_finite() || !mu.is_finite() {
            return Err(Error::Param(format!("σ²({x}) = {s2}, μ({x}) = {mu}")));
        }
        Ok((mu, s2))
    }

    /// `([μ, μ′, μ″], [σ², (σ²)′, (σ²)″])`.
    pub fn coeff_derivs(&self, x: f64) -> (Derivs, Derivs) {
        let spec = match &self.repr {
            Repr::Spec(s) => s,
            Repr::Custom(_) => return self.numeric_coeff_derivs(x),
        };
        match spec {
            ModelSpec::Ou { kappa, alpha, sigma } => ([kappa * (alpha - x), -kappa, 0.0], [sigma * sigma, 0.0, 0.0]),
            ModelSpec::Cir { kappa, alpha, sigma } => {
                let s2 = sigma * sigma;
                ([kappa * (alpha - x), -kappa, 0.0], [s2 * x, s2, 0.0])
            }
            ModelSpec::Nldcev { alphas, lowest_power, beta, sigma } => {
                let mut mu = [0.0; 3];
                for (j, a) in alphas.iter().enumerate() {
                    let i = (*lowest_power + j as i32) as f64;
                    mu[0] += a * x.powf(i);
                    mu[1] += a * i * x.powf(i - 1.0);
                    mu[2] += a * i * (i - 1.0) * x.powf(i - 2.0);
                }
                let s2 = sigma * sigma;
                let b2 = 2.0 * beta;
                (mu, [s2 * x.powf(b2), s2 * b2 * x.powf(b2 - 1.0), s2 * b2 * (b2 - 1.0) * x.powf(b2 - 2.0)])
            }
            ModelSpec::NldcevLamperti { alphas, lowest_power, beta } => {
                (nldcev_lt_drift(alphas, *lowest_power, *beta, x), [1.0, 0.0, 0.0])
            }
            ModelSpec::ZeroDriftFlexible { betas } => {
                let h = flexible_exponent(betas, x);
                let s2 = (2.0 * h[0]).exp();
                ([0.0; 3], [s2, 2.0 * h[1] * s2, (2.0 * h[2] + 4.0 * h[1] * h[1]) * s2])
            }
            ModelSpec::UnitDiffusionPolynomial { alphas } => {
                let mut mu = [0.0; 3];
                for (i, a) in alphas.iter().enumerate() {
                    let i = i as f64;
                    mu[0] += a * x.powf(i);
                    if i >= 1.0 {
                        mu[1] += a * i * x.powf(i - 1.0);
                    }
                    if i >= 2.0 {
                        mu[2] += a * i * (i - 1.0) * x.powf(i - 2.0);
                    }
                }
                (mu, [1.0, 0.0, 0.0])
            }
            ModelSpec::Reflected { .. } => {
                let (m, s) = self.inner.as_ref().expect("reflected inner").coeff_derivs(-x);
                ([-m[0], m[1], -m[2]], [s[0], -s[1], s[2]])
            }
        }
    }

    fn numeric_coeff_derivs(&self, x: f64) -> (Derivs, Derivs) {
        let h = 1e-4 * x.abs().max(1.0);
        // keep the stencil inside the domain
        let h = h.min(0.25 * (x - self.domain.lo)).min(0.25 * (self.domain.hi - x));
        let (m0, s0) = self.coeffs(x);
        let (mp, sp) = self.coeffs(x + h);
        let (mm, sm) = self.coeffs(x - h);
        (
            [m0, (mp - mm) / (2.0 * h), (mp - 2.0 * m0 + mm) / (h * h)],
            [s0, (sp - sm) / (2.0 * h), (sp - 2.0 * s0 + sm) / (h * h)],
        )
    }

    /// A rough mean-reversion rate near the reference point, used to size
    /// Euler sub-steps.
    pub fn reversion_rate(&self) -> f64 {
        match &self.repr {
            Repr::Spec(ModelSpec::Ou { kappa, .. } | ModelSpec::Cir { kappa, .. }) => *kappa,
            _ => {
                let (mu, _) = self.coeff_derivs(self.x_star);
                mu[1].abs().max(1e-3)
            }
        }
    }

    // ---------------------------------------------------------------- scale

    /// ln s(x) with s(x) = exp(−∫_{x*}^{x} 2μ/σ² dz).
    pub fn ln_scale_density(&self, x: f64) -> Result<f64> {
        self.domain.check(x)?;
        let xs = self.x_star;
        if let Some(spec) = self.closed() {
            let v = match spec {
                ModelSpec::Ou { kappa, alpha, sigma } => {
                    -(2.0 * kappa / (sigma * sigma)) * (alpha * (x - xs) - 0.5 * (x * x - xs * xs))
                }
                ModelSpec::Cir { kappa, alpha, sigma } => {
                    let (nu, omega) = cir_shape_rate(*kappa, *alpha, *sigma);
                    -nu * (x / xs).ln() + omega * (x - xs)
                }
                ModelSpec::Nldcev { alphas, lowest_power, beta, sigma } => {
                    let mut acc = 0.0;
                    for (j, a) in alphas.iter().enumerate() {
                        let p = (*lowest_power + j as i32) as f64 - 2.0 * beta;
                        acc += a * power_integral(p, xs, x);
                    }
                    -2.0 * acc / (sigma * sigma)
                }
                ModelSpec::NldcevLamperti { alphas, lowest_power, beta } => {
                    let mut acc = 0.0;
                    for (j, a) in alphas.iter().enumerate() {
                        let i = (*lowest_power + j as i32) as f64;
                        acc += a * power_integral((i - beta) / (1.0 - beta), xs, x);
                    }
                    acc -= beta / (2.0 * (1.0 - beta)) * (x / xs).ln();
                    -2.0 * acc
                }
                ModelSpec::ZeroDriftFlexible { .. } => 0.0,
                ModelSpec::UnitDiffusionPolynomial { alphas } => {
                    let acc: f64 = alphas.iter().enumerate().map(|(i, a)| a * power_integral(i as f64, xs, x)).sum();
                    -2.0 * acc
                }
                ModelSpec::Reflected { .. } => return self.inner.as_ref().expect("inner").ln_scale_density(-x),
            };
            return Ok(v);
        }
        let v = integrate_value(
            |z| {
                let (m, s2) = self.coeffs(z);
                2.0 * m / s2
            },
            xs,
            x,
            &self.quad,
        )?;
        Ok(-v)
    }

    pub fn scale_density(&self, x: f64) -> Result<f64> {
        self.ln_scale_density(x).map(f64::exp)
    }

    /// S(x) = ∫_{x*}^{x} s(z) dz.
    pub fn scale_measure(&self, x: f64) -> Result<f64> {
        self.domain.check(x)?;
        if matches!(self.closed(), Some(ModelSpec::ZeroDriftFlexible { .. })) {
            return Ok(x - self.x_star);
        }
        integrate_value(|z| self.ln_scale_density(z).map(f64::exp).unwrap_or(f64::NAN), self.x_star, x, &self.quad)
    }

    pub fn scale_density_and_measure(&self, x: f64) -> Result<(f64, f64)> {
        Ok((self.scale_density(x)?, self.scale_measure(x)?))
    }

    // ---------------------------------------------------------------- stationary law

    /// ξ(θ) = 1 / ∫ 1/(σ² s), so that f = ξ / (σ² s). Computed once per instance.
    pub fn xi(&self) -> Result<f64> {
        let r = self.xi.get_or_init(|| self.compute_xi().map_err(|e| e.to_string()));
        r.clone().map_err(Error::NonStationary)
    }

    fn compute_xi(&self) -> Result<f64> {
        let xs = self.x_star;
        if let Some(spec) = self.closed() {
            match spec {
                ModelSpec::Ou { .. } | ModelSpec::Cir { .. } => {
                    let (_, s2) = self.coeffs(xs);
                    return Ok(s2 * self.closed_density(xs).expect("closed density"));
                }
                ModelSpec::Reflected { .. } => return self.inner.as_ref().expect("inner").xi(),
                _ => {}
            }
        }
        let g = |x: f64| match self.ln_scale_density(x) {
            Ok(ls) => {
                let (_, s2) = self.coeffs(x);
                (-ls).exp() / s2
            }
            Err(_) => f64::NAN,
        };
        let left = integrate(g, self.domain.lo, xs, &self.quad)?;
        let right = integrate(g, xs, self.domain.hi, &self.quad)?;
        let total = left.value + right.value;
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::NonStationary(format!("normalising integral evaluated to {total}")));
        }
        // mapped quadrature can return a finite value for a divergent integral;
        // require the integrand to vanish faster than 1/|x| in infinite tails
        for far in [self.domain.lo, self.domain.hi] {
            if far.is_infinite() {
                let at = |r: f64| {
                    let x = xs + far.signum() * r * xs.abs().max(1.0);
                    g(x) * x.abs()
                };
                let (near, tail) = (at(1e4), at(1e8));
                if !tail.is_finite() || tail > 1e-3 * total || (tail > 1e-12 && tail >= near) {
                    return Err(Error::NonStationary(format!("integrand does not decay towards {far}")));
                }
            }
        }
        Ok(1.0 / total)
    }

    fn closed_density(&self, x: f64) -> Option<f64> {
        match self.closed()? {
            ModelSpec::Ou { kappa, alpha, sigma } => {
                let sd = sigma / (2.0 * kappa).sqrt();
                let z = (x - alpha) / sd;
                Some((-0.5 * z * z - LN_SQRT_2PI).exp() / sd)
            }
            ModelSpec::Cir { kappa, alpha, sigma } => {
                let (nu, omega) = cir_shape_rate(*kappa, *alpha, *sigma);
                Some(gamma_ln_pdf(nu, omega, x).exp())
            }
            _ => None,
        }
    }

    /// ln f_X(x).
    pub fn ln_stationary_density(&self, x: f64) -> Result<f64> {
        self.domain.check(x)?;
        if let Some(spec) = self.closed() {
            match spec {
                ModelSpec::Ou { kappa, alpha, sigma } => {
                    let sd = sigma / (2.0 * kappa).sqrt();
                    let z = (x - alpha) / sd;
                    return Ok(-0.5 * z * z - LN_SQRT_2PI - sd.ln());
                }
                ModelSpec::Cir { kappa, alpha, sigma } => {
                    let (nu, omega) = cir_shape_rate(*kappa, *alpha, *sigma);
                    return Ok(gamma_ln_pdf(nu, omega, x));
                }
                ModelSpec::Reflected { .. } => return self.inner.as_ref().expect("inner").ln_stationary_density(-x),
                _ => {}
            }
        }
        let xi = self.xi()?;
        let (_, s2) = self.coeffs(x);
        Ok(xi.ln() - s2.ln() - self.ln_scale_density(x)?)
    }

    pub fn stationary_density(&self, x: f64) -> Result<f64> {
        self.ln_stationary_density(x).map(f64::exp)
    }

    /// `[f, f′, f″]` using f′/f = g = (2μ − (σ²)′)/σ² and f″/f = g′ + g².
    pub fn stationary_density_derivs(&self, x: f64) -> Result<Derivs> {
        let f = self.stationary_density(x)?;
        let (mu, s) = self.coeff_derivs(x);
        let g = (2.0 * mu[0] - s[1]) / s[0];
        let dg = (2.0 * mu[1] - s[2]) / s[0] - (2.0 * mu[0] - s[1]) * s[1] / (s[0] * s[0]);
        Ok([f, f * g, f * (dg + g * g)])
    }

    /// F_X(x).
    pub fn stationary_cdf(&self, x: f64) -> Result<f64> {
        if x <= self.domain.lo {
            return Ok(0.0);
        }
        if x >= self.domain.hi {
            return Ok(1.0);
        }
        if let Some(spec) = self.closed() {
            match spec {
                ModelSpec::Ou { kappa, alpha, sigma } => {
                    return Ok(normal_cdf((x - alpha) * (2.0 * kappa).sqrt() / sigma));
                }
                ModelSpec::Cir { kappa, alpha, sigma } => {
                    let (nu, omega) = cir_shape_rate(*kappa, *alpha, *sigma);
                    return Ok(gamma_p(nu, omega * x));
                }
                ModelSpec::Reflected { .. } => {
                    return Ok(self.inner.as_ref().expect("inner").stationary_survival(-x)?);
                }
                _ => {}
            }
        }
        self.xi()?;
        let dens = |z: f64| self.ln_stationary_density(z).map(f64::exp).unwrap_or(f64::NAN);
        // integrate over the shorter tail for accuracy
        if x <= self.x_star {
            let v = integrate_value(dens, self.domain.lo, x, &self.quad)?;
            Ok(v.clamp(0.0, 1.0))
        } else {
            let v = integrate_value(dens, x, self.domain.hi, &self.quad)?;
            Ok((1.0 - v).clamp(0.0, 1.0))
        }
    }

    /// 1 − F_X(x), computed without cancellation where a closed form exists.
    pub fn stationary_survival(&self, x: f64) -> Result<f64> {
        if let Some(spec) = self.closed() {
            match spec {
                ModelSpec::Ou { kappa, alpha, sigma } => {
                    return Ok(normal_cdf(-(x - alpha) * (2.0 * kappa).sqrt() / sigma));
                }
                ModelSpec::Cir { kappa, alpha, sigma } => {
                    let (nu, omega) = cir_shape_rate(*kappa, *alpha, *sigma);
                    return Ok(if x <= 0.0 { 1.0 } else { gamma_q(nu, omega * x) });
                }
                ModelSpec::Reflected { .. } => return self.inner.as_ref().expect("inner").stationary_cdf(-x),
                _ => {}
            }
        }
        Ok(1.0 - self.stationary_cdf(x)?)
    }

    /// F_X⁻¹(u).
    pub fn stationary_quantile(&self, u: f64) -> Result<f64> {
        self.stationary_quantile_from(u, None)
    }

    /// F_X⁻¹(u) with an optional warm start (used when inverting sorted
    /// probabilities).
    pub fn stationary_quantile_from(&self, u: f64, guess: Option<f64>) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain { x: u, lo: 0.0, hi: 1.0 });
        }
        if let Some(spec) = self.closed() {
            match spec {
                ModelSpec::Ou { kappa, alpha, sigma } => {
                    return Ok(alpha + sigma / (2.0 * kappa).sqrt() * normal_quantile(u));
                }
                ModelSpec::Cir { kappa, alpha, sigma } => {
                    let (nu, omega) = cir_shape_rate(*kappa, *alpha, *sigma);
                    let g = guess.map(|g| g * omega);
                    return Ok(gamma_quantile_from(nu, u, g)? / omega);
                }
                ModelSpec::Reflected { .. } => {
                    let inner = self.inner.as_ref().expect("inner");
                    return Ok(-inner.stationary_quantile_from(1.0 - u, guess.map(|g| -g))?);
                }
                _ => {}
            }
        }
        let start = guess.filter(|g| self.domain.contains(*g)).unwrap_or(self.x_star);
        let scale = self.x_star.abs().max(1.0);
        solve_monotone(
            |x| self.stationary_cdf(x).unwrap_or(f64::NAN),
            u,
            self.domain.lo,
            self.domain.hi,
            start,
            1e-12 * scale,
        )
    }

    /// Evaluator bundle for the stationary law.
    pub fn stationary_law(&self) -> Result<StationaryLaw<'_>> {
        Ok(StationaryLaw { model: self, xi: self.xi()? })
    }

    // ---------------------------------------------------------------- transition densities

    /// Default transition method: the closed form where one exists, otherwise
    /// Euler sub-steps sized so that κ_eff·Δ/m ≤ 0.05.
    pub fn default_transition(&self, delta: f64) -> TransitionDensitySpec {
        match self.base_kind() {
            ModelKind::Ou => TransitionDensitySpec { method: TransitionMethod::ClosedFormGaussian, delta, substeps: 1 },
            ModelKind::Cir => TransitionDensitySpec { method: TransitionMethod::ClosedFormBessel, delta, substeps: 1 },
            _ => {
                let m = (self.reversion_rate() * delta / 0.05).ceil().clamp(1.0, 64.0) as usize;
                TransitionDensitySpec { method: TransitionMethod::EulerSubstep, delta, substeps: m }
            }
        }
    }

    fn base_kind(&self) -> ModelKind {
        match self.kind() {
            ModelKind::Reflected => self.inner.as_ref().expect("inner").base_kind(),
            k => k,
        }
    }

    /// ln p_X(x | x0; Δ).
    pub fn ln_transition_density(&self, x: f64, x0: f64, spec: &TransitionDensitySpec) -> Result<f64> {
        self.domain.check(x)?;
        self.domain.check(x0)?;
        spec.validate()?;
        if let Repr::Spec(ModelSpec::Reflected { .. }) = &self.repr {
            if !matches!(spec.method, TransitionMethod::EulerSubstep) {
                return self.inner.as_ref().expect("inner").ln_transition_density(-x, -x0, spec);
            }
        }
        match spec.method {
            TransitionMethod::ClosedFormGaussian | TransitionMethod::ClosedFormBessel => {
                self.ln_closed_transition(x, x0, spec.delta, spec.method)
            }
            TransitionMethod::EulerSubstep => {
                if spec.substeps == 1 {
                    Ok(self.ln_euler(x, x0, spec.delta))
                } else {
                    let dt = spec.delta / spec.substeps as f64;
                    let kernel = |z: f64, w: f64| self.ln_euler(z, w, dt).exp();
                    self.compose(&kernel, x, x0, spec.delta, spec.substeps).map(f64::ln)
                }
            }
            TransitionMethod::QuadratureChapmanKolmogorov => {
                let method = match self.base_kind() {
                    ModelKind::Ou => TransitionMethod::ClosedFormGaussian,
                    ModelKind::Cir => TransitionMethod::ClosedFormBessel,
                    _ => return Err(Error::Param("no closed-form kernel to compose for this model".into())),
                };
                if spec.substeps == 1 {
                    return self.ln_closed_transition(x, x0, spec.delta, method);
                }
                let dt = spec.delta / spec.substeps as f64;
                let kernel =
                    |z: f64, w: f64| self.ln_closed_transition(z, w, dt, method).map(f64::exp).unwrap_or(0.0);
                self.compose(&kernel, x, x0, spec.delta, spec.substeps).map(f64::ln)
            }
        }
    }

    pub fn transition_density(&self, x: f64, x0: f64, spec: &TransitionDensitySpec) -> Result<f64> {
        self.ln_transition_density(x, x0, spec).map(f64::exp)
    }

    fn ln_closed_transition(&self, x: f64, x0: f64, delta: f64, method: TransitionMethod) -> Result<f64> {
        match (&self.repr, method) {
            (Repr::Spec(ModelSpec::Ou { kappa, alpha, sigma }), TransitionMethod::ClosedFormGaussian) => {
                Ok(ou_ln_transition(*kappa, *alpha, *sigma, x, x0, delta))
            }
            (Repr::Spec(ModelSpec::Cir { kappa, alpha, sigma }), TransitionMethod::ClosedFormBessel) => {
                Ok(cir_ln_transition(*kappa, *alpha, *sigma, x, x0, delta))
            }
            (Repr::Spec(ModelSpec::Reflected { .. }), _) => {
                self.inner.as_ref().expect("inner").ln_closed_transition(-x, -x0, delta, method)
            }
            _ => Err(Error::Param(format!("{method:?} is not available for {}", self.name()))),
        }
    }

    /// Single-step Euler density: N(x0 + μ(x0)Δ, σ²(x0)Δ).
    pub fn euler_transition_density(&self, x: f64, x0: f64, delta: f64) -> Result<f64> {
        self.domain.check(x0)?;
        if !(delta > 0.0) {
            return Err(Error::Param(format!("delta must be positive, got {delta}")));
        }
        Ok(self.ln_euler(x, x0, delta).exp())
    }

    #[inline]
    fn ln_euler(&self, x: f64, x0: f64, delta: f64) -> f64 {
        let (mu, s2) = self.coeffs(x0);
        let var = s2 * delta;
        let d = x - x0 - mu * delta;
        -0.5 * d * d / var - 0.5 * var.ln() - LN_SQRT_2PI
    }

    /// Chapman–Kolmogorov composition of `m` copies of `kernel(z, w)` (density of
    /// z given w over Δ/m) on a uniform Simpson grid.
    fn compose(&self, kernel: &dyn Fn(f64, f64) -> f64, x: f64, x0: f64, delta: f64, m: usize) -> Result<f64> {
        let dt = delta / m as f64;
        let (mu0, s20) = self.coeffs(x0);
        let spread = (s20 * delta).sqrt();
        let reach = 10.0 * spread + (mu0 * delta).abs();
        let mut a = x0.min(x) - reach;
        let mut b = x0.max(x) + reach;
        let buffer = 1e-9 * (1.0 + x0.abs());
        if a <= self.domain.lo {
            a = self.domain.lo + buffer;
        }
        if b >= self.domain.hi {
            b = self.domain.hi - buffer;
        }
        // resolve the narrowest one-step kernel on the grid
        let probe = 9;
        let mut min_sd = f64::INFINITY;
        for k in 0..probe {
            let z = a + (b - a) * (k as f64 + 0.5) / probe as f64;
            let (_, s2) = self.coeffs(z);
            min_sd = min_sd.min((s2 * dt).sqrt());
        }
        let min_sd = min_sd.max((s20 * dt).sqrt() * 0.25);
        let mut n = ((b - a) / (min_sd / 6.0)).ceil() as usize;
        n = n.clamp(64, 3000);
        if n % 2 == 1 {
            n += 1;
        }
        let h = (b - a) / n as f64;
        let grid: Vec<f64> = (0..=n).map(|i| a + i as f64 * h).collect();
        let weights: Vec<f64> = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * h / 3.0
            })
            .collect();
        let mut q: Vec<f64> = grid.iter().map(|&z| kernel(z, x0)).collect();
        for _ in 1..m - 1 {
            let next: Vec<f64> = grid
                .iter()
                .map(|&z| grid.iter().zip(&weights).zip(&q).map(|((&w, &wt), &qw)| if qw > 0.0 { wt * qw * kernel(z, w) } else { 0.0 }).sum())
                .collect();
            q = next;
        }
        let v: f64 = grid.iter().zip(&weights).zip(&q).map(|((&w, &wt), &qw)| if qw > 0.0 { wt * qw * kernel(x, w) } else { 0.0 }).sum();
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err(Error::Quadrature(format!("Chapman–Kolmogorov composition gave {v}")))
        }
    }
}

/// Evaluators for the stationary law of a model.
#[derive(Debug, Clone, Copy)]
pub struct StationaryLaw<'a> {
    pub model: &'a UpdModel,
    pub xi: f64,
}

impl StationaryLaw<'_> {
    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.model.stationary_density(x)
    }
    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.model.stationary_cdf(x)
    }
    pub fn quantile(&self, u: f64) -> Result<f64> {
        self.model.stationary_quantile(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionMethod {
    ClosedFormGaussian,
    ClosedFormBessel,
    EulerSubstep,
    /// Closed-form kernel composed over `substeps` sub-intervals on a grid.
    QuadratureChapmanKolmogorov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionDensitySpec {
    pub method: TransitionMethod,
    pub delta: f64,
    #[serde(default = "one")]
    pub substeps: usize,
}

fn one() -> usize {
    1
}

impl TransitionDensitySpec {
    pub fn new(method: TransitionMethod, delta: f64, substeps: usize) -> Result<Self> {
        let s = Self { method, delta, substeps };
        s.validate()?;
        Ok(s)
    }

    pub fn euler(delta: f64, substeps: usize) -> Self {
        Self { method: TransitionMethod::EulerSubstep, delta, substeps }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Param(format!("delta must be positive, got {}", self.delta)));
        }
        if self.substeps == 0 {
            return Err(Error::Param("substeps must be at least 1".into()));
        }
        Ok(())
    }
}

// -------------------------------------------------------------------- helpers

/// Shape ν = 2κα/σ² and rate ω = 2κ/σ² of the CIR stationary gamma law.
#[inline]
pub fn cir_shape_rate(kappa: f64, alpha: f64, sigma: f64) -> (f64, f64) {
    let omega = 2.0 * kappa / (sigma * sigma);
    (omega * alpha, omega)
}

#[inline]
fn gamma_ln_pdf(shape: f64, rate: f64, x: f64) -> f64 {
    shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)
}

/// Gaussian OU transition log-density.
#[inline]
pub fn ou_ln_transition(kappa: f64, alpha: f64, sigma: f64, x: f64, x0: f64, delta: f64) -> f64 {
    let rho = (-kappa * delta).exp();
    let mean = alpha + (x0 - alpha) * rho;
    let var = sigma * sigma * (-(-2.0 * kappa * delta).exp_m1()) / (2.0 * kappa);
    let d = x - mean;
    -0.5 * d * d / var - 0.5 * var.ln() - LN_SQRT_2PI
}

/// CIR transition log-density in noncentral-χ² (Bessel) form.
#[inline]
pub fn cir_ln_transition(kappa: f64, alpha: f64, sigma: f64, x: f64, x0: f64, delta: f64) -> f64 {
    let ekd = (-kappa * delta).exp();
    let c = 2.0 * kappa / (sigma * sigma * (-(-kappa * delta).exp_m1()));
    let u = c * x0 * ekd;
    let v = c * x;
    let q = 2.0 * kappa * alpha / (sigma * sigma) - 1.0;
    c.ln() - u - v + 0.5 * q * (v / u).ln() + ln_bessel_i(q, 2.0 * (u * v).sqrt())
}

fn power_sum(coeffs: &[f64], lowest: i32, x: f64) -> f64 {
    coeffs.iter().enumerate().map(|(j, a)| a * x.powi(lowest + j as i32)).sum()
}

/// ∫_{a}^{b} zᵖ dz.
fn power_integral(p: f64, a: f64, b: f64) -> f64 {
    if (p + 1.0).abs() < 1e-14 {
        (b / a).ln()
    } else if p.fract() == 0.0 && p >= 0.0 {
        let k = p as i32 + 1;
        (b.powi(k) - a.powi(k)) / (p + 1.0)
    } else {
        (b.powf(p + 1.0) - a.powf(p + 1.0)) / (p + 1.0)
    }
}

fn nldcev_lt_drift(alphas: &[f64], lowest: i32, beta: f64, x: f64) -> Derivs {
    let c = beta / (2.0 * (1.0 - beta));
    let mut d = [-c / x, c / (x * x), -2.0 * c / (x * x * x)];
    for (j, a) in alphas.iter().enumerate() {
        let p = ((lowest + j as i32) as f64 - beta) / (1.0 - beta);
        d[0] += a * x.powf(p);
        d[1] += a * p * x.powf(p - 1.0);
        d[2] += a * p * (p - 1.0) * x.powf(p - 2.0);
    }
    d
}

/// h(x) = Σ_{i<l} βᵢxⁱ + β_l|x|^l with its first two derivatives.
fn flexible_exponent(betas: &[f64], x: f64) -> Derivs {
    let l = betas.len();
    let mut h = [0.0; 3];
    for (k, b) in betas.iter().enumerate() {
        let i = (k + 1) as f64;
        if k + 1 < l {
            h[0] += b * x.powf(i);
            h[1] += b * i * x.powf(i - 1.0);
            if i >= 2.0 {
                h[2] += b * i * (i - 1.0) * x.powf(i - 2.0);
            }
        } else {
            let ax = x.abs();
            h[0] += b * ax.powf(i);
            h[1] += b * i * ax.powf(i - 1.0) * x.signum();
            if i >= 2.0 {
                h[2] += b * i * (i - 1.0) * ax.powf(i - 2.0);
            }
        }
    }
    h
}

/// Numerical derivative of the drift of an arbitrary model (used by checks).
pub fn drift_slope(model: &UpdModel, x: f64) -> f64 {
    central_diff(|z| model.coeffs(z).0, x, 1e-5)
}
