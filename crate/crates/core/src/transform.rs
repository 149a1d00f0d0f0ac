//! Monotone transformations linking the latent diffusion X to the observed
//! process Y, the induced drift/diffusion and densities of Y, the implied
//! copula, and the three identification normalisations.

use std::fmt::{self, Debug};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::{MarginalSource, SkstParams};
use crate::numerics::quadrature::{integrate, integrate_value};
use crate::numerics::roots::solve_monotone;
use crate::numerics::special::{normal_pdf, normal_quantile, gamma_quantile_from};
use crate::upd::{cir_shape_rate, Domain, ModelKind, ModelSpec, TransitionDensitySpec, UpdModel};

/// A smooth, strictly increasing scalar map with derivatives up to order three.
pub trait SmoothMonotone: Send + Sync + Debug {
    /// `[T(x), T′(x), T″(x), T‴(x)]`.
    fn eval(&self, x: f64) -> Result<[f64; 4]>;
    fn inverse(&self, y: f64) -> Result<f64>;
    fn domain(&self) -> Domain;
    fn range(&self) -> Domain;

    fn value(&self, x: f64) -> Result<f64> {
        self.eval(x).map(|d| d[0])
    }
}

// ------------------------------------------------------------------ parametric maps

#[derive(Debug, Clone, Copy)]
pub struct IdentityMap(pub Domain);

impl SmoothMonotone for IdentityMap {
    fn eval(&self, x: f64) -> Result<[f64; 4]> {
        self.0.check(x)?;
        Ok([x, 1.0, 0.0, 0.0])
    }
    fn inverse(&self, y: f64) -> Result<f64> {
        self.0.check(y)?;
        Ok(y)
    }
    fn domain(&self) -> Domain {
        self.0
    }
    fn range(&self) -> Domain {
        self.0
    }
}

/// `x ↦ (x − a)/b` on ℝ, i.e. the inverse of V(x) = a + b·x.
#[derive(Debug, Clone, Copy)]
pub struct AffineInverse {
    pub a: f64,
    pub b: f64,
    pub y_domain: Domain,
}

impl SmoothMonotone for AffineInverse {
    fn eval(&self, y: f64) -> Result<[f64; 4]> {
        self.y_domain.check(y)?;
        Ok([(y - self.a) / self.b, 1.0 / self.b, 0.0, 0.0])
    }
    fn inverse(&self, x: f64) -> Result<f64> {
        Ok(self.a + self.b * x)
    }
    fn domain(&self) -> Domain {
        self.y_domain
    }
    fn range(&self) -> Domain {
        Domain { lo: (self.y_domain.lo - self.a) / self.b, hi: (self.y_domain.hi - self.a) / self.b }
    }
}

/// `y ↦ ln y`: the inverse of the exponential transform.
#[derive(Debug, Clone, Copy)]
pub struct LogMap;

impl SmoothMonotone for LogMap {
    fn eval(&self, y: f64) -> Result<[f64; 4]> {
        Domain::POSITIVE.check(y)?;
        Ok([y.ln(), 1.0 / y, -1.0 / (y * y), 2.0 / (y * y * y)])
    }
    fn inverse(&self, x: f64) -> Result<f64> {
        Ok(x.exp())
    }
    fn domain(&self) -> Domain {
        Domain::POSITIVE
    }
    fn range(&self) -> Domain {
        Domain::REAL
    }
}

/// `y ↦ δ − 1/(y − ϱ)` on (ϱ, ϱ + 1/δ): inverse of the increasing rewrite
/// `x̄ ↦ 1/(δ − x̄) + ϱ` of the decreasing map `x ↦ 1/(x + δ) + ϱ`, with x̄ = −x.
#[derive(Debug, Clone, Copy)]
pub struct ReciprocalShiftInverse {
    pub delta: f64,
    pub rho: f64,
}

impl SmoothMonotone for ReciprocalShiftInverse {
    fn eval(&self, y: f64) -> Result<[f64; 4]> {
        self.domain().check(y)?;
        let d = y - self.rho;
        Ok([self.delta - 1.0 / d, 1.0 / (d * d), -2.0 / (d * d * d), 6.0 / (d * d * d * d)])
    }
    fn inverse(&self, x: f64) -> Result<f64> {
        Domain { lo: f64::NEG_INFINITY, hi: 0.0 }.check(x)?;
        Ok(1.0 / (self.delta - x) + self.rho)
    }
    fn domain(&self) -> Domain {
        Domain { lo: self.rho, hi: self.rho + 1.0 / self.delta }
    }
    fn range(&self) -> Domain {
        Domain { lo: f64::NEG_INFINITY, hi: 0.0 }
    }
}

/// `U(y) = F_X⁻¹(F_Y(y); θ)` with analytic derivatives from the two densities.
#[derive(Debug, Clone)]
pub struct MarginalInducedMap {
    pub source: Arc<dyn MarginalSource>,
    pub model: UpdModel,
}

impl SmoothMonotone for MarginalInducedMap {
    fn eval(&self, y: f64) -> Result<[f64; 4]> {
        let u = self.source.cdf(y);
        let x = self.model.stationary_quantile(u)?;
        let [fx, dfx, d2fx] = self.model.stationary_density_derivs(x)?;
        let [fy, dfy, d2fy, _] = self.source.pdf_derivs(y);
        let u1 = fy / fx;
        let u2 = (dfy - dfx * u1 * u1) / fx;
        let u3 = (d2fy - d2fx * u1 * u1 * u1 - 3.0 * dfx * u1 * u2) / fx;
        Ok([x, u1, u2, u3])
    }
    fn inverse(&self, x: f64) -> Result<f64> {
        let u = self.model.stationary_cdf(x)?;
        self.source.quantile(u)
    }
    fn domain(&self) -> Domain {
        self.source.support()
    }
    fn range(&self) -> Domain {
        self.model.domain()
    }
}

/// The stationary law of a model viewed as a marginal for Y (f‴ by central
/// differences of the analytic f″).
#[derive(Debug, Clone)]
pub struct ModelMarginal(pub UpdModel);

impl MarginalSource for ModelMarginal {
    fn cdf(&self, y: f64) -> f64 {
        self.0.stationary_cdf(y).unwrap_or(f64::NAN)
    }
    fn pdf_derivs(&self, y: f64) -> [f64; 4] {
        let Ok([f, f1, f2]) = self.0.stationary_density_derivs(y) else { return [f64::NAN; 4] };
        let h = 1e-4 * y.abs().max(1.0);
        let f2_at = |z: f64| self.0.stationary_density_derivs(z).map(|d| d[2]).unwrap_or(f64::NAN);
        [f, f1, f2, (f2_at(y + h) - f2_at(y - h)) / (2.0 * h)]
    }
    fn quantile(&self, u: f64) -> Result<f64> {
        self.0.stationary_quantile(u)
    }
    fn support(&self) -> Domain {
        self.0.domain()
    }
}

/// `g ∘ f`.
#[derive(Debug, Clone)]
pub struct Composed {
    pub first: Arc<dyn SmoothMonotone>,
    pub then: Arc<dyn SmoothMonotone>,
}

impl SmoothMonotone for Composed {
    fn eval(&self, x: f64) -> Result<[f64; 4]> {
        let [f0, f1, f2, f3] = self.first.eval(x)?;
        let [g0, g1, g2, g3] = self.then.eval(f0)?;
        Ok([g0, g1 * f1, g2 * f1 * f1 + g1 * f2, g3 * f1 * f1 * f1 + 3.0 * g2 * f1 * f2 + g1 * f3])
    }
    fn inverse(&self, y: f64) -> Result<f64> {
        self.first.inverse(self.then.inverse(y)?)
    }
    fn domain(&self) -> Domain {
        self.first.domain()
    }
    fn range(&self) -> Domain {
        self.then.range()
    }
}

/// `T⁻¹` for a map `T`.
#[derive(Debug, Clone)]
pub struct Inverted(pub Arc<dyn SmoothMonotone>);

impl SmoothMonotone for Inverted {
    fn eval(&self, y: f64) -> Result<[f64; 4]> {
        let x = self.0.inverse(y)?;
        let [_, t1, t2, t3] = self.0.eval(x)?;
        Ok([x, 1.0 / t1, -t2 / t1.powi(3), (3.0 * t2 * t2 - t1 * t3) / t1.powi(5)])
    }
    fn inverse(&self, x: f64) -> Result<f64> {
        self.0.value(x)
    }
    fn domain(&self) -> Domain {
        self.0.range()
    }
    fn range(&self) -> Domain {
        self.0.domain()
    }
}

// ------------------------------------------------------------------ model-derived maps

/// Derivatives of σ from those of σ².
fn sigma_derivs(s2: [f64; 3]) -> [f64; 3] {
    let s = s2[0].sqrt();
    let d1 = s2[1] / (2.0 * s);
    let d2 = (s2[2] - 2.0 * d1 * d1) / (2.0 * s);
    [s, d1, d2]
}

/// Invert a map known only through its values, on its domain.
fn invert_numerically(map: &dyn SmoothMonotone, y: f64, start: f64) -> Result<f64> {
    let d = map.domain();
    let r = map.range();
    if !r.contains(y) {
        return Err(Error::Domain { x: y, lo: r.lo, hi: r.hi });
    }
    let scale = start.abs().max(1.0);
    solve_monotone(|x| map.value(x).unwrap_or(f64::NAN), y, d.lo, d.hi, start, 1e-13 * scale)
}

/// Range endpoint of ∫_{anchor}^{bound} w(z) dz, or ±∞ when the integral diverges.
fn range_end<F: Fn(f64) -> f64>(w: F, anchor: f64, bound: f64, model: &UpdModel) -> f64 {
    let sign = if bound > anchor { 1.0 } else { -1.0 };
    match integrate(w, anchor, bound, &model.quad_spec()) {
        Ok(r) if r.value.is_finite() && r.value.abs() < 1e12 => r.value,
        _ => sign * f64::INFINITY,
    }
}

/// Lamperti map γ(x) = ∫_a^x dz/σ(z).
///
/// The anchor `a` is the finite lower domain bound when 1/σ is integrable
/// there, else 0 when 0 is in the domain, else the model's reference point.
#[derive(Debug, Clone)]
pub struct LampertiMap {
    model: UpdModel,
    anchor: f64,
    range: Domain,
}

impl LampertiMap {
    pub fn new(model: &UpdModel) -> Result<Self> {
        let d = model.domain();
        let inv_sigma = |z: f64| 1.0 / model.coeffs(z).1.sqrt();
        let anchor = if d.lo.is_finite()
            && integrate(inv_sigma, d.lo, model.x_star(), &model.quad_spec()).is_ok_and(|r| r.value.is_finite())
        {
            d.lo
        } else if d.contains(0.0) {
            0.0
        } else {
            model.x_star()
        };
        let lo = if anchor == d.lo { 0.0 } else { range_end(inv_sigma, anchor, d.lo, model) };
        let hi = range_end(inv_sigma, anchor, d.hi, model);
        Ok(Self { model: model.clone(), anchor, range: Domain::new(lo, hi)? })
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }
}

impl SmoothMonotone for LampertiMap {
    fn eval(&self, x: f64) -> Result<[f64; 4]> {
        self.model.domain().check(x)?;
        let g = integrate_value(|z| 1.0 / self.model.coeffs(z).1.sqrt(), self.anchor, x, &self.model.quad_spec())?;
        let (_, s2) = self.model.coeff_derivs(x);
        let [s, s1, s_2] = sigma_derivs(s2);
        Ok([g, 1.0 / s, -s1 / (s * s), (2.0 * s1 * s1 - s * s_2) / (s * s * s)])
    }
    fn inverse(&self, y: f64) -> Result<f64> {
        // start from a local linearisation around the anchor's neighbourhood
        let start = if self.model.domain().contains(self.anchor) { self.anchor } else { self.model.x_star() };
        invert_numerically(self, y, start)
    }
    fn domain(&self) -> Domain {
        self.model.domain()
    }
    fn range(&self) -> Domain {
        self.range
    }
}

/// Scale measure S(x) = ∫_{x*}^{x} s(z) dz.
#[derive(Debug, Clone)]
pub struct ScaleMap {
    model: UpdModel,
    range: Domain,
}

impl ScaleMap {
    pub fn new(model: &UpdModel) -> Result<Self> {
        let d = model.domain();
        let s = |z: f64| model.scale_density(z).unwrap_or(f64::NAN);
        let lo = range_end(s, model.x_star(), d.lo, model);
        let hi = range_end(s, model.x_star(), d.hi, model);
        Ok(Self { model: model.clone(), range: Domain::new(lo, hi)? })
    }
}

impl SmoothMonotone for ScaleMap {
    fn eval(&self, x: f64) -> Result<[f64; 4]> {
        let s = self.model.scale_density(x)?;
        let big_s = self.model.scale_measure(x)?;
        let (mu, s2) = self.model.coeff_derivs(x);
        let r = 2.0 * mu[0] / s2[0];
        let dr = 2.0 * mu[1] / s2[0] - 2.0 * mu[0] * s2[1] / (s2[0] * s2[0]);
        Ok([big_s, s, -s * r, s * (r * r - dr)])
    }
    fn inverse(&self, y: f64) -> Result<f64> {
        invert_numerically(self, y, self.model.x_star())
    }
    fn domain(&self) -> Domain {
        self.model.domain()
    }
    fn range(&self) -> Domain {
        self.range
    }
}

/// Stationary cdf F_X as a map onto (0, 1).
#[derive(Debug, Clone)]
pub struct CdfMap {
    model: UpdModel,
}

impl CdfMap {
    pub fn new(model: &UpdModel) -> Result<Self> {
        model.xi()?;
        Ok(Self { model: model.clone() })
    }
}

impl SmoothMonotone for CdfMap {
    fn eval(&self, x: f64) -> Result<[f64; 4]> {
        let [f, f1, f2] = self.model.stationary_density_derivs(x)?;
        Ok([self.model.stationary_cdf(x)?, f, f1, f2])
    }
    fn inverse(&self, u: f64) -> Result<f64> {
        self.model.stationary_quantile(u)
    }
    fn domain(&self) -> Domain {
        self.model.domain()
    }
    fn range(&self) -> Domain {
        Domain::UNIT
    }
}

/// The diffusion followed by `T(X)`, by Itô's lemma:
/// μ̄ = μT′ + ½σ²T″ and σ̄² = σ²T′², evaluated at x = T⁻¹(x̄).
pub fn push_forward(model: &UpdModel, map: Arc<dyn SmoothMonotone>, name: &str) -> UpdModel {
    let inner = model.clone();
    let domain = map.range();
    let m = map.clone();
    UpdModel::custom(name, domain, move |xb| {
        let Ok(x) = m.inverse(xb) else { return (f64::NAN, f64::NAN) };
        let Ok([_, t1, t2, _]) = m.eval(x) else { return (f64::NAN, f64::NAN) };
        let (mu, s2) = inner.coeffs(x);
        (mu * t1 + 0.5 * s2 * t2, s2 * t1 * t1)
    })
}

// ------------------------------------------------------------------ normalisers

/// NLDCEV drift coefficients in Lamperti form:
/// α*ᵢ = αᵢ σ^((i−1)/(1−β)) (1−β)^((i−β)/(1−β)).
pub fn nldcev_star(alphas: &[f64], lowest_power: i32, beta: f64, sigma: f64) -> Vec<f64> {
    alphas
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let i = (lowest_power + j as i32) as f64;
            a * sigma.powf((i - 1.0) / (1.0 - beta)) * (1.0 - beta).powf((i - beta) / (1.0 - beta))
        })
        .collect()
}

fn closed_lamperti(spec: &ModelSpec) -> Option<ModelSpec> {
    Some(match spec {
        ModelSpec::Ou { kappa, alpha, sigma } => {
            ModelSpec::UnitDiffusionPolynomial { alphas: vec![kappa * alpha / sigma, -kappa] }
        }
        ModelSpec::Cir { kappa, alpha, sigma } => ModelSpec::NldcevLamperti {
            alphas: nldcev_star(&[kappa * alpha, -kappa], 0, 0.5, *sigma),
            lowest_power: 0,
            beta: 0.5,
        },
        ModelSpec::Nldcev { alphas, lowest_power, beta, sigma } if *beta < 1.0 => ModelSpec::NldcevLamperti {
            alphas: nldcev_star(alphas, *lowest_power, *beta, *sigma),
            lowest_power: *lowest_power,
            beta: *beta,
        },
        ModelSpec::UnitDiffusionPolynomial { .. } | ModelSpec::NldcevLamperti { .. } => spec.clone(),
        ModelSpec::Reflected { inner } => ModelSpec::Reflected { inner: Box::new(closed_lamperti(inner)?) },
        _ => return None,
    })
}

/// Lamperti normalisation: the unit-diffusion model of γ(X). Closed forms are
/// used for OU, CIR and NLDCEV; other models go through quadrature and root
/// finding.
pub fn lamperti_normalize(model: &UpdModel) -> Result<UpdModel> {
    if !model.is_numeric() {
        if let Some(spec) = model.spec().ok().and_then(closed_lamperti) {
            return UpdModel::new(spec);
        }
    }
    lamperti_normalize_numeric(model)
}

/// Lamperti normalisation through the generic quadrature path only.
pub fn lamperti_normalize_numeric(model: &UpdModel) -> Result<UpdModel> {
    let gamma = LampertiMap::new(model)?;
    let inner = model.clone();
    let map = Arc::new(gamma);
    let m = map.clone();
    let out = UpdModel::custom(format!("lamperti({})", model.name()), map.range(), move |xb| {
        let Ok(x) = m.inverse(xb) else { return (f64::NAN, f64::NAN) };
        let (mu, s2) = inner.coeff_derivs(x);
        let [s, s1, _] = sigma_derivs(s2);
        (mu[0] / s - 0.5 * s1, 1.0)
    });
    Ok(out)
}

/// Natural-scale normalisation: the zero-drift model of S(X), with
/// σ̄²(x̄) = s²σ² at S⁻¹(x̄).
pub fn natural_scale_normalize(model: &UpdModel) -> Result<UpdModel> {
    if model.kind() == ModelKind::ZeroDriftFlexible && !model.is_numeric() {
        return Ok(model.clone());
    }
    let map = Arc::new(ScaleMap::new(model)?);
    let inner = model.clone();
    let m = map.clone();
    Ok(UpdModel::custom(format!("natural_scale({})", model.name()), map.range(), move |xb| {
        let Ok(x) = m.inverse(xb) else { return (f64::NAN, f64::NAN) };
        let Ok(s) = inner.scale_density(x) else { return (f64::NAN, f64::NAN) };
        (0.0, s * s * inner.coeffs(x).1)
    }))
}

/// Cdf normalisation: the model of F_X(X) on (0, 1), with drift μf + ½σ²f′
/// and diffusion σf at F⁻¹(x̄).
pub fn cdf_normalize(model: &UpdModel) -> Result<UpdModel> {
    if !model.is_numeric() {
        match model.spec().ok() {
            Some(ModelSpec::Ou { kappa, .. }) => {
                let k = *kappa;
                // independent of α and σ
                return Ok(UpdModel::custom("cdf(OU)", Domain::UNIT, move |u| {
                    let z = normal_quantile(u);
                    let phi = normal_pdf(z);
                    (-2.0 * k * z * phi, 2.0 * k * phi * phi)
                }));
            }
            Some(ModelSpec::Cir { kappa, alpha, sigma }) => {
                let (k, a, s) = (*kappa, *alpha, *sigma);
                let (nu, omega) = cir_shape_rate(k, a, s);
                let cir = model.clone();
                return Ok(UpdModel::custom("cdf(CIR)", Domain::UNIT, move |u| {
                    let Ok(g) = gamma_quantile_from(nu, u, None) else { return (f64::NAN, f64::NAN) };
                    let x = g / omega;
                    let f = cir.stationary_density(x).unwrap_or(f64::NAN);
                    (f * (2.0 * k * (a - x) - 0.5 * s * s), s * s * x * f * f)
                }));
            }
            _ => {}
        }
    }
    let map = Arc::new(CdfMap::new(model)?);
    Ok(push_forward(model, map, &format!("cdf({})", model.name())))
}

// ------------------------------------------------------------------ transformations

/// Descriptor of where a marginal-induced transform came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MarginalDescriptor {
    Skst(SkstParams),
    Kernel { bandwidth: f64, n: usize },
    Sieve { knots: usize, coefficients: Vec<f64>, lo: f64, hi: f64 },
    Other { name: String },
}

/// Origin of a [`Transformation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Provenance {
    Identity,
    Affine { a: f64, b: f64 },
    /// V = exp (the DO model).
    Exponential,
    /// V(x) = 1/(x + δ) + ϱ applied through x̄ = −x (the EW model).
    ReciprocalShift { delta: f64, rho: f64 },
    MarginalInduced { marginal: MarginalDescriptor, model: Option<ModelSpec> },
    Composite { description: String },
}

/// The map V from X to Y, stored through its inverse U with derivatives.
#[derive(Clone)]
pub struct Transformation {
    u: Arc<dyn SmoothMonotone>,
    provenance: Provenance,
}

impl Debug for Transformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transformation").field("provenance", &self.provenance).finish()
    }
}

impl Transformation {
    pub fn new(u: Arc<dyn SmoothMonotone>, provenance: Provenance) -> Self {
        Self { u, provenance }
    }

    pub fn identity(domain: Domain) -> Self {
        Self::new(Arc::new(IdentityMap(domain)), Provenance::Identity)
    }

    /// V(x) = a + b·x with b > 0.
    pub fn affine(a: f64, b: f64, x_domain: Domain) -> Result<Self> {
        if !(b > 0.0) {
            return Err(Error::Monotonicity(format!("affine slope must be positive, got {b}")));
        }
        let y_domain = Domain { lo: a + b * x_domain.lo, hi: a + b * x_domain.hi };
        Ok(Self::new(Arc::new(AffineInverse { a, b, y_domain }), Provenance::Affine { a, b }))
    }

    pub fn exponential() -> Self {
        Self::new(Arc::new(LogMap), Provenance::Exponential)
    }

    /// The EW transform, applied to the reflected latent process.
    pub fn reciprocal_shift(delta: f64, rho: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) || !rho.is_finite() {
            return Err(Error::Param(format!("reciprocal shift needs δ > 0, got δ={delta}, ϱ={rho}")));
        }
        Ok(Self::new(Arc::new(ReciprocalShiftInverse { delta, rho }), Provenance::ReciprocalShift { delta, rho }))
    }

    /// U = F_X⁻¹ ∘ F_Y for the given marginal and model.
    pub fn marginal_induced(source: Arc<dyn MarginalSource>, model: &UpdModel, marginal: MarginalDescriptor) -> Result<Self> {
        model.xi()?;
        let provenance = Provenance::MarginalInduced { marginal, model: model.spec().ok().cloned() };
        Ok(Self::new(Arc::new(MarginalInducedMap { source, model: model.clone() }), provenance))
    }

    /// The transform `T ∘ U`, i.e. V ∘ T⁻¹.
    pub fn then(&self, t: Arc<dyn SmoothMonotone>, description: &str) -> Self {
        Self::new(
            Arc::new(Composed { first: self.u.clone(), then: t }),
            Provenance::Composite { description: description.to_string() },
        )
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn inverse_map(&self) -> Arc<dyn SmoothMonotone> {
        self.u.clone()
    }

    pub fn y_domain(&self) -> Domain {
        self.u.domain()
    }

    pub fn x_domain(&self) -> Domain {
        self.u.range()
    }

    /// U(y).
    pub fn u(&self, y: f64) -> Result<f64> {
        self.u.value(y)
    }

    /// `[U, U′, U″, U‴]` at y.
    pub fn u_derivs(&self, y: f64) -> Result<[f64; 4]> {
        self.u.eval(y)
    }

    /// V(x).
    pub fn v(&self, x: f64) -> Result<f64> {
        self.u.inverse(x)
    }

    /// Checks U′ > 0 on the grid.
    pub fn check_monotone(&self, grid: &[f64]) -> Result<()> {
        for &y in grid {
            let d = self.u_derivs(y)?;
            if !(d[1] > 0.0) {
                return Err(Error::Monotonicity(format!("U′({y}) = {}", d[1])));
            }
        }
        Ok(())
    }
}

/// The pair (θ, V): a full copula-diffusion model for Y.
#[derive(Debug, Clone)]
pub struct Structure {
    pub model: UpdModel,
    pub transform: Transformation,
}

impl Structure {
    pub fn new(model: UpdModel, transform: Transformation) -> Result<Self> {
        let (a, b) = (model.domain(), transform.x_domain());
        let close = |u: f64, v: f64| u == v || (u - v).abs() <= 1e-9 * u.abs().max(1.0);
        if !(close(a.lo, b.lo) && close(a.hi, b.hi)) {
            return Err(Error::Param(format!(
                "transform maps into ({}, {}) but the model lives on ({}, {})",
                b.lo, b.hi, a.lo, a.hi
            )));
        }
        Ok(Self { model, transform })
    }

    /// Structure whose transform is V(x) = F_Y⁻¹(F_X(x)) for a given marginal.
    pub fn with_marginal(model: UpdModel, source: Arc<dyn MarginalSource>, marginal: MarginalDescriptor) -> Result<Self> {
        let transform = Transformation::marginal_induced(source, &model, marginal)?;
        Ok(Self { model, transform })
    }

    /// (μ_Y(y), σ²_Y(y)) via Itô's lemma on V.
    pub fn drift_diffusion(&self, y: f64) -> Result<(f64, f64)> {
        let [x, u1, u2, _] = self.transform.u_derivs(y)?;
        if !(u1 > 0.0) {
            return Err(Error::Monotonicity(format!("U′({y}) = {u1}")));
        }
        let (mu, s2) = self.model.drift_diffusion(x)?;
        Ok((mu / u1 - 0.5 * s2 * u2 / (u1 * u1 * u1), s2 / (u1 * u1)))
    }

    /// ln p_Y(y | y0).
    pub fn ln_transition_density(&self, y: f64, y0: f64, spec: &TransitionDensitySpec) -> Result<f64> {
        let [x, u1, _, _] = self.transform.u_derivs(y)?;
        let x0 = self.transform.u(y0)?;
        Ok(u1.ln() + self.model.ln_transition_density(x, x0, spec)?)
    }

    pub fn transition_density(&self, y: f64, y0: f64, spec: &TransitionDensitySpec) -> Result<f64> {
        self.ln_transition_density(y, y0, spec).map(f64::exp)
    }

    /// f_Y(y) = U′(y) f_X(U(y)).
    pub fn stationary_density(&self, y: f64) -> Result<f64> {
        let [x, u1, _, _] = self.transform.u_derivs(y)?;
        Ok(u1 * self.model.stationary_density(x)?)
    }

    /// Equivalent structure for X̃ = T(X): the pushed-forward model with
    /// transform T ∘ U.
    pub fn rewrite(&self, t: Arc<dyn SmoothMonotone>, description: &str) -> Result<Structure> {
        let model = push_forward(&self.model, t.clone(), description);
        Ok(Structure { model, transform: self.transform.then(t, description) })
    }

    /// The structure rewritten on the Lamperti scale (transform V ∘ γ⁻¹).
    pub fn lamperti_rewrite(&self) -> Result<Structure> {
        let gamma = Arc::new(LampertiMap::new(&self.model)?);
        let model = lamperti_normalize_numeric(&self.model)?;
        Ok(Structure { model, transform: self.transform.then(gamma, "lamperti") })
    }

    /// `n` points of Y between its `p_lo` and `p_hi` stationary quantiles.
    pub fn quantile_grid(&self, n: usize, p_lo: f64, p_hi: f64) -> Result<Vec<f64>> {
        (0..n)
            .map(|i| {
                let p = if n == 1 { 0.5 * (p_lo + p_hi) } else { p_lo + (p_hi - p_lo) * i as f64 / (n - 1) as f64 };
                self.transform.v(self.model.stationary_quantile(p)?)
            })
            .collect()
    }

    /// Default checking grid: 41 points between the 1st and 99th percentiles.
    pub fn default_grid(&self) -> Result<Vec<f64>> {
        self.quantile_grid(41, 0.01, 0.99)
    }
}

/// U = F_X⁻¹ ∘ F_Y for a marginal source and model.
pub fn build_marginal_induced_transform(
    source: Arc<dyn MarginalSource>,
    model: &UpdModel,
    marginal: MarginalDescriptor,
) -> Result<Transformation> {
    Transformation::marginal_induced(source, model, marginal)
}

pub fn transformed_drift_diffusion(s: &Structure, y: f64) -> Result<(f64, f64)> {
    s.drift_diffusion(y)
}

pub fn transformed_transition_density(s: &Structure, y: f64, y0: f64, spec: &TransitionDensitySpec) -> Result<f64> {
    s.transition_density(y, y0, spec)
}

pub fn transformed_stationary_density(s: &Structure, y: f64) -> Result<f64> {
    s.stationary_density(y)
}

/// Implied copula density c_X(u0, u) = p_X(F⁻¹(u) | F⁻¹(u0)) / f_X(F⁻¹(u)).
pub fn copula_density(model: &UpdModel, u0: f64, u: f64, spec: &TransitionDensitySpec) -> Result<f64> {
    let x0 = model.stationary_quantile(u0)?;
    let x = model.stationary_quantile(u)?;
    Ok((model.ln_transition_density(x, x0, spec)? - model.ln_stationary_density(x)?).exp())
}

/// sup over the grid of |μ_Y,1 − μ_Y,2| + |σ_Y,1 − σ_Y,2|.
pub fn equivalence_check(s1: &Structure, s2: &Structure, grid: &[f64]) -> Result<f64> {
    let mut worst = 0.0_f64;
    for &y in grid {
        let (m1, v1) = s1.drift_diffusion(y)?;
        let (m2, v2) = s2.drift_diffusion(y)?;
        worst = worst.max((m1 - m2).abs() + (v1.sqrt() - v2.sqrt()).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::Skst;

    fn calibrated() -> Arc<Skst> {
        Arc::new(Skst::new(SkstParams::new(0.0835, 0.0358, 0.5193, 25.3708)).unwrap())
    }

    #[test]
    fn identity_and_affine_drift() {
        let ou = UpdModel::new(ModelSpec::Ou { kappa: 1.3, alpha: 0.2, sigma: 0.7 }).unwrap();
        let id = Structure::new(ou.clone(), Transformation::identity(Domain::REAL)).unwrap();
        assert_eq!(id.drift_diffusion(0.4).unwrap(), ou.drift_diffusion(0.4).unwrap());
        let aff = Structure::new(ou.clone(), Transformation::affine(1.0, 2.5, Domain::REAL).unwrap()).unwrap();
        let y = 1.0 + 2.5 * 0.4;
        let (m, s2) = aff.drift_diffusion(y).unwrap();
        let (mx, s2x) = ou.drift_diffusion(0.4).unwrap();
        assert!((m - 2.5 * mx).abs() < 1e-14 && (s2 - 6.25 * s2x).abs() < 1e-13);
    }

    #[test]
    fn exponential_transform_diffusion() {
        let ou = UpdModel::new(ModelSpec::Ou { kappa: 4.4888, alpha: 2.889, sigma: 1.0818f64.sqrt() }).unwrap();
        let s = Structure::new(ou, Transformation::exponential()).unwrap();
        let (_, s2) = s.drift_diffusion(20.0).unwrap();
        assert!((s2.sqrt() - 1.0818f64.sqrt() * 20.0).abs() < 1e-12);
    }

    #[test]
    fn marginal_induced_round_trip_and_identity() {
        let ou = UpdModel::normalized_ou(22.753).unwrap();
        let s = Structure::with_marginal(ou.clone(), calibrated(), MarginalDescriptor::Skst(calibrated().params)).unwrap();
        for i in 0..20 {
            let x = -2.5 + 5.0 * i as f64 / 19.0;
            let y = s.transform.v(x).unwrap();
            assert!((s.transform.u(y).unwrap() - x).abs() < 1e-10);
            let f = s.stationary_density(y).unwrap();
            assert!((f - calibrated().pdf(y)).abs() < 1e-8 * f.max(1.0));
        }
        let sym = Arc::new(Skst::new(SkstParams::new(0.0, 1.0, 0.0, 6.0)).unwrap());
        let t = Transformation::marginal_induced(sym, &ou, MarginalDescriptor::Other { name: "t6".into() }).unwrap();
        assert!(t.u(0.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn marginal_induced_derivatives() {
        let cir = UpdModel::normalized_cir(0.7653, 1.1653).unwrap();
        let t = Transformation::marginal_induced(calibrated(), &cir, MarginalDescriptor::Other { name: "skst".into() }).unwrap();
        for y in [0.04, 0.08, 0.13] {
            let d = t.u_derivs(y).unwrap();
            let h = 1e-6;
            for k in 1..4 {
                let fd = (t.u_derivs(y + h).unwrap()[k - 1] - t.u_derivs(y - h).unwrap()[k - 1]) / (2.0 * h);
                assert!((fd - d[k]).abs() < 1e-4 * d[k].abs().max(1.0), "y={y} k={k}: {fd} vs {}", d[k]);
            }
        }
    }

    #[test]
    fn reciprocal_shift_domain() {
        let t = Transformation::reciprocal_shift(0.0072, 0.1916).unwrap();
        let y = t.v(-3.0).unwrap();
        assert!((y - (1.0 / 3.0072 + 0.1916)).abs() < 1e-14);
        assert!((t.u(y).unwrap() + 3.0).abs() < 1e-10);
        assert_eq!(t.y_domain().hi, 0.1916 + 1.0 / 0.0072);
    }

    #[test]
    fn gaussian_copula_value() {
        let kappa = 2f64.ln();
        let ou = UpdModel::normalized_ou(kappa).unwrap();
        let c = copula_density(&ou, 0.5, 0.5, &ou.default_transition(1.0)).unwrap();
        assert!((c - 1.154_700_5).abs() < 1e-6);
    }

    #[test]
    fn cdf_scheme_ou() {
        let ou = UpdModel::normalized_ou(1.0).unwrap();
        let m = cdf_normalize(&ou).unwrap();
        let (mu, s2) = m.coeffs(0.5);
        assert_eq!(mu, 0.0);
        assert!((s2 - 0.318_309_886).abs() < 1e-8);
    }

    #[test]
    fn natural_scale_example() {
        let ou = UpdModel::normalized_ou(0.5).unwrap();
        let ns = natural_scale_normalize(&ou).unwrap();
        let xb = ou.scale_measure(1.0).unwrap();
        let (mu, s2) = ns.coeffs(xb);
        assert_eq!(mu, 0.0);
        assert!((s2 - std::f64::consts::E).abs() < 1e-7, "{s2}");
    }

    #[test]
    fn cir_lamperti_closed_value() {
        let cir = UpdModel::new(ModelSpec::Cir { kappa: 1.0, alpha: 1.0, sigma: 1.0 }).unwrap();
        let lt = lamperti_normalize(&cir).unwrap();
        // κ(2α*/x̄ − x̄/2) − 1/(2x̄) at x̄ = 1
        assert!((lt.coeffs(1.0).0 - 1.0).abs() < 1e-14);
    }
}
