//! Likelihood-based estimators: full MLE for parametric transforms, two-step
//! PMLE, sieve SMLE, the Euler variant, and plug-in drift/diffusion estimates.

pub mod drift;
pub mod likelihood;
pub mod sandwich;
pub mod sieve;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::acf1;
use crate::marginals::{MarginalSource, Skst, SkstParams};
use crate::numerics::optimize::{bfgs, multistart, BfgsOptions, MultiStartOptions, NelderMeadOptions};
use crate::transform::{MarginalDescriptor, Transformation};
use crate::upd::{ModelSpec, TransitionDensitySpec, UpdModel};

pub use drift::{estimate_drift_diffusion, DriftDiffEstimate};
pub use likelihood::{loglik_full, pmle_objective, pmle_objective_with, pseudo_observations, CdfVariant};
pub use sandwich::{sandwich_se, Reparam};
pub use sieve::{fit_log_spline, LogSplineDensity, SieveSpec};

use likelihood::{copula_contributions, full_contributions, latent_from_uniform, mean, pmle_contributions};
use sandwich::{delta_method, from_free, to_free};

/// UPD families that can be fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// dX = −κX dt + √(2κ) dW; θ = κ.
    NormalizedOu,
    /// dX = κ(α − X) dt + √(2κX) dW; θ = (κ, α).
    NormalizedCir,
    /// θ = (κ, α, σ²).
    Ou,
    /// θ = (κ, α, σ²).
    Cir,
}

impl Family {
    pub fn param_names(&self) -> Vec<&'static str> {
        match self {
            Family::NormalizedOu => vec!["kappa"],
            Family::NormalizedCir => vec!["kappa", "alpha"],
            Family::Ou | Family::Cir => vec!["kappa", "alpha", "sigma2"],
        }
    }

    pub fn reparams(&self) -> Vec<Reparam> {
        match self {
            Family::NormalizedOu => vec![Reparam::Log],
            Family::NormalizedCir => vec![Reparam::Log, Reparam::Log],
            Family::Ou => vec![Reparam::Log, Reparam::Identity, Reparam::Log],
            Family::Cir => vec![Reparam::Log, Reparam::Log, Reparam::Log],
        }
    }

    pub fn spec(&self, theta: &[f64]) -> Result<ModelSpec> {
        if theta.len() != self.param_names().len() {
            return Err(Error::Param(format!("{self:?} takes {} parameters, got {}", self.param_names().len(), theta.len())));
        }
        Ok(match self {
            Family::NormalizedOu => ModelSpec::normalized_ou(theta[0]),
            Family::NormalizedCir => ModelSpec::normalized_cir(theta[0], theta[1]),
            Family::Ou => ModelSpec::Ou { kappa: theta[0], alpha: theta[1], sigma: theta[2].sqrt() },
            Family::Cir => ModelSpec::Cir { kappa: theta[0], alpha: theta[1], sigma: theta[2].sqrt() },
        })
    }

    pub fn model(&self, theta: &[f64]) -> Result<UpdModel> {
        UpdModel::new(self.spec(theta)?)
    }
}

/// Parametric copula-diffusion models fitted by full likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParametricModel {
    /// Y = exp(X), X an OU process; θ = (κ, α, σ²).
    Do,
    /// Y = 1/(X + δ) + ϱ, X a CIR process; θ = (κ, α, σ², δ, ϱ).
    Ew,
    /// Normalised OU with an SKST marginal, fitted in two stages.
    OuSkst,
    /// Normalised CIR with an SKST marginal, fitted in two stages.
    CirSkst,
}

impl ParametricModel {
    pub fn param_names(&self) -> Vec<&'static str> {
        match self {
            ParametricModel::Do => vec!["kappa", "alpha", "sigma2"],
            ParametricModel::Ew => vec!["kappa", "alpha", "sigma2", "delta", "rho"],
            ParametricModel::OuSkst => Family::NormalizedOu.param_names(),
            ParametricModel::CirSkst => Family::NormalizedCir.param_names(),
        }
    }

    /// The UPD model and transformation at θ.
    pub fn structure(&self, theta: &[f64]) -> Result<(UpdModel, Transformation)> {
        match self {
            ParametricModel::Do => Ok((Family::Ou.model(theta)?, Transformation::exponential())),
            ParametricModel::Ew => {
                if theta.len() != 5 {
                    return Err(Error::Param(format!("EW takes 5 parameters, got {}", theta.len())));
                }
                let cir = Family::Cir.spec(&theta[..3])?;
                let model = UpdModel::new(ModelSpec::Reflected { inner: Box::new(cir) })?;
                Ok((model, Transformation::reciprocal_shift(theta[3], theta[4])?))
            }
            _ => Err(Error::Param("two-stage SKST models need the fitted marginal; use fit_parametric".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    NelderMead,
    QuasiNewtonNumericGrad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EstimatorKind {
    Mle,
    Ppmle,
    Pmle,
    Smle,
    EulerPmle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub optimizer: Optimizer,
    pub restarts: usize,
    /// Objective tolerance of the simplex search.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Overrides the family's default reparameterisation.
    pub reparams: Option<Vec<Reparam>>,
    /// Silverman multiplier for the kernel cdf variant.
    pub bandwidth_factor: f64,
    pub cdf: CdfVariant,
    /// Starting values; the estimator picks data-driven ones when absent.
    pub start: Option<Vec<f64>>,
    pub seed: u64,
    pub compute_se: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::NelderMead,
            restarts: 5,
            tolerance: 1e-10,
            max_iter: 2000,
            reparams: None,
            bandwidth_factor: 1.0,
            cdf: CdfVariant::Empirical,
            start: None,
            seed: 0x5eed,
            compute_se: true,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Param("tolerance must be positive".into()));
        }
        if self.restarts < 1 {
            return Err(Error::Param("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub estimator: EstimatorKind,
    pub param_names: Vec<String>,
    pub theta_hat: Vec<f64>,
    /// Sandwich standard errors, when requested and available. For two-step
    /// estimators these treat the first-stage marginal as known.
    pub se: Option<Vec<f64>>,
    /// Average (pseudo) log-likelihood at θ̂.
    pub objective_value: f64,
    /// Summed log-likelihood of Y at θ̂, where a density for Y is defined.
    pub log_likelihood: Option<f64>,
    pub n: usize,
    pub converged: bool,
    pub evaluations: usize,
    /// Best objective after each restart (non-decreasing).
    pub trace: Vec<f64>,
    pub family: Option<Family>,
    pub parametric: Option<ParametricModel>,
    pub marginal: Option<MarginalDescriptor>,
}

impl FitResult {
    /// The fitted UPD model, for family-based estimators.
    pub fn model(&self) -> Result<UpdModel> {
        match self.family {
            Some(f) => f.model(&self.theta_hat),
            None => match self.parametric {
                Some(p @ (ParametricModel::Do | ParametricModel::Ew)) => p.structure(&self.theta_hat).map(|s| s.0),
                Some(ParametricModel::OuSkst) => Family::NormalizedOu.model(&self.theta_hat),
                Some(ParametricModel::CirSkst) => Family::NormalizedCir.model(&self.theta_hat),
                None => Err(Error::Param("fit carries no model family".into())),
            },
        }
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.param_names.iter().position(|n| n == name).map(|i| self.theta_hat[i])
    }
}

struct Maximum {
    theta: Vec<f64>,
    z: Vec<f64>,
    value: f64,
    converged: bool,
    evaluations: usize,
    trace: Vec<f64>,
}

/// Maximises the mean of `contrib` over θ through the reparameterisation.
fn maximize<F>(contrib: &F, theta0: &[f64], maps: &[Reparam], opts: &FitOptions) -> Result<Maximum>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    opts.validate()?;
    let objective = |z: &[f64]| match contrib(&from_free(maps, z)) {
        Ok(c) => -mean(&c),
        Err(_) => f64::INFINITY,
    };
    let z0 = to_free(maps, theta0);
    if z0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Param(format!("starting values {theta0:?} violate parameter bounds")));
    }
    let bfgs_opts = BfgsOptions { max_iter: opts.max_iter.min(500), ..Default::default() };
    let (best, trace, evaluations) = match opts.optimizer {
        Optimizer::NelderMead => {
            let ms = multistart(
                &objective,
                &z0,
                &MultiStartOptions {
                    restarts: opts.restarts,
                    seed: opts.seed,
                    nelder_mead: NelderMeadOptions { max_iter: opts.max_iter, f_tol: opts.tolerance, ..Default::default() },
                    bfgs: bfgs_opts,
                    ..Default::default()
                },
            );
            (ms.best, ms.trace, ms.evaluations)
        }
        Optimizer::QuasiNewtonNumericGrad => {
            let m = bfgs(&objective, &z0, &bfgs_opts);
            let e = m.evaluations;
            let t = vec![m.f];
            (m, t, e)
        }
    };
    if !best.f.is_finite() {
        return Err(Error::NonConvergence { restarts: opts.restarts });
    }
    Ok(Maximum {
        theta: from_free(maps, &best.x),
        z: best.x,
        value: -best.f,
        converged: best.converged,
        evaluations,
        trace: trace.into_iter().map(|v| -v).collect(),
    })
}

/// Sandwich SEs in the free parameterisation, mapped back by the delta method.
fn standard_errors<F>(contrib: &F, m: &Maximum, maps: &[Reparam], opts: &FitOptions) -> Option<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !opts.compute_se {
        return None;
    }
    let in_z = |z: &[f64]| contrib(&from_free(maps, z));
    match sandwich_se(in_z, &m.z, None) {
        Ok(se) => Some(delta_method(maps, &m.z, &se)),
        Err(e) => {
            log::warn!("standard errors unavailable: {e}");
            None
        }
    }
}

fn check_sample(data: &[f64]) -> Result<()> {
    if data.len() < 3 {
        return Err(Error::DegenerateSample(format!("need at least 3 observations, got {}", data.len())));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("sample contains non-finite values".into()));
    }
    let first = data[0];
    if data.iter().all(|&v| v == first) {
        return Err(Error::DegenerateSample("constant sample".into()));
    }
    Ok(())
}

/// Persistence-based starting value for κ.
fn kappa_start(series: &[f64], delta: f64) -> f64 {
    let r = acf1(series).unwrap_or(0.5).clamp(0.01, 0.999);
    -r.ln() / delta
}

fn family_start(family: Family, series: &[f64], delta: f64) -> Vec<f64> {
    let k = kappa_start(series, delta);
    match family {
        Family::NormalizedOu => vec![k],
        Family::NormalizedCir => vec![k, 1.5],
        Family::Ou | Family::Cir => {
            let n = series.len() as f64;
            let m = series.iter().sum::<f64>() / n;
            let v = series.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            let s2 = if family == Family::Ou { 2.0 * k * v } else { 2.0 * k * v / m.abs().max(1e-8) };
            vec![k, m, s2]
        }
    }
}

fn pmle_like(
    data: &[f64],
    family: Family,
    delta: f64,
    opts: &FitOptions,
    estimator: EstimatorKind,
    spec_for: &dyn Fn(&UpdModel) -> TransitionDensitySpec,
) -> Result<FitResult> {
    check_sample(data)?;
    let variant = match opts.cdf {
        CdfVariant::Kernel { .. } => CdfVariant::Kernel { bandwidth_factor: opts.bandwidth_factor },
        v => v,
    };
    let u = pseudo_observations(data, variant)?;
    let contrib = |theta: &[f64]| {
        let model = family.model(theta)?;
        pmle_contributions(&model, &u, &spec_for(&model))
    };
    let maps = opts.reparams.clone().unwrap_or_else(|| family.reparams());
    let start = match &opts.start {
        Some(s) => s.clone(),
        None => {
            let scores: Vec<f64> = u.iter().map(|&p| crate::numerics::special::normal_quantile(p)).collect();
            family_start(family, &scores, delta)
        }
    };
    let m = maximize(&contrib, &start, &maps, opts)?;
    let se = standard_errors(&contrib, &m, &maps, opts);
    Ok(FitResult {
        estimator,
        param_names: family.param_names().iter().map(|s| s.to_string()).collect(),
        theta_hat: m.theta,
        se,
        objective_value: m.value,
        log_likelihood: None,
        n: data.len() - 1,
        converged: m.converged,
        evaluations: m.evaluations,
        trace: m.trace,
        family: Some(family),
        parametric: None,
        marginal: None,
    })
}

/// Two-step PMLE: maximise the pseudo-likelihood with the empirical (or
/// kernel) cdf plugged in for F_Y.
pub fn fit_pmle(data: &[f64], family: Family, delta: f64, opts: &FitOptions) -> Result<FitResult> {
    pmle_like(data, family, delta, opts, EstimatorKind::Pmle, &|m| m.default_transition(delta))
}

/// PMLE with the one-step Euler transition density in place of p_X.
pub fn fit_euler_pmle(data: &[f64], family: Family, delta: f64, opts: &FitOptions) -> Result<FitResult> {
    pmle_like(data, family, delta, opts, EstimatorKind::EulerPmle, &|_| TransitionDensitySpec::euler(delta, 1))
}

/// SKST maximum likelihood on (treated as i.i.d.) observations.
pub fn fit_skst(data: &[f64], opts: &FitOptions) -> Result<FitResult> {
    check_sample(data)?;
    let maps = vec![Reparam::Identity, Reparam::Log, Reparam::Atanh, Reparam::LogShift(2.0)];
    let contrib = |phi: &[f64]| {
        let d = Skst::new(SkstParams::new(phi[0], phi[1], phi[2], phi[3]))?;
        Ok(data.iter().map(|&y| d.ln_pdf(y)).collect::<Vec<f64>>())
    };
    let start = opts.start.clone().unwrap_or_else(|| {
        let n = data.len() as f64;
        let m = data.iter().sum::<f64>() / n;
        let sd = (data.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        vec![m, sd, 0.0, 8.0]
    });
    let m = maximize(&contrib, &start, &maps, opts)?;
    let se = standard_errors(&contrib, &m, &maps, opts);
    let params = SkstParams::new(m.theta[0], m.theta[1], m.theta[2], m.theta[3]);
    Ok(FitResult {
        estimator: EstimatorKind::Mle,
        param_names: ["m", "v", "lambda", "tau"].iter().map(|s| s.to_string()).collect(),
        theta_hat: m.theta,
        se,
        objective_value: m.value,
        log_likelihood: Some(m.value * data.len() as f64),
        n: data.len(),
        converged: m.converged,
        evaluations: m.evaluations,
        trace: m.trace,
        family: None,
        parametric: None,
        marginal: Some(MarginalDescriptor::Skst(params)),
    })
}

fn ew_start(data: &[f64], delta: f64) -> Vec<f64> {
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rho = lo - 0.25 * (hi - lo).max(1e-8);
    let d = 0.5 / (hi - rho);
    let x: Vec<f64> = data.iter().map(|y| 1.0 / (y - rho) - d).collect();
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|z| (z - m).powi(2)).sum::<f64>() / n;
    let k = kappa_start(&x, delta);
    vec![k, m, 2.0 * k * v / m, d, rho]
}

/// Fully parametric fits: full MLE for DO and EW; two-stage PMLE (SKST by
/// ML, then θ with the fitted SKST cdf) for OU-SKST and CIR-SKST.
pub fn fit_parametric(data: &[f64], model: ParametricModel, delta: f64, opts: &FitOptions) -> Result<FitResult> {
    check_sample(data)?;
    match model {
        ParametricModel::Do | ParametricModel::Ew => {
            let contrib = |theta: &[f64]| {
                let (m, t) = model.structure(theta)?;
                full_contributions(data, &m, &t, &m.default_transition(delta))
            };
            let maps = opts.reparams.clone().unwrap_or_else(|| match model {
                ParametricModel::Do => Family::Ou.reparams(),
                _ => vec![Reparam::Log, Reparam::Log, Reparam::Log, Reparam::Log, Reparam::Identity],
            });
            let start = match (&opts.start, model) {
                (Some(s), _) => s.clone(),
                (None, ParametricModel::Do) => {
                    if data.iter().any(|&y| y <= 0.0) {
                        return Err(Error::Data("the exponential model needs positive observations".into()));
                    }
                    let logs: Vec<f64> = data.iter().map(|y| y.ln()).collect();
                    family_start(Family::Ou, &logs, delta)
                }
                (None, _) => ew_start(data, delta),
            };
            let m = maximize(&contrib, &start, &maps, opts)?;
            let se = standard_errors(&contrib, &m, &maps, opts);
            let n = data.len() - 1;
            Ok(FitResult {
                estimator: EstimatorKind::Mle,
                param_names: model.param_names().iter().map(|s| s.to_string()).collect(),
                theta_hat: m.theta,
                se,
                objective_value: m.value,
                log_likelihood: Some(m.value * n as f64),
                n,
                converged: m.converged,
                evaluations: m.evaluations,
                trace: m.trace,
                family: None,
                parametric: Some(model),
                marginal: None,
            })
        }
        ParametricModel::OuSkst | ParametricModel::CirSkst => {
            let family = if model == ParametricModel::OuSkst { Family::NormalizedOu } else { Family::NormalizedCir };
            let stage1 = fit_skst(data, &FitOptions { start: None, compute_se: false, ..opts.clone() })?;
            let Some(MarginalDescriptor::Skst(phi)) = stage1.marginal.clone() else { unreachable!() };
            let skst = Skst::new(phi)?;
            let u: Vec<f64> = data.iter().map(|&y| skst.cdf(y).clamp(1e-300, 1.0 - 1e-16)).collect();
            let ln_fy: f64 = data[1..].iter().map(|&y| skst.ln_pdf(y)).sum::<f64>() / (data.len() - 1) as f64;
            let contrib = |theta: &[f64]| {
                let m = family.model(theta)?;
                pmle_contributions(&m, &u, &m.default_transition(delta))
            };
            let maps = opts.reparams.clone().unwrap_or_else(|| family.reparams());
            let start = opts.start.clone().unwrap_or_else(|| {
                let scores: Vec<f64> = u.iter().map(|&p| crate::numerics::special::normal_quantile(p)).collect();
                family_start(family, &scores, delta)
            });
            let m = maximize(&contrib, &start, &maps, opts)?;
            let se = standard_errors(&contrib, &m, &maps, opts);
            let n = data.len() - 1;
            Ok(FitResult {
                estimator: EstimatorKind::Ppmle,
                param_names: family.param_names().iter().map(|s| s.to_string()).collect(),
                theta_hat: m.theta,
                se,
                objective_value: m.value,
                log_likelihood: Some((m.value + ln_fy) * n as f64),
                n,
                converged: m.converged,
                evaluations: m.evaluations + stage1.evaluations,
                trace: m.trace,
                family: None,
                parametric: Some(model),
                marginal: Some(MarginalDescriptor::Skst(phi)),
            })
        }
    }
}

/// Log-likelihood terms of the sieve model at (θ, f_{Y,m}).
pub fn sieve_contributions(
    data: &[f64],
    model: &UpdModel,
    density: &LogSplineDensity,
    spec: &TransitionDensitySpec,
) -> Result<Vec<f64>> {
    let u: Vec<f64> = data.iter().map(|&y| density.cdf(y)).collect();
    if let Some(i) = u.iter().position(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(Error::NonFiniteLikelihood { index: i });
    }
    let x = latent_from_uniform(model, &u)?;
    let mut c = copula_contributions(model, &x, spec)?;
    for (i, ci) in c.iter_mut().enumerate() {
        *ci += density.ln_pdf(data[i + 1]);
    }
    Ok(c)
}

/// Sieve MLE: joint maximisation over θ and the log-spline coefficients of
/// the full likelihood with U = F_X⁻¹(F_{Y,m}(·); θ). Starts from the PMLE
/// and the i.i.d. log-spline fit.
pub fn fit_smle(
    data: &[f64],
    family: Family,
    delta: f64,
    sieve: &SieveSpec,
    opts: &FitOptions,
) -> Result<(FitResult, LogSplineDensity)> {
    check_sample(data)?;
    sieve.validate()?;
    let (lo, hi) = sieve.support(data)?;
    let pmle = fit_pmle(data, family, delta, &FitOptions { compute_se: false, ..opts.clone() })?;
    let iid = fit_log_spline(data, sieve)?;
    let p = family.param_names().len();
    let theta_maps = opts.reparams.clone().unwrap_or_else(|| family.reparams());
    let mut maps = theta_maps.clone();
    maps.extend(std::iter::repeat_n(Reparam::Identity, sieve.knots - 1));
    let build = |v: &[f64]| -> Result<(UpdModel, LogSplineDensity)> {
        let model = family.model(&v[..p])?;
        let dens = LogSplineDensity::new(lo, hi, sieve::coefficients_from_free(&v[p..]), sieve.quadrature_nodes)?;
        Ok((model, dens))
    };
    let contrib = |v: &[f64]| {
        let (model, dens) = build(v)?;
        sieve_contributions(data, &model, &dens, &model.default_transition(delta))
    };
    let mut start = pmle.theta_hat.clone();
    start.extend_from_slice(&iid.coefficients()[1..]);
    // the simplex needs a smaller jitter in the larger joint space
    let m = maximize(&contrib, &start, &maps, &FitOptions { restarts: opts.restarts.min(3), ..opts.clone() })?;
    let se = standard_errors(&contrib, &m, &maps, opts).map(|s| s[..p].to_vec());
    let (_, dens) = build(&m.theta)?;
    let n = data.len() - 1;
    let result = FitResult {
        estimator: EstimatorKind::Smle,
        param_names: family.param_names().iter().map(|s| s.to_string()).collect(),
        theta_hat: m.theta[..p].to_vec(),
        se,
        objective_value: m.value,
        log_likelihood: Some(m.value * n as f64),
        n,
        converged: m.converged,
        evaluations: m.evaluations + pmle.evaluations,
        trace: m.trace,
        family: Some(family),
        parametric: None,
        marginal: Some(MarginalDescriptor::Sieve {
            knots: sieve.knots,
            coefficients: dens.coefficients().to_vec(),
            lo,
            hi,
        }),
    };
    Ok((result, dens))
}

/// Full log-likelihood (average) of a sieve model at given θ and density.
pub fn sieve_loglik(data: &[f64], model: &UpdModel, density: &LogSplineDensity, delta: f64) -> Result<f64> {
    Ok(mean(&sieve_contributions(data, model, density, &model.default_transition(delta))?))
}

/// The marginal-induced transformation for a fitted sieve density.
pub fn sieve_transform(model: &UpdModel, density: &LogSplineDensity, knots: usize) -> Result<Transformation> {
    let (lo, hi) = density.support_bounds();
    Transformation::marginal_induced(
        Arc::new(density.clone()),
        model,
        MarginalDescriptor::Sieve { knots, coefficients: density.coefficients().to_vec(), lo, hi },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate_ou_exact, PathConfig};

    #[test]
    fn do_fit_recovers_parameters() {
        let (k, a, s2): (f64, f64, f64) = (4.4888, 2.889, 1.0818);
        let x = simulate_ou_exact(k, a, s2.sqrt(), &PathConfig::new(3000, 1.0 / 252.0, 17)).unwrap();
        let y: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let fit = fit_parametric(&y, ParametricModel::Do, 1.0 / 252.0, &FitOptions::default()).unwrap();
        let se = fit.se.clone().unwrap();
        for (i, truth) in [k, a, s2].iter().enumerate() {
            assert!((fit.theta_hat[i] - truth).abs() < 3.5 * se[i], "{i}: {} vs {truth} (se {})", fit.theta_hat[i], se[i]);
        }
        assert!(fit.trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn constant_data_rejected() {
        let err = fit_pmle(&[1.0; 50], Family::NormalizedOu, 0.1, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateSample(_)));
    }
}
