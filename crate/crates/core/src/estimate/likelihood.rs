//! Full and pseudo log-likelihood objectives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::{EmpiricalCdf, KernelEstimate, MarginalSource};
use crate::transform::Transformation;
use crate::upd::{TransitionDensitySpec, UpdModel};

/// Estimator of F_Y used to form pseudo-observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CdfVariant {
    /// Rank-based empirical cdf, clamped to [1/(2N), 1 − 1/(2N)].
    Empirical,
    /// Gaussian-kernel cdf with bandwidth `factor × Silverman`.
    Kernel { bandwidth_factor: f64 },
}

/// F̃_Y(Y_i) or F̂_Y(Y_i), in data order.
pub fn pseudo_observations(data: &[f64], variant: CdfVariant) -> Result<Vec<f64>> {
    match variant {
        CdfVariant::Empirical => EmpiricalCdf::pseudo_observations(data),
        CdfVariant::Kernel { bandwidth_factor } => {
            let k = KernelEstimate::silverman(data, bandwidth_factor)?;
            let n = data.len() as f64;
            let (lo, hi) = (0.5 / n, 1.0 - 0.5 / n);
            Ok(data.iter().map(|&y| k.cdf(y).clamp(lo, hi)).collect())
        }
    }
}

/// F_X⁻¹(u_i; θ) for every i. Probabilities are inverted in sorted order so
/// that each solve is warm-started from its neighbour.
pub fn latent_from_uniform(model: &UpdModel, u: &[f64]) -> Result<Vec<f64>> {
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&a, &b| u[a].total_cmp(&u[b]));
    let mut x = vec![0.0; u.len()];
    let mut prev: Option<(f64, f64)> = None;
    for &i in &order {
        x[i] = match prev {
            Some((pu, px)) if pu == u[i] => px,
            _ => model.stationary_quantile_from(u[i], prev.map(|p| p.1))?,
        };
        prev = Some((u[i], x[i]));
    }
    Ok(x)
}

fn check_finite(v: Vec<f64>) -> Result<Vec<f64>> {
    match v.iter().position(|c| !c.is_finite()) {
        Some(index) => Err(Error::NonFiniteLikelihood { index: index + 1 }),
        None => Ok(v),
    }
}

/// Per-transition terms log p_X(x_i | x_{i−1}) − log f_X(x_i), i = 1..n.
pub fn copula_contributions(model: &UpdModel, x: &[f64], spec: &TransitionDensitySpec) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::DegenerateSample("need at least two observations".into()));
    }
    let out = x
        .windows(2)
        .map(|w| Ok(model.ln_transition_density(w[1], w[0], spec)? - model.ln_stationary_density(w[1])?))
        .collect::<Result<Vec<f64>>>()?;
    check_finite(out)
}

/// Pseudo-likelihood terms given pseudo-observations `u`.
pub fn pmle_contributions(model: &UpdModel, u: &[f64], spec: &TransitionDensitySpec) -> Result<Vec<f64>> {
    copula_contributions(model, &latent_from_uniform(model, u)?, spec)
}

/// Average pseudo log-likelihood (1/n) Σ {log p_X(Ũ_i | Ũ_{i−1}) − log f_X(Ũ_i)}
/// with Ũ = F_X⁻¹(F̃_Y(·); θ), using the model's default transition density.
pub fn pmle_objective(data: &[f64], model: &UpdModel, delta: f64, variant: CdfVariant) -> Result<f64> {
    pmle_objective_with(data, model, &model.default_transition(delta), variant)
}

/// [`pmle_objective`] with an explicit transition density.
pub fn pmle_objective_with(
    data: &[f64],
    model: &UpdModel,
    spec: &TransitionDensitySpec,
    variant: CdfVariant,
) -> Result<f64> {
    let u = pseudo_observations(data, variant)?;
    Ok(mean(&pmle_contributions(model, &u, spec)?))
}

/// Per-transition terms log p_X(U(y_i) | U(y_{i−1})) + log U′(y_i).
pub fn full_contributions(
    data: &[f64],
    model: &UpdModel,
    transform: &Transformation,
    spec: &TransitionDensitySpec,
) -> Result<Vec<f64>> {
    if data.len() < 2 {
        return Err(Error::DegenerateSample("need at least two observations".into()));
    }
    let mut x = Vec::with_capacity(data.len());
    let mut ln_u1 = Vec::with_capacity(data.len());
    for &y in data {
        let [xi, u1, _, _] = transform.u_derivs(y)?;
        if !(u1 > 0.0) {
            return Err(Error::Monotonicity(format!("U′({y}) = {u1}")));
        }
        x.push(xi);
        ln_u1.push(u1.ln());
    }
    let out = (1..data.len())
        .map(|i| Ok(model.ln_transition_density(x[i], x[i - 1], spec)? + ln_u1[i]))
        .collect::<Result<Vec<f64>>>()?;
    check_finite(out)
}

/// Average log-likelihood of Y under a fully specified structure.
pub fn loglik_full(data: &[f64], model: &UpdModel, transform: &Transformation, delta: f64) -> Result<f64> {
    Ok(mean(&full_contributions(data, model, transform, &model.default_transition(delta))?))
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
