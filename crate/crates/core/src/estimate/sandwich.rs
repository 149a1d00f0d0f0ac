//! Heteroskedasticity- and autocorrelation-robust sandwich standard errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::linalg::{invert, matmul, zeros, Matrix};
use crate::numerics::optimize::numeric_hessian;

/// Map between a constrained parameter θ and an unconstrained search value z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reparam {
    Identity,
    /// θ = e^z, for θ > 0.
    Log,
    /// θ = tanh z, for θ ∈ (−1, 1).
    Atanh,
    /// θ = c + e^z, for θ > c.
    LogShift(f64),
}

impl Reparam {
    pub fn to_free(&self, theta: f64) -> f64 {
        match *self {
            Reparam::Identity => theta,
            Reparam::Log => theta.ln(),
            Reparam::Atanh => theta.atanh(),
            Reparam::LogShift(c) => (theta - c).ln(),
        }
    }

    pub fn from_free(&self, z: f64) -> f64 {
        match *self {
            Reparam::Identity => z,
            Reparam::Log => z.exp(),
            Reparam::Atanh => z.tanh(),
            Reparam::LogShift(c) => c + z.exp(),
        }
    }

    /// dθ/dz.
    pub fn jacobian(&self, z: f64) -> f64 {
        match *self {
            Reparam::Identity => 1.0,
            Reparam::Log | Reparam::LogShift(_) => z.exp(),
            Reparam::Atanh => 1.0 - z.tanh().powi(2),
        }
    }
}

pub fn to_free(maps: &[Reparam], theta: &[f64]) -> Vec<f64> {
    maps.iter().zip(theta).map(|(m, t)| m.to_free(*t)).collect()
}

pub fn from_free(maps: &[Reparam], z: &[f64]) -> Vec<f64> {
    maps.iter().zip(z).map(|(m, v)| m.from_free(*v)).collect()
}

/// Delta-method map of standard errors from z to θ.
pub fn delta_method(maps: &[Reparam], z: &[f64], se_z: &[f64]) -> Vec<f64> {
    maps.iter().zip(z).zip(se_z).map(|((m, v), s)| m.jacobian(*v).abs() * s).collect()
}

/// Newey–West truncation lag ⌊4 (n/100)^{2/9}⌋.
pub fn newey_west_lag(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

/// Sandwich standard errors √diag(H⁻¹ Σ H⁻¹ / n) for an M-estimator that
/// maximises the mean of the per-observation `contributions`.
///
/// H is the negative numeric Hessian of the mean; Σ is the Newey–West
/// long-run covariance of the numeric scores with lag `lag` (default
/// [`newey_west_lag`]).
pub fn sandwich_se<F>(contributions: F, theta: &[f64], lag: Option<usize>) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let p = theta.len();
    let base = contributions(theta)?;
    let n = base.len();
    let mean_fn = |t: &[f64]| match contributions(t) {
        Ok(c) if c.len() == n => c.iter().sum::<f64>() / n as f64,
        _ => f64::NAN,
    };
    let hess = numeric_hessian(&mean_fn, theta, 1e-4).ok_or(Error::SingularHessian)?;
    let neg: Matrix = hess.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    let h_inv = invert(&neg).ok_or(Error::SingularHessian)?;

    // scores by central differences of each contribution
    let mut scores = vec![vec![0.0; p]; n];
    let mut tp = theta.to_vec();
    for j in 0..p {
        let h = 1e-5 * theta[j].abs().max(1.0);
        tp[j] = theta[j] + h;
        let up = contributions(&tp)?;
        tp[j] = theta[j] - h;
        let dn = contributions(&tp)?;
        tp[j] = theta[j];
        if up.len() != n || dn.len() != n {
            return Err(Error::SingularHessian);
        }
        for i in 0..n {
            scores[i][j] = (up[i] - dn[i]) / (2.0 * h);
        }
    }

    let lag = lag.unwrap_or_else(|| newey_west_lag(n)).min(n.saturating_sub(1));
    let mut sigma = zeros(p, p);
    for l in 0..=lag {
        let w = if l == 0 { 1.0 } else { 1.0 - l as f64 / (lag as f64 + 1.0) };
        let mut gamma = zeros(p, p);
        for i in l..n {
            for a in 0..p {
                for b in 0..p {
                    gamma[a][b] += scores[i][a] * scores[i - l][b];
                }
            }
        }
        for a in 0..p {
            for b in 0..p {
                let g = gamma[a][b] / n as f64;
                sigma[a][b] += if l == 0 { g } else { w * g };
                if l > 0 {
                    sigma[b][a] += w * g;
                }
            }
        }
    }
    let cov = matmul(&matmul(&h_inv, &sigma), &h_inv);
    (0..p)
        .map(|j| {
            let v = cov[j][j] / n as f64;
            if v >= 0.0 && v.is_finite() {
                Ok(v.sqrt())
            } else {
                Err(Error::SingularHessian)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn location_model_se() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let sd = 2.0;
        let n = 4000;
        let data: Vec<f64> = Normal::new(1.0, sd).unwrap().sample_iter(&mut rng).take(n).collect();
        let contrib = |t: &[f64]| Ok(data.iter().map(|y| -0.5 * ((y - t[0]) / sd).powi(2)).collect());
        let mean = data.iter().sum::<f64>() / n as f64;
        let se = sandwich_se(contrib, &[mean], Some(0)).unwrap();
        assert!((se[0] / (sd / (n as f64).sqrt()) - 1.0).abs() < 0.05);
    }

    #[test]
    fn reparam_round_trip() {
        for (m, t) in [(Reparam::Log, 2.5), (Reparam::Atanh, -0.3), (Reparam::LogShift(2.0), 7.0), (Reparam::Identity, -1.0)] {
            assert!((m.from_free(m.to_free(t)) - t).abs() < 1e-14);
        }
        assert_eq!(newey_west_lag(2202), 7);
    }
}
