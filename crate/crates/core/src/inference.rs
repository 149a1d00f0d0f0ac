//! Parametric-bootstrap pseudo-likelihood-ratio test and the Monte Carlo
//! bias/RMSE harness.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::likelihood::{latent_from_uniform, pseudo_observations, CdfVariant};
use crate::estimate::{fit_parametric, fit_pmle, Family, FitOptions, FitResult, ParametricModel};
use crate::marginals::{KernelEstimate, MarginalSource, Skst, SkstParams};
use crate::numerics::rng::derive_seed;
use crate::simulate::{simulate_model, simulate_transformed, PathConfig};
use crate::transform::{MarginalDescriptor, Structure};
use crate::upd::UpdModel;

/// Sample lag-1 autocorrelation (demeaned, normalised by the lag-0 sum).
pub fn acf1(series: &[f64]) -> Result<f64> {
    if series.len() < 3 {
        return Err(Error::DegenerateSample(format!("acf1 needs at least 3 points, got {}", series.len())));
    }
    let n = series.len() as f64;
    let m = series.iter().sum::<f64>() / n;
    let c0: f64 = series.iter().map(|v| (v - m).powi(2)).sum();
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::DegenerateSample("constant series".into()));
    }
    let c1: f64 = series.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    Ok(c1 / c0)
}

/// Sample quantile with linear interpolation between order statistics
/// (type 7).
pub fn quantile_type7(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

// ------------------------------------------------------------------ pseudo-LR test

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrTestConfig {
    pub null_model: ParametricModel,
    pub delta: f64,
    /// Bootstrap replications.
    pub bootstrap: usize,
    pub seed: u64,
    /// Multiplier of the Silverman bandwidth for f̂_Y.
    pub bandwidth_factor: f64,
}

impl LrTestConfig {
    pub fn new(null_model: ParametricModel, delta: f64, bootstrap: usize, seed: u64) -> Self {
        Self { null_model, delta, bootstrap, seed, bandwidth_factor: 1.5 }
    }

    /// The semiparametric alternative sharing the null's UPD family.
    pub fn alternative(&self) -> Result<Family> {
        match self.null_model {
            ParametricModel::Do => Ok(Family::NormalizedOu),
            ParametricModel::Ew => Ok(Family::NormalizedCir),
            m => Err(Error::Param(format!("{m:?} is not a supported null model"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LrStatistic {
    pub lr: f64,
    pub pseudo_ll: f64,
    pub ll_null: f64,
    pub bandwidth: f64,
    pub null_fit: FitResult,
    pub alternative_fit: FitResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LrTestReport {
    pub config: LrTestConfig,
    pub alternative: Family,
    pub observed: LrStatistic,
    pub cv_05: Option<f64>,
    pub cv_01: Option<f64>,
    pub p_value: Option<f64>,
    /// Bootstrap statistics of the successful draws, by draw index.
    pub bootstrap_lr: Vec<f64>,
    /// Draws whose refits failed and were excluded.
    pub excluded: usize,
    pub bandwidth_policy: String,
}

impl LrTestReport {
    /// Rows of the test table: LR, critical values, p-value.
    pub fn table_rows(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("LR", Some(self.observed.lr)),
            ("CV_{0.05}", self.cv_05),
            ("CV_{0.01}", self.cv_01),
            ("p-value", self.p_value),
        ]
    }
}

/// Pseudo log-likelihood Σ [log p_X(Ũ_i | Ũ_{i−1}) + log f̂_Y(y_i) − log f_X(Ũ_i)].
pub fn pseudo_loglik(data: &[f64], model: &UpdModel, delta: f64, kde: &KernelEstimate) -> Result<f64> {
    let u = pseudo_observations(data, CdfVariant::Empirical)?;
    let x = latent_from_uniform(model, &u)?;
    let spec = model.default_transition(delta);
    let mut total = 0.0;
    for i in 1..data.len() {
        total += model.ln_transition_density(x[i], x[i - 1], &spec)? + kde.pdf(data[i]).ln()
            - model.ln_stationary_density(x[i])?;
    }
    if !total.is_finite() {
        return Err(Error::NonFiniteLikelihood { index: 0 });
    }
    Ok(total)
}

/// LR = pseudo-LL(alternative) − LL(null), both summed over transitions.
pub fn lr_statistic(data: &[f64], cfg: &LrTestConfig, opts: &FitOptions, warm: Option<&LrStatistic>) -> Result<LrStatistic> {
    let family = cfg.alternative()?;
    let null_opts = FitOptions { start: warm.map(|w| w.null_fit.theta_hat.clone()), ..opts.clone() };
    let null_fit = fit_parametric(data, cfg.null_model, cfg.delta, &null_opts)?;
    let alt_opts = FitOptions { start: warm.map(|w| w.alternative_fit.theta_hat.clone()), ..opts.clone() };
    let alternative_fit = fit_pmle(data, family, cfg.delta, &alt_opts)?;
    let kde = KernelEstimate::silverman(data, cfg.bandwidth_factor)?;
    let pseudo_ll = pseudo_loglik(data, &alternative_fit.model()?, cfg.delta, &kde)?;
    let ll_null = null_fit.log_likelihood.ok_or_else(|| Error::Param("null fit has no likelihood".into()))?;
    Ok(LrStatistic { lr: pseudo_ll - ll_null, pseudo_ll, ll_null, bandwidth: kde.bandwidth(), null_fit, alternative_fit })
}

/// Parametric-bootstrap pseudo-LR test of a parametric transform against the
/// nonparametric alternative with the same UPD family.
pub fn pseudo_lr_test(data: &[f64], cfg: &LrTestConfig, opts: &FitOptions) -> Result<LrTestReport> {
    let observed = lr_statistic(data, cfg, opts, None)?;
    let (model, transform) = cfg.null_model.structure(&observed.null_fit.theta_hat)?;
    let structure = Structure::new(model, transform)?;
    let boot_opts = FitOptions { compute_se: false, ..opts.clone() };
    let draws: Vec<Option<f64>> = (0..cfg.bootstrap as u64)
        .into_par_iter()
        .map(|b| {
            let path = PathConfig::new(data.len() - 1, cfg.delta, cfg.seed).with_stream(b);
            let sim = simulate_transformed(&structure, &path).ok()?;
            match lr_statistic(&sim, cfg, &boot_opts, Some(&observed)) {
                Ok(s) => Some(s.lr),
                Err(e) => {
                    log::warn!("bootstrap draw {b} excluded: {e}");
                    None
                }
            }
        })
        .collect();
    let bootstrap_lr: Vec<f64> = draws.iter().flatten().copied().collect();
    let excluded = draws.len() - bootstrap_lr.len();
    let (cv_05, cv_01, p_value) = if bootstrap_lr.is_empty() {
        (None, None, None)
    } else {
        let exceed = bootstrap_lr.iter().filter(|&&v| v >= observed.lr).count();
        (
            quantile_type7(&bootstrap_lr, 0.95),
            quantile_type7(&bootstrap_lr, 0.99),
            Some(exceed as f64 / bootstrap_lr.len() as f64),
        )
    };
    Ok(LrTestReport {
        config: *cfg,
        alternative: cfg.alternative()?,
        observed,
        cv_05,
        cv_01,
        p_value,
        bootstrap_lr,
        excluded,
        bandwidth_policy: format!("{} x Silverman, recomputed for every bootstrap sample", cfg.bandwidth_factor),
    })
}

// ------------------------------------------------------------------ Monte Carlo harness

/// Data-generating processes of the simulation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dgp {
    OuSkst,
    CirSkst,
}

/// Calibrated SKST marginal of the simulation study.
pub const CALIBRATED_SKST: SkstParams = SkstParams::new(0.0835, 0.0358, 0.5193, 25.3708);
/// Persistence multipliers of the simulation study.
pub const KAPPA_FACTORS: [f64; 4] = [1.0, 5.0, 10.0, 20.0];

impl Dgp {
    pub fn family(&self) -> Family {
        match self {
            Dgp::OuSkst => Family::NormalizedOu,
            Dgp::CirSkst => Family::NormalizedCir,
        }
    }

    pub fn parametric(&self) -> ParametricModel {
        match self {
            Dgp::OuSkst => ParametricModel::OuSkst,
            Dgp::CirSkst => ParametricModel::CirSkst,
        }
    }

    /// True θ at a persistence factor.
    pub fn theta(&self, kappa_factor: f64) -> Vec<f64> {
        match self {
            Dgp::OuSkst => vec![1.1376 * kappa_factor],
            Dgp::CirSkst => vec![0.7653 * kappa_factor, 1.1653],
        }
    }

    /// First-order autocorrelation printed for each factor in the study tables.
    pub fn printed_rho1(&self, kappa_factor: f64) -> Result<f64> {
        let table = match self {
            Dgp::OuSkst => [0.9944, 0.9758, 0.9531, 0.9093],
            Dgp::CirSkst => [0.9921, 0.9675, 0.9399, 0.8917],
        };
        KAPPA_FACTORS
            .iter()
            .position(|&f| f == kappa_factor)
            .map(|i| table[i])
            .ok_or_else(|| Error::Param(format!("no printed ρ₁ for factor {kappa_factor}; set Δ explicitly")))
    }

    /// Δ = −ln(ρ₁)/κ matching the printed persistence.
    pub fn delta(&self, kappa_factor: f64) -> Result<f64> {
        Ok(-self.printed_rho1(kappa_factor)?.ln() / self.theta(kappa_factor)[0])
    }

    pub fn structure(&self, kappa_factor: f64) -> Result<Structure> {
        let model = self.family().model(&self.theta(kappa_factor))?;
        Structure::with_marginal(model, Arc::new(Skst::new(CALIBRATED_SKST)?), MarginalDescriptor::Skst(CALIBRATED_SKST))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McConfig {
    pub dgp: Dgp,
    pub kappa_factor: f64,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    /// Sampling interval; defaults to the printed-ρ₁ rule.
    pub delta: Option<f64>,
    /// Also run the parametric two-stage estimator.
    pub ppmle: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McRow {
    pub dgp: Dgp,
    pub kappa_factor: f64,
    pub n: usize,
    pub parameter: String,
    pub true_value: f64,
    pub rho1_printed: Option<f64>,
    pub rho1_sample: f64,
    pub ppmle_rel_bias: Option<f64>,
    pub ppmle_rel_rmse: Option<f64>,
    pub pmle_rel_bias: f64,
    pub pmle_rel_rmse: f64,
    pub pmle_sd: f64,
    pub replications: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McReport {
    pub config: McConfig,
    pub delta: f64,
    pub rows: Vec<McRow>,
    /// PMLE estimates per successful replication.
    pub pmle_estimates: Vec<Vec<f64>>,
    pub ppmle_estimates: Vec<Vec<f64>>,
}

struct Replication {
    pmle: Vec<f64>,
    ppmle: Option<Vec<f64>>,
    rho1: f64,
}

fn rel_bias_rmse(est: &[Vec<f64>], j: usize, truth: f64) -> (f64, f64, f64) {
    let n = est.len() as f64;
    let vals: Vec<f64> = est.iter().map(|e| e[j]).collect();
    let mean = vals.iter().sum::<f64>() / n;
    let mse = vals.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    ((mean - truth) / truth, mse.sqrt() / truth, var.sqrt())
}

/// Simulates `replications` paths and fits PMLE (and optionally PPMLE) on each.
/// Replication `r` uses random stream `r` under `seed`, so results do not
/// depend on the number of worker threads.
pub fn mc_experiment(cfg: &McConfig, opts: &FitOptions) -> Result<McReport> {
    if cfg.replications < 2 {
        return Err(Error::Param("Monte Carlo needs at least 2 replications".into()));
    }
    let delta = match cfg.delta {
        Some(d) => d,
        None => cfg.dgp.delta(cfg.kappa_factor)?,
    };
    let structure = cfg.dgp.structure(cfg.kappa_factor)?;
    let truth = cfg.dgp.theta(cfg.kappa_factor);
    let family = cfg.dgp.family();
    let fit_opts = FitOptions { compute_se: false, ..opts.clone() };
    let reps: Vec<std::result::Result<Replication, String>> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| {
            let path = PathConfig::new(cfg.n, delta, cfg.seed).with_stream(r);
            let y = simulate_transformed(&structure, &path).map_err(|e| e.to_string())?;
            let o = FitOptions { seed: derive_seed(cfg.seed, r), ..fit_opts.clone() };
            let pmle = fit_pmle(&y, family, delta, &o).map_err(|e| e.to_string())?;
            let ppmle = if cfg.ppmle {
                Some(fit_parametric(&y, cfg.dgp.parametric(), delta, &o).map_err(|e| e.to_string())?.theta_hat)
            } else {
                None
            };
            Ok(Replication { pmle: pmle.theta_hat, ppmle, rho1: acf1(&y).map_err(|e| e.to_string())? })
        })
        .collect();
    let mut ok = Vec::new();
    let mut failed = 0;
    for (r, rep) in reps.into_iter().enumerate() {
        match rep {
            Ok(v) => ok.push(v),
            Err(e) => {
                failed += 1;
                log::warn!("replication {r} failed: {e}");
            }
        }
    }
    if ok.len() < 2 {
        return Err(Error::Param(format!("only {} replications succeeded", ok.len())));
    }
    let pmle: Vec<Vec<f64>> = ok.iter().map(|r| r.pmle.clone()).collect();
    let ppmle: Vec<Vec<f64>> = ok.iter().filter_map(|r| r.ppmle.clone()).collect();
    let rho1 = ok.iter().map(|r| r.rho1).sum::<f64>() / ok.len() as f64;
    let rows = family
        .param_names()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let (b, r, sd) = rel_bias_rmse(&pmle, j, truth[j]);
            let pp = (!ppmle.is_empty()).then(|| rel_bias_rmse(&ppmle, j, truth[j]));
            McRow {
                dgp: cfg.dgp,
                kappa_factor: cfg.kappa_factor,
                n: cfg.n,
                parameter: name.to_string(),
                true_value: truth[j],
                rho1_printed: cfg.dgp.printed_rho1(cfg.kappa_factor).ok(),
                rho1_sample: rho1,
                ppmle_rel_bias: pp.map(|p| p.0),
                ppmle_rel_rmse: pp.map(|p| p.1),
                pmle_rel_bias: b,
                pmle_rel_rmse: r,
                pmle_sd: sd,
                replications: ok.len(),
                failed,
            }
        })
        .collect();
    Ok(McReport { config: cfg.clone(), delta, rows, pmle_estimates: pmle, ppmle_estimates: ppmle })
}

/// Simulates the latent UPD of a DGP (for diagnostics).
pub fn simulate_latent(dgp: Dgp, kappa_factor: f64, cfg: &PathConfig) -> Result<Vec<f64>> {
    simulate_model(&dgp.family().model(&dgp.theta(kappa_factor))?, cfg)
}
