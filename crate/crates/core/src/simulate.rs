//! Exact and Euler path simulation of UPDs and of transformed processes.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::rng::{stream, StreamRng};
use crate::transform::Structure;
use crate::upd::{cir_shape_rate, ModelSpec, UpdModel};

/// Default burn-in (in Δ-steps) for paths started at a fixed point.
pub const DEFAULT_BURN_IN: usize = 1000;

/// How the first observation is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    StationaryDraw,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    /// Number of increments; paths have `n + 1` points.
    pub n: usize,
    pub delta: f64,
    pub seed: u64,
    /// Replication index selecting the random stream under `seed`.
    #[serde(default)]
    pub stream: u64,
    #[serde(default)]
    pub burn_in: usize,
    pub init: Init,
    /// Euler sub-steps per Δ.
    pub substeps: usize,
}

impl PathConfig {
    /// Stationary start, no burn-in, one Euler sub-step.
    pub fn new(n: usize, delta: f64, seed: u64) -> Self {
        Self { n, delta, seed, stream: 0, burn_in: 0, init: Init::StationaryDraw, substeps: 1 }
    }

    /// Fixed start with the default burn-in.
    pub fn fixed(mut self, x0: f64) -> Self {
        self.init = Init::Fixed(x0);
        self.burn_in = DEFAULT_BURN_IN;
        self
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps;
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Param("path needs n ≥ 1".into()));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Param(format!("Δ must be positive, got {}", self.delta)));
        }
        if self.substeps < 1 {
            return Err(Error::Param("substeps must be ≥ 1".into()));
        }
        Ok(())
    }

    fn rng(&self) -> StreamRng {
        stream(self.seed, self.stream)
    }
}

/// Exact OU recursion X_{i+1} = α + (X_i − α)e^{−κΔ} + ε.
pub fn simulate_ou_exact(kappa: f64, alpha: f64, sigma: f64, cfg: &PathConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if !(sigma >= 0.0) || !alpha.is_finite() || !kappa.is_finite() {
        return Err(Error::Param(format!("OU parameters κ={kappa}, α={alpha}, σ={sigma}")));
    }
    let mut rng = cfg.rng();
    let mut x = match cfg.init {
        Init::StationaryDraw => {
            if !(kappa > 0.0) {
                return Err(Error::Param(format!("stationary draw needs κ > 0, got {kappa}")));
            }
            let z: f64 = rng.sample(StandardNormal);
            alpha + sigma / (2.0 * kappa).sqrt() * z
        }
        Init::Fixed(x0) => x0,
    };
    let rho = (-kappa * cfg.delta).exp();
    let sd = if kappa == 0.0 {
        sigma * cfg.delta.sqrt()
    } else {
        sigma * (-(-2.0 * kappa * cfg.delta).exp_m1() / (2.0 * kappa)).sqrt()
    };
    let mut out = Vec::with_capacity(cfg.n + 1);
    for i in 0..cfg.burn_in + cfg.n + 1 {
        if i >= cfg.burn_in {
            out.push(x);
        }
        if i < cfg.burn_in + cfg.n {
            let z: f64 = rng.sample(StandardNormal);
            x = alpha + (x - alpha) * rho + sd * z;
        }
    }
    Ok(out)
}

/// Exact CIR sampling through the Poisson mixture of Gammas representing the
/// noncentral χ² transition.
pub fn simulate_cir_exact(kappa: f64, alpha: f64, sigma: f64, cfg: &PathConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if !(kappa > 0.0 && alpha > 0.0 && sigma > 0.0) {
        return Err(Error::Param(format!("CIR needs κ, α, σ > 0, got ({kappa}, {alpha}, {sigma})")));
    }
    let (nu, omega) = cir_shape_rate(kappa, alpha, sigma);
    let mut rng = cfg.rng();
    let gamma = |shape: f64, rng: &mut StreamRng| -> f64 {
        Gamma::new(shape, 1.0).map(|g| g.sample(rng)).unwrap_or(0.0)
    };
    let mut x = match cfg.init {
        Init::StationaryDraw => gamma(nu, &mut rng) / omega,
        Init::Fixed(x0) => {
            if !(x0 > 0.0) {
                return Err(Error::Param(format!("CIR start must be positive, got {x0}")));
            }
            x0
        }
    };
    let decay = (-kappa * cfg.delta).exp();
    let c = 2.0 * kappa / (sigma * sigma * -(-kappa * cfg.delta).exp_m1());
    let mut out = Vec::with_capacity(cfg.n + 1);
    for i in 0..cfg.burn_in + cfg.n + 1 {
        if i >= cfg.burn_in {
            out.push(x);
        }
        if i < cfg.burn_in + cfg.n {
            let lam = c * x * decay;
            let k: f64 = if lam > 0.0 { Poisson::new(lam).map(|p| p.sample(&mut rng)).unwrap_or(0.0) } else { 0.0 };
            x = gamma(nu + k, &mut rng) / c;
            // Gamma draws can underflow to zero for tiny shapes
            if x <= 0.0 {
                x = f64::MIN_POSITIVE;
            }
        }
    }
    Ok(out)
}

/// Euler–Maruyama with `cfg.substeps` steps per Δ. Finite domain bounds are
/// enforced by reflection at a small interior buffer; more than 1% reflected
/// steps is an error.
pub fn simulate_euler(model: &UpdModel, cfg: &PathConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let d = model.domain();
    let mut rng = cfg.rng();
    let mut x = match cfg.init {
        Init::StationaryDraw => {
            let u: f64 = rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12);
            model.stationary_quantile(u)?
        }
        Init::Fixed(x0) => {
            d.check(x0)?;
            x0
        }
    };
    let buffer = |b: f64| 1e-8 * b.abs().max(1.0);
    let lo = d.lo + if d.lo.is_finite() { buffer(d.lo) } else { 0.0 };
    let hi = d.hi - if d.hi.is_finite() { buffer(d.hi) } else { 0.0 };
    let dt = cfg.delta / cfg.substeps as f64;
    let sq = dt.sqrt();
    let total = (cfg.burn_in + cfg.n) * cfg.substeps;
    let mut escapes = 0usize;
    let mut out = Vec::with_capacity(cfg.n + 1);
    for i in 0..cfg.burn_in + cfg.n + 1 {
        if i >= cfg.burn_in {
            out.push(x);
        }
        if i == cfg.burn_in + cfg.n {
            break;
        }
        for _ in 0..cfg.substeps {
            let (mu, s2) = model.coeffs(x);
            let z: f64 = rng.sample(StandardNormal);
            let mut next = x + mu * dt + s2.max(0.0).sqrt() * sq * z;
            if !next.is_finite() {
                return Err(Error::DomainEscape { escapes: escapes + 1, steps: total });
            }
            if next < lo || next > hi {
                escapes += 1;
                if next < lo {
                    next = 2.0 * lo - next;
                }
                if next > hi {
                    next = 2.0 * hi - next;
                }
                next = next.clamp(lo, hi);
            }
            x = next;
        }
    }
    if escapes as f64 > 0.01 * total as f64 {
        return Err(Error::DomainEscape { escapes, steps: total });
    }
    Ok(out)
}

/// Simulates with the best available scheme: exact for OU and CIR (and their
/// reflections), Euler otherwise.
pub fn simulate_model(model: &UpdModel, cfg: &PathConfig) -> Result<Vec<f64>> {
    match model.spec().ok() {
        Some(ModelSpec::Ou { kappa, alpha, sigma }) => simulate_ou_exact(*kappa, *alpha, *sigma, cfg),
        Some(ModelSpec::Cir { kappa, alpha, sigma }) => simulate_cir_exact(*kappa, *alpha, *sigma, cfg),
        Some(ModelSpec::Reflected { inner }) if matches!(**inner, ModelSpec::Ou { .. } | ModelSpec::Cir { .. }) => {
            let mut inner_cfg = *cfg;
            if let Init::Fixed(x0) = cfg.init {
                inner_cfg.init = Init::Fixed(-x0);
            }
            let path = simulate_model(&UpdModel::new((**inner).clone())?, &inner_cfg)?;
            Ok(path.into_iter().map(|x| -x).collect())
        }
        _ => simulate_euler(model, cfg),
    }
}

/// Simulates X and maps it through V.
pub fn simulate_transformed(s: &Structure, cfg: &PathConfig) -> Result<Vec<f64>> {
    let x = simulate_model(&s.model, cfg)?;
    x.into_iter().map(|xi| s.transform.v(xi)).collect()
}

/// Writes `index,time,value` rows.
pub fn write_path_csv<W: Write>(writer: W, delta: f64, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["index", "time", "value"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), (i as f64 * delta).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acf1(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let c0: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
        let c1: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
        c1 / c0
    }

    #[test]
    fn noiseless_ou() {
        let cfg = PathConfig::new(4, 2f64.ln(), 1).fixed(1.0).with_burn_in(0);
        let p = simulate_ou_exact(1.0, 0.0, 0.0, &cfg).unwrap();
        for (a, b) in p.iter().zip([1.0, 0.5, 0.25, 0.125, 0.0625]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn ou_autocorrelation_and_seeds() {
        let cfg = PathConfig::new(50_000, 0.1, 3);
        let p = simulate_ou_exact(1.0, 0.0, 2f64.sqrt(), &cfg).unwrap();
        let r = (-0.1f64).exp();
        let se = ((1.0 - r * r) / 50_000.0).sqrt();
        assert!((acf1(&p) - r).abs() < 3.0 * se);
        assert_eq!(p, simulate_ou_exact(1.0, 0.0, 2f64.sqrt(), &cfg).unwrap());
        assert_ne!(p, simulate_ou_exact(1.0, 0.0, 2f64.sqrt(), &PathConfig::new(50_000, 0.1, 4)).unwrap());
    }

    #[test]
    fn cir_mean_and_positivity() {
        let (k, a, s) = (1.0, 1.5, 0.8);
        let cfg = PathConfig::new(40_000, 0.2, 11);
        let p = simulate_cir_exact(k, a, s, &cfg).unwrap();
        assert!(p.iter().all(|&x| x > 0.0));
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        // stationary variance α σ²/(2κ), inflated for autocorrelation
        let r = (-k * 0.2f64).exp();
        let se = (a * s * s / (2.0 * k) / p.len() as f64 * (1.0 + r) / (1.0 - r)).sqrt();
        assert!((mean - a).abs() < 3.0 * se, "{mean}");
        assert!((acf1(&p) - r).abs() < 0.02);
    }

    #[test]
    fn euler_random_walk_and_ou_variance() {
        let bm = UpdModel::custom("bm", crate::upd::Domain::REAL, |_| (0.0, 1.0));
        let cfg = PathConfig::new(20_000, 0.5, 5).fixed(0.0).with_burn_in(0);
        let p = simulate_euler(&bm, &cfg).unwrap();
        let inc: Vec<f64> = p.windows(2).map(|w| w[1] - w[0]).collect();
        let v = inc.iter().map(|d| d * d).sum::<f64>() / inc.len() as f64;
        assert!((v - 0.5).abs() < 0.03);

        let ou = UpdModel::normalized_ou(1.0).unwrap();
        let cfg = PathConfig::new(100_000, 0.1, 9).with_substeps(64);
        let p = simulate_euler(&ou, &cfg).unwrap();
        let m = p.iter().sum::<f64>() / p.len() as f64;
        let var = p.iter().map(|x| (x - m).powi(2)).sum::<f64>() / p.len() as f64;
        // tolerance covers MC error of the variance of a persistent series
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn csv_export() {
        let mut buf = Vec::new();
        write_path_csv(&mut buf, 0.5, &[1.0, 2.0]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,time,value\n0,0,1\n1,0.5,2\n");
    }
}
