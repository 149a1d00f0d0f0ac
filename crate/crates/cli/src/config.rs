//! Run configuration: a TOML or JSON file, overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use copula_diffusion::{Dgp, EstimatorKind, SkstParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Model names accepted by the `model` field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    /// Normalised OU with an SKST marginal (simulation DGP, two-stage fit).
    OuSkst,
    /// Normalised CIR with an SKST marginal.
    CirSkst,
    /// Normalised OU with a nonparametric transformation.
    Nptou,
    /// Normalised CIR with a nonparametric transformation.
    Nptcir,
    /// Exponential of an OU process.
    Do,
    /// Reciprocal-shift transform of a CIR process.
    Ew,
}

impl ModelName {
    pub fn dgp(self) -> Option<Dgp> {
        match self {
            ModelName::OuSkst | ModelName::Nptou => Some(Dgp::OuSkst),
            ModelName::CirSkst | ModelName::Nptcir => Some(Dgp::CirSkst),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelName>,
    /// True parameters (simulate) or starting values (fit).
    pub theta: Option<Vec<f64>>,
    /// SKST marginal of the simulation DGP.
    pub skst: Option<SkstParams>,
    /// Persistence multiplier of the simulation study.
    pub kappa_factor: Option<f64>,
    pub delta: Option<f64>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub estimator: Option<EstimatorKind>,
    pub bandwidth_factor: Option<f64>,
    pub sieve_knots: Option<usize>,
    pub restarts: Option<usize>,
    /// Bootstrap draws of the pseudo-LR test.
    pub bootstrap: Option<usize>,
    /// Monte Carlo replications.
    pub replications: Option<usize>,
    pub dgps: Option<Vec<Dgp>>,
    pub kappa_factors: Option<Vec<f64>>,
    pub sample_sizes: Option<Vec<usize>>,
    pub ppmle: Option<bool>,
    pub grid_points: Option<usize>,
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// The configuration as read, before overrides, for echoing into reports.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub path: Option<PathBuf>,
    pub text: Option<String>,
    pub effective: RunConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        };
        Ok((cfg, text))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn require_seed(&self, command: &str) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Config(format!("`{command}` needs a seed (config field `seed` or --seed)")))
    }

    pub fn require_delta(&self) -> Result<f64, CliError> {
        self.delta.ok_or_else(|| CliError::Config("the sampling interval `delta` is required".into()))
    }

    pub fn require_input(&self) -> Result<&Path, CliError> {
        let p = self.input.as_deref().ok_or_else(|| CliError::Config("an `input` CSV path is required".into()))?;
        if !p.exists() {
            return Err(CliError::Config(format!("input file {} does not exist", p.display())));
        }
        Ok(p)
    }

    /// Range checks on the numeric fields.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return bad(format!("delta must be positive, got {d}"));
            }
        }
        if let Some(n) = self.n {
            if n < 10 {
                return bad(format!("n must be at least 10, got {n}"));
            }
        }
        if let Some(h) = self.bandwidth_factor {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("bandwidth_factor must be positive, got {h}"));
            }
        }
        if let Some(k) = self.sieve_knots {
            if !(4..=60).contains(&k) {
                return bad(format!("sieve_knots must lie in 4..=60, got {k}"));
            }
        }
        if self.restarts == Some(0) {
            return bad("restarts must be at least 1".into());
        }
        if let Some(r) = self.replications {
            if r < 2 {
                return bad(format!("replications must be at least 2, got {r}"));
            }
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        if let Some(g) = self.grid_points {
            if g < 2 {
                return bad(format!("grid_points must be at least 2, got {g}"));
            }
        }
        for f in self.kappa_factors.iter().flatten().chain(self.kappa_factor.iter()) {
            if !(*f > 0.0 && f.is_finite()) {
                return bad(format!("kappa factors must be positive, got {f}"));
            }
        }
        if let Some(t) = &self.theta {
            if t.iter().any(|v| !v.is_finite()) {
                return bad("theta contains non-finite values".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_toml_and_json() {
        let t: RunConfig = toml::from_str("model = \"ou-skst\"\nn = 500\nseed = 3\nestimator = \"PMLE\"\n").unwrap();
        assert_eq!(t.model, Some(ModelName::OuSkst));
        assert_eq!(t.estimator, Some(EstimatorKind::Pmle));
        let j: RunConfig = serde_json::from_str(r#"{"model":"do","dgps":["ou_skst"],"delta":0.004}"#).unwrap();
        assert_eq!(j.dgps, Some(vec![Dgp::OuSkst]));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sede = 1\n").is_err());
    }

    #[test]
    fn range_checks() {
        let c = RunConfig { delta: Some(-1.0), ..Default::default() };
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        assert!(RunConfig::default().validate().is_ok());
    }
}
