//! The subcommands. Each writes its outputs under the output directory and a
//! JSON report that echoes the configuration.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use copula_diffusion::estimate::{
    estimate_drift_diffusion, fit_euler_pmle, fit_parametric, fit_pmle, fit_smle, DriftDiffEstimate, SieveSpec,
};
use copula_diffusion::inference::{mc_experiment, pseudo_lr_test, quantile_type7, McRow, CALIBRATED_SKST, KAPPA_FACTORS};
use copula_diffusion::io::{read_series_file, write_csv_rows, write_json};
use copula_diffusion::marginals::silverman_bandwidth;
use copula_diffusion::simulate::{simulate_transformed, write_path_csv};
use copula_diffusion::{
    Dgp, EstimatorKind, FitOptions, FitResult, KernelEstimate, LrTestConfig, LrTestReport, MarginalDescriptor,
    MarginalSource, McConfig, ParametricModel, PathConfig, Skst, Structure,
};
use log::info;
use serde::Serialize;

use crate::config::{ConfigEcho, ModelName, RunConfig};
use crate::CliError;

/// DO parameters (κ, α, σ²) used when `simulate` gets no θ.
const DO_DEFAULT: [f64; 3] = [4.4888, 2.8890, 1.0818];
/// Daily sampling.
const DAILY: f64 = 1.0 / 252.0;

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    command: &'static str,
    config: &'a ConfigEcho,
    #[serde(flatten)]
    body: T,
}

fn write_report<T: Serialize>(dir: &Path, name: &str, command: &'static str, echo: &ConfigEcho, body: T) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    write_json(&path, &Report { command, config: echo, body })?;
    Ok(path)
}

fn prepare_out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))
}

fn fit_options(cfg: &RunConfig, default_restarts: usize) -> FitOptions {
    let mut o = FitOptions { restarts: cfg.restarts.unwrap_or(default_restarts), start: cfg.theta.clone(), ..Default::default() };
    if let Some(s) = cfg.seed {
        o.seed = s;
    }
    if let Some(h) = cfg.bandwidth_factor {
        o.bandwidth_factor = h;
    }
    o
}

/// A simulation design: the structure of Y plus the sampling interval.
struct Design {
    structure: Structure,
    theta: Vec<f64>,
    delta: f64,
}

fn design(cfg: &RunConfig, model: ModelName) -> Result<Design, CliError> {
    match model.dgp() {
        Some(dgp) => {
            let kf = cfg.kappa_factor.unwrap_or(1.0);
            let theta = cfg.theta.clone().unwrap_or_else(|| dgp.theta(kf));
            let delta = match cfg.delta {
                Some(d) => d,
                None => dgp.delta(kf)?,
            };
            let phi = cfg.skst.unwrap_or(CALIBRATED_SKST);
            let structure =
                Structure::with_marginal(dgp.family().model(&theta)?, Arc::new(Skst::new(phi)?), MarginalDescriptor::Skst(phi))?;
            Ok(Design { structure, theta, delta })
        }
        None => {
            let (pm, theta) = match model {
                ModelName::Do => (ParametricModel::Do, cfg.theta.clone().unwrap_or_else(|| DO_DEFAULT.to_vec())),
                _ => (
                    ParametricModel::Ew,
                    cfg.theta.clone().ok_or_else(|| CliError::Config("simulating `ew` needs theta = [κ, α, σ², δ, ϱ]".into()))?,
                ),
            };
            let (m, t) = pm.structure(&theta)?;
            Ok(Design { structure: Structure::new(m, t)?, theta, delta: cfg.delta.unwrap_or(DAILY) })
        }
    }
}

#[derive(Serialize)]
struct SimulateBody<'a> {
    model: ModelName,
    theta: &'a [f64],
    delta: f64,
    n: usize,
    seed: u64,
    observations: usize,
    output: &'a Path,
}

pub fn simulate(cfg: &RunConfig, echo: &ConfigEcho) -> Result<(), CliError> {
    let model = cfg.model.unwrap_or(ModelName::OuSkst);
    let seed = cfg.require_seed("simulate")?;
    let n = cfg.n.unwrap_or(2202);
    let d = design(cfg, model)?;
    let values = simulate_transformed(&d.structure, &PathConfig::new(n, d.delta, seed))?;
    let dir = prepare_out_dir(cfg)?;
    let out = dir.join("simulated.csv");
    write_path_csv(create(&out)?, d.delta, &values)?;
    info!("wrote {} observations to {}", values.len(), out.display());
    let body = SimulateBody { model, theta: &d.theta, delta: d.delta, n, seed, observations: values.len(), output: &out };
    write_report(&dir, "simulate_report.json", "simulate", echo, body)?;
    Ok(())
}

#[derive(Serialize)]
struct TableRow {
    row: String,
    estimate: f64,
    se: Option<f64>,
}

fn fit_table(fit: &FitResult) -> Vec<TableRow> {
    let mut rows: Vec<TableRow> = fit
        .param_names
        .iter()
        .enumerate()
        .map(|(i, name)| TableRow { row: name.clone(), estimate: fit.theta_hat[i], se: fit.se.as_ref().map(|s| s[i]) })
        .collect();
    if let Some(ll) = fit.log_likelihood {
        rows.push(TableRow { row: "LL(10^4)".into(), estimate: ll / 1e4, se: None });
    }
    rows
}

#[derive(Serialize)]
struct FitBody<'a> {
    table: &'a [TableRow],
    fit: &'a FitResult,
}

pub fn fit(cfg: &RunConfig, echo: &ConfigEcho) -> Result<(), CliError> {
    let data = read_series_file(cfg.require_input()?)?;
    let delta = cfg.require_delta()?;
    let model = cfg.model.unwrap_or(ModelName::Nptou);
    let opts = fit_options(cfg, 5);
    let estimator = cfg.estimator.unwrap_or(match model {
        ModelName::Nptou | ModelName::Nptcir => EstimatorKind::Pmle,
        ModelName::OuSkst | ModelName::CirSkst => EstimatorKind::Ppmle,
        ModelName::Do | ModelName::Ew => EstimatorKind::Mle,
    });
    info!("fitting {model:?} by {estimator:?} to {} observations", data.len());
    let fit = match (model, estimator) {
        (ModelName::Nptou | ModelName::Nptcir, e) => {
            let family = model.dgp().expect("family").family();
            match e {
                EstimatorKind::Pmle => fit_pmle(&data, family, delta, &opts)?,
                EstimatorKind::EulerPmle => fit_euler_pmle(&data, family, delta, &opts)?,
                EstimatorKind::Smle => {
                    let sieve = SieveSpec { knots: cfg.sieve_knots.unwrap_or(SieveSpec::default().knots), ..Default::default() };
                    fit_smle(&data, family, delta, &sieve, &opts)?.0
                }
                e => return Err(CliError::Config(format!("{e:?} does not apply to {model:?}; use PMLE, EULER_PMLE or SMLE"))),
            }
        }
        (ModelName::OuSkst, EstimatorKind::Ppmle) => fit_parametric(&data, ParametricModel::OuSkst, delta, &opts)?,
        (ModelName::CirSkst, EstimatorKind::Ppmle) => fit_parametric(&data, ParametricModel::CirSkst, delta, &opts)?,
        (ModelName::Do, EstimatorKind::Mle) => fit_parametric(&data, ParametricModel::Do, delta, &opts)?,
        (ModelName::Ew, EstimatorKind::Mle) => fit_parametric(&data, ParametricModel::Ew, delta, &opts)?,
        (m, e) => return Err(CliError::Config(format!("{e:?} does not apply to {m:?}"))),
    };
    let dir = prepare_out_dir(cfg)?;
    let table = fit_table(&fit);
    write_csv_rows(create(&dir.join("fit_table.csv"))?, &table)?;
    write_report(&dir, "fit_report.json", "fit", echo, FitBody { table: &table, fit: &fit })?;
    Ok(())
}

#[derive(Serialize)]
struct ValueRow {
    row: &'static str,
    value: Option<f64>,
}

#[derive(Serialize)]
struct LrBody<'a> {
    table: &'a [ValueRow],
    test: &'a LrTestReport,
}

pub fn lr_test(cfg: &RunConfig, echo: &ConfigEcho) -> Result<(), CliError> {
    let data = read_series_file(cfg.require_input()?)?;
    let delta = cfg.require_delta()?;
    let seed = cfg.require_seed("lr-test")?;
    let null = match cfg.model.unwrap_or(ModelName::Do) {
        ModelName::Do => ParametricModel::Do,
        ModelName::Ew => ParametricModel::Ew,
        m => return Err(CliError::Config(format!("the pseudo-LR null must be `do` or `ew`, got {m:?}"))),
    };
    let mut test = LrTestConfig::new(null, delta, cfg.bootstrap.unwrap_or(99), seed);
    if let Some(h) = cfg.bandwidth_factor {
        test.bandwidth_factor = h;
    }
    info!("pseudo-LR test of {null:?} with B = {}", test.bootstrap);
    let report = pseudo_lr_test(&data, &test, &FitOptions { start: None, ..fit_options(cfg, 3) })?;
    if report.excluded > 0 {
        log::warn!("{} bootstrap draws excluded", report.excluded);
    }
    let table: Vec<ValueRow> = report.table_rows().into_iter().map(|(row, value)| ValueRow { row, value }).collect();
    let dir = prepare_out_dir(cfg)?;
    write_csv_rows(create(&dir.join("lr_test_table.csv"))?, &table)?;
    write_report(&dir, "lr_test_report.json", "lr-test", echo, LrBody { table: &table, test: &report })?;
    Ok(())
}

#[derive(Serialize)]
struct Scenario {
    dgp: Dgp,
    n: usize,
    kappa_factor: f64,
    delta: f64,
    rows: Vec<McRow>,
}

pub fn mc_tables(cfg: &RunConfig, echo: &ConfigEcho) -> Result<(), CliError> {
    let seed = cfg.require_seed("mc-tables")?;
    let dgps = cfg.dgps.clone().unwrap_or_else(|| vec![Dgp::OuSkst, Dgp::CirSkst]);
    let factors = cfg.kappa_factors.clone().unwrap_or_else(|| KAPPA_FACTORS.to_vec());
    let sizes = cfg.sample_sizes.clone().unwrap_or_else(|| vec![2202, 5505]);
    let opts = FitOptions { compute_se: false, ..fit_options(cfg, 3) };
    let mut scenarios = Vec::new();
    for &dgp in &dgps {
        for &n in &sizes {
            for &kappa_factor in &factors {
                let mc = McConfig {
                    dgp,
                    kappa_factor,
                    n,
                    replications: cfg.replications.unwrap_or(100),
                    seed,
                    delta: cfg.delta,
                    ppmle: cfg.ppmle.unwrap_or(true),
                };
                info!("Monte Carlo {dgp:?}, n = {n}, factor {kappa_factor}, R = {}", mc.replications);
                let report = mc_experiment(&mc, &opts)?;
                scenarios.push(Scenario { dgp, n, kappa_factor, delta: report.delta, rows: report.rows });
            }
        }
    }
    let dir = prepare_out_dir(cfg)?;
    let rows: Vec<&McRow> = scenarios.iter().flat_map(|s| &s.rows).collect();
    write_csv_rows(create(&dir.join("mc_tables.csv"))?, &rows)?;
    write_report(&dir, "mc_report.json", "mc-tables", echo, serde_json::json!({ "scenarios": scenarios }))?;
    Ok(())
}

#[derive(Serialize)]
struct ExportBody<'a> {
    theta_hat: &'a [f64],
    true_theta: Option<&'a [f64]>,
    delta: f64,
    estimate: &'a DriftDiffEstimate,
}

#[derive(Serialize)]
struct DensityRow {
    y: f64,
    f_hat: f64,
    f_true: Option<f64>,
}

pub fn export_functions(cfg: &RunConfig, echo: &ConfigEcho) -> Result<(), CliError> {
    let model = cfg.model.unwrap_or(ModelName::OuSkst);
    let dgp = model
        .dgp()
        .ok_or_else(|| CliError::Config(format!("export-functions needs an OU or CIR based model, got {model:?}")))?;
    let points = cfg.grid_points.unwrap_or(41);
    let probs: Vec<f64> = (0..points).map(|i| 0.01 + 0.98 * i as f64 / (points - 1) as f64).collect();
    let (data, delta, truth) = match &cfg.input {
        Some(_) => (read_series_file(cfg.require_input()?)?, cfg.require_delta()?, None),
        None => {
            let seed = cfg.require_seed("export-functions")?;
            let d = design(cfg, model)?;
            let y = simulate_transformed(&d.structure, &PathConfig::new(cfg.n.unwrap_or(2202), d.delta, seed))?;
            (y, d.delta, Some(d))
        }
    };
    let fit = fit_pmle(&data, dgp.family(), delta, &FitOptions { compute_se: false, ..fit_options(cfg, 5) })?;
    let grid = match &truth {
        Some(d) => d.structure.quantile_grid(points, 0.01, 0.99)?,
        None => probs.iter().map(|&p| quantile_type7(&data, p).expect("non-empty sample")).collect(),
    };
    let h = silverman_bandwidth(&data, cfg.bandwidth_factor.unwrap_or(1.0))?;
    let est = estimate_drift_diffusion(&data, &fit.model()?, &grid, h)?;
    let dir = prepare_out_dir(cfg)?;
    let kde = KernelEstimate::new(&data, h)?;
    let mut density = Vec::with_capacity(grid.len());
    match &truth {
        Some(d) => {
            let (mut mu, mut s2) = (Vec::new(), Vec::new());
            for &y in &grid {
                let (m, s) = d.structure.drift_diffusion(y)?;
                mu.push(m);
                s2.push(s);
                density.push(DensityRow { y, f_hat: kde.pdf(y), f_true: Some(d.structure.stationary_density(y)?) });
            }
            est.write_csv(create(&dir.join("functions.csv"))?, &[("mu_true", &mu), ("sigma2_true", &s2)])?;
        }
        None => {
            density.extend(grid.iter().map(|&y| DensityRow { y, f_hat: kde.pdf(y), f_true: None }));
            est.write_csv(create(&dir.join("functions.csv"))?, &[])?;
        }
    }
    write_csv_rows(create(&dir.join("densities.csv"))?, &density)?;
    let body = ExportBody {
        theta_hat: &fit.theta_hat,
        true_theta: truth.as_ref().map(|d| d.theta.as_slice()),
        delta,
        estimate: &est,
    };
    write_report(&dir, "export_report.json", "export-functions", echo, body)?;
    Ok(())
}
