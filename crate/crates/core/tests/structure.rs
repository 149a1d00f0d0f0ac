use std::sync::Arc;

use copula_diffusion::estimate::likelihood::full_contributions;
use copula_diffusion::inference::CALIBRATED_SKST;
use copula_diffusion::marginals::MarginalSource;
use copula_diffusion::numerics::quadrature::{integrate_value, QuadSpec};
use copula_diffusion::simulate::simulate_transformed;
use copula_diffusion::transform::{AffineInverse, CdfMap, ModelMarginal, ScaleMap};
use copula_diffusion::{
    copula_density, equivalence_check, Dgp, Domain, MarginalDescriptor, ModelSpec, PathConfig, Skst, Structure,
    Transformation, UpdModel,
};
use proptest::prelude::*;

fn skst_structure(model: UpdModel) -> Structure {
    Structure::with_marginal(model, Arc::new(Skst::new(CALIBRATED_SKST).unwrap()), MarginalDescriptor::Skst(CALIBRATED_SKST))
        .unwrap()
}

#[test]
fn identity_transform_returns_model_coefficients() {
    let ou = UpdModel::new(ModelSpec::Ou { kappa: 0.8, alpha: -0.3, sigma: 1.1 }).unwrap();
    let id = Structure::new(ou.clone(), Transformation::identity(Domain::REAL)).unwrap();
    let cir = UpdModel::normalized_cir(2.0, 1.5).unwrap();
    // V = F_X⁻¹ ∘ F_X through the generic marginal-induced path
    let self_induced =
        Structure::with_marginal(cir.clone(), Arc::new(ModelMarginal(cir.clone())), MarginalDescriptor::Other { name: "self".into() })
            .unwrap();
    for i in 0..21 {
        let x = -1.5 + 0.15 * i as f64;
        let (m, s2) = id.drift_diffusion(x).unwrap();
        let (mx, s2x) = ou.drift_diffusion(x).unwrap();
        assert!((m - mx).abs() < 1e-8 && (s2 - s2x).abs() < 1e-8);
        let z = 0.2 + 0.2 * i as f64;
        let (m, s2) = self_induced.drift_diffusion(z).unwrap();
        let (mx, s2x) = cir.drift_diffusion(z).unwrap();
        assert!((m - mx).abs() < 1e-8, "mu at {z}: {m} vs {mx}");
        assert!((s2 - s2x).abs() < 1e-8, "sigma2 at {z}: {s2} vs {s2x}");
    }
}

#[test]
fn copula_has_uniform_margins() {
    let quad = QuadSpec::tight();
    let models = [(UpdModel::normalized_ou(3.0).unwrap(), 0.05), (UpdModel::normalized_cir(2.0, 1.3).unwrap(), 0.1)];
    for (model, delta) in &models {
        let spec = model.default_transition(*delta);
        for u0 in [0.1, 0.5, 0.9] {
            let mass = integrate_value(|u| copula_density(model, u0, u, &spec).unwrap(), 1e-12, 1.0 - 1e-12, &quad).unwrap();
            assert!((mass - 1.0).abs() < 1e-6, "u0 = {u0}: {mass}");
        }
    }
}

#[test]
fn transition_density_factors_into_copula_and_marginal() {
    let s = skst_structure(UpdModel::normalized_ou(5.0).unwrap());
    let spec = s.model.default_transition(0.02);
    let skst = Skst::new(CALIBRATED_SKST).unwrap();
    for (y0, y) in [(0.05, 0.06), (0.08, 0.12), (0.15, 0.1)] {
        let lhs = s.ln_transition_density(y, y0, &spec).unwrap();
        let c = copula_density(&s.model, skst.cdf(y0), skst.cdf(y), &spec).unwrap();
        let rhs = c.ln() + skst.pdf(y).ln();
        assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
    }
}

#[test]
fn full_likelihood_matches_structure_density() {
    let dgp = Dgp::CirSkst;
    let s = dgp.structure(5.0).unwrap();
    let delta = dgp.delta(5.0).unwrap();
    let y = simulate_transformed(&s, &PathConfig::new(200, delta, 8)).unwrap();
    let spec = s.model.default_transition(delta);
    let terms = full_contributions(&y, &s.model, &s.transform, &spec).unwrap();
    for i in 1..y.len() {
        let direct = s.ln_transition_density(y[i], y[i - 1], &spec).unwrap();
        assert!((terms[i - 1] - direct).abs() < 1e-10);
    }
}

#[test]
fn marginal_induced_derivatives_match_finite_differences() {
    let s = skst_structure(UpdModel::normalized_cir(1.0, 1.1653).unwrap());
    for y in [0.02, 0.06, 0.0835, 0.12, 0.2] {
        let [_, u1, u2, u3] = s.transform.u_derivs(y).unwrap();
        let h = 1e-5;
        let at = |t: f64| s.transform.u_derivs(t).unwrap();
        let (p, m) = (at(y + h), at(y - h));
        assert!(((p[0] - m[0]) / (2.0 * h) / u1 - 1.0).abs() < 1e-6);
        assert!(((p[1] - m[1]) / (2.0 * h) - u2).abs() < 1e-5 * u2.abs().max(u1));
        assert!(((p[2] - m[2]) / (2.0 * h) - u3).abs() < 1e-4 * u3.abs().max(u1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rewrites_leave_observed_dynamics_unchanged(kappa in 0.2f64..40.0, cir in any::<bool>()) {
        let model = if cir { UpdModel::normalized_cir(kappa, 1.1653).unwrap() } else { UpdModel::normalized_ou(kappa).unwrap() };
        let s = skst_structure(model);
        let grid = s.quantile_grid(11, 0.02, 0.98).unwrap();
        let by_cdf = s.rewrite(Arc::new(CdfMap::new(&s.model).unwrap()), "cdf").unwrap();
        let by_scale = s.rewrite(Arc::new(ScaleMap::new(&s.model).unwrap()), "scale").unwrap();
        prop_assert!(equivalence_check(&s, &by_cdf, &grid).unwrap() <= 1e-6);
        prop_assert!(equivalence_check(&s, &by_scale, &grid).unwrap() <= 1e-6);
    }

    #[test]
    fn affine_rewrite_is_exact(a in -2.0f64..2.0, b in 0.1f64..5.0) {
        let ou = UpdModel::new(ModelSpec::Ou { kappa: 1.3, alpha: 0.4, sigma: 0.6 }).unwrap();
        let s = Structure::new(ou, Transformation::affine(0.5, 2.0, Domain::REAL).unwrap()).unwrap();
        let r = s.rewrite(Arc::new(AffineInverse { a, b, y_domain: Domain::REAL }), "affine").unwrap();
        let grid: Vec<f64> = (0..9).map(|i| -1.0 + 0.5 * i as f64).collect();
        prop_assert!(equivalence_check(&s, &r, &grid).unwrap() <= 1e-9);
    }
}
