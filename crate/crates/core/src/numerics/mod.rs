//! Numerical building blocks shared by the model, estimation and simulation code.

pub mod linalg;
pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod roots;
pub mod special;

/// Central-difference derivative with a step scaled to `x`.
pub(crate) fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64, rel_step: f64) -> f64 {
    let h = rel_step * x.abs().max(1.0);
    (f(x + h) - f(x - h)) / (2.0 * h)
}
